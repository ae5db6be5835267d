#pragma once

#include "cryostoch/ctf.hpp"
#include "cryostoch/grid.hpp"
#include "cryostoch/operators.hpp"
#include "cryostoch/quadrature.hpp"

#include <optional>
#include <span>
#include <vector>

namespace cryostoch {

struct NoiseModel {
    double sigma = 1.0; ///< real-space per-pixel noise standard deviation
};

/// Exponential prior on positive voxels, cubic penalty on negative ones.
struct PriorParams {
    double lambda_plus = 1e-4;
    double lambda_minus = 1e-4;
};

/// One particle image restricted to the active frequency mask.
struct Observation {
    int id = 0;
    std::vector<Complex> coefficients; ///< fft2 of the image at the mask members
    CtfParams ctf;
    std::vector<double> ctf_values;    ///< CTF at the mask members
};

[[nodiscard]] Observation make_observation(const ParticleImage& image, const CtfParams& ctf, double pixel_size,
                                           const FrequencyMask& mask, int id);

struct MarginalResult {
    double log_marginal = 0.0;
    std::vector<double> responsibilities; ///< empty unless requested
};

/// Geometry of the forward model: grid side, frequency mask, Fourier
/// oversampling and slice interpolation kernel.
///
/// The volume is zero padded to `oversampling * N` (centre kept at the grid
/// centre) before its 3D transform; slices are then sampled from the finer
/// Fourier grid.
class Projector {
public:
    Projector(int side, FrequencyMask mask, int oversampling = 2, Interpolation kernel = Interpolation::trilinear);
    Projector(int side, double cutoff_fraction, int oversampling = 2,
              Interpolation kernel = Interpolation::trilinear);

    [[nodiscard]] int side() const noexcept { return side_; }
    [[nodiscard]] int oversampling() const noexcept { return oversampling_; }
    [[nodiscard]] int fourier_side() const noexcept { return side_ * oversampling_; }
    [[nodiscard]] Interpolation kernel() const noexcept { return kernel_; }
    [[nodiscard]] const FrequencyMask& mask() const noexcept { return mask_; }

    /// Fourier volume of the zero-padded volume.
    [[nodiscard]] FourierVolume transform(const VolumeGrid& v) const;
    /// Adjoint of `transform` restricted to real volumes: Re(crop(F^H g)).
    [[nodiscard]] VolumeGrid transform_adjoint(const FourierVolume& g) const;

    void sample(const FourierVolume& f, const Mat3& rotation, std::span<Complex> out) const;
    void accumulate_adjoint(std::span<const Complex> values, const Mat3& rotation, FourierVolume& acc) const;

    /// Fourier-space noise variance sigma^2 N^2 under the unnormalized DFT.
    [[nodiscard]] double fourier_variance(const NoiseModel& noise) const;
    /// Gaussian normalizer -(d/2) log(2 pi sigma^2), d = number of masked coefficients.
    [[nodiscard]] double log_normalizer(const NoiseModel& noise) const;

private:
    int side_;
    int oversampling_;
    Interpolation kernel_;
    FrequencyMask mask_;
};

void require_noise(const NoiseModel& noise);

// Single-image operations. These evaluate each pose independently through the
// full operator chain and serve as the serial reference for BatchEvaluator.

/// log N(I | S_t C P_R V, sigma'^2) over the masked coefficients.
[[nodiscard]] double per_pose_loglik(const Projector& proj, const Observation& obs, const Pose& pose,
                                     const FourierVolume& fv, const NoiseModel& noise);

/// log sum_j w_j exp(l_j) by log-sum-exp; responsibilities on request.
[[nodiscard]] MarginalResult marginal_loglik(const Projector& proj, const Observation& obs,
                                             const PoseScheme& scheme, const FourierVolume& fv,
                                             const NoiseModel& noise, bool want_responsibilities);

struct MarginalGradient {
    double log_marginal;
    VolumeGrid gradient; ///< d log p(I | theta, V) / dV
};

[[nodiscard]] MarginalGradient marginal_grad(const Projector& proj, const Observation& obs,
                                             const PoseScheme& scheme, const VolumeGrid& v,
                                             const NoiseModel& noise);

/// Fourier-domain part of marginal_grad with caller-supplied responsibilities:
/// sum_j r_j A_j^H (I - y_j) / sigma'^2, accumulated in pose order.
[[nodiscard]] FourierVolume marginal_grad_fourier(const Projector& proj, const Observation& obs,
                                                  const PoseScheme& scheme, const FourierVolume& fv,
                                                  const NoiseModel& noise, std::span<const double> responsibilities);

/// log-sum-exp of log_weights[j] + loglik[j]; fills responsibilities when non-empty.
[[nodiscard]] double log_sum_exp(std::span<const double> log_weights, std::span<const double> logliks,
                                 std::span<double> responsibilities = {});

[[nodiscard]] double log_prior(const VolumeGrid& v, const PriorParams& p);
[[nodiscard]] VolumeGrid log_prior_grad(const VolumeGrid& v, const PriorParams& p);

/// Batched evaluation of many images against one volume.
///
/// Slices are sampled once per orientation and shared by all images; images
/// are processed in parallel and gradient contributions are reduced per
/// orientation in image order, so results do not depend on the thread count.
class BatchEvaluator {
public:
    BatchEvaluator(const Projector& proj, const PoseScheme& scheme, NoiseModel noise);

    struct Result {
        std::vector<double> log_marginals;     ///< in input order
        std::optional<FourierVolume> gradient; ///< sum_i weight_i * Fourier gradient of log p_i
    };

    /// Log marginals of every observation and, when `gradient_weight` is set,
    /// `gradient_weight` times the summed Fourier-domain gradient.
    [[nodiscard]] Result evaluate(std::span<const Observation* const> batch, const FourierVolume& fv,
                                  std::optional<double> gradient_weight = std::nullopt) const;

private:
    const Projector& proj_;
    const PoseScheme& scheme_;
    NoiseModel noise_;
    std::vector<std::vector<Complex>> phases_; ///< per shift, at mask members
    std::vector<double> log_weights_;
};

struct ObjectiveValue {
    double value;
    VolumeGrid gradient;
};

/// Unbiased minibatch estimate of
///   -sum_i log p(I_i | theta_i, V) - log p(V)
/// scaled by K / B, with its gradient.
[[nodiscard]] ObjectiveValue minibatch_objective(const Projector& proj, std::span<const Observation* const> batch,
                                                 const VolumeGrid& v, const PoseScheme& scheme,
                                                 const NoiseModel& noise, const PriorParams& prior,
                                                 std::size_t dataset_size);

/// Mean negative log marginal over `observations`, summed in id order.
[[nodiscard]] double dataset_nll(const Projector& proj, std::span<const Observation* const> observations,
                                 const VolumeGrid& v, const PoseScheme& scheme, const NoiseModel& noise);

} // namespace cryostoch
