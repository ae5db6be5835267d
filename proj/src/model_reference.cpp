#include "cryostoch/error.hpp"
#include "cryostoch/fft.hpp"
#include "cryostoch/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cryostoch {
namespace {

void check_observation(const Projector& proj, const Observation& obs) {
    const auto d = proj.mask().count();
    if (obs.coefficients.size() != d || obs.ctf_values.size() != d) {
        throw DimensionError("observation does not match the projector's frequency mask");
    }
}

// Masked prediction S_t C P_R V for one pose.
std::vector<Complex> predict(const Projector& proj, const Observation& obs, const Pose& pose,
                             const FourierVolume& fv) {
    std::vector<Complex> slice(proj.mask().count());
    proj.sample(fv, pose.rotation, slice);
    const auto phases = shift_phases(proj.mask(), pose.shift);
    for (std::size_t k = 0; k < slice.size(); ++k) {
        slice[k] *= phases[k] * obs.ctf_values[k];
    }
    return slice;
}

} // namespace

Observation make_observation(const ParticleImage& image, const CtfParams& ctf, double pixel_size,
                             const FrequencyMask& mask, int id) {
    if (image.side() != mask.side()) {
        throw DimensionError("make_observation: image side does not match mask");
    }
    ctf.validate();
    return Observation{id, mask.gather(fft2(image)), ctf, ctf_on_mask(ctf, mask, pixel_size)};
}

double log_sum_exp(std::span<const double> log_weights, std::span<const double> logliks,
                   std::span<double> responsibilities) {
    if (log_weights.size() != logliks.size() || logliks.empty()) {
        throw DimensionError("log_sum_exp: size mismatch or empty input");
    }
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < logliks.size(); ++j) {
        const double a = log_weights[j] + logliks[j];
        if (std::isnan(a)) {
            throw NumericalError("log-likelihood is NaN");
        }
        peak = std::max(peak, a);
    }
    if (!std::isfinite(peak)) {
        throw NumericalError("marginal likelihood is not finite");
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < logliks.size(); ++j) {
        sum += std::exp(log_weights[j] + logliks[j] - peak);
    }
    const double total = peak + std::log(sum);
    if (!responsibilities.empty()) {
        for (std::size_t j = 0; j < logliks.size(); ++j) {
            responsibilities[j] = std::exp(log_weights[j] + logliks[j] - total);
        }
    }
    return total;
}

double per_pose_loglik(const Projector& proj, const Observation& obs, const Pose& pose, const FourierVolume& fv,
                       const NoiseModel& noise) {
    require_noise(noise);
    check_observation(proj, obs);
    require_rotation(pose.rotation);
    const auto pred = predict(proj, obs, pose, fv);
    double q = 0.0;
    for (std::size_t k = 0; k < pred.size(); ++k) {
        q += std::norm(obs.coefficients[k] - pred[k]);
    }
    return -q / (2.0 * proj.fourier_variance(noise)) + proj.log_normalizer(noise);
}

MarginalResult marginal_loglik(const Projector& proj, const Observation& obs, const PoseScheme& scheme,
                               const FourierVolume& fv, const NoiseModel& noise, bool want_responsibilities) {
    const auto m = scheme.size();
    std::vector<double> logliks(m);
    std::vector<double> log_weights(m);
    for (std::size_t j = 0; j < m; ++j) {
        logliks[j] = per_pose_loglik(proj, obs, scheme.pose(j), fv, noise);
        log_weights[j] = std::log(scheme.weight(j));
    }
    MarginalResult out;
    if (want_responsibilities) {
        out.responsibilities.resize(m);
    }
    out.log_marginal = log_sum_exp(log_weights, logliks, out.responsibilities);
    return out;
}

FourierVolume marginal_grad_fourier(const Projector& proj, const Observation& obs, const PoseScheme& scheme,
                                    const FourierVolume& fv, const NoiseModel& noise,
                                    std::span<const double> responsibilities) {
    require_noise(noise);
    check_observation(proj, obs);
    if (responsibilities.size() != scheme.size()) {
        throw DimensionError("responsibility count does not match the pose scheme");
    }
    const double inv_var = 1.0 / proj.fourier_variance(noise);
    FourierVolume acc(proj.fourier_side(), proj.oversampling());
    std::vector<Complex> values(proj.mask().count());
    for (std::size_t j = 0; j < scheme.size(); ++j) {
        const double r = responsibilities[j];
        if (r == 0.0) {
            continue;
        }
        const Pose pose = scheme.pose(j);
        const auto pred = predict(proj, obs, pose, fv);
        const auto phases = shift_phases(proj.mask(), pose.shift);
        for (std::size_t k = 0; k < values.size(); ++k) {
            values[k] = (r * inv_var * obs.ctf_values[k]) * std::conj(phases[k]) * (obs.coefficients[k] - pred[k]);
        }
        proj.accumulate_adjoint(values, pose.rotation, acc);
    }
    return acc;
}

MarginalGradient marginal_grad(const Projector& proj, const Observation& obs, const PoseScheme& scheme,
                               const VolumeGrid& v, const NoiseModel& noise) {
    const auto fv = proj.transform(v);
    const auto marginal = marginal_loglik(proj, obs, scheme, fv, noise, true);
    const auto g = marginal_grad_fourier(proj, obs, scheme, fv, noise, marginal.responsibilities);
    return {marginal.log_marginal, proj.transform_adjoint(g)};
}

} // namespace cryostoch
