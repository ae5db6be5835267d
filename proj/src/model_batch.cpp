#include "cryostoch/error.hpp"
#include "cryostoch/model.hpp"

#include <cmath>

namespace cryostoch {

BatchEvaluator::BatchEvaluator(const Projector& proj, const PoseScheme& scheme, NoiseModel noise)
    : proj_(proj), scheme_(scheme), noise_(noise) {
    require_noise(noise_);
    for (const auto& s : scheme_.shifts()) {
        phases_.push_back(shift_phases(proj_.mask(), s.shift));
    }
    log_weights_.reserve(scheme_.size());
    for (std::size_t j = 0; j < scheme_.size(); ++j) {
        log_weights_.push_back(std::log(scheme_.weight(j)));
    }
}

BatchEvaluator::Result BatchEvaluator::evaluate(std::span<const Observation* const> batch, const FourierVolume& fv,
                                                std::optional<double> gradient_weight) const {
    const auto d = proj_.mask().count();
    const auto n_orient = scheme_.orientation_count();
    const auto n_shift = scheme_.shift_count();
    const auto n_pose = scheme_.size();
    const auto n_img = batch.size();
    for (const auto* obs : batch) {
        if (obs->coefficients.size() != d || obs->ctf_values.size() != d) {
            throw DimensionError("observation does not match the projector's frequency mask");
        }
    }
    if (fv.side() != proj_.fourier_side()) {
        throw DimensionError("Fourier volume does not match the projector");
    }

    const auto orientations = scheme_.orientations();
    std::vector<Complex> slices(n_orient * d);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t o = 0; o < static_cast<std::ptrdiff_t>(n_orient); ++o) {
        proj_.sample(fv, orientations[o].rotation, std::span(slices).subspan(o * d, d));
    }

    const double inv_two_var = 1.0 / (2.0 * proj_.fourier_variance(noise_));
    const double log_norm = proj_.log_normalizer(noise_);
    const bool want_grad = gradient_weight.has_value();

    Result result;
    result.log_marginals.resize(n_img);
    std::vector<double> resp(want_grad ? n_img * n_pose : 0);
    bool failed = false;

#pragma omp parallel
    {
        std::vector<double> logliks(n_pose);
        std::vector<Complex> pred(d);
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n_img); ++i) {
            const Observation& obs = *batch[i];
            for (std::size_t o = 0; o < n_orient; ++o) {
                const Complex* slice = slices.data() + o * d;
                for (std::size_t k = 0; k < d; ++k) {
                    pred[k] = obs.ctf_values[k] * slice[k];
                }
                for (std::size_t s = 0; s < n_shift; ++s) {
                    const auto& phase = phases_[s];
                    double q = 0.0;
                    for (std::size_t k = 0; k < d; ++k) {
                        q += std::norm(obs.coefficients[k] - phase[k] * pred[k]);
                    }
                    logliks[o * n_shift + s] = -q * inv_two_var + log_norm;
                }
            }
            try {
                auto r = want_grad ? std::span(resp).subspan(i * n_pose, n_pose) : std::span<double>{};
                result.log_marginals[i] = log_sum_exp(log_weights_, logliks, r);
            } catch (const NumericalError&) {
#pragma omp atomic write
                failed = true;
            }
        }
    }
    if (failed) {
        throw NumericalError("non-finite log-likelihood in batch evaluation");
    }
    if (!want_grad) {
        return result;
    }

    // Per-orientation image-space gradient, reduced over images in input order.
    const double scale = *gradient_weight / proj_.fourier_variance(noise_);
    std::vector<Complex> accum(n_orient * d);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t o = 0; o < static_cast<std::ptrdiff_t>(n_orient); ++o) {
        Complex* g = accum.data() + o * d;
        const Complex* slice = slices.data() + o * d;
        for (std::size_t i = 0; i < n_img; ++i) {
            const Observation& obs = *batch[i];
            for (std::size_t s = 0; s < n_shift; ++s) {
                const double r = resp[i * n_pose + o * n_shift + s];
                if (r == 0.0) {
                    continue;
                }
                const auto& phase = phases_[s];
                for (std::size_t k = 0; k < d; ++k) {
                    const double c = obs.ctf_values[k];
                    const Complex residual = obs.coefficients[k] - phase[k] * (c * slice[k]);
                    g[k] += (r * c) * std::conj(phase[k]) * residual;
                }
            }
        }
        for (std::size_t k = 0; k < d; ++k) {
            g[k] *= scale;
        }
    }

    FourierVolume grad(proj_.fourier_side(), proj_.oversampling());
    for (std::size_t o = 0; o < n_orient; ++o) {
        proj_.accumulate_adjoint(std::span<const Complex>(accum).subspan(o * d, d), orientations[o].rotation, grad);
    }
    result.gradient = std::move(grad);
    return result;
}

} // namespace cryostoch
