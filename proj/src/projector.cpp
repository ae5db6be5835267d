#include "cryostoch/error.hpp"
#include "cryostoch/fft.hpp"
#include "cryostoch/model.hpp"

#include <fmt/format.h>

#include <cmath>

namespace cryostoch {

Projector::Projector(int side, FrequencyMask mask, int oversampling, Interpolation kernel)
    : side_(side), oversampling_(oversampling), kernel_(kernel), mask_(std::move(mask)) {
    require_even_side(side, "Projector");
    if (mask_.side() != side) {
        throw DimensionError(fmt::format("Projector: mask side {} does not match grid side {}", mask_.side(), side));
    }
    if (oversampling < 1) {
        throw ConfigError("Projector: oversampling must be at least 1");
    }
}

Projector::Projector(int side, double cutoff_fraction, int oversampling, Interpolation kernel)
    : Projector(side, FrequencyMask(side, cutoff_fraction), oversampling, kernel) {}

FourierVolume Projector::transform(const VolumeGrid& v) const {
    if (v.side() != side_) {
        throw DimensionError(fmt::format("Projector: volume side {} does not match {}", v.side(), side_));
    }
    const int nf = fourier_side();
    const int offset = (nf - side_) / 2;
    std::vector<Complex> padded(static_cast<std::size_t>(nf) * nf * nf);
    for (int z = 0; z < side_; ++z) {
        for (int y = 0; y < side_; ++y) {
            const std::size_t row = (static_cast<std::size_t>(z + offset) * nf + (y + offset)) * nf + offset;
            for (int x = 0; x < side_; ++x) {
                padded[row + x] = v.at(x, y, z);
            }
        }
    }
    FourierVolume f(nf, oversampling_);
    dft3(padded, f.coefficients(), nf, FftDirection::forward);
    return f;
}

VolumeGrid Projector::transform_adjoint(const FourierVolume& g) const {
    const int nf = fourier_side();
    if (g.side() != nf) {
        throw DimensionError("Projector: Fourier volume side mismatch in adjoint");
    }
    std::vector<Complex> spatial(g.size());
    dft3(g.coefficients(), spatial, nf, FftDirection::backward);
    const int offset = (nf - side_) / 2;
    VolumeGrid out(side_);
    for (int z = 0; z < side_; ++z) {
        for (int y = 0; y < side_; ++y) {
            const std::size_t row = (static_cast<std::size_t>(z + offset) * nf + (y + offset)) * nf + offset;
            for (int x = 0; x < side_; ++x) {
                out.at(x, y, z) = spatial[row + x].real();
            }
        }
    }
    return out;
}

void Projector::sample(const FourierVolume& f, const Mat3& rotation, std::span<Complex> out) const {
    sample_slice(f, rotation, mask_, out, kernel_);
}

void Projector::accumulate_adjoint(std::span<const Complex> values, const Mat3& rotation,
                                   FourierVolume& acc) const {
    accumulate_slice_adjoint(values, rotation, mask_, acc, kernel_);
}

double Projector::fourier_variance(const NoiseModel& noise) const {
    return noise.sigma * noise.sigma * static_cast<double>(side_) * side_;
}

double Projector::log_normalizer(const NoiseModel& noise) const {
    // Hermitian-closed masks: each retained coefficient carries one real degree
    // of freedom (a conjugate pair carries two between its two members).
    return -0.5 * static_cast<double>(mask_.count()) * std::log(2.0 * kPi * noise.sigma * noise.sigma);
}

void require_noise(const NoiseModel& noise) {
    if (!(noise.sigma > 0.0) || !std::isfinite(noise.sigma)) {
        throw ConfigError(fmt::format("noise sigma must be positive and finite, got {}", noise.sigma));
    }
}

} // namespace cryostoch
