#include "cryostoch/grid.hpp"

#include "cryostoch/error.hpp"

#include <Eigen/LU>

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cryostoch {

void require_even_side(int n, const char* what) {
    if (n <= 0 || n % 2 != 0) {
        throw DimensionError(fmt::format("{}: side length must be a positive even integer, got {}", what, n));
    }
}

VolumeGrid::VolumeGrid(int side, double voxel_size) : side_(side), voxel_size_(voxel_size) {
    require_even_side(side, "VolumeGrid");
    data_.assign(static_cast<std::size_t>(side) * side * side, 0.0);
}

VolumeGrid::VolumeGrid(int side, std::vector<double> data, double voxel_size)
    : side_(side), voxel_size_(voxel_size), data_(std::move(data)) {
    require_even_side(side, "VolumeGrid");
    if (data_.size() != static_cast<std::size_t>(side) * side * side) {
        throw DimensionError(fmt::format("VolumeGrid: expected {} voxels, got {}",
                                         static_cast<std::size_t>(side) * side * side, data_.size()));
    }
}

bool VolumeGrid::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double VolumeGrid::sum() const noexcept { return std::accumulate(data_.begin(), data_.end(), 0.0); }

ParticleImage::ParticleImage(int side) : side_(side) {
    require_even_side(side, "ParticleImage");
    pixels_.assign(static_cast<std::size_t>(side) * side, 0.0);
}

ParticleImage::ParticleImage(int side, std::vector<double> pixels) : side_(side), pixels_(std::move(pixels)) {
    require_even_side(side, "ParticleImage");
    if (pixels_.size() != static_cast<std::size_t>(side) * side) {
        throw DimensionError(fmt::format("ParticleImage: expected {} pixels, got {}",
                                         static_cast<std::size_t>(side) * side, pixels_.size()));
    }
}

bool ParticleImage::all_finite() const noexcept {
    return std::all_of(pixels_.begin(), pixels_.end(), [](double v) { return std::isfinite(v); });
}

double ParticleImage::sum() const noexcept { return std::accumulate(pixels_.begin(), pixels_.end(), 0.0); }

FourierVolume::FourierVolume(int side, int oversampling) : side_(side), oversampling_(oversampling) {
    require_even_side(side, "FourierVolume");
    if (oversampling < 1 || side % oversampling != 0) {
        throw DimensionError(fmt::format("FourierVolume: oversampling {} does not divide side {}", oversampling, side));
    }
    coefficients_.assign(static_cast<std::size_t>(side) * side * side, Complex{});
}

FourierVolume::FourierVolume(int side, std::vector<Complex> coefficients, int oversampling)
    : side_(side), oversampling_(oversampling), coefficients_(std::move(coefficients)) {
    require_even_side(side, "FourierVolume");
    if (oversampling < 1 || side % oversampling != 0) {
        throw DimensionError(fmt::format("FourierVolume: oversampling {} does not divide side {}", oversampling, side));
    }
    if (coefficients_.size() != static_cast<std::size_t>(side) * side * side) {
        throw DimensionError("FourierVolume: coefficient count does not match side^3");
    }
}

FourierImage::FourierImage(int side) : side_(side) {
    require_even_side(side, "FourierImage");
    coefficients_.assign(static_cast<std::size_t>(side) * side, Complex{});
}

FourierImage::FourierImage(int side, std::vector<Complex> coefficients)
    : side_(side), coefficients_(std::move(coefficients)) {
    require_even_side(side, "FourierImage");
    if (coefficients_.size() != static_cast<std::size_t>(side) * side) {
        throw DimensionError("FourierImage: coefficient count does not match side^2");
    }
}

bool is_rotation(const Mat3& r, double tolerance) {
    if (!r.allFinite()) {
        return false;
    }
    const double orth = (r.transpose() * r - Mat3::Identity()).norm();
    return orth < tolerance && std::abs(r.determinant() - 1.0) < tolerance;
}

void require_rotation(const Mat3& r) {
    if (!is_rotation(r, 1e-6)) {
        throw DimensionError("rotation matrix is not orthonormal with determinant +1");
    }
}

FrequencyMask::FrequencyMask(int side, double cutoff_fraction) : side_(side), cutoff_fraction_(cutoff_fraction) {
    require_even_side(side, "FrequencyMask");
    if (!(cutoff_fraction > 0.0 && cutoff_fraction <= 1.0)) {
        throw ConfigError(fmt::format("frequency cutoff must lie in (0, 1], got {}", cutoff_fraction));
    }
    const double radius = cutoff_fraction * side / 2.0;
    const double r2 = radius * radius;
    for (int kx = -side / 2; kx < side / 2; ++kx) {
        for (int ky = -side / 2; ky < side / 2; ++ky) {
            if (static_cast<double>(kx * kx + ky * ky) <= r2) {
                members_.push_back({kx, ky});
            }
        }
    }
    finalize();
}

FrequencyMask FrequencyMask::full(int side) {
    require_even_side(side, "FrequencyMask");
    FrequencyMask m;
    m.side_ = side;
    m.cutoff_fraction_ = 1.0;
    m.full_ = true;
    for (int kx = -side / 2; kx < side / 2; ++kx) {
        for (int ky = -side / 2; ky < side / 2; ++ky) {
            m.members_.push_back({kx, ky});
        }
    }
    m.finalize();
    return m;
}

void FrequencyMask::finalize() {
    offsets_.reserve(members_.size());
    for (const auto& k : members_) {
        offsets_.push_back(static_cast<std::size_t>(wrap_index(k.ky, side_)) * side_ + wrap_index(k.kx, side_));
    }
}

std::vector<Complex> FrequencyMask::gather(const FourierImage& g) const {
    if (g.side() != side_) {
        throw DimensionError("FrequencyMask::gather: side mismatch");
    }
    std::vector<Complex> out(offsets_.size());
    const auto c = g.coefficients();
    for (std::size_t m = 0; m < offsets_.size(); ++m) {
        out[m] = c[offsets_[m]];
    }
    return out;
}

FourierImage FrequencyMask::scatter(std::span<const Complex> values) const {
    if (values.size() != offsets_.size()) {
        throw DimensionError("FrequencyMask::scatter: value count does not match mask");
    }
    FourierImage g(side_);
    auto c = g.coefficients();
    for (std::size_t m = 0; m < offsets_.size(); ++m) {
        c[offsets_[m]] = values[m];
    }
    return g;
}

} // namespace cryostoch
