#pragma once

#include "cryostoch/types.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace cryostoch {

/// Throws DimensionError unless n is a positive even integer.
void require_even_side(int n, const char* what);

/// Cubic real-valued voxel grid, z-y-x order (x fastest).
///
/// The rotation centre and real-space origin of every geometric operation is
/// voxel (N/2, N/2, N/2).
class VolumeGrid {
public:
    VolumeGrid() = default;
    explicit VolumeGrid(int side, double voxel_size = 1.0);
    VolumeGrid(int side, std::vector<double> data, double voxel_size = 1.0);

    [[nodiscard]] int side() const noexcept { return side_; }
    [[nodiscard]] double voxel_size() const noexcept { return voxel_size_; }
    void set_voxel_size(double s) noexcept { voxel_size_ = s; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }

    [[nodiscard]] std::size_t index(int x, int y, int z) const noexcept {
        return (static_cast<std::size_t>(z) * side_ + y) * side_ + x;
    }
    [[nodiscard]] double& at(int x, int y, int z) noexcept { return data_[index(x, y, z)]; }
    [[nodiscard]] double at(int x, int y, int z) const noexcept { return data_[index(x, y, z)]; }

    [[nodiscard]] std::span<double> data() noexcept { return data_; }
    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
    [[nodiscard]] std::vector<double>& values() noexcept { return data_; }
    [[nodiscard]] const std::vector<double>& values() const noexcept { return data_; }

    [[nodiscard]] bool all_finite() const noexcept;
    [[nodiscard]] double sum() const noexcept;

private:
    int side_ = 0;
    double voxel_size_ = 1.0;
    std::vector<double> data_;
};

/// Square real image, y-x order (x fastest).
class ParticleImage {
public:
    ParticleImage() = default;
    explicit ParticleImage(int side);
    ParticleImage(int side, std::vector<double> pixels);

    [[nodiscard]] int side() const noexcept { return side_; }
    [[nodiscard]] double& at(int x, int y) noexcept { return pixels_[static_cast<std::size_t>(y) * side_ + x]; }
    [[nodiscard]] double at(int x, int y) const noexcept { return pixels_[static_cast<std::size_t>(y) * side_ + x]; }
    [[nodiscard]] std::span<double> pixels() noexcept { return pixels_; }
    [[nodiscard]] std::span<const double> pixels() const noexcept { return pixels_; }
    [[nodiscard]] bool all_finite() const noexcept;
    [[nodiscard]] double sum() const noexcept;

private:
    int side_ = 0;
    std::vector<double> pixels_;
};

/// 3D Fourier coefficients with frequency 0 at array index 0 (FFT order).
///
/// `oversampling` records how many times larger the transformed grid is than
/// the volume it represents: a value of 2 means the volume was zero padded to
/// twice its side before transforming, so that image frequency k lands on
/// grid coordinate 2k.
class FourierVolume {
public:
    FourierVolume() = default;
    explicit FourierVolume(int side, int oversampling = 1);
    FourierVolume(int side, std::vector<Complex> coefficients, int oversampling = 1);

    [[nodiscard]] int side() const noexcept { return side_; }
    [[nodiscard]] int oversampling() const noexcept { return oversampling_; }
    [[nodiscard]] int volume_side() const noexcept { return side_ / oversampling_; }
    [[nodiscard]] std::size_t size() const noexcept { return coefficients_.size(); }

    /// Coefficient at signed frequency (kx, ky, kz); indices wrap periodically.
    [[nodiscard]] const Complex& at(int kx, int ky, int kz) const noexcept {
        return coefficients_[wrapped_index(kx, ky, kz)];
    }
    [[nodiscard]] Complex& at(int kx, int ky, int kz) noexcept {
        return coefficients_[wrapped_index(kx, ky, kz)];
    }
    [[nodiscard]] std::size_t wrapped_index(int kx, int ky, int kz) const noexcept {
        return (static_cast<std::size_t>(wrap_index(kz, side_)) * side_ + wrap_index(ky, side_)) * side_ +
               wrap_index(kx, side_);
    }

    [[nodiscard]] std::span<Complex> coefficients() noexcept { return coefficients_; }
    [[nodiscard]] std::span<const Complex> coefficients() const noexcept { return coefficients_; }

private:
    int side_ = 0;
    int oversampling_ = 1;
    std::vector<Complex> coefficients_;
};

/// 2D Fourier coefficients with frequency 0 at array index 0.
class FourierImage {
public:
    FourierImage() = default;
    explicit FourierImage(int side);
    FourierImage(int side, std::vector<Complex> coefficients);

    [[nodiscard]] int side() const noexcept { return side_; }
    [[nodiscard]] const Complex& at(int kx, int ky) const noexcept {
        return coefficients_[static_cast<std::size_t>(wrap_index(ky, side_)) * side_ + wrap_index(kx, side_)];
    }
    [[nodiscard]] Complex& at(int kx, int ky) noexcept {
        return coefficients_[static_cast<std::size_t>(wrap_index(ky, side_)) * side_ + wrap_index(kx, side_)];
    }
    [[nodiscard]] std::span<Complex> coefficients() noexcept { return coefficients_; }
    [[nodiscard]] std::span<const Complex> coefficients() const noexcept { return coefficients_; }

private:
    int side_ = 0;
    std::vector<Complex> coefficients_;
};

/// Orientation and in-plane shift of one particle.
///
/// `rotation` maps volume coordinates to the microscope frame: the image plane
/// is spanned by the first two rows, the beam direction is the third row.
struct Pose {
    Mat3 rotation = Mat3::Identity();
    Shift2 shift{};
};

/// True when R is orthonormal with det +1 to within `tolerance`.
[[nodiscard]] bool is_rotation(const Mat3& r, double tolerance = 1e-6);
/// Throws DimensionError when `r` is not a rotation to within 1e-6.
void require_rotation(const Mat3& r);

struct FrequencyIndex {
    int kx = 0;
    int ky = 0;
};

/// Set of 2D frequencies retained by the likelihood.
///
/// Members are the signed frequencies in [-N/2, N/2)^2 with radius at most
/// cutoff_fraction * N/2, sorted lexicographically by (kx, ky). The full mask
/// keeps all N^2 coefficients.
class FrequencyMask {
public:
    FrequencyMask() = default;
    FrequencyMask(int side, double cutoff_fraction);
    static FrequencyMask full(int side);

    [[nodiscard]] int side() const noexcept { return side_; }
    [[nodiscard]] double cutoff_fraction() const noexcept { return cutoff_fraction_; }
    [[nodiscard]] bool is_full() const noexcept { return full_; }
    [[nodiscard]] std::size_t count() const noexcept { return members_.size(); }
    [[nodiscard]] std::span<const FrequencyIndex> members() const noexcept { return members_; }
    /// Offsets of the members into an N^2 FFT-ordered coefficient array.
    [[nodiscard]] std::span<const std::size_t> offsets() const noexcept { return offsets_; }

    /// Gathers the masked coefficients of `g` in member order.
    [[nodiscard]] std::vector<Complex> gather(const FourierImage& g) const;
    /// Scatters member-ordered coefficients into an N^2 image (zero elsewhere).
    [[nodiscard]] FourierImage scatter(std::span<const Complex> values) const;

private:
    void finalize();

    int side_ = 0;
    double cutoff_fraction_ = 0.0;
    bool full_ = false;
    std::vector<FrequencyIndex> members_;
    std::vector<std::size_t> offsets_;
};

} // namespace cryostoch
