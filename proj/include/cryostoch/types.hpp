#pragma once

#include <Eigen/Core>

#include <array>
#include <complex>

namespace cryostoch {

using Complex = std::complex<double>;
using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

/// In-plane shift in pixels.
struct Shift2 {
    double x = 0.0;
    double y = 0.0;
};

inline constexpr double kPi = 3.14159265358979323846;

/// Wraps a signed frequency or voxel index onto [0, n).
[[nodiscard]] constexpr int wrap_index(int k, int n) noexcept {
    const int r = k % n;
    return r < 0 ? r + n : r;
}

/// Signed frequency of array index i for an n-point transform, in [-n/2, n/2).
[[nodiscard]] constexpr int signed_frequency(int i, int n) noexcept {
    return i < n / 2 ? i : i - n;
}

} // namespace cryostoch
