#pragma once

#include "cryostoch/grid.hpp"
#include "cryostoch/synth.hpp"

#include <cmath>
#include <filesystem>
#include <array>
#include <random>
#include <string>

namespace testing {

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("cryostoch_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline cryostoch::VolumeGrid random_volume(int n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    cryostoch::VolumeGrid v(n);
    for (double& x : v.data()) {
        x = u(rng);
    }
    return v;
}

struct Blobs {
    std::array<cryostoch::Vec3, 4> offsets{cryostoch::Vec3(-4, 1, 0), cryostoch::Vec3(3, -2, 2),
                                           cryostoch::Vec3(0, 4, -3), cryostoch::Vec3(1, 0, 4)};
    std::array<double, 4> amp{1.0, 0.7, 0.5, 0.8};
};

/// Sum of isotropic Gaussian blobs near the centre: smooth and nearly band limited.
inline cryostoch::VolumeGrid blob_volume(int n, double width = 1.6) {
    cryostoch::VolumeGrid v(n);
    const double c = n / 2;
    const Blobs blobs;
    const auto& amp = blobs.amp;
    std::array<cryostoch::Vec3, 4> centres;
    for (std::size_t b = 0; b < centres.size(); ++b) {
        centres[b] = blobs.offsets[b] + cryostoch::Vec3(c, c, c);
    }
    for (int z = 0; z < n; ++z) {
        for (int y = 0; y < n; ++y) {
            for (int x = 0; x < n; ++x) {
                double acc = 0.0;
                for (std::size_t b = 0; b < centres.size(); ++b) {
                    const double r2 = (cryostoch::Vec3(x, y, z) - centres[b]).squaredNorm();
                    acc += amp[b] * std::exp(-r2 / (2 * width * width));
                }
                v.at(x, y, z) = acc;
            }
        }
    }
    return v;
}

/// Continuous Fourier transform of blob_volume about the grid centre at
/// xi (cycles per voxel).
inline cryostoch::Complex blob_transform(const cryostoch::Vec3& xi, double width = 1.6) {
    const Blobs blobs;
    const double pi = cryostoch::kPi;
    const double envelope = std::pow(2 * pi * width * width, 1.5) * std::exp(-2 * pi * pi * width * width * xi.squaredNorm());
    cryostoch::Complex acc{};
    for (std::size_t b = 0; b < blobs.amp.size(); ++b) {
        acc += blobs.amp[b] * envelope * std::polar(1.0, -2 * pi * xi.dot(blobs.offsets[b]));
    }
    return acc;
}

/// Rotations that permute the axes (with signs), so rotated grids stay on grid points.
inline std::vector<cryostoch::Mat3> grid_rotations() {
    using cryostoch::Mat3;
    std::vector<Mat3> out;
    Mat3 r;
    r << 1, 0, 0, 0, 1, 0, 0, 0, 1;
    out.push_back(r);
    r << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    out.push_back(r);
    r << 1, 0, 0, 0, 0, -1, 0, 1, 0;
    out.push_back(r);
    r << 0, 0, 1, 0, 1, 0, -1, 0, 0;
    out.push_back(r);
    r << 0, 1, 0, 0, 0, 1, 1, 0, 0;
    out.push_back(r);
    return out;
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }

} // namespace testing
