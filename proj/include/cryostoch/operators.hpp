#pragma once

#include "cryostoch/grid.hpp"

#include <span>
#include <string_view>
#include <vector>

namespace cryostoch {

/// Fourier-space interpolation kernel used to sample central slices.
enum class Interpolation {
    trilinear,
    windowed_sinc, ///< 4-tap sinc with a Kaiser window, beta = 6
    wide_sinc,     ///< 8-tap sinc with a Kaiser window, beta = 6
};

/// "trilinear", "sinc" or "sinc8".
[[nodiscard]] std::string_view kernel_name(Interpolation k);
/// Inverse of kernel_name; throws ConfigError for unknown names.
[[nodiscard]] Interpolation parse_kernel(std::string_view name);

/// Multiplies coefficient k by exp(-2 pi i k.t / N): a circular shift by t pixels.
[[nodiscard]] FourierImage apply_shift(const FourierImage& g, Shift2 t);

/// Phase factors exp(-2 pi i k.t / N) at the members of `mask`.
[[nodiscard]] std::vector<Complex> shift_phases(const FrequencyMask& mask, Shift2 t);

/// Samples the central slice of `f` selected by `rotation` at the masked
/// frequencies, writing them in member order into `out`.
///
/// Image frequency k = (kx, ky) is read from the volume at
/// oversampling * R^T (kx, ky, 0). Samples are taken from the volume re-centred
/// on voxel N/2 (a (-1)^(qx+qy+qz) modulation) and the result is re-expressed
/// relative to image pixel (0, 0), so that identity slices of a plain DFT are
/// returned unchanged.
void sample_slice(const FourierVolume& f, const Mat3& rotation, const FrequencyMask& mask,
                  std::span<Complex> out, Interpolation kernel = Interpolation::trilinear);

/// Exact adjoint of sample_slice: accumulates `values` (member order) into `acc`.
void accumulate_slice_adjoint(std::span<const Complex> values, const Mat3& rotation, const FrequencyMask& mask,
                              FourierVolume& acc, Interpolation kernel = Interpolation::trilinear);

/// Central slice as an N x N image, zero outside the mask.
[[nodiscard]] FourierImage extract_slice(const FourierVolume& f, const Mat3& rotation, const FrequencyMask& mask,
                                         Interpolation kernel = Interpolation::trilinear);

/// Adjoint of extract_slice. The result has the given side and oversampling.
[[nodiscard]] FourierVolume insert_slice_adjoint(const FourierImage& g, const Mat3& rotation,
                                                 const FrequencyMask& mask, int volume_side, int oversampling = 1,
                                                 Interpolation kernel = Interpolation::trilinear);

/// Integral projection along z of the volume rotated by R about voxel N/2:
///   image(x, y) = sum_z v(R^T (x - c, y - c, z - c) + c)
/// with periodic trilinear resampling.
[[nodiscard]] ParticleImage project_real(const VolumeGrid& v, const Mat3& rotation);

/// Serial version of project_real, kept as the reference for the parallel kernel.
[[nodiscard]] ParticleImage project_real_serial(const VolumeGrid& v, const Mat3& rotation);

} // namespace cryostoch
