#pragma once

#include "cryostoch/grid.hpp"

#include <span>

namespace cryostoch {

/// Sign convention of the exponent: forward is exp(-2 pi i k x / n).
enum class FftDirection { forward, backward };

/// Unnormalized complex DFT of an n^3 (or n^2) array in FFT order. The
/// backward transform is the adjoint of the forward one, not its inverse.
void dft3(std::span<const Complex> in, std::span<Complex> out, int n, FftDirection dir);
void dft2(std::span<const Complex> in, std::span<Complex> out, int n, FftDirection dir);

// Transforms use an unnormalized forward DFT and a 1/N^d inverse, so that
// ifft(fft(x)) == x and ||x||^2 == ||fft(x)||^2 / N^d.
[[nodiscard]] FourierVolume fft3(const VolumeGrid& v);
/// Real part of the inverse transform.
[[nodiscard]] VolumeGrid ifft3(const FourierVolume& f);
[[nodiscard]] std::vector<Complex> ifft3_complex(const FourierVolume& f);

[[nodiscard]] FourierImage fft2(const ParticleImage& img);
[[nodiscard]] ParticleImage ifft2(const FourierImage& g);
[[nodiscard]] std::vector<Complex> ifft2_complex(const FourierImage& g);

} // namespace cryostoch
