#pragma once

#include "cryostoch/grid.hpp"

#include <vector>

namespace cryostoch {

/// Microscope parameters of one image. Lengths are in Angstrom (including
/// the spherical aberration), angles in radians, voltage in kV.
struct CtfParams {
    double defocus_u = 15000.0;     ///< positive is underfocus
    double defocus_v = 15000.0;
    double astigmatism_angle = 0.0;
    double voltage_kv = 300.0;
    double spherical_aberration = 2.7e7;
    double amplitude_contrast = 0.1;
    double b_factor = 0.0;           ///< Gaussian envelope exp(-B s^2 / 4)

    /// Throws ConfigError if alpha is outside [0, 1] or voltage is not positive.
    void validate() const;
};

/// Relativistic electron wavelength in Angstrom for an accelerating voltage in kV.
[[nodiscard]] double electron_wavelength(double voltage_kv);

/// Weak-phase CTF at spatial frequency `s` (1/Angstrom) and azimuth `azimuth`:
///   C = -[sqrt(1 - a^2) sin(gamma) + a cos(gamma)] exp(-B s^2 / 4)
///   gamma = 2 pi (dz(phi) lambda s^2 / 2 - Cs lambda^3 s^4 / 4)
[[nodiscard]] double ctf_value(const CtfParams& p, double s, double azimuth);

/// CTF sampled at every coefficient of an n x n FFT-ordered grid.
[[nodiscard]] std::vector<double> ctf_grid(const CtfParams& p, int n, double pixel_size);
/// CTF sampled at the members of `mask`, in member order.
[[nodiscard]] std::vector<double> ctf_on_mask(const CtfParams& p, const FrequencyMask& mask, double pixel_size);

/// Pointwise multiplication by the CTF; real diagonal, hence self-adjoint.
[[nodiscard]] FourierImage apply_ctf(const FourierImage& g, const CtfParams& p, double pixel_size);

} // namespace cryostoch
