#include "cryostoch/ctf.hpp"

#include "cryostoch/error.hpp"

#include <fmt/format.h>

#include <cmath>

namespace cryostoch {
namespace {

// h / sqrt(2 m0 e) in Angstrom * sqrt(V), and e / (2 m0 c^2) in 1/V.
constexpr double kWavelengthNumerator = 12.264259653234232;
constexpr double kRelativisticFactor = 9.784755904550026e-7;

struct CtfTerms {
    double lambda;
    double mean_defocus;
    double half_astig;
    double phase_weight;
    double amplitude_weight;
};

CtfTerms terms(const CtfParams& p) {
    return {electron_wavelength(p.voltage_kv), 0.5 * (p.defocus_u + p.defocus_v), 0.5 * (p.defocus_u - p.defocus_v),
            std::sqrt(1.0 - p.amplitude_contrast * p.amplitude_contrast), p.amplitude_contrast};
}

double evaluate(const CtfParams& p, const CtfTerms& t, double s, double azimuth) {
    const double dz = t.mean_defocus + t.half_astig * std::cos(2.0 * (azimuth - p.astigmatism_angle));
    const double s2 = s * s;
    const double l3 = t.lambda * t.lambda * t.lambda;
    const double gamma = 2.0 * kPi * (dz * t.lambda * s2 / 2.0 - p.spherical_aberration * l3 * s2 * s2 / 4.0);
    const double envelope = p.b_factor == 0.0 ? 1.0 : std::exp(-p.b_factor * s2 / 4.0);
    return -(t.phase_weight * std::sin(gamma) + t.amplitude_weight * std::cos(gamma)) * envelope;
}

} // namespace

void CtfParams::validate() const {
    if (!(amplitude_contrast >= 0.0 && amplitude_contrast <= 1.0)) {
        throw ConfigError(fmt::format("amplitude contrast must lie in [0, 1], got {}", amplitude_contrast));
    }
    if (!(voltage_kv > 0.0)) {
        throw ConfigError(fmt::format("accelerating voltage must be positive, got {}", voltage_kv));
    }
    if (!(b_factor >= 0.0)) {
        throw ConfigError(fmt::format("envelope B-factor must be non-negative, got {}", b_factor));
    }
}

double electron_wavelength(double voltage_kv) {
    const double volts = voltage_kv * 1e3;
    return kWavelengthNumerator / std::sqrt(volts * (1.0 + kRelativisticFactor * volts));
}

double ctf_value(const CtfParams& p, double s, double azimuth) { return evaluate(p, terms(p), s, azimuth); }

std::vector<double> ctf_grid(const CtfParams& p, int n, double pixel_size) {
    require_even_side(n, "ctf_grid");
    const auto t = terms(p);
    const double df = 1.0 / (n * pixel_size);
    std::vector<double> out(static_cast<std::size_t>(n) * n);
    for (int iy = 0; iy < n; ++iy) {
        const int ky = signed_frequency(iy, n);
        for (int ix = 0; ix < n; ++ix) {
            const int kx = signed_frequency(ix, n);
            const double s = std::hypot(kx, ky) * df;
            out[static_cast<std::size_t>(iy) * n + ix] = evaluate(p, t, s, std::atan2(ky, kx));
        }
    }
    return out;
}

std::vector<double> ctf_on_mask(const CtfParams& p, const FrequencyMask& mask, double pixel_size) {
    const auto t = terms(p);
    const double df = 1.0 / (mask.side() * pixel_size);
    std::vector<double> out;
    out.reserve(mask.count());
    for (const auto& k : mask.members()) {
        out.push_back(evaluate(p, t, std::hypot(k.kx, k.ky) * df, std::atan2(k.ky, k.kx)));
    }
    return out;
}

FourierImage apply_ctf(const FourierImage& g, const CtfParams& p, double pixel_size) {
    const auto c = ctf_grid(p, g.side(), pixel_size);
    FourierImage out(g.side());
    auto dst = out.coefficients();
    const auto src = g.coefficients();
    for (std::size_t i = 0; i < c.size(); ++i) {
        dst[i] = src[i] * c[i];
    }
    return out;
}

} // namespace cryostoch
