#include "cryostoch/operators.hpp"

#include "cryostoch/error.hpp"

#include <fmt/format.h>

#include <array>
#include <cmath>

namespace cryostoch {
namespace {

constexpr double kKaiserBeta = 6.0;

// Modified Bessel function I0 by its power series; arguments here are at most kKaiserBeta.
double bessel_i0(double x) {
    const double q = 0.25 * x * x;
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 40 && term > 1e-17 * sum; ++k) {
        term *= q / (static_cast<double>(k) * k);
        sum += term;
    }
    return sum;
}

const double kKaiserNorm = 1.0 / bessel_i0(kKaiserBeta);

double kaiser_sinc(double x, int half_width) {
    const double ax = std::abs(x);
    if (ax >= half_width) {
        return 0.0;
    }
    const double r = ax / half_width;
    const double window = bessel_i0(kKaiserBeta * std::sqrt(1.0 - r * r)) * kKaiserNorm;
    const double sinc = ax < 1e-12 ? 1.0 : std::sin(kPi * ax) / (kPi * ax);
    return sinc * window;
}

// Separable stencil: `taps` integer positions per axis with their weights.
template <int Taps>
struct Stencil {
    std::array<int, Taps> x, y, z;
    std::array<double, Taps> wx, wy, wz;
};

template <int Taps>
Stencil<Taps> make_stencil(const Vec3& p) {
    Stencil<Taps> s;
    const std::array<double, 3> c{p.x(), p.y(), p.z()};
    std::array<std::array<int, Taps>*, 3> idx{&s.x, &s.y, &s.z};
    std::array<std::array<double, Taps>*, 3> wt{&s.wx, &s.wy, &s.wz};
    for (int d = 0; d < 3; ++d) {
        const double fl = std::floor(c[d]);
        const int base = static_cast<int>(fl);
        const double frac = c[d] - fl;
        if constexpr (Taps == 2) {
            (*idx[d])[0] = base;
            (*idx[d])[1] = base + 1;
            (*wt[d])[0] = 1.0 - frac;
            (*wt[d])[1] = frac;
        } else {
            for (int t = 0; t < Taps; ++t) {
                const int q = base - Taps / 2 + 1 + t;
                (*idx[d])[t] = q;
                (*wt[d])[t] = kaiser_sinc(c[d] - q, Taps / 2);
            }
        }
    }
    return s;
}

inline double centring_sign(int qx, int qy, int qz) { return ((qx + qy + qz) & 1) ? -1.0 : 1.0; }

template <int Taps>
Complex gather(const FourierVolume& f, const Vec3& p) {
    const auto s = make_stencil<Taps>(p);
    Complex acc{};
    for (int c = 0; c < Taps; ++c) {
        for (int b = 0; b < Taps; ++b) {
            const double wyz = s.wy[b] * s.wz[c];
            if (wyz == 0.0) {
                continue;
            }
            for (int a = 0; a < Taps; ++a) {
                const double w = s.wx[a] * wyz * centring_sign(s.x[a], s.y[b], s.z[c]);
                acc += w * f.at(s.x[a], s.y[b], s.z[c]);
            }
        }
    }
    return acc;
}

template <int Taps>
void scatter(FourierVolume& f, const Vec3& p, Complex value) {
    const auto s = make_stencil<Taps>(p);
    for (int c = 0; c < Taps; ++c) {
        for (int b = 0; b < Taps; ++b) {
            const double wyz = s.wy[b] * s.wz[c];
            if (wyz == 0.0) {
                continue;
            }
            for (int a = 0; a < Taps; ++a) {
                const double w = s.wx[a] * wyz * centring_sign(s.x[a], s.y[b], s.z[c]);
                f.at(s.x[a], s.y[b], s.z[c]) += w * value;
            }
        }
    }
}

void check_slice_args(int volume_fourier_side, int oversampling, const Mat3& rotation, const FrequencyMask& mask,
                      std::size_t n_values) {
    require_rotation(rotation);
    if (mask.side() * oversampling != volume_fourier_side) {
        throw DimensionError("slice: mask side times oversampling does not match the Fourier volume side");
    }
    if (n_values != mask.count()) {
        throw DimensionError("slice: value count does not match the mask");
    }
}

inline Vec3 slice_point(const Mat3& r, const FrequencyIndex& k, int oversampling) {
    // R^T (kx, ky, 0): combination of the first two rows of R.
    return oversampling * (r.row(0).transpose() * k.kx + r.row(1).transpose() * k.ky);
}

inline double image_sign(const FrequencyIndex& k) { return ((k.kx + k.ky) & 1) ? -1.0 : 1.0; }

double trilinear_periodic(const VolumeGrid& v, double x, double y, double z) {
    const int n = v.side();
    const double fx = std::floor(x), fy = std::floor(y), fz = std::floor(z);
    const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy), z0 = static_cast<int>(fz);
    const double tx = x - fx, ty = y - fy, tz = z - fz;
    double acc = 0.0;
    for (int c = 0; c < 2; ++c) {
        const double wz = c ? tz : 1.0 - tz;
        const int zi = wrap_index(z0 + c, n);
        for (int b = 0; b < 2; ++b) {
            const double wy = b ? ty : 1.0 - ty;
            const int yi = wrap_index(y0 + b, n);
            for (int a = 0; a < 2; ++a) {
                const double wx = a ? tx : 1.0 - tx;
                acc += wx * wy * wz * v.at(wrap_index(x0 + a, n), yi, zi);
            }
        }
    }
    return acc;
}

void project_row(const VolumeGrid& v, const Mat3& r, int j, ParticleImage& out) {
    const int n = v.side();
    const double c = n / 2;
    // Volume coordinate of microscope-frame point q is R^T q + c.
    const Mat3 rt = r.transpose();
    for (int i = 0; i < n; ++i) {
        double sum = 0.0;
        for (int k = 0; k < n; ++k) {
            const Vec3 q(i - c, j - c, k - c);
            const Vec3 p = rt * q;
            sum += trilinear_periodic(v, p.x() + c, p.y() + c, p.z() + c);
        }
        out.at(i, j) = sum;
    }
}

} // namespace

std::string_view kernel_name(Interpolation k) {
    switch (k) {
    case Interpolation::trilinear: return "trilinear";
    case Interpolation::windowed_sinc: return "sinc";
    case Interpolation::wide_sinc: return "sinc8";
    }
    return "trilinear";
}

Interpolation parse_kernel(std::string_view name) {
    for (auto k : {Interpolation::trilinear, Interpolation::windowed_sinc, Interpolation::wide_sinc}) {
        if (kernel_name(k) == name) {
            return k;
        }
    }
    throw ConfigError(fmt::format("unknown interpolation kernel '{}' (trilinear, sinc, sinc8)", name));
}

FourierImage apply_shift(const FourierImage& g, Shift2 t) {
    const int n = g.side();
    FourierImage out(n);
    for (int iy = 0; iy < n; ++iy) {
        const int ky = signed_frequency(iy, n);
        for (int ix = 0; ix < n; ++ix) {
            const int kx = signed_frequency(ix, n);
            const double phase = -2.0 * kPi * (kx * t.x + ky * t.y) / n;
            out.at(kx, ky) = g.at(kx, ky) * std::polar(1.0, phase);
        }
    }
    return out;
}

std::vector<Complex> shift_phases(const FrequencyMask& mask, Shift2 t) {
    std::vector<Complex> out;
    out.reserve(mask.count());
    for (const auto& k : mask.members()) {
        out.push_back(std::polar(1.0, -2.0 * kPi * (k.kx * t.x + k.ky * t.y) / mask.side()));
    }
    return out;
}

void sample_slice(const FourierVolume& f, const Mat3& rotation, const FrequencyMask& mask, std::span<Complex> out,
                  Interpolation kernel) {
    check_slice_args(f.side(), f.oversampling(), rotation, mask, out.size());
    const auto members = mask.members();
    for (std::size_t m = 0; m < members.size(); ++m) {
        const Vec3 p = slice_point(rotation, members[m], f.oversampling());
        Complex v;
        switch (kernel) {
        case Interpolation::trilinear: v = gather<2>(f, p); break;
        case Interpolation::windowed_sinc: v = gather<4>(f, p); break;
        case Interpolation::wide_sinc: v = gather<8>(f, p); break;
        }
        out[m] = image_sign(members[m]) * v;
    }
}

void accumulate_slice_adjoint(std::span<const Complex> values, const Mat3& rotation, const FrequencyMask& mask,
                              FourierVolume& acc, Interpolation kernel) {
    check_slice_args(acc.side(), acc.oversampling(), rotation, mask, values.size());
    const auto members = mask.members();
    for (std::size_t m = 0; m < members.size(); ++m) {
        if (values[m] == Complex{}) {
            continue;
        }
        const Vec3 p = slice_point(rotation, members[m], acc.oversampling());
        const Complex v = image_sign(members[m]) * values[m];
        switch (kernel) {
        case Interpolation::trilinear: scatter<2>(acc, p, v); break;
        case Interpolation::windowed_sinc: scatter<4>(acc, p, v); break;
        case Interpolation::wide_sinc: scatter<8>(acc, p, v); break;
        }
    }
}

FourierImage extract_slice(const FourierVolume& f, const Mat3& rotation, const FrequencyMask& mask,
                           Interpolation kernel) {
    std::vector<Complex> values(mask.count());
    sample_slice(f, rotation, mask, values, kernel);
    return mask.scatter(values);
}

FourierVolume insert_slice_adjoint(const FourierImage& g, const Mat3& rotation, const FrequencyMask& mask,
                                   int volume_side, int oversampling, Interpolation kernel) {
    if (g.side() != mask.side()) {
        throw DimensionError("insert_slice_adjoint: image side does not match mask");
    }
    FourierVolume acc(volume_side * oversampling, oversampling);
    const auto values = mask.gather(g);
    accumulate_slice_adjoint(values, rotation, mask, acc, kernel);
    return acc;
}

ParticleImage project_real(const VolumeGrid& v, const Mat3& rotation) {
    require_rotation(rotation);
    const int n = v.side();
    ParticleImage out(n);
#pragma omp parallel for schedule(static)
    for (int j = 0; j < n; ++j) {
        project_row(v, rotation, j, out);
    }
    return out;
}

ParticleImage project_real_serial(const VolumeGrid& v, const Mat3& rotation) {
    require_rotation(rotation);
    const int n = v.side();
    ParticleImage out(n);
    for (int j = 0; j < n; ++j) {
        project_row(v, rotation, j, out);
    }
    return out;
}

} // namespace cryostoch
