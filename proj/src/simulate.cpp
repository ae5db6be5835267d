#include "cryostoch/error.hpp"
#include "cryostoch/fft.hpp"
#include "cryostoch/model.hpp"
#include "cryostoch/synth.hpp"

#include <fmt/format.h>

#include <cmath>

namespace cryostoch {
namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double pixel_variance(const ParticleImage& img) {
    const auto px = img.pixels();
    const double mean = img.sum() / static_cast<double>(px.size());
    double acc = 0.0;
    for (double p : px) {
        acc += (p - mean) * (p - mean);
    }
    return acc / static_cast<double>(px.size());
}

} // namespace

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t state = seed;
    const std::uint64_t a = splitmix64(state);
    state = a ^ (index * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL);
    const std::uint64_t b = splitmix64(state);
    std::seed_seq seq{static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32)};
    return std::mt19937_64(seq);
}

Quaternion uniform_random_quaternion(std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (;;) {
        const double w = gauss(rng), x = gauss(rng), y = gauss(rng), z = gauss(rng);
        const double n = std::sqrt(w * w + x * x + y * y + z * z);
        if (n > 1e-8) {
            return Quaternion(w / n, x / n, y / n, z / n);
        }
    }
}

Mat3 rotation_from_quaternion(const Quaternion& q) { return q.normalized().toRotationMatrix(); }

Mat3 uniform_random_rotation(std::mt19937_64& rng) { return rotation_from_quaternion(uniform_random_quaternion(rng)); }

std::vector<CtfParams> default_ctf_pool() {
    std::vector<CtfParams> pool;
    constexpr int kCount = 21;
    for (int i = 0; i < kCount; ++i) {
        CtfParams p;
        const double dz = 10000.0 + 20000.0 * i / (kCount - 1);
        p.defocus_u = dz + 250.0;
        p.defocus_v = dz - 250.0;
        p.astigmatism_angle = kPi * i / kCount;
        pool.push_back(p);
    }
    return pool;
}

void SimulationConfig::validate() const {
    if (count == 0) {
        throw ConfigError("simulation needs at least one image");
    }
    if (!(target_snr > 0.0)) {
        throw ConfigError(fmt::format("target SNR must be positive, got {}", target_snr));
    }
    if (ctf_pool.empty()) {
        throw ConfigError("CTF pool is empty");
    }
    for (const auto& c : ctf_pool) {
        c.validate();
    }
    if (!(pixel_size > 0.0)) {
        throw ConfigError("pixel size must be positive");
    }
    if (!(shift_std >= 0.0) || !(shift_radius >= 0.0)) {
        throw ConfigError("shift parameters must be non-negative");
    }
}

ImageRenderer::ImageRenderer(const VolumeGrid& v, double pixel_size)
    : side_(v.side()), pixel_size_(pixel_size), mask_(FrequencyMask::full(v.side())),
      transform_(Projector(v.side(), FrequencyMask::full(v.side()), 2, Interpolation::wide_sinc).transform(v)) {}

ParticleImage ImageRenderer::render(const Mat3& rotation, Shift2 shift, const CtfParams& ctf) const {
    std::vector<Complex> slice(mask_.count());
    sample_slice(transform_, rotation, mask_, slice, Interpolation::wide_sinc);
    auto g = apply_ctf(apply_shift(mask_.scatter(slice), shift), ctf, pixel_size_);
    return ifft2(g);
}

SimulatedDataset simulate_dataset(const VolumeGrid& v, const SimulationConfig& cfg) {
    cfg.validate();
    const std::size_t k = cfg.count;
    const ImageRenderer renderer(v, cfg.pixel_size);

    SimulatedDataset out;
    out.images.resize(k);
    out.clean.resize(k);
    out.orientations.resize(k);
    out.shifts.resize(k);
    out.ctfs.resize(k);
    std::vector<double> variances(k);
    std::vector<std::mt19937_64> rngs(k);

#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(k); ++i) {
        auto rng = stream_rng(cfg.seed, static_cast<std::uint64_t>(i));
        out.orientations[i] = uniform_random_quaternion(rng);
        std::uniform_int_distribution<std::size_t> pick(0, cfg.ctf_pool.size() - 1);
        out.ctfs[i] = cfg.ctf_pool[pick(rng)];
        Shift2 t{};
        if (cfg.shift_std > 0.0) {
            std::normal_distribution<double> gauss(0.0, cfg.shift_std);
            do {
                t = {gauss(rng), gauss(rng)};
            } while (cfg.shift_radius > 0.0 && std::hypot(t.x, t.y) > cfg.shift_radius);
        }
        out.shifts[i] = t;
        out.clean[i] = renderer.render(rotation_from_quaternion(out.orientations[i]), t, out.ctfs[i]);
        variances[i] = pixel_variance(out.clean[i]);
        rngs[i] = std::move(rng);
    }

    double total = 0.0;
    for (double s : variances) {
        total += s;
    }
    out.signal_variance = total / static_cast<double>(k);
    if (!(out.signal_variance > 0.0)) {
        throw DataError("simulated clean images have zero variance; the volume is empty or constant");
    }
    out.sigma = std::isinf(cfg.target_snr) ? 0.0 : std::sqrt(out.signal_variance / cfg.target_snr);

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(k); ++i) {
        ParticleImage img = out.clean[i];
        if (out.sigma > 0.0) {
            std::normal_distribution<double> noise(0.0, out.sigma);
            for (double& p : img.pixels()) {
                p += noise(rngs[i]);
            }
        }
        out.images[i] = std::move(img);
    }
    return out;
}

} // namespace cryostoch
