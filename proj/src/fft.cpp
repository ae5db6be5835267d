#include "cryostoch/fft.hpp"

#include "cryostoch/error.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

namespace cryostoch {
namespace {

// FFTW planning is not thread safe; execution with the new-array interface is.
// FFTW_UNALIGNED keeps the chosen codelets independent of buffer alignment,
// which makes results bitwise reproducible across allocations.
class PlanCache {
public:
    static PlanCache& instance() {
        static PlanCache cache;
        return cache;
    }

    fftw_plan get(int rank, int n, FftDirection dir) {
        const auto key = std::make_tuple(rank, n, dir == FftDirection::forward);
        std::lock_guard lock(mutex_);
        if (auto it = plans_.find(key); it != plans_.end()) {
            return it->second;
        }
        std::size_t total = 1;
        for (int d = 0; d < rank; ++d) {
            total *= static_cast<std::size_t>(n);
        }
        auto* in = fftw_alloc_complex(total);
        auto* out = fftw_alloc_complex(total);
        const int sign = dir == FftDirection::forward ? FFTW_FORWARD : FFTW_BACKWARD;
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        fftw_plan plan = rank == 3 ? fftw_plan_dft_3d(n, n, n, in, out, sign, flags)
                                   : fftw_plan_dft_2d(n, n, in, out, sign, flags);
        fftw_free(in);
        fftw_free(out);
        if (plan == nullptr) {
            throw NumericalError("FFTW failed to create a plan");
        }
        plans_.emplace(key, plan);
        return plan;
    }

    PlanCache(const PlanCache&) = delete;
    PlanCache& operator=(const PlanCache&) = delete;

private:
    PlanCache() = default;
    ~PlanCache() {
        for (auto& [key, plan] : plans_) {
            fftw_destroy_plan(plan);
        }
    }

    std::mutex mutex_;
    std::map<std::tuple<int, int, bool>, fftw_plan> plans_;
};

void execute(int rank, std::span<const Complex> in, std::span<Complex> out, int n, FftDirection dir) {
    require_even_side(n, "fft");
    std::size_t total = 1;
    for (int d = 0; d < rank; ++d) {
        total *= static_cast<std::size_t>(n);
    }
    if (in.size() != total || out.size() != total) {
        throw DimensionError("fft: buffer size does not match transform size");
    }
    if (in.data() == out.data()) {
        throw DimensionError("fft: in-place transforms are not supported");
    }
    fftw_plan plan = PlanCache::instance().get(rank, n, dir);
    // FFTW does not modify the input of an out-of-place complex transform.
    auto* src = reinterpret_cast<fftw_complex*>(const_cast<Complex*>(in.data()));
    auto* dst = reinterpret_cast<fftw_complex*>(out.data());
    fftw_execute_dft(plan, src, dst);
}

} // namespace

void dft3(std::span<const Complex> in, std::span<Complex> out, int n, FftDirection dir) {
    execute(3, in, out, n, dir);
}

void dft2(std::span<const Complex> in, std::span<Complex> out, int n, FftDirection dir) {
    execute(2, in, out, n, dir);
}

FourierVolume fft3(const VolumeGrid& v) {
    const int n = v.side();
    require_even_side(n, "fft3");
    std::vector<Complex> in(v.values().begin(), v.values().end());
    FourierVolume f(n);
    dft3(in, f.coefficients(), n, FftDirection::forward);
    return f;
}

std::vector<Complex> ifft3_complex(const FourierVolume& f) {
    const int n = f.side();
    std::vector<Complex> out(f.size());
    dft3(f.coefficients(), out, n, FftDirection::backward);
    const double scale = 1.0 / (static_cast<double>(n) * n * n);
    for (auto& c : out) {
        c *= scale;
    }
    return out;
}

VolumeGrid ifft3(const FourierVolume& f) {
    const auto c = ifft3_complex(f);
    std::vector<double> data(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
        data[i] = c[i].real();
    }
    return VolumeGrid(f.side(), std::move(data));
}

FourierImage fft2(const ParticleImage& img) {
    const int n = img.side();
    require_even_side(n, "fft2");
    std::vector<Complex> in(img.pixels().begin(), img.pixels().end());
    FourierImage g(n);
    dft2(in, g.coefficients(), n, FftDirection::forward);
    return g;
}

std::vector<Complex> ifft2_complex(const FourierImage& g) {
    const int n = g.side();
    std::vector<Complex> out(g.coefficients().size());
    dft2(g.coefficients(), out, n, FftDirection::backward);
    const double scale = 1.0 / (static_cast<double>(n) * n);
    for (auto& c : out) {
        c *= scale;
    }
    return out;
}

ParticleImage ifft2(const FourierImage& g) {
    const auto c = ifft2_complex(g);
    std::vector<double> px(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
        px[i] = c[i].real();
    }
    return ParticleImage(g.side(), std::move(px));
}

} // namespace cryostoch
