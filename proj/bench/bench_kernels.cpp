// Parallel kernels against their serial references.

#include "cryostoch/model.hpp"
#include "cryostoch/operators.hpp"
#include "cryostoch/synth.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace cryostoch;

namespace {

VolumeGrid noise_volume(int n) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    VolumeGrid v(n);
    for (double& x : v.data()) {
        x = g(rng);
    }
    return v;
}

Mat3 oblique() {
    return Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
}

void BM_project_real(benchmark::State& state) {
    const auto v = noise_volume(static_cast<int>(state.range(0)));
    const auto r = oblique();
    for (auto _ : state) {
        benchmark::DoNotOptimize(project_real(v, r));
    }
}

void BM_project_real_serial(benchmark::State& state) {
    const auto v = noise_volume(static_cast<int>(state.range(0)));
    const auto r = oblique();
    for (auto _ : state) {
        benchmark::DoNotOptimize(project_real_serial(v, r));
    }
}

// Batch of observations at N = 32, cutoff 0.25, zero shifts.
struct BatchFixture {
    static constexpr int kSide = 32;
    Projector proj{kSide, 0.25};
    PoseScheme scheme = build_pose_scheme(0.25, kSide, ShiftPrior::none());
    NoiseModel noise{3.0};
    VolumeGrid volume = noise_volume(kSide);
    std::vector<Observation> obs;
    std::vector<const Observation*> ptrs;

    explicit BatchFixture(int batch) {
        std::mt19937_64 rng(5);
        std::normal_distribution<double> g;
        for (int i = 0; i < batch; ++i) {
            ParticleImage img(kSide);
            for (double& p : img.pixels()) {
                p = g(rng);
            }
            obs.push_back(make_observation(img, CtfParams{}, 3.0, proj.mask(), i));
        }
        for (const auto& o : obs) {
            ptrs.push_back(&o);
        }
    }
};

void BM_batch_gradient(benchmark::State& state) {
    BatchFixture f(static_cast<int>(state.range(0)));
    const BatchEvaluator eval(f.proj, f.scheme, f.noise);
    const auto fv = f.proj.transform(f.volume);
    for (auto _ : state) {
        benchmark::DoNotOptimize(eval.evaluate(f.ptrs, fv, 1.0));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_batch_gradient_reference(benchmark::State& state) {
    BatchFixture f(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        for (const auto* o : f.ptrs) {
            benchmark::DoNotOptimize(marginal_grad(f.proj, *o, f.scheme, f.volume, f.noise));
        }
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

} // namespace

BENCHMARK(BM_project_real)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_project_real_serial)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_batch_gradient)->Arg(10)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_batch_gradient_reference)->Arg(10)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
