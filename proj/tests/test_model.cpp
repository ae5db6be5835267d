#include "support.hpp"

#include "cryostoch/ctf.hpp"
#include "cryostoch/error.hpp"
#include "cryostoch/fft.hpp"
#include "cryostoch/model.hpp"
#include "cryostoch/operators.hpp"
#include "cryostoch/quadrature.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace cryostoch;
using testing::rel_diff;

namespace {

constexpr double kPixel = 3.0;

CtfParams test_ctf(int i) {
    CtfParams c;
    c.defocus_u = 12000.0 + 3000.0 * i;
    c.defocus_v = c.defocus_u - 400.0;
    c.astigmatism_angle = 0.3 * i;
    c.b_factor = 20.0;
    return c;
}

ParticleImage roll(const ParticleImage& img, int tx, int ty) {
    const int n = img.side();
    ParticleImage out(n);
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            out.at(wrap_index(x + tx, n), wrap_index(y + ty, n)) = img.at(x, y);
        }
    }
    return out;
}

// Real-space image formation: project, translate, convolve with the CTF.
ParticleImage form_image(const VolumeGrid& v, const Mat3& r, int tx, int ty, const CtfParams& ctf) {
    const auto shifted = roll(project_real(v, r), tx, ty);
    return ifft2(apply_ctf(fft2(shifted), ctf, kPixel));
}

double real_space_loglik(const ParticleImage& img, const ParticleImage& pred, double sigma) {
    double q = 0.0;
    for (std::size_t i = 0; i < img.pixels().size(); ++i) {
        const double d = img.pixels()[i] - pred.pixels()[i];
        q += d * d;
    }
    const double n2 = static_cast<double>(img.pixels().size());
    return -q / (2 * sigma * sigma) - 0.5 * n2 * std::log(2 * kPi * sigma * sigma);
}

std::vector<WeightedRotation> grid_orientations() {
    std::vector<WeightedRotation> out;
    const auto rs = testing::grid_rotations();
    for (std::size_t i = 0; i < rs.size(); ++i) {
        out.push_back({rs[i], (1.0 + static_cast<double>(i)) / 15.0});
    }
    return out;
}

std::vector<WeightedShift> integer_shifts() {
    return {{{0, 0}, 0.4}, {{1, 0}, 0.2}, {{0, -2}, 0.15}, {{-1, 1}, 0.25}};
}

ParticleImage noisy(const ParticleImage& clean, double sigma, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, sigma);
    ParticleImage out = clean;
    for (double& p : out.pixels()) {
        p += g(rng);
    }
    return out;
}

// Volume with entries bounded away from zero so the prior is smooth nearby.
VolumeGrid mixed_sign_volume(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> mag(0.2, 1.0);
    std::bernoulli_distribution neg(0.3);
    VolumeGrid v(n);
    for (double& x : v.data()) {
        x = neg(rng) ? -mag(rng) : mag(rng);
    }
    return v;
}

} // namespace

TEST_CASE("Fourier likelihood matches the real-space image formation model") {
    const int n = 16;
    const double sigma = 1.5;
    const auto v = testing::blob_volume(n);
    const PoseScheme scheme(grid_orientations(), integer_shifts());
    const auto mask = FrequencyMask::full(n);
    for (auto kernel : {Interpolation::trilinear, Interpolation::windowed_sinc}) {
        const Projector proj(n, mask, 2, kernel);
        const auto fv = proj.transform(v);
        const BatchEvaluator batch(proj, scheme, NoiseModel{sigma});
        for (int i = 0; i < 3; ++i) {
            const auto ctf = test_ctf(i);
            const auto truth = scheme.pose(static_cast<std::size_t>(4 * i + 1));
            const auto img = noisy(form_image(v, truth.rotation, static_cast<int>(truth.shift.x),
                                              static_cast<int>(truth.shift.y), ctf),
                                   sigma, 100 + i);
            const auto obs = make_observation(img, ctf, kPixel, mask, i);

            std::vector<double> logw, ll;
            for (std::size_t j = 0; j < scheme.size(); ++j) {
                const auto pose = scheme.pose(j);
                const auto pred = form_image(v, pose.rotation, static_cast<int>(pose.shift.x),
                                             static_cast<int>(pose.shift.y), ctf);
                const double expected = real_space_loglik(img, pred, sigma);
                const double got = per_pose_loglik(proj, obs, pose, fv, NoiseModel{sigma});
                CHECK(rel_diff(got, expected) < 1e-8);
                logw.push_back(std::log(scheme.weight(j)));
                ll.push_back(expected);
            }
            double peak = -1e300;
            for (std::size_t j = 0; j < ll.size(); ++j) {
                peak = std::max(peak, logw[j] + ll[j]);
            }
            double s = 0.0;
            for (std::size_t j = 0; j < ll.size(); ++j) {
                s += std::exp(logw[j] + ll[j] - peak);
            }
            const double expected_marginal = peak + std::log(s);
            const auto m = marginal_loglik(proj, obs, scheme, fv, NoiseModel{sigma}, false);
            CHECK(rel_diff(m.log_marginal, expected_marginal) < 1e-8);
            const Observation* ptr = &obs;
            const auto r = batch.evaluate(std::span<const Observation* const>(&ptr, 1), fv);
            CHECK(rel_diff(r.log_marginals[0], expected_marginal) < 1e-8);
        }
    }
}

TEST_CASE("log-sum-exp matches direct summation") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    std::vector<double> lw(10), ll(10), resp(10);
    double wsum = 0.0;
    for (std::size_t j = 0; j < 10; ++j) {
        lw[j] = u(rng);
        ll[j] = u(rng);
        wsum += std::exp(lw[j] + ll[j]);
    }
    const double got = log_sum_exp(lw, ll, resp);
    CHECK(std::abs(got - std::log(wsum)) < 1e-12);
    double rsum = 0.0;
    for (std::size_t j = 0; j < 10; ++j) {
        CHECK(std::abs(resp[j] - std::exp(lw[j] + ll[j]) / wsum) < 1e-12);
        rsum += resp[j];
    }
    CHECK(std::abs(rsum - 1.0) < 1e-12);

    // Large negative log-likelihoods would underflow a direct sum.
    std::vector<double> far(ll);
    for (double& x : far) {
        x -= 1e5;
    }
    CHECK(std::abs(log_sum_exp(lw, far) - (std::log(wsum) - 1e5)) < 1e-9);

    std::vector<double> bad(ll);
    bad[3] = std::nan("");
    CHECK_THROWS_AS((void)log_sum_exp(lw, bad), NumericalError);
    CHECK_THROWS_AS((void)log_sum_exp(lw, std::span<const double>(ll).first(5)), DimensionError);
}

TEST_CASE("minibatch objective gradient matches central differences") {
    const int n = 8;
    const std::size_t b = 3, k = 40;
    const Projector proj(n, 0.75, 2, Interpolation::trilinear);
    const auto scheme = build_pose_scheme(6, 2, ShiftPrior::none());
    REQUIRE(scheme.size() == 12);
    const NoiseModel noise{2.0};
    const PriorParams prior{0.05, 0.3};
    const auto truth = testing::random_volume(n, 11, 0.0, 1.0);
    std::vector<Observation> obs;
    for (std::size_t i = 0; i < b; ++i) {
        const auto ctf = test_ctf(static_cast<int>(i));
        const auto img = noisy(form_image(truth, scheme.pose(3 * i + 1).rotation, 0, 0, ctf), noise.sigma, 7 + i);
        obs.push_back(make_observation(img, ctf, kPixel, proj.mask(), static_cast<int>(i)));
    }
    std::vector<const Observation*> ptrs;
    for (const auto& o : obs) {
        ptrs.push_back(&o);
    }
    const auto v = mixed_sign_volume(n, 21);
    const auto at = minibatch_objective(proj, ptrs, v, scheme, noise, prior, k);

    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    double worst = 0.0;
    for (int probe = 0; probe < 20; ++probe) {
        VolumeGrid d(n);
        for (double& x : d.data()) {
            x = g(rng);
        }
        const double h = 1e-5;
        VolumeGrid plus = v, minus = v;
        for (std::size_t i = 0; i < v.size(); ++i) {
            plus.data()[i] += h * d.data()[i];
            minus.data()[i] -= h * d.data()[i];
        }
        const double fd = (minibatch_objective(proj, ptrs, plus, scheme, noise, prior, k).value -
                           minibatch_objective(proj, ptrs, minus, scheme, noise, prior, k).value) /
                          (2 * h);
        double analytic = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            analytic += at.gradient.data()[i] * d.data()[i];
        }
        worst = std::max(worst, std::abs(fd - analytic) / std::abs(analytic));
    }
    MESSAGE("worst relative directional derivative error " << worst);
    CHECK(worst < 1e-6);
}

TEST_CASE("minibatch objective is the scaled sum of reference marginals") {
    const int n = 8;
    const Projector proj(n, 0.75, 2, Interpolation::windowed_sinc);
    const auto scheme = build_pose_scheme(14, 3, ShiftPrior{1.0, 1.0, 1.0, false});
    const NoiseModel noise{1.0};
    const PriorParams prior{0.1, 0.2};
    const auto v = mixed_sign_volume(n, 4);
    const auto fv = proj.transform(v);
    std::vector<Observation> obs;
    for (int i = 0; i < 4; ++i) {
        const auto ctf = test_ctf(i);
        const auto img = noisy(form_image(v, scheme.pose(5 * i).rotation, 0, 0, ctf), 1.0, 50 + i);
        obs.push_back(make_observation(img, ctf, kPixel, proj.mask(), i));
    }
    std::vector<const Observation*> ptrs;
    for (const auto& o : obs) {
        ptrs.push_back(&o);
    }
    const std::size_t k = 100;
    const auto got = minibatch_objective(proj, ptrs, v, scheme, noise, prior, k);

    double sum = 0.0;
    VolumeGrid grad(n);
    for (const auto& o : obs) {
        const auto ref = marginal_grad(proj, o, scheme, v, noise);
        sum += ref.log_marginal;
        for (std::size_t i = 0; i < grad.size(); ++i) {
            grad.data()[i] += ref.gradient.data()[i];
        }
    }
    const double scale = static_cast<double>(k) / static_cast<double>(obs.size());
    CHECK(rel_diff(got.value, -scale * sum - log_prior(v, prior)) < 1e-12);
    const auto pg = log_prior_grad(v, prior);
    double err = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
        const double expected = -scale * grad.data()[i] - pg.data()[i];
        err = std::max(err, std::abs(got.gradient.data()[i] - expected));
        norm = std::max(norm, std::abs(expected));
    }
    CHECK(err / norm < 1e-10);

    // Batched evaluation against the per-image reference.
    const BatchEvaluator batch(proj, scheme, noise);
    const auto r = batch.evaluate(ptrs, fv, 1.0);
    REQUIRE(r.gradient.has_value());
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const auto m = marginal_loglik(proj, obs[i], scheme, fv, noise, false);
        CHECK(rel_diff(r.log_marginals[i], m.log_marginal) < 1e-12);
    }
    const auto batch_grad = proj.transform_adjoint(*r.gradient);
    err = 0.0;
    norm = 0.0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
        err = std::max(err, std::abs(batch_grad.data()[i] - grad.data()[i]));
        norm = std::max(norm, std::abs(grad.data()[i]));
    }
    CHECK(err / norm < 1e-10);
}

TEST_CASE("batched evaluation is independent of batch order") {
    const int n = 8;
    const Projector proj(n, 0.5, 2, Interpolation::trilinear);
    const auto scheme = build_pose_scheme(6, 4, ShiftPrior::none());
    const auto v = testing::random_volume(n, 9, 0.0, 1.0);
    const auto fv = proj.transform(v);
    std::vector<Observation> obs;
    for (int i = 0; i < 5; ++i) {
        obs.push_back(make_observation(noisy(project_real(v, scheme.pose(i).rotation), 1.0, i), test_ctf(i), kPixel,
                                       proj.mask(), i));
    }
    std::vector<const Observation*> fwd, rev;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        fwd.push_back(&obs[i]);
        rev.push_back(&obs[obs.size() - 1 - i]);
    }
    const BatchEvaluator batch(proj, scheme, NoiseModel{1.0});
    const auto a = batch.evaluate(fwd, fv, 1.0);
    const auto b = batch.evaluate(rev, fv, 1.0);
    for (std::size_t i = 0; i < obs.size(); ++i) {
        CHECK(a.log_marginals[i] == b.log_marginals[obs.size() - 1 - i]);
    }
    CHECK(dataset_nll(proj, fwd, v, scheme, NoiseModel{1.0}) == dataset_nll(proj, rev, v, scheme, NoiseModel{1.0}));
}

TEST_CASE("prior values and gradient") {
    VolumeGrid v(2);
    const std::vector<double> x{2.0, -1.0, 0.0, 0.5, -0.5, 3.0, -2.0, 1.0};
    std::copy(x.begin(), x.end(), v.data().begin());
    const PriorParams p{0.5, 0.25};
    double expected = 0.0;
    for (double xi : x) {
        expected += xi >= 0 ? -0.5 * xi : -0.25 * std::abs(xi * xi * xi);
    }
    CHECK(std::abs(log_prior(v, p) - expected) < 1e-14);
    const auto g = log_prior_grad(v, p);
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] == 0.0) {
            continue;
        }
        VolumeGrid vp = v, vm = v;
        vp.data()[i] += 1e-6;
        vm.data()[i] -= 1e-6;
        const double fd = (log_prior(vp, p) - log_prior(vm, p)) / 2e-6;
        CHECK(std::abs(g.data()[i] - fd) < 1e-7);
    }
}

TEST_CASE("noise level is validated") {
    CHECK_THROWS_AS(require_noise(NoiseModel{0.0}), ConfigError);
    CHECK_THROWS_AS(require_noise(NoiseModel{-1.0}), ConfigError);
    CHECK_THROWS_AS(require_noise(NoiseModel{std::nan("")}), ConfigError);
    CHECK_NOTHROW(require_noise(NoiseModel{0.3}));
}

TEST_CASE("observations must match the projector mask") {
    const Projector proj(8, 0.5);
    const Projector other(8, 0.75);
    const auto scheme = build_pose_scheme(6, 1, ShiftPrior::none());
    const auto obs = make_observation(ParticleImage(8), CtfParams{}, kPixel, other.mask(), 0);
    const auto fv = proj.transform(VolumeGrid(8));
    CHECK_THROWS_AS((void)marginal_loglik(proj, obs, scheme, fv, NoiseModel{1.0}, false), DimensionError);
}
