#include "cryostoch/error.hpp"
#include "cryostoch/optim.hpp"

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include <cmath>

namespace cryostoch {
namespace {

constexpr double kCurvatureGuard = 1e-10;
constexpr double kFiniteDifferenceScale = 1e-4;

double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// y += alpha x
void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] += alpha * x[i];
    }
}

} // namespace

std::vector<double> conjugate_gradient(const std::function<std::vector<double>(std::span<const double>)>& apply,
                                       std::span<const double> b, int iterations, double damping,
                                       std::vector<double>* residuals) {
    const std::size_t n = b.size();
    std::vector<double> x(n, 0.0);
    std::vector<double> r(b.begin(), b.end());
    std::vector<double> p = r;
    double rr = dot(r, r);
    if (residuals) {
        residuals->push_back(std::sqrt(rr));
    }
    for (int it = 0; it < iterations && rr > 0.0; ++it) {
        auto ap = apply(p);
        if (ap.size() != n) {
            throw DimensionError("conjugate_gradient: operator changed the vector length");
        }
        axpy(damping, p, ap);
        const double pap = dot(p, ap);
        if (!(pap > 0.0)) {
            break;
        }
        const double alpha = rr / pap;
        axpy(alpha, p, x);
        axpy(-alpha, ap, r);
        const double rr_new = dot(r, r);
        if (residuals) {
            residuals->push_back(std::sqrt(rr_new));
        }
        const double beta = rr_new / rr;
        rr = rr_new;
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = r[i] + beta * p[i];
        }
    }
    return x;
}

Optimizer::Optimizer(OptimizerConfig cfg, std::size_t dimension) : cfg_(cfg), dim_(dimension) {
    cfg_.validate();
    if (dim_ == 0) {
        throw DimensionError("optimizer needs a non-empty parameter vector");
    }
    if (cfg_.method == Method::cm || cfg_.method == Method::nag) {
        velocity_.assign(dim_, 0.0);
    }
    if (cfg_.method == Method::adagrad) {
        accum_.assign(dim_, 0.0);
    }
}

Evaluation Optimizer::evaluate(const GradientSource& source, std::span<const double> v) {
    auto e = source(v);
    ++calls_;
    if (e.gradient.size() != dim_) {
        throw DimensionError(fmt::format("gradient has {} entries, expected {}", e.gradient.size(), dim_));
    }
    if (!std::isfinite(e.value)) {
        throw NumericalError(fmt::format("objective is not finite at iteration {}", t_));
    }
    for (double x : e.gradient) {
        if (!std::isfinite(x)) {
            throw NumericalError(fmt::format("gradient has non-finite entries at iteration {}", t_));
        }
    }
    return e;
}

double Optimizer::momentum() const { return cfg_.fixed_momentum ? *cfg_.fixed_momentum : momentum_schedule(t_); }

bool Optimizer::push_curvature_pair(std::vector<double> s, std::vector<double> y) {
    const double sy = dot(s, y);
    if (!(sy > kCurvatureGuard)) {
        return false;
    }
    pairs_.push_back({std::move(s), std::move(y), 1.0 / sy});
    while (pairs_.size() > static_cast<std::size_t>(cfg_.lbfgs_memory)) {
        pairs_.pop_front();
    }
    return true;
}

std::vector<double> Optimizer::lbfgs_direction(std::span<const double> g) const {
    std::vector<double> q(g.begin(), g.end());
    std::vector<double> alpha(pairs_.size());
    for (std::size_t k = pairs_.size(); k-- > 0;) {
        alpha[k] = pairs_[k].rho * dot(pairs_[k].s, q);
        axpy(-alpha[k], pairs_[k].y, q);
    }
    double gamma = cfg_.lbfgs_initial_gamma;
    if (!pairs_.empty()) {
        const auto& last = pairs_.back();
        gamma = dot(last.s, last.y) / dot(last.y, last.y);
    }
    for (double& x : q) {
        x *= gamma;
    }
    for (std::size_t k = 0; k < pairs_.size(); ++k) {
        const double beta = pairs_[k].rho * dot(pairs_[k].y, q);
        axpy(alpha[k] - beta, pairs_[k].s, q);
    }
    return q;
}

void Optimizer::refresh_covariance() {
    factors_.clear();
    eigenvalues_.clear();
    const auto k = static_cast<Eigen::Index>(recent_.size());
    if (k == 0 || cfg_.tonga_rank == 0) {
        return;
    }
    // Covariance C = (1/k) B B^T from the Gram matrix (1/k) B^T B.
    Eigen::MatrixXd gram(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            gram(i, j) = gram(j, i) = dot(recent_[i], recent_[j]) / static_cast<double>(k);
        }
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    const auto& lambda = eig.eigenvalues();
    const double top = lambda(k - 1);
    if (!(top > 0.0)) {
        return;
    }
    const int rank = std::min<int>(cfg_.tonga_rank, static_cast<int>(k));
    for (int r = 0; r < rank; ++r) {
        const Eigen::Index col = k - 1 - r;
        const double l = lambda(col);
        if (!(l > 1e-12 * top)) {
            break;
        }
        std::vector<double> u(dim_, 0.0);
        for (Eigen::Index i = 0; i < k; ++i) {
            axpy(eig.eigenvectors()(i, col), recent_[i], u);
        }
        const double scale = 1.0 / std::sqrt(static_cast<double>(k) * l);
        for (double& x : u) {
            x *= scale;
        }
        factors_.push_back(std::move(u));
        eigenvalues_.push_back(l);
    }
}

std::vector<double> Optimizer::tonga_direction(std::span<const double> g) const {
    const double eps = cfg_.tonga_epsilon;
    std::vector<double> d(g.begin(), g.end());
    for (std::size_t r = 0; r < factors_.size(); ++r) {
        const double l = eigenvalues_[r];
        axpy(-(l / (eps + l)) * dot(factors_[r], g), factors_[r], d);
    }
    for (double& x : d) {
        x /= eps;
    }
    return d;
}

StepReport Optimizer::step(std::span<double> v, const GradientSource& source) {
    if (v.size() != dim_) {
        throw DimensionError(fmt::format("parameter vector has {} entries, expected {}", v.size(), dim_));
    }
    StepReport report;
    const std::size_t calls_before = calls_;
    std::vector<double> delta(dim_);

    switch (cfg_.method) {
    case Method::sgd: {
        const auto e = evaluate(source, v);
        report.value = e.value;
        report.learning_rate = lr_schedule(t_, cfg_.schedule);
        for (std::size_t i = 0; i < dim_; ++i) {
            delta[i] = -report.learning_rate * e.gradient[i];
        }
        break;
    }
    case Method::cm:
    case Method::nag: {
        const double mu = momentum();
        report.learning_rate = lr_schedule(t_, cfg_.schedule);
        Evaluation e;
        if (cfg_.method == Method::nag) {
            std::vector<double> ahead(v.begin(), v.end());
            axpy(mu, velocity_, ahead);
            e = evaluate(source, ahead);
        } else {
            e = evaluate(source, v);
        }
        report.value = e.value;
        for (std::size_t i = 0; i < dim_; ++i) {
            velocity_[i] = mu * velocity_[i] - report.learning_rate * e.gradient[i];
            delta[i] = velocity_[i];
        }
        break;
    }
    case Method::adagrad: {
        const auto e = evaluate(source, v);
        report.value = e.value;
        report.learning_rate = cfg_.schedule.eta0;
        for (std::size_t i = 0; i < dim_; ++i) {
            const double g = e.gradient[i];
            accum_[i] += g * g;
            delta[i] = -report.learning_rate * g / (std::sqrt(accum_[i]) + cfg_.adagrad_epsilon);
        }
        break;
    }
    case Method::tonga: {
        auto e = evaluate(source, v);
        report.value = e.value;
        report.learning_rate = lr_schedule(t_, cfg_.schedule);
        recent_.push_back(e.gradient);
        while (recent_.size() > static_cast<std::size_t>(std::max(cfg_.tonga_rank, 1))) {
            recent_.pop_front();
        }
        if (t_ % static_cast<std::size_t>(cfg_.tonga_period) == 0) {
            refresh_covariance();
        }
        const auto d = tonga_direction(e.gradient);
        for (std::size_t i = 0; i < dim_; ++i) {
            delta[i] = -report.learning_rate * d[i];
        }
        break;
    }
    case Method::olbfgs: {
        const auto e = evaluate(source, v);
        report.value = e.value;
        report.learning_rate = lr_schedule(t_, cfg_.schedule);
        const auto d = lbfgs_direction(e.gradient);
        std::vector<double> next(v.begin(), v.end());
        for (std::size_t i = 0; i < dim_; ++i) {
            delta[i] = -report.learning_rate * d[i];
            next[i] += delta[i];
        }
        const auto e2 = evaluate(source, next);
        std::vector<double> y(dim_);
        for (std::size_t i = 0; i < dim_; ++i) {
            y[i] = e2.gradient[i] - e.gradient[i] + cfg_.lbfgs_regularizer * delta[i];
        }
        push_curvature_pair(delta, std::move(y));
        break;
    }
    case Method::hf: {
        const auto e = evaluate(source, v);
        report.value = e.value;
        const double v_norm = norm(v);
        auto hessian_vector = [&](std::span<const double> w) {
            std::vector<double> hw(dim_, 0.0);
            const double w_norm = norm(w);
            if (w_norm == 0.0) {
                return hw;
            }
            const double eps = kFiniteDifferenceScale * (1.0 + v_norm) / w_norm;
            std::vector<double> probe(v.begin(), v.end());
            axpy(eps, w, probe);
            const auto ep = evaluate(source, probe);
            for (std::size_t i = 0; i < dim_; ++i) {
                hw[i] = (ep.gradient[i] - e.gradient[i]) / eps;
            }
            return hw;
        };
        std::vector<double> rhs(dim_);
        for (std::size_t i = 0; i < dim_; ++i) {
            rhs[i] = -e.gradient[i];
        }
        delta = conjugate_gradient(hessian_vector, rhs, cfg_.cg_iterations, cfg_.hf_damping);
        break;
    }
    }

    for (std::size_t i = 0; i < dim_; ++i) {
        v[i] += delta[i];
    }
    report.step_norm = norm(delta);
    report.gradient_calls = static_cast<int>(calls_ - calls_before);
    ++t_;
    return report;
}

} // namespace cryostoch
