#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cryostoch {

enum class Method { sgd, cm, nag, adagrad, tonga, olbfgs, hf };

[[nodiscard]] std::string_view method_name(Method m);
/// Throws ConfigError for an unknown name.
[[nodiscard]] Method parse_method(std::string_view name);
[[nodiscard]] std::span<const Method> all_methods();

struct ScheduleParams {
    double eta0 = 1.0;
    double lambda_anneal = 1e-2;

    void validate() const;
};

/// eta0 * (1 + lambda t)^(-0.75)
[[nodiscard]] double lr_schedule(std::size_t t, const ScheduleParams& p);
/// min(0.9, 1 - 2^(-1 - log2(floor(t/100) + 1)))
[[nodiscard]] double momentum_schedule(std::size_t t);

struct OptimizerConfig {
    Method method = Method::sgd;
    ScheduleParams schedule;
    std::optional<double> fixed_momentum; ///< overrides momentum_schedule when set

    double adagrad_epsilon = 1e-8;

    int tonga_rank = 20;
    int tonga_period = 20;
    double tonga_epsilon = 1.0;

    int lbfgs_memory = 30;
    double lbfgs_regularizer = 1e-4;
    double lbfgs_initial_gamma = 1.0; ///< H0 scale while the memory is empty

    int cg_iterations = 5;
    double hf_damping = 1.0;
    std::size_t hf_batch_size = 300;

    void validate() const;
};

struct Evaluation {
    double value = 0.0;
    std::vector<double> gradient;
};

/// Objective on a fixed minibatch. Must be deterministic for the duration of
/// one step: oLBFGS and HF call it more than once per step.
using GradientSource = std::function<Evaluation(std::span<const double>)>;

struct StepReport {
    double value = 0.0;         ///< objective at the iterate the step started from
    double step_norm = 0.0;     ///< ||v_new - v||
    double learning_rate = 0.0; ///< effective rate this step (0 for HF)
    int gradient_calls = 0;
};

/// Per-image gradient evaluations charged for one step with minibatch size B.
[[nodiscard]] std::size_t gradient_evaluations_per_step(const OptimizerConfig& cfg, std::size_t batch_size);

/// Minibatch size a method draws per step (HF uses its own).
[[nodiscard]] std::size_t step_batch_size(const OptimizerConfig& cfg, std::size_t batch_size);

/// Solves (A + damping I) x = b by `iterations` CG steps from x = 0.
/// Stops early on breakdown (p^T A p <= 0) or a zero residual. Residual norms
/// of every iterate, starting with ||b||, are appended to `residuals` when given.
[[nodiscard]] std::vector<double> conjugate_gradient(
    const std::function<std::vector<double>(std::span<const double>)>& apply, std::span<const double> b,
    int iterations, double damping, std::vector<double>* residuals = nullptr);

/// Stochastic optimizer over a flat parameter vector.
class Optimizer {
public:
    Optimizer(OptimizerConfig cfg, std::size_t dimension);

    /// Applies exactly one update to `v`. Throws NumericalError on a non-finite
    /// objective or gradient, leaving `v` and the state untouched.
    StepReport step(std::span<double> v, const GradientSource& source);

    [[nodiscard]] const OptimizerConfig& config() const noexcept { return cfg_; }
    [[nodiscard]] std::size_t iteration() const noexcept { return t_; }
    [[nodiscard]] std::size_t gradient_calls() const noexcept { return calls_; }

    [[nodiscard]] std::span<const double> velocity() const noexcept { return velocity_; }
    [[nodiscard]] std::span<const double> accumulator() const noexcept { return accum_; }
    [[nodiscard]] std::size_t curvature_pairs() const noexcept { return pairs_.size(); }
    [[nodiscard]] std::size_t covariance_rank() const noexcept { return factors_.size(); }

    /// oLBFGS two-loop product H g over the stored pairs (H0 = gamma I).
    [[nodiscard]] std::vector<double> lbfgs_direction(std::span<const double> g) const;
    /// TONGA natural direction (U diag(lambda) U^T + eps I)^-1 g.
    [[nodiscard]] std::vector<double> tonga_direction(std::span<const double> g) const;

    /// Adds a curvature pair to the oLBFGS memory; returns false when rejected by the guard.
    bool push_curvature_pair(std::vector<double> s, std::vector<double> y);

private:
    Evaluation evaluate(const GradientSource& source, std::span<const double> v);
    double momentum() const;
    void refresh_covariance();

    OptimizerConfig cfg_;
    std::size_t dim_;
    std::size_t t_ = 0;
    std::size_t calls_ = 0;

    std::vector<double> velocity_;
    std::vector<double> accum_;

    struct Pair {
        std::vector<double> s, y;
        double rho;
    };
    std::deque<Pair> pairs_;

    std::deque<std::vector<double>> recent_;
    std::vector<std::vector<double>> factors_; ///< orthonormal eigenvectors
    std::vector<double> eigenvalues_;
};

} // namespace cryostoch
