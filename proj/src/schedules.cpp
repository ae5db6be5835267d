#include "cryostoch/error.hpp"
#include "cryostoch/optim.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>

namespace cryostoch {
namespace {

constexpr std::array<Method, 7> kMethods{Method::sgd, Method::cm,     Method::nag, Method::adagrad,
                                         Method::tonga, Method::olbfgs, Method::hf};

} // namespace

std::string_view method_name(Method m) {
    switch (m) {
    case Method::sgd: return "sgd";
    case Method::cm: return "cm";
    case Method::nag: return "nag";
    case Method::adagrad: return "adagrad";
    case Method::tonga: return "tonga";
    case Method::olbfgs: return "olbfgs";
    case Method::hf: return "hf";
    }
    return "unknown";
}

Method parse_method(std::string_view name) {
    for (Method m : kMethods) {
        if (method_name(m) == name) {
            return m;
        }
    }
    throw ConfigError(fmt::format("unknown optimizer '{}' (expected sgd, cm, nag, adagrad, tonga, olbfgs or hf)", name));
}

std::span<const Method> all_methods() { return kMethods; }

void ScheduleParams::validate() const {
    if (!(eta0 > 0.0) || !std::isfinite(eta0)) {
        throw ConfigError(fmt::format("learning rate eta0 must be positive, got {}", eta0));
    }
    if (!(lambda_anneal >= 0.0) || !std::isfinite(lambda_anneal)) {
        throw ConfigError(fmt::format("annealing constant must be non-negative, got {}", lambda_anneal));
    }
}

double lr_schedule(std::size_t t, const ScheduleParams& p) {
    return p.eta0 * std::pow(1.0 + p.lambda_anneal * static_cast<double>(t), -0.75);
}

double momentum_schedule(std::size_t t) {
    const double k = static_cast<double>(t / 100 + 1);
    return std::min(0.9, 1.0 - std::exp2(-1.0 - std::log2(k)));
}

void OptimizerConfig::validate() const {
    schedule.validate();
    if (fixed_momentum && !(*fixed_momentum >= 0.0 && *fixed_momentum < 1.0)) {
        throw ConfigError("momentum must lie in [0, 1)");
    }
    if (!(adagrad_epsilon > 0.0)) {
        throw ConfigError("adagrad epsilon must be positive");
    }
    if (tonga_rank < 0 || tonga_period < 1 || !(tonga_epsilon > 0.0)) {
        throw ConfigError("tonga needs rank >= 0, period >= 1 and epsilon > 0");
    }
    if (lbfgs_memory < 1 || !(lbfgs_regularizer >= 0.0) || !(lbfgs_initial_gamma > 0.0)) {
        throw ConfigError("olbfgs needs memory >= 1, a non-negative regularizer and a positive initial scale");
    }
    if (cg_iterations < 1 || !(hf_damping >= 0.0) || hf_batch_size < 1) {
        throw ConfigError("hf needs cg_iterations >= 1, damping >= 0 and a positive batch size");
    }
}

std::size_t step_batch_size(const OptimizerConfig& cfg, std::size_t batch_size) {
    return cfg.method == Method::hf ? cfg.hf_batch_size : batch_size;
}

std::size_t gradient_evaluations_per_step(const OptimizerConfig& cfg, std::size_t batch_size) {
    switch (cfg.method) {
    case Method::olbfgs: return 2 * batch_size;
    case Method::hf: return cfg.hf_batch_size * static_cast<std::size_t>(1 + cfg.cg_iterations);
    default: return batch_size;
    }
}

} // namespace cryostoch
