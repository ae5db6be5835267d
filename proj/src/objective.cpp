#include "cryostoch/error.hpp"
#include "cryostoch/model.hpp"

#include <algorithm>

namespace cryostoch {

ObjectiveValue minibatch_objective(const Projector& proj, std::span<const Observation* const> batch,
                                   const VolumeGrid& v, const PoseScheme& scheme, const NoiseModel& noise,
                                   const PriorParams& prior, std::size_t dataset_size) {
    if (batch.empty()) {
        throw ConfigError("minibatch must not be empty");
    }
    if (dataset_size < batch.size()) {
        throw ConfigError("dataset size is smaller than the minibatch");
    }
    const double scale = static_cast<double>(dataset_size) / static_cast<double>(batch.size());
    const auto fv = proj.transform(v);
    const BatchEvaluator evaluator(proj, scheme, noise);
    auto eval = evaluator.evaluate(batch, fv, -scale);

    double data_term = 0.0;
    for (double lm : eval.log_marginals) {
        data_term += lm;
    }
    ObjectiveValue out{-scale * data_term - log_prior(v, prior), proj.transform_adjoint(*eval.gradient)};
    const auto prior_grad = log_prior_grad(v, prior);
    auto g = out.gradient.data();
    const auto pg = prior_grad.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] -= pg[i];
    }
    return out;
}

double dataset_nll(const Projector& proj, std::span<const Observation* const> observations, const VolumeGrid& v,
                   const PoseScheme& scheme, const NoiseModel& noise) {
    if (observations.empty()) {
        throw DataError("dataset_nll needs at least one observation");
    }
    std::vector<const Observation*> sorted(observations.begin(), observations.end());
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) { return a->id < b->id; });
    const auto fv = proj.transform(v);
    const BatchEvaluator evaluator(proj, scheme, noise);
    const auto eval = evaluator.evaluate(sorted, fv);
    double total = 0.0;
    for (double lm : eval.log_marginals) {
        total += lm;
    }
    return -total / static_cast<double>(sorted.size());
}

} // namespace cryostoch
