#include "cryostoch/model.hpp"

#include <cmath>

namespace cryostoch {

double log_prior(const VolumeGrid& v, const PriorParams& p) {
    double acc = 0.0;
    for (double x : v.data()) {
        acc += x >= 0.0 ? -p.lambda_plus * x : -p.lambda_minus * std::abs(x) * x * x;
    }
    return acc;
}

// At v = 0 the right derivative -lambda_plus is used.
VolumeGrid log_prior_grad(const VolumeGrid& v, const PriorParams& p) {
    VolumeGrid g(v.side(), v.voxel_size());
    auto out = g.data();
    const auto in = v.data();
    for (std::size_t i = 0; i < in.size(); ++i) {
        out[i] = in[i] >= 0.0 ? -p.lambda_plus : 3.0 * p.lambda_minus * in[i] * in[i];
    }
    return g;
}

} // namespace cryostoch
