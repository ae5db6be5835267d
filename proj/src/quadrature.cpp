#include "cryostoch/quadrature.hpp"

#include "cryostoch/error.hpp"

#include <fmt/format.h>

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>

namespace cryostoch {
namespace {

bool has_positive_weights(int order) {
    const auto nodes = lebedev_points(order);
    return std::all_of(nodes.begin(), nodes.end(), [](const SphereNode& n) { return n.weight > 0.0; });
}

} // namespace

OrientationResolution orientation_resolution(double cutoff_fraction, int side) {
    if (!(cutoff_fraction > 0.0 && cutoff_fraction <= 1.0)) {
        throw ConfigError(fmt::format("frequency cutoff must lie in (0, 1], got {}", cutoff_fraction));
    }
    require_even_side(side, "orientation_resolution");
    const double r_max = cutoff_fraction * side / 2.0;
    const double delta = kAngularSpacingScale / r_max;
    for (int order : lebedev_supported_orders()) {
        if (!has_positive_weights(order)) {
            continue;
        }
        // Mean node spacing of an n-point rule: sqrt(4 pi / n).
        if (std::sqrt(4.0 * kPi / order) <= delta) {
            const int inplane = static_cast<int>(std::ceil(2.0 * kPi / delta));
            return {order, inplane, delta};
        }
    }
    throw ConfigError(fmt::format(
        "frequency cutoff {} at side {} needs angular spacing {:.4f} rad, finer than the largest Lebedev rule; "
        "lower the cutoff",
        cutoff_fraction, side, delta));
}

Mat3 rotation_from_direction(const Vec3& direction, double psi) {
    const Vec3 d = direction.normalized();
    const double theta = std::acos(std::clamp(d.z(), -1.0, 1.0));
    const double phi = std::atan2(d.y(), d.x());
    // frame maps the z axis onto d; the pose rotation is its inverse.
    const Mat3 frame = (Eigen::AngleAxisd(phi, Vec3::UnitZ()) * Eigen::AngleAxisd(theta, Vec3::UnitY()) *
                        Eigen::AngleAxisd(psi, Vec3::UnitZ()))
                           .toRotationMatrix();
    return frame.transpose();
}

std::vector<WeightedRotation> build_orientation_set(int lebedev_order, int inplane_count) {
    if (inplane_count < 1) {
        throw ConfigError("in-plane angle count must be positive");
    }
    const auto nodes = lebedev_points(lebedev_order);
    if (!has_positive_weights(lebedev_order)) {
        throw ConfigError(fmt::format("Lebedev rule {} has negative weights and cannot serve as an orientation prior",
                                      lebedev_order));
    }
    std::vector<WeightedRotation> out;
    out.reserve(nodes.size() * static_cast<std::size_t>(inplane_count));
    for (const auto& node : nodes) {
        for (int p = 0; p < inplane_count; ++p) {
            const double psi = 2.0 * kPi * p / inplane_count;
            out.push_back({rotation_from_direction(node.direction, psi), node.weight / inplane_count});
        }
    }
    return out;
}

std::vector<WeightedRotation> build_orientation_set(double cutoff_fraction, int side) {
    const auto res = orientation_resolution(cutoff_fraction, side);
    return build_orientation_set(res.lebedev_order, res.inplane_count);
}

std::vector<WeightedShift> build_shift_set(const ShiftPrior& prior) {
    if (prior.zero_only) {
        return {{Shift2{0.0, 0.0}, 1.0}};
    }
    if (!(prior.truncation_radius > 0.0) || !(prior.grid_spacing > 0.0) || !(prior.std_dev > 0.0)) {
        throw ConfigError("shift prior needs positive std_dev, truncation_radius and grid_spacing");
    }
    if (prior.grid_spacing > 2.0 * prior.truncation_radius) {
        throw ConfigError(fmt::format("shift grid spacing {} exceeds twice the truncation radius {}; grid is empty",
                                      prior.grid_spacing, prior.truncation_radius));
    }
    const int reach = static_cast<int>(std::floor(prior.truncation_radius / prior.grid_spacing));
    const double r2 = prior.truncation_radius * prior.truncation_radius;
    std::vector<WeightedShift> out;
    double total = 0.0;
    for (int iy = -reach; iy <= reach; ++iy) {
        for (int ix = -reach; ix <= reach; ++ix) {
            const double tx = ix * prior.grid_spacing;
            const double ty = iy * prior.grid_spacing;
            const double d2 = tx * tx + ty * ty;
            if (d2 > r2 * (1.0 + 1e-12)) {
                continue;
            }
            const double w = std::exp(-d2 / (2.0 * prior.std_dev * prior.std_dev));
            out.push_back({Shift2{tx, ty}, w});
            total += w;
        }
    }
    for (auto& s : out) {
        s.weight /= total;
    }
    return out;
}

PoseScheme::PoseScheme(std::vector<WeightedRotation> orientations, std::vector<WeightedShift> shifts,
                       int lebedev_order, int inplane_count)
    : orientations_(std::move(orientations)), shifts_(std::move(shifts)), lebedev_order_(lebedev_order),
      inplane_count_(inplane_count) {
    if (orientations_.empty() || shifts_.empty()) {
        throw ConfigError("pose scheme must contain at least one orientation and one shift");
    }
    for (const auto& o : orientations_) {
        if (!(o.weight > 0.0)) {
            throw ConfigError("pose scheme orientation weights must be positive");
        }
        require_rotation(o.rotation);
    }
    for (const auto& s : shifts_) {
        if (!(s.weight > 0.0)) {
            throw ConfigError("pose scheme shift weights must be positive");
        }
    }
}

Pose PoseScheme::pose(std::size_t j) const {
    const auto o = j / shifts_.size();
    const auto s = j % shifts_.size();
    return Pose{orientations_[o].rotation, shifts_[s].shift};
}

double PoseScheme::weight(std::size_t j) const {
    return orientations_[j / shifts_.size()].weight * shifts_[j % shifts_.size()].weight;
}

std::vector<Pose> PoseScheme::poses() const {
    std::vector<Pose> out;
    out.reserve(size());
    for (std::size_t j = 0; j < size(); ++j) {
        out.push_back(pose(j));
    }
    return out;
}

std::vector<double> PoseScheme::weights() const {
    std::vector<double> out;
    out.reserve(size());
    for (std::size_t j = 0; j < size(); ++j) {
        out.push_back(weight(j));
    }
    return out;
}

PoseScheme build_pose_scheme(double cutoff_fraction, int side, const ShiftPrior& shift_prior) {
    const auto res = orientation_resolution(cutoff_fraction, side);
    return PoseScheme(build_orientation_set(res.lebedev_order, res.inplane_count), build_shift_set(shift_prior),
                      res.lebedev_order, res.inplane_count);
}

PoseScheme build_pose_scheme(int lebedev_order, int inplane_count, const ShiftPrior& shift_prior) {
    return PoseScheme(build_orientation_set(lebedev_order, inplane_count), build_shift_set(shift_prior),
                      lebedev_order, inplane_count);
}

} // namespace cryostoch
