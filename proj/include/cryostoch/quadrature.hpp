#pragma once

#include "cryostoch/grid.hpp"

#include <span>
#include <vector>

namespace cryostoch {

struct SphereNode {
    Vec3 direction;
    double weight; ///< normalized: weights sum to 1
};

/// Point counts of the embedded Lebedev rules.
[[nodiscard]] std::span<const int> lebedev_supported_orders();
/// Highest spherical-harmonic degree integrated exactly by the rule.
[[nodiscard]] int lebedev_degree(int order);
/// Nodes and normalized weights of the Lebedev rule with `order` points.
[[nodiscard]] std::vector<SphereNode> lebedev_points(int order);

struct WeightedRotation {
    Mat3 rotation;
    double weight;
};

struct WeightedShift {
    Shift2 shift;
    double weight;
};

/// Truncated-normal prior over in-plane shifts, discretized on a square grid.
struct ShiftPrior {
    double std_dev = 2.0;
    double truncation_radius = 2.0;
    double grid_spacing = 1.0;
    bool zero_only = false; ///< the single shift t = (0, 0)

    /// The zero-shift scheme used for simulated data without translations.
    static ShiftPrior none() { return ShiftPrior{1.0, 0.0, 1.0, true}; }
};

/// Scale c of the angular resolution rule delta = c / r_max (radians), with
/// r_max = cutoff_fraction * N / 2 in pixels. Calibrated so that a 128 pixel
/// grid at 16% of Nyquist with a 13-point shift grid gives ~1e5 poses.
inline constexpr double kAngularSpacingScale = 2.5;

struct OrientationResolution {
    int lebedev_order;
    int inplane_count;
    double angular_spacing;
};

/// Resolution selected by the rule for a frequency cutoff and grid side. Rules
/// with a negative weight (74 points) are skipped.
[[nodiscard]] OrientationResolution orientation_resolution(double cutoff_fraction, int side);

/// Lebedev directions times uniform in-plane angles; weights sum to 1.
[[nodiscard]] std::vector<WeightedRotation> build_orientation_set(double cutoff_fraction, int side);
[[nodiscard]] std::vector<WeightedRotation> build_orientation_set(int lebedev_order, int inplane_count);

/// Shift grid inside the truncation disc; weights follow the Gaussian and sum to 1.
[[nodiscard]] std::vector<WeightedShift> build_shift_set(const ShiftPrior& prior);

/// Pose rotation whose beam axis (third row) is `direction`, spun in-plane by psi.
[[nodiscard]] Mat3 rotation_from_direction(const Vec3& direction, double psi);

/// Weighted quadrature over orientations x shifts. Pose j = o * shift_count + s.
class PoseScheme {
public:
    PoseScheme(std::vector<WeightedRotation> orientations, std::vector<WeightedShift> shifts, int lebedev_order = 0,
               int inplane_count = 0);

    [[nodiscard]] std::size_t size() const noexcept { return orientations_.size() * shifts_.size(); }
    [[nodiscard]] std::size_t orientation_count() const noexcept { return orientations_.size(); }
    [[nodiscard]] std::size_t shift_count() const noexcept { return shifts_.size(); }
    [[nodiscard]] std::span<const WeightedRotation> orientations() const noexcept { return orientations_; }
    [[nodiscard]] std::span<const WeightedShift> shifts() const noexcept { return shifts_; }

    [[nodiscard]] Pose pose(std::size_t j) const;
    [[nodiscard]] double weight(std::size_t j) const;
    [[nodiscard]] std::vector<Pose> poses() const;
    [[nodiscard]] std::vector<double> weights() const;

    [[nodiscard]] int lebedev_order() const noexcept { return lebedev_order_; }
    [[nodiscard]] int inplane_count() const noexcept { return inplane_count_; }

private:
    std::vector<WeightedRotation> orientations_;
    std::vector<WeightedShift> shifts_;
    int lebedev_order_;
    int inplane_count_;
};

[[nodiscard]] PoseScheme build_pose_scheme(double cutoff_fraction, int side, const ShiftPrior& shift_prior);
[[nodiscard]] PoseScheme build_pose_scheme(int lebedev_order, int inplane_count, const ShiftPrior& shift_prior);

} // namespace cryostoch
