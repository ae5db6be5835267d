#include "cryostoch/error.hpp"
#include "cryostoch/synth.hpp"

#include <algorithm>
#include <cmath>

namespace cryostoch {
namespace {

double coverage(double signed_distance) { return std::clamp(0.5 - signed_distance, 0.0, 1.0); }

void add_sphere(VolumeGrid& v, const Sphere& s) {
    const int n = v.side();
    const int lo_x = std::max(0, static_cast<int>(std::floor(s.center.x() - s.radius - 1)));
    const int hi_x = std::min(n - 1, static_cast<int>(std::ceil(s.center.x() + s.radius + 1)));
    const int lo_y = std::max(0, static_cast<int>(std::floor(s.center.y() - s.radius - 1)));
    const int hi_y = std::min(n - 1, static_cast<int>(std::ceil(s.center.y() + s.radius + 1)));
    const int lo_z = std::max(0, static_cast<int>(std::floor(s.center.z() - s.radius - 1)));
    const int hi_z = std::min(n - 1, static_cast<int>(std::ceil(s.center.z() + s.radius + 1)));
    for (int z = lo_z; z <= hi_z; ++z) {
        for (int y = lo_y; y <= hi_y; ++y) {
            for (int x = lo_x; x <= hi_x; ++x) {
                const double d = (Vec3(x, y, z) - s.center).norm() - s.radius;
                const double c = coverage(d);
                if (c > 0.0) {
                    v.at(x, y, z) += s.density * c;
                }
            }
        }
    }
}

void add_cylinder(VolumeGrid& v, const Cylinder& cyl) {
    const int n = v.side();
    const Vec3 axis = cyl.end - cyl.start;
    const double length = axis.norm();
    if (length == 0.0) {
        return;
    }
    const Vec3 dir = axis / length;
    for (int z = 0; z < n; ++z) {
        for (int y = 0; y < n; ++y) {
            for (int x = 0; x < n; ++x) {
                const Vec3 p = Vec3(x, y, z) - cyl.start;
                const double t = p.dot(dir);
                const double radial = (p - t * dir).norm();
                const double c = coverage(radial - cyl.radius) * coverage(std::max(-t, t - length));
                if (c > 0.0) {
                    v.at(x, y, z) += cyl.density * c;
                }
            }
        }
    }
}

void check_primitive(double radius, double density, const Vec3& a, int n) {
    if (!(radius > 0.0) || !std::isfinite(density) || !a.allFinite()) {
        throw ConfigError("phantom primitives need a positive radius and finite parameters");
    }
    if ((a.array() < 0.0).any() || (a.array() > n).any()) {
        throw ConfigError("phantom primitive lies outside the grid");
    }
}

} // namespace

PhantomSpec default_phantom_spec(int side) {
    require_even_side(side, "default_phantom_spec");
    const double n = side;
    const Vec3 c(n / 2, n / 2, n / 2);
    PhantomSpec spec;
    spec.side = side;
    const Vec3 left = c + Vec3(-0.22 * n, 0.04 * n, 0.0);
    const Vec3 right = c + Vec3(0.2 * n, -0.03 * n, 0.05 * n);
    spec.spheres.push_back({left, 0.14 * n, 1.0});
    spec.spheres.push_back({right, 0.11 * n, 1.0});
    spec.spheres.push_back({c + Vec3(0.0, 0.12 * n, -0.08 * n), 0.06 * n, 0.8});
    spec.cylinders.push_back({left, right, 0.05 * n, 0.7});
    return spec;
}

VolumeGrid make_phantom(const PhantomSpec& spec) {
    VolumeGrid v(spec.side);
    for (const auto& s : spec.spheres) {
        check_primitive(s.radius, s.density, s.center, spec.side);
        add_sphere(v, s);
    }
    for (const auto& c : spec.cylinders) {
        check_primitive(c.radius, c.density, c.start, spec.side);
        check_primitive(c.radius, c.density, c.end, spec.side);
        add_cylinder(v, c);
    }
    return v;
}

VolumeGrid random_init(int side, int n_spheres, double min_radius, double max_radius, std::uint64_t seed) {
    require_even_side(side, "random_init");
    if (n_spheres < 0) {
        throw ConfigError("sphere count must be non-negative");
    }
    if (!(min_radius > 0.0) || !(max_radius >= min_radius)) {
        throw ConfigError("sphere radii need 0 < min_radius <= max_radius");
    }
    auto rng = stream_rng(seed, 0);
    std::uniform_real_distribution<double> pos(0.25 * side, 0.75 * side);
    std::uniform_real_distribution<double> rad(min_radius, max_radius);
    VolumeGrid v(side);
    for (int i = 0; i < n_spheres; ++i) {
        const double x = pos(rng);
        const double y = pos(rng);
        const double z = pos(rng);
        add_sphere(v, Sphere{Vec3(x, y, z), rad(rng), 1.0});
    }
    return v;
}

} // namespace cryostoch
