#include "support.hpp"

#include "cryostoch/error.hpp"
#include "cryostoch/quadrature.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <map>

using namespace cryostoch;

namespace {

double double_factorial(int n) {
    double r = 1.0;
    for (int k = n; k > 1; k -= 2) {
        r *= k;
    }
    return r;
}

// Average of x^a y^b z^c over the unit sphere.
double monomial_average(int a, int b, int c) {
    if (a % 2 || b % 2 || c % 2) {
        return 0.0;
    }
    return double_factorial(a - 1) * double_factorial(b - 1) * double_factorial(c - 1) /
           double_factorial(a + b + c + 1);
}

// FNV-1a over node coordinates and weights rounded to 1e-12.
std::uint64_t table_checksum(const std::vector<SphereNode>& nodes) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&](double x) {
        const auto q = static_cast<std::int64_t>(std::llround(x * 1e12));
        for (int b = 0; b < 8; ++b) {
            h ^= static_cast<std::uint64_t>(q >> (8 * b)) & 0xff;
            h *= 1099511628211ULL;
        }
    };
    for (const auto& n : nodes) {
        mix(n.direction.x());
        mix(n.direction.y());
        mix(n.direction.z());
        mix(n.weight);
    }
    return h;
}

} // namespace

TEST_CASE("Lebedev weights are normalized and nodes are unit vectors") {
    for (int order : lebedev_supported_orders()) {
        const auto nodes = lebedev_points(order);
        REQUIRE(nodes.size() == static_cast<std::size_t>(order));
        double total = 0.0;
        for (const auto& n : nodes) {
            CHECK(std::abs(n.direction.norm() - 1.0) < 1e-14);
            total += n.weight;
        }
        CHECK(std::abs(total - 1.0) < 1e-14);
    }
}

TEST_CASE("Lebedev rules integrate z^2 and odd functions") {
    for (int order : lebedev_supported_orders()) {
        double z2 = 0.0, z = 0.0, xyz = 0.0;
        for (const auto& n : lebedev_points(order)) {
            z2 += n.weight * n.direction.z() * n.direction.z();
            z += n.weight * n.direction.z();
            xyz += n.weight * n.direction.x() * n.direction.y() * n.direction.z();
        }
        CHECK(std::abs(z2 - 1.0 / 3.0) < 1e-12);
        CHECK(std::abs(z) < 1e-14);
        CHECK(std::abs(xyz) < 1e-14);
    }
}

TEST_CASE("Lebedev rules are exact for monomials up to their degree") {
    for (int order : lebedev_supported_orders()) {
        const int p = lebedev_degree(order);
        const auto nodes = lebedev_points(order);
        double worst = 0.0;
        for (int a = 0; a <= p; ++a) {
            for (int b = 0; a + b <= p; ++b) {
                for (int c = 0; a + b + c <= p; ++c) {
                    double q = 0.0;
                    for (const auto& n : nodes) {
                        q += n.weight * std::pow(n.direction.x(), a) * std::pow(n.direction.y(), b) *
                             std::pow(n.direction.z(), c);
                    }
                    worst = std::max(worst, std::abs(q - monomial_average(a, b, c)));
                }
            }
        }
        INFO("order " << order << " degree " << p);
        CHECK(worst < 1e-10);
    }
}

TEST_CASE("embedded Lebedev tables match their checksums") {
    const std::map<int, std::uint64_t> expected{
        {6, 14582389816076339533ULL},   {14, 2888935309433191725ULL},  {26, 9944266609888323057ULL},
        {38, 10659879610843079733ULL}, {50, 5369303298421411525ULL},  {74, 10742641822649187393ULL},
        {86, 16590677630463408837ULL}, {110, 10762372442463908049ULL}, {146, 18154512459071470925ULL},
        {194, 11769968564236327873ULL}, {302, 7865445803504255781ULL},
        {590, 9478074789761470405ULL},
    };
    for (int order : lebedev_supported_orders()) {
        const auto sum = table_checksum(lebedev_points(order));
        CHECK(sum == expected.at(order));
    }
}

TEST_CASE("orientation sets only use rules with positive weights") {
    bool negative = false;
    for (const auto& n : lebedev_points(74)) {
        negative = negative || n.weight < 0.0;
    }
    CHECK(negative);
    CHECK_THROWS_AS((void)build_orientation_set(74, 4), ConfigError);
    for (int side : {16, 32, 64, 128}) {
        for (double cutoff = 0.05; cutoff <= 0.5; cutoff += 0.01) {
            int order = 0;
            try {
                order = orientation_resolution(cutoff, side).lebedev_order;
            } catch (const ConfigError&) {
                continue;
            }
            CHECK(order != 74);
        }
    }
}

TEST_CASE("unsupported Lebedev order lists the supported ones") {
    try {
        (void)lebedev_points(7);
        FAIL("expected an error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("590") != std::string::npos);
    }
}

TEST_CASE("orientation sets are rotations with unit total weight") {
    const auto set = build_orientation_set(0.25, 32);
    double total = 0.0;
    for (const auto& o : set) {
        CHECK(is_rotation(o.rotation, 1e-12));
        total += o.weight;
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
    // Desk configuration: 38 directions times 11 in-plane angles.
    CHECK(set.size() == 38 * 11);
}

TEST_CASE("pose rotations put the Lebedev direction on the beam axis") {
    const Vec3 d = Vec3(0.3, -0.5, 0.8).normalized();
    for (double psi : {0.0, 1.0, 4.0}) {
        const Mat3 r = rotation_from_direction(d, psi);
        CHECK((r.row(2).transpose() - d).norm() < 1e-14);
    }
}

TEST_CASE("resolution rule is monotone in the cutoff") {
    int last_order = 0, last_inplane = 0;
    for (double cutoff : {0.05, 0.1, 0.16, 0.25, 0.4}) {
        const auto r = orientation_resolution(cutoff, 64);
        CHECK(r.lebedev_order >= last_order);
        CHECK(r.inplane_count >= last_inplane);
        last_order = r.lebedev_order;
        last_inplane = r.inplane_count;
    }
    CHECK_THROWS_AS((void)orientation_resolution(1.0, 256), ConfigError);
    CHECK_THROWS_AS((void)orientation_resolution(0.0, 32), ConfigError);
}

TEST_CASE("shift set weights") {
    const auto single = build_shift_set(ShiftPrior::none());
    REQUIRE(single.size() == 1);
    CHECK(single[0].weight == 1.0);
    CHECK(single[0].shift.x == 0.0);

    const auto shifts = build_shift_set(ShiftPrior{2.0, 2.0, 1.0, false});
    CHECK(shifts.size() == 13);
    double total = 0.0;
    for (const auto& s : shifts) {
        total += s.weight;
        const auto mirror = std::find_if(shifts.begin(), shifts.end(), [&](const auto& o) {
            return o.shift.x == -s.shift.x && o.shift.y == -s.shift.y;
        });
        REQUIRE(mirror != shifts.end());
        CHECK(std::abs(mirror->weight - s.weight) < 1e-14);
    }
    CHECK(std::abs(total - 1.0) < 1e-12);

    const auto flat = build_shift_set(ShiftPrior{1e6, 3.0, 1.0, false});
    for (const auto& s : flat) {
        CHECK(std::abs(s.weight * flat.size() - 1.0) < 1e-9);
    }
    CHECK_THROWS_AS((void)build_shift_set(ShiftPrior{1.0, 1.0, 3.0, false}), ConfigError);
}

TEST_CASE("pose scheme is the weighted product of orientations and shifts") {
    const auto scheme = build_pose_scheme(0.25, 32, ShiftPrior{2.0, 2.0, 1.0, false});
    CHECK(scheme.size() == scheme.orientation_count() * scheme.shift_count());
    double total = 0.0;
    for (double w : scheme.weights()) {
        CHECK(w > 0.0);
        total += w;
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
    const auto j = 5 * scheme.shift_count() + 3;
    CHECK(scheme.weight(j) == scheme.orientations()[5].weight * scheme.shifts()[3].weight);

    const auto zero = build_pose_scheme(0.25, 32, ShiftPrior::none());
    for (const auto& p : zero.poses()) {
        CHECK(p.shift.x == 0.0);
        CHECK(p.shift.y == 0.0);
    }
    const auto again = build_pose_scheme(0.25, 32, ShiftPrior::none());
    for (std::size_t i = 0; i < zero.size(); ++i) {
        REQUIRE(zero.pose(i).rotation == again.pose(i).rotation);
    }
}

TEST_CASE("resolution rule calibration against the reference scheme size") {
    const auto scheme = build_pose_scheme(0.16, 128, ShiftPrior{2.0, 2.0, 1.0, false});
    MESSAGE("M = " << scheme.size() << " (" << scheme.lebedev_order() << " x " << scheme.inplane_count() << " x "
                   << scheme.shift_count() << ")");
    CHECK(scheme.size() >= 95000 / 2);
    CHECK(scheme.size() <= 95000 * 2);
}
