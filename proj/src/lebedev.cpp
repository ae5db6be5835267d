#include "cryostoch/error.hpp"
#include "cryostoch/quadrature.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <array>
#include <cmath>

// Lebedev-Laikov rules in generator form. Each row names an octahedral orbit
// type and its parameters; the weight v applies to every point of the orbit
// and is normalized so that all weights of a rule sum to 1.
//   1: (1,0,0)          6 points
//   2: (0,a,a), a=1/√2  12 points
//   3: (a,a,a), a=1/√3  8 points
//   4: (a,a,b)          24 points
//   5: (a,b,0)          24 points
//   6: (a,b,c)          48 points

namespace cryostoch {
namespace {

struct OrbitParams {
    int type;
    double a;
    double b;
    double v;
};

constexpr OrbitParams kRule6[] = {
    {1, 0.0, 0.0, 0.1666666666666667E+0},
};
constexpr OrbitParams kRule14[] = {
    {1, 0.0, 0.0, 0.6666666666666667E-1},
    {3, 0.0, 0.0, 0.7500000000000000E-1},
};
constexpr OrbitParams kRule26[] = {
    {1, 0.0, 0.0, 0.4761904761904762E-1},
    {2, 0.0, 0.0, 0.3809523809523810E-1},
    {3, 0.0, 0.0, 0.3214285714285714E-1},
};
constexpr OrbitParams kRule38[] = {
    {1, 0.0, 0.0, 0.9523809523809524E-2},
    {3, 0.0, 0.0, 0.3214285714285714E-1},
    {5, 0.4597008433809831E+0, 0.0, 0.2857142857142857E-1},
};
constexpr OrbitParams kRule50[] = {
    {1, 0.0, 0.0, 0.1269841269841270E-1},
    {2, 0.0, 0.0, 0.2257495590828924E-1},
    {3, 0.0, 0.0, 0.2109375000000000E-1},
    {4, 0.3015113445777636E+0, 0.0, 0.2017333553791887E-1},
};
constexpr OrbitParams kRule74[] = {
    {1, 0.0, 0.0, 0.5130671797338464E-3},
    {2, 0.0, 0.0, 0.1660406956574204E-1},
    {3, 0.0, 0.0, -0.2958603896103896E-1},
    {4, 0.4803844614152614E+0, 0.0, 0.2657620708215946E-1},
    {5, 0.3207726489807764E+0, 0.0, 0.1652217099371571E-1},
};
constexpr OrbitParams kRule86[] = {
    {1, 0.0, 0.0, 0.1154401154401154E-1},
    {3, 0.0, 0.0, 0.1194390908585628E-1},
    {4, 0.3696028464541502E+0, 0.0, 0.1111055571060340E-1},
    {4, 0.6943540066026664E+0, 0.0, 0.1187650129453714E-1},
    {5, 0.3742430390903412E+0, 0.0, 0.1181230374690448E-1},
};
constexpr OrbitParams kRule110[] = {
    {1, 0.0, 0.0, 0.3828270494937162E-2},
    {3, 0.0, 0.0, 0.9793737512487512E-2},
    {4, 0.1851156353447362E+0, 0.0, 0.8211737283191111E-2},
    {4, 0.6904210483822922E+0, 0.0, 0.9942814891178103E-2},
    {4, 0.3956894730559419E+0, 0.0, 0.9595471336070963E-2},
    {5, 0.4783690288121502E+0, 0.0, 0.9694996361663028E-2},
};
constexpr OrbitParams kRule146[] = {
    {1, 0.0, 0.0, 0.5996313688621381E-3},
    {2, 0.0, 0.0, 0.7372999718620756E-2},
    {3, 0.0, 0.0, 0.7210515360144488E-2},
    {4, 0.6764410400114264E+0, 0.0, 0.7116355493117555E-2},
    {4, 0.4174961227965453E+0, 0.0, 0.6753829486314477E-2},
    {4, 0.1574676672039082E+0, 0.0, 0.7574394159054034E-2},
    {6, 0.1403553811713183E+0, 0.4493328323269557E+0, 0.6991087353303262E-2},
};
constexpr OrbitParams kRule194[] = {
    {1, 0.0, 0.0, 0.1782340447244611E-2},
    {2, 0.0, 0.0, 0.5716905949977102E-2},
    {3, 0.0, 0.0, 0.5573383178848738E-2},
    {4, 0.6712973442695226E+0, 0.0, 0.5608704082587997E-2},
    {4, 0.2892465627575439E+0, 0.0, 0.5158237711805383E-2},
    {4, 0.4446933178717437E+0, 0.0, 0.5518771467273614E-2},
    {4, 0.1299335447650067E+0, 0.0, 0.4106777028169394E-2},
    {5, 0.3457702197611283E+0, 0.0, 0.5051846064614808E-2},
    {6, 0.1590417105383530E+0, 0.8360360154824589E+0, 0.5530248916233094E-2},
};
constexpr OrbitParams kRule302[] = {
    {1, 0.0, 0.0, 0.8545911725128148E-3},
    {3, 0.0, 0.0, 0.3599119285025571E-2},
    {4, 0.3515640345570105E+0, 0.0, 0.3449788424305883E-2},
    {4, 0.6566329410219612E+0, 0.0, 0.3604822601419882E-2},
    {4, 0.4729054132581005E+0, 0.0, 0.3576729661743367E-2},
    {4, 0.9618308522614784E-1, 0.0, 0.2352101413689164E-2},
    {4, 0.2219645236294178E+0, 0.0, 0.3108953122413675E-2},
    {4, 0.7011766416089545E+0, 0.0, 0.3650045807677255E-2},
    {5, 0.2644152887060663E+0, 0.0, 0.2982344963171804E-2},
    {5, 0.5718955891878961E+0, 0.0, 0.3600820932216460E-2},
    {6, 0.2510034751770465E+0, 0.8000727494073952E+0, 0.3571540554273387E-2},
    {6, 0.1233548532583327E+0, 0.4127724083168531E+0, 0.3392312205006170E-2},
};
constexpr OrbitParams kRule590[] = {
    {1, 0.0, 0.0, 0.3095121295306187E-3},
    {3, 0.0, 0.0, 0.1852379698597489E-2},
    {4, 0.7040954938227469E+0, 0.0, 0.1871790639277744E-2},
    {4, 0.6807744066455243E+0, 0.0, 0.1858812585438317E-2},
    {4, 0.6372546939258752E+0, 0.0, 0.1852028828296213E-2},
    {4, 0.5044419707800358E+0, 0.0, 0.1846715956151242E-2},
    {4, 0.4215761784010967E+0, 0.0, 0.1818471778162769E-2},
    {4, 0.3317920736472123E+0, 0.0, 0.1749564657281154E-2},
    {4, 0.2384736701421887E+0, 0.0, 0.1617210647254411E-2},
    {4, 0.1459036449157763E+0, 0.0, 0.1384737234851692E-2},
    {4, 0.6095034115507196E-1, 0.0, 0.9764331165051050E-3},
    {5, 0.6116843442009876E+0, 0.0, 0.1857161196774078E-2},
    {5, 0.3964755348199858E+0, 0.0, 0.1705153996395864E-2},
    {5, 0.1724782009907724E+0, 0.0, 0.1300321685886048E-2},
    {6, 0.5610263808622060E+0, 0.3518280927733519E+0, 0.1842866472905286E-2},
    {6, 0.4742392842551980E+0, 0.2634716655937950E+0, 0.1802658934377451E-2},
    {6, 0.5984126497885380E+0, 0.1816640840360209E+0, 0.1849830560443660E-2},
    {6, 0.3791035407695563E+0, 0.1720795225656878E+0, 0.1713904507106709E-2},
    {6, 0.2778673190586244E+0, 0.8213021581932511E-1, 0.1555213603396808E-2},
    {6, 0.5033564271075117E+0, 0.8999205842074875E-1, 0.1802239128008525E-2},
};

struct Rule {
    int order;
    int degree;
    std::span<const OrbitParams> orbits;
};

constexpr std::array<int, 12> kOrders{6, 14, 26, 38, 50, 74, 86, 110, 146, 194, 302, 590};

const std::array<Rule, 12>& rules() {
    static const std::array<Rule, 12> r{{
        {6, 3, kRule6},
        {14, 5, kRule14},
        {26, 7, kRule26},
        {38, 9, kRule38},
        {50, 11, kRule50},
        {74, 13, kRule74},
        {86, 15, kRule86},
        {110, 17, kRule110},
        {146, 19, kRule146},
        {194, 23, kRule194},
        {302, 29, kRule302},
        {590, 41, kRule590},
    }};
    return r;
}

const Rule& find_rule(int order) {
    for (const auto& r : rules()) {
        if (r.order == order) {
            return r;
        }
    }
    throw ConfigError(fmt::format("unsupported Lebedev order {}; supported orders are {}", order,
                                  fmt::join(kOrders, ", ")));
}

// All sign combinations of (x, y, z), skipping sign flips of zero coordinates.
void push_signed(std::vector<SphereNode>& out, double x, double y, double z, double w) {
    for (int sx : {1, -1}) {
        if (x == 0.0 && sx < 0) continue;
        for (int sy : {1, -1}) {
            if (y == 0.0 && sy < 0) continue;
            for (int sz : {1, -1}) {
                if (z == 0.0 && sz < 0) continue;
                out.push_back({Vec3(sx * x, sy * y, sz * z), w});
            }
        }
    }
}

// Signed copies of every distinct permutation of (p, q, r).
void push_orbit(std::vector<SphereNode>& out, double p, double q, double r, double w) {
    std::array<double, 3> c{p, q, r};
    std::sort(c.begin(), c.end());
    do {
        push_signed(out, c[0], c[1], c[2], w);
    } while (std::next_permutation(c.begin(), c.end()));
}

} // namespace

std::span<const int> lebedev_supported_orders() { return kOrders; }

int lebedev_degree(int order) { return find_rule(order).degree; }

std::vector<SphereNode> lebedev_points(int order) {
    const Rule& rule = find_rule(order);
    std::vector<SphereNode> nodes;
    nodes.reserve(static_cast<std::size_t>(order));
    for (const auto& o : rule.orbits) {
        switch (o.type) {
        case 1:
            push_orbit(nodes, 1.0, 0.0, 0.0, o.v);
            break;
        case 2: {
            const double a = std::sqrt(0.5);
            push_orbit(nodes, 0.0, a, a, o.v);
            break;
        }
        case 3: {
            const double a = std::sqrt(1.0 / 3.0);
            push_orbit(nodes, a, a, a, o.v);
            break;
        }
        case 4:
            push_orbit(nodes, o.a, o.a, std::sqrt(1.0 - 2.0 * o.a * o.a), o.v);
            break;
        case 5:
            push_orbit(nodes, o.a, std::sqrt(1.0 - o.a * o.a), 0.0, o.v);
            break;
        case 6:
            push_orbit(nodes, o.a, o.b, std::sqrt(1.0 - o.a * o.a - o.b * o.b), o.v);
            break;
        default:
            throw Error("corrupt Lebedev table");
        }
    }
    if (nodes.size() != static_cast<std::size_t>(order)) {
        throw Error(fmt::format("Lebedev rule {} expanded to {} points", order, nodes.size()));
    }
    return nodes;
}

} // namespace cryostoch
