#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "rmlab/periodic.hpp"

#include <cmath>

using namespace rmlab;

namespace {

RationalMap z2() { return RationalMap::polynomial({0.0, 0.0, 1.0}, "z2"); }
RationalMap z2c(cplx c, const char* n) { return RationalMap::polynomial({c, 0.0, 1.0}, n); }

const PeriodicOrbit* find_orbit(const std::vector<PeriodicOrbit>& v, const SpherePoint& p,
                                double tol = 1e-7) {
    for (const auto& o : v)
        for (const auto& q : o.points)
            if (chordal_distance(p, q) < tol) return &o;
    return nullptr;
}

}  // namespace

TEST_CASE("fixed points of z^2: 0, 1, infinity") {
    const auto orbits = periodic_points(z2(), 1);
    REQUIRE(orbits.size() == 3);
    const auto* at0 = find_orbit(orbits, SpherePoint(0.0, 0.0));
    const auto* at1 = find_orbit(orbits, SpherePoint(1.0, 0.0));
    const auto* atinf = find_orbit(orbits, SpherePoint::infinity());
    REQUIRE(at0);
    REQUIRE(at1);
    REQUIRE(atinf);
    CHECK(at0->classification == OrbitKind::attracting);
    CHECK(atinf->classification == OrbitKind::attracting);
    CHECK(at1->classification == OrbitKind::repelling);
    CHECK(std::abs(at1->multiplier - cplx(2.0)) < 1e-10);
}

TEST_CASE("exact-period filtering: period 2 of z^2 is the cube-root pair") {
    const auto orbits = periodic_points(z2(), 2);
    REQUIRE(orbits.size() == 1);
    CHECK(orbits[0].points.size() == 2);
    const cplx w(-0.5, std::sqrt(3.0) / 2.0);
    CHECK(find_orbit(orbits, SpherePoint(w)));
    // multiplier of the doubling 2-cycle: 4 * w * w^2 = 4
    CHECK(std::abs(std::abs(orbits[0].multiplier) - 4.0) < 1e-9);
    CHECK(orbits[0].chi == doctest::Approx(std::log(2.0)).epsilon(1e-10));
}

TEST_CASE("parabolic quadratic: neutral fixed point and period-2 multiplier 5") {
    const auto f = z2c(0.25, "z2+1_4");
    const auto fixed = periodic_points(f, 1);
    const auto* par = find_orbit(fixed, SpherePoint(0.5, 0.0), 1e-6);
    REQUIRE(par);
    CHECK(par->classification == OrbitKind::neutral);
    CHECK(std::abs(par->multiplier - cplx(1.0)) < 1e-8);
    CHECK(par->root_multiplicity == 2);

    // period-2 orbit (-1 +- 2i)/2, multiplier 4 z1 z2 = 5 (hand computation)
    const auto two = periodic_points(f, 2);
    REQUIRE(two.size() == 1);
    CHECK(find_orbit(two, SpherePoint(-0.5, 1.0)));
    CHECK(find_orbit(two, SpherePoint(-0.5, -1.0)));
    CHECK(std::abs(two[0].multiplier - cplx(5.0)) < 1e-8);
    CHECK(two[0].chi == doctest::Approx(0.5 * std::log(5.0)).epsilon(1e-9));
}

TEST_CASE("count invariant: deg^n + 1 periodic points on the sphere (with multiplicity)") {
    for (int n = 1; n <= 4; ++n) {
        long count = 0;
        // points of exact period d for every divisor d of n
        for (int d = 1; d <= n; ++d) {
            if (n % d != 0) continue;
            for (const auto& o : periodic_points(z2(), d))
                count += long(o.points.size()) * o.root_multiplicity;
        }
        CHECK(count == (1l << n) + 1);
    }
}

TEST_CASE("z^2 multiplier spectrum is exactly 2^n") {
    for (int n = 1; n <= 10; ++n) {
        const auto orbits = periodic_points(z2(), n);
        for (const auto& o : orbits) {
            if (o.classification != OrbitKind::repelling) continue;
            CHECK(std::abs(std::abs(o.multiplier) - std::pow(2.0, n)) <
                  1e-6 * std::pow(2.0, n));
            // chi agrees with the per-point spherical-derivative chain rule
            double s = 0.0;
            for (const auto& p : o.points) s += std::log(z2().spherical_derivative(p));
            CHECK(o.chi == doctest::Approx(s / double(n)).epsilon(1e-8));
        }
    }
}

TEST_CASE("chi_per: doubling-conjugate maps give ln 2") {
    const auto a = chi_per(z2(), 8);
    CHECK(a.chi_per_hat == doctest::Approx(std::log(2.0)).epsilon(1e-9));
    for (const auto& [n, v] : a.per_period_min)
        CHECK(v == doctest::Approx(std::log(2.0)).epsilon(1e-9));

    const auto b = chi_per(z2c(-2.0, "z2-2"), 8);
    CHECK(b.chi_per_hat == doctest::Approx(std::log(2.0)).epsilon(1e-6));
    // the fixed point 2 is strictly more expanding: chi = ln 4
    const auto fixed = periodic_points(z2c(-2.0, "z2-2"), 1);
    const auto* at2 = find_orbit(fixed, SpherePoint(2.0, 0.0));
    REQUIRE(at2);
    CHECK(at2->chi == doctest::Approx(std::log(4.0)).epsilon(1e-9));
}

TEST_CASE("parabolic map: per-period minima sink below the period-2 value") {
    const auto est = chi_per(z2c(0.25, "z2+1_4"), 12);
    CHECK(est.neutral_found);
    REQUIRE(est.per_period_min.count(2));
    const double two = est.per_period_min.at(2);
    CHECK(two == doctest::Approx(0.5 * std::log(5.0)).epsilon(1e-6));
    CHECK(est.chi_per_hat < two - 1e-3);
    CHECK(est.chi_per_hat < 0.6);
}

TEST_CASE("uniform hyperbolicity on periodic orbits") {
    CHECK(uhp_check(z2(), 8, 1.9).holds);
    const auto fail = uhp_check(z2(), 8, 2.1);
    CHECK_FALSE(fail.holds);
    REQUIRE(fail.have_worst);
    CHECK(fail.worst.chi == doctest::Approx(std::log(2.0)).epsilon(1e-9));
    CHECK_FALSE(uhp_check(z2c(0.25, "z2+1_4"), 12, 1.5).holds);
}

TEST_CASE("optimal alpha: ln deg / chi_per") {
    const auto a = optimal_alpha(z2(), 8);
    CHECK_FALSE(a.unbounded);
    CHECK(a.value == doctest::Approx(1.0).epsilon(1e-9));
    const auto b = optimal_alpha(z2c(-2.0, "z2-2"), 8);
    CHECK(b.value == doctest::Approx(1.0).epsilon(1e-5));
    const auto c8 = optimal_alpha(z2c(0.25, "z2+1_4"), 8);
    const auto c12 = optimal_alpha(z2c(0.25, "z2+1_4"), 12);
    CHECK(c8.value > 1.0);
    CHECK(c12.value > c8.value);  // diverging with the cap: non-TCE signature
}
