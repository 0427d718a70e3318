#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "rmlab/rational_map.hpp"
#include "rmlab/rng.hpp"

#include <cmath>
#include <fstream>

using namespace rmlab;

namespace {

RationalMap z2() { return RationalMap::polynomial({0.0, 0.0, 1.0}, "z2"); }
RationalMap z2c(cplx c, const char* n) { return RationalMap::polynomial({c, 0.0, 1.0}, n); }
// R(z) = 1/z - z = (1 - z^2)/z
RationalMap inv_minus_z() {
    return RationalMap(Poly({1.0, 0.0, -1.0}), Poly({0.0, 1.0}), "1_z-z");
}

}  // namespace

TEST_CASE("construction guards") {
    CHECK_THROWS(RationalMap::polynomial({0.0, 1.0}, "degree1"));
    // common root z = 1: (z^2 - 1) / (z - 1)
    CHECK_THROWS(RationalMap(Poly({-1.0, 0.0, 1.0}), Poly({-1.0, 1.0}), "degenerate"));
}

TEST_CASE("evaluation: fixed examples") {
    CHECK(z2().evaluate(SpherePoint::infinity()).at_infinity);
    CHECK(inv_minus_z().evaluate(SpherePoint(0.0, 0.0)).at_infinity);  // pole at the origin
    const auto v = z2c(cplx(0.0, 1.0), "z2+i").evaluate(SpherePoint(0.0, 0.0));
    CHECK(v.z == cplx(0.0, 1.0));
    // large input through the chart at infinity
    const auto w = z2().evaluate(SpherePoint(1e100, 0.0));
    CHECK(w.finite());
    CHECK(w.re() == doctest::Approx(1e200).epsilon(1e-6));
    // values beyond the double range collapse to the exact infinity
    CHECK(z2().evaluate(SpherePoint(1e200, 0.0)).at_infinity);
}

TEST_CASE("spherical derivative: stated values") {
    const auto f = z2();
    // on the unit circle the conformal factors cancel: value 2
    CHECK(f.spherical_derivative(SpherePoint(1.0, 0.0)) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(f.spherical_derivative(SpherePoint(0.6, 0.8)) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(f.spherical_derivative(SpherePoint(0.0, 0.0)) == 0.0);
    CHECK(f.spherical_derivative(SpherePoint::infinity()) == 0.0);
    // parabolic fixed point of z^2 + 1/4
    CHECK(z2c(0.25, "z2+1_4").spherical_derivative(SpherePoint(0.5, 0.0)) ==
          doctest::Approx(1.0).epsilon(1e-12));
    // R = 1/z - z at the pole: |R'| ~ 1/z^2 against |R|^2 ~ 1/z^2, limit 1
    CHECK(inv_minus_z().spherical_derivative(SpherePoint(0.0, 0.0)) ==
          doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("critical points with Riemann-Hurwitz count") {
    const auto cs = z2().critical_points();
    REQUIRE(cs.points.size() == 2);
    CHECK(cs.total_multiplicity() == 2);  // 2 deg - 2
    CHECK(cs.points[0].point.z == cplx(0.0, 0.0));
    CHECK(cs.points[0].local_degree == 2);
    CHECK(cs.points[1].point.at_infinity);
    CHECK(cs.points[1].local_degree == 2);

    // Wronskian of 1/z - z solved by hand: -z^2 - 1 = 0, so +-i.
    const auto cr = inv_minus_z().critical_points();
    REQUIRE(cr.points.size() == 2);
    CHECK(cr.total_multiplicity() == 2);
    CHECK(chordal_distance(cr.points[0].point, SpherePoint(0.0, -1.0)) < 1e-12);
    CHECK(chordal_distance(cr.points[1].point, SpherePoint(0.0, 1.0)) < 1e-12);
}

TEST_CASE("preimages: stated examples and round trip") {
    const auto f = z2();
    auto p1 = f.preimages(SpherePoint(1.0, 0.0));
    REQUIRE(p1.points.size() == 2);
    CHECK(chordal_distance(p1.points[0], SpherePoint(-1.0, 0.0)) < 1e-12);
    CHECK(chordal_distance(p1.points[1], SpherePoint(1.0, 0.0)) < 1e-12);

    auto p0 = f.preimages(SpherePoint(0.0, 0.0));
    REQUIRE(p0.points.size() == 2);  // double preimage at the critical value
    CHECK(chordal_distance(p0.points[0], SpherePoint(0.0, 0.0)) < 1e-12);
    CHECK(chordal_distance(p0.points[1], SpherePoint(0.0, 0.0)) < 1e-12);

    auto p2 = z2c(-2.0, "z2-2").preimages(SpherePoint(2.0, 0.0));
    REQUIRE(p2.points.size() == 2);
    CHECK(chordal_distance(p2.points[0], SpherePoint(-2.0, 0.0)) < 1e-12);
    CHECK(chordal_distance(p2.points[1], SpherePoint(2.0, 0.0)) < 1e-12);

    // preimages of infinity for a polynomial sit at infinity
    auto pi = f.preimages(SpherePoint::infinity());
    REQUIRE(pi.points.size() == 2);
    CHECK(pi.points[0].at_infinity);
    CHECK(pi.points[1].at_infinity);

    // rational case: preimages of infinity are the pole and infinity
    auto pr = inv_minus_z().preimages(SpherePoint::infinity());
    REQUIRE(pr.points.size() == 2);
    CHECK(chordal_distance(pr.points[0], SpherePoint(0.0, 0.0)) < 1e-12);
    CHECK(pr.points[1].at_infinity);

    // round trip on random targets
    Rng rng(23);
    for (int i = 0; i < 50; ++i) {
        const SpherePoint y(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0));
        for (const auto& g : {z2c(cplx(0.0, 1.0), "z2+i"), inv_minus_z()}) {
            const auto pre = g.preimages(y);
            for (const auto& x : pre.points)
                CHECK(chordal_distance(g.evaluate(x), y) < 1e-7);
        }
    }
}

TEST_CASE("iterates: stated coefficient examples") {
    const auto f8 = z2().iterate(3);
    CHECK(f8.degree() == 8);
    CHECK(f8.numerator().degree() == 8);
    CHECK(std::abs(f8.numerator()[8] - cplx(1.0)) < 1e-15);
    for (int k = 0; k < 8; ++k) CHECK(std::abs(f8.numerator()[size_t(k)]) < 1e-15);

    // (z^2 + 1/4)^2 + 1/4 = z^4 + z^2/2 + 5/16, expanded by hand
    const auto g2 = z2c(0.25, "z2+1_4").iterate(2);
    REQUIRE(g2.numerator().degree() == 4);
    const double lead = std::abs(g2.numerator()[4]);
    CHECK(std::abs(g2.numerator()[4] / lead - cplx(1.0)) < 1e-14);
    CHECK(std::abs(g2.numerator()[2] / g2.numerator()[4] - cplx(0.5)) < 1e-14);
    CHECK(std::abs(g2.numerator()[0] / g2.numerator()[4] - cplx(5.0 / 16.0)) < 1e-14);
    CHECK(std::abs(g2.numerator()[1]) < 1e-14 * lead);
    CHECK(std::abs(g2.numerator()[3]) < 1e-14 * lead);

    // rational composition cross-checked pointwise
    const auto r = inv_minus_z();
    const auto r2 = r.iterate(2);
    CHECK(r2.degree() == 4);
    Rng rng(29);
    for (int i = 0; i < 10; ++i) {
        const SpherePoint p(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0));
        const auto direct = r.evaluate(r.evaluate(p));
        const auto via = r2.evaluate(p);
        CHECK(chordal_distance(direct, via) < 1e-9);
    }

    CHECK_THROWS(z2().iterate(20));  // cap is 2^14
}

TEST_CASE("iterate agrees with pointwise evaluation at 100 random points") {
    const auto f = z2c(cplx(0.0, 1.0), "z2+i");
    const auto f5 = f.iterate(5);  // degree 32 <= 2^12
    CHECK(f5.degree() == 32);
    Rng rng(31);
    for (int i = 0; i < 100; ++i) {
        const SpherePoint p(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5));
        CHECK(chordal_distance(f5.evaluate(p), f.evaluate_n(p, 5)) < 1e-9);
    }
}

TEST_CASE("critical orbit flags on the corpus") {
    JuliaFlagOptions opts;
    // z^2: both critical points attracted (0 and infinity are superattracting)
    auto cs = flagged_critical_points(z2(), std::nullopt, opts);
    for (const auto& p : cs.points) CHECK_FALSE(p.in_julia);

    // z^2 - 2: 0 -> -2 -> 2 -> 2 lands on a repelling fixed point
    cs = flagged_critical_points(z2c(-2.0, "z2-2"), std::nullopt, opts);
    CHECK(cs.points[0].in_julia);        // finite critical point 0
    CHECK_FALSE(cs.points[1].in_julia);  // infinity

    // z^2 + i: 0 lands on the repelling 2-cycle {i-1, -i}
    cs = flagged_critical_points(z2c(cplx(0.0, 1.0), "z2+i"), std::nullopt, opts);
    CHECK(cs.points[0].in_julia);

    // z^2 + 1/4: 0 is attracted to the parabolic point 1/2
    cs = flagged_critical_points(z2c(0.25, "z2+1_4"), std::nullopt, opts);
    CHECK_FALSE(cs.points[0].in_julia);

    // 1/z - z: critical orbits drift to the parabolic point at infinity
    cs = flagged_critical_points(inv_minus_z(), std::nullopt, opts);
    for (const auto& p : cs.points) CHECK_FALSE(p.in_julia);

    // annotation override wins
    cs = flagged_critical_points(z2(), std::vector<int>{0}, opts);
    CHECK(cs.points[0].in_julia);
    CHECK_FALSE(cs.points[1].in_julia);
}

TEST_CASE("registry round trip and validation errors") {
    const auto corpus = builtin_corpus();
    CHECK(corpus.size() == 6);

    const char* path = "registry_test.json";
    {
        std::ofstream out(path);
        out << R"({"schema_version": 1, "maps": [
          {"name": "z2", "numerator": [[0,0],[0,0],[1,0]], "denominator": [[1,0]],
           "annotations": {"expected_class": "hyperbolic", "critical_in_julia": []}}
        ]})";
    }
    auto loaded = load_registry(path);
    REQUIRE(loaded.size() == 1);
    CHECK(loaded[0].map.degree() == 2);
    CHECK(loaded[0].annotations.expected_class == "hyperbolic");

    {
        std::ofstream out(path);
        out << R"([{"name": "deg1", "numerator": [[0,0],[1,0]]}])";
    }
    CHECK_THROWS_WITH_AS(static_cast<void>(load_registry(path)),
                         doctest::Contains("degree at least two"), std::invalid_argument);

    {
        std::ofstream out(path);
        out << R"([{"name": "degen", "numerator": [[-1,0],[0,0],[1,0]],
                    "denominator": [[-1,0],[1,0]]}])";
    }
    CHECK_THROWS_WITH_AS(static_cast<void>(load_registry(path)),
                         doctest::Contains("degenerate"), std::invalid_argument);
}
