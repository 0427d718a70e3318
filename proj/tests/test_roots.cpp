#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "rmlab/roots.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

using namespace rmlab;

namespace {

bool has_root_near(const PolyRootResult& r, cplx target, double tol = 1e-9,
                   int want_mult = -1) {
    for (const auto& e : r.roots) {
        if (std::abs(e.z - target) < tol) return want_mult < 0 || e.multiplicity == want_mult;
    }
    return false;
}

}  // namespace

TEST_CASE("quadratic and quartic basics") {
    auto r = solve_polynomial({-1.0, 0.0, 1.0});  // z^2 - 1
    REQUIRE(r.roots.size() == 2);
    CHECK(has_root_near(r, 1.0, 1e-14));
    CHECK(has_root_near(r, -1.0, 1e-14));
    CHECK(r.all_certified);

    auto r4 = solve_polynomial({-1.0, 0.0, 0.0, 0.0, 1.0});  // z^4 - 1
    REQUIRE(r4.total_multiplicity() == 4);
    CHECK(has_root_near(r4, 1.0));
    CHECK(has_root_near(r4, -1.0));
    CHECK(has_root_near(r4, cplx(0.0, 1.0)));
    CHECK(has_root_near(r4, cplx(0.0, -1.0)));
}

TEST_CASE("double root cluster gets multiplicity and an accurate centroid") {
    // (z - 1/2)^2 = z^2 - z + 1/4
    auto r = solve_polynomial({0.25, -1.0, 1.0});
    REQUIRE(r.total_multiplicity() == 2);
    CHECK(has_root_near(r, 0.5, 1e-9, 2));
}

TEST_CASE("fixed-point polynomial of the quadratic with a parabolic point") {
    // numerator of f^2(z) - z for f = z^2 + 1/4 is
    //   z^4 + z^2/2 - z + 5/16 = (z - 1/2)^2 (z^2 + z + 5/4)   [hand factorization]
    // so the roots are 1/2 (double) and (-1 +- 2i)/2.
    std::vector<cplx> g{cplx(5.0 / 16.0), cplx(-1.0), cplx(0.5), cplx(0.0), cplx(1.0)};
    // verify the hand factorization by expanding (z-1/2)^2 (z^2+z+5/4)
    {
        std::vector<cplx> a{0.25, -1.0, 1.0};        // (z-1/2)^2
        std::vector<cplx> b{1.25, 1.0, 1.0};         // z^2+z+5/4
        std::vector<cplx> prod(5, 0.0);
        for (size_t i = 0; i < a.size(); ++i)
            for (size_t j = 0; j < b.size(); ++j) prod[i + j] += a[i] * b[j];
        for (size_t k = 0; k < 5; ++k) CHECK(std::abs(prod[k] - g[k]) < 1e-15);
    }
    auto r = solve_polynomial(g);
    REQUIRE(r.total_multiplicity() == 4);
    CHECK(has_root_near(r, 0.5, 2e-8, 2));
    CHECK(has_root_near(r, cplx(-0.5, 1.0), 1e-9));
    CHECK(has_root_near(r, cplx(-0.5, -1.0), 1e-9));
}

TEST_CASE("zero roots are deflated exactly") {
    // z^3 (z - 2)
    auto r = solve_polynomial({0.0, 0.0, 0.0, -2.0, 1.0});
    REQUIRE(r.total_multiplicity() == 4);
    CHECK(has_root_near(r, 0.0, 1e-300, 3));
    CHECK(has_root_near(r, 2.0, 1e-12));
}

TEST_CASE("high degree roots of unity stay accurate") {
    // z^255 - 1
    std::vector<cplx> c(256, 0.0);
    c[0] = -1.0;
    c[255] = 1.0;
    auto r = solve_polynomial(c);
    REQUIRE(r.total_multiplicity() == 255);
    CHECK(r.all_certified);
    double worst = 0.0;
    for (const auto& e : r.roots) worst = std::max(worst, std::abs(std::abs(e.z) - 1.0));
    CHECK(worst < 1e-10);
}

TEST_CASE("extreme coefficient spread does not overflow") {
    // 1e280 z^2 - 1e-280: roots +- 1e-280-ish... solved via scaling
    auto r = solve_polynomial({cplx(-1e-280), cplx(0.0), cplx(1e280)});
    REQUIRE(r.roots.size() == 2);
    for (const auto& e : r.roots) {
        CHECK(std::isfinite(e.z.real()));
        CHECK(std::abs(std::abs(e.z) - 1e-280) < 1e-290);
    }
}

TEST_CASE("determinism: identical input, identical output") {
    std::vector<cplx> c{cplx(0.3, -1.2), cplx(2.0, 0.1), cplx(-0.7, 0.0), cplx(1.0, 0.5),
                        cplx(1.0)};
    auto a = solve_polynomial(c);
    auto b = solve_polynomial(c);
    REQUIRE(a.roots.size() == b.roots.size());
    for (size_t i = 0; i < a.roots.size(); ++i) {
        CHECK(a.roots[i].z.real() == b.roots[i].z.real());
        CHECK(a.roots[i].z.imag() == b.roots[i].z.imag());
    }
}
