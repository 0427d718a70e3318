#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "rmlab/rng.hpp"
#include "rmlab/sphere.hpp"

#include <cmath>

using namespace rmlab;

namespace {

// Chordal distance straight from the definition, no scaling tricks; the
// independent oracle for the production implementation.
double chordal_naive(cplx p, cplx q) {
    return 2.0 * std::abs(p - q) / (std::sqrt(1.0 + std::norm(p)) * std::sqrt(1.0 + std::norm(q)));
}

// Sphere rotation z -> (cos t * z - sin t)/(sin t * z + cos t); chordal
// distances are exactly invariant under it.
SpherePoint rotate(const SpherePoint& p, double t) {
    const double c = std::cos(t), s = std::sin(t);
    if (p.at_infinity) return s == 0.0 ? SpherePoint::infinity() : SpherePoint(c / s);
    const cplx den = s * p.z + c;
    if (den == cplx(0.0)) return SpherePoint::infinity();
    return SpherePoint((c * p.z - s) / den);
}

SpherePoint random_point(Rng& rng) {
    // Mix finite draws from a wide box with occasional large/inf points.
    const double sel = rng.uniform();
    if (sel < 0.05) return SpherePoint::infinity();
    if (sel < 0.15) return SpherePoint(rng.uniform(-1e6, 1e6), rng.uniform(-1e6, 1e6));
    return SpherePoint(rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0));
}

}  // namespace

TEST_CASE("chordal distance: stated values") {
    CHECK(chordal_distance(SpherePoint(0.0, 0.0), SpherePoint::infinity()) == doctest::Approx(2.0));
    CHECK(chordal_distance(SpherePoint(0.0, 0.0), SpherePoint(0.0, 0.0)) == 0.0);
    // 2*|1-(-1)| / (sqrt2 * sqrt2) = 2
    CHECK(chordal_distance(SpherePoint(1.0, 0.0), SpherePoint(-1.0, 0.0)) ==
          doctest::Approx(2.0).epsilon(1e-15));
    CHECK(chordal_distance(SpherePoint::infinity(), SpherePoint::infinity()) == 0.0);
}

TEST_CASE("chordal distance agrees with the naive formula on moderate points") {
    Rng rng(7);
    for (int i = 0; i < 2000; ++i) {
        const cplx p(rng.uniform(-4.0, 4.0), rng.uniform(-4.0, 4.0));
        const cplx q(rng.uniform(-4.0, 4.0), rng.uniform(-4.0, 4.0));
        CHECK(chordal_distance(SpherePoint(p), SpherePoint(q)) ==
              doctest::Approx(chordal_naive(p, q)).epsilon(1e-13));
    }
}

TEST_CASE("chordal distance is symmetric, bounded by 2, triangle inequality") {
    Rng rng(11);
    for (int i = 0; i < 5000; ++i) {
        const auto p = random_point(rng), q = random_point(rng), r = random_point(rng);
        const double pq = chordal_distance(p, q);
        const double qp = chordal_distance(q, p);
        CHECK(pq == qp);
        CHECK(pq <= 2.0);
        const double pr = chordal_distance(p, r);
        const double qr = chordal_distance(q, r);
        CHECK(pr <= pq + qr + 4.0 * 2.2204460492503131e-16);
    }
}

TEST_CASE("rotation invariance to 8 units of round-off") {
    Rng rng(13);
    for (int i = 0; i < 2000; ++i) {
        const auto p = random_point(rng), q = random_point(rng);
        const double t = rng.uniform(0.0, 6.283185307179586);
        const double before = chordal_distance(p, q);
        const double after = chordal_distance(rotate(p, t), rotate(q, t));
        CHECK(std::abs(before - after) <= 8.0 * 2.2204460492503131e-16 * 2.0 + 1e-12 * before);
    }
}

TEST_CASE("antipode: stated values and involution") {
    CHECK(antipode(SpherePoint(0.0, 0.0)).at_infinity);
    CHECK(antipode(SpherePoint::infinity()).finite());
    CHECK(antipode(SpherePoint::infinity()).z == cplx(0.0, 0.0));
    // -1/conj(1) = -1
    CHECK(antipode(SpherePoint(1.0, 0.0)).z == cplx(-1.0, 0.0));

    Rng rng(17);
    for (int i = 0; i < 1000; ++i) {
        const auto p = random_point(rng);
        const auto pp = antipode(antipode(p));
        CHECK(chordal_distance(p, pp) <= 1e-12);
        CHECK(chordal_distance(p, antipode(p)) == doctest::Approx(2.0).epsilon(1e-12));
    }
}

TEST_CASE("embedding distance equals chordal distance") {
    Rng rng(19);
    for (int i = 0; i < 2000; ++i) {
        const auto p = random_point(rng), q = random_point(rng);
        const auto a = embed3(p), b = embed3(q);
        const double d3 = std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) +
                                    (a[2] - b[2]) * (a[2] - b[2]));
        CHECK(d3 == doctest::Approx(chordal_distance(p, q)).epsilon(1e-12));
    }
}

TEST_CASE("ball containment") {
    CHECK(ball_contains({SpherePoint(0.0, 0.0), 0.5}, SpherePoint(0.1, 0.0)));
    CHECK_FALSE(ball_contains({SpherePoint(0.0, 0.0), 0.5}, SpherePoint::infinity()));
    // chordal(1, 1.2) = 2*0.2/(sqrt2*sqrt(2.44)) ~ 0.181 < 0.3
    CHECK(ball_contains({SpherePoint(1.0, 0.0), 0.3}, SpherePoint(1.2, 0.0)));
}

TEST_CASE("set diameter") {
    const SpherePoint zero(0.0, 0.0);
    CHECK(set_diameter(std::vector<SpherePoint>{zero}) == 0.0);
    CHECK(set_diameter(std::vector<SpherePoint>{zero, SpherePoint::infinity()}) ==
          doctest::Approx(2.0));
    // {0, 1, i}: all pairwise distances equal sqrt(2); max = chordal(1, i)
    const SpherePoint one(1.0, 0.0), eye(0.0, 1.0);
    const double expected = chordal_distance(one, eye);
    CHECK(set_diameter(std::vector<SpherePoint>{zero, one, eye}) ==
          doctest::Approx(expected).epsilon(1e-15));
    CHECK_THROWS(set_diameter(std::vector<SpherePoint>{}));
}
