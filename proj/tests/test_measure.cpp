#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "rmlab/measure.hpp"
#include "rmlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

using namespace rmlab;

namespace {

RationalMap z2() { return RationalMap::polynomial({0.0, 0.0, 1.0}, "z2"); }
RationalMap z2c(cplx c, const char* n) { return RationalMap::polynomial({c, 0.0, 1.0}, n); }

// Arc-length oracle: the maximal entropy measure of z^2 is the uniform
// measure on the unit circle; the chordal ball of radius r around a circle
// point covers the arc with |2 sin(dtheta/2)| < r.
double arc_mass(double r) { return r >= 2.0 ? 1.0 : 2.0 * std::asin(r / 2.0) / 3.14159265358979323846; }

// Equilibrium-measure oracle for z^2 - 2 on [-2, 2]: F(x) = arccos(-x/2)/pi
// ... using F(x) = 1 - arccos(x/2)/pi; mass of [a,b] = F(b) - F(a).
double interval_cdf(double x) {
    if (x <= -2.0) return 0.0;
    if (x >= 2.0) return 1.0;
    return 1.0 - std::acos(x / 2.0) / 3.14159265358979323846;
}

// Chordal ball around a real center intersects [-2,2] in an interval; find
// the endpoints by bisection on the monotone chordal distance.
double chordal_ball_interval_mass(double center, double r) {
    auto dist = [&](double x) {
        return chordal_distance(SpherePoint(center, 0.0), SpherePoint(x, 0.0));
    };
    auto solve = [&](double lo, double hi, bool left) {
        // find boundary point where dist == r between lo and hi
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            const bool inside = dist(mid) < r;
            if (left) {
                if (inside) hi = mid; else lo = mid;
            } else {
                if (inside) lo = mid; else hi = mid;
            }
        }
        return 0.5 * (lo + hi);
    };
    const double a = dist(-5.0) < r ? -5.0 : solve(-5.0, center, true);
    const double b = dist(5.0) < r ? 5.0 : solve(center, 5.0, false);
    return interval_cdf(b) - interval_cdf(a);
}

double ks_uniform_angle(const EmpiricalMeasure& mu) {
    std::vector<double> t;
    t.reserve(mu.size());
    for (const auto& p : mu.atoms)
        t.push_back((std::atan2(p.im(), p.re()) + 3.14159265358979323846) /
                    (2.0 * 3.14159265358979323846));
    std::sort(t.begin(), t.end());
    double ks = 0.0;
    const double n = double(t.size());
    for (size_t i = 0; i < t.size(); ++i) {
        ks = std::max(ks, std::abs(t[i] - double(i) / n));
        ks = std::max(ks, std::abs(t[i] - double(i + 1) / n));
    }
    return ks;
}

}  // namespace

TEST_CASE("sampling lands on the Julia set: circle and segment") {
    const auto mu = sample_measure(z2(), 16, 1050, 50, 42);
    CHECK(mu.size() == 16000);
    CHECK(mu.total_weight == doctest::Approx(1.0).epsilon(1e-12));
    double worst = 0.0;
    for (const auto& p : mu.atoms) worst = std::max(worst, std::abs(std::abs(p.z) - 1.0));
    CHECK(worst < 1e-6);

    const auto nu = sample_measure(z2c(-2.0, "z2-2"), 16, 1050, 50, 42);
    double worst_im = 0.0, worst_range = 0.0;
    for (const auto& p : nu.atoms) {
        worst_im = std::max(worst_im, std::abs(p.im()));
        worst_range = std::max(worst_range, std::abs(p.re()) - 2.0);
    }
    CHECK(worst_im < 1e-6);
    CHECK(worst_range < 1e-6);
}

TEST_CASE("determinism: same seed gives bitwise-identical atoms") {
    const auto a = sample_measure(z2(), 8, 300, 100, 7);
    const auto b = sample_measure(z2(), 8, 300, 100, 7);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a.atoms[i].re() == b.atoms[i].re());
        CHECK(a.atoms[i].im() == b.atoms[i].im());
    }
    const auto c = sample_measure(z2(), 8, 300, 100, 8);
    bool differs = false;
    for (size_t i = 0; i < a.size() && !differs; ++i)
        differs = a.atoms[i].re() != c.atoms[i].re();
    CHECK(differs);
}

TEST_CASE("angular equidistribution for z^2 (KS smoke test)") {
    const auto mu = sample_measure(z2(), 32, 1100, 100, 11);  // 32k atoms
    CHECK(ks_uniform_angle(mu) < 0.05);
}

TEST_CASE("ball masses match the arc-length oracle within 3 errors") {
    const auto mu = sample_measure(z2(), 64, 2100, 100, 13);  // 128k atoms
    MeasureIndex idx(mu);
    Rng rng(3);
    for (int i = 0; i < 12; ++i) {
        const double th = rng.uniform(0.0, 6.283185307179586);
        const SpherePoint x(std::cos(th), std::sin(th));
        for (double r : {0.02, 0.05, 0.1}) {
            const auto m = idx.ball_mass({x, r});
            const double expect = arc_mass(r);
            CHECK(std::abs(m.estimate - expect) < 3.0 * m.std_error + 0.002);
        }
    }
    // whole sphere
    CHECK(idx.ball_mass({SpherePoint(0.0, 0.0), 2.0}).estimate == doctest::Approx(1.0));
    // far from the circle
    CHECK(idx.ball_mass({SpherePoint(0.0, 0.0), 0.3}).estimate == 0.0);
}

TEST_CASE("interval equilibrium measure: endpoint square root") {
    const auto mu = sample_measure(z2c(-2.0, "z2-2"), 64, 3225, 100, 17);  // 200k atoms
    MeasureIndex idx(mu);
    for (double center : {2.0, -2.0, 0.0, 1.0}) {
        for (double r : {0.03, 0.06, 0.12}) {
            const auto m = idx.ball_mass({SpherePoint(center, 0.0), r});
            const double expect = chordal_ball_interval_mass(center, r);
            CHECK(std::abs(m.estimate - expect) < 3.0 * m.std_error + 0.004);
        }
    }
}

TEST_CASE("invariance: mass of preimage equals mass within 3 errors") {
    for (const auto& f : {z2(), z2c(-2.0, "z2-2")}) {
        const auto mu = sample_measure(f, 64, 1662, 100, 19);  // ~100k atoms
        MeasureIndex idx(mu);
        Rng rng(5);
        int tested = 0;
        for (int i = 0; i < 200 && tested < 25; ++i) {
            const SpherePoint x = mu.atoms[rng.below(mu.size())];
            const double r = rng.uniform(0.05, 0.15);
            const auto base = idx.ball_mass({x, r});
            if (base.atom_count < 500) continue;
            ++tested;
            // pull the ball back: both preimage balls, via atoms mapped forward
            double pre_mass = 0.0;
            for (size_t k = 0; k < mu.size(); ++k)
                if (chordal_distance(f.evaluate(mu.atoms[k]), x) < r) pre_mass += mu.weights[k];
            CHECK(std::abs(pre_mass - base.estimate) <
                  3.0 * (base.std_error + 0.002) + 0.003);
        }
        CHECK(tested >= 10);
    }
}

TEST_CASE("monotonicity of ball mass curves") {
    const auto mu = sample_measure(z2(), 16, 725, 100, 23);
    MeasureIndex idx(mu);
    const auto grid = geometric_grid(0.01, 0.5, 12);
    const auto curve = ball_mass_curve(idx, mu.atoms[77], grid);
    for (size_t i = 1; i < curve.masses.size(); ++i) CHECK(curve.masses[i] >= curve.masses[i - 1]);
}

TEST_CASE("doubling scan on z^2: consistent with ratio near 2") {
    const auto mu = sample_measure(z2(), 64, 3225, 100, 29);  // 200k atoms
    MeasureIndex idx(mu);
    DoublingParams p;
    p.centers = 60;
    p.r_min = 0.02;
    p.r_max = 0.3;
    p.radii_per_center = 6;
    const auto est = doubling_scan(idx, p);
    CHECK(est.verdict == DoublingVerdict::consistent);
    CHECK(est.C_star_hat > 1.6);
    CHECK(est.C_star_hat < 2.5);
}

TEST_CASE("exponent fits: circle slope 1, interval endpoint slope 1/2") {
    const auto mu = sample_measure(z2(), 64, 3225, 100, 31);
    MeasureIndex idx(mu);
    ExponentFitParams p;
    p.centers = 30;
    p.r_min = 0.02;
    p.r_max = 0.2;
    p.n_radii = 8;
    const auto fit = lower_exponent_fit(idx, p);
    CHECK(fit.alpha_hat == doctest::Approx(1.0).epsilon(0.1));
    CHECK(upper_exponent_check(idx, p) == doctest::Approx(1.0).epsilon(0.1));

    const auto nu = sample_measure(z2c(-2.0, "z2-2"), 64, 6350, 100, 37);  // 400k
    MeasureIndex jdx(nu);
    ExponentFitParams q;
    q.center_points = {SpherePoint(2.0, 0.0), SpherePoint(-2.0, 0.0)};
    q.r_min = 0.02;
    q.r_max = 0.2;
    q.n_radii = 8;
    const auto end = lower_exponent_fit(jdx, q);
    CHECK(end.alpha_hat == doctest::Approx(0.5).epsilon(0.14));
    q.center_points = {SpherePoint(0.0, 0.0), SpherePoint(0.7, 0.0)};
    const auto mid = lower_exponent_fit(jdx, q);
    CHECK(mid.alpha_hat == doctest::Approx(1.0).epsilon(0.12));
}

TEST_CASE("inverse doubling statistics") {
    const auto mu = sample_measure(z2(), 64, 3225, 100, 41);
    MeasureIndex idx(mu);
    InverseDoublingParams p;
    p.centers = 40;
    p.r_min = 0.02;
    p.r_max = 0.15;
    // eta = 1 + eps: same ball, inflation 1
    p.eta = 1.0000001;
    auto rep = inverse_doubling_stats(idx, p);
    CHECK(rep.min_inflation == doctest::Approx(1.0).epsilon(1e-6));
    // eta = 2 on arc length doubles the mass
    p.eta = 2.0;
    rep = inverse_doubling_stats(idx, p);
    CHECK(rep.min_inflation == doctest::Approx(2.0).epsilon(0.15));
    CHECK(rep.min_annulus_ratio == doctest::Approx(1.0).epsilon(0.3));
    CHECK(rep.eta_for_doubling > 1.0);
    CHECK(rep.eta_for_doubling < 2.6);
}

TEST_CASE("merge: identity, commutativity of mass queries, normalization") {
    const auto a = sample_measure(z2(), 8, 600, 100, 43);
    const auto b = sample_measure(z2(), 8, 600, 100, 44);
    EmpiricalMeasure empty;
    const auto ea = merge(a, empty);
    CHECK(ea.size() == a.size());

    const auto ab = merge(a, b);
    const auto ba = merge(b, a);
    CHECK(ab.total_weight == doctest::Approx(1.0).epsilon(1e-12));
    MeasureIndex iab(ab), iba(ba);
    Rng rng(47);
    for (int i = 0; i < 100; ++i) {
        const SpherePoint x(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5));
        const double r = rng.uniform(0.05, 0.5);
        CHECK(iab.ball_stat({x, r}).weight ==
              doctest::Approx(iba.ball_stat({x, r}).weight).epsilon(1e-12));
    }

    const auto other = sample_measure(z2c(-2.0, "z2-2"), 4, 300, 100, 45);
    CHECK_THROWS(merge(a, other));
}

TEST_CASE("atom persistence round trip reproduces statistics exactly") {
    const auto mu = sample_measure(z2c(cplx(0.0, 1.0), "z2+i"), 8, 850, 100, 53);
    save_atoms(mu, "atoms_test.csv", "atoms_test.json");
    const auto nu = load_atoms("atoms_test.csv", "atoms_test.json");
    REQUIRE(nu.size() == mu.size());
    for (size_t i = 0; i < mu.size(); ++i) {
        CHECK(mu.atoms[i].re() == nu.atoms[i].re());
        CHECK(mu.atoms[i].im() == nu.atoms[i].im());
        CHECK(mu.weights[i] == nu.weights[i]);
    }
    MeasureIndex a(mu), b(nu);
    const auto sa = a.ball_stat({SpherePoint(0.0, 1.0), 0.2});
    const auto sb = b.ball_stat({SpherePoint(0.0, 1.0), 0.2});
    CHECK(sa.weight == sb.weight);
    CHECK(sa.count == sb.count);
    std::remove("atoms_test.csv");
    std::remove("atoms_test.json");
}
