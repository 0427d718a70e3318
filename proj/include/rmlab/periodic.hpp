#pragma once

#include "rmlab/rational_map.hpp"
#include "rmlab/sphere.hpp"

#include <map>
#include <string>
#include <vector>

namespace rmlab {

enum class OrbitKind { repelling, attracting, neutral };
const char* to_string(OrbitKind k);

struct PeriodicOrbit {
    std::vector<SpherePoint> points;  // length = exact period
    cplx multiplier{0.0, 0.0};        // (f^n)' around the cycle, chart-consistent
    double chi = 0.0;                 // (1/n) ln |multiplier|
    OrbitKind classification = OrbitKind::repelling;
    int period = 0;
    int root_multiplicity = 1;        // >1 at parabolic collisions
    bool certified = true;
};

struct PeriodicOptions {
    long solver_cap = 1l << 12;       // max deg(f)^n for root solving
    double coeff_loss_limit = 27.0;   // tolerated ln(cancellation) when
                                      // evaluating the expanded iterate
    double residual_tol = 1e-12;      // chordal residual after polish
    double exact_period_tol = 1e-8;
    double neutral_band = 1e-6;       // | |m| - 1 | below this is neutral
    int max_backward_cycles = 400;
};

/// All orbits of exact period n. Expanded-coefficient root solving is used
/// when conditioning permits; otherwise periodic points are located by
/// cyclic backward iteration over branch itineraries (with a completeness
/// flag instead of a guarantee). Attracting cycles are recovered from
/// critical orbits, the cycle through infinity is handled exactly. When
/// `route_complete` is supplied it reports whether the root-count-complete
/// coefficient route was used.
std::vector<PeriodicOrbit> periodic_points(const RationalMap& f, int n,
                                           const PeriodicOptions& opts = {},
                                           bool* route_complete = nullptr);

/// Complex multiplier of a cycle, computed in the charts (identity or 1/z)
/// that keep every factor finite; modulus equals the product of spherical
/// derivatives along the cycle.
cplx cycle_multiplier(const RationalMap& f, const std::vector<SpherePoint>& orbit);

struct ChiPerEstimate {
    std::map<int, double> per_period_min;  // period -> min chi over repelling orbits
    double chi_per_hat = 0.0;              // min over computed periods (cap-bounded
                                           // upper bound for the true infimum)
    int period_cap = 0;
    bool neutral_found = false;
    bool complete = true;  // false when a backward-itinerary search may have missed orbits
    SpherePoint min_point;  // a point of the minimizing orbit
    bool has_min_point = false;
    std::vector<SpherePoint> neutral_points;
};

ChiPerEstimate chi_per(const RationalMap& f, int period_cap, const PeriodicOptions& opts = {});

struct UhpResult {
    bool holds = false;
    PeriodicOrbit worst;   // orbit minimizing chi
    bool have_worst = false;
};

/// Uniform expansion |(f^n)'(p)| >= lambda^n over repelling cycles up to the
/// cap. A neutral cycle found within the cap counts as failure: it is a
/// certificate that cycle exponents decay to zero beyond any finite cap.
UhpResult uhp_check(const RationalMap& f, int period_cap, double lambda,
                    const PeriodicOptions& opts = {});

struct OptimalAlpha {
    double value = 0.0;
    bool unbounded = false;  // chi_per below tolerance: non-TCE signature
};

OptimalAlpha optimal_alpha(const RationalMap& f, int period_cap,
                           const PeriodicOptions& opts = {});

void export_orbits_csv(const std::vector<PeriodicOrbit>& orbits, const std::string& path);

}  // namespace rmlab
