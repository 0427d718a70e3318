#pragma once

#include "rmlab/measure.hpp"
#include "rmlab/rational_map.hpp"
#include "rmlab/sphere.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace rmlab {

enum class Chart { identity, inverse };

/// Adaptive cell cover of one pull-back component in a planar chart.
/// Cells carry three states (out / boundary / in); the flooded component is
/// a certified-outer cover of the true component up to sampling of cell
/// images (cross-checked downstream by preimage counting).
class QuadCover {
  public:
    struct Cell {
        double x0 = 0.0, y0 = 0.0, size = 0.0;
        int child = -1;       // index of first of 4 children, -1 for leaves
        std::int8_t state = 0;  // 0 out, 1 boundary, 2 in
        bool in_component = false;
    };

    Chart chart = Chart::identity;
    double root_x0 = 0.0, root_y0 = 0.0, root_size = 0.0;
    std::vector<Cell> cells;

    bool empty() const { return cells.empty(); }
    int locate(double x, double y) const;  // leaf index, -1 outside the root box

    /// 0 = outside the component, 1 = in a boundary cell of it, 2 = inside.
    int point_verdict(const SpherePoint& q) const;

    std::vector<int> leaves() const;
};

bool to_chart(Chart c, const SpherePoint& p, cplx& out);
SpherePoint from_chart(Chart c, cplx z);

struct PullbackOptions {
    double resolution = 0.0;        // absolute chordal cell floor; 0 = adaptive only
    double rel_resolution = 1.0 / 24.0;  // boundary cells refined below diam * this
    int max_cells = 60000;
    int max_expansions = 5;
    int crit_refine_rounds = 5;
    double ball_band = 0.01;        // relative fuzz band of the top-level ball test
    double r_cap = 0.1;             // pre: r <= r_cap (definitions want small r)
    long preimage_check_cap = 4096; // skip the counting cross-check above this degree
};

struct LevelCover {
    Chart chart = Chart::identity;
    long degree = 1;
    std::vector<SpherePoint> critical_hits;
    std::vector<int> critical_hit_degrees;   // local degrees of the hits
    double diameter_bound = 0.0;             // chordal upper bound, outer cover
    bool simply_connected = true;
    bool ambiguous = false;
    QuadCover cover;
};

struct PullbackChain {
    SpherePoint base;
    double radius = 0.0;
    int length = 0;
    std::vector<LevelCover> levels;  // j = 0 .. m-1; level m is the exact ball
    long total_degree = 1;
    bool flagged = false;
    std::string flag_reason;
    long preimage_count = -1;        // generic-target count, -1 when skipped
    bool methods_agree = false;      // Riemann-Hurwitz vs preimage counting
    bool frame_clamped = false;      // some component outgrew the chart frame
};

/// W_j = component of f^-(m-j)(B(f^m(x), r)) containing f^j(x), as adaptive
/// covers with per-level mapping degrees. Degrees come from critical-point
/// inclusion (disk Riemann-Hurwitz) and must agree with the count of
/// preimages of a generic target landing in W_0, or the chain is flagged.
PullbackChain pullback_chain(const RationalMap& f, const CriticalSet& crit,
                             const SpherePoint& x, double r, int m,
                             const PullbackOptions& opts = {});

struct SemilocalDegree {
    long degree = 1;
    bool flagged = false;
};

SemilocalDegree semilocal_degree(const RationalMap& f, const CriticalSet& crit,
                                 const SpherePoint& x, double r, int m,
                                 const PullbackOptions& opts = {});

enum class ScanVerdict { bounded, growing, inconclusive };
const char* to_string(ScanVerdict v);

struct SemihypParams {
    double r = 0.05;
    int m_max = 12;
    int sample_points = 30;
    std::uint64_t seed = 71;
    std::vector<SpherePoint> probe_points;  // deterministic extra centers
    double flag_tol = 0.25;                 // flagged-chain fraction for "inconclusive"
    PullbackOptions pb;
};

struct SemihypScan {
    std::vector<long> max_degree_per_m;  // 1-based: [m-1]
    std::vector<double> max_diam_per_m;  // over all chains, flagged included
    std::vector<int> frame_clamped_per_m;
    ScanVerdict verdict = ScanVerdict::inconclusive;
    int chains = 0;
    int flagged_chains = 0;
};

SemihypScan semihyperbolicity_scan(const RationalMap& f, const CriticalSet& crit,
                                   const EmpiricalMeasure& mu, const SemihypParams& params);

struct GoodTimeRecord {
    SpherePoint x;
    long D = 1;
    int horizon = 0;
    std::vector<int> good_times;
    std::vector<std::pair<int, double>> density_curve;  // (n, #(G in [1..n])/n)
    double density = 0.0;  // min of the curve over the last half (liminf proxy)
    int flagged_times = 0;  // flagged chains counted pessimistically as bad
};

GoodTimeRecord tce_density(const RationalMap& f, const CriticalSet& crit, const SpherePoint& x,
                           double r, long D, int horizon, const PullbackOptions& opts = {});

struct ExpShrinkParams {
    int sample_points = 20;
    double r = 0.1;
    int m_max = 16;
    std::uint64_t seed = 83;
    std::vector<SpherePoint> pinned_points;  // extra constant backward orbits
    PullbackOptions pb;
};

struct ExpShrinkResult {
    std::vector<double> per_m_max_diameter;  // 1-based: [m-1]
    double lambda_hat = 0.0;  // exp(-slope) of log max diameter over the last half
    int chains = 0;
    int excluded_chains = 0;
};

/// Diameter decay of pull-back components along seeded random backward
/// orbits (plus pinned constant orbits at distinguished points).
ExpShrinkResult expshrink_decay(const RationalMap& f, const CriticalSet& crit,
                                const EmpiricalMeasure& mu, const ExpShrinkParams& params);

struct JacobianParams {
    int trials = 50;
    double r_min = 0.04;
    double r_max = 0.09;
    int m_max = 3;
    std::uint64_t seed = 97;
    size_t min_atoms = 400;     // resolution bar on the target ball
    size_t min_atoms_w = 60;    // and on each component
    PullbackOptions pb;
};

struct JacobianReport {
    double max_rel_deviation = 0.0;  // of mass(W) deg^m / (D mass(V)) from 1
    int resolved_trials = 0;
    int skipped_trials = 0;
    int flagged_components = 0;
};

/// Mass-transport identity mass(W) = D deg^-m mass(V) over the pull-back
/// components W of small atom-centered balls V.
JacobianReport jacobian_consistency(const RationalMap& f, const CriticalSet& crit,
                                    const MeasureIndex& idx, const JacobianParams& params);

void dump_chain_json(const PullbackChain& chain, const std::string& path);

}  // namespace rmlab
