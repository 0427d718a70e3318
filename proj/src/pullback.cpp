#include "rmlab/pullback.hpp"

#include "rmlab/parallel.hpp"
#include "rmlab/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace rmlab {

using json = nlohmann::json;

const char* to_string(ScanVerdict v) {
    switch (v) {
        case ScanVerdict::bounded: return "bounded (semi-hyperbolic-consistent)";
        case ScanVerdict::growing: return "growing (non-semi-hyperbolic signature)";
        default: return "inconclusive";
    }
}

bool to_chart(Chart c, const SpherePoint& p, cplx& out) {
    if (c == Chart::identity) {
        if (p.at_infinity) return false;
        out = p.z;
        return true;
    }
    if (p.at_infinity) {
        out = cplx(0.0);
        return true;
    }
    if (p.z == cplx(0.0)) return false;
    out = 1.0 / p.z;
    return true;
}

SpherePoint from_chart(Chart c, cplx z) {
    if (c == Chart::identity) return SpherePoint(z);
    if (z == cplx(0.0)) return SpherePoint::infinity();
    return SpherePoint(1.0 / z);
}

// ---------------------------------------------------------------------------
// QuadCover

int QuadCover::locate(double x, double y) const {
    if (cells.empty()) return -1;
    if (x < root_x0 || y < root_y0 || x > root_x0 + root_size || y > root_y0 + root_size)
        return -1;
    int idx = 0;
    while (cells[size_t(idx)].child >= 0) {
        const Cell& c = cells[size_t(idx)];
        const double h = 0.5 * c.size;
        const int qx = x >= c.x0 + h ? 1 : 0;
        const int qy = y >= c.y0 + h ? 1 : 0;
        idx = c.child + qx + 2 * qy;
    }
    return idx;
}

int QuadCover::point_verdict(const SpherePoint& q) const {
    cplx w;
    if (!to_chart(chart, q, w)) return 0;
    const int leaf = locate(w.real(), w.imag());
    if (leaf < 0) return 0;
    const Cell& c = cells[size_t(leaf)];
    if (!c.in_component || c.state == 0) return 0;
    return c.state == 2 ? 2 : 1;
}

std::vector<int> QuadCover::leaves() const {
    std::vector<int> out;
    for (size_t i = 0; i < cells.size(); ++i)
        if (cells[i].child < 0) out.push_back(int(i));
    return out;
}

namespace {

using Oracle = std::function<int(const SpherePoint&)>;

constexpr double kHardFloor = 1e-7;

// chordal upper bound for the diagonal of a planar chart cell
double cell_chordal_diag(const QuadCover::Cell& c) {
    const double cx = c.x0 + 0.5 * c.size, cy = c.y0 + 0.5 * c.size;
    const double d = std::max(0.0, std::hypot(cx, cy) - 0.7072 * c.size);
    const double factor = 2.0 / (1.0 + d * d);
    return 1.4142135623730951 * c.size * factor;
}

void sample_cell(const RationalMap& f, Chart chart, const QuadCover::Cell& cell,
                 const Oracle& oracle, int& n_in, int& n_out, int& n_bnd) {
    n_in = n_out = n_bnd = 0;
    for (int sy = 0; sy < 3; ++sy) {
        for (int sx = 0; sx < 3; ++sx) {
            const cplx w(cell.x0 + 0.5 * cell.size * sx, cell.y0 + 0.5 * cell.size * sy);
            const SpherePoint p = from_chart(chart, w);
            const int v = oracle(f.evaluate(p));
            if (v == 2) ++n_in;
            else if (v == 0) ++n_out;
            else ++n_bnd;
        }
    }
}

int classify_cell(const RationalMap& f, Chart chart, const QuadCover::Cell& cell,
                  const Oracle& oracle) {
    int n_in = 0, n_out = 0, n_bnd = 0;
    sample_cell(f, chart, cell, oracle, n_in, n_out, n_bnd);
    if (n_in == 9) return 2;
    // Cells without interior evidence stay out; cells mapping entirely into
    // the uncertainty ring of the next level would otherwise thicken it at
    // every pull-back step. Gap artifacts this rule creates inside the
    // region are healed after flooding (see heal_interior).
    if (n_in == 0) return 0;
    return 1;
}

// Boundary cells with no out-evidence whose neighbors are all in the
// component are interior-gap artifacts of the sampled oracle (the next
// level's cover is itself a cell approximation): promote them, so solidity
// of the interior survives repeated pull-backs.
void heal_interior(QuadCover& qc, const RationalMap& f, const Oracle& oracle) {
    for (auto& c : qc.cells) {
        if (c.child >= 0 || !c.in_component || c.state != 1) continue;
        int n_in = 0, n_out = 0, n_bnd = 0;
        sample_cell(f, qc.chart, c, oracle, n_in, n_out, n_bnd);
        if (n_out == 0 && n_in > 0) c.state = 2;
    }
}

struct BuildFlags {
    bool seed_trouble = false;
    bool frame_clamped = false;
    bool cells_exhausted = false;
    bool crit_ambiguous = false;
};

// Flood the component containing the seed over in/boundary leaves; adjacency
// is discovered by probing just outside each cell side (the smaller cell of
// any adjacent pair always finds the bigger one, so the symmetric closure is
// complete).
void flood_component(QuadCover& qc, int seed_leaf) {
    for (auto& c : qc.cells) c.in_component = false;
    if (seed_leaf < 0 || qc.cells[size_t(seed_leaf)].state == 0) return;

    const auto leaves = qc.leaves();
    std::vector<std::vector<int>> adj(qc.cells.size());
    const double off = 1e-4;
    for (int li : leaves) {
        const auto& c = qc.cells[size_t(li)];
        if (c.state == 0) continue;
        for (int side = 0; side < 4; ++side) {
            for (double t : {0.17, 0.5, 0.83}) {
                double px = 0.0, py = 0.0;
                switch (side) {
                    case 0: px = c.x0 - off * c.size; py = c.y0 + t * c.size; break;
                    case 1: px = c.x0 + (1.0 + off) * c.size; py = c.y0 + t * c.size; break;
                    case 2: px = c.x0 + t * c.size; py = c.y0 - off * c.size; break;
                    default: px = c.x0 + t * c.size; py = c.y0 + (1.0 + off) * c.size; break;
                }
                const int nb = qc.locate(px, py);
                if (nb >= 0 && nb != li && qc.cells[size_t(nb)].state != 0)
                    adj[size_t(li)].push_back(nb);
            }
        }
    }
    std::vector<int> stack{seed_leaf};
    qc.cells[size_t(seed_leaf)].in_component = true;
    while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        for (int nb : adj[size_t(cur)]) {
            auto& cell = qc.cells[size_t(nb)];
            if (!cell.in_component) {
                cell.in_component = true;
                stack.push_back(nb);
            }
        }
        // bigger neighbors may hold the adjacency edge in the other direction
        for (int li : adj[size_t(cur)]) (void)li;
    }
    // second pass: adjacency discovered from the other side
    bool changed = true;
    while (changed) {
        changed = false;
        for (int li : leaves) {
            auto& c = qc.cells[size_t(li)];
            if (c.state == 0 || c.in_component) continue;
            for (int nb : adj[size_t(li)]) {
                if (qc.cells[size_t(nb)].in_component) {
                    c.in_component = true;
                    changed = true;
                    break;
                }
            }
        }
    }
}

// component diameter: chordal max over cell corners plus cell-size slack;
// in_only restricts to interior-evidence cells (used for refinement floors,
// so the boundary ring cannot feed back into the resolution)
double component_diameter(const QuadCover& qc, bool quick, bool in_only = false) {
    std::vector<std::array<double, 3>> pts;
    double max_diag = 0.0;
    for (const auto& c : qc.cells) {
        if (c.child >= 0 || !c.in_component) continue;
        if (in_only && c.state != 2) continue;
        max_diag = std::max(max_diag, cell_chordal_diag(c));
        for (int k = 0; k < 4; ++k) {
            const double x = c.x0 + (k & 1 ? c.size : 0.0);
            const double y = c.y0 + (k & 2 ? c.size : 0.0);
            pts.push_back(embed3(from_chart(qc.chart, cplx(x, y))));
        }
    }
    if (pts.empty()) return 0.0;
    double best = 0.0;
    if (quick || pts.size() > 1400) {
        std::array<double, 3> lo{1e30, 1e30, 1e30}, hi{-1e30, -1e30, -1e30};
        for (const auto& p : pts)
            for (int k = 0; k < 3; ++k) {
                lo[size_t(k)] = std::min(lo[size_t(k)], p[size_t(k)]);
                hi[size_t(k)] = std::max(hi[size_t(k)], p[size_t(k)]);
            }
        best = std::sqrt((hi[0] - lo[0]) * (hi[0] - lo[0]) + (hi[1] - lo[1]) * (hi[1] - lo[1]) +
                         (hi[2] - lo[2]) * (hi[2] - lo[2]));
    } else {
        for (size_t i = 0; i < pts.size(); ++i)
            for (size_t j = i + 1; j < pts.size(); ++j) {
                const double d2 = (pts[i][0] - pts[j][0]) * (pts[i][0] - pts[j][0]) +
                                  (pts[i][1] - pts[j][1]) * (pts[i][1] - pts[j][1]) +
                                  (pts[i][2] - pts[j][2]) * (pts[i][2] - pts[j][2]);
                if (d2 > best) best = d2;
            }
        best = std::sqrt(best);
    }
    return std::min(2.0, best + 2.0 * max_diag);
}

void split_cell(QuadCover& qc, int idx, const RationalMap& f, const Oracle& oracle) {
    // copy the geometry first: push_back may reallocate the cell storage
    const double x0 = qc.cells[size_t(idx)].x0;
    const double y0 = qc.cells[size_t(idx)].y0;
    const double h = 0.5 * qc.cells[size_t(idx)].size;
    const int base = int(qc.cells.size());
    qc.cells[size_t(idx)].child = base;
    for (int k = 0; k < 4; ++k) {
        QuadCover::Cell ch;
        ch.x0 = x0 + (k & 1 ? h : 0.0);
        ch.y0 = y0 + (k & 2 ? h : 0.0);
        ch.size = h;
        qc.cells.push_back(ch);
    }
    for (int k = 0; k < 4; ++k) {
        const int ci = base + k;
        qc.cells[size_t(ci)].state =
            std::int8_t(classify_cell(f, qc.chart, qc.cells[size_t(ci)], oracle));
    }
}

// True when the complement of the component (within the root box) fails to
// reach the frame from somewhere: a hole, so the disk Riemann-Hurwitz count
// would be invalid.
bool has_hole(const QuadCover& qc) {
    const auto leaves = qc.leaves();
    std::vector<char> outside(qc.cells.size(), 0);
    std::vector<int> stack;
    const double eps = 1e-9 * qc.root_size;
    for (int li : leaves) {
        const auto& c = qc.cells[size_t(li)];
        if (c.in_component) continue;
        const bool frame = c.x0 <= qc.root_x0 + eps || c.y0 <= qc.root_y0 + eps ||
                           c.x0 + c.size >= qc.root_x0 + qc.root_size - eps ||
                           c.y0 + c.size >= qc.root_y0 + qc.root_size - eps;
        if (frame) {
            outside[size_t(li)] = 1;
            stack.push_back(li);
        }
    }
    const double off = 1e-4;
    auto neighbors = [&](int li, std::vector<int>& out) {
        out.clear();
        const auto& c = qc.cells[size_t(li)];
        for (int side = 0; side < 4; ++side) {
            for (double t : {0.17, 0.5, 0.83}) {
                double px = 0.0, py = 0.0;
                switch (side) {
                    case 0: px = c.x0 - off * c.size; py = c.y0 + t * c.size; break;
                    case 1: px = c.x0 + (1.0 + off) * c.size; py = c.y0 + t * c.size; break;
                    case 2: px = c.x0 + t * c.size; py = c.y0 - off * c.size; break;
                    default: px = c.x0 + t * c.size; py = c.y0 + (1.0 + off) * c.size; break;
                }
                const int nb = qc.locate(px, py);
                if (nb >= 0 && nb != li) out.push_back(nb);
            }
        }
    };
    std::vector<int> nbs;
    while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        neighbors(cur, nbs);
        for (int nb : nbs) {
            if (outside[size_t(nb)]) continue;
            if (qc.cells[size_t(nb)].in_component) continue;
            outside[size_t(nb)] = 1;
            stack.push_back(nb);
        }
    }
    // run the sweep to fixpoint: big cells may only discover small frame
    // cells in one direction
    bool changed = true;
    while (changed) {
        changed = false;
        for (int li : leaves) {
            if (outside[size_t(li)] || qc.cells[size_t(li)].in_component) continue;
            neighbors(li, nbs);
            for (int nb : nbs) {
                if (outside[size_t(nb)]) {
                    outside[size_t(li)] = 1;
                    changed = true;
                    break;
                }
            }
        }
    }
    for (int li : leaves) {
        const auto& c = qc.cells[size_t(li)];
        if (!c.in_component && !outside[size_t(li)]) return true;
    }
    return false;
}

LevelCover build_level(const RationalMap& f, const CriticalSet& crit, const SpherePoint& seed,
                       const Oracle& oracle, double r_hint, const PullbackOptions& opts,
                       BuildFlags& flags) {
    LevelCover level;
    cplx c0;
    Chart chart = Chart::identity;
    if (seed.at_infinity || std::abs(seed.z) > 1.0) chart = Chart::inverse;
    if (!to_chart(chart, seed, c0)) {
        flags.seed_trouble = true;
        return level;
    }
    level.chart = chart;

    double half = std::min(3.2, std::max(1.5 * r_hint * (1.0 + std::norm(c0)) / 2.0, 0.02));
    for (int expansion = 0;; ++expansion) {
        QuadCover qc;
        qc.chart = chart;
        // the seed must not sit on dyadic cell corners: keep it off-center
        qc.root_x0 = c0.real() - 1.1306394 * half;
        qc.root_y0 = c0.imag() - 1.0214797 * half;
        qc.root_size = 2.2 * half;
        QuadCover::Cell root;
        root.x0 = qc.root_x0;
        root.y0 = qc.root_y0;
        root.size = qc.root_size;
        qc.cells.push_back(root);
        qc.cells[0].state = std::int8_t(classify_cell(f, chart, qc.cells[0], oracle));
        // uniform warm-up subdivision: coarse cells sample too sparsely to
        // be trusted as "out"
        for (int d0 = 0; d0 < 4; ++d0) {
            std::vector<int> leaves;
            for (size_t i = 0; i < qc.cells.size(); ++i)
                if (qc.cells[i].child < 0) leaves.push_back(int(i));
            for (int li : leaves) split_cell(qc, li, f, oracle);
        }

        double diam = 2.0 * half;  // provisional
        int seed_leaf = -1;
        bool exhausted = false;
        for (int pass = 0; pass < 48; ++pass) {
            seed_leaf = qc.locate(c0.real(), c0.imag());
            if (seed_leaf >= 0 && qc.cells[size_t(seed_leaf)].state == 0) {
                // the seed is in the region by construction; trust that over
                // the sampled verdict but remember the trouble
                qc.cells[size_t(seed_leaf)].state = 1;
                flags.seed_trouble = true;
            }
            flood_component(qc, seed_leaf);
            double d = component_diameter(qc, true, true);
            if (d <= 0.0) d = component_diameter(qc, true, false);
            if (d > 0.0) diam = std::min(diam, std::max(d, 4.0 * kHardFloor));
            const double floor =
                std::max({opts.resolution, diam * opts.rel_resolution, kHardFloor});
            std::vector<int> to_split;
            std::vector<char> queued(qc.cells.size(), 0);
            for (size_t i = 0; i < qc.cells.size(); ++i) {
                const auto& cell = qc.cells[i];
                if (cell.child >= 0 || !cell.in_component) continue;
                // boundary cells of the component refine toward the floor
                if (cell.state == 1 && cell_chordal_diag(cell) > floor && !queued[i]) {
                    to_split.push_back(int(i));
                    queued[i] = 1;
                }
                // coarse out-cells on the frontier get re-examined: their
                // sparse sample grid may have missed the region entirely
                const double off = 1e-4;
                for (int side = 0; side < 4; ++side) {
                    for (double t : {0.25, 0.75}) {
                        double px = 0.0, py = 0.0;
                        switch (side) {
                            case 0: px = cell.x0 - off * cell.size; py = cell.y0 + t * cell.size; break;
                            case 1: px = cell.x0 + (1.0 + off) * cell.size; py = cell.y0 + t * cell.size; break;
                            case 2: px = cell.x0 + t * cell.size; py = cell.y0 - off * cell.size; break;
                            default: px = cell.x0 + t * cell.size; py = cell.y0 + (1.0 + off) * cell.size; break;
                        }
                        const int nb = qc.locate(px, py);
                        if (nb < 0 || queued[size_t(nb)]) continue;
                        const auto& nc = qc.cells[size_t(nb)];
                        if (nc.child < 0 && nc.state == 0 &&
                            cell_chordal_diag(nc) > std::max(floor, 1.5 * cell_chordal_diag(cell))) {
                            to_split.push_back(nb);
                            queued[size_t(nb)] = 1;
                        }
                    }
                }
            }
            if (to_split.empty()) break;
            if (int(qc.cells.size()) + 4 * int(to_split.size()) > opts.max_cells) {
                exhausted = true;
                break;
            }
            for (int idx : to_split) split_cell(qc, idx, f, oracle);
        }
        seed_leaf = qc.locate(c0.real(), c0.imag());
        flood_component(qc, seed_leaf);
        heal_interior(qc, f, oracle);
        if (exhausted) flags.cells_exhausted = true;

        // does the component touch the frame?
        bool touches = false;
        const double eps = 1e-9 * qc.root_size;
        for (const auto& cell : qc.cells) {
            if (cell.child >= 0 || !cell.in_component) continue;
            if (cell.x0 <= qc.root_x0 + eps || cell.y0 <= qc.root_y0 + eps ||
                cell.x0 + cell.size >= qc.root_x0 + qc.root_size - eps ||
                cell.y0 + cell.size >= qc.root_y0 + qc.root_size - eps) {
                touches = true;
                break;
            }
        }
        if (touches && expansion < opts.max_expansions && half < 3.19) {
            half = std::min(3.2, 2.0 * half);
            continue;
        }
        if (touches) flags.frame_clamped = true;

        level.cover = std::move(qc);
        break;
    }

    level.diameter_bound = component_diameter(level.cover, false);
    level.simply_connected = !has_hole(level.cover);

    // critical hits, with local refinement at ambiguous cells
    for (const auto& cp : crit.points) {
        // the component lies in the ball around the seed of radius
        // diameter_bound; distant critical points cannot be hits
        const double dcrit = chordal_distance(cp.point, seed);
        if (dcrit > level.diameter_bound) continue;
        if (dcrit <= 1e-12) {
            // the seed itself is critical: a definite hit at any resolution
            level.critical_hits.push_back(cp.point);
            level.critical_hit_degrees.push_back(cp.local_degree);
            continue;
        }
        cplx w;
        if (!to_chart(level.cover.chart, cp.point, w)) continue;
        for (int round = 0;; ++round) {
            const int leaf = level.cover.locate(w.real(), w.imag());
            if (leaf < 0) break;
            auto& cell = level.cover.cells[size_t(leaf)];
            if (!cell.in_component || cell.state == 0) break;
            if (cell.state == 2) {
                level.critical_hits.push_back(cp.point);
                level.critical_hit_degrees.push_back(cp.local_degree);
                break;
            }
            // boundary cell: refine around the critical point
            if (round >= opts.crit_refine_rounds || cell.size < 8.0 * kHardFloor ||
                int(level.cover.cells.size()) + 4 > opts.max_cells) {
                flags.crit_ambiguous = true;
                break;
            }
            split_cell(level.cover, leaf, f, oracle);
            const int sl = level.cover.locate(c0.real(), c0.imag());
            flood_component(level.cover, sl);
        }
    }

    long deg = 1;
    for (int d : level.critical_hit_degrees) deg += d - 1;
    level.degree = deg;
    level.ambiguous = flags.crit_ambiguous || flags.cells_exhausted || flags.frame_clamped ||
                      flags.seed_trouble;
    return level;
}

}  // namespace

PullbackChain pullback_chain(const RationalMap& f, const CriticalSet& crit, const SpherePoint& x,
                             double r, int m, const PullbackOptions& opts) {
    if (!(r > 0.0) || r > opts.r_cap + 1e-12)
        throw std::invalid_argument("pullback_chain: need 0 < r <= r_cap");
    if (m < 1) throw std::invalid_argument("pullback_chain: m >= 1 required");

    PullbackChain chain;
    chain.base = x;
    chain.radius = r;
    chain.length = m;

    std::vector<SpherePoint> orbit(size_t(m) + 1);
    orbit[0] = x;
    for (int j = 1; j <= m; ++j) orbit[size_t(j)] = f.evaluate(orbit[size_t(j - 1)]);
    const SpherePoint top_center = orbit[size_t(m)];

    const double band = opts.ball_band;
    Oracle ball_oracle = [top_center, r, band](const SpherePoint& q) -> int {
        const double d = chordal_distance(top_center, q);
        if (d < r * (1.0 - band)) return 2;
        if (d > r * (1.0 + band)) return 0;
        return 1;
    };

    chain.levels.resize(size_t(m));
    std::string reasons;
    for (int j = m - 1; j >= 0; --j) {
        BuildFlags flags;
        Oracle oracle;
        if (j == m - 1) {
            oracle = ball_oracle;
        } else {
            const LevelCover* next = &chain.levels[size_t(j + 1)];
            oracle = [next](const SpherePoint& q) { return next->cover.point_verdict(q); };
        }
        const double hint = j == m - 1 ? r : std::max(chain.levels[size_t(j + 1)].diameter_bound,
                                                      8.0 * kHardFloor);
        chain.levels[size_t(j)] = build_level(f, crit, orbit[size_t(j)], oracle, hint, opts, flags);
        if (!chain.levels[size_t(j)].simply_connected) {
            chain.flagged = true;
            reasons += "level " + std::to_string(j) + ": cover not simply connected; ";
        }
        if (flags.crit_ambiguous) {
            chain.flagged = true;
            reasons += "level " + std::to_string(j) + ": critical point in an ambiguous cell; ";
        }
        if (flags.cells_exhausted) {
            chain.flagged = true;
            reasons += "level " + std::to_string(j) + ": cell budget exhausted; ";
        }
        if (flags.frame_clamped) {
            chain.flagged = true;
            chain.frame_clamped = true;
            reasons += "level " + std::to_string(j) + ": component exceeds the chart frame; ";
        }
        if (chain.total_degree < (1l << 60)) chain.total_degree *= chain.levels[size_t(j)].degree;
    }

    // cross check: preimages of a generic target counted inside the covers
    if (chain.total_degree <= opts.preimage_check_cap) {
        std::uint64_t h = 0x9e3779b97f4a7c15ULL;
        if (top_center.finite()) {
            h ^= std::uint64_t(std::llround(top_center.re() * 1e9)) * 0x100000001b3ULL;
            h ^= std::uint64_t(std::llround(top_center.im() * 1e9)) * 0xc2b2ae3d27d4eb4fULL;
        }
        bool counted = false;
        long hard_count = -1, soft_count = -1;
        for (int attempt = 0; attempt < 5 && !counted; ++attempt) {
            Rng rng(splitmix64(h) + std::uint64_t(attempt) * 1315423911ULL);
            const double th = rng.uniform(0.0, 6.283185307179586);
            // target at half radius: walk in the chart until the chordal
            // distance matches
            cplx c0;
            const Chart tc = top_center.at_infinity || std::abs(top_center.z) > 1.0
                                 ? Chart::inverse
                                 : Chart::identity;
            if (!to_chart(tc, top_center, c0)) break;
            const cplx dir(std::cos(th), std::sin(th));
            double lo = 0.0, hi = 2.0;
            for (int it = 0; it < 80; ++it) {
                const double mid = 0.5 * (lo + hi);
                const double d =
                    chordal_distance(top_center, from_chart(tc, c0 + mid * dir));
                if (d < 0.5 * r) lo = mid; else hi = mid;
            }
            const SpherePoint y = from_chart(tc, c0 + 0.5 * (lo + hi) * dir);

            // hard hits land in interior cells; soft hits also count the
            // boundary cells (unavoidable once the resolution floor binds)
            struct Hit {
                SpherePoint p;
                bool soft;
            };
            std::vector<Hit> front{{y, false}};
            bool bad = false;
            for (int j = m - 1; j >= 0 && !bad; --j) {
                std::vector<Hit> next;
                for (const auto& s : front) {
                    const PreimageSet pre = f.preimages(s.p);
                    if (pre.points.size() != size_t(f.degree())) {
                        bad = true;
                        break;
                    }
                    for (size_t k = 0; k < pre.points.size(); ++k) {
                        if (pre.residuals[k] > 1e-6) {
                            bad = true;
                            break;
                        }
                        const int v = chain.levels[size_t(j)].cover.point_verdict(pre.points[k]);
                        if (v == 2) {
                            next.push_back({pre.points[k], s.soft});
                        } else if (v == 1) {
                            next.push_back({pre.points[k], true});
                        } else if (chordal_distance(pre.points[k], orbit[size_t(j)]) <=
                                   chain.levels[size_t(j)].diameter_bound) {
                            // floor-limited cover: membership in the seed ball
                            // keeps the point as a may-be-inside hit
                            next.push_back({pre.points[k], true});
                        }
                    }
                    if (bad) break;
                }
                front = std::move(next);
            }
            if (bad) continue;
            long hard = 0, soft = 0;
            for (const auto& hh : front) {
                ++soft;
                if (!hh.soft) ++hard;
            }
            hard_count = hard;
            soft_count = soft;
            if (hard == soft) counted = true;  // fully resolved target
        }
        if (hard_count >= 0) {
            chain.preimage_count = hard_count;
            chain.methods_agree =
                hard_count <= chain.total_degree && chain.total_degree <= soft_count;
            if (!chain.methods_agree) {
                chain.flagged = true;
                reasons += "degree-uncertain: critical-hit count " +
                           std::to_string(chain.total_degree) + " vs preimage count [" +
                           std::to_string(hard_count) + ", " + std::to_string(soft_count) +
                           "]; ";
            }
        } else {
            chain.flagged = true;
            reasons += "degree-uncertain: generic-target attempts exhausted; ";
        }
    } else {
        chain.methods_agree = true;  // not contradicted; check skipped at this degree
    }
    chain.flag_reason = reasons;
    return chain;
}

SemilocalDegree semilocal_degree(const RationalMap& f, const CriticalSet& crit,
                                 const SpherePoint& x, double r, int m,
                                 const PullbackOptions& opts) {
    const auto chain = pullback_chain(f, crit, x, r, m, opts);
    return {chain.total_degree, chain.flagged};
}

SemihypScan semihyperbolicity_scan(const RationalMap& f, const CriticalSet& crit,
                                   const EmpiricalMeasure& mu, const SemihypParams& params) {
    SemihypScan scan;
    scan.max_degree_per_m.assign(size_t(params.m_max), 0);

    std::vector<SpherePoint> centers;
    Rng rng(mix_seed(params.seed, 0x5ca21ULL));
    for (int i = 0; i < params.sample_points && !mu.atoms.empty(); ++i)
        centers.push_back(mu.atoms[rng.below(mu.size())]);
    centers.insert(centers.end(), params.probe_points.begin(), params.probe_points.end());

    struct Row {
        std::vector<long> deg;
        std::vector<double> diam;
        std::vector<char> flagged;
        std::vector<char> frame;
    };
    std::vector<Row> rows(centers.size());
    parallel_for(centers.size(), [&](size_t ci) {
        Row& row = rows[ci];
        row.deg.assign(size_t(params.m_max), 0);
        row.diam.assign(size_t(params.m_max), 0.0);
        row.flagged.assign(size_t(params.m_max), 0);
        row.frame.assign(size_t(params.m_max), 0);
        for (int m = 1; m <= params.m_max; ++m) {
            try {
                const auto chain = pullback_chain(f, crit, centers[ci], params.r, m, params.pb);
                row.deg[size_t(m - 1)] = chain.total_degree;
                row.diam[size_t(m - 1)] = chain.levels[0].diameter_bound;
                row.flagged[size_t(m - 1)] = chain.flagged ? 1 : 0;
                row.frame[size_t(m - 1)] = chain.frame_clamped ? 1 : 0;
            } catch (const std::exception&) {
                row.flagged[size_t(m - 1)] = 1;
            }
        }
    });

    scan.frame_clamped_per_m.assign(size_t(params.m_max), 0);
    scan.max_diam_per_m.assign(size_t(params.m_max), 0.0);
    int flagged = 0, total = 0;
    for (const auto& row : rows) {
        for (int m = 1; m <= params.m_max; ++m) {
            ++total;
            if (row.frame[size_t(m - 1)]) ++scan.frame_clamped_per_m[size_t(m - 1)];
            scan.max_diam_per_m[size_t(m - 1)] =
                std::max(scan.max_diam_per_m[size_t(m - 1)], row.diam[size_t(m - 1)]);
            if (row.flagged[size_t(m - 1)]) {
                ++flagged;
                continue;
            }
            scan.max_degree_per_m[size_t(m - 1)] =
                std::max(scan.max_degree_per_m[size_t(m - 1)], row.deg[size_t(m - 1)]);
        }
    }
    scan.chains = total;
    scan.flagged_chains = flagged;

    long early = 0, late = 0;
    int frame_early = 0, frame_late = 0, n_early = 0, n_late = 0;
    const int cut = 2 * params.m_max / 3;
    for (int m = 1; m <= params.m_max; ++m) {
        if (m <= cut) {
            early = std::max(early, scan.max_degree_per_m[size_t(m - 1)]);
            frame_early += scan.frame_clamped_per_m[size_t(m - 1)];
            ++n_early;
        } else {
            late = std::max(late, scan.max_degree_per_m[size_t(m - 1)]);
            frame_late += scan.frame_clamped_per_m[size_t(m - 1)];
            ++n_late;
        }
    }
    const int ncenters = int(centers.size());
    const double fe = n_early && ncenters ? double(frame_early) / double(n_early * ncenters) : 0.0;
    const double fl = n_late && ncenters ? double(frame_late) / double(n_late * ncenters) : 0.0;
    const double flag_fraction = total ? double(flagged) / double(total) : 1.0;
    double late_diam = 0.0;
    for (int m = params.m_max / 2; m <= params.m_max; ++m)
        late_diam = std::max(late_diam, scan.max_diam_per_m[size_t(m - 1)]);
    if (late > early)
        scan.verdict = ScanVerdict::growing;
    else if ((fl - fe >= 0.1 && fl > 0.0) || late_diam >= 0.5 * params.r)
        // deep pull-back components that stop shrinking are incompatible
        // with bounded semi-local degrees at small radii
        scan.verdict = ScanVerdict::growing;
    else if (flag_fraction > params.flag_tol)
        scan.verdict = ScanVerdict::inconclusive;
    else
        scan.verdict = ScanVerdict::bounded;
    return scan;
}

GoodTimeRecord tce_density(const RationalMap& f, const CriticalSet& crit, const SpherePoint& x,
                           double r, long D, int horizon, const PullbackOptions& opts) {
    if (horizon < 10) throw std::invalid_argument("tce_density: horizon >= 10 required");
    GoodTimeRecord rec;
    rec.x = x;
    rec.D = D;
    rec.horizon = horizon;

    std::vector<char> good(size_t(horizon) + 1, 0);
    std::vector<char> flagged(size_t(horizon) + 1, 0);
    parallel_for(size_t(horizon), [&](size_t mi) {
        const int m = int(mi) + 1;
        try {
            const auto chain = pullback_chain(f, crit, x, r, m, opts);
            if (chain.flagged) flagged[size_t(m)] = 1;        // pessimistically bad
            else if (chain.total_degree <= D) good[size_t(m)] = 1;
        } catch (const std::exception&) {
            flagged[size_t(m)] = 1;
        }
    });

    int count = 0;
    for (int n = 1; n <= horizon; ++n) {
        if (good[size_t(n)]) {
            rec.good_times.push_back(n);
            ++count;
        }
        if (flagged[size_t(n)]) ++rec.flagged_times;
        rec.density_curve.push_back({n, double(count) / double(n)});
    }
    double mn = 1.0;
    for (int n = horizon / 2; n <= horizon; ++n)
        mn = std::min(mn, rec.density_curve[size_t(n - 1)].second);
    rec.density = mn;
    return rec;
}

ExpShrinkResult expshrink_decay(const RationalMap& f, const CriticalSet& crit,
                                const EmpiricalMeasure& mu, const ExpShrinkParams& params) {
    ExpShrinkResult res;
    res.per_m_max_diameter.assign(size_t(params.m_max), 0.0);

    // backward orbits from sampled atoms, preimage choices seeded
    std::vector<SpherePoint> bases;
    Rng rng(mix_seed(params.seed, 0xe245ULL));
    for (int i = 0; i < params.sample_points && !mu.atoms.empty(); ++i) {
        SpherePoint y = mu.atoms[rng.below(mu.size())];
        bool ok = true;
        for (int j = 0; j < params.m_max && ok; ++j) {
            const PreimageSet pre = f.preimages(y);
            if (pre.points.size() != size_t(f.degree())) ok = false;
            else y = pre.points[rng.below(pre.points.size())];
        }
        if (ok) bases.push_back(y);
    }
    // constant backward orbits at the pinned (fixed) points
    for (const auto& p : params.pinned_points) bases.push_back(p);

    std::vector<std::vector<double>> diam_rows(bases.size());
    std::vector<char> excluded(bases.size(), 0);
    parallel_for(bases.size(), [&](size_t bi) {
        try {
            const auto chain =
                pullback_chain(f, crit, bases[bi], params.r, params.m_max, params.pb);
            auto& row = diam_rows[bi];
            row.assign(size_t(params.m_max), 0.0);
            // level j is the pull-back by f^(m_max - j)
            for (int j = 0; j < params.m_max; ++j) {
                const int m = params.m_max - j;
                row[size_t(m - 1)] = chain.levels[size_t(j)].diameter_bound;
            }
            if (chain.flagged) excluded[bi] = 1;
        } catch (const std::exception&) {
            excluded[bi] = 1;
        }
    });

    res.chains = int(bases.size());
    for (size_t bi = 0; bi < bases.size(); ++bi) {
        if (excluded[bi]) {
            ++res.excluded_chains;
            continue;
        }
        for (int m = 1; m <= params.m_max; ++m)
            res.per_m_max_diameter[size_t(m - 1)] =
                std::max(res.per_m_max_diameter[size_t(m - 1)], diam_rows[bi][size_t(m - 1)]);
    }

    // slope of log(max diameter) against m over the last half
    std::vector<double> xs, ys;
    for (int m = std::max(1, params.m_max / 2); m <= params.m_max; ++m) {
        const double d = res.per_m_max_diameter[size_t(m - 1)];
        if (d <= 0.0) continue;
        xs.push_back(double(m));
        ys.push_back(std::log(d));
    }
    if (xs.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (size_t i = 0; i < xs.size(); ++i) {
            sx += xs[i];
            sy += ys[i];
            sxx += xs[i] * xs[i];
            sxy += xs[i] * ys[i];
        }
        const double n = double(xs.size());
        const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        res.lambda_hat = std::exp(-slope);
    }
    return res;
}

JacobianReport jacobian_consistency(const RationalMap& f, const CriticalSet& crit,
                                    const MeasureIndex& idx, const JacobianParams& params) {
    JacobianReport rep;
    const auto& mu = idx.measure();
    Rng rng(mix_seed(params.seed, 0x1acbULL));
    const double degd = double(f.degree());

    for (int trial = 0; trial < params.trials; ++trial) {
        const SpherePoint x = mu.atoms[rng.below(mu.size())];
        const double r = rng.uniform(params.r_min, params.r_max);
        const int m = 1 + int(rng.below(std::uint64_t(params.m_max)));

        const auto vmass = idx.ball_stat({x, r});
        if (vmass.count < params.min_atoms || vmass.weight <= 0.0) {
            ++rep.skipped_trials;
            continue;
        }

        // all preimages of x under f^m (expanded with multiplicity)
        std::vector<SpherePoint> front{x};
        bool bad = false;
        for (int j = 0; j < m && !bad; ++j) {
            std::vector<SpherePoint> next;
            for (const auto& s : front) {
                const PreimageSet pre = f.preimages(s);
                if (pre.points.size() != size_t(f.degree())) {
                    bad = true;
                    break;
                }
                next.insert(next.end(), pre.points.begin(), pre.points.end());
            }
            front = std::move(next);
        }
        if (bad) {
            ++rep.skipped_trials;
            continue;
        }

        std::vector<PullbackChain> components;
        bool trial_resolved = false;
        bool trial_used = false;
        for (const auto& p : front) {
            bool seen = false;
            for (const auto& comp : components) {
                const int v = comp.levels[0].cover.point_verdict(p);
                if (v >= 1) {
                    seen = true;
                    break;
                }
            }
            if (seen) continue;
            PullbackChain chain;
            try {
                chain = pullback_chain(f, crit, p, r, m, params.pb);
            } catch (const std::exception&) {
                ++rep.flagged_components;
                continue;
            }
            if (chain.flagged) {
                ++rep.flagged_components;
                continue;
            }
            // mass of the component: atoms in in-cells; boundary-cell atoms
            // bound the uncertainty
            double w_in = 0.0, w_bnd = 0.0;
            size_t count_in = 0;
            const double search_r = std::min(2.0, chain.levels[0].diameter_bound + 1e-6);
            idx.visit_ball({p, search_r}, [&](size_t ai) {
                const int v = chain.levels[0].cover.point_verdict(mu.atoms[ai]);
                if (v == 2) {
                    w_in += mu.weights[ai];
                    ++count_in;
                } else if (v == 1) {
                    w_bnd += mu.weights[ai];
                }
            });
            if (count_in < params.min_atoms_w || w_bnd > 0.2 * std::max(w_in, 1e-12)) {
                components.push_back(std::move(chain));
                continue;  // unresolved component; skip its deviation
            }
            const double w_est = w_in + 0.5 * w_bnd;
            const double expected =
                double(chain.total_degree) * std::pow(degd, -double(m)) * vmass.weight;
            const double dev = std::abs(w_est / expected - 1.0);
            rep.max_rel_deviation = std::max(rep.max_rel_deviation, dev);
            trial_used = true;
            components.push_back(std::move(chain));
        }
        trial_resolved = trial_used;
        if (trial_resolved) ++rep.resolved_trials;
        else ++rep.skipped_trials;
    }
    return rep;
}

void dump_chain_json(const PullbackChain& chain, const std::string& path) {
    json j;
    j["schema_version"] = 1;
    j["base"] = chain.base.at_infinity
                    ? json{{"inf", true}}
                    : json{{"re", chain.base.re()}, {"im", chain.base.im()}};
    j["radius"] = chain.radius;
    j["length"] = chain.length;
    j["total_degree"] = chain.total_degree;
    j["flagged"] = chain.flagged;
    j["flag_reason"] = chain.flag_reason;
    j["preimage_count"] = chain.preimage_count;
    json levels = json::array();
    for (const auto& lv : chain.levels) {
        json L;
        L["chart"] = lv.chart == Chart::identity ? "identity" : "inverse";
        L["degree"] = lv.degree;
        L["diameter_bound"] = lv.diameter_bound;
        L["simply_connected"] = lv.simply_connected;
        L["ambiguous"] = lv.ambiguous;
        json hits = json::array();
        for (size_t i = 0; i < lv.critical_hits.size(); ++i) {
            const auto& p = lv.critical_hits[i];
            hits.push_back({{"re", p.finite() ? p.re() : 0.0},
                            {"im", p.finite() ? p.im() : 0.0},
                            {"inf", p.at_infinity},
                            {"local_degree", lv.critical_hit_degrees[i]}});
        }
        L["critical_hits"] = hits;
        json cellarr = json::array();
        for (const auto& c : lv.cover.cells) {
            if (c.child >= 0 || c.state == 0 || !c.in_component) continue;
            cellarr.push_back({{"x0", c.x0}, {"y0", c.y0}, {"size", c.size},
                               {"state", int(c.state)}});
        }
        L["cells"] = cellarr;
        levels.push_back(L);
    }
    j["levels"] = levels;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << j.dump() << "\n";
}

}  // namespace rmlab
