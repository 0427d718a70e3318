#include "rmlab/julia.hpp"

#include "rmlab/pullback.hpp"

#include "rmlab/parallel.hpp"
#include "rmlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace rmlab {

namespace {

double polynomial_escape_radius(const RationalMap& f) {
    double r = 1.0;
    const Poly& p = f.numerator();
    for (int k = 0; k < p.degree(); ++k) r += std::abs(p[size_t(k)]) / std::abs(p.lead());
    return std::max(2.0, r);
}

ChartGrid make_grid(bool inverse, double half, double h) {
    ChartGrid g;
    g.inverse_chart = inverse;
    g.h = h;
    g.x0 = -half;
    g.y0 = -half;
    g.nx = g.ny = std::max(8, int(std::ceil(2.0 * half / h)));
    g.occupied.assign(size_t(g.nx) * size_t(g.ny), 0);
    return g;
}

}  // namespace

JuliaApproximation julia_approximation(const RationalMap& f, double resolution,
                                       long point_budget, std::uint64_t seed) {
    if (!(resolution > 0.0)) throw std::invalid_argument("julia_approximation: resolution > 0");
    JuliaApproximation J;
    J.is_polynomial = f.is_polynomial();

    // Backward-iteration cloud (the classical inverse-iteration renderer).
    const int chains = 64;
    const int burn = 100;
    const int depth = burn + int(std::max<long>(1, point_budget / chains));
    const auto mu = sample_measure(f, chains, depth, burn, seed);
    J.cloud = mu.atoms;
    {
        std::vector<std::array<double, 3>> pts(J.cloud.size());
        std::vector<double> ws(J.cloud.size(), 1.0);
        for (size_t i = 0; i < J.cloud.size(); ++i) pts[i] = embed3(J.cloud[i]);
        J.tree = KdTree3(std::move(pts), std::move(ws));
    }

    const double half = J.is_polynomial ? polynomial_escape_radius(f) + 0.5 : 2.2;
    J.escape_radius = J.is_polynomial ? polynomial_escape_radius(f) : 0.0;
    J.grid = make_grid(false, half, resolution);
    J.resolution = J.grid.h;
    if (!J.is_polynomial) J.grid_inv = make_grid(true, 1.2, resolution);

    for (const auto& p : J.cloud) {
        if (p.finite()) {
            const int c = J.grid.cell_of(p.re(), p.im());
            if (c >= 0) J.grid.occupied[size_t(c)] = 1;
        }
        if (J.grid_inv) {
            cplx w;
            if (p.at_infinity) w = cplx(0.0);
            else if (p.z != cplx(0.0)) w = 1.0 / p.z;
            else continue;
            const int c = J.grid_inv->cell_of(w.real(), w.imag());
            if (c >= 0) J.grid_inv->occupied[size_t(c)] = 1;
        }
    }

    // Escape mask (polynomials) and a sound per-cell distance lower bound.
    ChartGrid& g = J.grid;
    g.escaping.assign(size_t(g.nx) * size_t(g.ny), 0);
    g.dist_lower.assign(size_t(g.nx) * size_t(g.ny), 0.0f);
    parallel_for(size_t(g.ny), [&](size_t iy) {
        for (int ix = 0; ix < g.nx; ++ix) {
            const size_t ci = iy * size_t(g.nx) + size_t(ix);
            const cplx center(g.x0 + (ix + 0.5) * g.h, g.y0 + (double(iy) + 0.5) * g.h);
            const SpherePoint cp(center);
            if (J.is_polynomial) {
                const auto gv = green_function(f, cp, 200);
                g.escaping[ci] = gv.escaped ? 1 : 0;
            }
            const double a = std::max(0.0, std::abs(center) - g.h);
            const double cellrad = 0.7072 * g.h * 2.0 / (1.0 + a * a);
            const double nn = J.tree.nearest_distance(embed3(cp));
            g.dist_lower[ci] = float(std::max(0.0, nn - cellrad));
        }
    });
    if (J.is_polynomial) {
        std::vector<std::array<double, 3>> filled_centers;
        for (int iy = 0; iy < g.ny; ++iy)
            for (int ix = 0; ix < g.nx; ++ix) {
                const size_t ci = size_t(iy) * size_t(g.nx) + size_t(ix);
                if (!g.escaping[ci]) {
                    const cplx center(g.x0 + (ix + 0.5) * g.h, g.y0 + (iy + 0.5) * g.h);
                    filled_centers.push_back(embed3(SpherePoint(center)));
                }
            }
        std::vector<double> ws(filled_centers.size(), 1.0);
        J.filled_tree = KdTree3(std::move(filled_centers), std::move(ws));
    }
    return J;
}

GreenValue green_function(const RationalMap& f, const SpherePoint& z, int horizon) {
    GreenValue out;
    if (!f.is_polynomial())
        throw std::invalid_argument("green_function: polynomial maps only");
    const double degd = double(f.degree());
    const double esc = 1e12;
    SpherePoint x = z;
    double scale = 1.0;
    for (int n = 0; n <= horizon; ++n) {
        if (x.at_infinity) {
            out.value = std::numeric_limits<double>::infinity();
            out.escaped = true;
            out.steps = n;
            return out;
        }
        const double a = std::abs(x.z);
        if (a > esc) {
            out.value = scale * std::log(a);
            out.escaped = true;
            out.steps = n;
            return out;
        }
        x = f.evaluate(x);
        scale /= degd;
    }
    out.value = 0.0;
    out.escaped = false;
    out.steps = horizon;
    return out;
}

cplx green_gradient(const RationalMap& f, cplx z, double step) {
    auto G = [&](cplx w) { return green_function(f, SpherePoint(w)).value; };
    const double gx = (G(z + step) - G(z - step)) / (2.0 * step);
    const double gy = (G(z + cplx(0.0, step)) - G(z - cplx(0.0, step))) / (2.0 * step);
    return cplx(gx, gy);
}

namespace {

// Hole-size estimate at y: chordal distance to the cloud; in boundary mode
// y must escape and the hole also keeps clear of the non-escaping cells.
// Heuristic above the grid scale; verdicts carry the trust floor.
double hole_size(const RationalMap& f, const JuliaApproximation& J, const SpherePoint& y,
                 bool boundary_mode) {
    double est = J.nn_chordal(y);
    if (boundary_mode) {
        if (!y.finite()) return est;
        const auto gv = green_function(f, y, 200);
        if (!gv.escaped) return 0.0;  // inside the filled set: no hole here
        if (J.filled_tree && J.filled_tree->size() > 0)
            est = std::min(est, J.filled_tree->nearest_distance(embed3(y)));
    }
    return est;
}

// local planar step corresponding to one chordal unit near chart point c
double planar_per_chordal(cplx c) { return (1.0 + std::norm(c)) / 2.0; }

PorosityEstimate porosity_impl(const RationalMap& f, const JuliaApproximation& J,
                               const PorosityParams& params, bool boundary_mode) {
    if (boundary_mode && !J.is_polynomial)
        throw std::invalid_argument("boundary porosity needs a polynomial map");
    PorosityEstimate est;
    est.trust_floor = 4.0 * J.grid.h;
    if (params.r_min < est.trust_floor)
        throw std::invalid_argument(
            "porosity radii below the resolution trust floor (4h) are undetectable");

    est.radii = geometric_grid(params.r_min, params.r_max, params.n_radii);
    Rng rng(mix_seed(params.seed, 0x90125ULL));
    std::vector<SpherePoint> centers;
    for (int i = 0; i < params.centers && !J.cloud.empty(); ++i)
        centers.push_back(J.cloud[rng.below(J.cloud.size())]);

    est.xi_hat.assign(est.radii.size(), 1.0);
    double global_min = 2.0;
    for (size_t ri = 0; ri < est.radii.size(); ++ri) {
        const double r = est.radii[ri];
        for (const auto& x : centers) {
            // candidate hole centers y inside B(x, r) in the local chart
            cplx c0;
            const Chart chart =
                (x.at_infinity || std::abs(x.z) > 1.0) ? Chart::inverse : Chart::identity;
            cplx tmp;
            if (chart == Chart::identity) tmp = x.z;
            else if (x.at_infinity) tmp = cplx(0.0);
            else tmp = 1.0 / x.z;
            c0 = tmp;
            const double u = r * planar_per_chordal(c0);

            double best = 0.0;
            cplx best_w = c0;
            auto consider = [&](cplx w) {
                const SpherePoint y =
                    chart == Chart::identity
                        ? SpherePoint(w)
                        : (w == cplx(0.0) ? SpherePoint::infinity() : SpherePoint(1.0 / w));
                if (chordal_distance(x, y) >= r) return;
                const double hole = hole_size(f, J, y, boundary_mode);
                if (hole > best) {
                    best = hole;
                    best_w = w;
                }
            };
            for (int di = 0; di < params.directions; ++di) {
                const double th = 2.0 * 3.14159265358979323846 * (di + 0.5) / params.directions;
                const cplx dir(std::cos(th), std::sin(th));
                for (int si = 1; si <= params.radial_samples; ++si) {
                    const double t = double(si) / double(params.radial_samples + 1);
                    consider(c0 + u * t * dir);
                }
            }
            // local pattern refinement around the best candidate
            double step = u / double(params.radial_samples + 1);
            for (int round = 0; round < 3; ++round) {
                const cplx base = best_w;
                for (int k = 0; k < 8; ++k) {
                    const double th = 2.0 * 3.14159265358979323846 * k / 8.0;
                    consider(base + step * cplx(std::cos(th), std::sin(th)));
                }
                step *= 0.5;
            }
            const double xi = std::min(best / r, 0.999);
            if (xi < est.xi_hat[ri]) est.xi_hat[ri] = xi;
            if (xi < global_min) {
                global_min = xi;
                est.witness_center = x;
                est.witness_radius = r;
            }
        }
    }
    est.xi_min = 2.0;
    for (double v : est.xi_hat) est.xi_min = std::min(est.xi_min, v);
    est.porous_consistent = est.xi_min >= 0.02;
    return est;
}

}  // namespace

PorosityEstimate porosity_curve(const RationalMap& f, const JuliaApproximation& J,
                                const PorosityParams& params) {
    return porosity_impl(f, J, params, params.boundary_mode);
}

PorosityEstimate boundary_porosity_curve(const RationalMap& f, const JuliaApproximation& J,
                                         const PorosityParams& params) {
    return porosity_impl(f, J, params, true);
}

PerfectnessEstimate uniform_perfectness(const JuliaApproximation& J,
                                        const PerfectnessParams& params) {
    PerfectnessEstimate est;
    Rng rng(mix_seed(params.seed, 0x7115ULL));
    const auto radii = geometric_grid(params.r_min, params.r_max, params.n_radii);
    std::vector<double> eta_grid;
    for (double e = 1.05; e <= 4.3; e *= 1.12) eta_grid.push_back(e);

    for (int i = 0; i < params.centers && !J.cloud.empty(); ++i) {
        const SpherePoint x = J.cloud[rng.below(J.cloud.size())];
        const auto e3 = embed3(x);
        for (double r : radii) {
            ++est.samples;
            const auto inner = J.tree.ball_stat(e3, r * (1.0 + 1e-12));
            double found = 0.0;
            for (double eta : eta_grid) {
                const auto outer = J.tree.ball_stat(e3, std::min(2.0, eta * r));
                if (outer.count > inner.count) {
                    found = eta;
                    break;
                }
            }
            if (found == 0.0) found = eta_grid.back() * 1.2;  // nothing in any annulus
            if (found > est.eta_hat) {
                est.eta_hat = found;
                est.worst_center = x;
                est.worst_radius = r;
            }
        }
    }
    return est;
}

CarrotProbe carrot_probe(const RationalMap& f, const JuliaApproximation& J,
                         const CarrotParams& params) {
    if (!f.is_polynomial())
        throw std::invalid_argument("carrot_probe: polynomial basins of infinity only");
    CarrotProbe probe;
    std::vector<SpherePoint> targets = params.target_points;
    if (targets.empty()) {
        Rng rng(mix_seed(params.seed, 0xca1107ULL));
        for (int i = 0; i < params.targets && !J.cloud.empty(); ++i)
            targets.push_back(J.cloud[rng.below(J.cloud.size())]);
    }

    const double stop_radius = polynomial_escape_radius(f) + 1.0;
    std::vector<CarrotTarget> rows(targets.size());
    parallel_for(targets.size(), [&](size_t ti) {
        CarrotTarget row;
        row.target = targets[ti];
        if (!row.target.finite()) {
            row.reached = false;
            rows[ti] = row;
            return;
        }
        const cplx z = row.target.z;

        // ascent anchor: the most escaping point on a small circle around z
        cplx w;
        bool anchored = false;
        double bestg = 0.0;
        for (int k = 0; k < 16; ++k) {
            const double th = 2.0 * 3.14159265358979323846 * (k + 0.3) / 16.0;
            const cplx cand = z + params.anchor_offset * cplx(std::cos(th), std::sin(th));
            const auto gv = green_function(f, SpherePoint(cand));
            if (gv.escaped && gv.value > bestg) {
                bestg = gv.value;
                w = cand;
                anchored = true;
            }
        }
        if (!anchored) {
            row.reached = false;
            rows[ti] = row;
            return;
        }

        double constant = std::numeric_limits<double>::max();
        auto visit = [&](const SpherePoint& p) {
            const double to_target = chordal_distance(p, row.target);
            if (to_target <= 0.0) return;
            double dist_est = J.nn_chordal(p);
            if (p.finite()) {
                const auto gv = green_function(f, p);
                if (gv.escaped && std::isfinite(gv.value)) {
                    const double local = std::max(1e-12, J.nn_chordal(p));
                    const double step = std::max(1e-9, 0.05 * local * planar_per_chordal(p.z));
                    const cplx grad = green_gradient(f, p.z, step);
                    const double ga = std::abs(grad);
                    if (ga > 0.0) {
                        // dist ~ 2 G / |grad G|, converted to chordal units
                        const double eucl = 2.0 * gv.value / ga;
                        const double chordal = eucl * 2.0 / (1.0 + std::norm(p.z));
                        dist_est = std::min(dist_est, chordal);
                    }
                }
            }
            constant = std::min(constant, dist_est / to_target);
            row.path.push_back(p);
        };

        visit(SpherePoint(w));
        bool ok = true;
        for (int step_i = 0; step_i < params.max_steps; ++step_i) {
            if (std::abs(w) >= stop_radius) break;
            const auto gv = green_function(f, SpherePoint(w));
            if (!gv.escaped) {
                ok = false;
                break;
            }
            const double local = std::max(params.anchor_offset * 0.25, J.nn_chordal(w));
            const double planar = local * planar_per_chordal(w);
            const cplx grad = green_gradient(f, w, std::max(1e-9, 0.05 * planar));
            const double ga = std::abs(grad);
            if (!(ga > 0.0) || !std::isfinite(ga)) {
                ok = false;
                break;
            }
            w += (0.35 * planar / ga) * grad;
            visit(SpherePoint(w));
        }
        if (ok && std::abs(w) < stop_radius) ok = false;  // never escaped the fractal zone
        if (ok) {
            // the reference point: the potential maximum on the sphere is
            // infinity itself
            visit(SpherePoint::infinity());
            row.constant = constant;
            row.reached = true;
        } else {
            row.reached = false;
        }
        rows[ti] = row;
    });

    bool first = true;
    for (auto& row : rows) {
        if (!row.reached) {
            ++probe.discarded;
            probe.targets.push_back(std::move(row));
            continue;
        }
        if (first || row.constant < probe.C_hat) {
            probe.C_hat = row.constant;
            probe.worst_target = row.target;
            first = false;
        }
        probe.targets.push_back(std::move(row));
    }
    return probe;
}

void export_cloud_csv(const JuliaApproximation& J, const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "w");
    if (!fp) throw std::runtime_error("cannot open " + path + " for writing");
    std::fprintf(fp, "re,im\n");
    for (const auto& p : J.cloud) {
        if (p.at_infinity) std::fprintf(fp, "inf,0\n");
        else std::fprintf(fp, "%.17g,%.17g\n", p.re(), p.im());
    }
    std::fclose(fp);
}

void export_grid_pgm(const ChartGrid& grid, const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "w");
    if (!fp) throw std::runtime_error("cannot open " + path + " for writing");
    std::fprintf(fp, "P2\n%d %d\n255\n", grid.nx, grid.ny);
    for (int iy = grid.ny - 1; iy >= 0; --iy) {
        for (int ix = 0; ix < grid.nx; ++ix) {
            const size_t ci = size_t(iy) * size_t(grid.nx) + size_t(ix);
            int v = 255;
            if (grid.occupied[ci]) v = 0;
            else if (!grid.escaping.empty() && !grid.escaping[ci]) v = 160;
            std::fprintf(fp, "%d ", v);
        }
        std::fprintf(fp, "\n");
    }
    std::fclose(fp);
}

void export_carrot_paths_csv(const CarrotProbe& probe, const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "w");
    if (!fp) throw std::runtime_error("cannot open " + path + " for writing");
    std::fprintf(fp, "target_id,point_id,re,im\n");
    for (size_t t = 0; t < probe.targets.size(); ++t) {
        const auto& row = probe.targets[t];
        for (size_t k = 0; k < row.path.size(); ++k) {
            const auto& p = row.path[k];
            if (p.at_infinity) std::fprintf(fp, "%zu,%zu,inf,0\n", t, k);
            else std::fprintf(fp, "%zu,%zu,%.17g,%.17g\n", t, k, p.re(), p.im());
        }
    }
    std::fclose(fp);
}

}  // namespace rmlab
