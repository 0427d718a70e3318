#include "rmlab/roots.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

namespace rmlab {

namespace {

constexpr double kPi = 3.14159265358979323846;

void solve_linear(const std::vector<cplx>& c, std::vector<cplx>& out) {
    out.push_back(-c[0] / c[1]);
}

// Numerically stable quadratic roots (sign trick plus Vieta).
void solve_quadratic(const std::vector<cplx>& c, std::vector<cplx>& out) {
    const cplx a = c[2], b = c[1], cc = c[0];
    const cplx disc = b * b - 4.0 * a * cc;
    cplx s = std::sqrt(disc);
    if (std::real(std::conj(b) * s) < 0.0) s = -s;
    const cplx q = -0.5 * (b + s);
    if (q == cplx(0.0)) {
        out.push_back(cplx(0.0));
        out.push_back(-b / a);
        return;
    }
    out.push_back(q / a);
    out.push_back(cc / q);
}

// Geometric-mean root magnitude from log-coefficients; a sane, overflow-free
// radius for the initial circle even when coefficients span e^±600.
double initial_radius(const std::vector<cplx>& c) {
    const int d = int(c.size()) - 1;
    const double llead = std::log(std::abs(c[d]));
    double lc0 = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < d; ++k) {
        const double a = std::abs(c[k]);
        if (a == 0.0) continue;
        // Fujiwara-style term (|c_k|/|c_d|)^{1/(d-k)}
        lc0 = std::max(lc0, (std::log(a) - llead) / double(d - k));
    }
    if (!std::isfinite(lc0)) return 1.0;
    double r = std::exp(std::min(std::max(lc0, -300.0), 300.0));
    return std::max(r, 1e-12);
}

struct Eval {
    cplx newton;      // p/p'
    double back_err;  // |p| / sum|c_k||z|^k
    bool dp_zero;
};

Eval evaluate_at(const std::vector<cplx>& c, cplx z) {
    ScaledCplx v, d, bnd;
    scaled_eval(c, z, v, d, bnd);
    Eval e;
    e.dp_zero = d.is_zero();
    e.newton = e.dp_zero ? cplx(0.0) : scaled_ratio(v, d);
    if (bnd.is_zero()) {
        e.back_err = 0.0;
    } else {
        const double le = v.log_abs() - bnd.log_abs();
        e.back_err = le < -700.0 ? 0.0 : std::exp(std::min(le, 700.0));
    }
    return e;
}

}  // namespace

PolyRootResult solve_polynomial(const std::vector<cplx>& coeffs_in, const SolveOptions& opts) {
    PolyRootResult result;
    std::vector<cplx> c = coeffs_in;
    // Trim numerically-zero leading terms relative to the largest coefficient.
    double cmax = 0.0;
    for (const auto& v : c) cmax = std::max(cmax, std::abs(v));
    while (c.size() > 1 && std::abs(c.back()) <= 1e-300 * std::max(1.0, cmax)) c.pop_back();
    const int d0 = int(c.size()) - 1;
    if (d0 < 1) return result;

    // Deflate exact zero roots so the initial circle is well defined.
    int zero_mult = 0;
    while (int(c.size()) > 1 && c.front() == cplx(0.0)) {
        c.erase(c.begin());
        ++zero_mult;
    }

    const int d = int(c.size()) - 1;
    std::vector<cplx> z;
    z.reserve(d);
    if (d == 1) {
        solve_linear(c, z);
    } else if (d == 2) {
        solve_quadratic(c, z);
    } else if (d >= 3) {
        const double r = initial_radius(c);
        z.resize(d);
        for (int j = 0; j < d; ++j) {
            const double th = 2.0 * kPi * (double(j) + 0.35) / double(d) + 0.5 / double(d);
            z[j] = r * cplx(std::cos(th), std::sin(th));
        }
        std::vector<cplx> w(d);
        std::vector<char> settled(d, 0);
        const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
        const bool parallel = d >= 512 && hw > 1;

        auto sweep_range = [&](int lo, int hi) {
            for (int j = lo; j < hi; ++j) {
                if (settled[j]) {
                    w[j] = cplx(0.0);
                    continue;
                }
                const Eval e = evaluate_at(c, z[j]);
                if (e.back_err <= 1e-18) {
                    w[j] = cplx(0.0);
                    continue;
                }
                cplx s = 0.0;
                for (int k = 0; k < d; ++k) {
                    if (k == j) continue;
                    const cplx dz = z[j] - z[k];
                    if (dz != cplx(0.0)) s += 1.0 / dz;
                }
                cplx nj = e.newton;
                if (!std::isfinite(nj.real()) || !std::isfinite(nj.imag())) {
                    // Derivative vanished; nudge deterministically.
                    w[j] = (std::abs(z[j]) + 1.0) * 1e-3 * cplx(0.7, 0.7);
                    continue;
                }
                const cplx den = 1.0 - nj * s;
                cplx step = (den == cplx(0.0)) ? nj : nj / den;
                // Clamp runaway steps to keep iterates in a sane region.
                const double cap = 0.5 * (std::abs(z[j]) + 1.0);
                const double sa = std::abs(step);
                if (!std::isfinite(sa) || sa > cap) step *= cap / (std::isfinite(sa) && sa > 0 ? sa : 1.0);
                w[j] = step;
            }
        };

        for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
            result.sweeps = sweep + 1;
            if (parallel) {
                const int nt = int(std::min<unsigned>(hw, 8));
                std::vector<std::thread> ts;
                const int chunk = (d + nt - 1) / nt;
                for (int t = 0; t < nt; ++t) {
                    const int lo = t * chunk, hi = std::min(d, lo + chunk);
                    if (lo < hi) ts.emplace_back(sweep_range, lo, hi);
                }
                for (auto& t : ts) t.join();
            } else {
                sweep_range(0, d);
            }
            bool all = true;
            int nsettled = 0;
            for (int j = 0; j < d; ++j) {
                if (settled[j]) {
                    ++nsettled;
                    continue;
                }
                z[j] -= w[j];
                if (std::abs(w[j]) <= opts.step_tol * (1.0 + std::abs(z[j]))) {
                    settled[j] = 1;
                    ++nsettled;
                } else {
                    all = false;
                }
            }
            if (all) break;
            // A solve that is stuck this badly is operating on coefficients
            // that cannot resolve the roots: abandon, report uncertified.
            if (sweep == 60 && nsettled * 10 < d * 3) break;
        }
    }

    // Cluster nearby roots into multiplicity groups.
    std::vector<int> order(z.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (z[a].real() != z[b].real()) return z[a].real() < z[b].real();
        return z[a].imag() < z[b].imag();
    });
    std::vector<char> used(z.size(), 0);
    std::vector<RootEntry> entries;
    for (size_t ii = 0; ii < order.size(); ++ii) {
        const int i = order[ii];
        if (used[i]) continue;
        std::vector<int> cluster{i};
        used[i] = 1;
        // relative to the root magnitude, so tiny symmetric pairs stay split
        const double tol = opts.cluster_tol * std::abs(z[i]);
        for (size_t jj = ii + 1; jj < order.size(); ++jj) {
            const int j = order[jj];
            if (z[j].real() - z[i].real() > tol) break;
            if (used[j]) continue;
            if (std::abs(z[j] - z[i]) <= tol) {
                cluster.push_back(j);
                used[j] = 1;
            }
        }
        cplx centroid = 0.0;
        for (int k : cluster) centroid += z[k];
        centroid /= double(cluster.size());
        RootEntry re;
        re.z = centroid;
        re.multiplicity = int(cluster.size());
        entries.push_back(re);
    }

    // Multiplicity-aware Newton polish (z -= m p/p'), quadratic also at
    // multiple roots.
    for (auto& re : entries) {
        if (!opts.polish_clusters && re.multiplicity > 1) continue;
        cplx x = re.z;
        for (int it = 0; it < 60; ++it) {
            const Eval e = evaluate_at(c, x);
            if (e.back_err <= 1e-17 || e.dp_zero) break;
            const cplx step = double(re.multiplicity) * e.newton;
            if (!std::isfinite(step.real()) || !std::isfinite(step.imag())) break;
            const double sa = std::abs(step);
            if (sa > 0.25 * (1.0 + std::abs(x))) break;
            x -= step;
            if (sa <= 1e-16 * (1.0 + std::abs(x))) break;
        }
        const Eval before = evaluate_at(c, re.z);
        const Eval after = evaluate_at(c, x);
        if (after.back_err <= before.back_err) re.z = x;
    }

    for (auto& re : entries) {
        re.residual = evaluate_at(c, re.z).back_err;
        re.certified = re.residual <= opts.certify_tol;
    }
    if (zero_mult > 0) {
        RootEntry re;
        re.z = cplx(0.0);
        re.multiplicity = zero_mult;
        re.residual = 0.0;
        re.certified = true;
        entries.insert(entries.begin(), re);
    }
    result.roots = std::move(entries);
    result.all_certified = !result.roots.empty();
    for (const auto& r : result.roots) result.all_certified = result.all_certified && r.certified;
    return result;
}

}  // namespace rmlab
