#include "rmlab/rational_map.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace rmlab {

using json = nlohmann::json;

namespace {

std::vector<cplx> padded(const Poly& p, int len) {
    std::vector<cplx> c(p.coeffs());
    c.resize(size_t(len), cplx(0.0));
    return c;
}

std::vector<cplx> reversed(std::vector<cplx> c) {
    std::reverse(c.begin(), c.end());
    return c;
}

cplx horner(const std::vector<cplx>& c, cplx z) {
    cplx s = c.back();
    for (size_t k = c.size() - 1; k-- > 0;) s = s * z + c[k];
    return s;
}

}  // namespace

RationalMap::RationalMap(Poly numerator, Poly denominator, std::string name, bool validate)
    : num_(numerator.trimmed(0.0)), den_(denominator.trimmed(0.0)), name_(std::move(name)) {
    degree_ = std::max(num_.degree(), den_.degree());
    if (validate) {
        if (den_.is_zero()) throw std::invalid_argument("map '" + name_ + "': zero denominator");
        if (num_.lead() == cplx(0.0) || den_.lead() == cplx(0.0))
            throw std::invalid_argument("map '" + name_ + "': zero leading coefficient");
        if (degree_ < 2)
            throw std::invalid_argument("map '" + name_ + "': degree at least two is required");
        if (den_.degree() >= 1 && num_.degree() >= 1) {
            // Degenerate (shared-root) maps silently change degree; reject.
            auto rn = solve_polynomial(num_.coeffs());
            auto rd = solve_polynomial(den_.coeffs());
            for (const auto& a : rn.roots)
                for (const auto& b : rd.roots)
                    if (chordal_distance(SpherePoint(a.z), SpherePoint(b.z)) <= 1e-8)
                        throw std::invalid_argument("map '" + name_ +
                                                    "': degenerate map (common root of numerator "
                                                    "and denominator)");
        }
    }
}

RationalMap RationalMap::polynomial(std::vector<cplx> coeffs, std::string name) {
    return RationalMap(Poly(std::move(coeffs)), Poly::constant(1.0), std::move(name));
}

void RationalMap::homogeneous_eval(const SpherePoint& p, cplx& a, cplx& b) const {
    const int d = degree_;
    if (p.at_infinity) {
        // [1 : 0]: only the top homogeneous coefficients survive.
        a = num_.degree() == d ? num_.lead() : cplx(0.0);
        b = den_.degree() == d ? den_.lead() : cplx(0.0);
        return;
    }
    if (std::abs(p.z) <= 1.0) {
        a = num_.eval(p.z);
        b = den_.eval(p.z);
    } else {
        const cplx w = 1.0 / p.z;  // [1 : w]
        a = horner(reversed(padded(num_, d + 1)), w);
        b = horner(reversed(padded(den_, d + 1)), w);
    }
}

SpherePoint RationalMap::evaluate(const SpherePoint& p) const {
    cplx a, b;
    homogeneous_eval(p, a, b);
    const double aa = std::abs(a), ab = std::abs(b);
    if (ab == 0.0) return SpherePoint::infinity();
    if (aa > 1e300 * ab) return SpherePoint::infinity();
    return SpherePoint(a / b);
}

SpherePoint RationalMap::evaluate_n(const SpherePoint& p, int n) const {
    SpherePoint x = p;
    for (int i = 0; i < n; ++i) x = evaluate(x);
    return x;
}

double RationalMap::spherical_derivative(const SpherePoint& p) const {
    const int d = degree_;
    const Poly wr = num_.derivative() * den_ - num_ * den_.derivative();
    cplx z, w;
    if (p.at_infinity) {
        z = 1.0;
        w = 0.0;
    } else if (std::abs(p.z) <= 1.0) {
        z = p.z;
        w = 1.0;
    } else {
        z = 1.0;
        w = 1.0 / p.z;
    }
    // All three forms homogenized to their full degrees; the formula
    //   |W(z,w)| (|z|^2+|w|^2) / (|P(z,w)|^2 + |Q(z,w)|^2)
    // is the spherical derivative, scale-free and total on the sphere.
    auto eval_hom = [&](const Poly& poly, int hom_deg) -> cplx {
        auto c = padded(poly, hom_deg + 1);
        if (w == cplx(1.0)) return horner(c, z);
        return horner(reversed(std::move(c)), w);
    };
    const cplx pv = eval_hom(num_, d);
    const cplx qv = eval_hom(den_, d);
    const cplx wv = eval_hom(wr, 2 * d - 2);
    const double den = std::norm(pv) + std::norm(qv);
    if (den == 0.0) return 0.0;
    return std::abs(wv) * (std::norm(z) + std::norm(w)) / den;
}

cplx RationalMap::chart_derivative(cplx z) const {
    cplx pv, pd, qv, qd;
    num_.eval2(z, pv, pd);
    den_.eval2(z, qv, qd);
    const cplx q2 = qv * qv;
    return (pd * qv - pv * qd) / q2;
}

CriticalSet RationalMap::critical_points() const {
    const int d = degree_;
    const Poly wr = (num_.derivative() * den_ - num_ * den_.derivative()).trimmed(1e-13);
    CriticalSet cs;
    if (!wr.is_zero()) {
        auto rr = solve_polynomial(wr.coeffs());
        for (const auto& r : rr.roots) {
            CriticalPoint cp;
            cp.point = SpherePoint(r.z);
            cp.local_degree = r.multiplicity + 1;
            cs.points.push_back(cp);
        }
    }
    std::sort(cs.points.begin(), cs.points.end(), [](const CriticalPoint& a, const CriticalPoint& b) {
        if (a.point.re() != b.point.re()) return a.point.re() < b.point.re();
        return a.point.im() < b.point.im();
    });
    const int inf_mult = (2 * d - 2) - (wr.is_zero() ? 0 : wr.degree());
    if (inf_mult > 0) {
        CriticalPoint cp;
        cp.point = SpherePoint::infinity();
        cp.local_degree = inf_mult + 1;
        cs.points.push_back(cp);
    }
    return cs;
}

PreimageSet RationalMap::preimages(const SpherePoint& y, const SolveOptions& opts) const {
    const int d = degree_;
    PreimageSet out;
    std::vector<cplx> c;
    int inf_mult = 0;
    if (y.at_infinity) {
        c = den_.coeffs();
        inf_mult = d - den_.degree();
    } else {
        c = padded(num_, d + 1);
        const auto qc = padded(den_, d + 1);
        for (int k = 0; k <= d; ++k) c[size_t(k)] -= y.z * qc[size_t(k)];
        // Leading cancellation moves preimages to infinity.
        const double scale =
            1e-12 * (std::abs(num_.lead()) + std::abs(y.z) * std::abs(den_.lead()) + 1e-300);
        while (c.size() > 1 && std::abs(c.back()) <= scale) {
            c.pop_back();
            ++inf_mult;
        }
    }
    out.certified = true;
    if (c.size() > 1) {
        auto rr = solve_polynomial(c, opts);
        for (const auto& r : rr.roots) {
            for (int m = 0; m < r.multiplicity; ++m) {
                out.points.push_back(SpherePoint(r.z));
                out.residuals.push_back(r.residual);
            }
            out.certified = out.certified && r.certified;
        }
    }
    for (int m = 0; m < inf_mult; ++m) {
        out.points.push_back(SpherePoint::infinity());
        out.residuals.push_back(0.0);
    }
    // Deterministic ordering: finite by (re, im), infinity last.
    std::vector<size_t> order(out.points.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        const auto& pa = out.points[a];
        const auto& pb = out.points[b];
        if (pa.at_infinity != pb.at_infinity) return pb.at_infinity;
        if (pa.re() != pb.re()) return pa.re() < pb.re();
        return pa.im() < pb.im();
    });
    PreimageSet sorted;
    sorted.certified = out.certified;
    for (size_t i : order) {
        sorted.points.push_back(out.points[i]);
        sorted.residuals.push_back(out.residuals[i]);
    }
    return sorted;
}

RationalMap RationalMap::composed_with(const RationalMap& inner, long degree_cap) const {
    const long dd = long(degree()) * long(inner.degree());
    if (dd > degree_cap)
        throw std::runtime_error("composition degree " + std::to_string(dd) +
                                 " exceeds the coefficient cap " + std::to_string(degree_cap));
    const int df = degree();
    const auto p = padded(num_, df + 1);
    const auto q = padded(den_, df + 1);
    const Poly& A = inner.num_;
    const Poly& B = inner.den_;
    // f(A/B) cleared of denominators: sum_i c_i A^i B^(df-i).
    std::vector<Poly> apow(size_t(df) + 1), bpow(size_t(df) + 1);
    apow[0] = Poly::constant(1.0);
    bpow[0] = Poly::constant(1.0);
    for (int i = 1; i <= df; ++i) {
        apow[size_t(i)] = apow[size_t(i - 1)] * A;
        bpow[size_t(i)] = bpow[size_t(i - 1)] * B;
    }
    Poly n_out, d_out;
    for (int i = 0; i <= df; ++i) {
        const Poly term = apow[size_t(i)] * bpow[size_t(df - i)];
        if (p[size_t(i)] != cplx(0.0)) n_out = n_out + term.scaled(p[size_t(i)]);
        if (q[size_t(i)] != cplx(0.0)) d_out = d_out + term.scaled(q[size_t(i)]);
    }
    n_out = n_out.trimmed(0.0);
    d_out = d_out.trimmed(0.0);
    const double s = std::max(n_out.max_abs_coeff(), d_out.max_abs_coeff());
    if (s > 0.0 && (s > 1e100 || s < 1e-100)) {
        n_out = n_out.scaled(1.0 / s);
        d_out = d_out.scaled(1.0 / s);
    }
    return RationalMap(n_out, d_out, name_, false);
}

RationalMap RationalMap::iterate(int n, long degree_cap) const {
    if (n < 1) throw std::invalid_argument("iterate: n >= 1 required");
    double logd = double(n) * std::log2(double(degree()));
    if (logd > std::log2(double(degree_cap)) + 1e-9)
        throw std::runtime_error("iterate: degree " + std::to_string(degree()) + "^" +
                                 std::to_string(n) + " exceeds the coefficient cap");
    RationalMap acc = *this;
    for (int k = 1; k < n; ++k) acc = composed_with(acc, degree_cap);
    return acc;
}

RationalMap RationalMap::conjugate_by_inversion() const {
    const int d = degree_;
    Poly n(reversed(padded(den_, d + 1)));
    Poly dd(reversed(padded(num_, d + 1)));
    return RationalMap(n.trimmed(0.0), dd.trimmed(0.0), name_ + "^inv", false);
}

double RationalMap::log_coeff_sum() const {
    return std::log(std::max(num_.sum_abs_coeff(), den_.sum_abs_coeff()) + 1e-300);
}

// ---------------------------------------------------------------------------
// critical orbit classification

namespace {

// Newton refinement of a fixed point of f^p near start; works in the chart
// at infinity when the point is large. Returns the polished cycle.
bool polish_cycle(const RationalMap& f, SpherePoint start, int p,
                  std::vector<SpherePoint>& cycle_out) {
    const bool invert = start.at_infinity || std::abs(start.z) > 1.0;
    const RationalMap g = invert ? f.conjugate_by_inversion() : f;
    cplx x = start.at_infinity ? cplx(0.0) : (invert ? 1.0 / start.z : start.z);
    bool ok = false;
    for (int it = 0; it < 200; ++it) {
        cplx v = x, deriv = 1.0;
        bool bad = false;
        for (int j = 0; j < p; ++j) {
            const cplx dv = g.chart_derivative(v);
            if (!std::isfinite(dv.real()) || !std::isfinite(dv.imag())) {
                bad = true;
                break;
            }
            deriv *= dv;
            const SpherePoint nv = g.evaluate(SpherePoint(v));
            if (nv.at_infinity || std::abs(nv.z) > 1e8) {
                bad = true;
                break;
            }
            v = nv.z;
        }
        if (bad) break;
        const cplx gx = v - x;
        const cplx gp = deriv - 1.0;
        if (std::abs(gx) < 1e-14 * (1.0 + std::abs(x))) {
            ok = true;
            break;
        }
        cplx step;
        if (std::abs(gp) > 1e-12) {
            step = gx / gp;
        } else {
            // Multiple (parabolic) fixed point: damped fixed-point step.
            step = -0.5 * gx;
        }
        if (std::abs(step) > 0.5 * (1.0 + std::abs(x))) break;
        x -= step;
        if (std::abs(step) < 1e-15 * (1.0 + std::abs(x))) {
            ok = true;
            break;
        }
    }
    if (!ok) return false;
    SpherePoint z0 = invert ? (x == cplx(0.0) ? SpherePoint::infinity() : SpherePoint(1.0 / x))
                            : SpherePoint(x);
    cycle_out.clear();
    SpherePoint v = z0;
    for (int j = 0; j < p; ++j) {
        cycle_out.push_back(v);
        v = f.evaluate(v);
    }
    return chordal_distance(v, z0) < 1e-6;
}

}  // namespace

CriticalOrbitFate classify_critical_orbit(const RationalMap& f, const SpherePoint& c,
                                          const JuliaFlagOptions& opts) {
    CriticalOrbitFate fate;
    const bool poly = f.is_polynomial();
    double escape_radius = 0.0;
    if (poly) {
        escape_radius = 1.0;
        for (int k = 0; k < f.numerator().degree(); ++k)
            escape_radius += std::abs(f.numerator()[size_t(k)]) / std::abs(f.numerator().lead());
        escape_radius = std::max(escape_radius, 2.0);
    }

    std::vector<SpherePoint> tail;  // recent window for cycle probes
    const int window = 2 * opts.max_probe_period + 4;
    SpherePoint x = c;
    int escape_run = 0;
    for (int n = 0; n < opts.horizon; ++n) {
        x = f.evaluate(x);
        if (poly) {
            if (x.at_infinity || std::abs(x.z) > escape_radius) {
                if (++escape_run > 3 || x.at_infinity) {
                    fate.escaped = true;
                    fate.attracted = true;  // infinity is (super)attracting for polynomials
                    return fate;
                }
            } else {
                escape_run = 0;
            }
        }
        tail.push_back(x);
        if (int(tail.size()) > window) tail.erase(tail.begin());
        for (int p = 1; p <= opts.max_probe_period && p < int(tail.size()); ++p) {
            const double dd = chordal_distance(tail.back(), tail[tail.size() - 1 - size_t(p)]);
            if (dd < opts.cycle_tol) {
                std::vector<SpherePoint> cyc;
                if (polish_cycle(f, tail.back(), p, cyc)) {
                    double mult = 1.0;
                    for (const auto& pt : cyc) mult *= f.spherical_derivative(pt);
                    fate.cycle_period = p;
                    fate.cycle_multiplier_abs = mult;
                    fate.cycle = cyc;
                    if (mult <= 1.0 + 1e-6) {
                        fate.attracted = true;
                    } else {
                        fate.in_julia = true;  // landed on a repelling cycle
                    }
                    return fate;
                }
            }
        }
    }
    // No tight convergence; probe loosely for slow (parabolic) attraction.
    for (int p = 1; p <= opts.max_probe_period && p < int(tail.size()); ++p) {
        const double dd = chordal_distance(tail.back(), tail[tail.size() - 1 - size_t(p)]);
        if (dd < 1e-2) {
            std::vector<SpherePoint> cyc;
            if (polish_cycle(f, tail.back(), p, cyc)) {
                double mult = 1.0;
                for (const auto& pt : cyc) mult *= f.spherical_derivative(pt);
                fate.cycle_period = p;
                fate.cycle_multiplier_abs = mult;
                fate.cycle = cyc;
                if (mult <= 1.0 + 1e-6) {
                    fate.attracted = true;
                    return fate;
                }
            }
        }
    }
    fate.in_julia = true;
    return fate;
}

CriticalSet flagged_critical_points(const RationalMap& f,
                                    const std::optional<std::vector<int>>& override_indices,
                                    const JuliaFlagOptions& opts) {
    CriticalSet cs = f.critical_points();
    if (override_indices) {
        for (auto& p : cs.points) p.in_julia = false;
        for (int idx : *override_indices)
            if (idx >= 0 && idx < int(cs.points.size())) cs.points[size_t(idx)].in_julia = true;
        return cs;
    }
    for (auto& p : cs.points) p.in_julia = classify_critical_orbit(f, p.point, opts).in_julia;
    return cs;
}

int ell_max(const RationalMap&, const CriticalSet& crit) {
    int m = 1;
    for (const auto& p : crit.points)
        if (p.in_julia) m = std::max(m, p.local_degree);
    return m;
}

long ell_max_hat(const RationalMap& f, const CriticalSet& crit) {
    // Exact without critical connections; otherwise the coarse bound
    // 2^(2 deg - 2) is the honest fallback.
    std::vector<SpherePoint> julia_crits;
    for (const auto& p : crit.points)
        if (p.in_julia) julia_crits.push_back(p.point);
    if (julia_crits.empty()) return 1;
    bool connection = false;
    for (const auto& c : julia_crits) {
        SpherePoint x = c;
        for (int n = 0; n < 64 && !connection; ++n) {
            x = f.evaluate(x);
            for (const auto& c2 : julia_crits)
                if (chordal_distance(x, c2) < 1e-9) connection = true;
        }
    }
    if (!connection) return ell_max(f, crit);
    const int e = 2 * f.degree() - 2;
    return e >= 62 ? std::numeric_limits<long>::max() : (1l << e);
}

// ---------------------------------------------------------------------------
// registry

namespace {

Poly poly_from_json(const json& arr, const std::string& entry, const std::string& field) {
    if (!arr.is_array() || arr.empty())
        throw std::runtime_error("registry entry '" + entry + "': field '" + field +
                                 "' must be a nonempty array of [re, im] pairs");
    std::vector<cplx> c;
    for (const auto& v : arr) {
        if (!v.is_array() || v.size() != 2)
            throw std::runtime_error("registry entry '" + entry + "': field '" + field +
                                     "' has a malformed coefficient");
        c.emplace_back(v[0].get<double>(), v[1].get<double>());
    }
    return Poly(std::move(c));
}

RegistryEntry entry_from_json(const json& j) {
    const std::string name = j.value("name", std::string("<unnamed>"));
    RegistryEntry e{RationalMap(poly_from_json(j.at("numerator"), name, "numerator"),
                                j.contains("denominator")
                                    ? poly_from_json(j.at("denominator"), name, "denominator")
                                    : Poly::constant(1.0),
                                name),
                    {}};
    if (j.contains("annotations")) {
        const auto& a = j.at("annotations");
        e.annotations.expected_class = a.value("expected_class", std::string("other"));
        if (a.contains("critical_in_julia"))
            e.annotations.critical_in_julia = a.at("critical_in_julia").get<std::vector<int>>();
    }
    return e;
}

}  // namespace

std::vector<RegistryEntry> load_registry(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("registry file not found: " + path);
    json j;
    in >> j;
    const json& maps = j.is_array() ? j : j.at("maps");
    std::vector<RegistryEntry> out;
    for (const auto& m : maps) out.push_back(entry_from_json(m));
    return out;
}

std::vector<RegistryEntry> builtin_corpus() {
    auto quad = [](cplx c, const std::string& name) {
        return RationalMap::polynomial({c, 0.0, 1.0}, name);
    };
    std::vector<RegistryEntry> out;
    out.push_back({quad(0.0, "z2"), {"hyperbolic", std::vector<int>{}}});
    out.push_back({quad(-2.0, "z2-2"), {"semi-hyperbolic", std::vector<int>{0}}});
    out.push_back({quad(-1.0, "z2-1"), {"hyperbolic", std::vector<int>{}}});
    out.push_back({quad(cplx(0.0, 1.0), "z2+i"), {"semi-hyperbolic", std::vector<int>{0}}});
    out.push_back({quad(0.25, "z2+1_4"), {"parabolic", std::vector<int>{}}});
    out.push_back({RationalMap(Poly({1.0, 0.0, -1.0}), Poly({0.0, 1.0}), "1_z-z"),
                   {"parabolic", std::vector<int>{}}});
    return out;
}

}  // namespace rmlab
