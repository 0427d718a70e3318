#include "rmlab/periodic.hpp"

#include "rmlab/parallel.hpp"
#include "rmlab/roots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace rmlab {

const char* to_string(OrbitKind k) {
    switch (k) {
        case OrbitKind::repelling: return "repelling";
        case OrbitKind::attracting: return "attracting";
        default: return "neutral";
    }
}

namespace {

// Charted local derivative along one step z -> f(z); charts are chosen so
// that both coordinates have modulus <= 1.
cplx step_derivative(const RationalMap& f, const RationalMap& f_conj, const SpherePoint& z,
                     const SpherePoint& fz) {
    const bool in_inv = z.at_infinity || std::abs(z.z) > 1.0;
    const bool out_inv = fz.at_infinity || std::abs(fz.z) > 1.0;
    if (!in_inv && !out_inv) return f.chart_derivative(z.z);
    if (in_inv && out_inv) {
        const cplx w = z.at_infinity ? cplx(0.0) : 1.0 / z.z;
        return f_conj.chart_derivative(w);
    }
    if (!in_inv && out_inv) {
        // d(1/f)/dz = -f'/f^2
        cplx pv, pd, qv, qd;
        f.numerator().eval2(z.z, pv, pd);
        f.denominator().eval2(z.z, qv, qd);
        const cplx fp = pd * qv - pv * qd;  // f' q^2
        return -fp / (pv * pv);
    }
    // in_inv && !out_inv: d(f(1/w))/dw = -f'(1/w)/w^2, evaluated without
    // leaving the chart by reversing coefficients.
    const cplx w = z.at_infinity ? cplx(0.0) : 1.0 / z.z;
    const int d = f.degree();
    std::vector<cplx> pn(f.numerator().coeffs()), pq(f.denominator().coeffs());
    pn.resize(size_t(d) + 1, cplx(0.0));
    pq.resize(size_t(d) + 1, cplx(0.0));
    std::reverse(pn.begin(), pn.end());
    std::reverse(pq.begin(), pq.end());
    Poly rn{std::vector<cplx>(pn)}, rq{std::vector<cplx>(pq)};
    cplx av, ad, bv, bd;
    rn.eval2(w, av, ad);
    rq.eval2(w, bv, bd);
    // f(1/w) = rn(w)/rq(w); chain rule on the quotient.
    return (ad * bv - av * bd) / (bv * bv);
}

}  // namespace

cplx cycle_multiplier(const RationalMap& f, const std::vector<SpherePoint>& orbit) {
    const RationalMap f_conj = f.conjugate_by_inversion();
    cplx m = 1.0;
    for (size_t j = 0; j < orbit.size(); ++j) {
        const SpherePoint& z = orbit[j];
        const SpherePoint& fz = orbit[(j + 1) % orbit.size()];
        m *= step_derivative(f, f_conj, z, fz);
    }
    return m;
}

namespace {

// Pointwise Newton for fixed points of f^n; damped fixed-point fallback at
// (near-)parabolic multiple roots. Works on finite moderate points.
bool polish_periodic(const RationalMap& f, int n, cplx& x, double residual_tol) {
    for (int it = 0; it < 200; ++it) {
        cplx v = x, dv = 1.0;
        bool bad = false;
        for (int j = 0; j < n; ++j) {
            const cplx fd = f.chart_derivative(v);
            if (!std::isfinite(fd.real()) || !std::isfinite(fd.imag())) {
                bad = true;
                break;
            }
            dv *= fd;
            const SpherePoint nv = f.evaluate(SpherePoint(v));
            if (nv.at_infinity || std::abs(nv.z) > 1e9) {
                bad = true;
                break;
            }
            v = nv.z;
        }
        if (bad) return false;
        const cplx g = v - x;
        const double ga = std::abs(g);
        if (ga < residual_tol * 0.01 * (1.0 + std::abs(x))) return true;
        const cplx gp = dv - 1.0;
        cplx step;
        if (std::abs(gp) > 1e-9)
            step = g / gp;
        else
            step = -0.5 * g;  // parabolic: contraction toward the multiple root
        const double sa = std::abs(step);
        if (!std::isfinite(sa) || sa > 0.3 * (1.0 + std::abs(x))) return false;
        x -= step;
        if (sa < 1e-16 * (1.0 + std::abs(x))) return true;
    }
    // Accept slow (parabolic) convergence if the residual ended up small.
    SpherePoint v(x);
    for (int j = 0; j < n; ++j) v = f.evaluate(v);
    return chordal_distance(v, SpherePoint(x)) < residual_tol * 100.0;
}

struct Candidate {
    SpherePoint z;
    int multiplicity = 1;
    bool certified = true;
};

// All preimages in deterministic (re, im) order, closed-form for quadratics.
bool all_preimages_fast(const RationalMap& f, const SpherePoint& y,
                        std::vector<SpherePoint>& out) {
    out.clear();
    if (f.degree() == 2 && !y.at_infinity) {
        const Poly& P = f.numerator();
        const Poly& Q = f.denominator();
        const cplx a = P[2] - y.z * Q[2];
        const cplx b = P[1] - y.z * Q[1];
        const cplx c = P[0] - y.z * Q[0];
        const double scale = std::abs(P[2]) + std::abs(y.z) * std::abs(Q[2]);
        if (std::abs(a) > 1e-12 * (scale + 1e-300)) {
            const cplx disc = b * b - 4.0 * a * c;
            cplx s = std::sqrt(disc);
            if (std::real(std::conj(b) * s) < 0.0) s = -s;
            const cplx q = -0.5 * (b + s);
            cplx r0, r1;
            if (q == cplx(0.0)) {
                r0 = cplx(0.0);
                r1 = -b / a;
            } else {
                r0 = q / a;
                r1 = c / q;
            }
            if (r1.real() < r0.real() || (r1.real() == r0.real() && r1.imag() < r0.imag()))
                std::swap(r0, r1);
            out.push_back(SpherePoint(r0));
            out.push_back(SpherePoint(r1));
            return true;
        }
    }
    const PreimageSet pre = f.preimages(y);
    if (pre.points.size() != size_t(f.degree())) return false;
    out = pre.points;
    return true;
}

// Indexed backward step: the k-th preimage in deterministic (re, im) order.
bool branch_preimage(const RationalMap& f, const SpherePoint& y, int k, SpherePoint& out) {
    std::vector<SpherePoint> pre;
    if (!all_preimages_fast(f, y, pre)) return false;
    out = pre[size_t(k) % pre.size()];
    return true;
}

// Median ln(cancellation) of Horner evaluation on rings around the
// geometric-mean root magnitude; large values mean the expanded
// coefficients cannot resolve the roots.
double cancellation_loss(const Poly& gp) {
    const auto& c = gp.coeffs();
    const int d = gp.degree();
    double r0 = 1.0;
    if (std::abs(c[0]) > 0.0 && std::abs(c[size_t(d)]) > 0.0) {
        const double le = (std::log(std::abs(c[0])) - std::log(std::abs(c[size_t(d)]))) / d;
        r0 = std::exp(std::min(std::max(le, -50.0), 50.0));
    }
    std::vector<double> losses;
    for (double rf : {0.7, 1.0, 1.4}) {
        for (int j = 0; j < 12; ++j) {
            const double th = 2.0 * 3.14159265358979323846 * (double(j) + 0.3) / 12.0;
            ScaledCplx v, dv, b;
            scaled_eval(c, r0 * rf * cplx(std::cos(th), std::sin(th)), v, dv, b);
            if (b.is_zero() || v.is_zero()) continue;
            losses.push_back(b.log_abs() - v.log_abs());
        }
    }
    if (losses.empty()) return 0.0;
    std::sort(losses.begin(), losses.end());
    return losses[losses.size() / 2];
}

// Number of period-n solutions the numerator of f^n(z) - z carries (the
// finite ones); the expanded-coefficient route should recover about this
// many polishable candidates or it is not trustworthy.
void coefficient_candidates(const RationalMap& f, int n, const PeriodicOptions& opts,
                            std::vector<Candidate>& out, bool& usable, int& expected_degree) {
    usable = false;
    expected_degree = 0;
    RationalMap fn = f.iterate(n, opts.solver_cap);
    // numerator of f^n(z) - z
    const int d = std::max(fn.numerator().degree(), fn.denominator().degree() + 1);
    std::vector<cplx> g(size_t(d) + 1, cplx(0.0));
    for (int k = 0; k <= fn.numerator().degree(); ++k) g[size_t(k)] += fn.numerator()[size_t(k)];
    for (int k = 0; k <= fn.denominator().degree(); ++k)
        g[size_t(k) + 1] -= fn.denominator()[size_t(k)];
    Poly gp{std::move(g)};
    gp = gp.trimmed(0.0);
    if (gp.is_zero()) return;
    expected_degree = gp.degree();
    if (cancellation_loss(gp) > opts.coeff_loss_limit) return;
    const auto rr = solve_polynomial(gp.coeffs());
    for (const auto& r : rr.roots) {
        Candidate c;
        c.z = SpherePoint(r.z);
        c.multiplicity = r.multiplicity;
        c.certified = r.certified;
        out.push_back(c);
    }
    usable = true;
}

void itinerary_candidates(const RationalMap& f, int n, const PeriodicOptions& opts,
                          std::vector<Candidate>& out, bool& complete) {
    complete = false;  // heuristic search, no completeness guarantee
    const int d = f.degree();
    long total = 1;
    for (int i = 0; i < n; ++i) {
        total *= d;
        if (total > opts.solver_cap) return;
    }
    const size_t ntotal = size_t(total);
    std::vector<Candidate> found(ntotal);
    std::vector<char> ok(ntotal, 0);
    parallel_for(size_t(total), [&](size_t word) {
        // Cyclic backward iteration along the branch word, branches tracked
        // by continuity (nearest preimage to the previous pass) after the
        // first pass fixes an itinerary.
        std::vector<SpherePoint> track(static_cast<size_t>(n));
        SpherePoint x(0.41, 0.327);
        long w = long(word);
        bool valid = true;
        for (int j = 0; j < n && valid; ++j) {
            const int k = int(w % d);
            w /= d;
            valid = branch_preimage(f, x, k, x);
            track[size_t(j)] = x;
        }
        if (!valid) return;
        std::vector<SpherePoint> pre;
        for (int cyc = 0; cyc < opts.max_backward_cycles; ++cyc) {
            const SpherePoint prev = x;
            for (int j = 0; j < n; ++j) {
                if (!all_preimages_fast(f, x, pre)) return;
                size_t best = 0;
                double bd = std::numeric_limits<double>::max();
                for (size_t i = 0; i < pre.size(); ++i) {
                    const double dd = chordal_distance(pre[i], track[size_t(j)]);
                    if (dd < bd) {
                        bd = dd;
                        best = i;
                    }
                }
                x = pre[best];
                track[size_t(j)] = x;
            }
            if (chordal_distance(prev, x) < 1e-13) break;
        }
        if (x.at_infinity) return;
        found[word] = Candidate{x, 1, true};
        ok[word] = 1;
    });
    for (size_t w = 0; w < ntotal; ++w)
        if (ok[w]) out.push_back(found[w]);
}

void attracting_candidates(const RationalMap& f, int n, std::vector<Candidate>& out) {
    const CriticalSet crit = f.critical_points();
    for (const auto& cp : crit.points) {
        const auto fate = classify_critical_orbit(f, cp.point);
        if (!fate.attracted || fate.cycle.empty()) continue;
        if (int(fate.cycle.size()) != n) continue;
        for (const auto& p : fate.cycle)
            if (p.finite()) out.push_back(Candidate{p, 1, true});
    }
}

}  // namespace

std::vector<PeriodicOrbit> periodic_points(const RationalMap& f, int n,
                                           const PeriodicOptions& opts, bool* route_complete) {
    if (n < 1) throw std::invalid_argument("periodic_points: n >= 1 required");
    double logd = double(n) * std::log2(double(f.degree()));
    if (logd > std::log2(double(opts.solver_cap)) + 1e-9)
        throw std::runtime_error("periodic_points: deg^n exceeds the solver cap");

    std::vector<Candidate> cands;
    bool coeff_ok = false;
    int expected_degree = 0;
    coefficient_candidates(f, n, opts, cands, coeff_ok, expected_degree);

    // Polish pointwise (well conditioned regardless of route) and keep only
    // candidates whose residual survives.
    auto polish_and_filter = [&](std::vector<Candidate>& v) {
        std::vector<Candidate> kept;
        for (auto& c : v) {
            if (c.z.finite()) {
                cplx x = c.z.z;
                if (std::abs(x) < 1e9 && polish_periodic(f, n, x, opts.residual_tol))
                    c.z = SpherePoint(x);
            }
            SpherePoint w = c.z;
            for (int j = 0; j < n; ++j) w = f.evaluate(w);
            if (chordal_distance(w, c.z) <= opts.residual_tol * 100.0) kept.push_back(c);
        }
        v = std::move(kept);
    };
    polish_and_filter(cands);

    int recovered = 0;
    for (const auto& c : cands) recovered += c.multiplicity;
    const bool coeff_complete = coeff_ok && recovered * 10 >= expected_degree * 9;
    if (!coeff_complete) {
        // Expanded coefficients could not resolve (enough of) the roots:
        // locate periodic points by backward itineraries instead.
        std::vector<Candidate> extra;
        bool complete = false;
        itinerary_candidates(f, n, opts, extra, complete);
        attracting_candidates(f, n, extra);
        polish_and_filter(extra);
        cands.insert(cands.end(), extra.begin(), extra.end());
    }
    if (route_complete) *route_complete = coeff_complete;

    // Deduplicate into representatives, keeping the largest multiplicity.
    std::vector<Candidate> reps;
    for (const auto& c : cands) {
        bool merged = false;
        for (auto& r : reps) {
            if (chordal_distance(r.z, c.z) < 1e-7) {
                r.multiplicity = std::max(r.multiplicity, c.multiplicity);
                r.certified = r.certified && c.certified;
                merged = true;
                break;
            }
        }
        if (!merged) reps.push_back(c);
    }

    // The cycle through infinity is handled exactly.
    {
        SpherePoint x = SpherePoint::infinity();
        bool periodic = true;
        std::vector<SpherePoint> orbit;
        for (int j = 0; j < n; ++j) {
            orbit.push_back(x);
            x = f.evaluate(x);
            if (j + 1 < n && x.at_infinity) {  // period divides j+1 < n
                periodic = false;
                break;
            }
        }
        if (periodic && x.at_infinity) reps.push_back(Candidate{SpherePoint::infinity(), 1, true});
    }

    std::vector<PeriodicOrbit> orbits;
    std::vector<char> used(reps.size(), 0);
    for (size_t i = 0; i < reps.size(); ++i) {
        if (used[i]) continue;
        used[i] = 1;
        const SpherePoint p0 = reps[i].z;
        // residual check
        SpherePoint v = p0;
        std::vector<SpherePoint> orbit;
        for (int j = 0; j < n; ++j) {
            orbit.push_back(v);
            v = f.evaluate(v);
        }
        if (chordal_distance(v, p0) > opts.residual_tol * 100.0) continue;
        // exact period: no proper divisor may close the loop
        bool exact = true;
        for (int dd = 1; dd < n && exact; ++dd) {
            if (n % dd != 0) continue;
            if (chordal_distance(orbit[size_t(dd % n)], p0) < opts.exact_period_tol) exact = false;
        }
        if (!exact) continue;
        // consume the other representatives on this orbit
        int mult = reps[i].multiplicity;
        bool cert = reps[i].certified;
        for (size_t j = i + 1; j < reps.size(); ++j) {
            if (used[j]) continue;
            for (const auto& op : orbit) {
                if (chordal_distance(reps[j].z, op) < 1e-7) {
                    used[j] = 1;
                    mult = std::max(mult, reps[j].multiplicity);
                    cert = cert && reps[j].certified;
                    break;
                }
            }
        }
        PeriodicOrbit po;
        po.points = orbit;
        po.period = n;
        po.root_multiplicity = mult;
        po.certified = cert;
        po.multiplier = cycle_multiplier(f, orbit);
        const double ma = std::abs(po.multiplier);
        po.chi = ma > 0.0 ? std::log(ma) / double(n) : -std::numeric_limits<double>::infinity();
        if (std::abs(ma - 1.0) <= opts.neutral_band)
            po.classification = OrbitKind::neutral;
        else if (ma > 1.0)
            po.classification = OrbitKind::repelling;
        else
            po.classification = OrbitKind::attracting;
        orbits.push_back(std::move(po));
    }
    std::sort(orbits.begin(), orbits.end(), [](const PeriodicOrbit& a, const PeriodicOrbit& b) {
        const auto& pa = a.points.front();
        const auto& pb = b.points.front();
        if (pa.at_infinity != pb.at_infinity) return pb.at_infinity;
        if (pa.re() != pb.re()) return pa.re() < pb.re();
        return pa.im() < pb.im();
    });
    return orbits;
}

ChiPerEstimate chi_per(const RationalMap& f, int period_cap, const PeriodicOptions& opts) {
    ChiPerEstimate est;
    est.period_cap = period_cap;
    bool first = true;
    for (int n = 1; n <= period_cap; ++n) {
        double logd = double(n) * std::log2(double(f.degree()));
        if (logd > std::log2(double(opts.solver_cap)) + 1e-9) {
            est.period_cap = n - 1;
            break;
        }
        bool route_complete = true;
        const auto orbits = periodic_points(f, n, opts, &route_complete);
        if (!route_complete) est.complete = false;
        double mn = std::numeric_limits<double>::max();
        bool any = false;
        const PeriodicOrbit* argmin = nullptr;
        for (const auto& o : orbits) {
            if (o.classification == OrbitKind::neutral) {
                est.neutral_found = true;
                for (const auto& p : o.points) est.neutral_points.push_back(p);
            }
            if (o.classification != OrbitKind::repelling) continue;
            any = true;
            if (o.chi < mn) {
                mn = o.chi;
                argmin = &o;
            }
        }
        if (any) {
            est.per_period_min[n] = mn;
            if (first || mn < est.chi_per_hat) {
                est.chi_per_hat = mn;
                est.min_point = argmin->points.front();
                est.has_min_point = true;
            }
            first = false;
        }
    }
    return est;
}

UhpResult uhp_check(const RationalMap& f, int period_cap, double lambda,
                    const PeriodicOptions& opts) {
    if (lambda <= 1.0) throw std::invalid_argument("uhp_check: lambda > 1 required");
    UhpResult res;
    res.holds = true;
    const double lnl = std::log(lambda);
    double worst_chi = std::numeric_limits<double>::max();
    for (int n = 1; n <= period_cap; ++n) {
        double logd = double(n) * std::log2(double(f.degree()));
        if (logd > std::log2(double(opts.solver_cap)) + 1e-9) break;
        for (const auto& o : periodic_points(f, n, opts)) {
            if (o.classification == OrbitKind::neutral) {
                // A neutral cycle certifies failure: cycles shadowing it have
                // exponents decaying to zero, below any ln(lambda) > 0.
                res.holds = false;
                if (o.chi < worst_chi) {
                    worst_chi = o.chi;
                    res.worst = o;
                    res.have_worst = true;
                }
                continue;
            }
            if (o.classification != OrbitKind::repelling) continue;
            if (o.chi < worst_chi) {
                worst_chi = o.chi;
                res.worst = o;
                res.have_worst = true;
            }
            if (o.chi < lnl - 1e-12) res.holds = false;
        }
    }
    return res;
}

OptimalAlpha optimal_alpha(const RationalMap& f, int period_cap, const PeriodicOptions& opts) {
    const auto est = chi_per(f, period_cap, opts);
    OptimalAlpha oa;
    if (est.per_period_min.empty() || est.chi_per_hat <= 1e-9) {
        oa.unbounded = true;
        return oa;
    }
    oa.value = std::log(double(f.degree())) / est.chi_per_hat;
    return oa;
}

void export_orbits_csv(const std::vector<PeriodicOrbit>& orbits, const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "w");
    if (!fp) throw std::runtime_error("cannot open " + path + " for writing");
    std::fprintf(fp, "period,orbit_id,chi,multiplier_abs,classification,representative_re,"
                     "representative_im\n");
    int id = 0;
    for (const auto& o : orbits) {
        const auto& p = o.points.front();
        if (p.at_infinity)
            std::fprintf(fp, "%d,%d,%.17g,%.17g,%s,inf,0\n", o.period, id, o.chi,
                         std::abs(o.multiplier), to_string(o.classification));
        else
            std::fprintf(fp, "%d,%d,%.17g,%.17g,%s,%.17g,%.17g\n", o.period, id, o.chi,
                         std::abs(o.multiplier), to_string(o.classification), p.re(), p.im());
        ++id;
    }
    std::fclose(fp);
}

}  // namespace rmlab
