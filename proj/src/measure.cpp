#include "rmlab/measure.hpp"

#include "rmlab/parallel.hpp"
#include "rmlab/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace rmlab {

using json = nlohmann::json;

namespace {

// One backward step: uniform choice among the deg(f) preimages counted with
// multiplicity. Quadratics take the closed-form path; everything else goes
// through the certified solver.
SpherePoint backward_step(const RationalMap& f, const SpherePoint& y, Rng& rng, bool& ok) {
    ok = true;
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
            return rng.below(2) == 0 ? SpherePoint(r0) : SpherePoint(r1);
        }
    }
    const PreimageSet pre = f.preimages(y);
    if (pre.points.size() != size_t(f.degree())) {
        ok = false;
        return y;
    }
    for (double r : pre.residuals) {
        if (r > 1e-6) {
            ok = false;
            return y;
        }
    }
    return pre.points[rng.below(pre.points.size())];
}

}  // namespace

EmpiricalMeasure sample_measure(const RationalMap& f, int chains, int depth, int burn_in,
                                std::uint64_t seed) {
    if (chains < 1) throw std::invalid_argument("sample_measure: chains >= 1 required");
    if (!(depth > burn_in && burn_in >= 0))
        throw std::invalid_argument("sample_measure: depth > burn_in >= 0 required");

    const size_t per_chain = size_t(depth - burn_in);
    const size_t nchains = size_t(chains);
    std::vector<std::vector<SpherePoint>> chain_atoms(nchains);
    std::vector<std::string> failures(nchains);

    parallel_for(size_t(chains), [&](size_t ci) {
        Rng rng(mix_seed(seed, ci));
        SpherePoint x(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0));
        auto& out = chain_atoms[ci];
        out.reserve(per_chain);
        for (int step = 0; step < depth; ++step) {
            bool ok = true;
            x = backward_step(f, x, rng, ok);
            if (!ok) {
                failures[ci] = "chain " + std::to_string(ci) + " aborted at step " +
                               std::to_string(step) + " (preimage solver failure)";
                out.clear();
                return;
            }
            if (step >= burn_in) out.push_back(x);
        }
    });

    EmpiricalMeasure mu;
    mu.provenance = {f.name(), seed, chains, burn_in, depth};
    mu.chain_offsets.push_back(0);
    for (int ci = 0; ci < chains; ++ci) {
        if (!failures[size_t(ci)].empty()) {
            mu.chain_failures.push_back(failures[size_t(ci)]);
            continue;
        }
        mu.atoms.insert(mu.atoms.end(), chain_atoms[size_t(ci)].begin(),
                        chain_atoms[size_t(ci)].end());
        mu.chain_offsets.push_back(mu.atoms.size());
    }
    if (mu.atoms.empty()) throw std::runtime_error("sample_measure: all chains failed");
    const double w = 1.0 / double(mu.atoms.size());
    mu.weights.assign(mu.atoms.size(), w);
    mu.total_weight = 1.0;
    return mu;
}

EmpiricalMeasure merge(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
    if (a.atoms.empty()) return b;
    if (b.atoms.empty()) return a;
    if (a.provenance.map_name != b.provenance.map_name)
        throw std::invalid_argument("merge: measures come from different maps ('" +
                                    a.provenance.map_name + "' vs '" + b.provenance.map_name +
                                    "')");
    EmpiricalMeasure out;
    out.provenance = a.provenance;
    out.provenance.chains = a.chains() + b.chains();
    const double wsum = a.total_weight + b.total_weight;
    out.atoms = a.atoms;
    out.atoms.insert(out.atoms.end(), b.atoms.begin(), b.atoms.end());
    out.weights.reserve(out.atoms.size());
    for (double w : a.weights) out.weights.push_back(w / wsum);
    for (double w : b.weights) out.weights.push_back(w / wsum);
    out.chain_offsets = a.chain_offsets;
    for (size_t i = 1; i < b.chain_offsets.size(); ++i)
        out.chain_offsets.push_back(a.atoms.size() + b.chain_offsets[i]);
    out.total_weight = 1.0;
    out.chain_failures = a.chain_failures;
    out.chain_failures.insert(out.chain_failures.end(), b.chain_failures.begin(),
                              b.chain_failures.end());
    return out;
}

void save_atoms(const EmpiricalMeasure& mu, const std::string& csv_path,
                const std::string& json_sidecar_path) {
    std::FILE* fp = std::fopen(csv_path.c_str(), "w");
    if (!fp) throw std::runtime_error("cannot open " + csv_path + " for writing");
    std::fprintf(fp, "re,im,weight\n");
    for (size_t i = 0; i < mu.atoms.size(); ++i) {
        const auto& p = mu.atoms[i];
        if (p.at_infinity)
            std::fprintf(fp, "inf,0,%.17g\n", mu.weights[i]);
        else
            std::fprintf(fp, "%.17g,%.17g,%.17g\n", p.re(), p.im(), mu.weights[i]);
    }
    std::fclose(fp);

    json j;
    j["schema_version"] = 1;
    j["map"] = mu.provenance.map_name;
    j["seed"] = mu.provenance.seed;
    j["chains"] = mu.provenance.chains;
    j["burn_in"] = mu.provenance.burn_in;
    j["depth"] = mu.provenance.depth;
    j["atoms"] = mu.atoms.size();
    j["total_weight"] = mu.total_weight;
    j["chain_offsets"] = mu.chain_offsets;
    j["chain_failures"] = mu.chain_failures;
    std::ofstream out(json_sidecar_path);
    out << j.dump(2) << "\n";
}

EmpiricalMeasure load_atoms(const std::string& csv_path, const std::string& json_sidecar_path) {
    std::ifstream side(json_sidecar_path);
    if (!side) throw std::runtime_error("cannot open " + json_sidecar_path);
    json j;
    side >> j;
    EmpiricalMeasure mu;
    mu.provenance.map_name = j.value("map", std::string());
    mu.provenance.seed = j.value("seed", std::uint64_t(0));
    mu.provenance.chains = j.value("chains", 0);
    mu.provenance.burn_in = j.value("burn_in", 0);
    mu.provenance.depth = j.value("depth", 0);
    mu.total_weight = j.value("total_weight", 1.0);
    mu.chain_offsets = j.value("chain_offsets", std::vector<size_t>{});
    mu.chain_failures = j.value("chain_failures", std::vector<std::string>{});

    std::ifstream in(csv_path);
    if (!in) throw std::runtime_error("cannot open " + csv_path);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const char* s = line.c_str();
        char* end = nullptr;
        double re, im, w;
        if (std::strncmp(s, "inf", 3) == 0) {
            re = std::numeric_limits<double>::infinity();
            end = const_cast<char*>(s) + 3;
        } else {
            re = std::strtod(s, &end);
        }
        im = std::strtod(end + 1, &end);
        w = std::strtod(end + 1, &end);
        mu.atoms.push_back(std::isinf(re) ? SpherePoint::infinity() : SpherePoint(re, im));
        mu.weights.push_back(w);
    }
    if (mu.chain_offsets.empty()) mu.chain_offsets = {0, mu.atoms.size()};
    return mu;
}

// ---------------------------------------------------------------------------

MeasureIndex::MeasureIndex(const EmpiricalMeasure& mu) : mu_(mu) {
    const int nch = mu.chains();
    chain_trees_.resize(size_t(nch));
    parallel_for(size_t(nch), [&](size_t ci) {
        const size_t lo = mu.chain_offsets[ci], hi = mu.chain_offsets[ci + 1];
        std::vector<std::array<double, 3>> pts;
        std::vector<double> ws;
        pts.reserve(hi - lo);
        ws.reserve(hi - lo);
        for (size_t i = lo; i < hi; ++i) {
            pts.push_back(embed3(mu.atoms[i]));
            ws.push_back(mu.weights[i]);
        }
        chain_trees_[ci] = KdTree3(std::move(pts), std::move(ws));
    });
    boot_seed_ = mix_seed(mu.provenance.seed, 0xb00157fa9ULL);
}

std::vector<double> MeasureIndex::per_chain_weight(const SphereBall& ball, size_t& count) const {
    const auto c = embed3(ball.center);
    std::vector<double> w(chain_trees_.size(), 0.0);
    count = 0;
    for (size_t ci = 0; ci < chain_trees_.size(); ++ci) {
        const auto st = chain_trees_[ci].ball_stat(c, ball.radius);
        w[ci] = st.weight;
        count += st.count;
    }
    return w;
}

KdTree3::BallStat MeasureIndex::ball_stat(const SphereBall& ball) const {
    const auto c = embed3(ball.center);
    KdTree3::BallStat out;
    for (const auto& t : chain_trees_) {
        const auto st = t.ball_stat(c, ball.radius);
        out.weight += st.weight;
        out.count += st.count;
    }
    return out;
}

void MeasureIndex::visit_ball(const SphereBall& ball,
                              const std::function<void(size_t)>& fn) const {
    const auto c = embed3(ball.center);
    for (size_t ci = 0; ci < chain_trees_.size(); ++ci) {
        const size_t lo = mu_.chain_offsets[ci];
        chain_trees_[ci].visit_ball(c, ball.radius, [&](size_t local) { fn(lo + local); });
    }
}

MeasureIndex::Mass MeasureIndex::ball_mass(const SphereBall& ball) const {
    Mass m;
    const auto w = per_chain_weight(ball, m.atom_count);
    for (double v : w) m.estimate += v;
    const size_t nch = w.size();
    if (nch >= 2) {
        // Chain-block bootstrap: resample whole chains, deterministic seed.
        std::uint64_t h = boot_seed_;
        h ^= std::bit_cast<std::uint64_t>(ball.radius) * 0x9e3779b97f4a7c15ULL;
        h ^= std::bit_cast<std::uint64_t>(ball.center.re() + 3.0 * ball.center.im());
        Rng rng(splitmix64(h));
        const int B = 160;
        double s1 = 0.0, s2 = 0.0;
        for (int b = 0; b < B; ++b) {
            double t = 0.0;
            for (size_t k = 0; k < nch; ++k) t += w[rng.below(nch)];
            s1 += t;
            s2 += t * t;
        }
        const double mean = s1 / B;
        const double var = std::max(0.0, s2 / B - mean * mean);
        m.std_error = std::sqrt(var);
    }
    return m;
}

BallMassCurve ball_mass_curve(const MeasureIndex& idx, const SpherePoint& center,
                              const std::vector<double>& radii) {
    BallMassCurve c;
    c.center = center;
    c.radii = radii;
    for (double r : radii) {
        const auto m = idx.ball_mass({center, r});
        c.masses.push_back(m.estimate);
        c.std_errors.push_back(m.std_error);
        c.counts.push_back(m.atom_count);
    }
    return c;
}

std::vector<double> geometric_grid(double r_min, double r_max, int n) {
    std::vector<double> g;
    if (n <= 1 || r_min >= r_max) {
        g.push_back(r_min);
        return g;
    }
    const double q = std::pow(r_max / r_min, 1.0 / double(n - 1));
    double r = r_min;
    for (int i = 0; i < n; ++i) {
        g.push_back(r);
        r *= q;
    }
    g.back() = r_max;
    return g;
}

const char* to_string(DoublingVerdict v) {
    switch (v) {
        case DoublingVerdict::consistent: return "doubling-consistent";
        case DoublingVerdict::violated: return "doubling-violated";
        default: return "inconclusive";
    }
}

namespace {

struct LineFit {
    double slope = 0.0, intercept = 0.0;
    int n = 0;
};

LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
    LineFit f;
    f.n = int(xs.size());
    if (f.n < 2) return f;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < f.n; ++i) {
        sx += xs[size_t(i)];
        sy += ys[size_t(i)];
        sxx += xs[size_t(i)] * xs[size_t(i)];
        sxy += xs[size_t(i)] * ys[size_t(i)];
    }
    const double det = f.n * sxx - sx * sx;
    if (det == 0.0) return f;
    f.slope = (f.n * sxy - sx * sy) / det;
    f.intercept = (sy - f.slope * sx) / f.n;
    return f;
}

std::vector<SpherePoint> draw_centers(const EmpiricalMeasure& mu, int n, std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0xce17e25ULL));
    std::vector<SpherePoint> out;
    out.reserve(size_t(n));
    for (int i = 0; i < n; ++i) out.push_back(mu.atoms[rng.below(mu.atoms.size())]);
    return out;
}

}  // namespace

DoublingEstimate doubling_scan(const MeasureIndex& idx, const DoublingParams& p) {
    DoublingEstimate est;
    auto centers = draw_centers(idx.measure(), p.centers, p.seed);
    centers.insert(centers.end(), p.probe_points.begin(), p.probe_points.end());
    est.radius_grid = geometric_grid(p.r_min, p.r_max, p.radii_per_center);
    est.max_ratio_per_radius.assign(est.radius_grid.size(), 0.0);
    est.r_star = 0.0;

    struct Sample {
        double ratio;
        bool resolved;
    };
    std::vector<std::vector<Sample>> rows(centers.size());
    parallel_for(centers.size(), [&](size_t ciu) {
        auto& row = rows[ciu];
        row.resize(est.radius_grid.size());
        for (size_t ri = 0; ri < est.radius_grid.size(); ++ri) {
            const double r = est.radius_grid[ri];
            const auto small = idx.ball_stat({centers[ciu], r});
            const auto big = idx.ball_stat({centers[ciu], std::min(2.0 * r, 2.0)});
            const bool resolved = small.count >= p.min_atoms && small.weight > 0.0;
            row[ri] = {resolved ? big.weight / small.weight : 0.0, resolved};
        }
    });

    est.worst_growth_slope = 0.0;
    for (size_t ci = 0; ci < centers.size(); ++ci) {
        std::vector<double> lx, ly;
        for (size_t ri = 0; ri < est.radius_grid.size(); ++ri) {
            const auto& s = rows[ci][ri];
            ++est.samples;
            if (!s.resolved) continue;
            ++est.resolved;
            const double r = est.radius_grid[ri];
            if (est.r_star == 0.0 || r < est.r_star) est.r_star = r;
            est.max_ratio_per_radius[ri] = std::max(est.max_ratio_per_radius[ri], s.ratio);
            if (s.ratio > est.C_star_hat) {
                est.C_star_hat = s.ratio;
                est.witness_center = centers[ci];
                est.witness_radius = r;
            }
            lx.push_back(std::log(r));
            ly.push_back(std::log(std::max(s.ratio, 1e-12)));
        }
        // Growth is judged on the smaller half of the resolved radii only:
        // every measure saturates toward ratio 1 at large balls, so slopes
        // over the full range would flag benign self-similar plateaus too.
        // Six resolved radii keep the small half clear of the saturation
        // shoulder when the lowest radii fall below resolution.
        if (int(lx.size()) >= 6) {
            const size_t h = std::max<size_t>(3, lx.size() / 2);
            std::vector<double> lx1(lx.begin(), lx.begin() + long(h));
            std::vector<double> ly1(ly.begin(), ly.begin() + long(h));
            double small_half_max = 0.0;
            for (double v : ly1) small_half_max = std::max(small_half_max, std::exp(v));
            if (small_half_max >= p.growth_min_ratio) {
                const auto f = fit_line(lx1, ly1);
                if (f.slope < est.worst_growth_slope) {
                    est.worst_growth_slope = f.slope;
                    est.growth_witness_center = centers[ci];
                }
            }
        }
    }
    est.unresolved_fraction =
        est.samples ? double(est.samples - est.resolved) / double(est.samples) : 1.0;
    est.growth_witness = est.worst_growth_slope <= p.growth_slope;

    bool violated = false;
    for (size_t ri = 0; ri < est.radius_grid.size(); ++ri)
        if (est.max_ratio_per_radius[ri] > p.ratio_ceiling) violated = true;
    if (violated)
        est.verdict = DoublingVerdict::violated;
    else if (est.growth_witness || est.unresolved_fraction > p.unresolved_tol || est.resolved == 0)
        est.verdict = DoublingVerdict::inconclusive;
    else
        est.verdict = DoublingVerdict::consistent;
    return est;
}

ExponentFit lower_exponent_fit(const MeasureIndex& idx, const ExponentFitParams& p) {
    ExponentFit out;
    auto centers = p.center_points;
    if (centers.empty()) centers = draw_centers(idx.measure(), p.centers, p.seed);
    const auto grid = geometric_grid(p.r_min, p.r_max, p.n_radii);

    std::vector<CenterFit> fits(centers.size());
    std::vector<char> valid(centers.size(), 0);
    parallel_for(centers.size(), [&](size_t ci) {
        std::vector<double> lx, ly;
        for (double r : grid) {
            const auto st = idx.ball_stat({centers[ci], r});
            if (st.count < p.min_atoms || st.weight <= 0.0) continue;
            lx.push_back(std::log(r));
            ly.push_back(std::log(st.weight));
        }
        if (int(lx.size()) < p.min_radii) return;
        CenterFit cf;
        cf.center = centers[ci];
        cf.resolved_radii = int(lx.size());
        const auto f = fit_line(lx, ly);
        cf.slope = f.slope;
        cf.intercept = f.intercept;
        const size_t h = lx.size() / 2;
        if (h >= 2 && lx.size() - h >= 2) {
            std::vector<double> lx1(lx.begin(), lx.begin() + long(h)),
                ly1(ly.begin(), ly.begin() + long(h));
            std::vector<double> lx2(lx.begin() + long(h), lx.end()),
                ly2(ly.begin() + long(h), ly.end());
            cf.slope_lower_half = fit_line(lx1, ly1).slope;
            cf.slope_upper_half = fit_line(lx2, ly2).slope;
        } else {
            cf.slope_lower_half = cf.slope_upper_half = f.slope;
        }
        fits[ci] = cf;
        valid[ci] = 1;
    });

    bool first = true;
    for (size_t ci = 0; ci < centers.size(); ++ci) {
        if (!valid[ci]) {
            ++out.skipped_centers;
            continue;
        }
        const auto& cf = fits[ci];
        out.per_center.push_back(cf);
        if (first || cf.slope > out.alpha_hat) {
            out.alpha_hat = cf.slope;
            out.C_hat = std::exp(cf.intercept);
            out.worst_center = cf.center;
        }
        if (first || cf.slope < out.alpha_min) {
            out.alpha_min = cf.slope;
            out.min_center = cf.center;
        }
        if (cf.resolved_radii >= 6 && cf.slope_lower_half - cf.slope_upper_half > 1.2 &&
            cf.slope_lower_half > 2.8)
            out.growth_signature = true;
        first = false;
    }
    return out;
}

double upper_exponent_check(const MeasureIndex& idx, const ExponentFitParams& p,
                            ExponentFit* detail) {
    const auto fit = lower_exponent_fit(idx, p);
    if (detail) *detail = fit;
    return fit.alpha_min;
}

InverseDoublingReport inverse_doubling_stats(const MeasureIndex& idx,
                                             const InverseDoublingParams& p) {
    if (p.eta <= 1.0) throw std::invalid_argument("inverse_doubling_stats: eta > 1 required");
    InverseDoublingReport rep;
    const auto centers = draw_centers(idx.measure(), p.centers, p.seed);
    const auto grid = geometric_grid(p.r_min, p.r_max, p.n_radii);

    bool first = true;
    std::vector<double> eta_grid;
    for (double e = 1.1; e <= 4.05; e *= 1.15) eta_grid.push_back(e);
    std::vector<double> min_inflation_at_eta(eta_grid.size(), std::numeric_limits<double>::max());

    for (const auto& x : centers) {
        for (double r : grid) {
            ++rep.samples;
            const auto base = idx.ball_stat({x, r});
            if (base.count < p.min_atoms || base.weight <= 0.0) continue;
            ++rep.resolved;
            const auto big = idx.ball_stat({x, std::min(p.eta * r, 2.0)});
            const double inflation = big.weight / base.weight;
            const double annulus = (big.weight - base.weight) / base.weight;
            if (first) {
                rep.min_inflation = inflation;
                rep.min_annulus_ratio = annulus;
                first = false;
            } else {
                rep.min_inflation = std::min(rep.min_inflation, inflation);
                rep.min_annulus_ratio = std::min(rep.min_annulus_ratio, annulus);
            }
            for (size_t ei = 0; ei < eta_grid.size(); ++ei) {
                const auto b2 = idx.ball_stat({x, std::min(eta_grid[ei] * r, 2.0)});
                min_inflation_at_eta[ei] =
                    std::min(min_inflation_at_eta[ei], b2.weight / base.weight);
            }
        }
    }
    rep.eta_for_doubling = 0.0;
    for (size_t ei = 0; ei < eta_grid.size(); ++ei) {
        if (min_inflation_at_eta[ei] >= 2.0) {
            rep.eta_for_doubling = eta_grid[ei];
            break;
        }
    }
    return rep;
}

}  // namespace rmlab
