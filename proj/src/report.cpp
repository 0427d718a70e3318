#include "rmlab/report.hpp"

#include "rmlab/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace rmlab {

using json = nlohmann::json;
namespace fs = std::filesystem;

void LabConfig::validate() const {
    auto bad = [](const std::string& field, const std::string& why) {
        throw std::invalid_argument("config field '" + field + "': " + why);
    };
    if (chains < 1) bad("chains", "must be >= 1");
    if (atoms < 1000) bad("atoms", "must be >= 1000");
    if (burn_in < 0) bad("burn_in", "must be >= 0");
    if (!(doubling_r_min > 0.0 && doubling_r_min < doubling_r_max))
        bad("doubling_r_min/doubling_r_max", "need 0 < r_min < r_max");
    if (doubling_r_max > 1.0) bad("doubling_r_max", "must be <= 1 (balls of radius 2r)");
    if (!(exponent_r_min > 0.0 && exponent_r_min < exponent_r_max))
        bad("exponent_r_min/exponent_r_max", "need 0 < r_min < r_max");
    if (period_cap < 1 || period_cap > 16) bad("period_cap", "must be in [1, 16]");
    if (!(scan_r > 0.0 && scan_r <= 0.5)) bad("scan_r", "must be in (0, 0.5]");
    if (scan_m_max < 4) bad("scan_m_max", "must be >= 4");
    if (tce_horizon < 10) bad("tce_horizon", "must be >= 10");
    if (!(resolution > 0.0 && resolution < 0.1)) bad("resolution", "must be in (0, 0.1)");
    if (cloud_budget < 1000) bad("cloud_budget", "must be >= 1000");
    if (format != "json" && format != "csv") bad("format", "must be 'json' or 'csv'");
}

namespace {

json config_to_json(const LabConfig& c) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["seed"] = c.seed;
    j["chains"] = c.chains;
    j["atoms"] = c.atoms;
    j["burn_in"] = c.burn_in;
    j["doubling_r_min"] = c.doubling_r_min;
    j["doubling_r_max"] = c.doubling_r_max;
    j["doubling_radii"] = c.doubling_radii;
    j["doubling_centers"] = c.doubling_centers;
    j["exponent_r_min"] = c.exponent_r_min;
    j["exponent_r_max"] = c.exponent_r_max;
    j["exponent_radii"] = c.exponent_radii;
    j["exponent_centers"] = c.exponent_centers;
    j["period_cap"] = c.period_cap;
    j["scan_r"] = c.scan_r;
    j["scan_m_max"] = c.scan_m_max;
    j["scan_points"] = c.scan_points;
    j["tce_horizon"] = c.tce_horizon;
    j["expshrink_points"] = c.expshrink_points;
    j["expshrink_m_max"] = c.expshrink_m_max;
    j["expshrink_r"] = c.expshrink_r;
    j["resolution"] = c.resolution;
    j["cloud_budget"] = c.cloud_budget;
    j["porosity_centers"] = c.porosity_centers;
    j["carrot_targets"] = c.carrot_targets;
    j["jacobian_trials"] = c.jacobian_trials;
    j["out_dir"] = c.out_dir;
    j["format"] = c.format;
    j["reuse_atoms"] = c.reuse_atoms;
    return j;
}

LabConfig config_from_json(const json& j) {
    LabConfig c;
    c.seed = j.value("seed", c.seed);
    c.chains = j.value("chains", c.chains);
    c.atoms = j.value("atoms", c.atoms);
    c.burn_in = j.value("burn_in", c.burn_in);
    c.doubling_r_min = j.value("doubling_r_min", c.doubling_r_min);
    c.doubling_r_max = j.value("doubling_r_max", c.doubling_r_max);
    c.doubling_radii = j.value("doubling_radii", c.doubling_radii);
    c.doubling_centers = j.value("doubling_centers", c.doubling_centers);
    c.exponent_r_min = j.value("exponent_r_min", c.exponent_r_min);
    c.exponent_r_max = j.value("exponent_r_max", c.exponent_r_max);
    c.exponent_radii = j.value("exponent_radii", c.exponent_radii);
    c.exponent_centers = j.value("exponent_centers", c.exponent_centers);
    c.period_cap = j.value("period_cap", c.period_cap);
    c.scan_r = j.value("scan_r", c.scan_r);
    c.scan_m_max = j.value("scan_m_max", c.scan_m_max);
    c.scan_points = j.value("scan_points", c.scan_points);
    c.tce_horizon = j.value("tce_horizon", c.tce_horizon);
    c.expshrink_points = j.value("expshrink_points", c.expshrink_points);
    c.expshrink_m_max = j.value("expshrink_m_max", c.expshrink_m_max);
    c.expshrink_r = j.value("expshrink_r", c.expshrink_r);
    c.resolution = j.value("resolution", c.resolution);
    c.cloud_budget = j.value("cloud_budget", c.cloud_budget);
    c.porosity_centers = j.value("porosity_centers", c.porosity_centers);
    c.carrot_targets = j.value("carrot_targets", c.carrot_targets);
    c.jacobian_trials = j.value("jacobian_trials", c.jacobian_trials);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.format = j.value("format", c.format);
    c.reuse_atoms = j.value("reuse_atoms", c.reuse_atoms);
    return c;
}

json point_json(const SpherePoint& p) {
    if (p.at_infinity) return json{{"inf", true}};
    return json{{"re", p.re()}, {"im", p.im()}};
}

}  // namespace

LabConfig config_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    json j;
    in >> j;
    LabConfig c = config_from_json(j);
    c.validate();
    return c;
}

void config_to_json_file(const LabConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << config_to_json(cfg).dump(2) << "\n";
}

std::vector<SpherePoint> probe_points(const RationalMap& f, const ChiPerEstimate& chiper,
                                      const std::vector<PeriodicOrbit>& fixed_orbits) {
    std::vector<SpherePoint> probes;
    auto push_unique = [&](const SpherePoint& p) {
        for (const auto& q : probes)
            if (chordal_distance(p, q) < 1e-9) return;
        probes.push_back(p);
    };
    // neutral cycle points and two backward steps from each (the nearby
    // preimages carry the same degenerate scaling at accessible radii)
    for (const auto& p : chiper.neutral_points) {
        push_unique(p);
        const PreimageSet pre1 = f.preimages(p);
        for (const auto& q : pre1.points) {
            push_unique(q);
            const PreimageSet pre2 = f.preimages(q);
            for (const auto& q2 : pre2.points) push_unique(q2);
        }
    }
    // slowest repelling fixed point
    const PeriodicOrbit* slow = nullptr;
    for (const auto& o : fixed_orbits) {
        if (o.classification != OrbitKind::repelling) continue;
        if (!slow || o.chi < slow->chi) slow = &o;
    }
    if (slow) push_unique(slow->points.front());
    // representative of the overall minimizing cycle
    if (chiper.has_min_point) push_unique(chiper.min_point);
    return probes;
}

namespace {

struct Signals {
    int tce = 0;       // +1 positive, -1 negative, 0 unknown
    int doubling = 0;
    int semihyp = 0;
    int expshrink = 0;
    int carrot = 0;    // polynomials only; 0 otherwise
    bool carrot_applicable = false;
};

const char* kConsistent = "consistent";
const char* kContradiction = "contradiction";
const char* kInconclusive = "inconclusive";

void add_check(MapReport& rep, const std::string& name, const std::string& status,
               const std::string& note) {
    rep.checks.push_back({name, status, note});
    if (status == kContradiction) rep.contradiction = true;
}

void cross_checks(MapReport& rep, const Signals& s) {
    // Theorem A: semi-hyperbolicity <=> doubling measure
    {
        std::string status = kInconclusive, note;
        if (s.semihyp > 0 && s.doubling > 0) status = kConsistent;
        else if (s.semihyp < 0 && s.doubling < 0) status = kConsistent;
        else if (s.semihyp > 0 && s.doubling < 0) {
            status = kContradiction;
            note = "degrees bounded but the measure shows non-doubling growth";
        } else if (s.semihyp < 0 && s.doubling > 0) {
            status = kContradiction;
            note = "degree growth with a doubling-consistent measure";
        }
        add_check(rep, "A: semi-hyperbolic <=> doubling", status, note);
    }
    // Theorem B: TCE <=> uniform mass lower bound; mass degeneration may
    // show up in the exponent slopes or in the doubling growth witness
    {
        const bool mass_degenerate =
            rep.exponent.growth_signature || rep.doubling.growth_witness;
        std::string status = kInconclusive, note;
        if (s.tce > 0 && s.doubling != 0 && !mass_degenerate) status = kConsistent;
        else if (s.tce < 0 && mass_degenerate) status = kConsistent;
        else if (s.tce > 0 && mass_degenerate) {
            status = kContradiction;
            note = "uniform cycle expansion but mass scaling degenerates at small radii";
        }
        add_check(rep, "B: TCE <=> mass lower bound", status, note);
    }
    // Theorem C: John basin <=> semi-hyperbolic (polynomials)
    if (s.carrot_applicable) {
        std::string status = kInconclusive, note;
        if (s.semihyp > 0 && s.carrot > 0) status = kConsistent;
        else if (s.semihyp < 0 && s.carrot < 0) status = kConsistent;
        else if (s.semihyp > 0 && s.carrot < 0) {
            status = kContradiction;
            note = "bounded degrees but carrot constants collapse";
        } else if (s.semihyp < 0 && s.carrot > 0) {
            status = kContradiction;
            note = "degree growth but a stable John constant";
        }
        add_check(rep, "C: John basin <=> semi-hyperbolic", status, note);
    }
    // Exponential shrinking <=> uniform hyperbolicity on cycles
    {
        std::string status = kInconclusive, note;
        if (s.expshrink > 0 && s.tce > 0) status = kConsistent;
        else if (s.expshrink < 0 && s.tce < 0) status = kConsistent;
        else if (s.expshrink > 0 && s.tce < 0) {
            status = kContradiction;
            note = "components shrink exponentially but cycle exponents degenerate";
        } else if (s.expshrink < 0 && s.tce > 0) {
            status = kContradiction;
            note = "uniform cycle expansion but sub-exponential component decay";
        }
        add_check(rep, "shrink: ExpShrink <=> cycle expansion", status, note);
    }
    // Optimal exponent: alpha_hat against ln(deg)/chi_per
    {
        std::string status = kInconclusive, note;
        if (s.tce > 0 && !rep.alpha_opt.unbounded && !rep.exponent.per_center.empty()) {
            const double a = rep.exponent.alpha_hat;
            const double b = rep.alpha_opt.value;
            if (std::abs(a - b) <= 0.4 * std::max(1.0, b)) status = kConsistent;
            else {
                status = kContradiction;
                note = "fitted exponent " + std::to_string(a) +
                       " far from ln(deg)/chi_per = " + std::to_string(b);
            }
        }
        add_check(rep, "optimal exponent vs chi_per", status, note);
    }
}

void annotation_check(MapReport& rep, const Signals& s) {
    const std::string& cls = rep.expected_class;
    std::string status = kConsistent, note;
    if (cls == "hyperbolic" || cls == "semi-hyperbolic") {
        if (rep.chiper.neutral_found) {
            status = kContradiction;
            note = "unexpected neutral cycle";
        } else if (s.doubling < 0 || rep.doubling.verdict == DoublingVerdict::violated) {
            status = kContradiction;
            note = "measure fails the doubling scan";
        } else if (rep.semihyp.verdict == ScanVerdict::growing) {
            status = kContradiction;
            note = "semi-local degrees grow";
        } else if (rep.expshrink.lambda_hat < 1.1 && rep.expshrink.lambda_hat > 0.0) {
            status = kContradiction;
            note = "sub-exponential component decay";
        } else if (rep.doubling.verdict != DoublingVerdict::consistent) {
            status = kInconclusive;
            note = "doubling scan unresolved";
        }
    } else if (cls == "parabolic") {
        if (!rep.chiper.neutral_found) {
            status = kContradiction;
            note = "no neutral cycle found";
        } else if (rep.uhp_holds) {
            status = kContradiction;
            note = "uniform cycle expansion should fail";
        } else if (rep.doubling.verdict == DoublingVerdict::consistent) {
            status = kContradiction;
            note = "doubling scan should not be consistent";
        } else if (rep.semihyp.verdict == ScanVerdict::bounded) {
            status = kContradiction;
            note = "semi-local degree scan should not stabilize";
        }
    }
    add_check(rep, "registry annotation (" + cls + ")", status, note);
}

}  // namespace

MapReport classify_map(const RegistryEntry& entry, const LabConfig& cfg,
                       const std::string& artifact_dir) {
    const RationalMap& f = entry.map;
    MapReport rep;
    rep.map_name = f.name();
    rep.expected_class = entry.annotations.expected_class;
    fs::create_directories(artifact_dir);

    const CriticalSet crit =
        flagged_critical_points(f, entry.annotations.critical_in_julia);

    // periodic data first: it supplies the probe points for every scan
    PeriodicOptions popts;
    rep.chiper = chi_per(f, cfg.period_cap, popts);
    const auto fixed_orbits = periodic_points(f, 1, popts);
    {
        std::vector<PeriodicOrbit> all;
        for (int n = 1; n <= cfg.period_cap; ++n) {
            double logd = double(n) * std::log2(double(f.degree()));
            if (logd > std::log2(double(popts.solver_cap)) + 1e-9) break;
            const auto v = periodic_points(f, n, popts);
            all.insert(all.end(), v.begin(), v.end());
        }
        export_orbits_csv(all, artifact_dir + "/orbits.csv");
        rep.artifacts["orbits"] = artifact_dir + "/orbits.csv";
    }
    const auto probes = probe_points(f, rep.chiper, fixed_orbits);

    const double chi_hat = rep.chiper.per_period_min.empty() ? 0.0 : rep.chiper.chi_per_hat;
    rep.uhp_lambda = std::max(1.05, std::exp(0.8 * std::max(0.0, chi_hat)));
    rep.uhp_holds = uhp_check(f, cfg.period_cap, rep.uhp_lambda, popts).holds;
    rep.alpha_opt = optimal_alpha(f, cfg.period_cap, popts);

    // the measure
    EmpiricalMeasure mu;
    const std::string atoms_csv = artifact_dir + "/atoms.csv";
    const std::string atoms_json = artifact_dir + "/atoms.json";
    const int depth = cfg.burn_in + int(cfg.atoms / cfg.chains);
    if (cfg.reuse_atoms && fs::exists(atoms_csv) && fs::exists(atoms_json)) {
        mu = load_atoms(atoms_csv, atoms_json);
    } else {
        mu = sample_measure(f, cfg.chains, depth, cfg.burn_in, cfg.seed);
        save_atoms(mu, atoms_csv, atoms_json);
    }
    rep.artifacts["atoms"] = atoms_csv;
    MeasureIndex idx(mu);

    // doubling
    DoublingParams dp;
    dp.centers = cfg.doubling_centers;
    dp.radii_per_center = cfg.doubling_radii;
    dp.r_min = cfg.doubling_r_min;
    dp.r_max = cfg.doubling_r_max;
    dp.seed = mix_seed(cfg.seed, 1);
    dp.probe_points = probes;
    rep.doubling = doubling_scan(idx, dp);
    {
        // probe-only scan on a wide dense grid: parabolic degeneration sits
        // at radii the default grid cannot resolve near thin zones
        DoublingParams zp = dp;
        zp.centers = 0;
        zp.r_min = cfg.zoom_r_min;
        zp.r_max = cfg.zoom_r_max;
        zp.radii_per_center = cfg.zoom_radii;
        rep.doubling_zoom = doubling_scan(idx, zp);
        if (rep.doubling_zoom.verdict == DoublingVerdict::violated)
            rep.doubling.verdict = DoublingVerdict::violated;
        else if (rep.doubling_zoom.growth_witness &&
                 rep.doubling.verdict == DoublingVerdict::consistent)
            rep.doubling.verdict = DoublingVerdict::inconclusive;
        if (rep.doubling_zoom.growth_witness) rep.doubling.growth_witness = true;
    }

    // exponents (atom centers plus the probes)
    ExponentFitParams ep;
    ep.r_min = cfg.exponent_r_min;
    ep.r_max = cfg.exponent_r_max;
    ep.n_radii = cfg.exponent_radii;
    ep.seed = mix_seed(cfg.seed, 2);
    {
        Rng rng(ep.seed);
        for (int i = 0; i < cfg.exponent_centers; ++i)
            ep.center_points.push_back(mu.atoms[rng.below(mu.size())]);
        for (const auto& p : probes) ep.center_points.push_back(p);
    }
    rep.exponent = lower_exponent_fit(idx, ep);
    rep.alpha_prime = rep.exponent.alpha_min;

    // semi-local degree scan
    SemihypParams sp;
    sp.r = cfg.scan_r;
    sp.m_max = cfg.scan_m_max;
    sp.sample_points = cfg.scan_points;
    sp.seed = mix_seed(cfg.seed, 3);
    sp.probe_points = probes;
    rep.semihyp = semihyperbolicity_scan(f, crit, mu, sp);

    // good-time density at the most informative point available
    rep.tce_D = ell_max(f, crit);
    {
        SpherePoint x = probes.empty() ? mu.atoms.front() : probes.front();
        rep.tce = tce_density(f, crit, x, cfg.scan_r, rep.tce_D, cfg.tce_horizon);
    }

    // component shrinking
    ExpShrinkParams xp;
    xp.sample_points = cfg.expshrink_points;
    xp.m_max = cfg.expshrink_m_max;
    xp.r = cfg.expshrink_r;
    xp.seed = mix_seed(cfg.seed, 4);
    for (const auto& p : probes)
        if (chordal_distance(f.evaluate(p), p) < 1e-8) xp.pinned_points.push_back(p);
    rep.expshrink = expshrink_decay(f, crit, mu, xp);

    // geometry
    const auto J = julia_approximation(f, cfg.resolution, cfg.cloud_budget,
                                       mix_seed(cfg.seed, 5));
    export_cloud_csv(J, artifact_dir + "/cloud.csv");
    export_grid_pgm(J.grid, artifact_dir + "/grid.pgm");
    rep.artifacts["cloud"] = artifact_dir + "/cloud.csv";
    rep.artifacts["grid"] = artifact_dir + "/grid.pgm";

    PorosityParams pp;
    pp.centers = cfg.porosity_centers;
    pp.r_min = std::max(0.02, 4.5 * J.grid.h);
    pp.r_max = 0.1;
    pp.seed = mix_seed(cfg.seed, 6);
    rep.porosity = porosity_curve(f, J, pp);
    if (f.is_polynomial()) rep.boundary_porosity = boundary_porosity_curve(f, J, pp);

    if (f.is_polynomial()) {
        CarrotParams cp;
        cp.targets = cfg.carrot_targets;
        cp.seed = mix_seed(cfg.seed, 7);
        auto probe = carrot_probe(f, J, cp);
        // deterministic cusp-approach targets when a finite neutral point exists
        for (const auto& nq : rep.chiper.neutral_points) {
            if (!nq.finite()) continue;
            // start from a cloud point at moderate distance and pull back
            // along the branch that stays nearest to the neutral point
            SpherePoint t;
            double bestd = 1e9;
            for (size_t i = 0; i < J.cloud.size(); i += 37) {
                const double d = chordal_distance(J.cloud[i], nq);
                if (d > 0.25 && d < 0.45 && d < bestd) {
                    bestd = d;
                    t = J.cloud[i];
                }
            }
            if (bestd > 1e8) break;
            CarrotParams cq;
            cq.seed = cp.seed;
            std::vector<SpherePoint> seqtargets;
            SpherePoint cur = t;
            for (int k = 0; k < 22; ++k) {
                seqtargets.push_back(cur);
                const PreimageSet pre = f.preimages(cur);
                if (pre.points.size() != size_t(f.degree())) break;
                size_t best = 0;
                double bd = 1e9;
                for (size_t i = 0; i < pre.points.size(); ++i) {
                    const double d = chordal_distance(pre.points[i], nq);
                    if (d < bd) {
                        bd = d;
                        best = i;
                    }
                }
                cur = pre.points[best];
            }
            cq.target_points = seqtargets;
            const auto cusp = carrot_probe(f, J, cq);
            for (const auto& row : cusp.targets)
                if (row.reached) rep.carrot_near_neutral.push_back(row.constant);
            break;  // one neutral point suffices for the witness sequence
        }
        export_carrot_paths_csv(probe, artifact_dir + "/carrot_paths.csv");
        rep.artifacts["carrot_paths"] = artifact_dir + "/carrot_paths.csv";
        rep.carrot = std::move(probe);
    }

    // mass-transport identity
    JacobianParams jp;
    jp.trials = cfg.jacobian_trials;
    jp.seed = mix_seed(cfg.seed, 8);
    rep.jacobian = jacobian_consistency(f, crit, idx, jp);

    // signals and the cross-check matrix
    Signals s;
    if (rep.chiper.neutral_found) s.tce = -1;
    else if (!rep.chiper.per_period_min.empty()) {
        double head = 1e9, tail = 1e9;
        int count = 0;
        const int last = rep.chiper.per_period_min.rbegin()->first;
        for (const auto& [n, v] : rep.chiper.per_period_min) {
            if (n <= std::max(2, last / 3)) head = std::min(head, v);
            if (n > 2 * last / 3) tail = std::min(tail, v);
            ++count;
        }
        if (count >= 3 && tail < head - 0.12) s.tce = -1;
        else s.tce = rep.uhp_holds ? 1 : 0;
    }
    if (rep.doubling.verdict == DoublingVerdict::consistent) s.doubling = 1;
    else if (rep.doubling.verdict == DoublingVerdict::violated || rep.doubling.growth_witness)
        s.doubling = -1;
    if (rep.semihyp.verdict == ScanVerdict::bounded) s.semihyp = 1;
    else if (rep.semihyp.verdict == ScanVerdict::growing) s.semihyp = -1;
    if (rep.expshrink.lambda_hat >= 1.1) s.expshrink = 1;
    else if (rep.expshrink.lambda_hat > 0.0 && rep.expshrink.lambda_hat <= 1.05)
        s.expshrink = -1;
    if (rep.carrot) {
        s.carrot_applicable = true;
        const auto& c = *rep.carrot;
        const double reached = double(c.targets.size() - size_t(c.discarded));
        bool cusp_decay = false;
        if (rep.carrot_near_neutral.size() >= 5) {
            double mx = 0.0, mn = 1e9;
            for (double v : rep.carrot_near_neutral) {
                mx = std::max(mx, v);
                mn = std::min(mn, v);
            }
            cusp_decay = mn > 0.0 && mx / mn >= 5.0;
        }
        if (cusp_decay || (reached > 0 && c.C_hat < 0.005)) s.carrot = -1;
        else if (reached >= 0.7 * double(c.targets.size()) && c.C_hat >= 0.03) s.carrot = 1;
    }

    cross_checks(rep, s);
    annotation_check(rep, s);

    write_map_report_json(rep, artifact_dir + "/report.json");
    rep.artifacts["report"] = artifact_dir + "/report.json";
    return rep;
}

void write_map_report_json(const MapReport& rep, const std::string& path) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["map"] = rep.map_name;
    j["expected_class"] = rep.expected_class;

    json dbl;
    dbl["verdict"] = to_string(rep.doubling.verdict);
    dbl["C_star_hat"] = rep.doubling.C_star_hat;
    dbl["r_star"] = rep.doubling.r_star;
    dbl["witness_center"] = point_json(rep.doubling.witness_center);
    dbl["witness_radius"] = rep.doubling.witness_radius;
    dbl["unresolved_fraction"] = rep.doubling.unresolved_fraction;
    dbl["growth_witness"] = rep.doubling.growth_witness;
    dbl["worst_growth_slope"] = rep.doubling.worst_growth_slope;
    dbl["radius_grid"] = rep.doubling.radius_grid;
    dbl["max_ratio_per_radius"] = rep.doubling.max_ratio_per_radius;
    dbl["trust"] = "ratios over the stated radius grid only";
    j["doubling"] = dbl;
    j["doubling_zoom"] = {{"growth_witness", rep.doubling_zoom.growth_witness},
                          {"worst_growth_slope", rep.doubling_zoom.worst_growth_slope},
                          {"C_star_hat", rep.doubling_zoom.C_star_hat},
                          {"radius_grid", rep.doubling_zoom.radius_grid},
                          {"max_ratio_per_radius", rep.doubling_zoom.max_ratio_per_radius}};

    json ex;
    ex["alpha_hat"] = rep.exponent.alpha_hat;
    ex["C_hat"] = rep.exponent.C_hat;
    ex["alpha_prime_hat"] = rep.alpha_prime;
    ex["worst_center"] = point_json(rep.exponent.worst_center);
    ex["growth_signature"] = rep.exponent.growth_signature;
    ex["centers_used"] = rep.exponent.per_center.size();
    ex["centers_skipped"] = rep.exponent.skipped_centers;
    j["exponent"] = ex;

    json cp;
    cp["chi_per_hat"] = rep.chiper.per_period_min.empty() ? json() : json(rep.chiper.chi_per_hat);
    cp["note"] = "cap-dependent upper bound for the true infimum";
    cp["period_cap"] = rep.chiper.period_cap;
    cp["neutral_found"] = rep.chiper.neutral_found;
    cp["count_complete"] = rep.chiper.complete;
    json ppm = json::object();
    for (const auto& [n, v] : rep.chiper.per_period_min) ppm[std::to_string(n)] = v;
    cp["per_period_min"] = ppm;
    j["chi_per"] = cp;

    j["uhp"] = {{"lambda", rep.uhp_lambda}, {"holds", rep.uhp_holds}};
    j["optimal_alpha"] =
        rep.alpha_opt.unbounded
            ? json{{"unbounded", true}, {"note", "optimal alpha unbounded (non-TCE signature)"}}
            : json{{"value", rep.alpha_opt.value}};

    json sh;
    sh["verdict"] = to_string(rep.semihyp.verdict);
    sh["max_degree_per_m"] = rep.semihyp.max_degree_per_m;
    sh["chains"] = rep.semihyp.chains;
    sh["flagged_chains"] = rep.semihyp.flagged_chains;
    sh["trust"] = "finite scan: verdicts are consistency/signature statements, not proofs";
    j["semilocal_scan"] = sh;

    json tc;
    tc["x"] = point_json(rep.tce.x);
    tc["D"] = rep.tce_D;
    tc["horizon"] = rep.tce.horizon;
    tc["density"] = rep.tce.density;
    tc["flagged_times"] = rep.tce.flagged_times;
    j["tce_density"] = tc;

    json xs;
    xs["lambda_hat"] = rep.expshrink.lambda_hat;
    xs["per_m_max_diameter"] = rep.expshrink.per_m_max_diameter;
    xs["chains"] = rep.expshrink.chains;
    xs["excluded_chains"] = rep.expshrink.excluded_chains;
    j["expshrink"] = xs;

    json po;
    po["xi_min"] = rep.porosity.xi_min;
    po["radii"] = rep.porosity.radii;
    po["xi_hat"] = rep.porosity.xi_hat;
    po["porous_consistent"] = rep.porosity.porous_consistent;
    po["trust_floor"] = rep.porosity.trust_floor;
    j["porosity"] = po;
    if (rep.boundary_porosity) {
        json bp;
        bp["xi_min"] = rep.boundary_porosity->xi_min;
        bp["radii"] = rep.boundary_porosity->radii;
        bp["xi_hat"] = rep.boundary_porosity->xi_hat;
        bp["porous_consistent"] = rep.boundary_porosity->porous_consistent;
        bp["trust_floor"] = rep.boundary_porosity->trust_floor;
        j["boundary_porosity"] = bp;
    }
    if (rep.carrot) {
        json ca;
        ca["C_hat"] = rep.carrot->C_hat;
        ca["targets"] = rep.carrot->targets.size();
        ca["discarded"] = rep.carrot->discarded;
        ca["worst_target"] = point_json(rep.carrot->worst_target);
        ca["near_neutral_constants"] = rep.carrot_near_neutral;
        j["carrot"] = ca;
    }

    json ja;
    ja["max_rel_deviation"] = rep.jacobian.max_rel_deviation;
    ja["resolved_trials"] = rep.jacobian.resolved_trials;
    ja["skipped_trials"] = rep.jacobian.skipped_trials;
    j["jacobian"] = ja;

    json checks = json::array();
    for (const auto& c : rep.checks)
        checks.push_back({{"name", c.name}, {"status", c.status}, {"note", c.note}});
    j["cross_checks"] = checks;
    j["contradiction"] = rep.contradiction;
    j["artifacts"] = rep.artifacts;

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
}

void write_classification_summary(const std::vector<MapReport>& reports,
                                  const std::string& path) {
    json j;
    j["schema_version"] = kSchemaVersion;
    json maps = json::array();
    bool any = false;
    for (const auto& r : reports) {
        json m;
        m["map"] = r.map_name;
        m["expected_class"] = r.expected_class;
        m["doubling"] = to_string(r.doubling.verdict);
        m["semilocal"] = to_string(r.semihyp.verdict);
        m["neutral_found"] = r.chiper.neutral_found;
        m["uhp_holds"] = r.uhp_holds;
        m["lambda_hat"] = r.expshrink.lambda_hat;
        m["alpha_hat"] = r.exponent.alpha_hat;
        m["xi_min"] = r.porosity.xi_min;
        if (r.carrot) m["carrot_C_hat"] = r.carrot->C_hat;
        m["contradiction"] = r.contradiction;
        any = any || r.contradiction;
        maps.push_back(m);
    }
    j["maps"] = maps;
    j["any_contradiction"] = any;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
}

}  // namespace rmlab
