#include "rmlab/cli.hpp"

#include "rmlab/julia.hpp"
#include "rmlab/measure.hpp"
#include "rmlab/periodic.hpp"
#include "rmlab/pullback.hpp"
#include "rmlab/report.hpp"
#include "rmlab/rng.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace rmlab {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::vector<RegistryEntry> load_maps(const std::string& registry_path) {
    if (!registry_path.empty() && fs::exists(registry_path)) return load_registry(registry_path);
    if (fs::exists("data/registry.json")) return load_registry("data/registry.json");
    return builtin_corpus();
}

RegistryEntry find_map(const std::vector<RegistryEntry>& maps, const std::string& name) {
    for (const auto& e : maps)
        if (e.map.name() == name) return e;
    std::string known;
    for (const auto& e : maps) known += (known.empty() ? "" : ", ") + e.map.name();
    throw std::runtime_error("map '" + name + "' not in the registry (known: " + known + ")");
}

EmpiricalMeasure obtain_measure(const RationalMap& f, const LabConfig& cfg,
                                const std::string& dir) {
    const std::string atoms_csv = dir + "/atoms.csv";
    const std::string atoms_json = dir + "/atoms.json";
    if (cfg.reuse_atoms && fs::exists(atoms_csv) && fs::exists(atoms_json))
        return load_atoms(atoms_csv, atoms_json);
    const int depth = cfg.burn_in + int(cfg.atoms / cfg.chains);
    auto mu = sample_measure(f, cfg.chains, depth, cfg.burn_in, cfg.seed);
    fs::create_directories(dir);
    save_atoms(mu, atoms_csv, atoms_json);
    return mu;
}

void write_json(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
}

json point_json(const SpherePoint& p) {
    if (p.at_infinity) return json{{"inf", true}};
    return json{{"re", p.re()}, {"im", p.im()}};
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"numerical laboratory for non-uniform hyperbolicity of rational maps"};
    app.require_subcommand(1);

    LabConfig cfg;
    std::string registry_path, map_name, config_path;
    app.add_option("--registry", registry_path, "registry JSON (default data/registry.json)");
    app.add_option("--config", config_path, "load a LabConfig JSON before other flags");
    app.add_option("--seed", cfg.seed, "RNG seed");
    app.add_option("--chains", cfg.chains, "sampling chains");
    app.add_option("--atoms", cfg.atoms, "total atom budget");
    app.add_option("--burn-in", cfg.burn_in, "burn-in steps per chain");
    app.add_option("--out", cfg.out_dir, "output directory");
    app.add_option("--format", cfg.format, "artifact format: json|csv");

    int depth_override = 0;
    app.add_option("--depth", depth_override, "chain depth (overrides --atoms)");

    double r_min = 0.0, r_max = 0.0, scan_r = 0.0, resolution = 0.0;
    int period_cap = 0, horizon = 0, m_max = 0, centers = 0, targets = 0;
    double tce_x_re = 0.0, tce_x_im = 0.0;
    long tce_D = -1;
    app.add_option("--r-min", r_min, "lower radius of the scan grid");
    app.add_option("--r-max", r_max, "upper radius of the scan grid");
    app.add_option("--period-cap", period_cap, "largest period");
    app.add_option("--horizon", horizon, "good-time horizon");
    app.add_option("--m-max", m_max, "largest pull-back depth");
    app.add_option("--scan-r", scan_r, "ball radius for semi-local scans");
    app.add_option("--resolution", resolution, "grid resolution");
    app.add_option("--centers", centers, "scan centers");
    app.add_option("--targets", targets, "carrot targets");
    app.add_option("--x-re", tce_x_re, "base point (re) for tce");
    app.add_option("--x-im", tce_x_im, "base point (im) for tce");
    app.add_option("--D", tce_D, "degree bound for good times");
    bool reuse = false;
    app.add_flag("--reuse", reuse, "reuse persisted atoms instead of resampling");

    auto* c_sample = app.add_subcommand("sample", "sample the maximal entropy measure");
    auto* c_doubling = app.add_subcommand("doubling", "doubling-constant scan");
    auto* c_exponent = app.add_subcommand("exponent", "ball-mass exponent fits");
    auto* c_chiper = app.add_subcommand("chiper", "periodic-orbit exponents");
    auto* c_semilocal = app.add_subcommand("semilocal", "semi-local degree scan");
    auto* c_tce = app.add_subcommand("tce", "good-time density at a point");
    auto* c_expshrink = app.add_subcommand("expshrink", "pull-back diameter decay");
    auto* c_porosity = app.add_subcommand("porosity", "porosity curves");
    auto* c_carrot = app.add_subcommand("carrot", "John/carrot probe of the basin");
    auto* c_classify = app.add_subcommand("classify", "run everything on one map");
    auto* c_corpus = app.add_subcommand("corpus", "classify the whole registry");

    for (auto* sc : {c_sample, c_doubling, c_exponent, c_chiper, c_semilocal, c_tce, c_expshrink,
                     c_porosity, c_carrot, c_classify})
        sc->add_option("--map", map_name, "map name from the registry")->required();

    std::vector<const char*> argv_store;
    std::vector<std::string> full = args;
    full.insert(full.begin(), "rmlab");
    for (const auto& s : full) argv_store.push_back(s.c_str());
    try {
        app.parse(int(argv_store.size()), argv_store.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (!config_path.empty()) {
            LabConfig file_cfg = config_from_json_file(config_path);
            // flags given on the command line keep priority
            if (!app.count("--seed")) cfg.seed = file_cfg.seed;
            if (!app.count("--chains")) cfg.chains = file_cfg.chains;
            if (!app.count("--atoms")) cfg.atoms = file_cfg.atoms;
            if (!app.count("--burn-in")) cfg.burn_in = file_cfg.burn_in;
            if (!app.count("--out")) cfg.out_dir = file_cfg.out_dir;
            if (!app.count("--format")) cfg.format = file_cfg.format;
            LabConfig merged = file_cfg;
            merged.seed = cfg.seed;
            merged.chains = cfg.chains;
            merged.atoms = cfg.atoms;
            merged.burn_in = cfg.burn_in;
            merged.out_dir = cfg.out_dir;
            merged.format = cfg.format;
            cfg = merged;
        }
        cfg.reuse_atoms = reuse;
        cfg.validate();
        const auto maps = load_maps(registry_path);

        auto map_dir = [&](const std::string& name) {
            const std::string d = cfg.out_dir + "/" + name;
            fs::create_directories(d);
            return d;
        };

        if (*c_sample) {
            const auto entry = find_map(maps, map_name);
            const int depth =
                depth_override > 0 ? depth_override : cfg.burn_in + int(cfg.atoms / cfg.chains);
            const auto mu = sample_measure(entry.map, cfg.chains, depth, cfg.burn_in, cfg.seed);
            const std::string dir = map_dir(map_name);
            save_atoms(mu, dir + "/atoms.csv", dir + "/atoms.json");
            std::printf("sample: map=%s atoms=%zu chains=%d depth=%d burn_in=%d seed=%llu\n",
                        map_name.c_str(), mu.size(), cfg.chains, depth, cfg.burn_in,
                        (unsigned long long)cfg.seed);
            std::printf("wrote %s/atoms.csv (+ provenance sidecar)\n", dir.c_str());
            return 0;
        }

        if (*c_doubling || *c_exponent) {
            const auto entry = find_map(maps, map_name);
            const std::string dir = map_dir(map_name);
            const auto mu = obtain_measure(entry.map, cfg, dir);
            MeasureIndex idx(mu);
            if (*c_doubling) {
                DoublingParams p;
                if (centers > 0) p.centers = centers;
                if (r_min > 0.0) p.r_min = r_min;
                if (r_max > 0.0) p.r_max = r_max;
                p.seed = mix_seed(cfg.seed, 1);
                const auto est = doubling_scan(idx, p);
                json j;
                j["schema_version"] = kSchemaVersion;
                j["map"] = map_name;
                j["verdict"] = to_string(est.verdict);
                j["C_star_hat"] = est.C_star_hat;
                j["r_star"] = est.r_star;
                j["witness_center"] = point_json(est.witness_center);
                j["witness_radius"] = est.witness_radius;
                j["unresolved_fraction"] = est.unresolved_fraction;
                j["growth_witness"] = est.growth_witness;
                j["radius_grid"] = est.radius_grid;
                j["max_ratio_per_radius"] = est.max_ratio_per_radius;
                write_json(j, dir + "/doubling.json");
                std::printf("doubling: map=%s verdict=%s C*=%.3f unresolved=%.1f%%\n",
                            map_name.c_str(), to_string(est.verdict), est.C_star_hat,
                            100.0 * est.unresolved_fraction);
            } else {
                ExponentFitParams p;
                if (centers > 0) p.centers = centers;
                if (r_min > 0.0) p.r_min = r_min;
                if (r_max > 0.0) p.r_max = r_max;
                p.seed = mix_seed(cfg.seed, 2);
                const auto fit = lower_exponent_fit(idx, p);
                json j;
                j["schema_version"] = kSchemaVersion;
                j["map"] = map_name;
                j["alpha_hat"] = fit.alpha_hat;
                j["C_hat"] = fit.C_hat;
                j["alpha_prime_hat"] = fit.alpha_min;
                j["worst_center"] = point_json(fit.worst_center);
                j["growth_signature"] = fit.growth_signature;
                write_json(j, dir + "/exponent.json");
                std::printf("exponent: map=%s alpha_hat=%.4f alpha'=%.4f growth=%d\n",
                            map_name.c_str(), fit.alpha_hat, fit.alpha_min,
                            int(fit.growth_signature));
            }
            return 0;
        }

        if (*c_chiper) {
            const auto entry = find_map(maps, map_name);
            const std::string dir = map_dir(map_name);
            const int cap = period_cap > 0 ? period_cap : cfg.period_cap;
            const auto est = chi_per(entry.map, cap);
            std::vector<PeriodicOrbit> all;
            for (int n = 1; n <= cap; ++n) {
                double logd = double(n) * std::log2(double(entry.map.degree()));
                if (logd > 12.0 + 1e-9) break;
                const auto v = periodic_points(entry.map, n);
                all.insert(all.end(), v.begin(), v.end());
            }
            export_orbits_csv(all, dir + "/orbits.csv");
            json j;
            j["schema_version"] = kSchemaVersion;
            j["map"] = map_name;
            j["period_cap"] = est.period_cap;
            j["chi_per_hat"] = est.per_period_min.empty() ? json() : json(est.chi_per_hat);
            j["note"] = "cap-dependent upper bound for the true infimum";
            j["neutral_found"] = est.neutral_found;
            json ppm = json::object();
            for (const auto& [n, v] : est.per_period_min) ppm[std::to_string(n)] = v;
            j["per_period_min"] = ppm;
            write_json(j, dir + "/chiper.json");
            std::printf("chiper: map=%s cap=%d chi_per_hat=%s neutral=%d (orbits.csv written)\n",
                        map_name.c_str(), est.period_cap,
                        est.per_period_min.empty()
                            ? "n/a"
                            : std::to_string(est.chi_per_hat).c_str(),
                        int(est.neutral_found));
            return 0;
        }

        if (*c_semilocal || *c_tce || *c_expshrink) {
            const auto entry = find_map(maps, map_name);
            const std::string dir = map_dir(map_name);
            const auto crit =
                flagged_critical_points(entry.map, entry.annotations.critical_in_julia);
            const auto mu = obtain_measure(entry.map, cfg, dir);
            if (*c_semilocal) {
                SemihypParams p;
                p.r = scan_r > 0.0 ? scan_r : cfg.scan_r;
                p.m_max = m_max > 0 ? m_max : cfg.scan_m_max;
                if (centers > 0) p.sample_points = centers;
                p.seed = mix_seed(cfg.seed, 3);
                const auto scan = semihyperbolicity_scan(entry.map, crit, mu, p);
                json j;
                j["schema_version"] = kSchemaVersion;
                j["map"] = map_name;
                j["verdict"] = to_string(scan.verdict);
                j["max_degree_per_m"] = scan.max_degree_per_m;
                j["chains"] = scan.chains;
                j["flagged_chains"] = scan.flagged_chains;
                write_json(j, dir + "/semilocal.json");
                std::printf("semilocal: map=%s verdict=%s flagged=%d/%d\n", map_name.c_str(),
                            to_string(scan.verdict), scan.flagged_chains, scan.chains);
            } else if (*c_tce) {
                const SpherePoint x(tce_x_re, tce_x_im);
                const long D = tce_D >= 0 ? tce_D : ell_max(entry.map, crit);
                const int hz = horizon > 0 ? horizon : cfg.tce_horizon;
                const auto rec =
                    tce_density(entry.map, crit, x, scan_r > 0.0 ? scan_r : cfg.scan_r, D, hz);
                json j;
                j["schema_version"] = kSchemaVersion;
                j["map"] = map_name;
                j["x"] = point_json(x);
                j["D"] = D;
                j["horizon"] = hz;
                j["density"] = rec.density;
                j["good_times"] = rec.good_times;
                j["flagged_times"] = rec.flagged_times;
                write_json(j, dir + "/tce.json");
                std::printf("tce: map=%s D=%ld horizon=%d density=%.3f flagged=%d\n",
                            map_name.c_str(), D, hz, rec.density, rec.flagged_times);
            } else {
                ExpShrinkParams p;
                p.r = r_max > 0.0 ? r_max : cfg.expshrink_r;
                p.m_max = m_max > 0 ? m_max : cfg.expshrink_m_max;
                if (centers > 0) p.sample_points = centers;
                p.seed = mix_seed(cfg.seed, 4);
                const auto res = expshrink_decay(entry.map, crit, mu, p);
                json j;
                j["schema_version"] = kSchemaVersion;
                j["map"] = map_name;
                j["lambda_hat"] = res.lambda_hat;
                j["per_m_max_diameter"] = res.per_m_max_diameter;
                j["chains"] = res.chains;
                j["excluded_chains"] = res.excluded_chains;
                write_json(j, dir + "/expshrink.json");
                std::printf("expshrink: map=%s lambda_hat=%.3f excluded=%d/%d\n",
                            map_name.c_str(), res.lambda_hat, res.excluded_chains, res.chains);
            }
            return 0;
        }

        if (*c_porosity || *c_carrot) {
            const auto entry = find_map(maps, map_name);
            const std::string dir = map_dir(map_name);
            const auto J = julia_approximation(entry.map,
                                               resolution > 0.0 ? resolution : cfg.resolution,
                                               cfg.cloud_budget, mix_seed(cfg.seed, 5));
            export_cloud_csv(J, dir + "/cloud.csv");
            export_grid_pgm(J.grid, dir + "/grid.pgm");
            if (*c_porosity) {
                PorosityParams p;
                if (centers > 0) p.centers = centers;
                p.r_min = r_min > 0.0 ? r_min : std::max(0.02, 4.5 * J.grid.h);
                p.r_max = r_max > 0.0 ? r_max : 0.1;
                p.seed = mix_seed(cfg.seed, 6);
                const auto est = porosity_curve(entry.map, J, p);
                json j;
                j["schema_version"] = kSchemaVersion;
                j["map"] = map_name;
                j["radii"] = est.radii;
                j["xi_hat"] = est.xi_hat;
                j["xi_min"] = est.xi_min;
                j["porous_consistent"] = est.porous_consistent;
                j["trust_floor"] = est.trust_floor;
                if (entry.map.is_polynomial()) {
                    const auto bp = boundary_porosity_curve(entry.map, J, p);
                    j["boundary_xi_hat"] = bp.xi_hat;
                    j["boundary_xi_min"] = bp.xi_min;
                }
                write_json(j, dir + "/porosity.json");
                std::printf("porosity: map=%s xi_min=%.3f (trust floor %.4f)\n",
                            map_name.c_str(), est.xi_min, est.trust_floor);
            } else {
                CarrotParams p;
                if (targets > 0) p.targets = targets;
                p.seed = mix_seed(cfg.seed, 7);
                const auto probe = carrot_probe(entry.map, J, p);
                export_carrot_paths_csv(probe, dir + "/carrot_paths.csv");
                json j;
                j["schema_version"] = kSchemaVersion;
                j["map"] = map_name;
                j["C_hat"] = probe.C_hat;
                j["targets"] = probe.targets.size();
                j["discarded"] = probe.discarded;
                j["worst_target"] = point_json(probe.worst_target);
                write_json(j, dir + "/carrot.json");
                std::printf("carrot: map=%s C_hat=%.4f discarded=%d/%zu\n", map_name.c_str(),
                            probe.C_hat, probe.discarded, probe.targets.size());
            }
            return 0;
        }

        if (*c_classify) {
            const auto entry = find_map(maps, map_name);
            const auto rep = classify_map(entry, cfg, map_dir(map_name));
            std::printf("classify: map=%s class=%s doubling=%s scan=%s neutral=%d uhp=%d "
                        "lambda=%.3f alpha=%.3f contradiction=%d\n",
                        rep.map_name.c_str(), rep.expected_class.c_str(),
                        to_string(rep.doubling.verdict), to_string(rep.semihyp.verdict),
                        int(rep.chiper.neutral_found), int(rep.uhp_holds),
                        rep.expshrink.lambda_hat, rep.exponent.alpha_hat,
                        int(rep.contradiction));
            for (const auto& c : rep.checks)
                std::printf("  [%s] %s%s%s\n", c.status.c_str(), c.name.c_str(),
                            c.note.empty() ? "" : ": ", c.note.c_str());
            return rep.contradiction ? 1 : 0;
        }

        if (*c_corpus) {
            std::vector<MapReport> reports;
            bool bad = false;
            for (const auto& entry : maps) {
                const auto rep = classify_map(entry, cfg, map_dir(entry.map.name()));
                std::printf("corpus: %-8s doubling=%-20s scan=%-40s neutral=%d contradiction=%d\n",
                            rep.map_name.c_str(), to_string(rep.doubling.verdict),
                            to_string(rep.semihyp.verdict), int(rep.chiper.neutral_found),
                            int(rep.contradiction));
                bad = bad || rep.contradiction;
                reports.push_back(rep);
            }
            write_classification_summary(reports, cfg.out_dir + "/summary.json");
            std::printf("corpus summary written to %s/summary.json\n", cfg.out_dir.c_str());
            return bad ? 1 : 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}

}  // namespace rmlab
