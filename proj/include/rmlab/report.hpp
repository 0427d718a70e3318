#pragma once

#include "rmlab/julia.hpp"
#include "rmlab/measure.hpp"
#include "rmlab/periodic.hpp"
#include "rmlab/pullback.hpp"
#include "rmlab/rational_map.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rmlab {

constexpr int kSchemaVersion = 1;

struct LabConfig {
    std::uint64_t seed = 20240814;
    int chains = 128;
    long atoms = 1000000;  // depth is derived: burn_in + atoms/chains
    int burn_in = 100;

    double doubling_r_min = 0.08;
    double doubling_r_max = 0.48;
    int doubling_radii = 8;
    int doubling_centers = 400;
    double zoom_r_min = 0.1;   // probe-only scan grid
    double zoom_r_max = 0.95;
    int zoom_radii = 12;

    double exponent_r_min = 0.03;
    double exponent_r_max = 0.3;
    int exponent_radii = 10;
    int exponent_centers = 80;

    int period_cap = 12;

    double scan_r = 0.1;     // semi-local degree scans
    int scan_m_max = 36;
    int scan_points = 16;

    int tce_horizon = 36;

    int expshrink_points = 14;
    int expshrink_m_max = 16;
    double expshrink_r = 0.1;

    double resolution = 0.004;  // julia grid h
    long cloud_budget = 150000;
    int porosity_centers = 20;
    int carrot_targets = 48;
    int jacobian_trials = 40;

    std::string out_dir = "out";
    std::string format = "json";  // json | csv
    bool reuse_atoms = false;     // load persisted atoms instead of sampling

    void validate() const;  // throws naming the offending field
};

struct TheoremCheck {
    std::string name;
    std::string status;  // "consistent" | "contradiction" | "inconclusive"
    std::string note;
};

struct MapReport {
    std::string map_name;
    std::string expected_class;

    DoublingEstimate doubling;
    DoublingEstimate doubling_zoom;  // probe-only scan on a wide dense grid
    ExponentFit exponent;
    double alpha_prime = 0.0;
    ChiPerEstimate chiper;
    OptimalAlpha alpha_opt;
    bool uhp_holds = false;
    double uhp_lambda = 0.0;
    SemihypScan semihyp;
    GoodTimeRecord tce;
    long tce_D = 1;
    ExpShrinkResult expshrink;
    PorosityEstimate porosity;
    std::optional<PorosityEstimate> boundary_porosity;
    std::optional<CarrotProbe> carrot;
    std::vector<double> carrot_near_neutral;  // constants along a cusp-approach sequence
    JacobianReport jacobian;

    std::vector<TheoremCheck> checks;
    bool contradiction = false;
    std::map<std::string, std::string> artifacts;
};

/// Deterministic probe points derived from the periodic data: neutral cycle
/// points with a few backward steps, and the slowest repelling fixed points.
/// Atom-drawn scan centers almost never witness parabolic degeneration, so
/// scans receive these as extra centers.
std::vector<SpherePoint> probe_points(const RationalMap& f, const ChiPerEstimate& chiper,
                                      const std::vector<PeriodicOrbit>& fixed_orbits);

MapReport classify_map(const RegistryEntry& entry, const LabConfig& cfg,
                       const std::string& artifact_dir);

void write_map_report_json(const MapReport& rep, const std::string& path);
void write_classification_summary(const std::vector<MapReport>& reports,
                                  const std::string& path);

LabConfig config_from_json_file(const std::string& path);
void config_to_json_file(const LabConfig& cfg, const std::string& path);

}  // namespace rmlab
