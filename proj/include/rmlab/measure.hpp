#pragma once

#include "rmlab/kdtree.hpp"
#include "rmlab/rational_map.hpp"
#include "rmlab/sphere.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace rmlab {

struct Provenance {
    std::string map_name;
    std::uint64_t seed = 0;
    int chains = 0;
    int burn_in = 0;
    int depth = 0;
};

/// Weighted atom cloud approximating the maximal entropy measure, sampled by
/// backward iteration with uniform choice among preimages (with multiplicity).
struct EmpiricalMeasure {
    std::vector<SpherePoint> atoms;
    std::vector<double> weights;          // positive, sum to total_weight
    std::vector<size_t> chain_offsets;    // size chains()+1, atoms grouped by chain
    double total_weight = 0.0;
    Provenance provenance;
    std::vector<std::string> chain_failures;

    size_t size() const { return atoms.size(); }
    int chains() const { return int(chain_offsets.empty() ? 0 : chain_offsets.size() - 1); }
};

EmpiricalMeasure sample_measure(const RationalMap& f, int chains, int depth, int burn_in,
                                std::uint64_t seed);

EmpiricalMeasure merge(const EmpiricalMeasure& a, const EmpiricalMeasure& b);

void save_atoms(const EmpiricalMeasure& mu, const std::string& csv_path,
                const std::string& json_sidecar_path);
EmpiricalMeasure load_atoms(const std::string& csv_path, const std::string& json_sidecar_path);

/// Spatial index over the atoms (one kd-tree per chain, so ball statistics
/// come with chain-block resampling errors).
class MeasureIndex {
  public:
    explicit MeasureIndex(const EmpiricalMeasure& mu);

    struct Mass {
        double estimate = 0.0;
        double std_error = 0.0;
        size_t atom_count = 0;
    };

    /// Weight of the ball with a chain-block bootstrap standard error.
    Mass ball_mass(const SphereBall& ball) const;

    /// Weight and atom count only (no error bar; cheaper).
    KdTree3::BallStat ball_stat(const SphereBall& ball) const;

    /// Calls fn(atom_index) for every atom inside the ball.
    void visit_ball(const SphereBall& ball, const std::function<void(size_t)>& fn) const;

    const EmpiricalMeasure& measure() const { return mu_; }

  private:
    const EmpiricalMeasure& mu_;
    std::vector<KdTree3> chain_trees_;
    std::uint64_t boot_seed_;

    std::vector<double> per_chain_weight(const SphereBall& ball, size_t& count) const;
};

struct BallMassCurve {
    SpherePoint center;
    std::vector<double> radii;
    std::vector<double> masses;
    std::vector<double> std_errors;
    std::vector<size_t> counts;
};

BallMassCurve ball_mass_curve(const MeasureIndex& idx, const SpherePoint& center,
                              const std::vector<double>& radii);

std::vector<double> geometric_grid(double r_min, double r_max, int n);

enum class DoublingVerdict { consistent, violated, inconclusive };
const char* to_string(DoublingVerdict v);

struct DoublingParams {
    int centers = 400;
    int radii_per_center = 6;
    double r_min = 0.08;
    double r_max = 0.45;
    double ratio_ceiling = 1e3;
    size_t min_atoms = 200;
    double unresolved_tol = 0.05;
    double growth_slope = -0.4;     // log-log slope of per-center ratio curves
    double growth_min_ratio = 4.0;  // ignore growth on near-flat small ratios
    std::uint64_t seed = 17;
    std::vector<SpherePoint> probe_points;  // deterministic extra centers
};

struct DoublingEstimate {
    double C_star_hat = 1.0;
    double r_star = 0.0;              // smallest radius with a resolved sample
    SpherePoint witness_center;
    double witness_radius = 0.0;
    DoublingVerdict verdict = DoublingVerdict::inconclusive;
    // evidence
    size_t samples = 0, resolved = 0;
    double unresolved_fraction = 0.0;
    double worst_growth_slope = 0.0;  // most negative per-center ratio slope
    SpherePoint growth_witness_center;
    bool growth_witness = false;
    std::vector<double> radius_grid;
    std::vector<double> max_ratio_per_radius;
};

DoublingEstimate doubling_scan(const MeasureIndex& idx, const DoublingParams& params);

struct ExponentFitParams {
    int centers = 100;                      // atom-drawn when explicit list empty
    std::vector<SpherePoint> center_points;
    double r_min = 0.01;
    double r_max = 0.1;
    int n_radii = 10;
    size_t min_atoms = 50;
    int min_radii = 3;
    std::uint64_t seed = 29;
};

struct CenterFit {
    SpherePoint center;
    double slope = 0.0;
    double intercept = 0.0;  // ln C
    int resolved_radii = 0;
    double slope_lower_half = 0.0;  // small radii
    double slope_upper_half = 0.0;  // large radii
};

struct ExponentFit {
    double alpha_hat = 0.0;   // binding (maximal) slope over centers
    double C_hat = 0.0;
    SpherePoint worst_center;
    double alpha_min = 0.0;   // minimal slope (upper-exponent check)
    SpherePoint min_center;
    std::vector<CenterFit> per_center;
    bool growth_signature = false;  // slopes steepen at small radii somewhere
    int skipped_centers = 0;
};

ExponentFit lower_exponent_fit(const MeasureIndex& idx, const ExponentFitParams& params);

/// Minimal per-center slope; positive for every map once resolved.
double upper_exponent_check(const MeasureIndex& idx, const ExponentFitParams& params,
                            ExponentFit* detail = nullptr);

struct InverseDoublingParams {
    double eta = 2.0;
    int centers = 100;
    double r_min = 0.02;
    double r_max = 0.2;
    int n_radii = 6;
    size_t min_atoms = 200;
    std::uint64_t seed = 43;
};

struct InverseDoublingReport {
    double min_inflation = 0.0;      // min over resolved of mass(eta r)/mass(r)
    double min_annulus_ratio = 0.0;  // min of mass(B(eta r) \ B(r))/mass(r)
    double eta_for_doubling = 0.0;   // smallest grid eta with inflation >= 2 everywhere
    size_t resolved = 0, samples = 0;
};

InverseDoublingReport inverse_doubling_stats(const MeasureIndex& idx,
                                             const InverseDoublingParams& params);

}  // namespace rmlab
