#pragma once

#include "rmlab/kdtree.hpp"
#include "rmlab/measure.hpp"
#include "rmlab/rational_map.hpp"
#include "rmlab/sphere.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rmlab {

/// Occupancy grid over a square box in a planar chart.
struct ChartGrid {
    bool inverse_chart = false;
    double x0 = 0.0, y0 = 0.0, h = 0.0;
    int nx = 0, ny = 0;
    std::vector<std::uint8_t> occupied;   // a cloud point fell in the cell
    std::vector<std::uint8_t> escaping;   // polynomial only: center escapes
    std::vector<float> dist_lower;        // chordal lower bound to the cloud

    int cell_of(double x, double y) const {
        const int ix = int(std::floor((x - x0) / h));
        const int iy = int(std::floor((y - y0) / h));
        if (ix < 0 || iy < 0 || ix >= nx || iy >= ny) return -1;
        return iy * nx + ix;
    }
};

/// Computational stand-in for the Julia set: a backward-iteration point
/// cloud with a kd-tree, plus chart grids (occupancy, escape mask and a
/// sound distance lower bound). All geometric verdicts are qualified by the
/// resolution trust range [4h, r_cap].
struct JuliaApproximation {
    std::vector<SpherePoint> cloud;
    KdTree3 tree;                 // over sphere embeddings of the cloud
    ChartGrid grid;               // identity chart
    std::optional<ChartGrid> grid_inv;  // rational maps: the chart at infinity
    std::optional<KdTree3> filled_tree;  // polynomial: non-escaping cell centers
    double resolution = 0.0;      // grid h
    bool is_polynomial = false;
    double escape_radius = 0.0;

    double nn_chordal(const SpherePoint& p) const { return tree.nearest_distance(embed3(p)); }
};

JuliaApproximation julia_approximation(const RationalMap& f, double resolution,
                                       long point_budget, std::uint64_t seed);

struct GreenValue {
    double value = 0.0;
    bool escaped = false;
    int steps = 0;
};

/// Escape potential of the basin of infinity (polynomials): the limit of
/// deg^-n ln|f^n(z)|, truncated once the orbit passes the escape radius.
/// Non-escaping points report 0.
GreenValue green_function(const RationalMap& f, const SpherePoint& z, int horizon = 400);

/// Finite-difference gradient of the potential in the identity chart.
cplx green_gradient(const RationalMap& f, cplx z, double step);

struct PorosityParams {
    int centers = 24;
    double r_min = 0.02;
    double r_max = 0.1;
    int n_radii = 6;
    int directions = 16;
    int radial_samples = 6;
    std::uint64_t seed = 113;
    bool boundary_mode = false;  // holes must avoid the filled set (polynomials)
};

struct PorosityEstimate {
    std::vector<double> radii;
    std::vector<double> xi_hat;   // per radius min over centers of best hole / r
    SpherePoint witness_center;
    double witness_radius = 0.0;
    double xi_min = 0.0;          // min over the trusted radius range
    bool porous_consistent = false;
    double trust_floor = 0.0;     // 4h: radii below are rejected
};

PorosityEstimate porosity_curve(const RationalMap& f, const JuliaApproximation& J,
                                const PorosityParams& params);

/// Same probe with holes restricted to the complement of the filled Julia
/// set; polynomial maps only.
PorosityEstimate boundary_porosity_curve(const RationalMap& f, const JuliaApproximation& J,
                                         const PorosityParams& params);

struct PerfectnessParams {
    int centers = 60;
    double r_min = 0.02;
    double r_max = 0.1;
    int n_radii = 5;
    std::uint64_t seed = 127;
};

struct PerfectnessEstimate {
    double eta_hat = 0.0;  // smallest grid eta with every annulus inhabited
    SpherePoint worst_center;
    double worst_radius = 0.0;
    size_t samples = 0;
};

PerfectnessEstimate uniform_perfectness(const JuliaApproximation& J,
                                        const PerfectnessParams& params);

struct CarrotParams {
    int targets = 64;
    std::vector<SpherePoint> target_points;  // explicit targets override sampling
    std::uint64_t seed = 131;
    double anchor_offset = 2e-3;
    int max_steps = 600;
};

struct CarrotTarget {
    SpherePoint target;
    double constant = 0.0;     // min over the path of dist(w, boundary)/dist(w, target)
    bool reached = true;
    std::vector<SpherePoint> path;
};

struct CarrotProbe {
    std::vector<CarrotTarget> targets;
    double C_hat = 0.0;          // min over reached targets
    SpherePoint worst_target;
    int discarded = 0;           // targets with no usable ascent anchor
};

/// John/carrot probe of the basin of infinity along field lines of the
/// escape potential (the external rays); polynomial maps only. The
/// reference point is the potential's maximum on the closed sphere, i.e.
/// infinity itself.
CarrotProbe carrot_probe(const RationalMap& f, const JuliaApproximation& J,
                         const CarrotParams& params);

void export_cloud_csv(const JuliaApproximation& J, const std::string& path);
void export_grid_pgm(const ChartGrid& grid, const std::string& path);
void export_carrot_paths_csv(const CarrotProbe& probe, const std::string& path);

}  // namespace rmlab
