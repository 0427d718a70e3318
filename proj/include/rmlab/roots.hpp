#pragma once

#include "rmlab/polynomial.hpp"

#include <vector>

namespace rmlab {

struct RootEntry {
    cplx z;
    int multiplicity = 1;
    double residual = 0.0;        // backward error |p(z)| / sum |c_k||z|^k
    bool certified = false;
};

struct PolyRootResult {
    std::vector<RootEntry> roots;  // multiplicities sum to the polynomial degree
    bool all_certified = false;
    int sweeps = 0;

    int total_multiplicity() const {
        int t = 0;
        for (const auto& r : roots) t += r.multiplicity;
        return t;
    }
};

struct SolveOptions {
    int max_sweeps = 400;
    double step_tol = 1e-14;        // relative Aberth step for convergence
    double certify_tol = 1e-9;      // backward-error bound for "certified"
    double cluster_tol = 2e-6;      // relative distance that merges a root cluster
    bool polish_clusters = true;    // multiplicity-aware Newton on cluster centroids
};

/// All complex roots of the polynomial (ascending coefficients, nonzero
/// leading coefficient, degree >= 1) by simultaneous Ehrlich-Aberth
/// refinement from a deterministic circle of initial guesses. Evaluation is
/// scale-guarded, so iterates of high-degree compositions with extreme
/// coefficient spread do not overflow. Deterministic for fixed input.
PolyRootResult solve_polynomial(const std::vector<cplx>& coeffs,
                                const SolveOptions& opts = {});

}  // namespace rmlab
