#pragma once

#include "rmlab/polynomial.hpp"
#include "rmlab/roots.hpp"
#include "rmlab/sphere.hpp"

#include <optional>
#include <string>
#include <vector>

namespace rmlab {

struct CriticalPoint {
    SpherePoint point;
    int local_degree = 2;  // multiplicity + 1
    bool in_julia = false;
};

struct CriticalSet {
    std::vector<CriticalPoint> points;
    int total_multiplicity() const {
        int t = 0;
        for (const auto& p : points) t += p.local_degree - 1;
        return t;
    }
};

struct PreimageSet {
    std::vector<SpherePoint> points;     // expanded with multiplicity, deg(f) entries
    std::vector<double> residuals;       // backward errors, 0 for exact infinity
    bool certified = false;
};

struct MapAnnotations {
    std::string expected_class;          // "hyperbolic" | "semi-hyperbolic" | "parabolic" | "other"
    std::optional<std::vector<int>> critical_in_julia;  // overrides the heuristic
};

/// Rational map of degree >= 2 given by numerator/denominator coefficient
/// lists (ascending). Evaluation runs in homogeneous coordinates [z : w], so
/// poles and the point at infinity are exact, never overflow artifacts.
class RationalMap {
  public:
    RationalMap(Poly numerator, Poly denominator, std::string name = "",
                bool validate = true);

    static RationalMap polynomial(std::vector<cplx> coeffs, std::string name = "");

    const std::string& name() const { return name_; }
    int degree() const { return degree_; }
    bool is_polynomial() const { return den_.degree() == 0; }
    const Poly& numerator() const { return num_; }
    const Poly& denominator() const { return den_; }

    SpherePoint evaluate(const SpherePoint& p) const;
    SpherePoint evaluate_n(const SpherePoint& p, int n) const;

    /// Derivative with respect to the spherical metric, continuously
    /// extended through poles and infinity. Total on the sphere.
    double spherical_derivative(const SpherePoint& p) const;

    /// Complex derivative in the identity chart (finite p, finite f(p)).
    cplx chart_derivative(cplx z) const;

    CriticalSet critical_points() const;

    /// All deg(f) preimages of y, counted with multiplicity.
    PreimageSet preimages(const SpherePoint& y, const SolveOptions& opts = {}) const;

    /// Coefficient representation of f^n; throws when deg^n exceeds the cap.
    RationalMap iterate(int n, long degree_cap = 1l << 14) const;

    RationalMap composed_with(const RationalMap& inner, long degree_cap = 1l << 14) const;

    /// Conjugation by z -> 1/z (the map in the chart at infinity).
    RationalMap conjugate_by_inversion() const;

    /// log(sum |coeffs|) of the numerator — the conditioning proxy used to
    /// decide whether expanded-coefficient root solving is trustworthy.
    double log_coeff_sum() const;

  private:
    Poly num_, den_;
    int degree_;
    std::string name_;

    void homogeneous_eval(const SpherePoint& p, cplx& a, cplx& b) const;
};

/// Forward-orbit classification of a critical point: attracted to an
/// attracting or parabolic cycle (or escaping for polynomials) means
/// "not in the Julia set"; everything else is flagged as in it.
struct CriticalOrbitFate {
    bool in_julia = false;
    bool attracted = false;
    bool escaped = false;
    int cycle_period = 0;
    double cycle_multiplier_abs = 0.0;
    std::vector<SpherePoint> cycle;  // polished cycle when attracted
};

struct JuliaFlagOptions {
    int horizon = 10000;
    double cycle_tol = 1e-9;
    int max_probe_period = 24;
};

CriticalOrbitFate classify_critical_orbit(const RationalMap& f, const SpherePoint& c,
                                          const JuliaFlagOptions& opts = {});

/// Critical set with in_julia flags resolved (heuristic or annotation override).
CriticalSet flagged_critical_points(const RationalMap& f,
                                    const std::optional<std::vector<int>>& override_indices,
                                    const JuliaFlagOptions& opts = {});

/// Maximal critical local degree in J(f); the hat variant is exact without
/// critical connections, otherwise the 2^(2 deg - 2) bound is used.
int ell_max(const RationalMap& f, const CriticalSet& crit);
long ell_max_hat(const RationalMap& f, const CriticalSet& crit);

struct RegistryEntry {
    RationalMap map;
    MapAnnotations annotations;
};

std::vector<RegistryEntry> load_registry(const std::string& path);
std::vector<RegistryEntry> builtin_corpus();

}  // namespace rmlab
