#pragma once

#include <array>
#include <complex>
#include <span>
#include <vector>

namespace rmlab {

using cplx = std::complex<double>;

/// Point on the Riemann sphere. Infinity is a tagged state, never a large
/// float, so poles and backward orbits through infinity stay exact.
struct SpherePoint {
    cplx z{0.0, 0.0};
    bool at_infinity = false;

    SpherePoint() = default;
    SpherePoint(double re, double im) : z(re, im) {}
    SpherePoint(cplx v) : z(v) {}

    static SpherePoint infinity() {
        SpherePoint p;
        p.at_infinity = true;
        return p;
    }

    bool finite() const { return !at_infinity; }
    double re() const { return z.real(); }
    double im() const { return z.imag(); }
};

/// Chordal (spherical) distance, values in [0, 2]. Antipodal points are at
/// distance exactly 2. Safe for coordinates of any magnitude.
double chordal_distance(const SpherePoint& p, const SpherePoint& q);

/// Antipodal point: z -> -1/conj(z), 0 <-> infinity.
SpherePoint antipode(const SpherePoint& p);

/// Embedding into the unit sphere of R^3; Euclidean distance between
/// embedded points equals the chordal distance exactly.
std::array<double, 3> embed3(const SpherePoint& p);

struct SphereBall {
    SpherePoint center;
    double radius = 0.0;  // chordal units, in (0, 2]
};

bool ball_contains(const SphereBall& b, const SpherePoint& p);

/// Maximal pairwise chordal distance over the sample (a lower bound for the
/// diameter of the underlying set). Throws on an empty list.
double set_diameter(std::span<const SpherePoint> points);

inline bool same_point(const SpherePoint& a, const SpherePoint& b, double tol = 0.0) {
    return chordal_distance(a, b) <= tol;
}

}  // namespace rmlab
