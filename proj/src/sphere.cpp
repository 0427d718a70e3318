#include "rmlab/sphere.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace rmlab {

double chordal_distance(const SpherePoint& p, const SpherePoint& q) {
    if (p.at_infinity && q.at_infinity) return 0.0;
    if (p.at_infinity) return 2.0 / std::hypot(1.0, std::abs(q.z));
    if (q.at_infinity) return 2.0 / std::hypot(1.0, std::abs(p.z));
    // Factor the two scale terms separately so huge coordinates cannot
    // overflow in the product; divide by the larger factor first so the
    // result is exactly symmetric in (p, q).
    const double num = std::abs(p.z - q.z);
    double hp = std::hypot(1.0, std::abs(p.z));
    double hq = std::hypot(1.0, std::abs(q.z));
    if (hp < hq) std::swap(hp, hq);
    const double d = 2.0 * (num / hp) / hq;
    return d > 2.0 ? 2.0 : d;
}

SpherePoint antipode(const SpherePoint& p) {
    if (p.at_infinity) return SpherePoint(0.0, 0.0);
    if (p.z == cplx(0.0, 0.0)) return SpherePoint::infinity();
    return SpherePoint(-1.0 / std::conj(p.z));
}

std::array<double, 3> embed3(const SpherePoint& p) {
    if (p.at_infinity) return {0.0, 0.0, 1.0};
    const double a = std::abs(p.z);
    if (a <= 1.0) {
        const double s = 1.0 + a * a;
        return {2.0 * p.z.real() / s, 2.0 * p.z.imag() / s, (a * a - 1.0) / s};
    }
    // Work with 1/z for large moduli; same formula with the height flipped.
    const cplx u = 1.0 / p.z;
    const double b = std::abs(u);
    const double s = 1.0 + b * b;
    return {2.0 * u.real() / s, -2.0 * u.imag() / s, (1.0 - b * b) / s};
}

bool ball_contains(const SphereBall& b, const SpherePoint& p) {
    return chordal_distance(b.center, p) < b.radius;
}

double set_diameter(std::span<const SpherePoint> points) {
    if (points.empty()) throw std::invalid_argument("set_diameter: empty point list");
    std::vector<std::array<double, 3>> e(points.size());
    for (size_t i = 0; i < points.size(); ++i) e[i] = embed3(points[i]);
    double best = 0.0;
    for (size_t i = 0; i < e.size(); ++i) {
        for (size_t j = i + 1; j < e.size(); ++j) {
            const double dx = e[i][0] - e[j][0];
            const double dy = e[i][1] - e[j][1];
            const double dz = e[i][2] - e[j][2];
            const double d2 = dx * dx + dy * dy + dz * dz;
            if (d2 > best) best = d2;
        }
    }
    return std::sqrt(best);
}

}  // namespace rmlab
