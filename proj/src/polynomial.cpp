#include "rmlab/polynomial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rmlab {

bool Poly::is_zero(double tol) const {
    for (const auto& v : c_)
        if (std::abs(v) > tol) return false;
    return true;
}

Poly Poly::trimmed(double rel_tol) const {
    const double cut = rel_tol * max_abs_coeff();
    size_t n = c_.size();
    while (n > 1 && std::abs(c_[n - 1]) <= cut) --n;
    return Poly(std::vector<cplx>(c_.begin(), c_.begin() + n));
}

cplx Poly::eval(cplx z) const {
    cplx s = c_.back();
    for (size_t k = c_.size() - 1; k-- > 0;) s = s * z + c_[k];
    return s;
}

void Poly::eval2(cplx z, cplx& value, cplx& deriv) const {
    cplx s = c_.back(), d = 0.0;
    for (size_t k = c_.size() - 1; k-- > 0;) {
        d = d * z + s;
        s = s * z + c_[k];
    }
    value = s;
    deriv = d;
}

Poly Poly::derivative() const {
    if (c_.size() <= 1) return Poly();
    std::vector<cplx> d(c_.size() - 1);
    for (size_t k = 1; k < c_.size(); ++k) d[k - 1] = c_[k] * double(k);
    return Poly(std::move(d));
}

Poly Poly::operator*(const Poly& o) const {
    std::vector<cplx> r(c_.size() + o.c_.size() - 1, cplx(0.0));
    for (size_t i = 0; i < c_.size(); ++i) {
        if (c_[i] == cplx(0.0)) continue;
        for (size_t j = 0; j < o.c_.size(); ++j) r[i + j] += c_[i] * o.c_[j];
    }
    return Poly(std::move(r));
}

Poly Poly::operator+(const Poly& o) const {
    std::vector<cplx> r(std::max(c_.size(), o.c_.size()), cplx(0.0));
    for (size_t i = 0; i < c_.size(); ++i) r[i] += c_[i];
    for (size_t i = 0; i < o.c_.size(); ++i) r[i] += o.c_[i];
    return Poly(std::move(r));
}

Poly Poly::operator-(const Poly& o) const {
    std::vector<cplx> r(std::max(c_.size(), o.c_.size()), cplx(0.0));
    for (size_t i = 0; i < c_.size(); ++i) r[i] += c_[i];
    for (size_t i = 0; i < o.c_.size(); ++i) r[i] -= o.c_[i];
    return Poly(std::move(r));
}

Poly Poly::scaled(cplx s) const {
    std::vector<cplx> r(c_);
    for (auto& v : r) v *= s;
    return Poly(std::move(r));
}

double Poly::max_abs_coeff() const {
    double m = 0.0;
    for (const auto& v : c_) m = std::max(m, std::abs(v));
    return m;
}

double Poly::sum_abs_coeff() const {
    double s = 0.0;
    for (const auto& v : c_) s += std::abs(v);
    return s;
}

double ScaledCplx::log_abs() const {
    const double a = std::abs(m);
    if (a == 0.0) return -std::numeric_limits<double>::infinity();
    return std::log(a) + double(e2) * 0.6931471805599453;
}

cplx ScaledCplx::to_cplx() const {
    return cplx(std::ldexp(m.real(), int(e2)), std::ldexp(m.imag(), int(e2)));
}

void ScaledCplx::normalize() {
    const double a = std::max(std::abs(m.real()), std::abs(m.imag()));
    if (a == 0.0) {
        e2 = 0;
        return;
    }
    int k = 0;
    std::frexp(a, &k);
    if (k > 64 || k < -64) {
        m = cplx(std::ldexp(m.real(), -k), std::ldexp(m.imag(), -k));
        e2 += k;
    }
}

cplx scaled_ratio(const ScaledCplx& a, const ScaledCplx& b) {
    if (b.is_zero()) return cplx(std::numeric_limits<double>::infinity(), 0.0);
    if (a.is_zero()) return cplx(0.0, 0.0);
    const cplx q = a.m / b.m;
    const long e = a.e2 - b.e2;
    if (e > 2000) return cplx(std::numeric_limits<double>::infinity(), 0.0);
    if (e < -2000) return cplx(0.0, 0.0);
    return cplx(std::ldexp(q.real(), int(e)), std::ldexp(q.imag(), int(e)));
}

namespace {

inline cplx ldexp_c(cplx v, int k) {
    return cplx(std::ldexp(v.real(), k), std::ldexp(v.imag(), k));
}

}  // namespace

void scaled_eval(const std::vector<cplx>& coeffs, cplx z, ScaledCplx& value,
                 ScaledCplx& deriv, ScaledCplx& abs_bound) {
    const size_t n = coeffs.size();
    const double az = std::abs(z);
    // State (s, d, bound) is the true quantity times 2^-e.
    cplx s = 0.0, d = 0.0;
    double bound = 0.0;
    long e = 0;
    bool empty = true;
    size_t steps = 0;
    for (size_t k = n; k-- > 0;) {
        if (!empty) {
            d = d * z + s;
            s = s * z;
            bound *= az;
        }
        const double ca = std::max(std::abs(coeffs[k].real()), std::abs(coeffs[k].imag()));
        if (ca != 0.0) {
            int ce = 0;
            std::frexp(ca, &ce);
            if (empty) {
                s = ldexp_c(coeffs[k], -ce);
                bound = std::abs(s);
                e = ce;
                empty = false;
            } else {
                long inj = long(ce) - e;
                if (inj > 200) {
                    // Huge coefficient relative to the running scale: shift the
                    // state down so the injection stays representable.
                    const int sh = int(inj);
                    s = ldexp_c(s, -sh);
                    d = ldexp_c(d, -sh);
                    bound = std::ldexp(bound, -sh);
                    e += inj;
                    inj = 0;
                }
                if (inj >= -1020) {
                    const cplx add = ldexp_c(coeffs[k], int(-e));
                    s += add;
                    bound += std::abs(add);
                }
            }
        }
        if (!empty && (++steps & 15u) == 0) {
            const double a = std::max({std::abs(s.real()), std::abs(s.imag()),
                                       std::abs(d.real()), std::abs(d.imag()), bound});
            if (a > 0x1.0p+200 || (a > 0.0 && a < 0x1.0p-200)) {
                int sh = 0;
                std::frexp(a, &sh);
                s = ldexp_c(s, -sh);
                d = ldexp_c(d, -sh);
                bound = std::ldexp(bound, -sh);
                e += sh;
            }
        }
    }
    value = {s, e};
    deriv = {d, e};
    abs_bound = {cplx(bound, 0.0), e};
    value.normalize();
    deriv.normalize();
    abs_bound.normalize();
}

}  // namespace rmlab
