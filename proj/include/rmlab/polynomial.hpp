#pragma once

#include <complex>
#include <vector>

namespace rmlab {

using cplx = std::complex<double>;

/// Dense complex polynomial, coefficients in ascending order (c[0] is the
/// constant term). The represented degree is size() - 1; callers keep the
/// leading coefficient nonzero via trim().
class Poly {
  public:
    Poly() : c_{cplx(0.0)} {}
    explicit Poly(std::vector<cplx> coeffs) : c_(std::move(coeffs)) {
        if (c_.empty()) c_.push_back(cplx(0.0));
    }

    static Poly constant(cplx v) { return Poly({v}); }

    int degree() const { return static_cast<int>(c_.size()) - 1; }
    cplx lead() const { return c_.back(); }
    const std::vector<cplx>& coeffs() const { return c_; }
    cplx operator[](size_t k) const { return k < c_.size() ? c_[k] : cplx(0.0); }

    bool is_zero(double tol = 0.0) const;

    /// Drop trailing coefficients with |c| <= tol * max|c|.
    Poly trimmed(double rel_tol = 0.0) const;

    cplx eval(cplx z) const;
    /// Value and first derivative in one Horner pass.
    void eval2(cplx z, cplx& value, cplx& deriv) const;

    Poly derivative() const;
    Poly operator*(const Poly& o) const;
    Poly operator+(const Poly& o) const;
    Poly operator-(const Poly& o) const;
    Poly scaled(cplx s) const;

    double max_abs_coeff() const;
    double sum_abs_coeff() const;

  private:
    std::vector<cplx> c_;
};

/// Complex value carried as mantissa * 2^exp2 so that evaluations of
/// polynomials with coefficient spreads near the double range stay finite.
struct ScaledCplx {
    cplx m{0.0, 0.0};
    long e2 = 0;

    bool is_zero() const { return m == cplx(0.0, 0.0); }
    double log_abs() const;   // natural log of the modulus, -inf for zero
    cplx to_cplx() const;     // may overflow/underflow to inf/0
    void normalize();
};

/// Ratio a/b as a plain complex (the usual case in Newton/Aberth updates);
/// saturates instead of producing inf/nan when the scales are extreme.
cplx scaled_ratio(const ScaledCplx& a, const ScaledCplx& b);

/// Overflow-safe Horner evaluation: value, derivative, and the running
/// bound sum |c_k| |z|^k used for backward-error certification.
void scaled_eval(const std::vector<cplx>& coeffs, cplx z, ScaledCplx& value,
                 ScaledCplx& deriv, ScaledCplx& abs_bound);

}  // namespace rmlab
