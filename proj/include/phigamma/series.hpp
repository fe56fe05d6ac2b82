#pragma once

#include <vector>

#include "phigamma/padic.hpp"

namespace phig {

// Truncated Laurent series  sum_{d >= lo} a_d X^d  over a fixed scalar field.
// Stored coefficients cover degrees lo..K-1.  When `entire` is set the object
// is an exact Laurent polynomial: every degree outside the window is exactly
// zero.  Otherwise degrees >= K are unknown and `rel` marks the last degree
// whose stored coefficient is meaningful; arithmetic pushes that boundary
// down exactly as unknown tails can contaminate the result.  On top of the
// degree window every coefficient carries its own certified p-adic precision.
class Series {
 public:
  static constexpr int INF = Scalar::INF;

  FieldHandle F;
  int lo = 0;
  int K = 0;          // exclusive upper end of the stored window
  int rel = INF;      // last reliable degree; INF together with entire
  bool entire = true;
  std::vector<Scalar> a;  // a[i] is the coefficient of X^(lo+i)

  Series() = default;
  explicit Series(const FieldHandle& f) : F(f) {}

  // --- constructors producing exact Laurent polynomials ------------------
  static Series zero(const FieldHandle& F);
  static Series constant(const FieldHandle& F, const Scalar& c);
  static Series one(const FieldHandle& F);
  static Series X(const FieldHandle& F);
  static Series monomial(const FieldHandle& F, const Scalar& c, int d);
  static Series from_ints(const FieldHandle& F,
                          const std::vector<long long>& cs, int lo = 0);
  // q = ((1+X)^p - 1)/X, the degree p-1 polynomial with q(0) = p.
  static Series qpoly(const FieldHandle& F);
  // (1+X)^n truncated to the window [0, Kw); exact for n >= 0 with n < Kw.
  static Series one_plus_X_pow(const FieldHandle& F, long long n, int Kw);

  // --- shape helpers ------------------------------------------------------
  int unreliable_from() const { return entire ? INF : rel + 1; }
  Scalar coeff(int d) const;                 // exact zero outside the window
  Scalar coeff_checked(int d) const;         // throws beyond the trust limit
  bool is_entire_zero() const;
  int order() const;  // lowest certified-nonzero degree; NonInvertiblePole if
                      // hidden behind a precision-level zero
  Series trimmed() const;
  Series truncated(int K2) const;            // forget degrees >= K2
  Series shifted(int k) const;               // multiply by X^k
  Series to_field(const FieldHandle& G) const;
  Series with_coeff_prec(int q) const;       // clamp every coefficient
  int min_prec(int dlo, int dhi) const;      // over reliable stored degrees

  // True when all coefficients in degrees [dlo, dhi] are zero within pi^w
  // and the whole range is inside the trusted window; an under-precise or
  // under-reliable comparison reports false.
  bool is_zero_within(int w, int dlo, int dhi) const;
  bool eq_upto(const Series& o, int w, int dlo, int dhi) const;

  // --- arithmetic ---------------------------------------------------------
  Series operator-() const;
  Series operator+(const Series& o) const;
  Series operator-(const Series& o) const;
  Series operator*(const Series& o) const;
  Series smul(const Scalar& c) const;
  Series mul_pow_p(int k) const;             // exact p-power rescale
  Series pow_int(long long n, int Kw) const; // n >= 0, windowed at Kw

  std::string str(int max_terms = 12) const;
};

// Multiplicative inverse of a series of well-defined order.  The order must
// be certified (exact zeros below a unit-or-better leading coefficient);
// output window Kout counts degrees above -order.
Series inv_series(const Series& f, int Kout);

// Exact division of Laurent polynomials; the divisor's top coefficient must
// be a unit.  The remainder must vanish within the certified window,
// otherwise NonInvertiblePole.
Series divide_entire(const Series& f, const Series& g);

// ---------------------------------------------------------------------------
// The three semilinear operators.

// phi: X -> (1+X)^p - 1.  A pole part X^(-L) h needs the exact-polynomial
// representation, since the image acquires q^(-L) which must divide out of
// phi(h) exactly; otherwise NonInvertiblePole.  Kcap limits the output
// window (-1: keep the input's window, or the natural degree when entire).
Series phi(const Series& f, int Kcap = -1);
Series phi_pow(const Series& f, int m, int Kcap = -1);

// gamma_a: X -> (1+X)^a - 1 for an exact integer a prime to p.  Pole parts
// clear against the unit (gamma_a(X)/X)^L, so any pole order is fine.
Series gamma_int(const Series& f, long long aa);
// gamma for a scalar exponent: (1+X)^a built from generalized binomials,
// with their precision losses.  Routes to the exact path when a carries
// integer provenance.
Series gamma_scalar(const Series& f, const Scalar& aa);

// psi: the left inverse of phi (psi(phi(x) y) = x psi(y), psi(phi(x)) = x).
// Computed through the exact change of basis T = 1+X.  For a pole part,
// psi(X^(-L) g) = X^(-L) psi(q^L g) with q^L g expanded exactly.  On a
// truncated input the unknown tail contaminates low output degrees; the
// contamination is p-adically small and the output precision of coefficient
// i is capped by e * (ceil((U - p i)/(p-1)) - 1) pi-units, U the first
// untrusted input degree.  That cap presumes the true tail is p-integral, so
// non-entire inputs must be integral; otherwise UnsupportedElement.
Series psi(const Series& f);

// Solve (psi - alpha) y = x.  alpha = 0 gives y = phi(x); negative valuation
// uses the geometric series in alpha^(-1) psi, positive valuation the
// geometric series in alpha phi capped at the window Kw (-1: pick from x).
// A unit alpha is not supported.
Series psi_resolvent(const Series& x, const Scalar& alpha, int Kw = -1);

// ---------------------------------------------------------------------------
// Distinguished series.

// log(1+X) = sum (-1)^(n+1) X^n / n, window Kw.
Series t_series(const FieldHandle& F, int Kw);
// Even / odd halves of t/X as products of phi-iterates of q/p:
//   lambda_minus = prod_{m even} phi^m(q)/p,  lambda_plus = prod_{m odd}.
// Factors are appended until the next one is 1 within (p^target_p, X^Kw);
// phi preserves that ideal, so the dropped tail is 1 within it as well.
Series log_plus(const FieldHandle& F, int Kw, int target_p);
Series log_minus(const FieldHandle& F, int Kw, int target_p);
// w_a = gamma_a(X)/X, the unit with constant term a.
Series w_unit(const FieldHandle& F, long long aa, int Kw);

// ---------------------------------------------------------------------------
// Small matrices of series.

class SeriesMat {
 public:
  int n = 0, m = 0;
  std::vector<Series> e;  // row-major

  SeriesMat() = default;
  SeriesMat(int rows, int cols) : n(rows), m(cols), e(rows * cols) {}
  static SeriesMat identity(const FieldHandle& F, int d);

  Series& at(int i, int j) { return e[i * m + j]; }
  const Series& at(int i, int j) const { return e[i * m + j]; }

  SeriesMat operator+(const SeriesMat& o) const;
  SeriesMat operator-(const SeriesMat& o) const;
  SeriesMat operator*(const SeriesMat& o) const;
  SeriesMat smul(const Scalar& c) const;
  SeriesMat mul_series(const Series& s) const;
  SeriesMat map(Series (*op)(const Series&)) const;
  SeriesMat transposed() const;
  Series det2() const;
  SeriesMat adj2() const;
  SeriesMat truncated(int K2) const;
  bool eq_upto(const SeriesMat& o, int w, int dlo, int dhi) const;
  bool is_zero_within(int w, int dlo, int dhi) const;
};

SeriesMat phi(const SeriesMat& M, int Kcap = -1);
SeriesMat gamma_int(const SeriesMat& M, long long aa);

}  // namespace phig
