#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "phigamma/padic.hpp"
#include "phigamma/series.hpp"

namespace phig {

// Sup of finitely many absolute values, reported as a base-p exponent.
// Truncated data can only certify the inspected range, never a tail bound,
// so every value carries the finite-range flag.
struct NormValue {
  double logp = 0.0;        // the norm is p^logp; zero data reports is_zero
  bool is_zero = true;
  bool finite_range = true;
  std::string str() const;
};

// Continuous function on Z_p held by its truncated Mahler coefficients:
// f(z) = sum_n a[n]*binom(z,n) for n < M.
struct MahlerFunction {
  FieldHandle F;
  std::vector<Scalar> a;
  std::optional<Rat> claimed_r;

  int M() const { return (int)a.size(); }
  // Exact evaluation at an integer point (|z| bounded by the table budget).
  Scalar eval(long long z) const;
};

// Finite-difference transform: a_n = (Delta^n f)(0) from the values
// f(0..M-1).  Inverse of MahlerFunction::eval on that range.
MahlerFunction mahler_coeffs(const FieldHandle& F,
                             const std::vector<Scalar>& values);

// Checks that (n+1)^r |a_n| stays bounded by its early maximum over the
// second half of the available range.  A certificate over the truncation
// window only.
bool decay_certificate(const MahlerFunction& f);

// Distribution held by its Amice series: the coefficient of X^n is
// mu(binom(z,n)).  Only coefficients up to the trust limit are meaningful.
struct MahlerDistribution {
  Series w;
  std::optional<Rat> claimed_r;

  int M() const;             // count of trusted coefficients
  Scalar coeff(int n) const;
};

MahlerDistribution dist_from_coeffs(const FieldHandle& F,
                                    const std::vector<Scalar>& c,
                                    std::optional<Rat> r = {});

// Dirac mass at a: Amice series (1+X)^a, coefficients binom(a,n).
MahlerDistribution dirac(const FieldHandle& F, long long aa, int M,
                         std::optional<Rat> r = {});

// mu applied to the function with the given values on 0..len-1, computed
// through the finite-difference transform.  Exact when the Amice series is
// an entire polynomial of degree < len; otherwise a finite-range value.
Scalar integrate_values(const MahlerDistribution& mu,
                        const std::vector<Scalar>& values);

// sup_n (n+1)^r |a_n| over the truncation range.
NormValue cr_norm(const MahlerFunction& f, const Rat& r);
// sup_n (n+1)^(-r) |c_n| over the trusted range.
NormValue order_norm(const MahlerDistribution& mu, const Rat& r);
bool order_certificate(const MahlerDistribution& mu);
// sup_n p^(-nr) sup_m |c_m * floor(m/p^n)!| over the trusted range.
NormValue factorial_norm(const MahlerDistribution& mu, const Rat& r);

// psi on distributions: integrate f(z/p) over pZ_p.  On the Amice side this
// is the series-level psi applied to the transform.
MahlerDistribution psi_dist(const MahlerDistribution& mu);

// Table of ball moments: entry (a, n, j) holds the integral of (z-a)^j over
// a + p^n Z_p, for 0 <= n <= depth and 0 <= j <= dmax.  Entries never set
// read as exact zero; sparse tables describe distributions supported on the
// stored balls.
class MomentTable {
 public:
  FieldHandle F;
  int depth = 0;
  int dmax = 0;
  Rat r{0, 1};

  MomentTable() = default;
  MomentTable(const FieldHandle& f, int depth_, int dmax_, const Rat& r_)
      : F(f), depth(depth_), dmax(dmax_), r(r_) {}

  void set(long long aa, int n, int j, const Scalar& v);
  Scalar get(long long aa, int n, int j) const;
  bool has(long long aa, int n, int j) const;
  const std::map<std::tuple<int, long long, int>, Scalar>& entries() const {
    return m_;
  }

  std::string to_text() const;
  static MomentTable parse(const FieldHandle& F, const std::string& text);

 private:
  std::map<std::tuple<int, long long, int>, Scalar> m_;  // key (n, a, j)
};

// Refinement consistency: each stored ball moment must equal the binomial
// recombination of its p sub-ball moments.
struct AdditivityReport {
  bool ok = true;
  std::string witness;
};
AdditivityReport check_additivity(const MomentTable& T);

// Best certified constant for |moment(a,n,j)| <= |C| p^(-n(j-r)): the
// valuation of C as a rational in p-units.  infinite when every stored
// entry is exactly zero.
struct GrowthConstant {
  bool infinite = false;
  Rat vc{0, 1};
};
GrowthConstant growth_constant(const MomentTable& T);

// Ball moments of a distribution given by its Amice series, computed by
// integrating the sampled functions 1_{a+p^n}(z)*(z-a)^j.
MomentTable moments_from_dist(const MahlerDistribution& mu, int depth,
                              int dmax);

// sup over stored entries of p^(n(j-r)) |moment|; the restricted variant
// only ranges over j <= k-2.
NormValue moment_norm(const MomentTable& T, const Rat& r);
NormValue moment_norm_restricted(const MomentTable& T, const Rat& r, int k);

// Extension of a degree-dmax moment table to higher degrees: expand the
// ball over sub-balls, substitute known lower-degree moments, and drop the
// pure top-degree remainder once its certified bound falls below the
// working precision (deepened by `slack` extra digits).  The result does
// not depend on the stopping depth beyond that bound.  The integrand is
// (z - aa)^j with the base point exactly as given, so congruent
// representatives of the same ball yield binomially shifted moments.
Scalar av_moment(const MomentTable& T, long long aa, int n, int j,
                 int slack = 0);
MomentTable amice_velu_extend(const MomentTable& T, int target_j,
                              int target_depth, int slack = 0);

// The p^m-th cyclotomic extension modeled as Q_p[Y]/(Phi(Y)) where
// Phi(Y) = Phi_{p^m}(1+Y) is Eisenstein of degree (p-1)p^(m-1).  Elements
// are coefficient vectors of length deg; zeta = 1+Y.
struct CycloModel {
  FieldHandle F;
  int m = 1;
  int deg = 0;
  std::vector<Scalar> modulus;  // monic, length deg+1

  static CycloModel make(const FieldHandle& F, int m);
  std::vector<Scalar> reduce(std::vector<Scalar> f) const;
  std::vector<Scalar> mul(const std::vector<Scalar>& x,
                          const std::vector<Scalar>& y) const;
  std::vector<Scalar> one() const;
  std::vector<Scalar> zeta_pow(long long k) const;  // k may be negative
  std::vector<Scalar> smul(const std::vector<Scalar>& x,
                           const Scalar& c) const;
  // Valuation of a nonzero coordinate certified in the element, in p-units
  // scaled by deg (the ramification index of Y); infinite when every
  // coordinate looks zero.
  struct Val {
    bool infinite = false;
    Rat v{0, 1};
  };
  Val val(const std::vector<Scalar>& x) const;
  bool looks_zero(const std::vector<Scalar>& x) const;
  std::string str(const std::vector<Scalar>& x) const;
};

// Twisted moments against zeta^z: binom_moment = integral of
// binom(z,j)*zeta^z mu, recovered from the Amice coefficients through
// zeta^j * sum_{i>=j} c_i binom(i,j) Y^(i-j); power_moment = integral of
// z^j*zeta^z mu via the Stirling change of basis from binom(z,i) to z^i.
struct CycloMoments {
  std::vector<Scalar> binom_moment;
  std::vector<Scalar> power_moment;
};
CycloMoments zeta_moment(const CycloModel& C, const MahlerDistribution& mu,
                         int j);
CycloMoments zeta_moment(const MahlerDistribution& mu, int j, int m);

// Checks alpha^m * integral(z^j zeta^z mu_alpha) =
// beta^m * integral(z^j zeta^z mu_beta) for j = 0..k-2 at one primitive
// p^m-th root.  ok means no equality has a certified defect; residual_val
// is the least valuation (p-units) at which any difference is pinned down,
// i.e. all residuals vanish to at least that valuation.
struct Fil0Report {
  bool ok = true;
  bool residual_bounded = false;  // set when some residual is finite
  Rat residual_val{0, 1};
  std::vector<std::string> lines;
};
Fil0Report check_fil0(const MahlerDistribution& mu_alpha,
                      const MahlerDistribution& mu_beta, const Scalar& alpha,
                      const Scalar& beta, int m, int k);

// Locally polynomial function: on each listed ball a + p^n Z_p the value is
// the stored polynomial in (z - a); zero off the union.  Balls must be
// pairwise disjoint.
struct LocalPoly {
  struct Piece {
    long long aa = 0;  // 0 <= aa < p^n
    int n = 0;
    std::vector<Scalar> coef;  // in powers of (z - aa)
  };
  FieldHandle F;
  std::vector<Piece> pieces;

  Scalar eval(long long z) const;
  Scalar eval_deriv(long long z, int i) const;
  int degree() const;
};

// Termwise derivative, piece by piece.
LocalPoly local_poly_derivative(const LocalPoly& f);

// Integral of a locally polynomial function against a moment table; every
// piece must sit within the stored depth and degree.
Scalar integrate_local(const MomentTable& T, const LocalPoly& f);

// Iterated divided difference f^[n](z, h_1..h_n), evaluated recursively
// from exact samples.
Scalar finite_diff(const FieldHandle& F,
                   const std::function<Scalar(long long)>& f, long long z,
                   const std::vector<long long>& hs);

// Primitive of a locally polynomial function along the digit filtration:
// P_n f(z) = sum_j sum_{i<n} f^(i)(z_j)/(i+1)! * (z_{j+1}-z_j)^(i+1) with
// z_j the partial digit sums of z.  For pieces of degree < n the tail
// telescopes exactly and the result is again locally polynomial with
// (P_n f)' = f.
LocalPoly deriv_section(const LocalPoly& f, int n);

}  // namespace phig
