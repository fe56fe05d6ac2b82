#pragma once

#include <climits>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "phigamma/errors.hpp"

namespace phig {

using u64 = std::uint64_t;
using u128 = unsigned __int128;
using i64 = std::int64_t;

class Field;
using FieldHandle = std::shared_ptr<const Field>;

// Coefficient field at fixed absolute precision: Q_p, or a quadratic
// extension Q_p[y] / (y^2 + g1*y + g0).  Residues live in Z/p^N as u64,
// so p^N must fit in 64 bits.  p = 2 is rejected.
enum class ExtKind { none, unramified, eisenstein };

class Field : public std::enable_shared_from_this<Field> {
 public:
  u64 p = 0;
  int N = 0;
  ExtKind ext = ExtKind::none;
  int e = 1;                 // ramification index: 1, or 2 for eisenstein
  long long g0z = 0, g1z = 0;  // defining polynomial y^2 + g1*y + g0, exact
  u64 g0 = 0, g1 = 0;          // the same coefficients as residues mod p^N
  u64 pN = 0;

  static FieldHandle make_Qp(u64 p, int N);
  static FieldHandle make_quadratic(u64 p, int N, ExtKind kind, long long g0z,
                                    long long g1z);
  FieldHandle lifted(int extraN) const;   // same field, N + extraN digits
  FieldHandle reduced_to(int N2) const;   // same field, N2 digits (N2 <= N)
  bool same(const Field& o) const;

  // Residue arithmetic mod p^N.
  u64 add(u64 a, u64 b) const;
  u64 sub(u64 a, u64 b) const;
  u64 mul(u64 a, u64 b) const;
  u64 powu(u64 b, u64 k) const;
  u64 inv_unit(u64 u) const;      // u must be prime to p
  u64 from_ll(long long v) const; // canonical residue of a signed integer
  int vp(u64 r) const;            // p-valuation of a residue, N when r == 0
  u64 divp(u64 r, int k) const;   // exact division by p^k (r must allow it)
  u64 ppow(int k) const;          // p^k mod p^N (0 for k >= N)

 private:
  Field() = default;
};

// Scalar in the field, stored as p^shift * (c0 + c1*y) with c0, c1 residues
// mod p^N.  shift may be negative.  prec is the certified absolute precision
// in pi-units (pi = p when e = 1, pi = y when e = 2): the value is known
// modulo pi^prec.  Always prec <= (N + shift)*e.  An exact zero is flagged
// separately; a zero residue with finite prec only witnesses val >= prec.
class Scalar {
 public:
  static constexpr int INF = INT_MAX / 4;

  FieldHandle F;
  int shift = 0;
  u64 c0 = 0, c1 = 0;
  int prec = 0;
  bool xzero = true;
  std::optional<long long> int_hint;  // set by from_int, kept by unary minus

  Scalar() = default;

  static Scalar zero(const FieldHandle& F);
  static Scalar one(const FieldHandle& F) { return from_int(F, 1); }
  static Scalar from_int(const FieldHandle& F, long long v);
  static Scalar from_rational(const FieldHandle& F, long long num,
                              long long den);
  static Scalar from_residue(const FieldHandle& F, u64 r);  // prec = N*e
  static Scalar gen_y(const FieldHandle& F);
  // Raw constructor: p^shift*(c0+c1*y) given known pi-precision.
  static Scalar make(const FieldHandle& F, int shift, u64 c0, u64 c1,
                     int prec);

  bool is_exact_zero() const { return xzero; }
  bool is_prec_zero() const;
  // Lower bound for the pi-valuation that is certain at current precision.
  int val_lb() const;
  // pi-valuation.  INF for the exact zero.  Throws PrecisionExhausted when
  // the element is indistinguishable from zero at current precision.
  int val() const;
  bool is_unit() const { return !xzero && !is_prec_zero() && val() == 0; }

  Scalar operator-() const;
  Scalar operator+(const Scalar& o) const;
  Scalar operator-(const Scalar& o) const;
  Scalar operator*(const Scalar& o) const;
  Scalar inv() const;
  Scalar operator/(const Scalar& o) const { return *this * o.inv(); }
  // Multiplication by the exact power p^k (k may be negative): shifts the
  // certified window by k*e instead of applying the generic division rule.
  Scalar mul_pow_p(int k) const;
  Scalar pow_i(long long k) const;
  // Square root in Q_p (ext none only): even valuation and unit square
  // required, otherwise NoSquareRoot.
  Scalar sqrt() const;

  Scalar with_prec(int q) const;          // clamp certified precision
  Scalar to_field(const FieldHandle& G) const;  // same p and ext, other N

  // True when |*this - o| <= pi^(-w) ... i.e. the difference has certified
  // valuation >= w; requires the difference to carry >= w digits, so an
  // under-precise comparison reports false rather than a fake pass.
  bool eq_upto(const Scalar& o, int w) const;
  bool is_zero_within(int w) const;

  // Canonical residue mod p^m of a p-integral scalar coordinate pair.
  // Requires ext none, shift >= 0 and prec >= m*e.
  u64 residue(int m) const;
  u64 residue_c1(int m) const;  // same for the y-coordinate (ext fields)

  std::string str() const;
  static Scalar parse(const FieldHandle& F, const std::string& text);

 private:
  void finalize(int pre_shift);  // clamp prec to storage, strip p-powers
  int storage_val() const;       // pi-valuation of the stored residues
};

// Reduced fraction, only as rich as the invariants need.
struct Rat {
  long long num = 0;
  long long den = 1;

  static Rat make(long long n, long long d);
  bool operator==(const Rat& o) const { return num == o.num && den == o.den; }
  bool operator!=(const Rat& o) const { return !(*this == o); }
  bool operator<(const Rat& o) const { return num * o.den < o.num * den; }
  bool operator<=(const Rat& o) const { return num * o.den <= o.num * den; }
  double value() const { return double(num) / double(den); }
  std::string str() const;
};

inline Rat operator+(const Rat& a, const Rat& b) {
  return Rat::make(a.num * b.den + b.num * a.den, a.den * b.den);
}
inline Rat operator-(const Rat& a, const Rat& b) {
  return Rat::make(a.num * b.den - b.num * a.den, a.den * b.den);
}
inline Rat operator*(const Rat& a, const Rat& b) {
  return Rat::make(a.num * b.num, a.den * b.den);
}

// Generalized binomial coefficient binom(a, m) = a(a-1)...(a-m+1)/m!.
// Division by m! is division by an exact integer: the certified precision
// drops by e*v_p(m!) and PrecisionExhausted is raised when nothing is left.
Scalar binom_padic(const Scalar& a, long long m);

// v_p(m!) by the digit-sum formula.
int factorial_vp(u64 p, long long m);

// Pascal triangle of residues mod p^N: exact integer binomials binom(n, k)
// reduced mod p^N, rows 0..nmax.
class PascalTable {
 public:
  PascalTable(const FieldHandle& F, int nmax);
  u64 binom(int n, int k) const;
  int rows() const { return nmax_; }
  const FieldHandle& field() const { return F_; }

 private:
  FieldHandle F_;
  int nmax_;
  std::vector<std::vector<u64>> row_;
};

}  // namespace phig
