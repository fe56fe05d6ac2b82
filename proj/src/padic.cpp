#include "phigamma/padic.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <sstream>

namespace phig {

namespace {

bool is_prime_u64(u64 n) {
  if (n < 2) return false;
  for (u64 d = 2; d * d <= n; ++d)
    if (n % d == 0) return false;
  return true;
}

// p^N as u64, or 0 on overflow.
u64 checked_pow(u64 p, int N) {
  u64 r = 1;
  for (int i = 0; i < N; ++i) {
    if (r > UINT64_MAX / p) return 0;
    r *= p;
  }
  return r;
}

long long vp_ll(u64 p, long long v) {
  if (v == 0) return -1;
  unsigned long long a = v < 0 ? 0ull - (unsigned long long)v : (unsigned long long)v;
  long long k = 0;
  while (a % p == 0) {
    a /= p;
    ++k;
  }
  return k;
}

}  // namespace

FieldHandle Field::make_Qp(u64 p, int N) {
  if (p == 2) throw UnsupportedCase("p = 2 is not supported");
  if (!is_prime_u64(p)) throw UnsupportedCase("p must be an odd prime");
  if (N < 1) throw UnsupportedCase("precision exponent must be >= 1");
  u64 pN = checked_pow(p, N);
  if (pN == 0) throw UnsupportedCase("p^N does not fit in 64 bits");
  auto F = std::shared_ptr<Field>(new Field());
  F->p = p;
  F->N = N;
  F->ext = ExtKind::none;
  F->e = 1;
  F->pN = pN;
  return F;
}

FieldHandle Field::make_quadratic(u64 p, int N, ExtKind kind, long long g0z,
                                  long long g1z) {
  if (kind == ExtKind::none)
    throw UnsupportedCase("quadratic constructor needs an extension kind");
  auto base = make_Qp(p, N);
  auto F = std::shared_ptr<Field>(new Field(*base));
  F->ext = kind;
  F->g0z = g0z;
  F->g1z = g1z;
  F->g0 = F->from_ll(g0z);
  F->g1 = F->from_ll(g1z);
  if (kind == ExtKind::unramified) {
    F->e = 1;
    // y^2 + g1 y + g0 must stay irreducible mod p: the discriminant is a
    // non-square mod p.
    u64 disc = F->sub(F->mul(F->g1, F->g1), F->mul(4 % F->pN, F->g0));
    u64 d = disc % p;
    if (d == 0) throw UnsupportedCase("discriminant vanishes mod p");
    u64 t = 1, b = d;
    for (u64 k = (p - 1) / 2; k; k >>= 1, b = (u128)b * b % p)
      if (k & 1) t = (u128)t * b % p;
    if (t == 1) throw UnsupportedCase("polynomial splits mod p, not unramified");
  } else {
    F->e = 2;
    if (vp_ll(p, g0z) != 1 || (g1z != 0 && vp_ll(p, g1z) < 1))
      throw UnsupportedCase("eisenstein polynomial needs v(g0) = 1, v(g1) >= 1");
  }
  return F;
}

FieldHandle Field::lifted(int extraN) const {
  if (extraN < 0) throw UnsupportedCase("negative lift");
  if (ext == ExtKind::none) return make_Qp(p, N + extraN);
  return make_quadratic(p, N + extraN, ext, g0z, g1z);
}

FieldHandle Field::reduced_to(int N2) const {
  if (N2 < 1 || N2 > N) throw UnsupportedCase("bad target precision");
  if (ext == ExtKind::none) return make_Qp(p, N2);
  return make_quadratic(p, N2, ext, g0z, g1z);
}

bool Field::same(const Field& o) const {
  return p == o.p && N == o.N && ext == o.ext && g0z == o.g0z && g1z == o.g1z;
}

u64 Field::add(u64 a, u64 b) const {
  u128 s = (u128)a + b;
  return (u64)(s % pN);
}

u64 Field::sub(u64 a, u64 b) const {
  return a >= b ? a - b : (u64)(((u128)a + pN) - b);
}

u64 Field::mul(u64 a, u64 b) const { return (u64)((u128)a * b % pN); }

u64 Field::powu(u64 b, u64 k) const {
  u64 r = 1 % pN;
  b %= pN;
  while (k) {
    if (k & 1) r = mul(r, b);
    b = mul(b, b);
    k >>= 1;
  }
  return r;
}

u64 Field::inv_unit(u64 u) const {
  u %= pN;
  if (u % p == 0) throw DivisionByPrecisionZero("inverse of a non-unit residue");
  // Extended Euclid over the integers, result reduced mod p^N.
  __int128 r0 = (__int128)pN, r1 = u, s0 = 0, s1 = 1;
  while (r1 != 0) {
    __int128 q = r0 / r1;
    __int128 r2 = r0 - q * r1, s2 = s0 - q * s1;
    r0 = r1;
    r1 = r2;
    s0 = s1;
    s1 = s2;
  }
  __int128 m = s0 % (__int128)pN;
  if (m < 0) m += pN;
  return (u64)m;
}

u64 Field::from_ll(long long v) const {
  __int128 m = (__int128)v % (__int128)pN;
  if (m < 0) m += pN;
  return (u64)m;
}

int Field::vp(u64 r) const {
  if (r == 0) return N;
  int k = 0;
  while (r % p == 0) {
    r /= p;
    ++k;
  }
  return k;
}

u64 Field::divp(u64 r, int k) const {
  for (int i = 0; i < k; ++i) r /= p;
  return r;
}

u64 Field::ppow(int k) const {
  if (k >= N) return 0;
  u64 r = 1;
  for (int i = 0; i < k; ++i) r *= p;
  return r % pN;
}

// ---------------------------------------------------------------------------
// Scalar

Scalar Scalar::zero(const FieldHandle& F) {
  Scalar s;
  s.F = F;
  s.xzero = true;
  s.prec = INF;
  s.int_hint = 0;
  return s;
}

Scalar Scalar::make(const FieldHandle& F, int shift, u64 c0, u64 c1,
                    int prec) {
  Scalar s;
  s.F = F;
  s.xzero = false;
  s.shift = shift;
  s.c0 = c0 % F->pN;
  s.c1 = c1 % F->pN;
  s.prec = prec;
  s.finalize(shift);
  return s;
}

Scalar Scalar::from_int(const FieldHandle& F, long long v) {
  if (v == 0) return zero(F);
  // Strip p-powers on the exact integer, so the full storage window of the
  // unit part is certified: p^m * u is known mod p^(N+m).
  long long m = vp_ll(F->p, v);
  long long u = v;
  for (long long i = 0; i < m; ++i) u /= (long long)F->p;
  Scalar s = make(F, (int)m, F->from_ll(u), 0, (F->N + (int)m) * F->e);
  s.int_hint = v;
  return s;
}

Scalar Scalar::from_rational(const FieldHandle& F, long long num,
                             long long den) {
  if (den == 0) throw DivisionByPrecisionZero("rational with zero denominator");
  if (num == 0) return zero(F);
  if (den != 0 && num % den == 0) return from_int(F, num / den);
  long long vn = vp_ll(F->p, num), vd = vp_ll(F->p, den);
  long long un = num, ud = den;
  for (long long i = 0; i < vn; ++i) un /= (long long)F->p;
  for (long long i = 0; i < vd; ++i) ud /= (long long)F->p;
  int shift = (int)(vn - vd);
  u64 c = F->mul(F->from_ll(un), F->inv_unit(F->from_ll(ud)));
  return make(F, shift, c, 0, (F->N + shift) * F->e);
}

Scalar Scalar::from_residue(const FieldHandle& F, u64 r) {
  if (r % F->pN == 0) {
    Scalar s;
    s.F = F;
    s.xzero = false;
    s.prec = F->N * F->e;
    return s;
  }
  return make(F, 0, r, 0, F->N * F->e);
}

Scalar Scalar::gen_y(const FieldHandle& F) {
  if (F->ext == ExtKind::none)
    throw UnsupportedCase("no generator in the base field");
  return make(F, 0, 0, 1, F->N * F->e);
}

void Scalar::finalize(int pre_shift) {
  if (xzero) return;
  prec = std::min(prec, (F->N + pre_shift) * F->e);
  if (c0 == 0 && c1 == 0) return;
  int m = std::min(F->vp(c0), F->vp(c1));
  if (m > 0) {
    c0 = F->divp(c0, m);
    c1 = F->divp(c1, m);
    shift += m;
  }
}

int Scalar::storage_val() const {
  if (xzero) return INF;
  const int N = F->N;
  switch (F->ext) {
    case ExtKind::none:
      return shift + F->vp(c0);
    case ExtKind::unramified:
      return shift + std::min(F->vp(c0), F->vp(c1));
    case ExtKind::eisenstein: {
      int v0 = 2 * F->vp(c0);
      int v1 = 1 + 2 * F->vp(c1);
      return 2 * shift + std::min(std::min(v0, v1), 2 * N);
    }
  }
  return 2 * N;
}

bool Scalar::is_prec_zero() const { return !xzero && storage_val() >= prec; }

int Scalar::val_lb() const {
  if (xzero) return INF;
  return std::min(storage_val(), prec);
}

int Scalar::val() const {
  if (xzero) return INF;
  int sv = storage_val();
  if (sv >= prec)
    throw PrecisionExhausted("valuation undetermined at current precision");
  return sv;
}

Scalar Scalar::operator-() const {
  if (xzero) return *this;
  Scalar s = *this;
  s.c0 = s.c0 ? F->pN - s.c0 : 0;
  s.c1 = s.c1 ? F->pN - s.c1 : 0;
  if (int_hint) s.int_hint = -*int_hint;
  return s;
}

Scalar Scalar::operator+(const Scalar& o) const {
  if (!F->same(*o.F)) throw UnsupportedCase("scalar fields differ");
  if (xzero) return o;
  if (o.xzero) return *this;
  if (int_hint && o.int_hint) {
    long long r;
    if (!__builtin_add_overflow(*int_hint, *o.int_hint, &r))
      return from_int(F, r);
  }
  int s = std::min(shift, o.shift);
  u64 a0 = F->mul(c0, F->ppow(shift - s));
  u64 a1 = F->mul(c1, F->ppow(shift - s));
  u64 b0 = F->mul(o.c0, F->ppow(o.shift - s));
  u64 b1 = F->mul(o.c1, F->ppow(o.shift - s));
  return make(F, s, F->add(a0, b0), F->add(a1, b1), std::min(prec, o.prec));
}

Scalar Scalar::operator-(const Scalar& o) const { return *this + (-o); }

Scalar Scalar::operator*(const Scalar& o) const {
  if (!F->same(*o.F)) throw UnsupportedCase("scalar fields differ");
  if (xzero || o.xzero) return zero(F);
  if (int_hint && o.int_hint) {
    long long r;
    if (!__builtin_mul_overflow(*int_hint, *o.int_hint, &r))
      return from_int(F, r);
  }
  int s = shift + o.shift;
  u64 t = F->mul(c1, o.c1);
  u64 r0 = F->sub(F->mul(c0, o.c0), F->mul(F->g0, t));
  u64 r1 = F->sub(F->add(F->mul(c0, o.c1), F->mul(c1, o.c0)), F->mul(F->g1, t));
  long long q = std::min((long long)prec + o.val_lb(), (long long)o.prec + val_lb());
  q = std::min(q, (long long)INF);
  return make(F, s, r0, r1, (int)q);
}

Scalar Scalar::mul_pow_p(int k) const {
  if (xzero) return *this;
  Scalar s = *this;
  s.shift += k;
  s.prec += k * F->e;
  s.int_hint.reset();
  return s;
}

namespace {

// Inverse of a scalar whose y-coordinate vanishes (lives in the base line).
Scalar inv_base_line(const Scalar& a) {
  const FieldHandle& F = a.F;
  int v = F->vp(a.c0);
  u64 u = F->divp(a.c0, v);
  int val_pi = (a.shift + v) * F->e;
  return Scalar::make(F, -(a.shift + v), F->inv_unit(u), 0, a.prec - 2 * val_pi);
}

}  // namespace

Scalar Scalar::inv() const {
  if (xzero) throw DivisionByPrecisionZero("inverse of the exact zero");
  if (is_prec_zero())
    throw DivisionByPrecisionZero("inverse of a precision-level zero");
  if (F->ext == ExtKind::none || c1 == 0) return inv_base_line(*this);
  // Conjugate trick: 1/a = abar / (a * abar), where abar swaps the roots of
  // y^2 + g1 y + g0 and the product lands on the base line.
  Scalar bar = *this;
  bar.c0 = F->sub(c0, F->mul(F->g1, c1));
  bar.c1 = c1 ? F->pN - c1 : 0;
  bar.int_hint.reset();
  Scalar nrm = *this * bar;
  if (nrm.c1 != 0) throw Error("norm left the base line");
  return bar * inv_base_line(nrm);
}

Scalar Scalar::pow_i(long long k) const {
  if (k < 0) return inv().pow_i(-k);
  Scalar r = one(F);
  Scalar b = *this;
  unsigned long long m = (unsigned long long)k;
  while (m) {
    if (m & 1) r = r * b;
    b = b * b;
    m >>= 1;
  }
  return r;
}

Scalar Scalar::sqrt() const {
  if (F->ext != ExtKind::none)
    throw UnsupportedCase("square root implemented over Q_p only");
  if (xzero) return *this;
  int v = val();  // throws PrecisionExhausted on a precision-level zero
  if (v % 2 != 0) throw NoSquareRoot("odd valuation");
  int vc = F->vp(c0);
  u64 u = F->divp(c0, vc);
  // Euler criterion mod p.
  u64 p = F->p;
  u64 t = 1, b = u % p;
  for (u64 k = (p - 1) / 2; k; k >>= 1, b = (u128)b * b % p)
    if (k & 1) t = (u128)t * b % p;
  if (t != 1) throw NoSquareRoot("unit part is a non-square mod p");
  if (p > 2000000) throw UnsupportedCase("square root search bound exceeded");
  u64 x = 0;
  for (u64 c = 1; c < p; ++c)
    if ((u128)c * c % p == u % p) {
      x = c;
      break;
    }
  if (x == 0) throw NoSquareRoot("no residue root found");
  u64 half = F->inv_unit(2 % F->pN);
  for (int it = 0; it < 64; ++it) {
    u64 nx = F->mul(F->add(x, F->mul(u, F->inv_unit(x))), half);
    if (nx == x) break;
    x = nx;
  }
  if (F->mul(x, x) != u % F->pN) throw NoSquareRoot("lift failed");
  return make(F, v / 2, x, 0, prec - v / 2);
}

Scalar Scalar::with_prec(int q) const {
  Scalar s = *this;
  if (!s.xzero && q < s.prec) {
    s.prec = q;
    // The cap states that the true value may differ beyond q digits, which
    // voids any exact-integer certificate.
    s.int_hint.reset();
  }
  return s;
}

Scalar Scalar::to_field(const FieldHandle& G) const {
  if (F->p != G->p || F->ext != G->ext || F->g0z != G->g0z || F->g1z != G->g1z)
    throw UnsupportedCase("incompatible target field");
  if (xzero) return zero(G);
  if (int_hint) return from_int(G, *int_hint);
  Scalar s;
  s.F = G;
  s.xzero = false;
  s.shift = shift;
  s.c0 = c0 % G->pN;
  s.c1 = c1 % G->pN;
  s.prec = prec;
  s.finalize(shift);
  return s;
}

bool Scalar::eq_upto(const Scalar& o, int w) const {
  Scalar d = *this - o;
  if (d.xzero) return true;
  return d.prec >= w && d.storage_val() >= w;
}

bool Scalar::is_zero_within(int w) const {
  if (xzero) return true;
  return prec >= w && storage_val() >= w;
}

u64 Scalar::residue(int m) const {
  if (m < 0 || m > F->N) throw UnsupportedCase("residue window out of range");
  u64 pm = m == F->N ? F->pN : F->ppow(m);
  if (xzero) return 0;
  if (shift < 0) throw PrecisionExhausted("residue of a non-integral scalar");
  if (prec < m * F->e)
    throw PrecisionExhausted("residue window exceeds certified digits");
  return F->mul(F->ppow(shift), c0) % pm;
}

u64 Scalar::residue_c1(int m) const {
  if (m < 0 || m > F->N) throw UnsupportedCase("residue window out of range");
  u64 pm = m == F->N ? F->pN : F->ppow(m);
  if (xzero) return 0;
  if (shift < 0) throw PrecisionExhausted("residue of a non-integral scalar");
  if (prec < m * F->e)
    throw PrecisionExhausted("residue window exceeds certified digits");
  return F->mul(F->ppow(shift), c1) % pm;
}

namespace {

std::string pow_str(u64 p, int k) {
  std::ostringstream os;
  os << p << "^" << k;
  return os.str();
}

}  // namespace

std::string Scalar::str() const {
  std::ostringstream os;
  if (xzero) return "0 (exact)";
  const u64 p = F->p;
  int M = std::max(0, (prec + F->e - 1) / F->e);  // p-digit display window
  if (M > F->N + std::max(0, shift)) M = F->N + std::max(0, shift);
  if (M == 0) return "unknown (no certified digits)";
  auto merged = [&](u64 c) -> u64 {
    int w = std::min(M + (shift < 0 ? -shift : 0), F->N);
    u64 pm = w == F->N ? F->pN : F->ppow(w);
    if (shift >= 0) {
      u64 r = F->mul(F->ppow(shift), c);
      return pm ? r % pm : r;
    }
    return pm ? c % pm : c;
  };
  if (F->ext == ExtKind::none) {
    os << merged(c0);
    if (shift < 0) os << "/" << pow_str(p, -shift);
    os << " mod " << pow_str(p, M);
    return os.str();
  }
  os << merged(c0) << " + " << merged(c1) << "*y";
  if (shift < 0) os << " /" << pow_str(p, -shift);
  os << " mod " << pow_str(p, M) << "; y^2 = ";
  if (F->g1z != 0) os << -F->g1z << "*y + ";
  os << -F->g0z;
  return os.str();
}

Scalar Scalar::parse(const FieldHandle& F, const std::string& text) {
  std::string s;
  for (char ch : text) {
    if (ch == ' ') continue;
    s.push_back(ch);
  }
  auto exact_at = s.find("(exact)");
  if (exact_at != std::string::npos) s = s.substr(0, exact_at);
  auto mod_at = s.find("mod");
  if (mod_at != std::string::npos) s = s.substr(0, mod_at);
  if (s.empty()) throw FormatError("empty scalar literal");
  auto slash = s.find('/');
  try {
    if (slash == std::string::npos) {
      size_t used = 0;
      long long v = std::stoll(s, &used);
      if (used != s.size()) throw FormatError("trailing junk in scalar: " + text);
      return from_int(F, v);
    }
    std::string den = s.substr(slash + 1);
    long long num = std::stoll(s.substr(0, slash));
    long long d = 0;
    auto caret = den.find('^');
    if (caret != std::string::npos) {
      long long base = std::stoll(den.substr(0, caret));
      long long exp = std::stoll(den.substr(caret + 1));
      d = 1;
      for (long long i = 0; i < exp; ++i) d *= base;
    } else {
      d = std::stoll(den);
    }
    return from_rational(F, num, d);
  } catch (const std::invalid_argument&) {
    throw FormatError("unparsable scalar: " + text);
  } catch (const std::out_of_range&) {
    throw FormatError("scalar literal out of range: " + text);
  }
}

// ---------------------------------------------------------------------------
Rat Rat::make(long long n, long long d) {
  if (d == 0) throw UnsupportedCase("zero denominator");
  if (d < 0) {
    n = -n;
    d = -d;
  }
  long long g = std::gcd(n < 0 ? -n : n, d);
  if (g == 0) g = 1;
  return Rat{n / g, d / g};
}

std::string Rat::str() const {
  if (den == 1) return std::to_string(num);
  return std::to_string(num) + "/" + std::to_string(den);
}

// Binomials

int factorial_vp(u64 p, long long m) {
  int v = 0;
  for (long long q = m / (long long)p; q > 0; q /= (long long)p) v += (int)q;
  return v;
}

Scalar binom_padic(const Scalar& a, long long m) {
  if (m < 0) throw UnsupportedCase("binomial with negative lower index");
  const FieldHandle& F = a.F;
  if (m == 0) return Scalar::one(F);
  Scalar r = Scalar::one(F);
  for (long long i = 0; i < m; ++i) r = r * (a - Scalar::from_int(F, i));
  if (r.is_exact_zero()) return r;
  int vm = factorial_vp(F->p, m);
  u64 unit = 1;
  for (long long i = 2; i <= m; ++i) {
    long long t = i;
    while (t % (long long)F->p == 0) t /= (long long)F->p;
    unit = F->mul(unit, F->from_ll(t));
  }
  r = r * Scalar::from_residue(F, F->inv_unit(unit));
  r = r.mul_pow_p(-vm);
  if (r.prec <= 0)
    throw PrecisionExhausted("binomial denominator ate all certified digits");
  return r;
}

PascalTable::PascalTable(const FieldHandle& F, int nmax) : F_(F), nmax_(nmax) {
  row_.resize(nmax + 1);
  for (int n = 0; n <= nmax; ++n) {
    row_[n].resize(n + 1);
    row_[n][0] = 1 % F->pN;
    row_[n][n] = 1 % F->pN;
    for (int k = 1; k < n; ++k)
      row_[n][k] = F->add(row_[n - 1][k - 1], row_[n - 1][k]);
  }
}

u64 PascalTable::binom(int n, int k) const {
  if (k < 0 || k > n) return 0;
  if (n > nmax_) throw UnsupportedCase("binomial row beyond table size");
  return row_[n][k];
}

}  // namespace phig
