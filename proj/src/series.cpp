#include "phigamma/series.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>

namespace phig {

namespace {

constexpr long long LINF = Series::INF;

long long min_ll(long long a, long long b) { return a < b ? a : b; }

int clamp_rel(long long r, int K) {
  return (int)min_ll(r, (long long)K - 1);
}

}  // namespace

// ---------------------------------------------------------------------------
// Construction and shape

Series Series::zero(const FieldHandle& F) {
  Series s(F);
  s.lo = 0;
  s.K = 0;
  s.entire = true;
  s.rel = INF;
  return s;
}

Series Series::constant(const FieldHandle& F, const Scalar& c) {
  return monomial(F, c, 0);
}

Series Series::one(const FieldHandle& F) {
  return constant(F, Scalar::one(F));
}

Series Series::X(const FieldHandle& F) {
  return monomial(F, Scalar::one(F), 1);
}

Series Series::monomial(const FieldHandle& F, const Scalar& c, int d) {
  if (c.is_exact_zero()) return zero(F);
  Series s(F);
  s.lo = d;
  s.K = d + 1;
  s.entire = true;
  s.rel = INF;
  s.a = {c};
  return s;
}

Series Series::from_ints(const FieldHandle& F,
                         const std::vector<long long>& cs, int lo) {
  Series s(F);
  s.lo = lo;
  s.K = lo + (int)cs.size();
  s.entire = true;
  s.rel = INF;
  s.a.reserve(cs.size());
  for (long long v : cs) s.a.push_back(Scalar::from_int(F, v));
  return s.trimmed();
}

namespace {

// binom(n, j) as an exact integer when it fits comfortably in 62 bits.
bool small_binom(long long n, int j, long long& out) {
  long long b = 1;
  for (int i = 0; i < j; ++i) {
    long long f = n - i;
    if (f <= 0) { out = 0; return true; }
    if (b > (long long)4e17 / f) return false;
    b = b * f / (i + 1);
  }
  out = b;
  return true;
}

}  // namespace

Series Series::qpoly(const FieldHandle& F) {
  int p = (int)F->p;
  if (p > 2000) throw UnsupportedCase("qpoly window too large");
  PascalTable T(F, p);
  Series s(F);
  s.lo = 0;
  s.K = p;
  s.entire = true;
  s.rel = INF;
  for (int j = 0; j <= p - 1; ++j) {
    long long b;
    if (small_binom(p, j + 1, b))
      s.a.push_back(Scalar::from_int(F, b));
    else
      s.a.push_back(Scalar::from_residue(F, T.binom(p, j + 1)));
  }
  return s;
}

Series Series::one_plus_X_pow(const FieldHandle& F, long long n, int Kw) {
  if (Kw < 1) throw UnsupportedCase("empty window");
  if (n < 0) return inv_series(one_plus_X_pow(F, -n, Kw), Kw);
  if (n <= 2000) {
    PascalTable T(F, (int)n);
    Series s(F);
    s.lo = 0;
    s.K = (int)std::min<long long>(n + 1, Kw);
    s.entire = n + 1 <= (long long)Kw;
    s.rel = s.entire ? INF : Kw - 1;
    for (int j = 0; j < s.K; ++j) {
      long long b;
      if (small_binom(n, j, b))
        s.a.push_back(Scalar::from_int(F, b));
      else
        s.a.push_back(Scalar::from_residue(F, T.binom((int)n, j)));
    }
    return s.trimmed();
  }
  Series base(F);
  base.lo = 0;
  base.K = 2;
  base.entire = true;
  base.rel = INF;
  base.a = {Scalar::one(F), Scalar::one(F)};
  return base.pow_int(n, Kw);
}

Scalar Series::coeff(int d) const {
  if (d < lo || d >= K) return Scalar::zero(F);
  return a[d - lo];
}

Scalar Series::coeff_checked(int d) const {
  if (!entire && d > rel)
    throw Error("coefficient beyond the trusted window");
  return coeff(d);
}

bool Series::is_entire_zero() const {
  if (!entire) return false;
  for (const auto& c : a)
    if (!c.is_exact_zero()) return false;
  return true;
}

int Series::order() const {
  for (int d = lo; d < K; ++d) {
    const Scalar& c = a[d - lo];
    if (c.is_exact_zero()) continue;
    if (!entire && d > rel)
      throw NonInvertiblePole("order lies beyond the trusted window");
    if (c.is_prec_zero())
      throw NonInvertiblePole("leading coefficient indistinguishable from zero");
    return d;
  }
  if (entire) throw NonInvertiblePole("inverse of the zero polynomial");
  throw NonInvertiblePole("no certified nonzero coefficient in the window");
}

Series Series::trimmed() const {
  Series s = *this;
  size_t i = 0;
  while (i < s.a.size() && s.a[i].is_exact_zero()) ++i;
  if (i > 0) {
    s.a.erase(s.a.begin(), s.a.begin() + i);
    s.lo += (int)i;
  }
  if (s.entire) {
    while (!s.a.empty() && s.a.back().is_exact_zero()) {
      s.a.pop_back();
      --s.K;
    }
    if (s.a.empty()) return zero(F);
  }
  return s;
}

Series Series::truncated(int K2) const {
  if (K2 >= K) return *this;
  Series s = *this;
  bool dropped_real = false;
  for (int d = std::max(lo, K2); d < K; ++d)
    if (!a[d - lo].is_exact_zero()) dropped_real = true;
  s.K = std::max(lo, K2);
  s.a.resize(std::max(0, s.K - lo));
  if (entire && dropped_real) {
    s.entire = false;
    s.rel = s.K - 1;
  } else if (!entire) {
    s.rel = clamp_rel(rel, s.K);
  }
  return s;
}

Series Series::shifted(int k) const {
  Series s = *this;
  s.lo += k;
  s.K += k;
  if (!s.entire && s.rel < INF) s.rel += k;
  return s;
}

Series Series::to_field(const FieldHandle& G) const {
  Series s(G);
  s.lo = lo;
  s.K = K;
  s.entire = entire;
  s.rel = rel;
  s.a.reserve(a.size());
  for (const auto& c : a) s.a.push_back(c.to_field(G));
  return s;
}

Series Series::with_coeff_prec(int q) const {
  Series s = *this;
  for (auto& c : s.a) c = c.with_prec(q);
  return s;
}

int Series::min_prec(int dlo, int dhi) const {
  int m = Scalar::INF;
  if (!entire && dhi > rel) return 0;
  for (int d = std::max(dlo, lo); d <= std::min(dhi, K - 1); ++d) {
    const Scalar& c = a[d - lo];
    if (c.is_exact_zero()) continue;
    m = std::min(m, c.prec);
  }
  return m;
}

bool Series::is_zero_within(int w, int dlo, int dhi) const {
  if (!entire && dhi > rel) return false;
  for (int d = std::max(dlo, lo); d <= std::min(dhi, K - 1); ++d)
    if (!a[d - lo].is_zero_within(w)) return false;
  return true;
}

bool Series::eq_upto(const Series& o, int w, int dlo, int dhi) const {
  return (*this - o).is_zero_within(w, dlo, dhi);
}

// ---------------------------------------------------------------------------
// Arithmetic

Series Series::operator-() const {
  Series s = *this;
  for (auto& c : s.a) c = -c;
  return s;
}

Series Series::operator+(const Series& o) const {
  if (!F->same(*o.F)) throw UnsupportedCase("series fields differ");
  if (is_entire_zero()) return o;
  if (o.is_entire_zero()) return *this;
  bool ent = entire && o.entire;
  int lo2 = std::min(lo, o.lo);
  int K2;
  if (ent) {
    K2 = std::max(K, o.K);
  } else {
    long long Kc = LINF;
    if (!entire) Kc = K;
    if (!o.entire) Kc = min_ll(Kc, o.K);
    K2 = (int)Kc;
  }
  K2 = std::max(K2, lo2);
  Series r(F);
  r.lo = lo2;
  r.K = K2;
  r.entire = ent;
  r.rel = ent ? INF
              : clamp_rel(min_ll(unreliable_from(), o.unreliable_from()) - 1, K2);
  r.a.reserve(K2 - lo2);
  for (int d = lo2; d < K2; ++d) r.a.push_back(coeff(d) + o.coeff(d));
  return r.trimmed();
}

Series Series::operator-(const Series& o) const { return *this + (-o); }

Series Series::operator*(const Series& o) const {
  if (!F->same(*o.F)) throw UnsupportedCase("series fields differ");
  if (is_entire_zero() || o.is_entire_zero()) return zero(F);
  Series A = trimmed();
  Series B = o.trimmed();
  bool ent = A.entire && B.entire;
  int lo2 = A.lo + B.lo;
  long long K2l;
  if (ent) {
    K2l = (long long)(A.K - 1) + (B.K - 1) + 1;
  } else {
    K2l = LINF;
    if (!A.entire) K2l = min_ll(K2l, (long long)A.K + B.lo);
    if (!B.entire) K2l = min_ll(K2l, (long long)B.K + A.lo);
  }
  int K2 = (int)std::max(K2l, (long long)lo2);
  Series r(F);
  r.lo = lo2;
  r.K = K2;
  r.entire = ent;
  r.rel = ent ? INF
              : clamp_rel(min_ll((long long)A.unreliable_from() + B.lo,
                                 (long long)B.unreliable_from() + A.lo) -
                              1,
                          K2);
  r.a.assign(std::max(0, K2 - lo2), Scalar::zero(F));
  for (int i = 0; i < (int)A.a.size(); ++i) {
    if (A.a[i].is_exact_zero()) continue;
    int da = A.lo + i;
    for (int j = 0; j < (int)B.a.size(); ++j) {
      int d = da + B.lo + j;
      if (d >= K2) break;
      if (B.a[j].is_exact_zero()) continue;
      r.a[d - lo2] = r.a[d - lo2] + A.a[i] * B.a[j];
    }
  }
  return r.trimmed();
}

Series Series::smul(const Scalar& c) const {
  if (c.is_exact_zero()) return zero(F);
  Series s = *this;
  for (auto& x : s.a) x = x * c;
  return s;
}

Series Series::mul_pow_p(int k) const {
  Series s = *this;
  for (auto& x : s.a) x = x.mul_pow_p(k);
  return s;
}

Series Series::pow_int(long long n, int Kw) const {
  if (n < 0) throw UnsupportedCase("negative series power");
  Series r = one(F);
  Series b = truncated(Kw);
  unsigned long long m = (unsigned long long)n;
  while (m) {
    if (m & 1) r = (r * b).truncated(Kw);
    b = (b * b).truncated(Kw);
    m >>= 1;
  }
  return r;
}

std::string Series::str(int max_terms) const {
  std::ostringstream os;
  int shown = 0;
  bool first = true;
  for (int d = lo; d < K && shown < max_terms; ++d) {
    const Scalar& c = a[d - lo];
    if (c.is_exact_zero()) continue;
    if (!first) os << " + ";
    os << "(" << c.str() << ")";
    if (d != 0) os << "*X^" << d;
    first = false;
    ++shown;
  }
  if (first) os << "0";
  if (!entire) os << " + O(X^" << K << ")";
  return os.str();
}

// ---------------------------------------------------------------------------
// Inversion and exact division

Series inv_series(const Series& f, int Kout) {
  const FieldHandle& F = f.F;
  if (Kout < 1) throw UnsupportedCase("empty inversion window");
  Series g = f.trimmed();
  int ord = g.order();
  Scalar s_inv = g.coeff(ord).inv();
  std::vector<Scalar> h((size_t)Kout, Scalar::zero(F));
  h[0] = s_inv;
  for (int m = 1; m < Kout; ++m) {
    Scalar acc = Scalar::zero(F);
    for (int i = 1; i <= m; ++i) {
      Scalar gi = g.coeff(ord + i);
      if (gi.is_exact_zero() || h[m - i].is_exact_zero()) continue;
      acc = acc + gi * h[m - i];
    }
    h[m] = -(s_inv * acc);
  }
  Series r(F);
  r.lo = -ord;
  r.K = Kout - ord;
  r.entire = false;
  // h_m trusts g up to index m above the order, so the output degree m - ord
  // stays reliable while m + ord is below the input's junk boundary.
  r.rel = clamp_rel((long long)g.unreliable_from() - 2 * ord - 1, r.K);
  r.a = std::move(h);
  return r.trimmed();
}

Series divide_entire(const Series& f, const Series& g) {
  if (!f.entire || !g.entire)
    throw UnsupportedCase("exact division needs exact polynomials");
  const FieldHandle& F = f.F;
  Series num = f.trimmed();
  Series den = g.trimmed();
  if (den.a.empty()) throw NonInvertiblePole("division by zero polynomial");
  Scalar top = den.a.back();
  if (top.is_prec_zero() || top.val() != 0)
    throw UnsupportedCase("divisor top coefficient must be a unit");
  Scalar top_inv = top.inv();
  int dg = den.K - 1;
  if (num.a.empty()) return Series::zero(F);
  int df = num.K - 1;
  Series rem = num;
  Series quot(F);
  quot.lo = 0;
  quot.K = std::max(0, df - dg + 1);
  quot.entire = true;
  quot.rel = Series::INF;
  quot.a.assign((size_t)std::max(0, df - dg + 1), Scalar::zero(F));
  for (int d = df; d >= dg; --d) {
    Scalar c = rem.coeff(d);
    if (c.is_exact_zero()) continue;
    Scalar qc = c * top_inv;
    quot.a[d - dg] = qc;
    rem = rem - den.shifted(d - dg).smul(qc);
  }
  for (int d = rem.lo; d < rem.K; ++d) {
    Scalar c = rem.coeff(d);
    if (!c.is_zero_within(c.prec))
      throw NonInvertiblePole("remainder does not vanish");
  }
  return quot.trimmed();
}

// ---------------------------------------------------------------------------
// phi and gamma share the substitution core.

namespace {

// Horner evaluation of f at Y, Y.lo >= 1, truncating at Kw (LINF: exact).
Series substitute(const Series& f, const Series& Y, long long Kw) {
  const FieldHandle& F = f.F;
  int wnd = Kw < LINF ? (int)Kw : (1 << 20);
  Series r = Series::zero(F);
  for (int d = f.K - 1; d >= f.lo; --d) {
    r = (r * Y).truncated(wnd);
    r = r + Series::constant(F, f.coeff(d));
  }
  if (f.lo > 0) r = (r * Y.pow_int(f.lo, wnd)).truncated(wnd);
  return r;
}

// Substitution operators keep the junk boundary where it was: the image of
// X^j starts at degree j, so garbage at input degree j never reaches output
// degrees below j.  Restore the window and that boundary after the generic
// coefficient arithmetic.
Series fix_window(Series r, int KK, long long rel_in, bool ent) {
  if (ent) {
    r.entire = true;
    r.rel = Series::INF;
    return r.trimmed();
  }
  if (r.K > KK) {
    r.K = std::max(r.lo, KK);
    r.a.resize((size_t)std::max(0, r.K - r.lo));
  }
  if (r.K < KK) {
    r.a.resize((size_t)std::max(0, KK - r.lo), Scalar::zero(r.F));
    r.K = std::max(KK, r.lo);
  }
  r.entire = false;
  r.rel = clamp_rel(rel_in, r.K);
  return r.trimmed();
}

}  // namespace

Series phi(const Series& f, int Kcap) {
  const FieldHandle& F = f.F;
  Series g = f.trimmed();
  if (g.is_entire_zero()) return g;
  int L = g.lo < 0 ? -g.lo : 0;
  if (L > 0) {
    if (!g.entire)
      throw NonInvertiblePole("pole input to phi must be an exact polynomial");
    Series img = phi(g.shifted(L), -1);
    Series qL = Series::qpoly(F).pow_int(L, 1 << 20);
    Series r = divide_entire(img, qL).shifted(-L);
    if (Kcap >= 0) r = r.truncated(Kcap);
    return r;
  }
  long long natural = (long long)(g.K - 1) * (long long)F->p + 1;
  long long Keff;
  if (g.entire)
    Keff = Kcap < 0 ? natural : min_ll(natural, Kcap);
  else
    Keff = Kcap < 0 ? g.K : min_ll(g.K, Kcap);
  if (Keff > 100000) throw UnsupportedCase("phi window too large");
  bool ent = g.entire && Keff >= natural;
  Series Y = Series::one_plus_X_pow(F, (long long)F->p, (int)Keff + 1) -
             Series::one(F);
  Y = Y.trimmed().truncated((int)Keff + 1);
  Series r = substitute(g, Y, ent ? LINF : Keff);
  return fix_window(std::move(r), (int)Keff,
                    g.entire ? Keff - 1 : (long long)g.rel, ent);
}

Series phi_pow(const Series& f, int m, int Kcap) {
  Series r = f;
  for (int i = 0; i < m; ++i) r = phi(r, Kcap);
  return r;
}

namespace {

// (1+X)^aa - 1 with the constant coefficient forced to the exact zero the
// binomial theorem guarantees.
Series gamma_X(const FieldHandle& F, long long aa, int Kw) {
  Series s = Series::one_plus_X_pow(F, aa, Kw);
  if (!s.a.empty() && s.lo == 0) s.a[0] = Scalar::zero(F);
  return s.trimmed();
}

Series gamma_generic(const Series& f, const Series& Ya, long long Keff) {
  Series g = f.trimmed();
  if (g.is_entire_zero()) return g;
  int L = g.lo < 0 ? -g.lo : 0;
  if (Keff > 100000) throw UnsupportedCase("gamma window too large");
  bool ent = g.entire && Ya.entire && L == 0 &&
             Keff > (long long)(g.K - 1) * std::max(1, Ya.K - 1);
  Series intp = L > 0 ? g.shifted(L) : g;
  Series r = substitute(intp, Ya.truncated((int)Keff), ent ? LINF : Keff);
  long long rel_pre = g.entire ? Keff - 1 : (long long)g.rel + L;
  if (L > 0) {
    // gamma(X^{-L} h) = X^{-L} w^{-L} gamma(h) with the unit w = gamma(X)/X.
    Series w = Ya.truncated((int)Keff + 1).shifted(-1);
    Series winv = inv_series(w, (int)Keff);
    r = (r * winv.pow_int(L, (int)Keff)).truncated((int)Keff);
    ent = false;
  }
  r = fix_window(std::move(r), (int)Keff, rel_pre, ent);
  return L > 0 ? r.shifted(-L) : r;
}

}  // namespace

Series gamma_int(const Series& f, long long aa) {
  const FieldHandle& F = f.F;
  if (aa == 0 || std::llabs(aa) % (long long)F->p == 0)
    throw UnsupportedCase("gamma index must be a p-adic unit");
  Series g = f.trimmed();
  if (g.is_entire_zero()) return g;
  if (g.entire && g.lo == 0 && g.K == 1) return g;  // constants are fixed
  int L = g.lo < 0 ? -g.lo : 0;
  long long Keff;
  if (g.entire && aa > 0)
    Keff = (long long)(g.K - 1 + L) * aa + 1 + L;
  else if (g.entire)
    Keff = (long long)(g.K + L) + 64;
  else
    Keff = (long long)g.K + L;
  // A pole makes the result a full power series through the unit inverse;
  // leave room past the cleared numerator.
  if (L > 0 && g.entire) Keff += 32;
  if (Keff > 100000) throw UnsupportedCase("gamma window too large");
  Series Ya = gamma_X(F, aa, (int)std::max(Keff + 1, std::llabs(aa) + 2));
  return gamma_generic(f, Ya, Keff);
}

Series gamma_scalar(const Series& f, const Scalar& aa) {
  if (aa.int_hint) return gamma_int(f, *aa.int_hint);
  const FieldHandle& F = f.F;
  if (aa.is_exact_zero() || aa.is_prec_zero() || aa.val() != 0)
    throw UnsupportedCase("gamma index must be a p-adic unit");
  Series g = f.trimmed();
  if (g.is_entire_zero()) return g;
  if (g.entire && g.lo == 0 && g.K == 1) return g;  // constants are fixed
  int L = g.lo < 0 ? -g.lo : 0;
  long long Keff = (long long)g.K + L + (g.entire ? 1 : 0);
  if (L > 0 && g.entire) Keff += 32;
  if (Keff > 100000) throw UnsupportedCase("gamma window too large");
  Series Ya(F);
  Ya.lo = 1;
  Ya.K = (int)std::max(Keff + 1, (long long)2);
  Ya.entire = false;
  Ya.rel = Ya.K - 1;
  for (int m = 1; m < Ya.K; ++m) Ya.a.push_back(binom_padic(aa, m));
  return gamma_generic(f, Ya, Keff);
}

// ---------------------------------------------------------------------------
// psi

Series psi(const Series& f) {
  const FieldHandle& F = f.F;
  Series g = f.trimmed();
  if (g.is_entire_zero()) return g;
  int L = g.lo < 0 ? -g.lo : 0;
  if (L > 0) {
    // psi(X^{-L} h) = X^{-L} psi(q^L h); q^L h is expanded exactly and the
    // shift by L widens the window before degrees divide by p.
    Series qL = Series::qpoly(F).pow_int(L, 1 << 20);
    return psi(qL * g.shifted(L)).shifted(-L).trimmed();
  }
  const int p = (int)F->p;
  const bool ent = g.entire;
  const int grel = g.rel;
  if (!ent) {
    for (int d = g.lo; d <= std::min(grel, g.K - 1); ++d) {
      Scalar c = g.coeff(d);
      if (!c.is_exact_zero() && !c.is_prec_zero() && c.val_lb() < 0)
        throw UnsupportedElement("psi on a truncated series needs an integral tail");
    }
    // Degrees beyond rel hold garbage; zero them so the deviation from the
    // truth is exactly psi of the unknown integral tail, which the caps
    // below account for.
    for (int d = std::max(g.lo, grel + 1); d < g.K; ++d)
      g.a[d - g.lo] = Scalar::zero(F);
    g = g.trimmed();
  }
  int Kin = g.K;
  if (Kin > 5000) throw UnsupportedCase("psi window too large");
  PascalTable T(F, std::max(0, Kin - 1));
  // X-basis to T-basis, T = 1+X: d_m = sum_j (-1)^(j-m) binom(j, m) c_j.
  std::vector<Scalar> dm((size_t)std::max(0, Kin), Scalar::zero(F));
  for (int m = 0; m < Kin; ++m) {
    Scalar acc = Scalar::zero(F);
    for (int j = std::max(m, g.lo); j < Kin; ++j) {
      Scalar cj = g.coeff(j);
      if (cj.is_exact_zero()) continue;
      Scalar term = cj * Scalar::from_residue(F, T.binom(j, m));
      acc = ((j - m) & 1) ? acc - term : acc + term;
    }
    dm[m] = acc;
  }
  // Keep T^(p j) -> T^j, then back: c'_i = sum_j binom(j, i) d_(p j).
  int Kout = Kin >= 1 ? (Kin - 1) / p + 1 : 0;
  Series r(F);
  r.lo = 0;
  r.K = std::max(Kout, 0);
  r.a.assign((size_t)std::max(0, Kout), Scalar::zero(F));
  for (int i = 0; i < Kout; ++i) {
    Scalar acc = Scalar::zero(F);
    for (int j = i; j < Kout; ++j) {
      const Scalar& ej = dm[(size_t)p * j];
      if (ej.is_exact_zero()) continue;
      acc = acc + ej * Scalar::from_residue(F, T.binom(j, i));
    }
    r.a[i] = acc;
  }
  if (ent) {
    r.entire = true;
    r.rel = Series::INF;
    return r.trimmed();
  }
  r.entire = false;
  // The unknown tail X^U Z_p[[X]] (U = grel + 1) lands at output degree i
  // with valuation at least ceil((U - p i)/(p-1)) - 1; the output is trusted
  // exactly where that bound is positive.
  long long U = (long long)grel + 1;
  r.rel = clamp_rel(U >= p ? (U - p) / p : -1, r.K);
  for (int i = 0; i < (int)r.a.size(); ++i) {
    long long num = U - (long long)p * i;
    long long B = num > 0 ? (num + p - 2) / (p - 1) - 1 : 0;
    if (B < 0) B = 0;
    r.a[i] = r.a[i].with_prec((int)min_ll(B * F->e, Scalar::INF));
  }
  return r.trimmed();
}

namespace {

// Zero within pi^w over every trusted stored degree.
bool small_everywhere(const Series& s, int w) {
  int top = s.entire ? s.K - 1 : std::min(s.K - 1, s.rel);
  for (int d = s.lo; d <= top; ++d)
    if (!s.coeff(d).is_zero_within(w)) return false;
  return true;
}

}  // namespace

Series psi_resolvent(const Series& x, const Scalar& alpha, int Kw) {
  const FieldHandle& F = x.F;
  int target = F->N * F->e;
  if (Kw < 0) Kw = x.entire ? std::max(64, x.K * 2) : x.K;
  if (alpha.is_exact_zero()) return phi(x, Kw);
  int v = alpha.val();
  if (v == 0)
    throw UnsupportedCase("resolvent at a unit eigenvalue is not supported");
  if (v < 0) {
    // y = -alpha^{-1} sum_k (alpha^{-1} psi)^k x; each step gains |v|.
    Scalar ai = alpha.inv();
    Series term = x;
    Series acc = Series::zero(F);
    for (int k = 0;; ++k) {
      acc = acc + term.smul(ai);
      term = psi(term).smul(ai);
      if (small_everywhere(term, target)) break;
      if (k >= 400) throw NoConvergence("resolvent series did not terminate");
    }
    return -acc;
  }
  // y = sum_k alpha^k phi^(k+1)(x); psi(y) - alpha y telescopes to x.
  Series acc = Series::zero(F);
  Series cur = phi(x, Kw);
  Scalar ak = Scalar::one(F);
  for (int k = 0;; ++k) {
    Series term = cur.smul(ak);
    acc = acc + term;
    if (small_everywhere(term, target)) break;
    if (k >= 400) throw NoConvergence("resolvent series did not terminate");
    cur = phi(cur, Kw);
    ak = ak * alpha;
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Distinguished series

Series t_series(const FieldHandle& F, int Kw) {
  if (Kw < 2) throw UnsupportedCase("window too small for log(1+X)");
  Series s(F);
  s.lo = 1;
  s.K = Kw;
  s.entire = false;
  s.rel = Kw - 1;
  for (int n = 1; n < Kw; ++n)
    s.a.push_back(Scalar::from_rational(F, (n % 2 == 1) ? 1 : -1, n));
  return s;
}

namespace {

Series log_half(const FieldHandle& F, int Kw, int target_p, int m0) {
  Series r = Series::one(F);
  Series cur = phi_pow(Series::qpoly(F).truncated(Kw), m0, Kw);
  Series onew = Series::one(F);
  int w = target_p * F->e;
  for (int it = 0; it < 40; ++it) {
    Series factor = cur.mul_pow_p(-1);
    if (it > 0 && (factor - onew).is_zero_within(w, 0, Kw - 1)) return r;
    r = (r * factor).truncated(Kw);
    cur = phi(phi(cur, Kw), Kw);
  }
  throw NoConvergence("log factor did not converge to 1");
}

}  // namespace

Series log_plus(const FieldHandle& F, int Kw, int target_p) {
  return log_half(F, Kw, target_p, 1);
}

Series log_minus(const FieldHandle& F, int Kw, int target_p) {
  return log_half(F, Kw, target_p, 0);
}

Series w_unit(const FieldHandle& F, long long aa, int Kw) {
  return gamma_X(F, aa, Kw + 1).shifted(-1).truncated(Kw);
}

// ---------------------------------------------------------------------------
// SeriesMat

SeriesMat SeriesMat::identity(const FieldHandle& F, int d) {
  SeriesMat M(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      M.at(i, j) = i == j ? Series::one(F) : Series::zero(F);
  return M;
}

SeriesMat SeriesMat::operator+(const SeriesMat& o) const {
  if (n != o.n || m != o.m) throw UnsupportedCase("matrix shape mismatch");
  SeriesMat r(n, m);
  for (int i = 0; i < n * m; ++i) r.e[i] = e[i] + o.e[i];
  return r;
}

SeriesMat SeriesMat::operator-(const SeriesMat& o) const {
  if (n != o.n || m != o.m) throw UnsupportedCase("matrix shape mismatch");
  SeriesMat r(n, m);
  for (int i = 0; i < n * m; ++i) r.e[i] = e[i] - o.e[i];
  return r;
}

SeriesMat SeriesMat::operator*(const SeriesMat& o) const {
  if (m != o.n) throw UnsupportedCase("matrix shape mismatch");
  SeriesMat r(n, o.m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < o.m; ++j) {
      Series acc = at(i, 0) * o.at(0, j);
      for (int k = 1; k < m; ++k) acc = acc + at(i, k) * o.at(k, j);
      r.at(i, j) = acc;
    }
  return r;
}

SeriesMat SeriesMat::smul(const Scalar& c) const {
  SeriesMat r = *this;
  for (auto& s : r.e) s = s.smul(c);
  return r;
}

SeriesMat SeriesMat::mul_series(const Series& s) const {
  SeriesMat r = *this;
  for (auto& x : r.e) x = x * s;
  return r;
}

SeriesMat SeriesMat::map(Series (*op)(const Series&)) const {
  SeriesMat r = *this;
  for (auto& s : r.e) s = op(s);
  return r;
}

SeriesMat SeriesMat::transposed() const {
  SeriesMat r(m, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) r.at(j, i) = at(i, j);
  return r;
}

Series SeriesMat::det2() const {
  if (n != 2 || m != 2) throw UnsupportedCase("det2 needs a 2x2 matrix");
  return at(0, 0) * at(1, 1) - at(0, 1) * at(1, 0);
}

SeriesMat SeriesMat::adj2() const {
  if (n != 2 || m != 2) throw UnsupportedCase("adj2 needs a 2x2 matrix");
  SeriesMat r(2, 2);
  r.at(0, 0) = at(1, 1);
  r.at(1, 1) = at(0, 0);
  r.at(0, 1) = -at(0, 1);
  r.at(1, 0) = -at(1, 0);
  return r;
}

SeriesMat SeriesMat::truncated(int K2) const {
  SeriesMat r = *this;
  for (auto& s : r.e) s = s.truncated(K2);
  return r;
}

bool SeriesMat::eq_upto(const SeriesMat& o, int w, int dlo, int dhi) const {
  if (n != o.n || m != o.m) return false;
  for (int i = 0; i < n * m; ++i)
    if (!e[i].eq_upto(o.e[i], w, dlo, dhi)) return false;
  return true;
}

bool SeriesMat::is_zero_within(int w, int dlo, int dhi) const {
  for (const auto& s : e)
    if (!s.is_zero_within(w, dlo, dhi)) return false;
  return true;
}

SeriesMat phi(const SeriesMat& M, int Kcap) {
  SeriesMat r = M;
  for (auto& s : r.e) s = phi(s, Kcap);
  return r;
}

SeriesMat gamma_int(const SeriesMat& M, long long aa) {
  SeriesMat r = M;
  for (auto& s : r.e) s = gamma_int(s, aa);
  return r;
}

}  // namespace phig
