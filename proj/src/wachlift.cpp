#include "phigamma/wachlift.hpp"

#include <algorithm>
#include <tuple>

#include "phigamma/errors.hpp"
#include "phigamma/filtmod.hpp"

namespace phig {

namespace {

SeriesMat zero_mat(const FieldHandle& F, int d) {
  SeriesMat M(d, d);
  for (auto& s : M.e) s = Series::zero(F);
  return M;
}

SeriesMat shift_mat(const SeriesMat& M, int k) {
  SeriesMat R(M.n, M.m);
  for (size_t i = 0; i < M.e.size(); ++i) R.e[i] = M.e[i].shifted(k);
  return R;
}

SeriesMat mat_to_field(const SeriesMat& M, const FieldHandle& G) {
  SeriesMat R(M.n, M.m);
  for (size_t i = 0; i < M.e.size(); ++i) R.e[i] = M.e[i].to_field(G);
  return R;
}

// Certified division by X^k: the coefficients below degree k must vanish
// within pi^w, and what remains shifts down.
Series drop_low(const Series& s, int k, int w) {
  if (s.lo >= k) return s.shifted(-k);
  if (s.lo < 0) throw UnsupportedCase("pole where a zero was required");
  int low_hi = std::min(k, s.entire ? s.K : std::min(s.rel + 1, s.K));
  if (low_hi < k && !s.entire)
    throw NoConvergence("window too short to certify the X-divisibility");
  if (low_hi > s.lo && !s.is_zero_within(w, s.lo, low_hi - 1))
    throw NoConvergence("difference is not divisible by X^span at tolerance");
  Series r(s.F);
  r.lo = 0;
  r.K = std::max(s.K - k, 0);
  r.entire = s.entire;
  r.rel = s.entire ? Series::INF : s.rel - k;
  r.a.resize((size_t)r.K);
  for (int d = 0; d < r.K; ++d) r.a[(size_t)d] = s.coeff(d + k);
  return r.trimmed();
}

// Joint (X, pi) size of a residual on the window [0, Kc): the minimum of
// d*e + val_lb over stored coefficients, capped so that a fully converged
// residual compares above everything a non-converged one can produce.
int combined_floor(const SeriesMat& R, int Kc, int e, int cap) {
  int best = cap;
  for (const auto& s : R.e) {
    int hi = std::min({Kc, s.K, s.unreliable_from()});
    for (int d = std::max(0, s.lo); d < hi; ++d) {
      Scalar c = s.coeff(d);
      if (c.is_exact_zero()) continue;
      best = std::min(best, d * e + c.val_lb());
    }
  }
  return best;
}

u64 powmod(u64 b, u64 k, u64 p) {
  b %= p;
  u64 r = 1 % p;
  while (k) {
    if (k & 1) r = r * b % p;
    b = b * b % p;
    k >>= 1;
  }
  return r;
}

}  // namespace

int alpha_bound(const FieldHandle& F, int r, const Scalar& eps) {
  if (r < 0) throw UnsupportedCase("alpha_bound needs r >= 0");
  int total = 0;
  Scalar cur = Scalar::one(F);
  for (int j = 1; j <= r; ++j) {
    cur = cur * eps;
    total += (Scalar::one(F) - cur).val();
  }
  return total;
}

int alpha_bound(const FieldHandle& F, int r) {
  return alpha_bound(F, r, Scalar::from_int(F, (long long)F->p + 1));
}

SolveReport solve_H(const SeriesMat& G, const SeriesMat& H0, int k, int C) {
  if (G.n != G.m || G.n < 1 || H0.n != G.n || H0.m != G.m)
    throw UnsupportedCase("matrices must be square of matching size");
  if (k < 2) throw UnsupportedCase("weight k must be >= 2");
  if (C < 0) throw UnsupportedCase("headroom exponent must be >= 0");
  const FieldHandle& F = G.at(0, 0).F;
  if (!F) throw UnsupportedCase("matrix entries carry no field");
  const int d = G.n;
  const int w_full = F->N * F->e;
  const long long aa = (long long)F->p + 1;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      const Series& s = G.at(i, j);
      if (!s.entire && s.rel + 1 < k)
        throw UnsupportedCase("loop matrix window too short for the weight");
      Scalar c = s.coeff(0) - (i == j ? Scalar::one(F) : Scalar::zero(F));
      if (!c.is_zero_within(w_full))
        throw UnsupportedCase("loop matrix must be the identity mod X");
    }

  // Only the constant matrix of H0 seeds the solve; the recursion fills in
  // every higher degree itself.
  SolveReport rep;
  rep.H = zero_mat(F, d);
  int prec0 = Scalar::INF;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      Scalar c = H0.at(i, j).coeff(0);
      if (c.is_exact_zero()) continue;
      rep.H.at(i, j) = Series::constant(F, c);
      prec0 = std::min(prec0, c.prec);
    }

  Scalar eps = Scalar::from_int(F, aa);
  Scalar epspow = Scalar::one(F);
  for (int r = 1; r <= k - 1; ++r) {
    epspow = epspow * eps;
    Scalar divisor = Scalar::one(F) - epspow;
    int dval = divisor.val();
    SeriesMat E = (rep.H * G - G * gamma_int(rep.H, aa)).truncated(r + 1);
    SolveStep step{r, dval, Scalar::INF};
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        Scalar c = E.at(i, j).coeff(r);
        if (c.is_exact_zero()) continue;
        Scalar x = -(c / divisor);
        if (!x.is_exact_zero()) {
          if (x.val_lb() < C)
            throw PrecisionExhausted(
                "division by 1 - eps^r dropped an entry below the headroom");
          step.min_entry_val = std::min(step.min_entry_val, x.val_lb());
          rep.H.at(i, j) = rep.H.at(i, j) + Series::monomial(F, x, r);
        }
      }
    rep.ledger.push_back(step);
    rep.total_loss += dval;
  }

  rep.condition_window =
      prec0 == Scalar::INF ? w_full
                           : std::min(w_full, prec0 - rep.total_loss);
  if (rep.condition_window < 1)
    throw PrecisionExhausted("no precision left to verify the conjugation");
  SeriesMat E = (rep.H * G - G * gamma_int(rep.H, aa)).truncated(k);
  for (int r = 0; r <= k - 1; ++r)
    for (const auto& s : E.e)
      if (!s.coeff(r).is_zero_within(rep.condition_window))
        throw ConditionViolated("conjugation does not close below X^k");
  return rep;
}

PerturbationProblem make_perturbation(const WachModule& seed,
                                      const SeriesMat& H0, int C, int k) {
  if (C < 0) throw UnsupportedCase("headroom exponent must be >= 0");
  if (k != seed.h + 1)
    throw WeightMismatch("perturbation weight must match the seed span");
  if (H0.n != seed.d || H0.m != seed.d)
    throw UnsupportedCase("perturbation size must match the seed rank");
  const int need = alpha_bound(seed.F, k - 1) + C;
  for (const auto& s : H0.e) {
    if (s.lo < 0) throw UnsupportedCase("perturbation entries must be integral");
    int hi = std::min(s.K, s.unreliable_from());
    for (int dd = s.lo; dd < hi; ++dd) {
      Scalar c = s.coeff(dd);
      if (!c.is_exact_zero() && c.val_lb() < need)
        throw ConditionViolated(
            "perturbation entries sit below the alpha budget");
    }
  }
  return PerturbationProblem{seed, H0, C, k};
}

SolveReport solve_H(const PerturbationProblem& prob) {
  return solve_H(prob.seed.G, prob.H0, prob.k, prob.C);
}

GammaFit build_gamma(const WachModule& seed, const SeriesMat& H, int budget,
                     int max_iter) {
  const FieldHandle& F = seed.F;
  if (seed.d != 2 || H.n != 2 || H.m != 2)
    throw UnsupportedCase("rank-2 modules only");
  if (seed.h < 1) throw UnsupportedCase("weight span must be positive");
  const int e = F->e;
  if (budget < 0 || budget >= F->N * e)
    throw UnsupportedCase("tolerance budget leaves no precision");
  const int K = seed.K, h = seed.h;
  const long long aa = seed.gamma_a;
  const int target_w = F->N * e - budget;

  SeriesMat IH = SeriesMat::identity(F, 2) + H;
  SeriesMat Q = IH * seed.P;
  SeriesMat gQ = gamma_int(Q, aa);
  SeriesMat gIH = gamma_int(IH, aa);
  SeriesMat gIH_inv =
      gIH.adj2().mul_series(inv_series(gIH.det2(), K)).truncated(K);
  SeriesMat adj_gP = gamma_int(seed.P, aa).adj2();
  Series wun = w_unit(F, aa, K);
  Series S =
      (wun * inv_series(phi(wun, K), K)).truncated(K).pow_int(h, K);
  if (!seed.u_is_one) S = (S * gamma_int(seed.u_inv, aa)).truncated(K);

  // First correction in closed form: with the seed commutation identity,
  // Q phi(G) gamma(Q)^{-1} - G collapses to (H G - G gamma(H)) gamma(Id+H)^{-1},
  // which the degree-by-degree solve left divisible by X^h.  This is where a
  // perturbation that skipped that solve gets rejected.
  SeriesMat E = (H * seed.G - seed.G * gamma_int(H, aa)).truncated(K);
  SeriesMat D0 = (E * gIH_inv).truncated(K);
  SeriesMat M(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) M.at(i, j) = drop_low(D0.at(i, j), h, target_w);

  GammaFit fit;
  fit.G = seed.G;
  const int cap = target_w + K * e;
  for (int it = 0;; ++it) {
    SeriesMat R = (Q * phi(fit.G, K) - fit.G * gQ).truncated(K);
    fit.trace.push_back(combined_floor(R, K, e, cap));
    fit.iterations = it + 1;
    if (R.is_zero_within(target_w, 0, K - 1)) break;
    if (it >= max_iter)
      throw NoConvergence("residual above tolerance at the iteration cap");
    size_t n = fit.trace.size();
    if (n >= 2 && fit.trace[n - 1] < fit.trace[n - 2])
      throw NoConvergence("residual regressed");
    if (n >= 3 && fit.trace[n - 1] <= fit.trace[n - 3])
      throw NoConvergence("residual stalled for two rounds");
    fit.G = (fit.G + shift_mat(M, h)).truncated(K);
    M = (Q * phi(M, K) * adj_gP * gIH_inv).mul_series(S).truncated(K);
  }
  return fit;
}

NkapBuild construct_Nkap_full(const FieldHandle& F, int k, const Scalar& ap,
                              int K) {
  if (k < 2) throw UnsupportedCase("weight k must be >= 2");
  const int e = F->e, Ne = F->N * e;
  NkapBuild out;
  out.W = wach_ap_zero(F, k, K);
  out.solve.H = zero_mat(F, 2);
  out.solve.condition_window = Ne;
  out.fit.G = out.W.G;
  if (ap.is_exact_zero()) return out;

  const WachModule seed = out.W;
  const int vala = ap.val();
  if (vala < 1)
    throw UnsupportedCase("Frobenius trace must have positive valuation");
  const int alpha = alpha_bound(F, k - 1);
  const int C = std::max(0, vala - alpha);
  SeriesMat H0 = zero_mat(F, 2);
  H0.at(1, 0) = Series::constant(F, -ap);
  out.solve = solve_H(seed.G, H0, k, C);

  // Whatever certified digits the trace carries above the working precision
  // fund the alpha divisions; the rest is charged against the tolerance.
  const int headroom = std::max(0, ap.prec - Ne);
  const int budget = std::max(0, alpha - headroom);
  out.fit = build_gamma(seed, out.solve.H, budget);

  SeriesMat Q = (SeriesMat::identity(F, 2) + out.solve.H) * seed.P;
  out.W = wach_from_parts(F, Q, out.fit.G, -(k - 1), 0, K);
  CommutationReport cr = verify_commutation(out.W, Ne - budget);
  if (!cr.ok)
    throw ConditionViolated("lifted module fails the commutation identity");

  // The quotient by X must recover the crystalline data of the trace: same
  // characteristic polynomial, same filtration jumps.  Comparison runs at
  // the precision the lift actually certifies.
  const int N2 = (Ne - budget) / e;
  FieldHandle F2 = N2 == F->N ? F : F->reduced_to(N2);
  WachModule Wred =
      N2 == F->N ? out.W
                 : wach_from_parts(F2, mat_to_field(out.W.P, F2),
                                   mat_to_field(out.W.G, F2), -(k - 1), 0, K);
  FilteredPhiModule red = reduce_mod_X(Wred);
  FilteredPhiModule ref = make_Dkap(F2, k, ap.to_field(F2));
  const int w2 = N2 * e;
  Scalar tr_red = red.phi_at(0, 0) + red.phi_at(1, 1);
  Scalar tr_ref = ref.phi_at(0, 0) + ref.phi_at(1, 1);
  Scalar det_red = red.phi_at(0, 0) * red.phi_at(1, 1) -
                   red.phi_at(0, 1) * red.phi_at(1, 0);
  Scalar det_ref = ref.phi_at(0, 0) * ref.phi_at(1, 1) -
                   ref.phi_at(0, 1) * ref.phi_at(1, 0);
  if (!tr_red.eq_upto(tr_ref, w2) || !det_red.eq_upto(det_ref, w2))
    throw ConditionViolated(
        "reduced Frobenius has the wrong characteristic polynomial");
  if (red.j_lo != ref.j_lo || red.j_hi != ref.j_hi)
    throw ConditionViolated("reduced filtration jumps are wrong");
  return out;
}

WachModule construct_Nkap(const FieldHandle& F, int k, const Scalar& ap,
                          int K) {
  return construct_Nkap_full(F, k, ap, K).W;
}

ModpMatrices reduce_mod_p(const WachModule& W) {
  if (W.F->ext != ExtKind::none)
    throw UnsupportedCase("mod-p reduction takes base-field modules");
  ModpMatrices R;
  R.p = W.F->p;
  R.d = W.d;
  R.K = W.K;
  auto flat = [&](const SeriesMat& M) {
    std::vector<std::vector<u64>> rows;
    for (const auto& s : M.e) {
      if (s.lo < 0) throw UnsupportedCase("entries must be X-integral");
      if (!s.entire && s.rel + 1 < W.K)
        throw UnsupportedCase("entry window is not reliable up to K");
      std::vector<u64> cs((size_t)W.K, 0);
      for (int dd = 0; dd < W.K; ++dd) {
        Scalar c = s.coeff(dd);
        cs[(size_t)dd] = c.is_exact_zero() ? 0 : c.residue(1);
      }
      rows.push_back(std::move(cs));
    }
    return rows;
  };
  R.P = flat(W.P);
  R.G = flat(W.G);
  return R;
}

bool compare_mod_p(const WachModule& A, const WachModule& B) {
  ModpMatrices a = reduce_mod_p(A), b = reduce_mod_p(B);
  if (a.p != b.p || a.d != b.d) return false;
  const int Kc = std::min(a.K, b.K);
  for (size_t r = 0; r < a.P.size(); ++r)
    for (int dd = 0; dd < Kc; ++dd)
      if (a.P[r][(size_t)dd] != b.P[r][(size_t)dd] ||
          a.G[r][(size_t)dd] != b.G[r][(size_t)dd])
        return false;
  return true;
}

// ---------------------------------------------------------------------------
// Symbolic labels.

Fp2Field::Fp2Field(u64 pp) : p(pp) {
  if (p < 3) throw UnsupportedCase("the label field needs an odd prime");
  if (p >= (1u << 20))
    throw UnsupportedCase("prime too large for the table model");
  for (u64 n = 2; n < p; ++n)
    if (powmod(n, (p - 1) / 2, p) == p - 1) {
      nqr = n;
      break;
    }
  if (!nqr) throw UnsupportedCase("no quadratic non-residue found");
}

Fp2 Fp2Field::make(u64 a, u64 b) const { return Fp2{a % p, b % p}; }

Fp2 Fp2Field::from_ll(long long v) const {
  long long m = (long long)p;
  return Fp2{(u64)(((v % m) + m) % m), 0};
}

Fp2 Fp2Field::add(const Fp2& x, const Fp2& y) const {
  return Fp2{(x.a + y.a) % p, (x.b + y.b) % p};
}

Fp2 Fp2Field::sub(const Fp2& x, const Fp2& y) const {
  return Fp2{(x.a + p - y.a) % p, (x.b + p - y.b) % p};
}

Fp2 Fp2Field::neg(const Fp2& x) const {
  return Fp2{(p - x.a) % p, (p - x.b) % p};
}

Fp2 Fp2Field::mul(const Fp2& x, const Fp2& y) const {
  u64 a = (x.a * y.a + x.b * y.b % p * nqr) % p;
  u64 b = (x.a * y.b + x.b * y.a) % p;
  return Fp2{a, b};
}

Fp2 Fp2Field::inv(const Fp2& x) const {
  u64 norm = (x.a * x.a + (p - nqr) * (x.b * x.b % p)) % p;
  if (norm == 0) throw InvalidLabel("zero is not invertible");
  u64 ni = powmod(norm, p - 2, p);
  return Fp2{x.a * ni % p, (p - x.b) % p * ni % p};
}

Fp2 Fp2Field::sqrt_base(u64 c) const {
  c %= p;
  if (c == 0) return Fp2{0, 0};
  if (powmod(c, (p - 1) / 2, p) == 1) {
    for (u64 x = 1; x < p; ++x)
      if (x * x % p == c) return Fp2{x, 0};
  }
  u64 d = c * powmod(nqr, p - 2, p) % p;
  for (u64 y = 1; y < p; ++y)
    if (y * y % p == d) return Fp2{0, y};
  throw InvalidLabel("square root search failed");
}

std::pair<Fp2, Fp2> Fp2Field::unit_quad_roots(u64 t) const {
  t %= p;
  u64 disc = (t * t % p + p - 4 % p) % p;
  Fp2 s = sqrt_base(disc);
  Fp2 half = from_ll((long long)powmod(2, p - 2, p));
  Fp2 r1 = mul(add(make(t), s), half);
  Fp2 r2 = mul(sub(make(t), s), half);
  return less(r1, r2) ? std::make_pair(r1, r2) : std::make_pair(r2, r1);
}

bool Fp2Field::less(const Fp2& x, const Fp2& y) const {
  return x.a != y.a ? x.a < y.a : x.b < y.b;
}

std::string Fp2Field::str(const Fp2& x) const {
  if (x.b == 0) return std::to_string(x.a);
  std::string bt = (x.b == 1 ? "" : std::to_string(x.b)) + "t";
  if (x.a == 0) return bt;
  return std::to_string(x.a) + "+" + bt;
}

CharLabel char_make(const Fp2Field& Q, long long s, const Fp2& c,
                    bool mu_minus1) {
  if (Q.is_zero(c)) throw InvalidLabel("unramified part must be nonzero");
  long long m = (long long)Q.p - 1;
  CharLabel x;
  x.s = (int)(((s % m) + m) % m);
  x.c = mu_minus1 ? Q.mul(c, Q.from_ll(-1)) : c;
  return x;
}

CharLabel char_mul(const Fp2Field& Q, const CharLabel& x, const CharLabel& y) {
  return char_make(Q, (long long)x.s + y.s, Q.mul(x.c, y.c));
}

CharLabel char_inv(const Fp2Field& Q, const CharLabel& x) {
  return char_make(Q, -(long long)x.s, Q.inv(x.c));
}

std::string char_str(const Fp2Field& Q, const CharLabel& x) {
  std::string out;
  if (x.s == 1) out = "omega";
  else if (x.s > 1) out = "omega^" + std::to_string(x.s);
  if (!(x.c == Fp2{1, 0})) {
    if (!out.empty()) out += "*";
    out += "unr(" + Q.str(x.c) + ")";
  }
  return out.empty() ? "1" : out;
}

namespace {

using LabelKey = std::tuple<int, u64, u64, int, u64, u64>;

LabelKey pi_key(const PiLabel& z) {
  return LabelKey(z.r, z.lambda.a, z.lambda.b, z.eta.s, z.eta.c.a, z.eta.c.b);
}

std::tuple<int, u64, u64> char_key(const CharLabel& c) {
  return {c.s, c.c.a, c.c.b};
}

}  // namespace

PiLabel pi_normal_form(const Fp2Field& Q, const PiLabel& x) {
  PiLabel y = x;
  y.eta = char_make(Q, x.eta.s, x.eta.c);
  if (y.kind != PiKind::principal) {
    y.r = 0;
    y.lambda = Fp2{0, 0};
    return y;
  }
  if (y.r < 0 || y.r > (int)Q.p - 1)
    throw InvalidLabel("r must lie in 0..p-1");
  CharLabel mu = char_make(Q, 0, Q.from_ll(-1));
  std::vector<PiLabel> cands;
  PiLabel tw = y;
  tw.lambda = Q.neg(y.lambda);
  tw.eta = char_mul(Q, y.eta, mu);
  if (Q.is_zero(y.lambda)) {
    CharLabel wr = char_make(Q, y.r, Q.from_ll(1));
    PiLabel sw = y;
    sw.r = (int)Q.p - 1 - y.r;
    sw.eta = char_mul(Q, y.eta, wr);
    PiLabel swm = sw;
    swm.eta = char_mul(Q, sw.eta, mu);
    cands = {y, tw, sw, swm};
  } else {
    cands = {y, tw};
  }
  return *std::min_element(cands.begin(), cands.end(),
                           [](const PiLabel& a, const PiLabel& b) {
                             return pi_key(a) < pi_key(b);
                           });
}

ModpRep rho_normal_form(const Fp2Field& Q, const ModpRep& x) {
  ModpRep y;
  if (!x.irreducible) {
    y.irreducible = false;
    y.chi1 = char_make(Q, x.chi1.s, x.chi1.c);
    y.chi2 = char_make(Q, x.chi2.s, x.chi2.c);
    if (char_key(y.chi2) < char_key(y.chi1)) std::swap(y.chi1, y.chi2);
    return y;
  }
  if (x.r < 0 || x.r > (int)Q.p - 1)
    throw InvalidLabel("r must lie in 0..p-1");
  y.irreducible = true;
  CharLabel eta = char_make(Q, x.eta.s, x.eta.c);
  CharLabel mu = char_make(Q, 0, Q.from_ll(-1));
  CharLabel wr = char_make(Q, x.r, Q.from_ll(1));
  int r2 = (int)Q.p - 1 - x.r;
  std::vector<std::pair<int, CharLabel>> cands = {
      {x.r, eta},
      {x.r, char_mul(Q, eta, mu)},
      {r2, char_mul(Q, eta, wr)},
      {r2, char_mul(Q, char_mul(Q, eta, wr), mu)}};
  auto key = [](const std::pair<int, CharLabel>& z) {
    return std::tuple<int, int, u64, u64>(z.first, z.second.s, z.second.c.a,
                                          z.second.c.b);
  };
  auto best = *std::min_element(
      cands.begin(), cands.end(),
      [&](const auto& a, const auto& b) { return key(a) < key(b); });
  y.r = best.first;
  y.eta = best.second;
  return y;
}

std::string pi_str(const Fp2Field& Q, const PiLabel& x) {
  if (x.kind == PiKind::one_dimensional)
    return "(" + char_str(Q, x.eta) + ") o det";
  if (x.kind == PiKind::special)
    return "Sp x (" + char_str(Q, x.eta) + ") o det";
  return "pi(" + std::to_string(x.r) + ", " + Q.str(x.lambda) + ", " +
         char_str(Q, x.eta) + ")";
}

std::string rho_str(const Fp2Field& Q, const ModpRep& x) {
  if (x.irreducible)
    return "rho(" + std::to_string(x.r) + ", " + char_str(Q, x.eta) + ")";
  return "(" + char_str(Q, x.chi1) + ") + (" + char_str(Q, x.chi2) + ")";
}

ModpRep ind_omega2(const Fp2Field& Q, long long s, const CharLabel& eta) {
  long long m2 = (long long)Q.p * (long long)Q.p - 1;
  s = ((s % m2) + m2) % m2;
  if (s % ((long long)Q.p + 1) == 0)
    throw InvalidLabel("exponent factors through the norm, not irreducible");
  int t = 0;
  while (s > (long long)Q.p) {
    s -= (long long)Q.p + 1;
    ++t;
  }
  ModpRep r;
  r.irreducible = true;
  r.r = (int)s - 1;
  r.eta = char_mul(Q, char_make(Q, eta.s, eta.c),
                   char_make(Q, t, Q.from_ll(1)));
  return rho_normal_form(Q, r);
}

ModpRep corr_pi_to_rho(const Fp2Field& Q, const std::vector<PiLabel>& pieces) {
  if (pieces.size() == 1) {
    PiLabel a = pi_normal_form(Q, pieces[0]);
    if (a.kind != PiKind::principal)
      throw InvalidLabel("the dictionary covers the principal family only");
    if (!Q.is_zero(a.lambda))
      throw NeedsBothSides("nonzero lambda needs its partner label");
    ModpRep r;
    r.irreducible = true;
    r.r = a.r;
    r.eta = a.eta;
    return rho_normal_form(Q, r);
  }
  if (pieces.size() != 2)
    throw InvalidLabel("expected a single label or a matched pair");
  PiLabel A = pi_normal_form(Q, pieces[0]);
  PiLabel B = pi_normal_form(Q, pieces[1]);
  long long m = (long long)Q.p - 1;
  for (int o = 0; o < 2; ++o) {
    const PiLabel& x = o ? B : A;
    const PiLabel& y = o ? A : B;
    if (x.kind != PiKind::principal || y.kind != PiKind::principal) continue;
    if (Q.is_zero(x.lambda) || Q.is_zero(y.lambda)) continue;
    PiLabel want;
    want.r = (int)((((long long)Q.p - 3 - x.r) % m + m) % m);
    want.lambda = Q.inv(x.lambda);
    want.eta = char_mul(Q, char_make(Q, (long long)x.r + 1, Q.from_ll(1)),
                        x.eta);
    if (pi_normal_form(Q, want) == y) {
      ModpRep rep;
      rep.irreducible = false;
      rep.chi1 = char_mul(Q, char_make(Q, (long long)x.r + 1, Q.inv(x.lambda)),
                          x.eta);
      rep.chi2 = char_mul(Q, char_make(Q, 0, x.lambda), x.eta);
      return rho_normal_form(Q, rep);
    }
  }
  throw InvalidLabel("labels do not form a matched pair");
}

std::vector<PiLabel> corr_rho_to_pi(const Fp2Field& Q, const ModpRep& rep0) {
  ModpRep rep = rho_normal_form(Q, rep0);
  if (rep.irreducible) {
    PiLabel a;
    a.r = rep.r;
    a.lambda = Fp2{0, 0};
    a.eta = rep.eta;
    return {pi_normal_form(Q, a)};
  }
  long long m = (long long)Q.p - 1;
  int r = (int)((((long long)rep.chi1.s - rep.chi2.s - 1) % m + m) % m);
  Fp2 ratio = Q.mul(rep.chi2.c, Q.inv(rep.chi1.c));
  if (ratio.b != 0)
    throw UnsupportedElement("unramified ratio is not in the prime field");
  Fp2 lam = Q.sqrt_base(ratio.a);
  Fp2 lneg = Q.neg(lam);
  if (Q.less(lneg, lam)) lam = lneg;
  CharLabel eta = char_mul(Q, rep.chi2, char_make(Q, 0, Q.inv(lam)));
  PiLabel a;
  a.r = r;
  a.lambda = lam;
  a.eta = eta;
  PiLabel b;
  b.r = (int)((((long long)Q.p - 3 - r) % m + m) % m);
  b.lambda = Q.inv(lam);
  b.eta = char_mul(Q, char_make(Q, (long long)r + 1, Q.from_ll(1)), eta);
  return {pi_normal_form(Q, a), pi_normal_form(Q, b)};
}

std::vector<PiLabel> predict_Pibar(u64 p, int k, const Rat& val_ap,
                                   u64 ap_unit) {
  if (p == 2) throw UnsupportedCase("p = 2 is not modeled");
  Fp2Field Q(p);
  const Rat zero = Rat::make(0, 1), one = Rat::make(1, 1);
  if (!(zero < val_ap))
    throw OutOfTableRange("the table needs positive valuation");
  const int ip = (int)p;
  Fp2 c1 = Q.from_ll(1);
  auto pi0 = [&](int r, long long es) {
    PiLabel x;
    x.r = r;
    x.lambda = Fp2{0, 0};
    x.eta = char_make(Q, es, c1);
    return pi_normal_form(Q, x);
  };
  auto need_unit = [&]() {
    if (ap_unit % p == 0)
      throw InvalidLabel("this row needs the unit residue of ap/p");
    return ap_unit % p;
  };
  if (2 <= k && k <= ip + 1) return {pi0(k - 2, 0)};
  if (k == ip + 2) {
    if (val_ap < one) return {pi0(ip - 2, 1)};
    u64 t = one < val_ap ? 0 : need_unit();
    auto [l1, l2] = Q.unit_quad_roots(t);
    PiLabel x;
    x.r = ip - 2;
    x.lambda = l1;
    x.eta = char_make(Q, 1, c1);
    PiLabel y = x;
    y.lambda = l2;
    return {pi_normal_form(Q, x), pi_normal_form(Q, y)};
  }
  if (ip + 3 <= k && k <= 2 * ip) {
    if (val_ap < one) return {pi0(2 * ip - k, k - 1 - ip)};
    if (one < val_ap) return {pi0(k - 3 - ip, 1)};
    u64 lam = (u64)(k - 1) % p * need_unit() % p;
    PiLabel x;
    x.r = k - 3 - ip;
    x.lambda = Q.make(lam);
    x.eta = char_make(Q, 1, c1);
    PiLabel y;
    y.r = 2 * ip - k;
    y.lambda = Q.inv(Q.make(lam));
    y.eta = char_make(Q, k - 1 - ip, c1);
    return {pi_normal_form(Q, x), pi_normal_form(Q, y)};
  }
  throw OutOfTableRange("k outside the tabulated strip");
}

ModpRep predict_Vbar(u64 p, int k, const Rat& val_ap) {
  if (p == 2) throw UnsupportedCase("p = 2 is not modeled");
  Fp2Field Q(p);
  const Rat zero = Rat::make(0, 1), one = Rat::make(1, 1);
  if (!(zero < val_ap))
    throw OutOfTableRange("the table needs positive valuation");
  const int ip = (int)p;
  CharLabel triv = char_make(Q, 0, Q.from_ll(1));
  if (2 <= k && k <= ip + 1) return ind_omega2(Q, k - 1, triv);
  if (k == ip + 2 && one < val_ap) {
    Fp2 i1 = Q.sqrt_base(p - 1);
    ModpRep r;
    r.irreducible = false;
    r.chi1 = char_make(Q, 1, i1);
    r.chi2 = char_make(Q, 1, Q.neg(i1));
    return rho_normal_form(Q, r);
  }
  if (ip + 3 <= k && k <= 2 * ip - 1 && one < val_ap)
    return ind_omega2(Q, k - 1, triv);
  throw OutOfTableRange("cell not covered by the reduction tables");
}

}  // namespace phig
