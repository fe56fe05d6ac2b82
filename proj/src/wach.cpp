#include "phigamma/wach.hpp"

#include <algorithm>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace phig {

namespace {

std::vector<Series> mat_vec(const SeriesMat& A, const std::vector<Series>& v) {
  const FieldHandle& F = A.at(0, 0).F;
  std::vector<Series> out;
  out.reserve(A.n);
  for (int i = 0; i < A.n; ++i) {
    Series s = Series::zero(F);
    for (int j = 0; j < A.m; ++j) s = s + A.at(i, j) * v[(size_t)j];
    out.push_back(s.trimmed());
  }
  return out;
}

bool certified_nonzero(const Scalar& c, int w) {
  if (c.is_exact_zero()) return false;
  try {
    return c.val() < w;
  } catch (const PrecisionExhausted&) {
    return false;
  }
}

// Lowest q-power window that holds q^n exactly.
Series q_power(const FieldHandle& F, int n) {
  if (n <= 0) return Series::one(F);
  return Series::qpoly(F).pow_int(n, n * ((int)F->p - 1) + 1);
}

std::vector<std::vector<Series>> basis_vectors(const FieldHandle& F, int d,
                                               int degree) {
  std::vector<std::vector<Series>> out;
  for (int j = 0; j < d; ++j) {
    std::vector<Series> v(d, Series::zero(F));
    v[(size_t)j] = Series::monomial(F, Scalar::one(F), degree);
    out.push_back(v);
  }
  return out;
}

std::vector<Series> psi_carrier(const WachModule& W,
                                const std::vector<Series>& v, bool shifted) {
  if ((int)v.size() != W.d)
    throw UnsupportedCase("coordinate count does not match the rank");
  std::vector<Series> z = mat_vec(W.Padj, v);
  if (!W.u_is_one)
    for (auto& s : z) s = (s * W.u_inv).truncated(W.K);
  std::vector<Series> out;
  out.reserve(z.size());
  for (auto& s : z) {
    Series y = shifted ? psi(s.shifted(W.h)).shifted(-W.h) : psi(s);
    out.push_back(y.trimmed());
  }
  return out;
}

WachModule finish_module(const FieldHandle& F, const SeriesMat& P,
                         const SeriesMat& G, int wa, int wb, int K) {
  if (P.n != P.m || G.n != G.m || P.n != G.n)
    throw UnsupportedCase("phi and gamma matrices must be square and equal");
  if (P.n < 1 || P.n > 2) throw UnsupportedCase("rank must be 1 or 2");
  if (wa > wb || wb > 0)
    throw UnsupportedCase("weights must satisfy wa <= wb <= 0");
  if (K < (int)F->p + 2) throw UnsupportedCase("window too small");
  for (const auto& s : P.e)
    if (!s.entire) throw UnsupportedCase("phi matrix entries must be entire");

  WachModule W;
  W.F = F;
  W.d = P.n;
  W.K = K;
  W.wa = wa;
  W.wb = wb;
  W.h = wb - wa;
  W.gamma_a = 1 + (long long)F->p;
  W.P = P;
  W.G = G;

  Series det = W.d == 1 ? P.at(0, 0) : P.det2();
  if (W.d == 1) {
    W.Padj = SeriesMat(1, 1);
    W.Padj.at(0, 0) = Series::one(F);
  } else {
    W.Padj = P.adj2();
  }
  try {
    W.u = divide_entire(det, q_power(F, W.h));
  } catch (const NonInvertiblePole& ex) {
    throw NotFiniteHeightShape(
        std::string("det(P) is not divisible by q^(wb-wa): ") + ex.what());
  }
  Scalar u0 = W.u.coeff(0);
  if (u0.is_exact_zero() || !u0.is_unit())
    throw NotFiniteHeightShape("det(P) / q^(wb-wa) is not a unit");
  const int w = F->N * F->e;
  {
    // Division caps precision, so "u = 1" can only be certified at the
    // working precision; the flag then licenses skipping the u factor.
    Series du = (W.u - Series::one(F)).trimmed();
    int hi = du.entire ? du.K : std::min(du.rel + 1, du.K);
    W.u_is_one = du.is_entire_zero() ||
                 (hi >= du.K && du.is_zero_within(w, du.lo, hi - 1));
  }
  W.u_inv = W.u_is_one ? Series::one(F) : inv_series(W.u, K);

  for (int i = 0; i < W.d; ++i)
    for (int j = 0; j < W.d; ++j) {
      Scalar c = G.at(i, j).coeff(0) -
                 (i == j ? Scalar::one(F) : Scalar::zero(F));
      if (!c.is_zero_within(w))
        throw UnsupportedCase("gamma matrix must be the identity mod X");
    }
  return W;
}

}  // namespace

WachModule wach_from_parts(const FieldHandle& F, const SeriesMat& P,
                           const SeriesMat& G, int wa, int wb, int K) {
  return finish_module(F, P, G, wa, wb, K);
}

Series phi_iter_w(const FieldHandle& F, int m, int Kw) {
  long long pm = 1;
  for (int i = 0; i < m; ++i) {
    if (pm > (1LL << 56) / (long long)F->p)
      throw UnsupportedCase("phi iterate exponent overflows");
    pm *= (long long)F->p;
  }
  Series s = Series::one(F);
  for (long long i = 1; i <= (long long)F->p; ++i)
    s = s + Series::one_plus_X_pow(F, i * pm, Kw);
  return s;
}

std::pair<Series, Series> gamma_ratio_halves(const FieldHandle& F, int Kw) {
  const int w = F->N * F->e;
  Series wplus = Series::one(F), wminus = Series::one(F);
  Series prev = phi_iter_w(F, 0, Kw);
  for (int m = 0;; ++m) {
    if (m > 64) throw NoConvergence("loop ratio factors did not shrink");
    Series next = phi_iter_w(F, m + 1, Kw);
    if ((prev - next).is_zero_within(w, 0, Kw - 1)) break;
    Series f = (prev * inv_series(next, Kw)).truncated(Kw);
    if (m % 2 == 0)
      wminus = (wminus * f).truncated(Kw);
    else
      wplus = (wplus * f).truncated(Kw);
    prev = next;
  }
  return {wplus, wminus};
}

WachModule wach_qp_twist(const FieldHandle& F, int r, int K) {
  if (r > 0) throw UnsupportedCase("twist exponent must be <= 0");
  const int s = -r;
  SeriesMat P(1, 1), G(1, 1);
  P.at(0, 0) = q_power(F, s);
  if (s == 0) {
    G.at(0, 0) = Series::one(F);
  } else {
    Scalar eps = Scalar::from_int(F, 1 + (long long)F->p);
    G.at(0, 0) = w_unit(F, 1 + (long long)F->p, K)
                     .pow_int(s, K)
                     .smul(eps.pow_i(s).inv());
  }
  return finish_module(F, P, G, r, 0, K);
}

WachModule wach_ap_zero(const FieldHandle& F, int k, int K) {
  if (k < 2) throw UnsupportedCase("weight k must be >= 2");
  SeriesMat P(2, 2), G(2, 2);
  P.at(0, 0) = Series::zero(F);
  P.at(0, 1) = Series::constant(F, Scalar::from_int(F, -1));
  P.at(1, 0) = q_power(F, k - 1);
  P.at(1, 1) = Series::zero(F);
  auto [wp, wm] = gamma_ratio_halves(F, K);
  G.at(0, 0) = wp.pow_int(k - 1, K);
  G.at(0, 1) = Series::zero(F);
  G.at(1, 0) = Series::zero(F);
  G.at(1, 1) = wm.pow_int(k - 1, K);
  return finish_module(F, P, G, -(k - 1), 0, K);
}

WachModule wach_supersingular_k2(const FieldHandle& F, int K) {
  return wach_ap_zero(F, 2, K);
}

WachModule wach_example(const FieldHandle& F, const std::string& kind,
                        int param, int K) {
  if (kind == "qp-twist") return wach_qp_twist(F, param, K);
  if (kind == "supersingular-k2") return wach_supersingular_k2(F, K);
  if (kind == "ap-zero") return wach_ap_zero(F, param, K);
  throw UnsupportedCase("unknown module family: " + kind);
}

CommutationReport verify_commutation(const WachModule& W, int tol) {
  const FieldHandle& F = W.F;
  const int w = tol < 0 ? F->N * F->e : tol;
  SeriesMat L = W.P * phi(W.G, W.K);
  SeriesMat R = W.G * gamma_int(W.P, W.gamma_a);
  CommutationReport rep;
  rep.residual = (L - R).truncated(W.K);
  int window = W.K;
  for (const auto& s : rep.residual.e)
    window = std::min(window, s.unreliable_from());
  rep.window = std::max(window, 0);
  rep.ok = rep.window > 0 &&
           rep.residual.is_zero_within(w, 0, rep.window - 1);
  if (!rep.ok) {
    for (int dd = 0; dd < rep.window && rep.defect_degree < 0; ++dd)
      for (const auto& s : rep.residual.e)
        if (certified_nonzero(s.coeff(dd), w)) {
          rep.defect_degree = dd;
          break;
        }
  }
  return rep;
}

std::vector<Series> phi_module(const WachModule& W,
                               const std::vector<Series>& v) {
  if ((int)v.size() != W.d)
    throw UnsupportedCase("coordinate count does not match the rank");
  std::vector<Series> fv;
  fv.reserve(v.size());
  for (const auto& s : v) fv.push_back(phi(s));
  return mat_vec(W.P, fv);
}

std::vector<Series> gamma_module(const WachModule& W,
                                 const std::vector<Series>& v) {
  if ((int)v.size() != W.d)
    throw UnsupportedCase("coordinate count does not match the rank");
  std::vector<Series> gv;
  gv.reserve(v.size());
  for (const auto& s : v) gv.push_back(gamma_int(s, W.gamma_a));
  return mat_vec(W.G, gv);
}

std::vector<Series> psi_module(const WachModule& W,
                               const std::vector<Series>& v) {
  return psi_carrier(W, v, true);
}

std::vector<Series> psi_stable(const WachModule& W,
                               const std::vector<Series>& v) {
  return psi_carrier(W, v, false);
}

// --------------------------------------------------------------------------
// Spans over the chain ring.

namespace {

std::vector<u64> flatten_vec(const FieldHandle& F,
                             const std::vector<Series>& v, int d, int off,
                             int Kc) {
  const int w = F->N * F->e;
  const int wdt = off + Kc;
  std::vector<u64> row((size_t)d * wdt, 0);
  for (int j = 0; j < d; ++j) {
    Series s = v[(size_t)j].trimmed();
    if (s.is_entire_zero()) continue;
    for (int dd = s.lo; dd < -off; ++dd)
      if (!s.coeff(dd).is_exact_zero())
        throw UnsupportedCase("span pole budget exceeded");
    for (int dd = -off; dd < Kc; ++dd) {
      Scalar c = s.coeff_checked(dd);
      if (c.is_exact_zero()) continue;
      if (c.val_lb() < 0)
        throw UnsupportedCase("span coordinates must be integral");
      if (c.prec < w)
        throw UnsupportedCase("span coordinates must carry full precision");
      row[(size_t)j * wdt + (dd + off)] = c.residue(F->N);
    }
  }
  return row;
}

}  // namespace

SubmoduleSpan SubmoduleSpan::from_vectors(
    const FieldHandle& F, int d, int off, int Kc,
    const std::vector<std::vector<Series>>& v) {
  if (F->ext != ExtKind::none)
    throw UnsupportedCase("spans require the base field");
  if (d <= 0 || Kc <= 0 || off < 0) throw UnsupportedCase("bad span shape");
  SubmoduleSpan S;
  S.F = F;
  S.d = d;
  S.off = off;
  S.Kc = Kc;
  std::vector<std::vector<u64>> rows;
  for (const auto& g : v) {
    if ((int)g.size() != d)
      throw UnsupportedCase("coordinate count does not match the rank");
    int lov = Kc;
    for (const auto& s : g) {
      Series t = s.trimmed();
      if (!t.is_entire_zero()) lov = std::min(lov, t.lo);
    }
    for (int sh = 0; lov + sh < Kc; ++sh) {
      std::vector<Series> gs;
      gs.reserve(g.size());
      for (const auto& s : g) gs.push_back(s.shifted(sh));
      rows.push_back(flatten_vec(F, gs, d, off, Kc));
    }
  }
  ModMat A = rows.empty() ? ModMat(F, 0, d * (off + Kc))
                          : ModMat::from_rows(F, rows, d * (off + Kc));
  S.nf = howell(A);
  return S;
}

std::vector<Series> SubmoduleSpan::lift_row(int i) const {
  const int wdt = off + Kc;
  std::vector<Series> out;
  out.reserve(d);
  for (int j = 0; j < d; ++j) {
    Series s(F);
    s.lo = -off;
    s.K = Kc;
    s.entire = true;
    s.rel = Series::INF;
    s.a.reserve(wdt);
    for (int t = 0; t < wdt; ++t) {
      u64 r = nf.H.at(i, j * wdt + t);
      s.a.push_back(r == 0 ? Scalar::zero(F) : Scalar::from_residue(F, r));
    }
    out.push_back(s.trimmed());
  }
  return out;
}

bool SubmoduleSpan::contains_vector(const std::vector<Series>& v) const {
  return nf.contains(flatten_vec(F, v, d, off, Kc));
}

bool SubmoduleSpan::contains(const SubmoduleSpan& o) const {
  if (d != o.d || off != o.off || Kc != o.Kc)
    throw UnsupportedCase("span shapes differ");
  return nf.contains(o.nf.H);
}

bool SubmoduleSpan::same(const SubmoduleSpan& o) const {
  if (d != o.d || off != o.off || Kc != o.Kc)
    throw UnsupportedCase("span shapes differ");
  return nf.same_span(o.nf);
}

SubmoduleSpan fil_on_N(const WachModule& W, int i, int Kc) {
  const FieldHandle& F = W.F;
  if (F->ext != ExtKind::none)
    throw UnsupportedCase("spans require the base field");
  if (Kc <= 0 || Kc > W.K)
    throw UnsupportedCase("window outside the module caps");
  const int d = W.d;
  if (i <= 0)
    return SubmoduleSpan::from_vectors(F, d, 0, Kc, basis_vectors(F, d, 0));

  // Stack the membership equation P phi(f) = q^i g over the basis X^s e_j:
  // the f-part of the kernel of [A | -Q] spans the filtration step.
  const int D = d * Kc;
  ModMat M(F, D, 2 * D);
  Series qi = q_power(F, i);
  Series qx = Series::qpoly(F).shifted(1).truncated(Kc);
  Series qxs = Series::one(F);
  for (int s = 0; s < Kc; ++s) {
    if (s > 0) qxs = (qxs * qx).truncated(Kc);
    for (int j = 0; j < d; ++j) {
      for (int i2 = 0; i2 < d; ++i2) {
        Series ent = (qxs * W.P.at(i2, j)).truncated(Kc);
        for (int t = 0; t < Kc; ++t) {
          Scalar c = ent.coeff(t);
          if (!c.is_exact_zero())
            M.at(i2 * Kc + t, j * Kc + s) = c.residue(F->N);
        }
      }
      Series ent = qi.shifted(s).truncated(Kc);
      for (int t = 0; t < Kc; ++t) {
        Scalar c = ent.coeff(t);
        if (!c.is_exact_zero())
          M.at(j * Kc + t, D + j * Kc + s) = F->sub(0, c.residue(F->N));
      }
    }
  }
  ModMat ker = left_kernel(M.transposed());
  std::vector<std::vector<Series>> gens;
  for (int r = 0; r < ker.nr; ++r) {
    std::vector<Series> vrow;
    bool nonzero = false;
    for (int j = 0; j < d; ++j) {
      Series s(F);
      s.lo = 0;
      s.K = Kc;
      s.entire = true;
      s.rel = Series::INF;
      for (int t = 0; t < Kc; ++t) {
        u64 rr = ker.at(r, j * Kc + t);
        nonzero = nonzero || rr != 0;
        s.a.push_back(rr == 0 ? Scalar::zero(F) : Scalar::from_residue(F, rr));
      }
      vrow.push_back(s.trimmed());
    }
    if (nonzero) gens.push_back(vrow);
  }
  return SubmoduleSpan::from_vectors(F, d, 0, Kc, gens);
}

FilteredPhiModule reduce_mod_X(const WachModule& W) {
  const FieldHandle& F = W.F;
  if (F->ext != ExtKind::none)
    throw UnsupportedCase("reduction requires the base field");
  const int d = W.d;
  const int Kc = std::min(W.K, (int)F->p * (W.h + 2) + 4);

  FilteredPhiModule D;
  D.F = F;
  D.dim = d;
  D.kind = "reduced";
  D.phi.clear();
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) D.phi.push_back(W.P.at(i, j).coeff(0));

  // Membership over the length-N chain ring acquires p-torsion solutions
  // that the rational theory does not have, so the jump profile counts the
  // unit-pivot rank of the degree-zero image (its reduction mod p); the
  // torsion scale also bounds how far the line coordinates are certified.
  int j_lo = 0, j_hi = 0;
  std::optional<HowellForm> line;
  for (int i = 0;; ++i) {
    if (i > W.h + 1)
      throw WeightMismatch("filtration does not vanish past the weights");
    SubmoduleSpan S = fil_on_N(W, i, Kc);
    std::vector<std::vector<u64>> rows;
    for (int r = 0; r < S.rows(); ++r) {
      std::vector<u64> pr((size_t)d);
      bool nz = false;
      for (int j = 0; j < d; ++j) {
        pr[(size_t)j] = S.nf.H.at(r, j * Kc);
        nz = nz || pr[(size_t)j] != 0;
      }
      if (nz) rows.push_back(pr);
    }
    HowellForm img =
        howell(rows.empty() ? ModMat(F, 0, d) : ModMat::from_rows(F, rows, d));
    int rank_units = 0;
    for (int r = 0; r < img.rank(); ++r)
      if (img.pivot_val[(size_t)r] == 0) ++rank_units;
    if (rank_units == d) {
      j_lo = i;
      j_hi = i;
      continue;
    }
    if (rank_units > 0) {
      j_hi = i;
      line = img;
      continue;
    }
    break;
  }
  D.j_lo = j_lo;
  D.j_hi = j_hi;
  if (d == 2) {
    if (j_hi > j_lo) {
      int pick = -1;
      for (int r = 0; line && r < line->rank(); ++r)
        if (line->pivot_val[(size_t)r] == 0) {
          pick = r;
          break;
        }
      if (pick < 0)
        throw WeightMismatch("filtration line is not free mod X");
      D.delta = {Scalar::from_residue(F, line->H.at(pick, 0)),
                 Scalar::from_residue(F, line->H.at(pick, 1))};
    } else {
      D.delta = {Scalar::one(F), Scalar::zero(F)};
    }
  }
  return D;
}

bool psi_on_quotient_check(const WachModule& W, int guard) {
  const FieldHandle& F = W.F;
  if (guard < 0 || guard >= F->N)
    throw UnsupportedCase("guard outside the precision budget");
  const int w = (F->N - guard) * F->e;
  const Scalar u0inv = W.u_inv.coeff(0);
  for (int j = 0; j < W.d; ++j) {
    std::vector<Series> v(W.d, Series::zero(F));
    v[(size_t)j] = Series::monomial(F, Scalar::one(F), -1);
    std::vector<Series> out = psi_stable(W, v);
    for (int i = 0; i < W.d; ++i) {
      Series s = out[(size_t)i].trimmed();
      for (int dd = s.lo; dd < -1; ++dd)
        if (!s.coeff(dd).is_zero_within(w)) return false;
      Scalar want = W.Padj.at(i, j).coeff(0) * u0inv;
      if (!s.coeff(-1).eq_upto(want, w)) return false;
    }
  }
  return true;
}

StabilizeResult d0_stabilize(const WachModule& W, int hh, int Kc,
                             int max_iter) {
  const FieldHandle& F = W.F;
  if (F->ext != ExtKind::none)
    throw UnsupportedCase("spans require the base field");
  if (hh < 0) throw UnsupportedCase("negative pole budget");
  if (Kc > W.K || Kc < (2 * hh + 1) * (int)F->p + hh)
    throw UnsupportedCase("window too small for the pole budget");
  if (max_iter < 0) max_iter = 4 * W.K;
  const int d = W.d, off = hh;

  SubmoduleSpan S =
      SubmoduleSpan::from_vectors(F, d, off, Kc, basis_vectors(F, d, hh));

  StabilizeResult res;
  if (d == 2) {
    const int w = F->N * F->e;
    auto has_certified_entry = [&](const Series& sr) {
      Series t = sr.trimmed();
      int hi = std::min(t.unreliable_from(), t.K);
      for (int dd = t.lo; dd < hi; ++dd)
        if (certified_nonzero(t.coeff(dd), w)) return true;
      return false;
    };
    res.unique_certified =
        has_certified_entry(W.P.at(0, 1)) && has_certified_entry(W.P.at(1, 0));
  }

  for (int it = 1; it <= max_iter; ++it) {
    std::vector<std::vector<Series>> gens;
    for (int r = 0; r < S.rows(); ++r) {
      std::vector<Series> lift = S.lift_row(r);
      gens.push_back(lift);
      for (int s = 0; s < (int)F->p; ++s) {
        std::vector<Series> sh;
        sh.reserve(lift.size());
        for (const auto& c : lift) sh.push_back(c.shifted(s));
        gens.push_back(psi_module(W, sh));
      }
    }
    SubmoduleSpan Snew = SubmoduleSpan::from_vectors(F, d, off, Kc, gens);
    res.iterations = it;
    if (Snew.same(S)) {
      res.span = Snew;
      return res;
    }
    S = Snew;
  }
  throw NoStabilization("psi images kept growing past max_iter");
}

EigenBasis rig_eigenbasis(const WachModule& W, const Scalar& alpha,
                          const Scalar& beta) {
  const FieldHandle& F = W.F;
  if (W.d != 2) throw UnsupportedCase("eigenbasis needs rank 2");
  const int K = W.K;
  {
    Scalar diff = alpha - beta;
    if (diff.is_exact_zero() || diff.is_prec_zero())
      throw GenericityRequired("eigenvalues collide");
  }
  const Scalar P00 = W.P.at(0, 0).coeff(0), P01 = W.P.at(0, 1).coeff(0),
               P10 = W.P.at(1, 0).coeff(0), P11 = W.P.at(1, 1).coeff(0);
  {
    Scalar tr = P00 + P11, dt = P00 * P11 - P01 * P10;
    if (!(alpha + beta - tr).is_zero_within(F->e) ||
        !(alpha * beta - dt).is_zero_within(F->e))
      throw GenericityRequired("eigenvalues do not match the reduced matrix");
  }

  auto usable = [](const Scalar& c) {
    if (c.is_exact_zero()) return false;
    try {
      (void)c.val();
      return true;
    } catch (const PrecisionExhausted&) {
      return false;
    }
  };
  auto seed = [&](const Scalar& lam) -> std::pair<Scalar, Scalar> {
    Scalar a = P01, b = lam - P00;
    if (!usable(a) && !usable(b)) {
      a = lam - P11;
      b = P10;
    }
    if (!usable(a) && !usable(b))
      throw SingularRecursion("no certified eigenvector seed at X = 0");
    // normalize by the lowest-valuation usable entry
    Scalar piv = a;
    if (!usable(a) || (usable(b) && b.val() < a.val())) piv = b;
    return {a / piv, b / piv};
  };

  EigenBasis out;
  out.alpha = alpha;
  out.beta = beta;
  out.M = SeriesMat(2, 2);
  out.residual_floor = F->N * F->e;

  for (int which = 0; which < 2; ++which) {
    const Scalar lam = which == 0 ? alpha : beta;
    auto [s0, s1] = seed(lam);
    std::vector<Series> m = {Series::constant(F, s0), Series::constant(F, s1)};
    std::vector<Series> R(2, Series::zero(F));
    for (int i = 0; i < 2; ++i) {
      Series s = W.P.at(i, 0).smul(s0) + W.P.at(i, 1).smul(s1);
      R[(size_t)i] = (s - m[(size_t)i].smul(lam)).truncated(K);
    }
    Series qx = Series::qpoly(F).shifted(1).truncated(K);
    Series qxs = Series::one(F);
    for (int s = 1; s < K; ++s) {
      qxs = (qxs * qx).truncated(K);
      Scalar t00 = lam - P00.mul_pow_p(s), t01 = -P01.mul_pow_p(s);
      Scalar t10 = -P10.mul_pow_p(s), t11 = lam - P11.mul_pow_p(s);
      Scalar detT = t00 * t11 - t01 * t10;
      if (detT.is_exact_zero() || detT.is_prec_zero())
        throw SingularRecursion("degree " + std::to_string(s) +
                                " eigen solve is singular");
      Scalar r0 = R[0].coeff_checked(s), r1 = R[1].coeff_checked(s);
      if (r0.is_exact_zero() && r1.is_exact_zero()) continue;
      Scalar d0 = (t11 * r0 - t01 * r1) / detT;
      Scalar d1 = (t00 * r1 - t10 * r0) / detT;
      m[0] = m[0] + Series::monomial(F, d0, s);
      m[1] = m[1] + Series::monomial(F, d1, s);
      for (int i = 0; i < 2; ++i) {
        Series corr = W.P.at(i, 0).smul(d0) + W.P.at(i, 1).smul(d1);
        corr = (qxs * corr).truncated(K);
        corr = corr - Series::monomial(F, (i == 0 ? d0 : d1) * lam, s);
        R[(size_t)i] = (R[(size_t)i] + corr).truncated(K);
      }
    }
    int fl = F->N * F->e;
    for (int i = 0; i < 2; ++i) {
      Series t = R[(size_t)i].trimmed();
      if (!t.is_entire_zero())
        fl = std::min(fl, t.min_prec(std::max(t.lo, 0), K - 1));
    }
    if (fl < 1)
      throw NoConvergence("eigen residual lost every certified digit");
    for (int i = 0; i < 2; ++i)
      if (!R[(size_t)i].is_zero_within(fl, 0, K - 1))
        throw NoConvergence("eigen equation residual is certified nonzero");
    out.residual_floor = std::min(out.residual_floor, fl);
    out.M.at(0, which) = m[0];
    out.M.at(1, which) = m[1];
  }

  out.det0 = out.M.at(0, 0).coeff(0) * out.M.at(1, 1).coeff(0) -
             out.M.at(0, 1).coeff(0) * out.M.at(1, 0).coeff(0);
  if (!usable(out.det0))
    throw SingularRecursion("eigenvector seeds collide at X = 0");
  return out;
}

// --------------------------------------------------------------------------
// Serialization.

namespace {

const char* ext_name(ExtKind k) {
  switch (k) {
    case ExtKind::none: return "none";
    case ExtKind::unramified: return "unramified";
    case ExtKind::eisenstein: return "eisenstein";
  }
  return "none";
}

void put_series(std::ostream& os, const Series& s) {
  os << "lo " << s.lo << " n " << (s.K - s.lo) << " rel ";
  if (s.entire)
    os << "inf";
  else
    os << s.rel;
  os << " entire " << (s.entire ? 1 : 0) << " :";
  for (int dd = s.lo; dd < s.K; ++dd) {
    Scalar c = s.coeff(dd);
    if (c.is_exact_zero()) {
      os << " z";
    } else {
      os << ' ' << c.shift << ':' << c.c0 << ':' << c.c1 << ':';
      if (c.prec >= Scalar::INF)
        os << "inf";
      else
        os << c.prec;
      // The exact-integer tag is part of the value: it is what lets later
      // arithmetic certify exact zeros, so a faithful reload carries it.
      if (c.int_hint) os << ":i" << *c.int_hint;
    }
  }
  os << '\n';
}

Series get_series(const FieldHandle& F, std::istringstream& is) {
  std::string tok;
  int lo = 0, n = 0, entire = 0;
  std::string rel;
  auto need = [&](const char* kw) {
    if (!(is >> tok) || tok != kw)
      throw FormatError(std::string("expected '") + kw + "' in series line");
  };
  need("lo");
  if (!(is >> lo)) throw FormatError("bad series lo");
  need("n");
  if (!(is >> n) || n < 0) throw FormatError("bad series length");
  need("rel");
  if (!(is >> rel)) throw FormatError("bad series rel");
  need("entire");
  if (!(is >> entire)) throw FormatError("bad series entire flag");
  need(":");
  Series s(F);
  s.lo = lo;
  s.K = lo + n;
  s.entire = entire != 0;
  s.rel = s.entire ? Series::INF
                   : (rel == "inf" ? Series::INF : std::stoi(rel));
  for (int i = 0; i < n; ++i) {
    if (!(is >> tok)) throw FormatError("series line ends early");
    if (tok == "z") {
      s.a.push_back(Scalar::zero(F));
      continue;
    }
    std::istringstream ts(tok);
    std::string f0, f1, f2, f3, f4;
    if (!std::getline(ts, f0, ':') || !std::getline(ts, f1, ':') ||
        !std::getline(ts, f2, ':') || !std::getline(ts, f3, ':'))
      throw FormatError("bad coefficient token: " + tok);
    int shift = std::stoi(f0);
    u64 c0 = std::stoull(f1), c1 = std::stoull(f2);
    int prec = f3 == "inf" ? Scalar::INF : std::stoi(f3);
    Scalar c = Scalar::make(F, shift, c0, c1, prec);
    if (std::getline(ts, f4)) {
      if (f4.size() < 2 || f4[0] != 'i')
        throw FormatError("bad coefficient tag: " + tok);
      c.int_hint = std::stoll(f4.substr(1));
    }
    s.a.push_back(c);
  }
  return s;
}

}  // namespace

std::string to_text(const WachModule& W) {
  std::ostringstream os;
  os << "wach v1\n";
  os << "field p " << W.F->p << " N " << W.F->N << " ext "
     << ext_name(W.F->ext) << " g0 " << W.F->g0z << " g1 " << W.F->g1z
     << '\n';
  os << "shape d " << W.d << " wa " << W.wa << " wb " << W.wb << " K " << W.K
     << '\n';
  for (int i = 0; i < W.d; ++i)
    for (int j = 0; j < W.d; ++j) {
      os << "P " << i << ' ' << j << ' ';
      put_series(os, W.P.at(i, j));
    }
  for (int i = 0; i < W.d; ++i)
    for (int j = 0; j < W.d; ++j) {
      os << "G " << i << ' ' << j << ' ';
      put_series(os, W.G.at(i, j));
    }
  os << "end\n";
  return os.str();
}

namespace {

WachModule parse_wach_impl(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  auto next_line = [&]() {
    while (std::getline(in, line)) {
      if (!line.empty()) return true;
    }
    return false;
  };
  if (!next_line() || line != "wach v1")
    throw FormatError("missing module header");

  if (!next_line()) throw FormatError("missing field line");
  std::istringstream fs(line);
  std::string extname;
  u64 p = 0;
  int N = 0;
  long long g0z = 0, g1z = 0;
  std::string t0;
  if (!(fs >> t0) || t0 != "field") throw FormatError("missing field line");
  auto need_kv = [&](std::istringstream& s, const char* key) -> std::string {
    std::string k, v;
    if (!(s >> k >> v) || k != key)
      throw FormatError(std::string("expected '") + key + "'");
    return v;
  };
  p = std::stoull(need_kv(fs, "p"));
  N = std::stoi(need_kv(fs, "N"));
  extname = need_kv(fs, "ext");
  g0z = std::stoll(need_kv(fs, "g0"));
  g1z = std::stoll(need_kv(fs, "g1"));
  FieldHandle F;
  if (extname == "none")
    F = Field::make_Qp(p, N);
  else if (extname == "unramified")
    F = Field::make_quadratic(p, N, ExtKind::unramified, g0z, g1z);
  else if (extname == "eisenstein")
    F = Field::make_quadratic(p, N, ExtKind::eisenstein, g0z, g1z);
  else
    throw FormatError("unknown extension kind: " + extname);

  if (!next_line()) throw FormatError("missing shape line");
  std::istringstream ss(line);
  std::string t1;
  if (!(ss >> t1) || t1 != "shape") throw FormatError("missing shape line");
  int d = std::stoi(need_kv(ss, "d"));
  int wa = std::stoi(need_kv(ss, "wa"));
  int wb = std::stoi(need_kv(ss, "wb"));
  int K = std::stoi(need_kv(ss, "K"));
  if (d < 1 || d > 2) throw FormatError("rank must be 1 or 2");

  SeriesMat P(d, d), G(d, d);
  std::vector<std::vector<bool>> seenP(d, std::vector<bool>(d, false)),
      seenG(d, std::vector<bool>(d, false));
  while (next_line()) {
    if (line == "end") {
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
          if (!seenP[i][j] || !seenG[i][j])
            throw FormatError("matrix entry missing");
      return wach_from_parts(F, P, G, wa, wb, K);
    }
    std::istringstream es(line);
    std::string blk;
    int i = 0, j = 0;
    if (!(es >> blk >> i >> j) || (blk != "P" && blk != "G"))
      throw FormatError("unrecognized line: " + line);
    if (i < 0 || i >= d || j < 0 || j >= d)
      throw FormatError("matrix index out of range");
    Series s = get_series(F, es);
    if (blk == "P") {
      P.at(i, j) = s;
      seenP[i][j] = true;
    } else {
      G.at(i, j) = s;
      seenG[i][j] = true;
    }
  }
  throw FormatError("missing end marker");
}

}  // namespace

WachModule parse_wach(const std::string& text) {
  try {
    return parse_wach_impl(text);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError(std::string("malformed module text: ") + e.what());
  }
}

}  // namespace phig
