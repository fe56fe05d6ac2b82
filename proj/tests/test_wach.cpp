#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <vector>

#include "phigamma/filtmod.hpp"
#include "phigamma/wach.hpp"

using namespace phig;

namespace {

Series random_entire(const FieldHandle& F, std::mt19937& rng, int deg) {
  Series s = Series::zero(F);
  for (int d = 0; d <= deg; ++d) {
    u64 r = rng() % F->pN;
    if (r != 0) s = s + Series::monomial(F, Scalar::from_residue(F, r), d);
  }
  return s;
}

std::vector<Series> random_vector(const FieldHandle& F, std::mt19937& rng,
                                  int d, int deg) {
  std::vector<Series> v;
  for (int j = 0; j < d; ++j) v.push_back(random_entire(F, rng, deg));
  return v;
}

Series random_int_entire(const FieldHandle& F, std::mt19937& rng, int deg) {
  Series s = Series::zero(F);
  for (int d = 0; d <= deg; ++d) {
    long long r = (long long)(rng() % 201) - 100;
    if (r != 0) s = s + Series::monomial(F, Scalar::from_int(F, r), d);
  }
  return s;
}

// Zero at every certified digit of the working precision, over the whole
// reliable window.
bool zero_at_full_precision(const std::vector<Series>& v) {
  for (const auto& s : v) {
    Series t = s.trimmed();
    if (t.is_entire_zero()) continue;
    const int w = t.F->N * t.F->e;
    int hi = t.entire ? t.K : std::min(t.rel + 1, t.K);
    if (hi < t.K) return false;
    if (!t.is_zero_within(w, t.lo, hi - 1)) return false;
  }
  return true;
}

std::vector<Series> vec_sub(const std::vector<Series>& a,
                            const std::vector<Series>& b) {
  std::vector<Series> out;
  for (size_t i = 0; i < a.size(); ++i) out.push_back(a[i] - b[i]);
  return out;
}

std::vector<std::vector<Series>> unit_vectors(const FieldHandle& F, int d,
                                              int deg) {
  std::vector<std::vector<Series>> out;
  for (int j = 0; j < d; ++j) {
    std::vector<Series> v(d, Series::zero(F));
    v[j] = Series::monomial(F, Scalar::one(F), deg);
    out.push_back(v);
  }
  return out;
}

// All module kinds used across the cases, over Q_3 with 8 digits.
struct Fixture {
  FieldHandle F = Field::make_Qp(3, 8);
  int K = 18;
  WachModule qp0 = wach_example(F, "qp-twist", 0, K);
  WachModule qp1 = wach_example(F, "qp-twist", -1, K);
  WachModule qp3 = wach_example(F, "qp-twist", -3, K);
  WachModule ss = wach_example(F, "supersingular-k2", 0, K);
  WachModule ap3 = wach_example(F, "ap-zero", 3, K);
  std::vector<const WachModule*> all{&qp0, &qp1, &qp3, &ss, &ap3};
};

}  // namespace

TEST_CASE("builders produce validated finite-height shapes") {
  Fixture X;
  const int w = X.F->N * X.F->e;

  CHECK(X.qp0.d == 1);
  CHECK(X.qp0.h == 0);
  CHECK(X.qp1.h == 1);
  CHECK(X.qp3.h == 3);
  CHECK(X.ss.d == 2);
  CHECK(X.ss.h == 1);
  CHECK(X.ap3.h == 2);

  for (const auto* Wp : X.all) {
    const WachModule& W = *Wp;
    CHECK(W.gamma_a == 4);
    CHECK(W.u_is_one);
    for (const auto& s : W.P.e) CHECK(s.entire);
    for (int i = 0; i < W.d; ++i)
      for (int j = 0; j < W.d; ++j) {
        Scalar want = i == j ? Scalar::one(X.F) : Scalar::zero(X.F);
        CHECK(W.G.at(i, j).coeff(0).eq_upto(want, w));
      }
  }

  // Twist shape: P = q^s exactly, constant term p^s.
  CHECK(X.qp3.P.at(0, 0).coeff(0).eq_upto(Scalar::from_int(X.F, 27), w));
  CHECK(X.ss.P.at(0, 1).coeff(0).eq_upto(Scalar::from_int(X.F, -1), w));
  CHECK(X.ss.P.at(1, 0).coeff(0).eq_upto(Scalar::from_int(X.F, 3), w));

  auto F5 = Field::make_Qp(5, 6);
  auto W54 = wach_example(F5, "ap-zero", 4, 40);
  CHECK(W54.h == 3);
  CHECK(W54.u_is_one);

  CHECK_THROWS_AS(wach_example(X.F, "qp-twist", 1, X.K), UnsupportedCase);
  CHECK_THROWS_AS(wach_example(X.F, "ap-zero", 1, X.K), UnsupportedCase);
  CHECK_THROWS_AS(wach_example(X.F, "nonsense", 0, X.K), UnsupportedCase);

  // det(P) not of the shape unit * q^h is rejected.
  SeriesMat Pbad(1, 1), Gb(1, 1);
  Pbad.at(0, 0) = Series::X(X.F);
  Gb.at(0, 0) = Series::one(X.F);
  CHECK_THROWS_AS(wach_from_parts(X.F, Pbad, Gb, -1, 0, X.K),
                  NotFiniteHeightShape);
}

TEST_CASE("phi and the loop action commute; corruption is localized") {
  Fixture X;
  for (const auto* Wp : X.all) {
    auto rep = verify_commutation(*Wp);
    CHECK(rep.ok);
    CHECK(rep.window >= X.K - 2);
    CHECK(rep.defect_degree == -1);
  }

  // A unit perturbation of G that keeps G(0) = Id breaks the identity in
  // low degree and the report points at it.
  SeriesMat Gc = X.ss.G;
  Gc.at(0, 0) = (Gc.at(0, 0) * (Series::one(X.F) + Series::X(X.F)))
                    .truncated(X.K);
  auto Wc = wach_from_parts(X.F, X.ss.P, Gc, -1, 0, X.K);
  auto rep = verify_commutation(Wc);
  CHECK_FALSE(rep.ok);
  CHECK(rep.defect_degree >= 0);
  CHECK(rep.defect_degree <= 2);

  // Independent route to the same ratio units: w_plus and w_minus against
  // the even/odd halves of log(1+X), and the swap identities between them.
  auto [wp, wm] = gamma_ratio_halves(X.F, X.K);
  Series lp = log_plus(X.F, X.K, 6);
  Series lm = log_minus(X.F, X.K, 6);
  auto check_ratio = [&](const Series& wu, const Series& lam) {
    Series d = (wu * gamma_int(lam, 4)).truncated(X.K) - lam;
    int U = std::min(d.unreliable_from(), d.K);
    REQUIRE(U >= X.K - 2);
    CHECK(d.is_zero_within(4, 0, U - 1));
  };
  check_ratio(wp, lp);
  check_ratio(wm, lm);

  Series d1 = phi(wm, X.K) - wp;
  CHECK(d1.is_zero_within(6, 0, std::min(d1.unreliable_from(), X.K) - 1));
  Series q = Series::qpoly(X.F);
  Series d2 = (q * phi(wp, X.K) - wm * gamma_int(q, 4)).truncated(X.K);
  CHECK(d2.is_zero_within(6, 0, std::min(d2.unreliable_from(), X.K) - 1));
}

TEST_CASE("psi_module inverts phi_module") {
  Fixture X;
  std::mt19937 rng(2024);
  for (const auto* Wp : X.all) {
    const WachModule& W = *Wp;
    // The averaging step caps every coefficient at the working precision,
    // so even integer inputs come back certified rather than exact.
    for (int t = 0; t < 4; ++t) {
      std::vector<Series> v;
      for (int j = 0; j < W.d; ++j)
        v.push_back(random_int_entire(X.F, rng, 5));
      auto back = psi_module(W, phi_module(W, v));
      CHECK(zero_at_full_precision(vec_sub(back, v)));
    }
    // Arbitrary residues carry N digits; the round trip keeps all of them.
    for (int t = 0; t < 4; ++t) {
      auto v = random_vector(X.F, rng, W.d, 5);
      auto back = psi_module(W, phi_module(W, v));
      CHECK(zero_at_full_precision(vec_sub(back, v)));
    }
  }
}

TEST_CASE("psi respects the lattice and the quantitative pole bound") {
  Fixture X;
  std::mt19937 rng(77);

  // Integral input, integral output for the stable reading.
  for (const auto* Wp : {&X.ss, &X.ap3}) {
    const WachModule& W = *Wp;
    for (int t = 0; t < 100; ++t) {
      auto v = random_vector(X.F, rng, W.d, 6);
      for (const auto& s : psi_stable(W, v)) CHECK(s.trimmed().lo >= 0);
    }
  }

  // Pole of order l goes to pole of order <= l whose deepest coefficient
  // is divisible by p^(l-1).
  for (const auto* Wp : {&X.ss, &X.ap3}) {
    const WachModule& W = *Wp;
    for (int l = 1; l <= 5; ++l) {
      for (int t = 0; t < 20; ++t) {
        auto v = random_vector(X.F, rng, W.d, 6);
        for (auto& s : v) s = s.shifted(-l);
        for (const auto& s : psi_stable(W, v)) {
          Series r = s.trimmed();
          CHECK(r.lo >= -l);
          if (r.lo <= -l) CHECK(r.coeff(-l).val_lb() >= (l - 1) * X.F->e);
        }
      }
    }
  }

  // The stored reading maps X^{-1} N into X^{-1} N on the k = 2 module.
  for (const auto& v : unit_vectors(X.F, 2, -1))
    for (const auto& s : psi_module(X.ss, v)) CHECK(s.trimmed().lo >= -1);
}

TEST_CASE("the adjugate certificate: N sits inside phi*(N) via q^h") {
  Fixture X;
  for (const auto* Wp : X.all) {
    const WachModule& W = *Wp;
    Series qh = Series::one(X.F);
    for (int i = 0; i < W.h; ++i)
      qh = qh * Series::qpoly(X.F);
    for (int j = 0; j < W.d; ++j) {
      std::vector<Series> z;
      for (int i = 0; i < W.d; ++i) {
        Series zi = W.Padj.at(i, j);
        if (!W.u_is_one) zi = (zi * W.u_inv).truncated(W.K);
        z.push_back(zi.trimmed());
      }
      for (const auto& s : z) {
        CHECK(s.lo >= 0);
        for (int dd = s.lo; dd < std::min(s.unreliable_from(), s.K); ++dd)
          CHECK(s.coeff(dd).val_lb() >= 0);
      }
      for (int i = 0; i < W.d; ++i) {
        Series lhs = Series::zero(X.F);
        for (int t = 0; t < W.d; ++t) lhs = lhs + W.P.at(i, t) * z[t];
        Series rhs = i == j ? qh : Series::zero(X.F);
        CHECK((lhs - rhs).trimmed().is_entire_zero());
      }
    }
  }
}

TEST_CASE("filtration steps and the reduction mod X") {
  Fixture X;

  // Step 0 is the whole module.
  auto full = SubmoduleSpan::from_vectors(X.F, 2, 0, 12,
                                          unit_vectors(X.F, 2, 0));
  CHECK(fil_on_N(X.ss, 0, 12).same(full));
  CHECK(fil_on_N(X.ss, -3, 12).same(full));

  // The zero-a_p module of weight 3 reduces to its companion-form model.
  auto D = reduce_mod_X(X.ap3);
  auto Dk = make_Dkap(X.F, 3, Scalar::zero(X.F));
  const int w = X.F->N * X.F->e;
  CHECK(D.dim == 2);
  CHECK(D.j_lo == Dk.j_lo);
  CHECK(D.j_hi == Dk.j_hi);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      CHECK(D.phi_at(i, j).eq_upto(Dk.phi_at(i, j), w));
  CHECK(D.delta[0].is_unit());
  CHECK(D.delta[1].eq_upto(Scalar::zero(X.F), w));
  CHECK(is_admissible(D).admissible);
  CHECK(classify(D) == classify(Dk));
  CHECK(classify(D) == Classification::absolutely_irreducible);

  auto Dss = reduce_mod_X(X.ss);
  CHECK(Dss.j_lo == 0);
  CHECK(Dss.j_hi == 1);
  CHECK(is_admissible(Dss).admissible);
  CHECK(classify(Dss) == classify(make_Dkap(X.F, 2, Scalar::zero(X.F))));

  auto D2 = reduce_mod_X(X.qp3);
  CHECK(D2.dim == 1);
  CHECK(D2.j_lo == 3);
  CHECK(D2.j_hi == 3);
  CHECK(D2.phi_at(0, 0).eq_upto(Scalar::from_int(X.F, 27), w));
  CHECK(is_admissible(D2).admissible);

  auto D0 = reduce_mod_X(X.qp0);
  CHECK(D0.j_lo == 0);
  CHECK(D0.j_hi == 0);
  CHECK(D0.phi_at(0, 0).eq_upto(Scalar::one(X.F), w));
  CHECK(is_admissible(D0).admissible);
}

TEST_CASE("psi action on the q-quotient matches the adjugate at zero") {
  // The comparison target is forced by psi(q f) having constant term f(0),
  // so the value of this case is that it drives the whole adjugate, unit
  // inverse and pole plumbing end to end on all three families.
  Fixture X;
  CHECK(psi_on_quotient_check(X.qp0));
  CHECK(psi_on_quotient_check(X.ss));
  CHECK(psi_on_quotient_check(X.ap3, 1));
  auto F5 = Field::make_Qp(5, 6);
  CHECK(psi_on_quotient_check(wach_ap_zero(F5, 4, 40)));
}

TEST_CASE("iterated psi images stabilize onto a psi- and gamma-stable span") {
  Fixture X;

  auto R = d0_stabilize(X.ss, 1, 16);
  CHECK(R.unique_certified);
  CHECK(R.iterations >= 1);

  // Sandwich: contains X N, sits inside the X^{-1} budget lattice.
  auto lower = SubmoduleSpan::from_vectors(X.F, 2, 1, 16,
                                           unit_vectors(X.F, 2, 1));
  auto upper = SubmoduleSpan::from_vectors(X.F, 2, 1, 16,
                                           unit_vectors(X.F, 2, -1));
  CHECK(R.span.contains(lower));
  CHECK(upper.contains(R.span));

  // Every generator stays inside under both operators.
  for (int r = 0; r < R.span.rows(); ++r) {
    auto v = R.span.lift_row(r);
    CHECK(R.span.contains_vector(psi_module(X.ss, v)));
    CHECK(R.span.contains_vector(gamma_module(X.ss, v)));
  }

  // Rank 1, weight 0: the module itself, reached in one round.
  auto R0 = d0_stabilize(X.qp0, 0, 8);
  CHECK(R0.iterations == 1);
  CHECK_FALSE(R0.unique_certified);
  CHECK(R0.span.same(SubmoduleSpan::from_vectors(X.F, 1, 0, 8,
                                                 unit_vectors(X.F, 1, 0))));

  // A visibly split module cannot certify uniqueness.
  SeriesMat Ps(2, 2), Gs(2, 2);
  Ps.at(0, 0) = Series::one(X.F);
  Ps.at(0, 1) = Series::zero(X.F);
  Ps.at(1, 0) = Series::zero(X.F);
  Ps.at(1, 1) = Series::qpoly(X.F);
  Gs.at(0, 0) = Series::one(X.F);
  Gs.at(0, 1) = Series::zero(X.F);
  Gs.at(1, 0) = Series::zero(X.F);
  Gs.at(1, 1) = w_unit(X.F, 4, X.K).smul(Scalar::from_int(X.F, 4).inv());
  auto Ws = wach_from_parts(X.F, Ps, Gs, -1, 0, X.K);
  CHECK(verify_commutation(Ws).ok);
  auto Rs = d0_stabilize(Ws, 1, 16);
  CHECK_FALSE(Rs.unique_certified);
  for (int r = 0; r < Rs.span.rows(); ++r)
    CHECK(Rs.span.contains_vector(psi_module(Ws, Rs.span.lift_row(r))));

  CHECK_THROWS_AS(d0_stabilize(X.ss, 1, 8), UnsupportedCase);
}

TEST_CASE("eigenbasis of the Frobenius over the rigid window") {
  // Constant diagonal module: the basis is found exactly in one step.
  {
    auto F = Field::make_Qp(3, 8);
    SeriesMat P(2, 2), G = SeriesMat::identity(F, 2);
    P.at(0, 0) = Series::constant(F, Scalar::from_int(F, 2));
    P.at(0, 1) = Series::zero(F);
    P.at(1, 0) = Series::zero(F);
    P.at(1, 1) = Series::constant(F, Scalar::from_int(F, 7));
    auto W = wach_from_parts(F, P, G, 0, 0, 18);
    auto E = rig_eigenbasis(W, Scalar::from_int(F, 2), Scalar::from_int(F, 7));
    const int w = F->N * F->e;
    CHECK(E.residual_floor == w);
    CHECK(E.M.at(0, 0).coeff(0).eq_upto(Scalar::one(F), w));
    CHECK(E.M.at(1, 1).coeff(0).eq_upto(Scalar::one(F), w));
    CHECK(zero_at_full_precision({E.M.at(0, 0) - Series::one(F),
                                  E.M.at(1, 1) - Series::one(F),
                                  E.M.at(0, 1), E.M.at(1, 0)}));
    CHECK(E.det0.eq_upto(Scalar::one(F), w));
  }

  // The recomputed residual may carry fewer certified digits than the
  // stored one, so the oracle asks the sharper question: no coefficient is
  // certifiably nonzero at the claimed floor.
  auto residual_oracle = [](const WachModule& W, const EigenBasis& E) {
    for (int which = 0; which < 2; ++which) {
      Scalar lam = which == 0 ? E.alpha : E.beta;
      for (int i = 0; i < 2; ++i) {
        Series s = Series::zero(W.F);
        for (int j = 0; j < 2; ++j)
          s = s + W.P.at(i, j) * phi(E.M.at(j, which), W.K);
        Series r = (s - E.M.at(i, which).smul(lam)).truncated(W.K).trimmed();
        int U = r.entire ? r.K : std::min(r.rel + 1, r.K);
        REQUIRE((r.entire || r.rel >= W.K - 2));
        for (int dd = std::max(r.lo, 0); dd < U; ++dd) {
          Scalar c = r.coeff(dd);
          bool certified_nonzero = false;
          try {
            certified_nonzero = c.val() < E.residual_floor;
          } catch (const PrecisionExhausted&) {
          }
          CHECK_FALSE(certified_nonzero);
        }
      }
    }
  };

  // Supersingular k = 2: eigenvalues +-sqrt(-p) live in the ramified
  // quadratic extension, so the module is built over it.
  {
    auto E2 = Field::make_quadratic(3, 12, ExtKind::eisenstein, 3, 0);
    auto W = wach_supersingular_k2(E2, 10);
    Scalar al = Scalar::gen_y(E2);
    auto E = rig_eigenbasis(W, al, -al);
    CHECK(E.residual_floor >= 2);
    CHECK(E.det0.val() == 1);
    residual_oracle(W, E);
  }

  // Zero-a_p weight 3 over Q_5: eigenvalues +-5i with i lifted by hand.
  {
    auto F = Field::make_Qp(5, 16);
    auto W = wach_ap_zero(F, 3, 8);
    u64 x = 2;
    for (int it = 0; it < 6; ++it) {
      u64 num = F->add(F->mul(x, x), 1);
      x = F->sub(x, F->mul(num, F->inv_unit(F->add(x, x))));
    }
    CHECK(F->add(F->mul(x, x), 1) == 0);
    Scalar al = Scalar::from_residue(F, x).mul_pow_p(1);
    auto E = rig_eigenbasis(W, al, -al);
    CHECK(E.residual_floor >= 1);
    CHECK(E.det0.val() == 1);
    residual_oracle(W, E);
  }

  // Guards: colliding or mismatched eigenvalues.
  {
    auto F = Field::make_Qp(3, 8);
    auto W = wach_supersingular_k2(F, 18);
    Scalar two = Scalar::from_int(F, 2);
    CHECK_THROWS_AS(rig_eigenbasis(W, two, two), GenericityRequired);
    CHECK_THROWS_AS(rig_eigenbasis(W, two, Scalar::from_int(F, 7)),
                    GenericityRequired);
  }

  // A diagonal module with eigenvalue ratio p hits an exactly singular
  // degree-1 solve.
  {
    auto F = Field::make_Qp(3, 8);
    SeriesMat P(2, 2), G(2, 2);
    Scalar two = Scalar::from_int(F, 2);
    P.at(0, 0) = Series::constant(F, two);
    P.at(0, 1) = Series::zero(F);
    P.at(1, 0) = Series::zero(F);
    P.at(1, 1) = Series::qpoly(F).smul(two);
    G.at(0, 0) = Series::one(F);
    G.at(0, 1) = Series::zero(F);
    G.at(1, 0) = Series::zero(F);
    G.at(1, 1) = w_unit(F, 4, 18).smul(Scalar::from_int(F, 4).inv());
    auto W = wach_from_parts(F, P, G, -1, 0, 18);
    CHECK(verify_commutation(W).ok);
    CHECK_THROWS_AS(rig_eigenbasis(W, Scalar::from_int(F, 6), two),
                    SingularRecursion);
  }
}

namespace {

// Field-by-field equality of the stored representation, including the
// exact-integer tags, which is what a faithful reload must reproduce.
bool same_series_state(const Series& a, const Series& b) {
  if (a.lo != b.lo || a.K != b.K || a.entire != b.entire) return false;
  if (!a.entire && a.rel != b.rel) return false;
  for (int d = a.lo; d < a.K; ++d) {
    Scalar x = a.coeff(d), y = b.coeff(d);
    if (x.is_exact_zero() != y.is_exact_zero()) return false;
    if (x.is_exact_zero()) continue;
    if (x.shift != y.shift || x.c0 != y.c0 || x.c1 != y.c1 ||
        x.prec != y.prec)
      return false;
    if (x.int_hint.has_value() != y.int_hint.has_value()) return false;
    if (x.int_hint && *x.int_hint != *y.int_hint) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("text form round-trips and rejects malformed input") {
  Fixture X;
  for (const auto* Wp : {&X.ss, &X.qp1}) {
    const WachModule& W = *Wp;
    auto T = parse_wach(to_text(W));
    CHECK(T.d == W.d);
    CHECK(T.wa == W.wa);
    CHECK(T.wb == W.wb);
    CHECK(T.K == W.K);
    CHECK(T.h == W.h);
    CHECK(T.gamma_a == W.gamma_a);
    CHECK(T.u_is_one == W.u_is_one);
    for (int i = 0; i < W.d; ++i)
      for (int j = 0; j < W.d; ++j) {
        CHECK(same_series_state(T.P.at(i, j), W.P.at(i, j)));
        CHECK(same_series_state(T.G.at(i, j), W.G.at(i, j)));
      }
    CHECK(verify_commutation(T).ok);
  }

  CHECK_THROWS_AS(parse_wach("garbage"), FormatError);
  auto text = to_text(X.qp1);
  CHECK_THROWS_AS(parse_wach(text.substr(0, text.size() / 2)), FormatError);
  auto broken = text;
  broken.replace(broken.find("wach v1"), 7, "wach v9");
  CHECK_THROWS_AS(parse_wach(broken), FormatError);
}

TEST_CASE("spans: shift closure, membership, lifts") {
  auto F = Field::make_Qp(3, 8);
  std::vector<Series> g = {Series::one(F), Series::X(F)};
  auto S = SubmoduleSpan::from_vectors(F, 2, 0, 6, {g});
  CHECK(S.same(S));

  // X * generator is in by shift closure.
  std::vector<Series> xg = {Series::X(F), Series::X(F).shifted(1)};
  CHECK(S.contains_vector(xg));

  // A vector off the span is rejected.
  std::vector<Series> other = {Series::one(F),
                               Series::X(F) + Series::one(F)};
  CHECK_FALSE(S.contains_vector(other));

  for (int r = 0; r < S.rows(); ++r)
    CHECK(S.contains_vector(S.lift_row(r)));

  std::vector<Series> pole = {Series::monomial(F, Scalar::one(F), -1),
                              Series::zero(F)};
  CHECK_THROWS_AS(SubmoduleSpan::from_vectors(F, 2, 0, 6, {pole}),
                  UnsupportedCase);
}
