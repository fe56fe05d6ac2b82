#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "phigamma/filtmod.hpp"

using namespace phig;

namespace {

bool same_module(const FilteredPhiModule& A, const FilteredPhiModule& B) {
  if (A.dim != B.dim || A.j_lo != B.j_lo || A.j_hi != B.j_hi) return false;
  int w = A.F->N * A.F->e - 4;
  for (size_t i = 0; i < A.phi.size(); ++i)
    if (!A.phi[i].eq_upto(B.phi[i], w)) return false;
  if (A.dim == 2)
    for (int i = 0; i < 2; ++i)
      if (!A.delta[i].eq_upto(B.delta[i], w)) return false;
  return true;
}

}  // namespace

TEST_CASE("invariants follow the frozen sign conventions") {
  auto F = Field::make_Qp(5, 12);
  // Diagonal module with eigenvalue inverses alpha = 75 (val 2), beta = 7
  // (val 0), weights (-(k-1), 0) for k = 3.
  auto D = make_Dab(F, Scalar::from_int(F, 75), Scalar::from_int(F, 7), 3, 2);
  CHECK(tN(D) == Rat::make(-2, 1));
  CHECK(tH(D) == -2);
  CHECK(is_admissible(D).admissible);

  auto K = make_Dkap(F, 4, Scalar::from_int(F, 25));
  CHECK(tN(K) == Rat::make(3, 1));
  CHECK(tH(K) == 3);
  CHECK(is_admissible(K).admissible);

  // Unequal invariants are rejected outright.
  auto bad = make_Dkap(F, 4, Scalar::from_int(F, 25));
  bad.phi_at(1, 0) = Scalar::one(F).mul_pow_p(5);
  auto rep = is_admissible(bad);
  CHECK_FALSE(rep.admissible);
  CHECK(rep.witness.find("t_N(D)") != std::string::npos);
}

TEST_CASE("dimension one: admissible exactly when valuation equals jump") {
  auto F = Field::make_Qp(5, 10);
  for (int n = -2; n <= 2; ++n) {
    auto c = Scalar::from_int(F, 3).mul_pow_p(n);
    CHECK(is_admissible(make_dim1(F, c, n)).admissible);
    CHECK_FALSE(is_admissible(make_dim1(F, c, n + 1)).admissible);
    CHECK_FALSE(is_admissible(make_dim1(F, c, n - 1)).admissible);
    CHECK(tN(make_dim1(F, c, n)) == Rat::make(n, 1));
    CHECK(tH(make_dim1(F, c, n)) == n);
  }
}

TEST_CASE("eigenline on the filtration line breaks admissibility") {
  auto F = Field::make_Qp(5, 12);
  // val(alpha) = val(beta) = 1, k = 3: admissible when delta avoids both
  // eigenlines, inadmissible the moment it lands on one.
  auto D = make_Dab(F, Scalar::from_int(F, 10), Scalar::from_int(F, 15), 3, 1);
  CHECK(is_admissible(D).admissible);
  auto Dbad = D;
  Dbad.delta = {Scalar::one(F), Scalar::zero(F)};
  auto rep = is_admissible(Dbad);
  CHECK_FALSE(rep.admissible);
  CHECK(rep.witness.find("first basis line") != std::string::npos);
  CHECK(rep.witness.find("filtration line") != std::string::npos);
  auto Dbad2 = D;
  Dbad2.delta = {Scalar::zero(F), Scalar::one(F)};
  CHECK_FALSE(is_admissible(Dbad2).admissible);
}

TEST_CASE("classification matches the construction case") {
  auto F = Field::make_Qp(5, 12);
  // Case 1 samples: both valuations positive.
  for (int k : {3, 4, 5}) {
    for (int vb = 1; vb <= (k - 1) / 2; ++vb) {
      auto alpha = Scalar::from_int(F, 3).mul_pow_p(k - 1 - vb);
      auto beta = Scalar::from_int(F, 2).mul_pow_p(vb);
      auto D = make_Dab(F, alpha, beta, k, 1);
      CHECK(classify(D) == Classification::absolutely_irreducible);
    }
  }
  // Cases 2 and 3: unit beta, val(alpha) = k - 1.
  for (int k : {2, 3, 5}) {
    auto alpha = Scalar::from_int(F, 2).mul_pow_p(k - 1);
    auto beta = Scalar::from_int(F, 7);
    CHECK(classify(make_Dab(F, alpha, beta, k, 2)) ==
          Classification::reducible_nonsplit);
    CHECK(classify(make_Dab(F, alpha, beta, k, 3)) ==
          Classification::reducible_split);
    // delta on the non-unit eigenline: not admissible at all.
    auto Dbad = make_Dab(F, alpha, beta, k, 1);
    Dbad.delta = {Scalar::one(F), Scalar::zero(F)};
    CHECK_THROWS_AS(classify(Dbad), NotAdmissible);
  }
  CHECK(classification_name(Classification::reducible_split) ==
        "reducible-split");
}

TEST_CASE("admissibility is symmetric under swapping equal valuations") {
  auto F = Field::make_Qp(5, 12);
  auto a = Scalar::from_int(F, 10);
  auto b = Scalar::from_int(F, 35);
  for (int c : {1, 2, 3}) {
    auto D1 = make_Dab(F, a, b, 3, c);
    auto D2 = make_Dab(F, b, a, 3, c);
    CHECK(is_admissible(D1).admissible == is_admissible(D2).admissible);
  }
}

TEST_CASE("companion module carries its characteristic polynomial") {
  auto F = Field::make_Qp(5, 12);
  auto ap = Scalar::from_int(F, 25);
  auto K = make_Dkap(F, 4, ap);
  CHECK(K.tr_phi().eq_upto(ap, 12));
  CHECK(K.det_phi().eq_upto(Scalar::one(F).mul_pow_p(3), 12));
  CHECK(classify(K) == Classification::absolutely_irreducible);

  // Unit ap: ordinary, hence reducible; the filtration line stays off the
  // unit eigenline, so non-split.
  CHECK(classify(make_Dkap(F, 4, Scalar::from_int(F, 3))) ==
        Classification::reducible_nonsplit);

  // Odd-valuation discriminant: no eigenline over Q_p at all.
  CHECK(classify(make_Dkap(F, 2, Scalar::from_int(F, 5))) ==
        Classification::absolutely_irreducible);
  CHECK(classify(make_Dkap(F, 2, Scalar::zero(F))) ==
        Classification::absolutely_irreducible);
}

TEST_CASE("genericity flags record parameter collisions") {
  auto F = Field::make_Qp(5, 12);
  CHECK_FALSE(make_Dab(F, Scalar::from_int(F, 5), Scalar::one(F), 2, 1)
                  .alpha_ne_pbeta);
  CHECK(make_Dab(F, Scalar::from_int(F, 10), Scalar::from_int(F, 3), 2, 1)
            .alpha_ne_pbeta);
  CHECK_FALSE(
      make_Dab(F, Scalar::from_int(F, 15), Scalar::from_int(F, 15), 3, 1)
          .alpha_ne_beta);
  CHECK_FALSE(make_Dkap(F, 2, Scalar::from_int(F, 6)).alpha_ne_pbeta);
  CHECK(make_Dkap(F, 2, Scalar::from_int(F, 7)).alpha_ne_pbeta);
}

TEST_CASE("twist shifts both invariants together") {
  auto F = Field::make_Qp(5, 12);
  auto D = make_Dkap(F, 4, Scalar::from_int(F, 25));
  CHECK(same_module(twist(D, 0), D));
  auto T = twist(D, 2);
  CHECK(tH(T) == 3 - 4);
  CHECK(tN(T) == Rat::make(-1, 1));
  CHECK(is_admissible(T).admissible);
  CHECK(classify(T) == Classification::absolutely_irreducible);
  CHECK(same_module(twist(T, -2), D));
}

TEST_CASE("eisenstein parameters classify as the irreducible case") {
  auto F = Field::make_quadratic(5, 12, ExtKind::eisenstein, -5, 0);
  auto y = Scalar::gen_y(F);
  auto D = make_Dab(F, y, -y, 2, 1);
  CHECK(tN(D) == Rat::make(-1, 1));
  CHECK(tH(D) == -1);
  CHECK(is_admissible(D).admissible);
  CHECK(classify(D) == Classification::absolutely_irreducible);
  CHECK(D.alpha_ne_beta);
}

TEST_CASE("mismatched weights are rejected at construction") {
  auto F = Field::make_Qp(5, 12);
  CHECK_THROWS_AS(
      make_Dab(F, Scalar::from_int(F, 5), Scalar::from_int(F, 5), 2, 1),
      WeightMismatch);
  CHECK_THROWS_AS(
      make_Dab(F, Scalar::from_int(F, 5), Scalar::from_int(F, 1), 2, 4),
      UnsupportedCase);
  CHECK_THROWS_AS(make_Dkap(F, 1, Scalar::from_int(F, 5)), UnsupportedCase);
}

TEST_CASE("non-semisimple and scalar matrices are handled honestly") {
  auto F = Field::make_Qp(5, 10);
  FilteredPhiModule D;
  D.F = F;
  D.dim = 2;
  D.phi = {Scalar::from_int(F, 3), Scalar::one(F), Scalar::zero(F),
           Scalar::from_int(F, 3)};
  D.j_lo = 0;
  D.j_hi = 0;
  D.delta = {Scalar::one(F), Scalar::zero(F)};
  CHECK_THROWS_AS(is_admissible(D), NonSemisimplePhi);

  FilteredPhiModule S;
  S.F = F;
  S.dim = 2;
  S.phi = {Scalar::from_int(F, 5), Scalar::zero(F), Scalar::zero(F),
           Scalar::from_int(F, 5)};
  S.j_lo = 0;
  S.j_hi = 2;
  S.delta = {Scalar::one(F), Scalar::one(F)};
  auto rep = is_admissible(S);
  CHECK_FALSE(rep.admissible);
  CHECK(rep.witness.find("filtration line") != std::string::npos);
}

TEST_CASE("serialization round trips") {
  auto F = Field::make_Qp(5, 12);
  auto K = make_Dkap(F, 4, Scalar::from_int(F, 25));
  auto K2 = parse_filtmod(to_text(K));
  CHECK(same_module(K, K2));

  auto D = make_Dab(F, Scalar::from_int(F, 50), Scalar::from_int(F, 7), 3, 2);
  auto D2 = parse_filtmod(to_text(D));
  CHECK(same_module(D, D2));
  CHECK(classify(D2) == Classification::reducible_nonsplit);

  auto D3 = make_Dab(F, Scalar::from_int(F, 50), Scalar::from_int(F, 7), 3, 3);
  CHECK(classify(parse_filtmod(to_text(D3))) ==
        Classification::reducible_split);

  auto T = twist(K, 1);
  CHECK(same_module(T, parse_filtmod(to_text(T))));

  auto one = make_dim1(F, Scalar::from_rational(F, 3, 25), -2);
  CHECK(same_module(one, parse_filtmod(to_text(one))));

  // The supersingular extension-field module round trips through ap.
  auto E = Field::make_quadratic(5, 12, ExtKind::eisenstein, -5, 0);
  auto W = make_Dkap(E, 3, Scalar::zero(E));
  CHECK(same_module(W, parse_filtmod(to_text(W))));

  CHECK_THROWS_AS(parse_filtmod("filtmod{ p=5, N=12 }"), FormatError);
  CHECK_THROWS_AS(parse_filtmod("nonsense"), FormatError);
  CHECK_THROWS_AS(
      parse_filtmod("filtmod{ p=5, N=12, k=3, alpha=50, beta=7, delta=e_a }"),
      FormatError);
}
