#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "phigamma/padic.hpp"

using namespace phig;

TEST_CASE("field construction is validated") {
  CHECK_THROWS_AS(Field::make_Qp(2, 8), UnsupportedCase);
  CHECK_THROWS_AS(Field::make_Qp(9, 8), UnsupportedCase);
  CHECK_THROWS_AS(Field::make_Qp(5, 0), UnsupportedCase);
  CHECK_THROWS_AS(Field::make_Qp(5, 40), UnsupportedCase);  // 5^40 > 2^64
  auto F = Field::make_Qp(5, 8);
  CHECK(F->pN == 390625);
  // y^2 - 2 is irreducible mod 5, y^2 - 1 is not.
  CHECK_NOTHROW(Field::make_quadratic(5, 8, ExtKind::unramified, -2, 0));
  CHECK_THROWS_AS(Field::make_quadratic(5, 8, ExtKind::unramified, -1, 0),
                  UnsupportedCase);
  CHECK_NOTHROW(Field::make_quadratic(5, 8, ExtKind::eisenstein, -5, 0));
  CHECK_THROWS_AS(Field::make_quadratic(5, 8, ExtKind::eisenstein, -25, 0),
                  UnsupportedCase);  // v(g0) = 1 required
  CHECK_THROWS_AS(Field::make_quadratic(5, 8, ExtKind::eisenstein, -5, 2),
                  UnsupportedCase);  // v(g1) >= 1 required
}

TEST_CASE("basic arithmetic and display") {
  auto F = Field::make_Qp(5, 8);
  auto a = Scalar::from_int(F, 17);
  CHECK(a.str() == "17 mod 5^8");
  CHECK(a.val() == 0);
  auto b = Scalar::from_int(F, 50);
  CHECK(b.val() == 2);
  auto s = a + b;
  CHECK(s.eq_upto(Scalar::from_int(F, 67), 8));
  auto m = a * b;
  CHECK(m.eq_upto(Scalar::from_int(F, 850), 8));
  auto d = Scalar::from_rational(F, 1, 5);
  CHECK(d.val() == -1);
  CHECK(d.prec == 7);
  CHECK(d.str() == "1/5^1 mod 5^7");
  CHECK((d * Scalar::from_int(F, 5)).eq_upto(Scalar::one(F), 8));
}

TEST_CASE("exact zero versus precision zero") {
  auto F = Field::make_Qp(5, 8);
  // Integer-certified values cancel exactly.
  auto a = Scalar::from_int(F, 17);
  CHECK((a - a).is_exact_zero());
  // A bare residue carries no certificate, so cancellation only proves
  // vanishing within the stored window.
  auto r = Scalar::from_residue(F, 17);
  auto z = r - r;
  CHECK_FALSE(z.is_exact_zero());
  CHECK(z.is_prec_zero());
  CHECK_THROWS_AS(z.val(), PrecisionExhausted);
  CHECK_THROWS_AS(z.inv(), DivisionByPrecisionZero);
  CHECK(Scalar::zero(F).is_exact_zero());
  CHECK(Scalar::zero(F).val() == Scalar::INF);
  CHECK_THROWS_AS(Scalar::zero(F).inv(), DivisionByPrecisionZero);
  // z is zero within the full window, but not beyond it.
  CHECK(z.is_zero_within(8));
  CHECK_FALSE(z.is_zero_within(9));
}

TEST_CASE("inversion and division track precision") {
  auto F = Field::make_Qp(5, 8);
  auto a = Scalar::from_int(F, 7);
  CHECK((a * a.inv()).eq_upto(Scalar::one(F), 8));
  auto b = Scalar::from_int(F, 50);  // valuation 2
  auto ib = b.inv();
  CHECK(ib.val() == -2);
  CHECK(ib.prec == 8 + 2 - 2 * 2);  // storage 10 digits, minus twice the val
  CHECK((b * ib).eq_upto(Scalar::one(F), 6));
  auto c = Scalar::from_int(F, 3).pow_i(-2);
  CHECK((c * Scalar::from_int(F, 9)).eq_upto(Scalar::one(F), 8));
}

TEST_CASE("square roots in Q_p") {
  auto F = Field::make_Qp(5, 8);
  auto r = Scalar::from_int(F, 4).sqrt();
  CHECK((r * r).eq_upto(Scalar::from_int(F, 4), 8));
  auto m1 = Scalar::from_int(F, -1).sqrt();  // -1 is a square mod 5
  CHECK((m1 * m1).eq_upto(Scalar::from_int(F, -1), 8));
  CHECK_THROWS_AS(Scalar::from_int(F, 2).sqrt(), NoSquareRoot);
  CHECK_THROWS_AS(Scalar::from_int(F, 5).sqrt(), NoSquareRoot);
  auto sq25 = Scalar::from_int(F, 25).sqrt();
  CHECK(sq25.val() == 1);
  CHECK((sq25 * sq25).eq_upto(Scalar::from_int(F, 25), 8));
}

TEST_CASE("generalized binomials against exact rational values") {
  auto F = Field::make_Qp(5, 8);
  // Integer upper index: plain binomial numbers.
  CHECK(binom_padic(Scalar::from_int(F, 6), 2)
            .eq_upto(Scalar::from_int(F, 15), 8));
  CHECK(binom_padic(Scalar::from_int(F, 10), 4)
            .eq_upto(Scalar::from_int(F, 210), 8));
  // Rational upper index: binom(5/2, 2) = 15/8, binom(1/2, 5) = 7/256.
  CHECK(binom_padic(Scalar::from_rational(F, 5, 2), 2)
            .eq_upto(Scalar::from_rational(F, 15, 8), 8));
  auto b5 = binom_padic(Scalar::from_rational(F, 1, 2), 5);
  CHECK(b5.prec == 7);  // v_5(5!) = 1 digit lost
  CHECK(b5.eq_upto(Scalar::from_rational(F, 7, 256), 7));
  // Total loss raises.
  auto G = Field::make_Qp(5, 1);
  CHECK_THROWS_AS(binom_padic(Scalar::from_rational(G, 1, 2), 5),
                  PrecisionExhausted);
}

TEST_CASE("quadratic extensions") {
  auto U = Field::make_quadratic(5, 8, ExtKind::unramified, -2, 0);
  auto y = Scalar::gen_y(U);
  CHECK((y * y).eq_upto(Scalar::from_int(U, 2), 8));
  CHECK((y * y.inv()).eq_upto(Scalar::one(U), 8));
  CHECK(y.val() == 0);
  auto E = Field::make_quadratic(5, 8, ExtKind::eisenstein, -5, 0);
  auto pi = Scalar::gen_y(E);
  CHECK(pi.val() == 1);
  CHECK((pi * pi).eq_upto(Scalar::from_int(E, 5), 16));
  CHECK(Scalar::from_int(E, 5).val() == 2);
  auto ipi = pi.inv();
  CHECK(ipi.val() == -1);
  CHECK((pi * ipi).eq_upto(Scalar::one(E), 14));
  auto mix = Scalar::from_int(E, 3) + pi;
  CHECK(mix.val() == 0);
}

TEST_CASE("field lifting and reduction") {
  auto F = Field::make_Qp(5, 8);
  auto G = F->lifted(4);
  CHECK(G->N == 12);
  auto a = Scalar::from_int(F, 7);
  auto al = a.to_field(G);
  CHECK(al.prec == 12);  // integer provenance re-certifies all digits
  auto c = a.inv();      // computed value: lifting cannot add digits
  auto cl = c.to_field(G);
  CHECK(cl.prec == 8);
  auto back = cl.to_field(F);
  CHECK(back.eq_upto(c, 8));
  CHECK((al * Scalar::from_int(G, 7).inv()).eq_upto(Scalar::one(G), 12));
}

TEST_CASE("residue extraction") {
  auto F = Field::make_Qp(5, 8);
  CHECK(Scalar::from_int(F, 17).residue(8) == 17);
  CHECK(Scalar::from_int(F, 17).residue(1) == 2);
  CHECK(Scalar::from_int(F, 50).residue(8) == 50);
  CHECK_THROWS_AS(Scalar::from_rational(F, 1, 5).residue(8),
                  PrecisionExhausted);
}

TEST_CASE("scalar parsing") {
  auto F = Field::make_Qp(5, 8);
  CHECK(Scalar::parse(F, "17 mod 5^8").eq_upto(Scalar::from_int(F, 17), 8));
  CHECK(Scalar::parse(F, "-3").eq_upto(Scalar::from_int(F, -3), 8));
  CHECK(Scalar::parse(F, "1/25").val() == -2);
  CHECK(Scalar::parse(F, "1/5^2 mod 5^6").val() == -2);
  CHECK_THROWS_AS(Scalar::parse(F, "seven"), FormatError);
  CHECK_THROWS_AS(Scalar::parse(F, ""), FormatError);
}

TEST_CASE("pascal table matches direct binomials") {
  auto F = Field::make_Qp(7, 6);
  PascalTable T(F, 40);
  CHECK(T.binom(10, 4) == 210);
  CHECK(T.binom(40, 1) == 40);
  CHECK(T.binom(7, 3) == 35);
  CHECK(T.binom(3, 5) == 0);
  u64 acc = 0;
  for (int k = 0; k <= 20; ++k) acc = F->add(acc, T.binom(20, k));
  CHECK(acc == F->powu(2, 20));
}
