#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>

#include "phigamma/linalg.hpp"

using namespace phig;

namespace {

ModMat random_mat(const FieldHandle& F, std::mt19937_64& rng, int nr,
                  int nc) {
  std::uniform_int_distribution<u64> d(0, F->pN - 1);
  ModMat M(F, nr, nc);
  for (auto& x : M.a) x = d(rng);
  return M;
}

// Every vector of the row span by brute enumeration of the coefficients.
// Only for matrices where pN^nr is tiny.
std::set<std::vector<u64>> enumerate_span(const ModMat& A) {
  const auto& F = *A.F;
  std::set<std::vector<u64>> S;
  std::vector<u64> c(A.nr, 0);
  while (true) {
    std::vector<u64> v(A.nc, 0);
    for (int i = 0; i < A.nr; ++i)
      for (int j = 0; j < A.nc; ++j)
        v[j] = F.add(v[j], F.mul(c[i], A.at(i, j)));
    S.insert(v);
    int i = 0;
    for (; i < A.nr; ++i) {
      if (++c[i] < F.pN) break;
      c[i] = 0;
    }
    if (i == A.nr) break;
  }
  return S;
}

// Random span-preserving rewrite: unit row scalings, cross additions, row
// swaps, appended combinations.
ModMat shuffled(const ModMat& A, std::mt19937_64& rng) {
  const auto& F = *A.F;
  ModMat M = A;
  std::uniform_int_distribution<u64> d(0, F.pN - 1);
  for (int step = 0; step < 25; ++step) {
    if (M.nr == 0) break;
    std::uniform_int_distribution<int> pick(0, M.nr - 1);
    int i = pick(rng), j = pick(rng);
    switch (step % 4) {
      case 0:
        for (int c = 0; c < M.nc; ++c) std::swap(M.at(i, c), M.at(j, c));
        break;
      case 1: {
        u64 u = d(rng);
        if (u % F.p == 0) u += 1;
        for (int c = 0; c < M.nc; ++c) M.at(i, c) = F.mul(M.at(i, c), u);
        break;
      }
      case 2: {
        if (i == j) break;
        u64 x = d(rng);
        for (int c = 0; c < M.nc; ++c)
          M.at(i, c) = F.add(M.at(i, c), F.mul(x, M.at(j, c)));
        break;
      }
      case 3: {
        std::vector<u64> r(M.nc, 0);
        for (int s = 0; s < M.nr; ++s) {
          u64 x = d(rng);
          for (int c = 0; c < M.nc; ++c)
            r[c] = F.add(r[c], F.mul(x, M.at(s, c)));
        }
        M.append_row(r);
        break;
      }
    }
  }
  return M;
}

std::vector<u64> mul_row(const ModMat& A, const std::vector<u64>& x) {
  const auto& F = *A.F;
  std::vector<u64> b(A.nc, 0);
  for (int i = 0; i < A.nr; ++i)
    for (int j = 0; j < A.nc; ++j)
      b[j] = F.add(b[j], F.mul(x[i], A.at(i, j)));
  return b;
}

}  // namespace

TEST_CASE("howell form is canonical under span-preserving rewrites") {
  auto F = Field::make_Qp(5, 3);
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 30; ++trial) {
    auto A = random_mat(F, rng, 3, 4);
    // Salt with p-divisible rows so nontrivial pivot valuations occur.
    for (int j = 0; j < A.nc; ++j)
      A.at(1, j) = F->mul(A.at(1, j), F->ppow(trial % 3));
    auto h1 = howell(A);
    auto h2 = howell(shuffled(A, rng));
    CHECK(h1.same_span(h2));
    CHECK(h1.H == h2.H);
    CHECK(h1.pivot_col == h2.pivot_col);
    CHECK(h1.pivot_val == h2.pivot_val);
  }
}

TEST_CASE("membership and span size agree with brute enumeration") {
  auto F = Field::make_Qp(3, 2);
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    auto A = random_mat(F, rng, 2, 3);
    auto S = enumerate_span(A);
    auto hf = howell(A);
    long long expect = 1;
    for (int i = 0; i < hf.span_logsize(); ++i) expect *= 3;
    CHECK((long long)S.size() == expect);
    std::vector<u64> v(3, 0);
    for (v[0] = 0; v[0] < 9; ++v[0])
      for (v[1] = 0; v[1] < 9; ++v[1])
        for (v[2] = 0; v[2] < 9; ++v[2])
          CHECK(hf.contains(v) == (S.count(v) > 0));
  }
}

TEST_CASE("kernel rows annihilate and the sizes are complementary") {
  auto F = Field::make_Qp(5, 4);
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    int nr = 2 + (trial % 3), nc = 2 + (trial % 4);
    auto A = random_mat(F, rng, nr, nc);
    if (trial % 2)
      for (int j = 0; j < nc; ++j) A.at(0, j) = F->mul(A.at(0, j), F->p);
    auto K = left_kernel(A);
    for (int i = 0; i < K.nr; ++i) {
      auto b = mul_row(A, K.row(i));
      for (u64 x : b) CHECK(x == 0);
    }
    auto hA = howell(A);
    auto hK = howell(K);
    CHECK(hA.span_logsize() + hK.span_logsize() == (long long)F->N * nr);
  }
}

TEST_CASE("solver produces certificates and rejects outsiders") {
  auto F = Field::make_Qp(5, 3);
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<u64> d(0, F->pN - 1);
  for (int trial = 0; trial < 20; ++trial) {
    auto A = random_mat(F, rng, 3, 3);
    for (int j = 0; j < A.nc; ++j) A.at(2, j) = F->mul(A.at(2, j), F->p);
    std::vector<u64> x0(A.nr);
    for (auto& c : x0) c = d(rng);
    auto b = mul_row(A, x0);
    auto x = solve_left(A, b);
    REQUIRE(x.has_value());
    CHECK(mul_row(A, *x) == b);
  }
  // A pivot with positive valuation leaves p^(v-1) * e_col outside.
  ModMat A(F, 2, 2);
  A.at(0, 0) = 1;
  A.at(0, 1) = 3;
  A.at(1, 0) = 0;
  A.at(1, 1) = F->ppow(2);
  auto hf = howell(A);
  REQUIRE(hf.pivot_val[1] == 2);
  CHECK_FALSE(hf.contains({0, F->ppow(1)}));
  CHECK(hf.contains({0, F->ppow(2)}));
  CHECK_FALSE(solve_left(A, {0, F->ppow(1)}).has_value());
}

TEST_CASE("hand-checked forms and kernels") {
  auto F = Field::make_Qp(5, 3);
  ModMat A(F, 2, 2);
  A.at(0, 0) = 5;
  A.at(1, 1) = 1;
  auto hf = howell(A);
  REQUIRE(hf.rank() == 2);
  CHECK(hf.H.at(0, 0) == 5);
  CHECK(hf.H.at(0, 1) == 0);
  CHECK(hf.H.at(1, 0) == 0);
  CHECK(hf.H.at(1, 1) == 1);
  CHECK_FALSE(hf.contains({1, 0}));
  CHECK(hf.contains({10, 0}));

  // x * (p^2) = 0 in Z/p^3 exactly when p | x.
  ModMat B(F, 1, 1);
  B.at(0, 0) = 25;
  auto K = left_kernel(B);
  REQUIRE(K.nr == 1);
  CHECK(K.at(0, 0) == 5);

  // Unit scalings collapse to the same canonical row.
  ModMat C1(F, 1, 2), C2(F, 1, 2);
  C1.at(0, 0) = 10;
  C1.at(0, 1) = 35;
  C2.at(0, 0) = 30;
  C2.at(0, 1) = 105 % F->pN;
  CHECK(howell(C1).H == howell(C2).H);

  // Column convention round trip.
  ModMat D(F, 2, 2);
  D.at(0, 0) = 2;
  D.at(0, 1) = 1;
  D.at(1, 0) = 0;
  D.at(1, 1) = 5;
  auto x = solve_right(D, {7, 10});
  REQUIRE(x.has_value());
  CHECK(F->add(F->mul(D.at(0, 0), (*x)[0]), F->mul(D.at(0, 1), (*x)[1])) ==
        7);
  CHECK(F->add(F->mul(D.at(1, 0), (*x)[0]), F->mul(D.at(1, 1), (*x)[1])) ==
        10);
}
