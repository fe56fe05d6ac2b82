#include "phigamma/linalg.hpp"

#include <algorithm>

namespace phig {

namespace {

bool row_zero(const std::vector<u64>& r) {
  for (u64 x : r)
    if (x) return false;
  return true;
}

// r -= c * s, entrywise mod p^N.
void row_axpy_sub(const Field& F, std::vector<u64>& r, u64 c,
                  const std::vector<u64>& s) {
  for (size_t j = 0; j < r.size(); ++j)
    r[j] = F.sub(r[j], F.mul(c, s[j]));
}

void row_scale(const Field& F, std::vector<u64>& r, u64 c) {
  for (auto& x : r) x = F.mul(x, c);
}

}  // namespace

ModMat::ModMat(const FieldHandle& Fh, int nrows, int ncols)
    : F(Fh), nr(nrows), nc(ncols), a(size_t(nrows) * ncols, 0) {
  if (F->ext != ExtKind::none)
    throw UnsupportedCase("chain ring matrices live over Z/p^N, base field only");
}

ModMat ModMat::identity(const FieldHandle& F, int n) {
  ModMat M(F, n, n);
  for (int i = 0; i < n; ++i) M.at(i, i) = 1;
  return M;
}

ModMat ModMat::from_rows(const FieldHandle& F,
                         const std::vector<std::vector<u64>>& rows, int nc) {
  ModMat M(F, (int)rows.size(), nc);
  for (size_t i = 0; i < rows.size(); ++i) {
    if ((int)rows[i].size() != nc)
      throw UnsupportedCase("row length does not match the column count");
    for (int j = 0; j < nc; ++j) M.at((int)i, j) = rows[i][j] % F->pN;
  }
  return M;
}

std::vector<u64> ModMat::row(int i) const {
  return std::vector<u64>(a.begin() + size_t(i) * nc,
                          a.begin() + size_t(i + 1) * nc);
}

void ModMat::append_row(const std::vector<u64>& r) {
  if ((int)r.size() != nc)
    throw UnsupportedCase("row length does not match the column count");
  for (u64 x : r) a.push_back(x % F->pN);
  ++nr;
}

ModMat ModMat::transposed() const {
  ModMat T(F, nc, nr);
  for (int i = 0; i < nr; ++i)
    for (int j = 0; j < nc; ++j) T.at(j, i) = at(i, j);
  return T;
}

bool ModMat::operator==(const ModMat& o) const {
  return F->same(*o.F) && nr == o.nr && nc == o.nc && a == o.a;
}

long long HowellForm::span_logsize() const {
  long long s = 0;
  for (int v : pivot_val) s += H.F->N - v;
  return s;
}

HowellForm howell(const ModMat& A) {
  const Field& F = *A.F;
  std::vector<std::vector<u64>> work;
  for (int i = 0; i < A.nr; ++i) {
    auto r = A.row(i);
    if (!row_zero(r)) work.push_back(std::move(r));
  }

  std::vector<std::vector<u64>> out;
  std::vector<int> pcol, pval;

  for (int col = 0; col < A.nc; ++col) {
    int best = -1, bestv = F.N;
    for (size_t i = 0; i < work.size(); ++i) {
      if (work[i][col] == 0) continue;
      int v = F.vp(work[i][col]);
      if (v < bestv) {
        bestv = v;
        best = (int)i;
      }
    }
    if (best < 0) continue;

    std::vector<u64> piv = std::move(work[best]);
    work.erase(work.begin() + best);
    row_scale(F, piv, F.inv_unit(F.divp(piv[col], bestv)));

    for (auto& w : work) {
      if (w[col] == 0) continue;
      row_axpy_sub(F, w, F.divp(w[col], bestv), piv);
    }
    work.erase(std::remove_if(work.begin(), work.end(), row_zero),
               work.end());

    if (bestv > 0) {
      std::vector<u64> closure = piv;
      row_scale(F, closure, F.ppow(F.N - bestv));
      if (!row_zero(closure)) work.push_back(std::move(closure));
    }

    out.push_back(std::move(piv));
    pcol.push_back(col);
    pval.push_back(bestv);
  }

  // Reduce entries above each pivot modulo the pivot power.
  for (size_t i = 0; i < out.size(); ++i) {
    u64 P = F.ppow(pval[i]);
    for (size_t j = 0; j < i; ++j) {
      u64 x = out[j][pcol[i]];
      if (x >= P) row_axpy_sub(F, out[j], x / P, out[i]);
    }
  }

  HowellForm hf;
  hf.H = ModMat(A.F, 0, A.nc);
  for (auto& r : out) hf.H.append_row(r);
  hf.pivot_col = std::move(pcol);
  hf.pivot_val = std::move(pval);
  return hf;
}

bool HowellForm::contains(const std::vector<u64>& v) const {
  const Field& F = *H.F;
  if ((int)v.size() != H.nc)
    throw UnsupportedCase("vector length does not match the column count");
  std::vector<u64> x = v;
  for (auto& e : x) e %= F.pN;
  for (int i = 0; i < rank(); ++i) {
    u64 e = x[pivot_col[i]];
    if (e == 0) continue;
    if (F.vp(e) < pivot_val[i]) return false;
    row_axpy_sub(F, x, F.divp(e, pivot_val[i]), H.row(i));
  }
  return row_zero(x);
}

bool HowellForm::contains(const ModMat& rows) const {
  for (int i = 0; i < rows.nr; ++i)
    if (!contains(rows.row(i))) return false;
  return true;
}

namespace {

// Howell form of [A | I]: each returned row (R, T) satisfies R = T A, the
// invariant every span and solve routine below leans on.
HowellForm howell_augmented(const ModMat& A) {
  ModMat aug(A.F, A.nr, A.nc + A.nr);
  for (int i = 0; i < A.nr; ++i) {
    for (int j = 0; j < A.nc; ++j) aug.at(i, j) = A.at(i, j);
    aug.at(i, A.nc + i) = 1;
  }
  return howell(aug);
}

}  // namespace

ModMat left_kernel(const ModMat& A) {
  auto hf = howell_augmented(A);
  ModMat gens(A.F, 0, A.nr);
  for (int i = 0; i < hf.rank(); ++i) {
    if (hf.pivot_col[i] < A.nc) continue;
    auto full = hf.H.row(i);
    gens.append_row(std::vector<u64>(full.begin() + A.nc, full.end()));
  }
  return howell(gens).H;
}

std::optional<std::vector<u64>> solve_left(const ModMat& A,
                                           const std::vector<u64>& b) {
  const Field& F = *A.F;
  if ((int)b.size() != A.nc)
    throw UnsupportedCase("vector length does not match the column count");
  auto hf = howell_augmented(A);
  std::vector<u64> r = b;
  for (auto& e : r) e %= F.pN;
  std::vector<u64> x(A.nr, 0);
  for (int i = 0; i < hf.rank(); ++i) {
    if (hf.pivot_col[i] >= A.nc) break;
    u64 e = r[hf.pivot_col[i]];
    if (e == 0) continue;
    if (F.vp(e) < hf.pivot_val[i]) return std::nullopt;
    u64 d = F.divp(e, hf.pivot_val[i]);
    auto full = hf.H.row(i);
    for (int j = 0; j < A.nc; ++j) r[j] = F.sub(r[j], F.mul(d, full[j]));
    for (int j = 0; j < A.nr; ++j)
      x[j] = F.add(x[j], F.mul(d, full[A.nc + j]));
  }
  if (!row_zero(r)) return std::nullopt;
  return x;
}

std::optional<std::vector<u64>> solve_right(const ModMat& A,
                                            const std::vector<u64>& b) {
  return solve_left(A.transposed(), b);
}

}  // namespace phig
