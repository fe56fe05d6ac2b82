#pragma once

#include <optional>
#include <vector>

#include "phigamma/padic.hpp"

namespace phig {

// Dense matrix over the chain ring Z/p^N, entries stored as canonical
// residues.  Rows are the natural unit: spans, normal forms, kernels and
// solvers all speak about the row module.
class ModMat {
 public:
  FieldHandle F;
  int nr = 0, nc = 0;
  std::vector<u64> a;

  ModMat() = default;
  ModMat(const FieldHandle& F, int nr, int nc);
  static ModMat identity(const FieldHandle& F, int n);
  static ModMat from_rows(const FieldHandle& F,
                          const std::vector<std::vector<u64>>& rows, int nc);

  u64& at(int i, int j) { return a[size_t(i) * nc + j]; }
  u64 at(int i, int j) const { return a[size_t(i) * nc + j]; }
  std::vector<u64> row(int i) const;
  void append_row(const std::vector<u64>& r);
  ModMat transposed() const;

  bool operator==(const ModMat& o) const;
  bool operator!=(const ModMat& o) const { return !(*this == o); }
};

// Canonical row form over Z/p^N.  Pivots are plain powers of p (the unit
// part is normalized away), pivot columns strictly increase, entries below
// a pivot vanish and entries above are reduced modulo the pivot.  The form
// is span-closed: p^(N-v) times a pivot row lies in the span of the later
// rows, which makes greedy reduction a sound membership test and makes two
// row spans equal exactly when their forms are identical.
class HowellForm {
 public:
  ModMat H;
  std::vector<int> pivot_col;
  std::vector<int> pivot_val;

  int rank() const { return (int)pivot_col.size(); }
  // log_p of the number of elements of the row span.
  long long span_logsize() const;
  bool contains(const std::vector<u64>& v) const;
  bool contains(const ModMat& rows) const;
  bool same_span(const HowellForm& o) const { return H == o.H; }
};

HowellForm howell(const ModMat& A);

// Generators of { x : x A = 0 }, returned in canonical form.
ModMat left_kernel(const ModMat& A);

// One solution of x A = b (row convention), if any.
std::optional<std::vector<u64>> solve_left(const ModMat& A,
                                           const std::vector<u64>& b);
// One solution of A x = b (column convention), if any.
std::optional<std::vector<u64>> solve_right(const ModMat& A,
                                            const std::vector<u64>& b);

}  // namespace phig
