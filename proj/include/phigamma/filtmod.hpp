#pragma once

#include <optional>
#include <string>
#include <vector>

#include "phigamma/padic.hpp"

namespace phig {

// Filtered phi-module over the coefficient field, dimension 1 or 2.
// phi is stored column-by-column: phi(e_j) = sum_i phi_at(i, j) e_i.
// The filtration has the two-jump shape
//   Fil^i = D          for i <= j_lo,
//   Fil^i = E * delta  for j_lo < i <= j_hi,
//   Fil^i = 0          for i >  j_hi,
// with j_lo == j_hi in dimension 1 (single jump, no line).
struct FilteredPhiModule {
  FieldHandle F;
  int dim = 1;
  std::vector<Scalar> phi;    // dim*dim entries, row-major
  int j_lo = 0, j_hi = 0;
  std::vector<Scalar> delta;  // dim entries when dim == 2

  // Genericity is recorded, not enforced: downstream constants divide by
  // (1 - alpha/p*beta), so callers ask before they leap.
  bool alpha_ne_beta = true;
  bool alpha_ne_pbeta = true;

  // Construction memo for serialization ("ab", "kap", "dim1").
  std::string kind = "dim1";
  std::optional<Scalar> par_alpha, par_beta, par_ap, par_c;
  int par_k = 0, par_case = 0, par_twist = 0;

  const Scalar& phi_at(int i, int j) const { return phi[size_t(i) * dim + j]; }
  Scalar& phi_at(int i, int j) { return phi[size_t(i) * dim + j]; }
  Scalar det_phi() const;
  Scalar tr_phi() const;
  int k() const { return j_hi - j_lo + 1; }
};

// Newton invariant: valuation of det(phi), as a fraction in p-units.
Rat tN(const FilteredPhiModule& D);
// Hodge invariant: sum of the filtration jumps.
long long tH(const FilteredPhiModule& D);

struct AdmissibilityReport {
  bool admissible = false;
  std::string witness;  // violating line or invariant when not admissible
};
AdmissibilityReport is_admissible(const FilteredPhiModule& D);

enum class Classification {
  absolutely_irreducible,
  reducible_nonsplit,
  reducible_split,
};
std::string classification_name(Classification c);

// Three-way split of admissible rank-2 modules with distinct jumps by the
// line valuations and the position of delta.
Classification classify(const FilteredPhiModule& D);

// Rank 1: phi(e) = c * e with the single jump at `jump`.
FilteredPhiModule make_dim1(const FieldHandle& F, const Scalar& c, int jump);

// Diagonal rank 2: phi(e_a) = alpha^{-1} e_a, phi(e_b) = beta^{-1} e_b,
// jumps (-(k-1), 0).  The case number picks the line: 1 and 2 take
// delta = e_a + e_b, 3 takes delta = e_b.  Requires val(alpha) +
// val(beta) = k - 1.
FilteredPhiModule make_Dab(const FieldHandle& F, const Scalar& alpha,
                           const Scalar& beta, int k, int casenum);

// Companion-shaped rank 2: phi(e_1) = p^{k-1} e_2, phi(e_2) = -e_1 + ap e_2,
// jumps (0, k-1), line on e_1.
FilteredPhiModule make_Dkap(const FieldHandle& F, int k, const Scalar& ap);

// Tensor by the rank-1 twist of weight n: jumps drop by n and phi picks up
// p^{-n}, which preserves admissibility degreewise.
FilteredPhiModule twist(const FilteredPhiModule& D, int n);

std::string to_text(const FilteredPhiModule& D);
FilteredPhiModule parse_filtmod(const std::string& text);

}  // namespace phig
