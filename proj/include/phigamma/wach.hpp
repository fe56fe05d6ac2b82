#pragma once

#include <string>
#include <utility>
#include <vector>

#include "phigamma/filtmod.hpp"
#include "phigamma/linalg.hpp"
#include "phigamma/series.hpp"

namespace phig {

// Free lattice of rank d over the truncated series ring, with commuting
// semilinear Frobenius and loop actions.  phi is stored through its matrix P
// (column j holds the coordinates of phi(n_j)), the loop action through G for
// the fixed generator gamma sending 1+X to (1+X)^(1+p).  Weights lie in
// [wa, wb] with wb <= 0, so P is entire and det(P) = u * q^h with h = wb - wa
// and u a unit; u, its inverse and the adjugate of P are cached because every
// psi-type computation runs through them.
//
// The same matrix data supports a second reading in which the basis is
// rescaled by X^h.  In the stored reading psi_module is the exact left
// inverse of phi and may create poles of order up to h; in the rescaled
// reading the lattice is psi-stable, and psi_stable computes that operator
// on the shared coordinates.  The two agree when h = 0.
struct WachModule {
  FieldHandle F;
  int d = 1;
  int K = 0;            // X-window of the stored matrices
  int wa = 0, wb = 0;   // weight interval, wb <= 0
  int h = 0;            // wb - wa, the q-power carried by det(P)
  long long gamma_a = 0;  // exponent of the loop generator, always 1 + p
  SeriesMat P;          // entire polynomial entries
  SeriesMat G;          // congruent to the identity mod X
  Series u;             // det(P) / q^h, a unit
  Series u_inv;
  SeriesMat Padj;       // adjugate of P
  bool u_is_one = false;
};

// Built-in families.  qp_twist is the rank-1 module of the r-th cyclotomic
// twist in its X^{-r}-rescaled shape (r <= 0), with P = (q^{-r}) and
// G = ((gamma(X)/X)^{-r} (1+p)^r).  ap_zero is the rank-2 module with
// P = [[0, -1], [q^{k-1}, 0]] and G diagonal in the halves of the loop
// ratio; supersingular_k2 is its k = 2 member.
WachModule wach_qp_twist(const FieldHandle& F, int r, int K);
WachModule wach_supersingular_k2(const FieldHandle& F, int K);
WachModule wach_ap_zero(const FieldHandle& F, int k, int K);
// Dispatcher over the family labels "qp-twist" (param = r), "ap-zero"
// (param = k) and "supersingular-k2" (param ignored).
WachModule wach_example(const FieldHandle& F, const std::string& kind,
                        int param, int K);
// Assemble and validate a module from explicit matrices: det(P) must divide
// out as unit * q^(wb-wa) (otherwise NotFiniteHeightShape) and G must be the
// identity mod X (otherwise UnsupportedCase).
WachModule wach_from_parts(const FieldHandle& F, const SeriesMat& P,
                           const SeriesMat& G, int wa, int wb, int K);

// phi^m applied to gamma(X)/X, expanded exactly as the geometric sum
// 1 + sum_{i=1..p} (1+X)^{i p^m} on the window [0, Kw).
Series phi_iter_w(const FieldHandle& F, int m, int Kw);
// Even and odd halves of the loop ratio of t/X: returns (w_plus, w_minus)
// with w_minus = prod_{m even} phi^m(w)/phi^{m+1}(w) and w_plus the odd
// product, factors appended until the next one is 1 within (pi^(N e), X^Kw).
// They satisfy phi(w_minus) = w_plus and q phi(w_plus) = w_minus gamma(q)
// within the same ideal, which is what the commutation check consumes.
std::pair<Series, Series> gamma_ratio_halves(const FieldHandle& F, int Kw);

struct CommutationReport {
  bool ok = false;
  int window = 0;        // X-degrees [0, window) were compared
  int defect_degree = -1;  // earliest degree with a certified nonzero entry
  SeriesMat residual;      // P phi(G) - G gamma(P)
};
// Recomputes both sides of the commutation identity P phi(G) = G gamma(P)
// and reports where the difference fails to vanish within pi^tol
// (default: the full working precision N e).
CommutationReport verify_commutation(const WachModule& W, int tol = -1);

// Coordinate action of phi: P * phi(v).
std::vector<Series> phi_module(const WachModule& W,
                               const std::vector<Series>& v);
// Coordinate action of the loop generator: G * gamma(v).
std::vector<Series> gamma_module(const WachModule& W,
                                 const std::vector<Series>& v);
// psi of the element with coordinates v, in the stored reading: with
// z = adj(P) u^{-1} v, coordinate i of the result is X^{-h} psi(X^h z_i).
// Left inverse of phi_module at the working precision; poles of order up
// to h can appear.
std::vector<Series> psi_module(const WachModule& W,
                               const std::vector<Series>& v);
// psi in the X^h-rescaled reading, where the lattice is psi-stable:
// coordinate i of the result is psi(z_i).  Integral input, integral output.
std::vector<Series> psi_stable(const WachModule& W,
                               const std::vector<Series>& v);

// Z/p^N-module of coordinate vectors over the Laurent window [-off, Kc),
// closed under multiplication by X (shifts are materialized as extra rows
// and the top degree truncates away).  The canonical row form makes span
// equality and membership decidable.  Base field only.
class SubmoduleSpan {
 public:
  FieldHandle F;
  int d = 0, off = 0, Kc = 0;
  HowellForm nf;

  // Spans the X-shift closure of the given coordinate vectors.  Every
  // coefficient in the window must be integral, reliable and carried at
  // full precision.
  static SubmoduleSpan from_vectors(const FieldHandle& F, int d, int off,
                                    int Kc,
                                    const std::vector<std::vector<Series>>& v);
  int rows() const { return nf.rank(); }
  long long logsize() const { return nf.span_logsize(); }
  // Exact Laurent-polynomial coordinates of one normal-form row.
  std::vector<Series> lift_row(int i) const;
  bool contains_vector(const std::vector<Series>& v) const;
  bool contains(const SubmoduleSpan& o) const;
  bool same(const SubmoduleSpan& o) const;
};

// The i-th filtration step { x : phi(x) in q^i N } as a span over the
// truncated ring (the full module when i <= 0).  Membership is solved in
// the window [0, Kc); vectors supported near the top of the window may slip
// in, which the degree-zero reduction below is insensitive to.
SubmoduleSpan fil_on_N(const WachModule& W, int i, int Kc);

// Quotient by X: Frobenius P(0) together with the filtration jumps read off
// the degree-zero images of fil_on_N, as a filtered module.  For rank 2 the
// filtration line is extracted from the top jump, which must be free.
FilteredPhiModule reduce_mod_X(const WachModule& W);

// Compares psi on X^{-1}N/N, transported through X^{-1} y -> y and computed
// with psi_stable, against the inverse of the rescaled-reading Frobenius
// p^{-h} P(0); the comparison is adj(P)(0) u(0)^{-1} entrywise mod
// p^(N-guard).
bool psi_on_quotient_check(const WachModule& W, int guard = 0);

struct StabilizeResult {
  SubmoduleSpan span;
  int iterations = 0;
  // Set when the module is visibly indecomposable (rank 2 with both
  // off-diagonal P entries certified nonzero); a module with a rank-1
  // quotient admits several stable lattices, so the result is marked
  // non-unique.
  bool unique_certified = false;
};
// Iterates the union span S -> S + psi_module(X^s * rows(S), s < p)
// starting from X^hh N inside the pole budget X^{-hh}, reducing every step
// to normal form, until the span repeats.  NoStabilization after max_iter
// (default 4K) iterations; the window must satisfy Kc >= p (2 hh + 1) + hh
// so that top-of-window truncation junk stays inside the starting lattice.
StabilizeResult d0_stabilize(const WachModule& W, int hh, int Kc,
                             int max_iter = -1);

struct EigenBasis {
  SeriesMat M;        // column lambda holds the coordinates of e_lambda
  Scalar alpha, beta;
  Scalar det0;            // det(M) at X = 0, certified nonzero
  int residual_floor = 0;  // pi-precision at which both residuals vanish
};
// Solves P phi(m) = lambda m degree by degree for lambda in {alpha, beta},
// seeding with an eigenvector of P(0).  Each degree s >= 1 divides by
// det(lambda - p^s P(0)); a precision-zero value there raises
// SingularRecursion.  The assembled columns are re-verified against the
// eigen equation; failure to certify raises NoConvergence.
EigenBasis rig_eigenbasis(const WachModule& W, const Scalar& alpha,
                          const Scalar& beta);

// Text form: a header with field, rank, weights and window, then the P and
// G blocks entry by entry with per-coefficient precision.
std::string to_text(const WachModule& W);
WachModule parse_wach(const std::string& text);

}  // namespace phig
