#pragma once

#include <string>
#include <utility>
#include <vector>

#include "phigamma/wach.hpp"

namespace phig {

// ---------------------------------------------------------------------------
// Perturbing the Frobenius of a module and rebuilding the loop action.
//
// Writing G = Id + X G_1 + ... for the loop matrix and H = H_0 + X H_1 + ...
// for the perturbation, the conjugation condition
//   (Id+H)^{-1} G gamma(Id+H) == G  mod X^{k-1}
// pins the constant matrices H_r one degree at a time: the degree-r
// coefficient of H G - G gamma(H) contains H_r only through the factor
// (1 - eps^r), eps the image of the loop generator under the cyclotomic
// character.  Each step therefore divides by (1 - eps^r), and the total
// certified-precision cost of the solve is alpha(k-1) = sum val(1 - eps^r).

// alpha(r) in pi-units; eps defaults to 1 + p, the loop generator exponent.
int alpha_bound(const FieldHandle& F, int r);
int alpha_bound(const FieldHandle& F, int r, const Scalar& eps);

struct SolveStep {
  int r = 0;            // X-degree solved at this step
  int divisor_val = 0;  // val(1 - eps^r)
  int min_entry_val = 0;  // smallest val_lb over the H_r entries (INF: zero)
};

struct SolveReport {
  SeriesMat H;  // H_0 + X H_1 + ... + X^{k-1} H_{k-1}
  std::vector<SolveStep> ledger;
  int total_loss = 0;        // sum of divisor_val, equals alpha(k-1)
  int condition_window = 0;  // pi-precision at which condition (2) is checked
};

// Degree-by-degree solve.  Only the mod-X class of H0 enters; the solved
// H_r must keep valuation >= C or PrecisionExhausted is raised.  On return
// the conjugation condition has been re-verified mod X^{k-1} at the
// precision the ledger supports.
SolveReport solve_H(const SeriesMat& G, const SeriesMat& H0, int k, int C);

// Input bundle for the perturbation: seed module with weight span k-1 and
// a perturbation whose entries carry valuation >= alpha(k-1) + C.  The
// factory enforces that budget; solve_H itself only charges the divisions
// that actually occur, so instances below the generic budget may still
// succeed when their commutators carry extra divisibility.
struct PerturbationProblem {
  WachModule seed;
  SeriesMat H0;
  int C = 0;
  int k = 0;
};
PerturbationProblem make_perturbation(const WachModule& seed,
                                      const SeriesMat& H0, int C, int k);
SolveReport solve_H(const PerturbationProblem& prob);

// Fixed-point construction of a loop matrix for Q = (Id+H) P, iterating
// G' <- Q phi(G') gamma(Q)^{-1} from the seed G.  The update is carried in
// difference form: D = X^h M with h the weight span, and
//   M <- Q phi(M) adj(gamma(P)) gamma(Id+H)^{-1} (w/phi(w))^h gamma(u)^{-1}
// cancels the q^h in det(gamma(Q)) exactly (w = gamma(X)/X), so every
// iterate is built from unit inversions only.  The residual
// Q phi(G') - G' gamma(Q) is recomputed directly each round; its combined
// valuation (X-degree in e-units plus coefficient valuation) is recorded in
// `trace` and must improve monotonically, strictly over any two consecutive
// rounds.  Convergence means every residual coefficient below X^K vanishes
// within pi^((N - budget) e).  A stalled trace, a seed residual that is not
// divisible by X^h at that tolerance, or exhaustion of max_iter raises
// NoConvergence.
struct GammaFit {
  SeriesMat G;
  std::vector<int> trace;
  int iterations = 0;
};
GammaFit build_gamma(const WachModule& seed, const SeriesMat& H, int budget,
                     int max_iter = 64);

// The lifted module for the Frobenius trace ap on the weight-(k-1) seed:
// perturbs P = [[0, -1], [q^{k-1}, 0]] by H_0 = [[0, 0], [-ap, 0]], solves
// for H, rebuilds the loop action, and validates the result: the quotient
// by X must carry Frobenius with char poly X^2 - ap X + p^{k-1} and
// filtration jumps {0, k-1}.  ap = 0 returns the seed itself.
struct NkapBuild {
  WachModule W;
  SolveReport solve;
  GammaFit fit;
};
NkapBuild construct_Nkap_full(const FieldHandle& F, int k, const Scalar& ap,
                              int K);
WachModule construct_Nkap(const FieldHandle& F, int k, const Scalar& ap,
                          int K);

// Entrywise reduction of (P, G) to F_p[X]/(X^K); base field only.
struct ModpMatrices {
  u64 p = 0;
  int d = 0;
  int K = 0;
  std::vector<std::vector<u64>> P, G;  // row-major entries, K residues each
};
ModpMatrices reduce_mod_p(const WachModule& W);
// Equality of the reductions on the common window.  Matrix-level equality
// certifies "same module mod p" for lifts whose basis change is trivial
// mod p; it never claims an isomorphism beyond that.
bool compare_mod_p(const WachModule& A, const WachModule& B);

// ---------------------------------------------------------------------------
// Symbolic mod-p labels and the reduction tables.
//
// Characters of Q_p^* with values in the quadratic extension of F_p are
// written omega^s unr(c): omega is the mod-p cyclotomic character, unr(c)
// sends Frobenius to c, and the quadratic unramified character is unr(-1).
// The two-dimensional labels are rho(r, eta) on the Galois side, with the
// convention that the level-2 fundamental character appears with exponent
// r + 1 (the convention under which rho(r, eta) = rho(p-1-r, eta omega^r)
// is exactly Frobenius conjugation), and pi(r, lambda, eta) on the other
// side, together with the special and one-dimensional families.

// F_{p^2} = F_p[t]/(t^2 - nqr), nqr the least quadratic non-residue.
struct Fp2 {
  u64 a = 0, b = 0;
  bool operator==(const Fp2&) const = default;
};

class Fp2Field {
 public:
  u64 p = 0, nqr = 0;

  explicit Fp2Field(u64 p);

  Fp2 make(u64 a, u64 b = 0) const;
  Fp2 from_ll(long long v) const;
  bool is_zero(const Fp2& x) const { return x.a == 0 && x.b == 0; }
  Fp2 add(const Fp2& x, const Fp2& y) const;
  Fp2 sub(const Fp2& x, const Fp2& y) const;
  Fp2 neg(const Fp2& x) const;
  Fp2 mul(const Fp2& x, const Fp2& y) const;
  Fp2 inv(const Fp2& x) const;  // InvalidLabel on zero
  // Square root of a prime-field element; always lands in F_{p^2}.
  Fp2 sqrt_base(u64 c) const;
  // The two roots of x^2 - t x + 1 over F_{p^2}, smaller first.
  std::pair<Fp2, Fp2> unit_quad_roots(u64 t) const;
  bool less(const Fp2& x, const Fp2& y) const;
  std::string str(const Fp2& x) const;
};

// omega^s unr(c) with s reduced mod p-1 and c nonzero.
struct CharLabel {
  int s = 0;
  Fp2 c;
  bool operator==(const CharLabel&) const = default;
};
CharLabel char_make(const Fp2Field& Q, long long s, const Fp2& c,
                    bool mu_minus1 = false);
CharLabel char_mul(const Fp2Field& Q, const CharLabel& x, const CharLabel& y);
CharLabel char_inv(const Fp2Field& Q, const CharLabel& x);
std::string char_str(const Fp2Field& Q, const CharLabel& x);

enum class PiKind { principal, special, one_dimensional };

// principal: pi(r, lambda, eta); special: Sp (x) (eta o det);
// one_dimensional: eta o det.
struct PiLabel {
  PiKind kind = PiKind::principal;
  int r = 0;
  Fp2 lambda;
  CharLabel eta;
  bool operator==(const PiLabel&) const = default;
};

// Irreducible rho(r, eta), or a split sum chi1 (+) chi2 of characters.
struct ModpRep {
  bool irreducible = true;
  int r = 0;
  CharLabel eta;
  CharLabel chi1, chi2;
  bool operator==(const ModpRep&) const = default;
};

// Canonical representatives.  For lambda = 0 and on the Galois side the
// twist identities
//   (r, eta) ~ (r, eta unr(-1)) ~ (p-1-r, eta omega^r)(unr(-1)^{0,1})
// are minimized lexicographically; nonzero lambda carries no listed
// identification.  Split sums are stored with their characters sorted.
PiLabel pi_normal_form(const Fp2Field& Q, const PiLabel& x);
ModpRep rho_normal_form(const Fp2Field& Q, const ModpRep& x);
std::string pi_str(const Fp2Field& Q, const PiLabel& x);
std::string rho_str(const Fp2Field& Q, const ModpRep& x);

// ind(omega_2^s) (x) eta as a normalized ModpRep.  Exponents above p split
// off cyclotomic twists; s divisible by p+1 is reducible and rejected.
ModpRep ind_omega2(const Fp2Field& Q, long long s, const CharLabel& eta);

// The mod-p dictionary.  A single pi(r, 0, eta) matches rho(r, eta); a
// semisimplified pair { pi(r, lambda, eta), pi([p-3-r], 1/lambda,
// omega^{r+1} eta) } with lambda != 0 matches the split sum
// unr(1/lambda) omega^{r+1} eta (+) unr(lambda) eta, where [x] reduces into
// {0..p-2}.  A lone nonzero-lambda label raises NeedsBothSides; any other
// shape raises InvalidLabel.  The reverse direction resolves the sign of
// lambda (a square root) lexicographically and requires the unramified
// ratio of the two characters to lie in the prime field.
ModpRep corr_pi_to_rho(const Fp2Field& Q, const std::vector<PiLabel>& pieces);
std::vector<PiLabel> corr_rho_to_pi(const Fp2Field& Q, const ModpRep& rep);

// Reduction-behavior tables for the weight-k Frobenius-trace family, keyed
// by val(ap) (and the unit residue ap_unit of ap/p^{val} where a boundary
// row needs it).  predict_Pibar returns the semisimple pieces on the
// automorphic side; predict_Vbar the Galois side.  Cells outside the
// tabulated strip raise OutOfTableRange; p = 2 is not modeled.
std::vector<PiLabel> predict_Pibar(u64 p, int k, const Rat& val_ap,
                                   u64 ap_unit = 0);
ModpRep predict_Vbar(u64 p, int k, const Rat& val_ap);

}  // namespace phig
