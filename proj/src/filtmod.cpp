#include "phigamma/filtmod.hpp"

#include <map>
#include <numeric>
#include <sstream>

namespace phig {

namespace {

// With residues in play, "zero" can only ever mean "no certified nonzero
// digit"; exact zeros qualify trivially.
bool looks_zero(const Scalar& s) {
  return s.is_exact_zero() || s.is_prec_zero();
}

std::string rat_str(long long num, long long den) {
  return Rat::make(num, den).str();
}

struct EigenLine {
  int vpi = 0;          // pi-valuation of the eigenvalue
  bool is_delta = false;
  std::string label;
};

struct EigenData {
  bool scalar = false;    // phi acts by a scalar, every line is stable
  bool no_lines = false;  // characteristic polynomial has no root in F
  int scalar_vpi = 0;
  std::vector<EigenLine> lines;
};

bool delta_parallel(const FilteredPhiModule& D, const Scalar& w0,
                    const Scalar& w1) {
  return looks_zero(D.delta[0] * w1 - D.delta[1] * w0);
}

EigenLine make_line(const FilteredPhiModule& D, const Scalar& value,
                    const Scalar& w0, const Scalar& w1, const char* label) {
  EigenLine L;
  L.vpi = value.val();
  L.is_delta = delta_parallel(D, w0, w1);
  L.label = label;
  return L;
}

EigenData eigen_analysis(const FilteredPhiModule& D) {
  const auto& F = D.F;
  const Scalar &m00 = D.phi_at(0, 0), &m01 = D.phi_at(0, 1);
  const Scalar &m10 = D.phi_at(1, 0), &m11 = D.phi_at(1, 1);
  bool z01 = looks_zero(m01), z10 = looks_zero(m10);
  bool diag_equal = looks_zero(m00 - m11);

  EigenData E;
  if (z01 && z10) {
    if (diag_equal) {
      E.scalar = true;
      E.scalar_vpi = m00.val();
      return E;
    }
    E.lines.push_back(make_line(D, m00, Scalar::one(F), Scalar::zero(F),
                                "the first basis line"));
    E.lines.push_back(make_line(D, m11, Scalar::zero(F), Scalar::one(F),
                                "the second basis line"));
    return E;
  }
  if (z01 || z10) {
    if (diag_equal)
      throw NonSemisimplePhi("repeated eigenvalue on a non-scalar matrix");
    if (z10) {
      E.lines.push_back(make_line(D, m00, Scalar::one(F), Scalar::zero(F),
                                  "the first basis line"));
      E.lines.push_back(
          make_line(D, m11, m01, m11 - m00, "the complementary eigenline"));
    } else {
      E.lines.push_back(
          make_line(D, m00, m00 - m11, m10, "the complementary eigenline"));
      E.lines.push_back(make_line(D, m11, Scalar::zero(F), Scalar::one(F),
                                  "the second basis line"));
    }
    return E;
  }

  Scalar tr = D.tr_phi();
  Scalar disc = tr * tr - (D.det_phi() * Scalar::from_int(F, 4));
  if (looks_zero(disc))
    throw NonSemisimplePhi("vanishing discriminant on a non-diagonal matrix");
  if (F->ext != ExtKind::none)
    throw UnsupportedCase(
        "eigenline search over an extension field needs a triangular matrix");
  Scalar s;
  try {
    s = disc.sqrt();
  } catch (const NoSquareRoot&) {
    E.no_lines = true;
    return E;
  }
  Scalar half = Scalar::from_int(F, 2).inv();
  Scalar r1 = (tr + s) * half, r2 = (tr - s) * half;
  auto vec = [&](const Scalar& r, Scalar& w0, Scalar& w1) {
    if (!looks_zero(m01)) {
      w0 = m01;
      w1 = r - m00;
    } else {
      w0 = r - m11;
      w1 = m10;
    }
  };
  Scalar a0, a1, b0, b1;
  vec(r1, a0, a1);
  vec(r2, b0, b1);
  E.lines.push_back(make_line(D, r1, a0, a1, "the first eigenline"));
  E.lines.push_back(make_line(D, r2, b0, b1, "the second eigenline"));
  return E;
}

}  // namespace

Scalar FilteredPhiModule::det_phi() const {
  if (dim == 1) return phi[0];
  return phi_at(0, 0) * phi_at(1, 1) - phi_at(0, 1) * phi_at(1, 0);
}

Scalar FilteredPhiModule::tr_phi() const {
  if (dim == 1) return phi[0];
  return phi_at(0, 0) + phi_at(1, 1);
}

Rat tN(const FilteredPhiModule& D) {
  return Rat::make(D.det_phi().val(), D.F->e);
}

long long tH(const FilteredPhiModule& D) {
  if (D.dim == 1) return D.j_lo;
  return (long long)D.j_lo + D.j_hi;
}

AdmissibilityReport is_admissible(const FilteredPhiModule& D) {
  const int e = D.F->e;
  AdmissibilityReport rep;

  long long tNpi = D.det_phi().val();
  long long tHpi = (long long)e * tH(D);
  if (tNpi != tHpi) {
    rep.witness = "t_N(D) = " + rat_str(tNpi, e) + " differs from t_H(D) = " +
                  std::to_string(tH(D));
    return rep;
  }
  if (D.dim == 1) {
    rep.admissible = true;
    return rep;
  }

  auto fail_line = [&](const std::string& label, int vpi, int jump) {
    rep.witness = label + ": t_N = " + rat_str(vpi, e) +
                  " < t_H = " + std::to_string(jump);
  };

  EigenData E = eigen_analysis(D);
  if (E.scalar) {
    // Every line is stable and t_H takes exactly two values, so the two
    // extremes decide.
    if (E.scalar_vpi < (long long)e * D.j_hi) {
      fail_line("the filtration line", E.scalar_vpi, D.j_hi);
      return rep;
    }
    if (E.scalar_vpi < (long long)e * D.j_lo) {
      fail_line("any line off the filtration line", E.scalar_vpi, D.j_lo);
      return rep;
    }
    rep.admissible = true;
    return rep;
  }
  if (E.no_lines) {
    rep.admissible = true;
    return rep;
  }
  for (const auto& L : E.lines) {
    int jump = L.is_delta ? D.j_hi : D.j_lo;
    if (L.vpi < (long long)e * jump) {
      fail_line(L.label + (L.is_delta ? " (the filtration line)" : ""),
                L.vpi, jump);
      return rep;
    }
  }
  rep.admissible = true;
  return rep;
}

std::string classification_name(Classification c) {
  switch (c) {
    case Classification::absolutely_irreducible:
      return "absolutely-irreducible";
    case Classification::reducible_nonsplit:
      return "reducible-nonsplit";
    case Classification::reducible_split:
      return "reducible-split";
  }
  return "?";
}

Classification classify(const FilteredPhiModule& D) {
  if (D.dim != 2 || D.j_hi <= D.j_lo)
    throw UnsupportedCase("classification needs rank 2 with distinct jumps");
  auto rep = is_admissible(D);
  if (!rep.admissible) throw NotAdmissible(rep.witness);

  EigenData E = eigen_analysis(D);
  if (E.scalar)
    throw NotAdmissible("scalar phi with distinct jumps");
  if (E.no_lines) return Classification::absolutely_irreducible;

  // Line valuation in the normalized sense: j_hi - val(eigenvalue), so the
  // "unit" line is the one whose eigenvalue valuation meets e*j_hi.
  long long top = std::max(E.lines[0].vpi, E.lines[1].vpi);
  if (top < (long long)D.F->e * D.j_hi)
    return Classification::absolutely_irreducible;
  const EigenLine& unit_line =
      E.lines[0].vpi >= E.lines[1].vpi ? E.lines[0] : E.lines[1];
  if (unit_line.is_delta) return Classification::reducible_split;
  return Classification::reducible_nonsplit;
}

FilteredPhiModule make_dim1(const FieldHandle& F, const Scalar& c, int jump) {
  FilteredPhiModule D;
  D.F = F;
  D.dim = 1;
  D.phi = {c};
  D.j_lo = D.j_hi = jump;
  D.kind = "dim1";
  D.par_c = c;
  return D;
}

FilteredPhiModule make_Dab(const FieldHandle& F, const Scalar& alpha,
                           const Scalar& beta, int k, int casenum) {
  if (k < 2) throw UnsupportedCase("rank-2 shape needs k >= 2");
  if (casenum < 1 || casenum > 3)
    throw UnsupportedCase("case number must be 1, 2 or 3");
  if ((long long)alpha.val() + beta.val() != (long long)(k - 1) * F->e)
    throw WeightMismatch("val(alpha) + val(beta) must equal k - 1");
  FilteredPhiModule D;
  D.F = F;
  D.dim = 2;
  D.phi = {alpha.inv(), Scalar::zero(F), Scalar::zero(F), beta.inv()};
  D.j_lo = -(k - 1);
  D.j_hi = 0;
  if (casenum == 3)
    D.delta = {Scalar::zero(F), Scalar::one(F)};
  else
    D.delta = {Scalar::one(F), Scalar::one(F)};
  D.alpha_ne_beta = !looks_zero(alpha - beta);
  D.alpha_ne_pbeta = !looks_zero(alpha - beta.mul_pow_p(1));
  D.kind = "ab";
  D.par_alpha = alpha;
  D.par_beta = beta;
  D.par_k = k;
  D.par_case = casenum;
  return D;
}

FilteredPhiModule make_Dkap(const FieldHandle& F, int k, const Scalar& ap) {
  if (k < 2) throw UnsupportedCase("rank-2 shape needs k >= 2");
  FilteredPhiModule D;
  D.F = F;
  D.dim = 2;
  Scalar pk1 = Scalar::one(F).mul_pow_p(k - 1);
  D.phi = {Scalar::zero(F), -Scalar::one(F), pk1, ap};
  D.j_lo = 0;
  D.j_hi = k - 1;
  D.delta = {Scalar::one(F), Scalar::zero(F)};
  Scalar disc = ap * ap - Scalar::from_int(F, 4) * pk1;
  D.alpha_ne_beta = !looks_zero(disc);
  Scalar onep = Scalar::from_int(F, 1 + (long long)F->p);
  D.alpha_ne_pbeta =
      !looks_zero(ap * ap - onep * onep * Scalar::one(F).mul_pow_p(k - 2));
  D.kind = "kap";
  D.par_ap = ap;
  D.par_k = k;
  return D;
}

FilteredPhiModule twist(const FilteredPhiModule& D, int n) {
  FilteredPhiModule T = D;
  T.j_lo -= n;
  T.j_hi -= n;
  for (auto& s : T.phi) s = s.mul_pow_p(-n);
  T.par_twist += n;
  return T;
}

std::string to_text(const FilteredPhiModule& D) {
  std::ostringstream os;
  os << "filtmod{ p=" << D.F->p << ", N=" << D.F->N;
  if (D.F->ext != ExtKind::none) {
    os << ", ext=" << (D.F->ext == ExtKind::eisenstein ? "eis" : "unram");
    os << ", g0=" << D.F->g0z << ", g1=" << D.F->g1z;
  }
  if (D.kind == "dim1") {
    os << ", dim=1, c=" << D.par_c->str() << ", jump=" << D.j_lo;
  } else if (D.kind == "ab") {
    os << ", k=" << D.par_k << ", alpha=" << D.par_alpha->str()
       << ", beta=" << D.par_beta->str()
       << ", delta=" << (D.par_case == 3 ? "e_b" : "e_a+e_b");
  } else if (D.kind == "kap") {
    os << ", k=" << D.par_k << ", ap=" << D.par_ap->str();
  } else {
    throw FormatError("module has no serializable construction");
  }
  if (D.par_twist != 0) os << ", twist=" << D.par_twist;
  os << " }";
  return os.str();
}

FilteredPhiModule parse_filtmod(const std::string& text) {
  auto open = text.find('{');
  auto close = text.rfind('}');
  if (text.substr(0, open) != "filtmod" || open == std::string::npos ||
      close == std::string::npos || close < open)
    throw FormatError("expected filtmod{ ... }: " + text);
  std::string body = text.substr(open + 1, close - open - 1);

  std::map<std::string, std::string> kv;
  std::istringstream is(body);
  std::string item;
  while (std::getline(is, item, ',')) {
    auto eq = item.find('=');
    if (eq == std::string::npos)
      throw FormatError("expected key=value: " + item);
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t");
      auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    kv[trim(item.substr(0, eq))] = trim(item.substr(eq + 1));
  }
  auto need = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError("missing key " + key);
    return it->second;
  };

  u64 p = std::stoull(need("p"));
  int N = std::stoi(need("N"));
  FieldHandle F;
  if (kv.count("ext")) {
    auto kind = need("ext") == "eis" ? ExtKind::eisenstein : ExtKind::unramified;
    F = Field::make_quadratic(p, N, kind, std::stoll(need("g0")),
                              std::stoll(need("g1")));
  } else {
    F = Field::make_Qp(p, N);
  }

  FilteredPhiModule D;
  if (kv.count("dim") && need("dim") == "1") {
    D = make_dim1(F, Scalar::parse(F, need("c")), std::stoi(need("jump")));
  } else if (kv.count("ap")) {
    D = make_Dkap(F, std::stoi(need("k")), Scalar::parse(F, need("ap")));
  } else if (kv.count("alpha")) {
    std::string d = need("delta");
    int casenum = d == "e_b" ? 3 : 1;
    if (d != "e_b" && d != "e_a+e_b")
      throw FormatError("delta must be e_a+e_b or e_b: " + d);
    D = make_Dab(F, Scalar::parse(F, need("alpha")),
                 Scalar::parse(F, need("beta")), std::stoi(need("k")),
                 casenum);
  } else {
    throw FormatError("need dim=1, ap=, or alpha=/beta=");
  }
  if (kv.count("twist")) D = twist(D, std::stoi(need("twist")));
  return D;
}

}  // namespace phig
