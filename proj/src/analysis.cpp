#include "phigamma/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "phigamma/errors.hpp"

namespace phig {

namespace {

bool certified_nonzero(const Scalar& x) {
  return !x.is_exact_zero() && !x.is_prec_zero();
}

long long ipow_ll(long long b, int e) {
  long long r = 1;
  for (int i = 0; i < e; ++i) {
    if (r > (long long)4e18 / b)
      throw UnsupportedCase("power beyond the integer budget");
    r *= b;
  }
  return r;
}

long long ll_binom(int n, int k) {
  if (k < 0 || k > n) return 0;
  if (n > 62) throw UnsupportedCase("binomial beyond the integer budget");
  static thread_local std::vector<std::vector<long long>> rows;
  while ((int)rows.size() <= n) {
    int t = (int)rows.size();
    std::vector<long long> row(t + 1, 1);
    for (int i = 1; i < t; ++i) row[i] = rows[t - 1][i - 1] + rows[t - 1][i];
    rows.push_back(std::move(row));
  }
  return rows[n][k];
}

double logp_abs(const Scalar& x) {
  return -(double)x.val_lb() / (double)x.F->e;
}

void norm_feed(NormValue& nv, double cand) {
  if (nv.is_zero) {
    nv.logp = cand;
    nv.is_zero = false;
  } else {
    nv.logp = std::max(nv.logp, cand);
  }
}

double logp_index(const FieldHandle& F, long long n) {
  return std::log((double)n) / std::log((double)F->p);
}

}  // namespace

std::string NormValue::str() const {
  if (is_zero) return "0 (finite range)";
  std::ostringstream os;
  os << "p^" << logp << " (finite range)";
  return os.str();
}

// Mahler functions

Scalar MahlerFunction::eval(long long z) const {
  if (a.empty()) return Scalar::zero(F);
  long long rows = z >= 0 ? std::max<long long>(z, M() - 1)
                          : (long long)M() - z;
  if (rows > 3000)
    throw UnsupportedCase("evaluation point beyond the binomial table budget");
  PascalTable tab(F, (int)rows);
  Scalar acc = Scalar::zero(F);
  for (int n = 0; n < M(); ++n) {
    u64 b;
    bool neg = false;
    if (z >= 0) {
      b = tab.binom((int)z, n);
    } else {
      b = tab.binom((int)(n - z - 1), n);
      neg = (n % 2) == 1;
    }
    if (b == 0) continue;
    Scalar t = a[n] * Scalar::from_residue(F, b);
    acc = neg ? acc - t : acc + t;
  }
  return acc;
}

MahlerFunction mahler_coeffs(const FieldHandle& F,
                             const std::vector<Scalar>& values) {
  MahlerFunction f;
  f.F = F;
  std::vector<Scalar> g = values;
  f.a.reserve(values.size());
  for (size_t n = 0; n < values.size(); ++n) {
    f.a.push_back(g[0]);
    for (size_t i = 0; i + n + 1 < values.size(); ++i) g[i] = g[i + 1] - g[i];
  }
  return f;
}

bool decay_certificate(const MahlerFunction& f) {
  if (!f.claimed_r || f.M() < 4) return true;
  double r = f.claimed_r->value();
  double front = -1e300;
  bool front_any = false;
  int half = f.M() / 2;
  for (int n = 0; n < half; ++n) {
    if (f.a[n].is_exact_zero()) continue;
    front = std::max(front, r * logp_index(f.F, n + 1) + logp_abs(f.a[n]));
    front_any = true;
  }
  for (int n = half; n < f.M(); ++n) {
    if (f.a[n].is_exact_zero()) continue;
    double v = r * logp_index(f.F, n + 1) + logp_abs(f.a[n]);
    if (!front_any || v > front + 1e-9) return false;
  }
  return true;
}

// Distributions via Amice series

int MahlerDistribution::M() const {
  if (w.lo < 0)
    throw UnsupportedInput("Amice series must be a power series");
  if (w.entire) return w.K;
  return std::min(w.K, w.rel + 1);
}

Scalar MahlerDistribution::coeff(int n) const {
  if (w.entire) return w.coeff(n);
  if (n >= M()) throw OutOfTableRange("Amice coefficient beyond trust limit");
  return w.coeff(n);
}

MahlerDistribution dist_from_coeffs(const FieldHandle& F,
                                    const std::vector<Scalar>& c,
                                    std::optional<Rat> r) {
  if (c.empty()) return MahlerDistribution{Series::zero(F), r};
  Series w(F);
  w.lo = 0;
  w.K = (int)c.size();
  w.a = c;
  w.entire = true;
  w.rel = Series::INF;
  return MahlerDistribution{w.trimmed(), r};
}

MahlerDistribution dirac(const FieldHandle& F, long long aa, int M,
                         std::optional<Rat> r) {
  std::vector<Scalar> c((size_t)M);
  if (aa >= 0 && aa < M) {
    PascalTable tab(F, (int)aa);
    for (int n = 0; n < M; ++n)
      c[n] = n <= aa ? Scalar::from_residue(F, tab.binom((int)aa, n))
                     : Scalar::zero(F);
    return dist_from_coeffs(F, c, r);
  }
  for (int n = 0; n < M; ++n)
    c[n] = binom_padic(Scalar::from_int(F, aa), n);
  Series w(F);
  w.lo = 0;
  w.K = M;
  w.a = c;
  w.entire = false;
  w.rel = M - 1;
  return MahlerDistribution{w, r};
}

Scalar integrate_values(const MahlerDistribution& mu,
                        const std::vector<Scalar>& values) {
  int Mt = mu.M();
  if ((int)values.size() < Mt)
    throw UnsupportedInput("not enough samples for the distribution range");
  const FieldHandle& F = mu.w.F;
  MahlerFunction f = mahler_coeffs(F, values);
  Scalar acc = Scalar::zero(F);
  for (int n = 0; n < Mt; ++n) acc = acc + mu.coeff(n) * f.a[n];
  return acc;
}

// Norms over the truncation range

NormValue cr_norm(const MahlerFunction& f, const Rat& r) {
  NormValue nv;
  for (int n = 0; n < f.M(); ++n) {
    if (f.a[n].is_exact_zero()) continue;
    norm_feed(nv, r.value() * logp_index(f.F, n + 1) + logp_abs(f.a[n]));
  }
  return nv;
}

NormValue order_norm(const MahlerDistribution& mu, const Rat& r) {
  NormValue nv;
  for (int n = 0; n < mu.M(); ++n) {
    Scalar c = mu.coeff(n);
    if (c.is_exact_zero()) continue;
    norm_feed(nv, -r.value() * logp_index(mu.w.F, n + 1) + logp_abs(c));
  }
  return nv;
}

bool order_certificate(const MahlerDistribution& mu) {
  if (!mu.claimed_r || mu.M() < 4) return true;
  double r = mu.claimed_r->value();
  double front = -1e300;
  bool front_any = false;
  int half = mu.M() / 2;
  for (int n = 0; n < mu.M(); ++n) {
    Scalar c = mu.coeff(n);
    if (c.is_exact_zero()) continue;
    double v = -r * logp_index(mu.w.F, n + 1) + logp_abs(c);
    if (n < half) {
      front = std::max(front, v);
      front_any = true;
    } else if (!front_any || v > front + 1e-9) {
      return false;
    }
  }
  return true;
}

NormValue factorial_norm(const MahlerDistribution& mu, const Rat& r) {
  const FieldHandle& F = mu.w.F;
  NormValue nv;
  int Mt = mu.M();
  int nmax = 0;
  while (ipow_ll((long long)F->p, nmax) < Mt) ++nmax;
  for (int n = 0; n <= nmax; ++n) {
    long long pn = ipow_ll((long long)F->p, n);
    for (int m = 0; m < Mt; ++m) {
      Scalar c = mu.coeff(m);
      if (c.is_exact_zero()) continue;
      double v = logp_abs(c) - factorial_vp(F->p, m / pn);
      norm_feed(nv, v - (double)n * r.value());
    }
  }
  return nv;
}

MahlerDistribution psi_dist(const MahlerDistribution& mu) {
  return MahlerDistribution{psi(mu.w), mu.claimed_r};
}

// Moment tables

namespace {

long long ball_rep(const FieldHandle& F, long long aa, int n) {
  long long pn = ipow_ll((long long)F->p, n);
  long long b = aa % pn;
  return b < 0 ? b + pn : b;
}

}  // namespace

void MomentTable::set(long long aa, int n, int j, const Scalar& v) {
  if (n < 0 || n > depth) throw OutOfTableRange("moment level out of range");
  if (j < 0 || j > dmax) throw OutOfTableRange("moment degree out of range");
  m_[{n, ball_rep(F, aa, n), j}] = v;
}

Scalar MomentTable::get(long long aa, int n, int j) const {
  if (n < 0 || n > depth) throw OutOfTableRange("moment level out of range");
  if (j < 0 || j > dmax) throw OutOfTableRange("moment degree out of range");
  auto it = m_.find({n, ball_rep(F, aa, n), j});
  if (it == m_.end()) return Scalar::zero(F);
  return it->second;
}

bool MomentTable::has(long long aa, int n, int j) const {
  return m_.count({n, ball_rep(F, aa, n), j}) > 0;
}

std::string MomentTable::to_text() const {
  std::ostringstream os;
  os << "moments{ p=" << F->p << ", N=" << F->N;
  if (F->ext != ExtKind::none)
    os << ", ext=" << (F->ext == ExtKind::eisenstein ? "eis" : "unram");
  os << ", depth=" << depth << ", d=" << dmax << ", r=" << r.str() << " }\n";
  for (const auto& [key, v] : m_) {
    const auto& [n, aa, j] = key;
    os << aa << " " << n << " " << j << " : " << v.str() << "\n";
  }
  return os.str();
}

MomentTable MomentTable::parse(const FieldHandle& F, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty moment table");
  auto lb = line.find('{');
  auto rb = line.find('}');
  if (line.substr(0, 7) != "moments" || lb == std::string::npos ||
      rb == std::string::npos || rb < lb)
    throw FormatError("missing moments header");
  std::map<std::string, std::string> kv;
  std::string body = line.substr(lb + 1, rb - lb - 1);
  std::istringstream bs(body);
  std::string tok;
  while (std::getline(bs, tok, ',')) {
    auto eq = tok.find('=');
    if (eq == std::string::npos) throw FormatError("malformed header entry: " + tok);
    auto strip = [](std::string s) {
      while (!s.empty() && s.front() == ' ') s.erase(s.begin());
      while (!s.empty() && s.back() == ' ') s.pop_back();
      return s;
    };
    kv[strip(tok.substr(0, eq))] = strip(tok.substr(eq + 1));
  }
  auto need = [&](const std::string& k) {
    auto it = kv.find(k);
    if (it == kv.end()) throw FormatError("missing header key: " + k);
    return it->second;
  };
  try {
    if ((u64)std::stoll(need("p")) != F->p || std::stoi(need("N")) != F->N)
      throw FormatError("moment table field does not match");
    Rat r{0, 1};
    std::string rs = need("r");
    auto slash = rs.find('/');
    if (slash == std::string::npos)
      r = Rat::make(std::stoll(rs), 1);
    else
      r = Rat::make(std::stoll(rs.substr(0, slash)),
                    std::stoll(rs.substr(slash + 1)));
    MomentTable T(F, std::stoi(need("depth")), std::stoi(need("d")), r);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto colon = line.find(':');
      if (colon == std::string::npos)
        throw FormatError("malformed moment line: " + line);
      std::istringstream hs(line.substr(0, colon));
      long long aa;
      int n, j;
      if (!(hs >> aa >> n >> j))
        throw FormatError("malformed moment key: " + line);
      T.set(aa, n, j, Scalar::parse(F, line.substr(colon + 1)));
    }
    return T;
  } catch (const std::invalid_argument&) {
    throw FormatError("unparsable moment table header");
  } catch (const std::out_of_range&) {
    throw FormatError("moment table header out of range");
  }
}

AdditivityReport check_additivity(const MomentTable& T) {
  const FieldHandle& F = T.F;
  std::set<std::pair<int, long long>> balls;
  for (const auto& [key, v] : T.entries()) {
    const auto& [n, aa, j] = key;
    (void)j;
    (void)v;
    if (n < T.depth) balls.insert({n, aa});
    if (n > 0) balls.insert({n - 1, ball_rep(F, aa, n - 1)});
  }
  for (const auto& [n, aa] : balls) {
    long long pn = ipow_ll((long long)F->p, n);
    for (int j = 0; j <= T.dmax; ++j) {
      Scalar rhs = Scalar::zero(F);
      for (long long t = 0; t < (long long)F->p; ++t) {
        long long b = aa + t * pn;
        Scalar d = Scalar::from_int(F, t * pn);
        for (int i = 0; i < j; ++i)
          rhs = rhs + Scalar::from_int(F, ll_binom(j, i)) * d.pow_i(j - i) *
                          T.get(b, n + 1, i);
        rhs = rhs + T.get(b, n + 1, j);
      }
      Scalar diff = T.get(aa, n, j) - rhs;
      if (certified_nonzero(diff)) {
        std::ostringstream os;
        os << "refinement mismatch at ball " << aa << " + p^" << n
           << " Z_p, degree " << j;
        return {false, os.str()};
      }
    }
  }
  return {true, ""};
}

GrowthConstant growth_constant(const MomentTable& T) {
  GrowthConstant gc;
  gc.infinite = true;
  for (const auto& [key, v] : T.entries()) {
    if (v.is_exact_zero()) continue;
    const auto& [n, aa, j] = key;
    (void)aa;
    Rat cand = Rat::make(v.val_lb(), T.F->e) -
               Rat::make(n, 1) * (Rat::make(j, 1) - T.r);
    if (gc.infinite || cand < gc.vc) {
      gc.vc = cand;
      gc.infinite = false;
    }
  }
  return gc;
}

MomentTable moments_from_dist(const MahlerDistribution& mu, int depth,
                              int dmax) {
  const FieldHandle& F = mu.w.F;
  int Mt = mu.M();
  MomentTable T(F, depth, dmax, mu.claimed_r.value_or(Rat{0, 1}));
  for (int n = 0; n <= depth; ++n) {
    long long pn = ipow_ll((long long)F->p, n);
    for (long long aa = 0; aa < pn; ++aa) {
      for (int j = 0; j <= dmax; ++j) {
        std::vector<Scalar> vals((size_t)Mt);
        for (int z = 0; z < Mt; ++z)
          vals[z] = (z % pn == aa)
                        ? Scalar::from_int(F, z - aa).pow_i(j)
                        : Scalar::zero(F);
        Scalar v = integrate_values(mu, vals);
        if (!v.is_exact_zero()) T.set(aa, n, j, v);
      }
    }
  }
  return T;
}

NormValue moment_norm(const MomentTable& T, const Rat& r) {
  NormValue nv;
  for (const auto& [key, v] : T.entries()) {
    if (v.is_exact_zero()) continue;
    const auto& [n, aa, j] = key;
    (void)aa;
    norm_feed(nv, (double)n * ((double)j - r.value()) + logp_abs(v));
  }
  return nv;
}

NormValue moment_norm_restricted(const MomentTable& T, const Rat& r, int k) {
  NormValue nv;
  for (const auto& [key, v] : T.entries()) {
    if (v.is_exact_zero()) continue;
    const auto& [n, aa, j] = key;
    (void)aa;
    if (j > k - 2) continue;
    norm_feed(nv, (double)n * ((double)j - r.value()) + logp_abs(v));
  }
  return nv;
}

// Amice--Velu extension

namespace {

struct AvCtx {
  const MomentTable* T;
  GrowthConstant gc;
  int slack;
  std::set<std::pair<int, long long>> inhabited;
  std::map<std::tuple<int, long long, int>, Scalar> memo;
};

AvCtx make_av_ctx(const MomentTable& T, int slack) {
  AvCtx cx{&T, growth_constant(T), slack, {}, {}};
  for (const auto& [key, v] : T.entries()) {
    if (v.is_exact_zero()) continue;
    const auto& [n, aa, j] = key;
    (void)j;
    for (int m = n; m >= 0; --m)
      if (!cx.inhabited.insert({m, ball_rep(T.F, aa, m)}).second) break;
  }
  return cx;
}

Scalar av_rec(AvCtx& cx, long long aa, int n, int jp) {
  const MomentTable& T = *cx.T;
  const FieldHandle& F = T.F;
  if (jp <= T.dmax) return T.get(aa, n, jp);
  aa = ball_rep(F, aa, n);
  auto key = std::make_tuple(n, aa, jp);
  if (auto it = cx.memo.find(key); it != cx.memo.end()) return it->second;
  Scalar out = Scalar::zero(F);
  if (!cx.gc.infinite) {
    Rat bound = cx.gc.vc + Rat::make(n, 1) * (Rat::make(jp, 1) - T.r);
    if (Rat::make(F->N + cx.slack, 1) <= bound) {
      out = Scalar::make(F, 0, 0, 0, F->N * F->e);
    } else if (n >= T.depth) {
      throw OutOfTableRange(
          "moment table too shallow to certify the extension remainder");
    } else if (!cx.inhabited.count({n, aa})) {
      // Nothing stored inside this ball, so the telescoped sums collapse
      // and only remainder stubs survive.  The stub still needs the
      // slowest descent (degree dmax + 1) to reach its certified depth
      // within the table.
      Rat deepest = cx.gc.vc + Rat::make(T.depth, 1) *
                                   (Rat::make(T.dmax + 1, 1) - T.r);
      if (deepest < Rat::make(F->N + cx.slack, 1))
        throw OutOfTableRange(
            "moment table too shallow to certify the extension remainder");
      out = Scalar::make(F, 0, 0, 0, F->N * F->e);
    } else {
      Scalar acc = Scalar::zero(F);
      long long pn = ipow_ll((long long)F->p, n);
      for (long long t = 0; t < (long long)F->p; ++t) {
        long long b = aa + t * pn;
        if (t != 0) {
          Scalar d = Scalar::from_int(F, t * pn);
          for (int i = 0; i < jp; ++i)
            acc = acc + Scalar::from_int(F, ll_binom(jp, i)) *
                            d.pow_i(jp - i) * av_rec(cx, b, n + 1, i);
        }
        acc = acc + av_rec(cx, b, n + 1, jp);
      }
      out = acc;
    }
  }
  cx.memo.emplace(key, out);
  return out;
}

void require_convergent(const MomentTable& T) {
  if (!(T.r < Rat::make(T.dmax + 1, 1)))
    throw NoConvergence(
        "extension degrees do not exceed r - 1; the stored degree bound "
        "must be larger than r - 1");
}

}  // namespace

Scalar av_moment(const MomentTable& T, long long aa, int n, int j,
                 int slack) {
  require_convergent(T);
  AvCtx cx = make_av_ctx(T, slack);
  long long c = ball_rep(T.F, aa, n);
  if (c == aa) return av_rec(cx, aa, n, j);
  // Stored moments are anchored at the canonical representative; shift the
  // requested base point onto it.
  Scalar d = Scalar::from_int(T.F, c - aa);
  Scalar out = av_rec(cx, c, n, j);
  for (int i = 0; i < j; ++i)
    out = out + Scalar::from_int(T.F, ll_binom(j, i)) * d.pow_i(j - i) *
                    av_rec(cx, c, n, i);
  return out;
}

MomentTable amice_velu_extend(const MomentTable& T, int target_j,
                              int target_depth, int slack) {
  require_convergent(T);
  auto add = check_additivity(T);
  if (!add.ok) throw ConditionViolated(add.witness);
  if (target_depth > T.depth)
    throw OutOfTableRange("extension depth exceeds the stored depth");
  AvCtx cx = make_av_ctx(T, slack);
  MomentTable out(T.F, target_depth, std::max(target_j, T.dmax), T.r);
  for (const auto& [key, v] : T.entries()) {
    const auto& [n, aa, j] = key;
    if (n <= target_depth) out.set(aa, n, j, v);
  }
  for (int jp = T.dmax + 1; jp <= target_j; ++jp) {
    for (int n = 0; n <= target_depth; ++n) {
      long long pn = ipow_ll((long long)T.F->p, n);
      for (long long aa = 0; aa < pn; ++aa) {
        Scalar v = av_rec(cx, aa, n, jp);
        if (!v.is_exact_zero()) out.set(aa, n, jp, v);
      }
    }
  }
  return out;
}

// Cyclotomic model

CycloModel CycloModel::make(const FieldHandle& F, int m) {
  if (m < 1) throw UnsupportedCase("cyclotomic level must be positive");
  long long pm1 = ipow_ll((long long)F->p, m - 1);
  long long deg = (long long)(F->p - 1) * pm1;
  if (deg > 600)
    throw UnsupportedCase("cyclotomic degree beyond the supported budget");
  CycloModel C;
  C.F = F;
  C.m = m;
  C.deg = (int)deg;
  PascalTable tab(F, (int)deg);
  C.modulus.assign((size_t)deg + 1, Scalar::zero(F));
  for (long long i = 0; i < (long long)F->p; ++i)
    for (long long t = 0; t <= i * pm1; ++t)
      C.modulus[(size_t)t] =
          C.modulus[(size_t)t] +
          Scalar::from_residue(F, tab.binom((int)(i * pm1), (int)t));
  C.modulus[(size_t)deg] = Scalar::one(F);
  return C;
}

std::vector<Scalar> CycloModel::reduce(std::vector<Scalar> f) const {
  while ((int)f.size() > deg) {
    Scalar top = f.back();
    size_t off = f.size() - 1 - (size_t)deg;
    if (!top.is_exact_zero())
      for (int i = 0; i < deg; ++i)
        f[off + (size_t)i] = f[off + (size_t)i] - top * modulus[(size_t)i];
    f.pop_back();
  }
  f.resize((size_t)deg, Scalar::zero(F));
  return f;
}

std::vector<Scalar> CycloModel::mul(const std::vector<Scalar>& x,
                                    const std::vector<Scalar>& y) const {
  std::vector<Scalar> out(x.size() + y.size(), Scalar::zero(F));
  for (size_t i = 0; i < x.size(); ++i) {
    if (x[i].is_exact_zero()) continue;
    for (size_t j = 0; j < y.size(); ++j)
      out[i + j] = out[i + j] + x[i] * y[j];
  }
  return reduce(std::move(out));
}

std::vector<Scalar> CycloModel::one() const {
  std::vector<Scalar> out((size_t)deg, Scalar::zero(F));
  out[0] = Scalar::one(F);
  return out;
}

std::vector<Scalar> CycloModel::zeta_pow(long long k) const {
  long long pm = ipow_ll((long long)F->p, m);
  long long kk = ((k % pm) + pm) % pm;
  PascalTable tab(F, (int)kk);
  std::vector<Scalar> out((size_t)kk + 1, Scalar::zero(F));
  for (long long t = 0; t <= kk; ++t)
    out[(size_t)t] = Scalar::from_residue(F, tab.binom((int)kk, (int)t));
  return reduce(std::move(out));
}

std::vector<Scalar> CycloModel::smul(const std::vector<Scalar>& x,
                                     const Scalar& c) const {
  std::vector<Scalar> out = x;
  for (auto& v : out) v = v * c;
  return out;
}

CycloModel::Val CycloModel::val(const std::vector<Scalar>& x) const {
  Val best;
  best.infinite = true;
  for (size_t i = 0; i < x.size(); ++i) {
    if (x[i].is_exact_zero()) continue;
    Rat cand = Rat::make((long long)i, deg) + Rat::make(x[i].val_lb(), F->e);
    if (best.infinite || cand < best.v) {
      best.v = cand;
      best.infinite = false;
    }
  }
  return best;
}

bool CycloModel::looks_zero(const std::vector<Scalar>& x) const {
  for (const auto& v : x)
    if (certified_nonzero(v)) return false;
  return true;
}

std::string CycloModel::str(const std::vector<Scalar>& x) const {
  std::ostringstream os;
  bool any = false;
  for (size_t i = 0; i < x.size(); ++i) {
    if (x[i].is_exact_zero()) continue;
    if (any) os << " + ";
    os << "(" << x[i].str() << ")";
    if (i == 1) os << "*Y";
    if (i > 1) os << "*Y^" << i;
    any = true;
  }
  if (!any) os << "0";
  return os.str();
}

// Twisted moments

CycloMoments zeta_moment(const CycloModel& C, const MahlerDistribution& mu,
                         int j) {
  const FieldHandle& F = C.F;
  if (j < 0) throw UnsupportedInput("moment degree must be nonnegative");
  int Mt = mu.M();
  if (!mu.w.entire) {
    int minv = 0;
    for (int n = 0; n < Mt; ++n) {
      Scalar c = mu.coeff(n);
      if (!c.is_exact_zero()) minv = std::min(minv, c.val_lb());
    }
    Rat tail = Rat::make(Mt - j, C.deg) + Rat::make(minv, F->e);
    if (tail < Rat::make(F->N, 1))
      throw PrecisionExhausted(
          "Amice tail not provably small at this cyclotomic level");
  }
  PascalTable tab(F, std::max(Mt - 1, 1));
  auto binom_side = [&](int jj) {
    std::vector<Scalar> S((size_t)std::max(Mt - jj, 1), Scalar::zero(F));
    for (int i = jj; i < Mt; ++i)
      S[(size_t)(i - jj)] =
          mu.coeff(i) * Scalar::from_residue(F, tab.binom(i, jj));
    return C.mul(C.reduce(std::move(S)), C.zeta_pow(jj));
  };
  CycloMoments out;
  out.binom_moment = binom_side(j);
  // z^j = sum_i S2(j,i) i! binom(z,i)
  std::vector<std::vector<Scalar>> S2(
      (size_t)j + 1, std::vector<Scalar>((size_t)j + 1, Scalar::zero(F)));
  S2[0][0] = Scalar::one(F);
  for (int n = 1; n <= j; ++n)
    for (int k = 1; k <= n; ++k)
      S2[(size_t)n][(size_t)k] =
          Scalar::from_int(F, k) * S2[(size_t)n - 1][(size_t)k] +
          S2[(size_t)n - 1][(size_t)k - 1];
  std::vector<Scalar> acc((size_t)C.deg, Scalar::zero(F));
  Scalar fact = Scalar::one(F);
  for (int i = 0; i <= j; ++i) {
    if (i > 0) fact = fact * Scalar::from_int(F, i);
    Scalar t = S2[(size_t)j][(size_t)i] * fact;
    if (t.is_exact_zero()) continue;
    auto bm = (i == j) ? out.binom_moment : binom_side(i);
    auto term = C.smul(bm, t);
    for (int q = 0; q < C.deg; ++q)
      acc[(size_t)q] = acc[(size_t)q] + term[(size_t)q];
  }
  out.power_moment = std::move(acc);
  return out;
}

CycloMoments zeta_moment(const MahlerDistribution& mu, int j, int m) {
  return zeta_moment(CycloModel::make(mu.w.F, m), mu, j);
}

Fil0Report check_fil0(const MahlerDistribution& mu_alpha,
                      const MahlerDistribution& mu_beta, const Scalar& alpha,
                      const Scalar& beta, int m, int k) {
  const FieldHandle& F = mu_alpha.w.F;
  if (k < 2) throw UnsupportedInput("weight must be at least 2");
  CycloModel C = CycloModel::make(F, m);
  Scalar am = alpha.pow_i(m);
  Scalar bm = beta.pow_i(m);
  Fil0Report rep;
  for (int j = 0; j <= k - 2; ++j) {
    auto za = zeta_moment(C, mu_alpha, j).power_moment;
    auto zb = zeta_moment(C, mu_beta, j).power_moment;
    std::vector<Scalar> diff((size_t)C.deg, Scalar::zero(F));
    for (int q = 0; q < C.deg; ++q)
      diff[(size_t)q] = am * za[(size_t)q] - bm * zb[(size_t)q];
    bool defect = !C.looks_zero(diff);
    auto v = C.val(diff);
    std::ostringstream os;
    os << "j=" << j << ": ";
    if (defect) {
      rep.ok = false;
      os << "sides differ, residual valuation " << v.v.str();
    } else if (v.infinite) {
      os << "sides agree exactly";
    } else {
      os << "sides agree to valuation >= " << v.v.str();
    }
    rep.lines.push_back(os.str());
    if (!v.infinite) {
      if (!rep.residual_bounded || v.v < rep.residual_val)
        rep.residual_val = v.v;
      rep.residual_bounded = true;
    }
  }
  return rep;
}

// Locally polynomial functions

Scalar LocalPoly::eval(long long z) const {
  for (const auto& pc : pieces) {
    if (ball_rep(F, z, pc.n) != pc.aa) continue;
    Scalar acc = Scalar::zero(F);
    Scalar d = Scalar::from_int(F, z - pc.aa);
    for (size_t i = pc.coef.size(); i-- > 0;) acc = acc * d + pc.coef[i];
    return acc;
  }
  return Scalar::zero(F);
}

Scalar LocalPoly::eval_deriv(long long z, int i) const {
  if (i == 0) return eval(z);
  for (const auto& pc : pieces) {
    if (ball_rep(F, z, pc.n) != pc.aa) continue;
    Scalar acc = Scalar::zero(F);
    Scalar d = Scalar::from_int(F, z - pc.aa);
    for (int l = (int)pc.coef.size() - 1; l >= i; --l) {
      Scalar ff = Scalar::one(F);
      for (int t = 0; t < i; ++t) ff = ff * Scalar::from_int(F, l - t);
      acc = acc + pc.coef[(size_t)l] * ff * d.pow_i(l - i);
    }
    return acc;
  }
  return Scalar::zero(F);
}

int LocalPoly::degree() const {
  int d = 0;
  for (const auto& pc : pieces)
    d = std::max(d, (int)pc.coef.size() - 1);
  return d;
}

LocalPoly local_poly_derivative(const LocalPoly& f) {
  LocalPoly out;
  out.F = f.F;
  for (const auto& pc : f.pieces) {
    LocalPoly::Piece q;
    q.aa = pc.aa;
    q.n = pc.n;
    for (size_t l = 1; l < pc.coef.size(); ++l)
      q.coef.push_back(pc.coef[l] * Scalar::from_int(f.F, (long long)l));
    out.pieces.push_back(std::move(q));
  }
  return out;
}

Scalar integrate_local(const MomentTable& T, const LocalPoly& f) {
  Scalar acc = Scalar::zero(T.F);
  for (const auto& pc : f.pieces) {
    if (pc.n > T.depth || (int)pc.coef.size() - 1 > T.dmax)
      throw OutOfTableRange("piece outside the stored moment range");
    for (size_t i = 0; i < pc.coef.size(); ++i)
      acc = acc + pc.coef[i] * T.get(pc.aa, pc.n, (int)i);
  }
  return acc;
}

Scalar finite_diff(const FieldHandle& F,
                   const std::function<Scalar(long long)>& f, long long z,
                   const std::vector<long long>& hs) {
  if (hs.empty()) return f(z);
  long long h = hs.back();
  if (h == 0) throw UnsupportedInput("zero step in divided difference");
  std::vector<long long> rest(hs.begin(), hs.end() - 1);
  Scalar num = finite_diff(F, f, z + h, rest) - finite_diff(F, f, z, rest);
  return num / Scalar::from_int(F, h);
}

namespace {

// Partial digit-sum contributions below level L for the ball based at aa.
Scalar section_head(const LocalPoly& f, long long aa, int L, int n,
                    const std::vector<Scalar>& inv_fact) {
  const FieldHandle& F = f.F;
  Scalar head = Scalar::zero(F);
  long long zj = 0;
  long long pj = 1;
  for (int j = 0; j < L; ++j) {
    long long digit = (aa / pj) % (long long)F->p;
    if (digit != 0) {
      Scalar h = Scalar::from_int(F, digit * pj);
      for (int i = 0; i < n; ++i)
        head = head + f.eval_deriv(zj, i) * h.pow_i(i + 1) *
                          inv_fact[(size_t)i + 1];
      zj += digit * pj;
    }
    pj *= (long long)F->p;
  }
  return head;
}

}  // namespace

LocalPoly deriv_section(const LocalPoly& f, int n) {
  const FieldHandle& F = f.F;
  if (n < 1 || n > 20)
    throw UnsupportedInput("section order outside the supported range");
  if (f.degree() > n - 1)
    throw UnsupportedInput("piece degree must stay below the section order");
  std::vector<Scalar> inv_fact((size_t)n + 1);
  long long fl = 1;
  for (int i = 0; i <= n; ++i) {
    if (i > 0) fl *= i;
    inv_fact[(size_t)i] = Scalar::from_rational(F, 1, fl);
  }
  LocalPoly out;
  out.F = F;
  int L = 0;
  for (const auto& pc : f.pieces) L = std::max(L, pc.n);
  for (const auto& pc : f.pieces) {
    LocalPoly::Piece q;
    q.aa = pc.aa;
    q.n = pc.n;
    q.coef.push_back(section_head(f, pc.aa, pc.n, n, inv_fact));
    for (size_t i = 0; i < pc.coef.size(); ++i)
      q.coef.push_back(pc.coef[i] *
                       Scalar::from_rational(F, 1, (long long)i + 1));
    out.pieces.push_back(std::move(q));
  }
  // Off the support only the partial sums below the ambient level remain;
  // they are constant on each level-L ball outside every piece.
  long long pL = ipow_ll((long long)F->p, L);
  if (pL > 200000)
    throw UnsupportedCase("ball decomposition beyond the supported size");
  for (long long aa = 0; aa < pL; ++aa) {
    bool covered = false;
    for (const auto& pc : f.pieces)
      if (ball_rep(F, aa, pc.n) == pc.aa) {
        covered = true;
        break;
      }
    if (covered) continue;
    Scalar head = section_head(f, aa, L, n, inv_fact);
    if (head.is_exact_zero()) continue;
    out.pieces.push_back({aa, L, {head}});
  }
  return out;
}

}  // namespace phig
