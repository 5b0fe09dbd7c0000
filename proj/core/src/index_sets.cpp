#include "mlkrig/index_sets.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mlkrig/error.hpp"

namespace mlkrig::index_sets {

namespace {

struct Partial {
  long sum = 0;
  long prod = 1;
  long smolyak = 0;
  int max = 0;
};

Partial push(const Partial &s, int v) {
  Partial n = s;
  n.sum += v;
  n.prod *= (v + 1);
  n.smolyak += smolyak_level(v);
  n.max = std::max(n.max, v);
  return n;
}

bool admissible(Kind kind, const Partial &s, int w) {
  switch (kind) {
  case Kind::TP: return s.max <= w;
  case Kind::TD: return s.sum <= w;
  case Kind::SM: return s.smolyak <= w;
  case Kind::HC: return s.prod <= w;
  default: break;
  }
  throw ConfigError("admissible: extended kinds have no direct predicate");
}

// Every predicate is coordinate-monotone and a zero entry leaves the
// partial state unchanged, so a prefix is extendable iff it is admissible.
void enumerate(Kind kind, int d, int w, std::size_t cap, int k,
               const Partial &s, MultiIndex &cur,
               std::vector<MultiIndex> &out) {
  if (k == d) {
    if (out.size() >= cap)
      throw ConfigError("index set cardinality exceeds cap " +
                        std::to_string(cap));
    out.push_back(cur);
    return;
  }
  for (int v = 0;; ++v) {
    Partial n = push(s, v);
    if (!admissible(kind, n, w))
      break;
    cur[k] = v;
    enumerate(kind, d, w, cap, k + 1, n, cur, out);
  }
  cur[k] = 0;
}

} // namespace

bool MultiIndexSet::contains(const MultiIndex &p) const {
  return std::binary_search(indices.begin(), indices.end(), p,
                            graded_lex_less);
}

std::string to_string(Kind kind) {
  switch (kind) {
  case Kind::TP: return "TP";
  case Kind::TD: return "TD";
  case Kind::SM: return "SM";
  case Kind::HC: return "HC";
  case Kind::ExtendedSM: return "ExtendedSM";
  case Kind::ExtendedHC: return "ExtendedHC";
  case Kind::ExtendedTD: return "ExtendedTD";
  }
  return "?";
}

Kind parse_kind(const std::string &name) {
  std::string u = name;
  std::transform(u.begin(), u.end(), u.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  if (u == "TP") return Kind::TP;
  if (u == "TD") return Kind::TD;
  if (u == "SM") return Kind::SM;
  if (u == "HC") return Kind::HC;
  if (u == "EXTENDEDSM") return Kind::ExtendedSM;
  if (u == "EXTENDEDHC") return Kind::ExtendedHC;
  if (u == "EXTENDEDTD") return Kind::ExtendedTD;
  throw ConfigError("unknown index set kind '" + name + "'");
}

bool is_extended(Kind kind) {
  return kind == Kind::ExtendedSM || kind == Kind::ExtendedHC ||
         kind == Kind::ExtendedTD;
}

Kind base_kind(Kind kind) {
  switch (kind) {
  case Kind::ExtendedSM: return Kind::SM;
  case Kind::ExtendedHC: return Kind::HC;
  case Kind::ExtendedTD: return Kind::TD;
  default: return kind;
  }
}

int smolyak_level(int p) {
  if (p <= 1)
    return p;
  int bits = 0;
  for (unsigned v = static_cast<unsigned>(p - 1); v; v >>= 1)
    ++bits;
  return bits;
}

bool satisfies(Kind kind, const MultiIndex &p, int w) {
  Partial s;
  for (int v : p) {
    if (v < 0)
      return false;
    s = push(s, v);
  }
  return admissible(kind, s, w);
}

bool graded_lex_less(const MultiIndex &a, const MultiIndex &b) {
  long sa = 0, sb = 0;
  for (int v : a) sa += v;
  for (int v : b) sb += v;
  if (sa != sb)
    return sa < sb;
  return std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end());
}

MultiIndexSet build_index_set(Kind kind, int d, int w, std::size_t cap) {
  if (d < 1)
    throw ConfigError("index set: d must be >= 1");
  if (w < 0)
    throw ConfigError("index set: w must be >= 0");
  if (is_extended(kind)) {
    MultiIndexSet out = extend_index_set(build_index_set(base_kind(kind), d, w, cap), cap);
    out.kind = kind;
    return out;
  }
  MultiIndexSet set;
  set.kind = kind;
  set.d = d;
  set.w = w;
  MultiIndex cur(d, 0);
  // HC at w=0 admits nothing under the product rule; keep the constant.
  if (kind == Kind::HC && w == 0) {
    set.indices.push_back(cur);
    return set;
  }
  enumerate(kind, d, w, cap, 0, Partial{}, cur, set.indices);
  std::sort(set.indices.begin(), set.indices.end(), graded_lex_less);
  return set;
}

MultiIndexSet extend_index_set(const MultiIndexSet &base, std::size_t cap) {
  if (base.kind == Kind::TP)
    throw ConfigError("extend_index_set: base kind must be SM, HC or TD");
  std::vector<MultiIndex> all = base.indices;
  all.reserve(2 * base.size());
  for (const auto &p : base.indices) {
    MultiIndex q = p;
    for (int &v : q) v *= 2;
    all.push_back(std::move(q));
  }
  std::sort(all.begin(), all.end(), graded_lex_less);
  all.erase(std::unique(all.begin(), all.end()), all.end());
  if (all.size() > cap)
    throw ConfigError("extended index set cardinality exceeds cap");
  MultiIndexSet out;
  switch (base_kind(base.kind)) {
  case Kind::SM: out.kind = Kind::ExtendedSM; break;
  case Kind::HC: out.kind = Kind::ExtendedHC; break;
  default: out.kind = Kind::ExtendedTD; break;
  }
  out.d = base.d;
  out.w = base.w;
  out.indices = std::move(all);
  return out;
}

double eval_monomial(const MultiIndex &p, const Eigen::Ref<const Eigen::VectorXd> &x) {
  if (static_cast<Eigen::Index>(p.size()) != x.size())
    throw ConfigError("eval_monomial: dimension mismatch");
  double v = 1.0;
  for (std::size_t n = 0; n < p.size(); ++n) {
    const double xn = x[static_cast<Eigen::Index>(n)];
    for (int e = 0; e < p[n]; ++e)
      v *= xn;
  }
  return v;
}

std::vector<double> smolyak_abscissas(int i) {
  if (i < 1)
    throw ConfigError("smolyak_abscissas: level must be >= 1");
  if (i == 1)
    return {0.0};
  const int m = (1 << (i - 1)) + 1;
  std::vector<double> y(m);
  for (int j = 1; j <= m; ++j)
    y[j - 1] = -std::cos(std::numbers::pi * (j - 1) / (m - 1));
  // Symmetric nodes: clean up the roundoff of cos(pi/2) and friends.
  y[(m - 1) / 2] = 0.0;
  for (int j = 0; j < m / 2; ++j)
    y[m - 1 - j] = -y[j];
  return y;
}

std::pair<double, double> collocation_count_bounds(int d, int w) {
  if (d < 1 || w < 0)
    throw ConfigError("collocation_count_bounds: need d >= 1, w >= 0");
  const double lower = d * (std::ldexp(1.0, w) - 1.0);
  const double two_ed = 2.0 * std::numbers::e * d;
  const double upper = std::pow(two_ed, w) * std::min<double>(w + 1, two_ed);
  return {lower, upper};
}

nlohmann::json to_json(const MultiIndexSet &set, bool with_indices) {
  nlohmann::json j;
  j["kind"] = to_string(set.kind);
  j["d"] = set.d;
  j["w"] = set.w;
  j["cardinality"] = set.size();
  if (with_indices)
    j["indices"] = set.indices;
  return j;
}

} // namespace mlkrig::index_sets
