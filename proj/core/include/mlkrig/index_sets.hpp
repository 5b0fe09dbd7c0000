#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace mlkrig::index_sets {

enum class Kind { TP, TD, SM, HC, ExtendedSM, ExtendedHC, ExtendedTD };

using MultiIndex = std::vector<int>;

struct MultiIndexSet {
  Kind kind = Kind::TD;
  int d = 0;
  int w = 0;
  std::vector<MultiIndex> indices;

  std::size_t size() const { return indices.size(); }
  bool contains(const MultiIndex &p) const;
};

inline constexpr std::size_t kDefaultCap = 100000;

std::string to_string(Kind kind);
Kind parse_kind(const std::string &name);
bool is_extended(Kind kind);
Kind base_kind(Kind kind);

// Smolyak level function: f(0)=0, f(1)=1, f(p)=ceil(log2 p).
int smolyak_level(int p);

// Defining predicate of the non-extended kinds.
bool satisfies(Kind kind, const MultiIndex &p, int w);

// Graded lexicographic order: total degree first, then larger leading
// exponents first.
bool graded_lex_less(const MultiIndex &a, const MultiIndex &b);

MultiIndexSet build_index_set(Kind kind, int d, int w,
                              std::size_t cap = kDefaultCap);

// {p} union {2p}, deduplicated and re-sorted.
MultiIndexSet extend_index_set(const MultiIndexSet &base,
                               std::size_t cap = kDefaultCap);

double eval_monomial(const MultiIndex &p, const Eigen::Ref<const Eigen::VectorXd> &x);

// Nested Clenshaw-Curtis nodes for level i >= 1.
std::vector<double> smolyak_abscissas(int i);

// (d(2^w - 1), (2ed)^w min{w+1, 2ed})
std::pair<double, double> collocation_count_bounds(int d, int w);

nlohmann::json to_json(const MultiIndexSet &set, bool with_indices = true);

} // namespace mlkrig::index_sets
