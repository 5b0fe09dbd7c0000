#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mlkrig/index_sets.hpp"
#include "mlkrig/partition_tree.hpp"
#include "mlkrig/types.hpp"

namespace mlkrig::basis {

struct RankReport {
  Index rank = 0;
  std::vector<Index> deficient_columns; // in pivot order, beyond the rank
};

// Rows are observations, columns follow the index set order.
Eigen::MatrixXd design_matrix(const Points &points,
                              const index_sets::MultiIndexSet &set);
RankReport design_rank(const Eigen::MatrixXd &m);

// Monomials of the set at a single location (one row of the design matrix).
Eigen::VectorXd monomial_row(const Eigen::Ref<const Eigen::VectorXd> &x,
                             const index_sets::MultiIndexSet &set);

struct LocalSplit {
  Eigen::MatrixXd scaling; // columns: combinations of the input vectors
  Eigen::MatrixXd detail;
  Index rank = 0;
};

// Split an orthonormal set Q (columns) against the moment matrix G^T Q:
// the first `rank` right singular directions become scaling vectors, the
// nullspace directions become detail vectors.
LocalSplit local_split(const Eigen::MatrixXd &q, const Eigen::MatrixXd &moment,
                       double rank_eps = 1e-10);

// A dense block of basis vectors supported on one tree cell.
struct CellBlock {
  Index cell = 0;
  int level = 0;          // tree level q >= 0, or -1
  Index begin = 0;        // range into the tree permutation
  Index end = 0;
  Eigen::MatrixXd coeffs; // (end - begin) x count
  Index row_offset = 0;   // first row in the flat detail ordering

  Index count() const { return coeffs.cols(); }
  Index support() const { return end - begin; }
};

struct BasisOptions {
  int accuracy_offset = 0;
  bool extended = false;
  double rank_eps = 1e-10;
};

struct MultiLevelBasis {
  Index n = 0;
  int d = 0;
  int t = 0;
  Index p = 0;       // trend set cardinality
  Index p_tilde = 0; // accuracy set cardinality
  Index trend_rank = 0;
  index_sets::MultiIndexSet trend_set;
  index_sets::MultiIndexSet accuracy_set;
  std::vector<Index> permutation;
  // Detail blocks in flat order: levels t, t-1, ..., 0, -1; node id order
  // within a level.
  std::vector<CellBlock> blocks;
  // Trend block: N x trend_rank, rows indexed by permuted position.
  Eigen::MatrixXd l;
  // Rows per level, indexed by level + 1.
  std::vector<Index> level_rows;
  int reorthogonalizations = 0;

  Index rows() const;
  Index rows_at(int level) const { return level_rows.at(level + 1); }
  // Rows of the partial transform for levels t..n.
  Index rows_through(int n) const;
  // First flat row of level q.
  Index level_offset(int q) const { return rows_through(q) - rows_at(q); }
};

MultiLevelBasis build_basis(const tree::PartitionTree &tree,
                            const Points &points,
                            const index_sets::MultiIndexSet &trend_set,
                            const BasisOptions &options = {});

Eigen::VectorXd apply_W(const MultiLevelBasis &b,
                        const Eigen::Ref<const Eigen::VectorXd> &v);
Eigen::VectorXd apply_WT(const MultiLevelBasis &b,
                         const Eigen::Ref<const Eigen::VectorXd> &u);
Eigen::VectorXd apply_L(const MultiLevelBasis &b,
                        const Eigen::Ref<const Eigen::VectorXd> &v);
Eigen::VectorXd apply_LT(const MultiLevelBasis &b,
                         const Eigen::Ref<const Eigen::VectorXd> &u);
// Levels t..n of W z.
Eigen::VectorXd partial_transform(const MultiLevelBasis &b,
                                  const Eigen::Ref<const Eigen::VectorXd> &z,
                                  int n);

// Dense W (rows x N) and L (trend_rank x N) in original point order.
Eigen::MatrixXd dense_W(const MultiLevelBasis &b);
Eigen::MatrixXd dense_L(const MultiLevelBasis &b);

struct BasisCheck {
  double orthonormality = 0.0;    // ||P P^T - I||_max
  double trend_moments = 0.0;     // ||W M||_max
  double accuracy_moments = 0.0;  // max over q >= 0 rows of |psi^T M~|
  bool count_bound = true;        // rows(W_q) <= p~ 2^q, rows(W_-1) <= p~ - p
  bool support_bound = true;      // nnz(psi) <= 2^(t-q+1) p~
  bool completeness = true;       // trend_rank + sum rows = N
};

BasisCheck check_basis(const MultiLevelBasis &b, const Points &points);

nlohmann::json basis_stats(const MultiLevelBasis &b);

// Little-endian binary container; round trip is bit-exact.
void write_basis(const MultiLevelBasis &b, const std::string &path);
MultiLevelBasis read_basis(const std::string &path);

} // namespace mlkrig::basis
