#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "mlkrig/kernels.hpp"
#include "mlkrig/multilevel_basis.hpp"
#include "mlkrig/partition_tree.hpp"

namespace mlkrig::assembly {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, Index>;

// tau * 2^(t - (i + j)/2)
double tau_schedule(double tau, int t, int i, int j);

// Retained pairs of detail blocks (indices into basis.blocks, first <=
// second in flat order) for the levels t..n. The pattern depends only on
// geometry, so it is shared across kernel parameters.
struct Pattern {
  int n = -1;
  Index dim = 0;
  double tau = 0.0;
  tree::SearchRule rule = tree::SearchRule::Verbatim;
  std::vector<std::pair<Index, Index>> pairs;
  Index searches = 0;
  // Kernel entries needed by the pairs, at the granularity of leaf cells:
  // leaf k covers permuted positions [leaf_bounds[k], leaf_bounds[k+1]).
  std::vector<Index> leaf_bounds;
  std::vector<std::pair<Index, Index>> leaf_pairs; // first <= second
  // Form the whole permuted kernel matrix instead (root blocks present or
  // most leaf pairs needed).
  bool full = false;
};

Pattern build_pattern(const basis::MultiLevelBasis &b,
                      const tree::PartitionTree &tree, const Points &points,
                      double tau, int n = -1,
                      tree::SearchRule rule = tree::SearchRule::Verbatim);

struct AssemblyCost {
  double kernel_evals = 0;
  double flops = 0;
};

// Symmetric block-sparse matrix; the upper block triangle is stored and
// the lower one is implied.
struct BlockSparseMatrix {
  struct Block {
    Index a = 0; // basis block of the rows
    Index b = 0; // basis block of the columns
    Index row = 0;
    Index col = 0;
    Eigen::MatrixXd values;
  };
  int t = 0;
  int n = -1;
  Index dim = 0;
  std::vector<Block> blocks;
  AssemblyCost cost;

  // Stored entries counting both triangles.
  Index nnz() const;
  double density() const;
  SparseMatrix to_sparse() const;
  Eigen::MatrixXd to_dense() const;
};

// Assemble numeric values for a fixed pattern.
BlockSparseMatrix assemble(const Pattern &pattern,
                           const basis::MultiLevelBasis &b,
                           const Points &points,
                           const kernels::KernelSpec &spec);

BlockSparseMatrix assemble_sparse_CW(const basis::MultiLevelBasis &b,
                                     const tree::PartitionTree &tree,
                                     const kernels::KernelSpec &spec,
                                     const Points &points, double tau,
                                     int n = -1,
                                     tree::SearchRule rule = tree::SearchRule::Verbatim);

// W C W^T by dense triple product.
Eigen::MatrixXd assemble_dense_CW(const basis::MultiLevelBasis &b,
                                  const kernels::KernelSpec &spec,
                                  const Points &points,
                                  std::size_t cap = kernels::kDenseCap);
Eigen::MatrixXd assemble_dense_CW(const basis::MultiLevelBasis &b,
                                  const Eigen::MatrixXd &c);

struct TruncationGap {
  double max_norm = 0.0;
  double two_norm = 0.0;
  int iterations = 0;
};

TruncationGap truncation_gap(const Eigen::MatrixXd &dense,
                             const Eigen::MatrixXd &sparse);

// Spectral norm of a symmetric matrix by power iteration.
double symmetric_norm_estimate(const Eigen::MatrixXd &e, int max_iter = 50,
                               double rel_tol = 1e-6, int *iterations = nullptr);

void write_block_sparse(const BlockSparseMatrix &m, const std::string &path);
BlockSparseMatrix read_block_sparse(const std::string &path);
void write_matrix_market(const SparseMatrix &m, const std::string &path);

} // namespace mlkrig::assembly
