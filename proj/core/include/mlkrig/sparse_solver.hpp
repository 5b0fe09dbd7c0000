#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <json.hpp>

#include "mlkrig/covariance_assembly.hpp"
#include "mlkrig/error.hpp"
#include "mlkrig/kernels.hpp"
#include "mlkrig/multilevel_basis.hpp"

namespace mlkrig::solver {

using SparseMatrix = assembly::SparseMatrix;
using Operator = std::function<Eigen::VectorXd(const Eigen::VectorXd &)>;

// order[k] is the original row/column placed at position k.
std::vector<Index> fill_reducing_ordering(const SparseMatrix &pattern);
std::vector<Index> natural_ordering(Index n);

// Elimination tree and column counts of the factor of P^T A P. Depends
// on the pattern only, so it is reused across numeric refactorizations.
struct SymbolicCholesky {
  Index n = 0;
  std::vector<Index> order;
  std::vector<Index> inverse;
  std::vector<Index> parent;
  std::vector<Index> colptr; // column pointers of L
  Index nnz() const { return colptr.empty() ? 0 : colptr.back(); }
};

SymbolicCholesky analyze(const SparseMatrix &a, const std::vector<Index> &order);

class CholeskyFactor {
public:
  // Sparse up-looking factorization with an AMD-style ordering; dense LLT
  // below dense_threshold. Throws NotSpdError carrying the failing column
  // in the original numbering.
  static CholeskyFactor factorize(const SparseMatrix &a, Index dense_threshold = 512);
  static CholeskyFactor factorize(const SparseMatrix &a, const SymbolicCholesky &sym);
  static CholeskyFactor factorize_dense(const Eigen::MatrixXd &a);

  Index size() const { return n_; }
  bool is_dense() const { return dense_; }
  double log_det() const;
  Eigen::VectorXd solve(const Eigen::VectorXd &b) const;
  // ||G^{-1} P^T b||^2 = b^T A^{-1} b
  double inverse_quadratic(const Eigen::VectorXd &b) const;
  Index factor_nnz() const;
  const std::vector<Index> &order() const { return order_; }
  Eigen::VectorXd diagonal() const;
  // Lower factor G as a sparse matrix in the permuted numbering.
  SparseMatrix factor() const;

private:
  Eigen::VectorXd forward(const Eigen::VectorXd &pb) const;  // G y = pb
  Eigen::VectorXd backward(const Eigen::VectorXd &y) const; // G^T x = y

  Index n_ = 0;
  bool dense_ = false;
  std::vector<Index> order_;
  Eigen::MatrixXd dense_l_;
  std::vector<Index> lp_;
  std::vector<Index> li_;
  std::vector<double> lx_;
};

double log_det(const CholeskyFactor &f);

class BlockPreconditioner {
public:
  static BlockPreconditioner identity(Index dim);
  // Gram block of every cell's detail vectors against C.
  static BlockPreconditioner build(const basis::MultiLevelBasis &b,
                                   const kernels::KernelSpec &spec,
                                   const Points &points, int n = -1);
  // Diagonal cell blocks taken from an assembled matrix.
  static BlockPreconditioner from_matrix(const assembly::BlockSparseMatrix &m);

  bool is_identity() const { return identity_; }
  Index dim() const { return dim_; }
  std::size_t num_blocks() const { return blocks_.size(); }
  Eigen::VectorXd apply(const Eigen::VectorXd &r) const;

private:
  struct Block {
    Index offset = 0;
    Eigen::LLT<Eigen::MatrixXd> llt;
  };
  bool identity_ = true;
  Index dim_ = 0;
  std::vector<Block> blocks_;
};

struct PcgResult {
  Eigen::VectorXd x;
  int iterations = 0;
  bool converged = false;
  double relative_residual = 0.0; // true, unpreconditioned
  std::vector<double> residual_history; // recurrence residual per iteration
  std::vector<std::pair<int, double>> true_residuals;
  nlohmann::json to_json() const;
};

class PcgNotConverged : public NumericalError {
public:
  explicit PcgNotConverged(PcgResult r)
      : NumericalError("PCG did not converge within the iteration limit"),
        result(std::move(r)) {}
  PcgResult result;
};

// Convergence is declared on ||b - A x|| / ||b|| <= eps, recomputed every
// 10 iterations and whenever the recurrence residual drops below eps.
PcgResult pcg_solve(const Operator &a, const BlockPreconditioner &precond,
                    const Eigen::VectorXd &b, double eps, int max_iter = 5000);

struct SingularValues {
  double sigma_min = 0.0;
  double sigma_max = 0.0;
  bool approximate = false;
  int iterations_max = 0;
  int iterations_min = 0;
};

SingularValues extreme_singular_values(const SparseMatrix &a);
SingularValues extreme_singular_values(const Eigen::MatrixXd &a);

// Largest |eigenvalue| of a symmetric operator.
double power_iteration(const Operator &a, Index dim, int max_iter = 2000,
                       double rel_tol = 1e-10, int *iterations = nullptr);
// Smallest Ritz value of a k-step Lanczos recurrence.
double lanczos_min(const Operator &a, Index dim, int steps = 100);

} // namespace mlkrig::solver
