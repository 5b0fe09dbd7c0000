#pragma once

#include <optional>

#include <Eigen/Dense>
#include <json.hpp>

#include "mlkrig/index_sets.hpp"
#include "mlkrig/kernels.hpp"
#include "mlkrig/multilevel_basis.hpp"
#include "mlkrig/sparse_solver.hpp"

namespace mlkrig::prediction {

enum class PrecondMode { On, Off, Auto };

PrecondMode parse_precond(const std::string &s);
std::string to_string(PrecondMode m);

struct KrigingSolution {
  Eigen::VectorXd gamma_w;
  Eigen::VectorXd gamma;
  Eigen::VectorXd beta_hat;
  int iterations = 0;
  double residual = 0.0;
  bool preconditioned = false;
  double precond_seconds = 0.0;
  double iterate_seconds = 0.0;
  solver::PcgResult pcg;

  nlohmann::json to_json() const;
};

struct SolveOptions {
  PrecondMode precond = PrecondMode::On;
  double eps = 1e-3;
  int max_iter = 5000;
  // Below this relative size of Z_W the data is treated as pure trend.
  double trend_tol = 1e-12;
};

// PCG on v -> W C W^T v. The operator defaults to direct summation.
KrigingSolution solve_gamma(const basis::MultiLevelBasis &b,
                            const kernels::KernelSpec &spec, const Points &points,
                            const Eigen::VectorXd &z, const SolveOptions &opts = {},
                            const kernels::KernelOperator *op = nullptr);

struct BetaResult {
  Eigen::VectorXd beta;
  Index rank = 0;
  bool rank_deficient = false;
};

// Least-squares projection of Z - C gamma onto the trend columns.
BetaResult recover_beta(const Eigen::VectorXd &gamma, const Eigen::VectorXd &z,
                        const Eigen::MatrixXd &m, const kernels::KernelSpec &spec,
                        const Points &points,
                        const kernels::KernelOperator *op = nullptr);

// k(x0)^T beta + c(x0)^T gamma for every column of targets.
Eigen::VectorXd predict(const Points &targets, const Eigen::VectorXd &beta,
                        const Eigen::VectorXd &gamma,
                        const kernels::KernelSpec &spec, const Points &points,
                        const index_sets::MultiIndexSet &trend_set);

// Dense universal kriging on a full factorization of C. Used for the MSE
// and as the saddle-system oracle.
class DenseKriging {
public:
  DenseKriging(const kernels::KernelSpec &spec, const Points &points,
               const index_sets::MultiIndexSet &trend_set);

  // Solves [C M; M^T 0][gamma; beta] = [Z; 0].
  std::pair<Eigen::VectorXd, Eigen::VectorXd> solve(const Eigen::VectorXd &z) const;
  // Best linear unbiased predictor at the targets.
  Eigen::VectorXd blup(const Points &targets, const Eigen::VectorXd &z) const;
  double mse(const Eigen::Ref<const Eigen::VectorXd> &x0) const;
  // Kriging weights lambda with M^T lambda = k(x0).
  Eigen::VectorXd weights(const Eigen::Ref<const Eigen::VectorXd> &x0) const;
  const Eigen::MatrixXd &trend_matrix() const { return m_; }

private:
  kernels::KernelSpec spec_;
  const Points &points_;
  index_sets::MultiIndexSet trend_set_;
  Eigen::MatrixXd m_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::MatrixXd cim_;  // C^{-1} M
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> gls_; // M^T C^{-1} M
};

double prediction_mse(const Eigen::Ref<const Eigen::VectorXd> &x0,
                      const kernels::KernelSpec &spec, const Points &points,
                      const index_sets::MultiIndexSet &trend_set);

} // namespace mlkrig::prediction
