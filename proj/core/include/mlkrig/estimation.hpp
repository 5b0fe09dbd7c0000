#pragma once

#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mlkrig/covariance_assembly.hpp"
#include "mlkrig/kernels.hpp"
#include "mlkrig/multilevel_basis.hpp"
#include "mlkrig/partition_tree.hpp"
#include "mlkrig/sparse_solver.hpp"

namespace mlkrig::estimation {

struct LikelihoodEvaluation {
  double nu = 0.0;
  double rho = 0.0;
  int n = -1;
  Index dim = 0;
  double value = 0.0;
  double const_term = 0.0;
  double logdet_term = 0.0;
  double quad_term = 0.0;
  bool spd = true;
  bool degenerate = false;
  Index factor_nnz = 0;
  double density = 0.0;

  nlohmann::json to_json() const;
};

// Holds everything that does not depend on (nu, rho): the partial
// transform of the data, the sparsity pattern and the symbolic analysis.
class LikelihoodContext {
public:
  LikelihoodContext(const basis::MultiLevelBasis &b,
                    const tree::PartitionTree &tree, const Points &points,
                    const Eigen::VectorXd &z, kernels::Family family,
                    double tau, int n,
                    tree::SearchRule rule = tree::SearchRule::Verbatim);

  LikelihoodEvaluation evaluate(double nu, double rho) const;
  // Replace the observations; pattern and symbolic analysis are kept.
  void set_data(const Eigen::VectorXd &z);
  const assembly::Pattern &pattern() const { return pattern_; }
  const Eigen::VectorXd &data() const { return zw_; }
  int level() const { return n_; }
  kernels::Family family() const { return family_; }

private:
  const basis::MultiLevelBasis &b_;
  const Points &points_;
  kernels::Family family_;
  int n_;
  Eigen::VectorXd zw_;
  assembly::Pattern pattern_;
  mutable std::optional<solver::SymbolicCholesky> symbolic_;
};

LikelihoodEvaluation multilevel_loglik(double nu, double rho,
                                       const Eigen::VectorXd &z,
                                       const basis::MultiLevelBasis &b,
                                       const tree::PartitionTree &tree,
                                       const Points &points,
                                       kernels::Family family, double tau, int n);

// Dense W-filtered likelihood over all detail rows (oracle).
double dense_w_loglik(const kernels::KernelSpec &spec, const Eigen::VectorXd &z,
                      const basis::MultiLevelBasis &b, const Points &points);

// Profiled GLS log-likelihood with beta replaced by its GLS estimate
// (oracle for small problems).
double profiled_loglik(const kernels::KernelSpec &spec, const Eigen::VectorXd &z,
                       const Eigen::MatrixXd &m, const Points &points);

struct OptimizerConfig {
  double nu0 = 1.0;
  double rho0 = 1.0;
  double perturbation = 0.2;
  double tolerance = 1e-6;
  int max_evaluations = 500;
};

struct FitResult {
  double nu = 0.0;
  double rho = 0.0;
  double loglik = 0.0;
  bool converged = false;
  bool non_identifiable = false;
  int evaluations = 0;
  std::vector<std::array<double, 3>> trace; // nu, rho, value
  nlohmann::json to_json() const;
};

// Nelder-Mead on (log nu, log rho).
FitResult mle_fit(const LikelihoodContext &ctx, const OptimizerConfig &cfg = {});

} // namespace mlkrig::estimation
