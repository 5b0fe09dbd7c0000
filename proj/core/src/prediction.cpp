#include "mlkrig/prediction.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>

#include "mlkrig/error.hpp"

namespace mlkrig::prediction {

namespace {
using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}
constexpr double kAutoKappa = 100.0;
} // namespace

PrecondMode parse_precond(const std::string &s) {
  std::string v = s;
  std::transform(v.begin(), v.end(), v.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (v == "on" || v == "true")
    return PrecondMode::On;
  if (v == "off" || v == "false")
    return PrecondMode::Off;
  if (v == "auto")
    return PrecondMode::Auto;
  throw ConfigError("unknown preconditioner mode '" + s + "' (on|off|auto)");
}

std::string to_string(PrecondMode m) {
  switch (m) {
  case PrecondMode::On:
    return "on";
  case PrecondMode::Off:
    return "off";
  case PrecondMode::Auto:
    return "auto";
  }
  return "on";
}

nlohmann::json KrigingSolution::to_json() const {
  return {{"iterations", iterations},
          {"residual", residual},
          {"preconditioned", preconditioned},
          {"precond_seconds", precond_seconds},
          {"iterate_seconds", iterate_seconds},
          {"beta_hat", std::vector<double>(beta_hat.data(), beta_hat.data() + beta_hat.size())}};
}

KrigingSolution solve_gamma(const basis::MultiLevelBasis &b,
                            const kernels::KernelSpec &spec, const Points &points,
                            const Eigen::VectorXd &z, const SolveOptions &opts,
                            const kernels::KernelOperator *op) {
  if (z.size() != b.n)
    throw ConfigError("solve_gamma: data length does not match the basis");
  if (b.n <= b.trend_rank)
    throw ConfigError("solve_gamma: need more observations than trend terms");
  spec.validate();
  std::optional<kernels::DirectSummation> direct;
  if (!op) {
    direct.emplace(points, spec);
    op = &*direct;
  }

  KrigingSolution sol;
  const Eigen::VectorXd zw = basis::apply_W(b, z);
  const Index dim = zw.size();
  if (zw.norm() <= opts.trend_tol * std::max(1.0, z.norm())) {
    sol.gamma_w = Eigen::VectorXd::Zero(dim);
    sol.gamma = Eigen::VectorXd::Zero(b.n);
    sol.pcg.x = sol.gamma_w;
    sol.pcg.converged = true;
    return sol;
  }

  const solver::Operator cw = [&](const Eigen::VectorXd &v) {
    return basis::apply_W(b, op->apply(basis::apply_WT(b, v)));
  };

  auto t0 = Clock::now();
  bool use_precond = opts.precond == PrecondMode::On;
  if (opts.precond == PrecondMode::Auto) {
    const double smax = solver::power_iteration(cw, dim, 200, 1e-6);
    const double smin = solver::lanczos_min(cw, dim, std::min<Index>(dim, 60));
    use_precond = !(smin > 0) || smax / smin >= kAutoKappa;
  }
  const auto precond = use_precond ? solver::BlockPreconditioner::build(b, spec, points)
                                   : solver::BlockPreconditioner::identity(dim);
  sol.precond_seconds = seconds_since(t0);
  sol.preconditioned = use_precond;

  t0 = Clock::now();
  sol.pcg = solver::pcg_solve(cw, precond, zw, opts.eps, opts.max_iter);
  sol.iterate_seconds = seconds_since(t0);
  sol.gamma_w = sol.pcg.x;
  sol.gamma = basis::apply_WT(b, sol.gamma_w);
  sol.iterations = sol.pcg.iterations;
  sol.residual = sol.pcg.relative_residual;
  return sol;
}

BetaResult recover_beta(const Eigen::VectorXd &gamma, const Eigen::VectorXd &z,
                        const Eigen::MatrixXd &m, const kernels::KernelSpec &spec,
                        const Points &points, const kernels::KernelOperator *op) {
  const Eigen::VectorXd cg =
      op ? op->apply(gamma) : kernels::cov_matvec(points, spec, gamma);
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(m);
  cod.setThreshold(1e-10);
  BetaResult r;
  r.beta = cod.solve(z - cg);
  r.rank = cod.rank();
  r.rank_deficient = r.rank < m.cols();
  return r;
}

Eigen::VectorXd predict(const Points &targets, const Eigen::VectorXd &beta,
                        const Eigen::VectorXd &gamma,
                        const kernels::KernelSpec &spec, const Points &points,
                        const index_sets::MultiIndexSet &trend_set) {
  if (targets.rows() != points.rows())
    throw ConfigError("predict: target dimension does not match the data");
  if (beta.size() != static_cast<Index>(trend_set.size()))
    throw ConfigError("predict: beta length does not match the trend set");
  const kernels::Kernel k(spec);
  const Index d = points.rows();
  Eigen::VectorXd out(targets.cols());
  for (Index j = 0; j < targets.cols(); ++j) {
    const double *x0 = targets.col(j).data();
    double s = basis::monomial_row(targets.col(j), trend_set).dot(beta);
    for (Index i = 0; i < points.cols(); ++i)
      s += k(x0, points.col(i).data(), d) * gamma[i];
    out[j] = s;
  }
  return out;
}

DenseKriging::DenseKriging(const kernels::KernelSpec &spec, const Points &points,
                           const index_sets::MultiIndexSet &trend_set)
    : spec_(spec), points_(points), trend_set_(trend_set),
      m_(basis::design_matrix(points, trend_set)) {
  llt_.compute(kernels::cov_matrix(points, spec));
  if (llt_.info() != Eigen::Success)
    throw NumericalError("dense kriging: C is not positive definite");
  cim_ = llt_.solve(m_);
  gls_.setThreshold(1e-10);
  gls_.compute(m_.transpose() * cim_);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd>
DenseKriging::solve(const Eigen::VectorXd &z) const {
  const Eigen::VectorXd beta = gls_.solve(cim_.transpose() * z);
  const Eigen::VectorXd gamma = llt_.solve(z - m_ * beta);
  return {gamma, beta};
}

Eigen::VectorXd DenseKriging::blup(const Points &targets, const Eigen::VectorXd &z) const {
  const auto [gamma, beta] = solve(z);
  return predict(targets, beta, gamma, spec_, points_, trend_set_);
}

Eigen::VectorXd DenseKriging::weights(const Eigen::Ref<const Eigen::VectorXd> &x0) const {
  const Eigen::MatrixXd x = x0;
  const Eigen::VectorXd c = kernels::cov_matrix(points_, x, spec_).col(0);
  const Eigen::VectorXd k0 = basis::monomial_row(x0, trend_set_);
  const Eigen::VectorXd u = cim_.transpose() * c - k0;
  const Eigen::VectorXd lam_m = gls_.solve(u);
  return llt_.solve(c - m_ * lam_m);
}

double DenseKriging::mse(const Eigen::Ref<const Eigen::VectorXd> &x0) const {
  const Eigen::MatrixXd x = x0;
  const Eigen::VectorXd c = kernels::cov_matrix(points_, x, spec_).col(0);
  const Eigen::VectorXd u = cim_.transpose() * c - basis::monomial_row(x0, trend_set_);
  const double cc = c.dot(llt_.solve(c));
  return 1.0 + u.dot(gls_.solve(u)) - cc;
}

double prediction_mse(const Eigen::Ref<const Eigen::VectorXd> &x0,
                      const kernels::KernelSpec &spec, const Points &points,
                      const index_sets::MultiIndexSet &trend_set) {
  return DenseKriging(spec, points, trend_set).mse(x0);
}

} // namespace mlkrig::prediction
