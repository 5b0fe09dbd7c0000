#include "mlkrig/estimation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "mlkrig/error.hpp"

namespace mlkrig::estimation {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr Index kDenseThreshold = 512;

kernels::KernelSpec make_spec(kernels::Family family, double nu, double rho) {
  kernels::KernelSpec s;
  s.family = family;
  s.nu = nu;
  s.rho = rho;
  return s;
}
} // namespace

nlohmann::json LikelihoodEvaluation::to_json() const {
  return {{"nu", nu},
          {"rho", rho},
          {"level", n},
          {"dim", dim},
          {"value", value},
          {"const_term", const_term},
          {"logdet_term", logdet_term},
          {"quad_term", quad_term},
          {"spd", spd},
          {"degenerate", degenerate},
          {"factor_nnz", factor_nnz},
          {"density", density}};
}

LikelihoodContext::LikelihoodContext(const basis::MultiLevelBasis &b,
                                     const tree::PartitionTree &tree,
                                     const Points &points,
                                     const Eigen::VectorXd &z,
                                     kernels::Family family, double tau, int n,
                                     tree::SearchRule rule)
    : b_(b), points_(points), family_(family), n_(n) {
  if (z.size() != b.n)
    throw ConfigError("likelihood: data length does not match the basis");
  zw_ = basis::partial_transform(b, z, n);
  pattern_ = assembly::build_pattern(b, tree, points, tau, n, rule);
}

void LikelihoodContext::set_data(const Eigen::VectorXd &z) {
  if (z.size() != b_.n)
    throw ConfigError("likelihood: data length does not match the basis");
  zw_ = basis::partial_transform(b_, z, n_);
}

LikelihoodEvaluation LikelihoodContext::evaluate(double nu, double rho) const {
  LikelihoodEvaluation e;
  e.nu = nu;
  e.rho = rho;
  e.n = n_;
  e.dim = zw_.size();
  e.const_term = -0.5 * static_cast<double>(e.dim) * kLog2Pi;
  if (e.dim == 0) {
    e.degenerate = true;
    e.value = e.const_term;
    return e;
  }
  const auto spec = make_spec(family_, nu, rho);
  const auto m = assembly::assemble(pattern_, b_, points_, spec);
  e.density = m.density();
  const auto a = m.to_sparse();
  try {
    solver::CholeskyFactor f;
    if (e.dim < kDenseThreshold) {
      f = solver::CholeskyFactor::factorize_dense(Eigen::MatrixXd(a));
    } else {
      if (!symbolic_)
        symbolic_ = solver::analyze(a, solver::fill_reducing_ordering(a));
      f = solver::CholeskyFactor::factorize(a, *symbolic_);
    }
    e.factor_nnz = f.factor_nnz();
    e.logdet_term = -0.5 * f.log_det();
    e.quad_term = -0.5 * f.inverse_quadratic(zw_);
    e.value = e.const_term + e.logdet_term + e.quad_term;
  } catch (const NotSpdError &) {
    e.spd = false;
    e.value = -std::numeric_limits<double>::infinity();
  }
  return e;
}

LikelihoodEvaluation multilevel_loglik(double nu, double rho,
                                       const Eigen::VectorXd &z,
                                       const basis::MultiLevelBasis &b,
                                       const tree::PartitionTree &tree,
                                       const Points &points,
                                       kernels::Family family, double tau, int n) {
  return LikelihoodContext(b, tree, points, z, family, tau, n).evaluate(nu, rho);
}

double dense_w_loglik(const kernels::KernelSpec &spec, const Eigen::VectorXd &z,
                      const basis::MultiLevelBasis &b, const Points &points) {
  const Eigen::MatrixXd cw = assembly::assemble_dense_CW(b, spec, points);
  const Eigen::VectorXd zw = basis::apply_W(b, z);
  Eigen::LLT<Eigen::MatrixXd> llt(cw);
  if (llt.info() != Eigen::Success)
    throw NumericalError("dense_w_loglik: C_W is not positive definite");
  const Eigen::MatrixXd l = llt.matrixL();
  const double logdet = 2.0 * l.diagonal().array().log().sum();
  const double quad = llt.matrixL().solve(zw).squaredNorm();
  return -0.5 * static_cast<double>(zw.size()) * kLog2Pi - 0.5 * logdet - 0.5 * quad;
}

double profiled_loglik(const kernels::KernelSpec &spec, const Eigen::VectorXd &z,
                       const Eigen::MatrixXd &m, const Points &points) {
  const Eigen::MatrixXd c = kernels::cov_matrix(points, spec);
  Eigen::LLT<Eigen::MatrixXd> llt(c);
  if (llt.info() != Eigen::Success)
    throw NumericalError("profiled_loglik: C is not positive definite");
  const Eigen::MatrixXd cim = llt.solve(m);
  const Eigen::MatrixXd mtcim = m.transpose() * cim;
  const Eigen::VectorXd beta =
      mtcim.completeOrthogonalDecomposition().solve(cim.transpose() * z);
  const Eigen::VectorXd r = z - m * beta;
  const Eigen::MatrixXd l = llt.matrixL();
  const double logdet = 2.0 * l.diagonal().array().log().sum();
  const double quad = r.dot(llt.solve(r));
  return -0.5 * static_cast<double>(z.size()) * kLog2Pi - 0.5 * logdet - 0.5 * quad;
}

nlohmann::json FitResult::to_json() const {
  nlohmann::json tr = nlohmann::json::array();
  for (const auto &t : trace)
    tr.push_back({t[0], t[1], std::isfinite(t[2]) ? nlohmann::json(t[2]) : nlohmann::json(nullptr)});
  return {{"nu", nu},
          {"rho", rho},
          {"loglik", loglik},
          {"converged", converged},
          {"non_identifiable", non_identifiable},
          {"evaluations", evaluations},
          {"trace", tr}};
}

FitResult mle_fit(const LikelihoodContext &ctx, const OptimizerConfig &cfg) {
  if (!(cfg.nu0 > 0) || !(cfg.rho0 > 0))
    throw ConfigError("mle_fit: initial parameters must be positive");
  FitResult res;
  using Vec = std::array<double, 2>;
  // Minimize the negative log-likelihood; infeasible points map to +inf.
  auto objective = [&](const Vec &x) {
    const double nu = std::exp(x[0]), rho = std::exp(x[1]);
    const auto e = ctx.evaluate(nu, rho);
    ++res.evaluations;
    res.trace.push_back({nu, rho, e.value});
    return std::isfinite(e.value) ? -e.value : std::numeric_limits<double>::infinity();
  };

  const double l0 = std::log(cfg.nu0), l1 = std::log(cfg.rho0);
  const double step = std::log1p(cfg.perturbation);
  std::array<Vec, 3> x{Vec{l0, l1}, Vec{l0 + step, l1}, Vec{l0, l1 + step}};
  std::array<double, 3> f{};
  for (int k = 0; k < 3; ++k)
    f[k] = objective(x[k]);
  if (std::all_of(f.begin(), f.end(), [](double v) { return !std::isfinite(v); }))
    throw NumericalError("mle_fit: every initial point is infeasible (covariance "
                         "not positive definite); increase tau or w");
  {
    const auto [lo, hi] = std::minmax_element(f.begin(), f.end());
    if (std::isfinite(*hi) && *hi - *lo < cfg.tolerance)
      res.non_identifiable = true;
  }

  auto order = [&] {
    std::array<int, 3> idx{0, 1, 2};
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return f[a] < f[b]; });
    std::array<Vec, 3> xs{x[idx[0]], x[idx[1]], x[idx[2]]};
    std::array<double, 3> fs{f[idx[0]], f[idx[1]], f[idx[2]]};
    x = xs;
    f = fs;
  };
  auto lerp = [](const Vec &a, const Vec &b, double t) {
    return Vec{a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])};
  };

  while (true) {
    order();
    if (std::isfinite(f[2]) && f[2] - f[0] < cfg.tolerance) {
      res.converged = true;
      break;
    }
    if (res.evaluations >= cfg.max_evaluations)
      break;
    const Vec c{0.5 * (x[0][0] + x[1][0]), 0.5 * (x[0][1] + x[1][1])};
    const Vec xr = lerp(c, x[2], -1.0);
    const double fr = objective(xr);
    if (fr < f[0]) {
      const Vec xe = lerp(c, x[2], -2.0);
      const double fe = objective(xe);
      if (fe < fr) {
        x[2] = xe;
        f[2] = fe;
      } else {
        x[2] = xr;
        f[2] = fr;
      }
      continue;
    }
    if (fr < f[1]) {
      x[2] = xr;
      f[2] = fr;
      continue;
    }
    const bool outside = fr < f[2];
    const Vec xc = outside ? lerp(c, xr, 0.5) : lerp(c, x[2], 0.5);
    const double fc = objective(xc);
    if (fc < (outside ? fr : f[2])) {
      x[2] = xc;
      f[2] = fc;
      continue;
    }
    for (int k = 1; k < 3; ++k) {
      x[k] = lerp(x[0], x[k], 0.5);
      f[k] = objective(x[k]);
    }
  }
  order();
  res.nu = std::exp(x[0][0]);
  res.rho = std::exp(x[0][1]);
  res.loglik = -f[0];
  return res;
}

} // namespace mlkrig::estimation
