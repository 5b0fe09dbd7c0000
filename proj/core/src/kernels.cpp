#include "mlkrig/kernels.hpp"

#include <cmath>
#include <sstream>

#include "mlkrig/error.hpp"

namespace mlkrig::kernels {

namespace {

constexpr double kOriginFloor = 1e-9;
constexpr int kMaxHalfInteger = 30;

// Returns n when nu = n + 1/2 within roundoff, otherwise -1.
int half_integer_order(double nu) {
  const double m = nu - 0.5;
  const double r = std::round(m);
  if (r < 0 || r > kMaxHalfInteger || std::abs(m - r) > 1e-14)
    return -1;
  return static_cast<int>(r);
}

// n!/(2n)! (n+k)!/(k!(n-k)!) for k = 0..n, stored by power n-k.
std::vector<double> half_integer_coefficients(int n) {
  std::vector<double> c(n + 1);
  const double lead = std::lgamma(n + 1.0) - std::lgamma(2.0 * n + 1.0);
  for (int k = 0; k <= n; ++k)
    c[n - k] = std::exp(lead + std::lgamma(n + k + 1.0) - std::lgamma(k + 1.0) -
                        std::lgamma(n - k + 1.0));
  return c;
}

double half_integer_eval(double s, double nu, const std::vector<double> &c) {
  // exp(-sqrt(2nu) s) sum_j c_j (sqrt(8nu) s)^j
  const double u = std::sqrt(8.0 * nu) * s;
  double poly = 0.0;
  for (std::size_t j = c.size(); j-- > 0;)
    poly = poly * u + c[j];
  return std::exp(-std::sqrt(2.0 * nu) * s) * poly;
}

double general_eval(double z, double nu, double log_pref) {
  if (z < kOriginFloor)
    return 1.0;
  const double k = bessel_k(nu, z);
  if (!std::isfinite(k) || k <= 0.0)
    return k <= 0.0 ? 0.0 : 1.0;
  return std::exp(log_pref + nu * std::log(z) + std::log(k));
}

} // namespace

double matern_general(double r, double nu, double rho) {
  if (!std::isfinite(r) || r < 0)
    throw ConfigError("matern: distance must be finite and non-negative");
  const double z = std::sqrt(2.0 * nu) * r / rho;
  const double log_pref = (1.0 - nu) * std::log(2.0) - std::lgamma(nu);
  return general_eval(z, nu, log_pref);
}

double matern_half_integer(double r, int n, double rho) {
  if (!std::isfinite(r) || r < 0)
    throw ConfigError("matern: distance must be finite and non-negative");
  return half_integer_eval(r / rho, n + 0.5, half_integer_coefficients(n));
}

double matern(double r, double nu, double rho) {
  if (!(nu > 0) || !(rho > 0))
    throw ConfigError("matern: nu and rho must be positive");
  const int n = half_integer_order(nu);
  if (n >= 0)
    return matern_half_integer(r, n, rho);
  return matern_general(r, nu, rho);
}

double gaussian(double r, double h) {
  if (!std::isfinite(r) || r < 0)
    throw ConfigError("gaussian: distance must be finite and non-negative");
  return std::exp(-r * r / (2.0 * h * h));
}

double aniso_distance(const Eigen::Ref<const Eigen::VectorXd> &x,
                      const Eigen::Ref<const Eigen::VectorXd> &y,
                      const std::vector<double> &theta) {
  if (x.size() != y.size() || static_cast<std::size_t>(x.size()) != theta.size())
    throw ConfigError("aniso_distance: dimension mismatch");
  double s = 0.0;
  for (Eigen::Index n = 0; n < x.size(); ++n) {
    if (!(theta[n] > 0))
      throw ConfigError("aniso_distance: theta entries must be positive");
    const double diff = x[n] - y[n];
    s += theta[n] * diff * diff;
  }
  return std::sqrt(s);
}

void KernelSpec::validate() const {
  if (family == Family::Matern && !(nu > 0))
    throw ConfigError("kernel.nu must be positive");
  if (theta.empty() && !(rho > 0))
    throw ConfigError("kernel.rho must be positive");
  for (double t : theta)
    if (!(t > 0))
      throw ConfigError("kernel.theta entries must be positive");
}

std::string KernelSpec::describe() const {
  std::ostringstream os;
  os << (family == Family::Matern ? "matern" : "gaussian");
  if (family == Family::Matern)
    os << "(nu=" << nu;
  else
    os << "(";
  if (theta.empty())
    os << (family == Family::Matern ? ", " : "") << "rho=" << rho << ")";
  else
    os << (family == Family::Matern ? ", " : "") << "aniso d=" << theta.size() << ")";
  return os.str();
}

KernelSpec parse_kernel(const nlohmann::json &j) {
  if (!j.is_object())
    throw ConfigError("kernel: expected an object");
  KernelSpec s;
  const std::string fam = j.value("family", std::string("matern"));
  if (fam == "matern")
    s.family = Family::Matern;
  else if (fam == "gaussian")
    s.family = Family::Gaussian;
  else
    throw ConfigError("kernel.family: unknown family '" + fam + "'");
  if (j.contains("nu"))
    s.nu = j.at("nu").get<double>();
  if (j.contains("rho"))
    s.rho = j.at("rho").get<double>();
  if (j.contains("h"))
    s.rho = j.at("h").get<double>();
  if (j.contains("theta")) {
    if (j.contains("rho") || j.contains("h"))
      throw ConfigError("kernel: theta and rho are mutually exclusive");
    s.theta = j.at("theta").get<std::vector<double>>();
  }
  s.validate();
  return s;
}

nlohmann::json to_json(const KernelSpec &spec) {
  nlohmann::json j;
  j["family"] = spec.family == Family::Matern ? "matern" : "gaussian";
  if (spec.family == Family::Matern)
    j["nu"] = spec.nu;
  if (spec.theta.empty())
    j["rho"] = spec.rho;
  else
    j["theta"] = spec.theta;
  return j;
}

Kernel::Kernel(const KernelSpec &spec) : spec_(spec) {
  spec_.validate();
  const double rho = spec_.theta.empty() ? spec_.rho : 1.0;
  if (spec_.family == Family::Matern) {
    half_n_ = half_integer_order(spec_.nu);
    scale_ = std::sqrt(2.0 * spec_.nu) / rho;
    log_pref_ = (1.0 - spec_.nu) * std::log(2.0) - std::lgamma(spec_.nu);
    if (half_n_ >= 0)
      half_coef_ = half_integer_coefficients(half_n_);
  } else {
    scale_ = 1.0 / rho;
  }
  for (double t : spec_.theta)
    sqrt_theta_.push_back(std::sqrt(t));
}

double Kernel::of_distance(double r) const {
  if (spec_.family == Family::Gaussian) {
    const double s = r * scale_;
    return std::exp(-0.5 * s * s);
  }
  if (half_n_ >= 0) {
    // half_integer_eval expects s = r/rho; scale_ = sqrt(2 nu)/rho
    const double s = r * scale_ / std::sqrt(2.0 * spec_.nu);
    return half_integer_eval(s, spec_.nu, half_coef_);
  }
  return general_eval(r * scale_, spec_.nu, log_pref_);
}

double Kernel::operator()(const double *x, const double *y, Index d) const {
  double s = 0.0;
  if (sqrt_theta_.empty()) {
    for (Index n = 0; n < d; ++n) {
      const double diff = x[n] - y[n];
      s += diff * diff;
    }
  } else {
    for (Index n = 0; n < d; ++n) {
      const double diff = (x[n] - y[n]) * sqrt_theta_[n];
      s += diff * diff;
    }
  }
  return of_distance(std::sqrt(s));
}

Eigen::MatrixXd cov_matrix(const Points &a, const Points &b,
                           const KernelSpec &spec, std::size_t cap) {
  if (a.cols() == 0 || b.cols() == 0)
    throw ConfigError("cov_matrix: empty point set");
  if (a.rows() != b.rows())
    throw ConfigError("cov_matrix: dimension mismatch");
  if (static_cast<std::size_t>(a.cols()) * static_cast<std::size_t>(b.cols()) > cap)
    throw ConfigError("cov_matrix: dense size exceeds cap");
  const Kernel k(spec);
  const Index d = a.rows();
  Eigen::MatrixXd c(a.cols(), b.cols());
  for (Index j = 0; j < b.cols(); ++j)
    for (Index i = 0; i < a.cols(); ++i)
      c(i, j) = k(a.col(i).data(), b.col(j).data(), d);
  return c;
}

Eigen::MatrixXd cov_matrix(const Points &a, const KernelSpec &spec,
                           std::size_t cap) {
  if (a.cols() == 0)
    throw ConfigError("cov_matrix: empty point set");
  if (static_cast<std::size_t>(a.cols()) * static_cast<std::size_t>(a.cols()) > cap)
    throw ConfigError("cov_matrix: dense size exceeds cap");
  const Kernel k(spec);
  const Index n = a.cols(), d = a.rows();
  Eigen::MatrixXd c(n, n);
  for (Index j = 0; j < n; ++j) {
    c(j, j) = 1.0;
    for (Index i = j + 1; i < n; ++i) {
      const double v = k(a.col(i).data(), a.col(j).data(), d);
      c(i, j) = v;
      c(j, i) = v;
    }
  }
  return c;
}

Eigen::VectorXd cov_matvec(const Points &pts, const KernelSpec &spec,
                           const Eigen::Ref<const Eigen::VectorXd> &v) {
  if (v.size() != pts.cols())
    throw ConfigError("cov_matvec: length mismatch");
  const Kernel k(spec);
  const Index n = pts.cols(), d = pts.rows();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (Index i = 0; i < n; ++i) {
    double acc = 0.0;
    for (Index j = 0; j < n; ++j)
      acc += (i == j ? 1.0 : k(pts.col(i).data(), pts.col(j).data(), d)) * v[j];
    out[i] = acc;
  }
  return out;
}

} // namespace mlkrig::kernels
