#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mlkrig/types.hpp"

namespace mlkrig::kernels {

enum class Family { Matern, Gaussian };

// Modified Bessel function of the second kind K_nu(x), nu >= 0, x > 0.
double bessel_k(double nu, double x);

// Matern correlation through the Bessel function, for any nu.
double matern_general(double r, double nu, double rho);
// Closed form for nu = n + 1/2.
double matern_half_integer(double r, int n, double rho);
// Dispatching Matern: 1 at the origin, closed form for half-integer nu.
double matern(double r, double nu, double rho);
double gaussian(double r, double h);

// sqrt((x-y)^T diag(theta) (x-y))
double aniso_distance(const Eigen::Ref<const Eigen::VectorXd> &x,
                      const Eigen::Ref<const Eigen::VectorXd> &y,
                      const std::vector<double> &theta);

struct KernelSpec {
  Family family = Family::Matern;
  double nu = 0.5;
  double rho = 1.0;
  // When non-empty, distances are theta-weighted and rho is not used.
  std::vector<double> theta;

  void validate() const;
  std::string describe() const;
};

KernelSpec parse_kernel(const nlohmann::json &j);
nlohmann::json to_json(const KernelSpec &spec);

// Evaluator with the per-spec constants hoisted out of the inner loop.
class Kernel {
public:
  explicit Kernel(const KernelSpec &spec);

  const KernelSpec &spec() const { return spec_; }
  // Correlation as a function of (scaled) distance.
  double of_distance(double r) const;
  double operator()(const double *x, const double *y, Index d) const;

private:
  KernelSpec spec_;
  int half_n_ = -1;
  double scale_ = 1.0;  // sqrt(2 nu) / rho, or 1/rho for Gaussian
  double log_pref_ = 0; // (1 - nu) log 2 - lgamma(nu)
  std::vector<double> half_coef_;
  std::vector<double> sqrt_theta_;
};

inline constexpr std::size_t kDenseCap = 100000000;

Eigen::MatrixXd cov_matrix(const Points &a, const Points &b,
                           const KernelSpec &spec,
                           std::size_t cap = kDenseCap);
Eigen::MatrixXd cov_matrix(const Points &a, const KernelSpec &spec,
                           std::size_t cap = kDenseCap);

// Direct O(N^2) summation C v.
Eigen::VectorXd cov_matvec(const Points &pts, const KernelSpec &spec,
                           const Eigen::Ref<const Eigen::VectorXd> &v);

// Matrix-vector seam used by the solvers. DirectSummation evaluates the
// kernel on the fly; CachedDense stores C once.
class KernelOperator {
public:
  virtual ~KernelOperator() = default;
  virtual Index size() const = 0;
  virtual Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd> &v) const = 0;
};

class DirectSummation : public KernelOperator {
public:
  DirectSummation(const Points &pts, const KernelSpec &spec)
      : pts_(pts), spec_(spec) {}
  Index size() const override { return pts_.cols(); }
  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd> &v) const override {
    return cov_matvec(pts_, spec_, v);
  }

private:
  const Points &pts_;
  KernelSpec spec_;
};

class CachedDense : public KernelOperator {
public:
  CachedDense(const Points &pts, const KernelSpec &spec)
      : c_(cov_matrix(pts, spec)) {}
  explicit CachedDense(Eigen::MatrixXd c) : c_(std::move(c)) {}
  Index size() const override { return c_.rows(); }
  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd> &v) const override {
    return c_.selfadjointView<Eigen::Lower>() * v;
  }
  const Eigen::MatrixXd &matrix() const { return c_; }

private:
  Eigen::MatrixXd c_;
};

} // namespace mlkrig::kernels
