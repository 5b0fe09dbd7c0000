#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "mlkrig/kernels.hpp"

namespace mlkrig::bounds {

enum class Regime { SubExponential, Algebraic };
std::string to_string(Regime r);

// w + a > d / log 2 selects the sub-exponential branch.
Regime select_regime(int d, int level);

struct Radius {
  double literal = 0.0;   // the displayed log, negative for tau > 0
  double magnitude = 0.0; // |log(argument)| = acosh(tau/(2d) + 1)
  bool sign_flag = false; // literal value is not positive
};

Radius analyticity_radius(double tau_ij, int d);

double gaussian_extension_bound(const std::vector<double> &theta,
                                double sigma_hat, int d);
// nu = n + 1/2 with n >= 1.
double matern_extension_bound(double nu, const std::vector<double> &theta,
                              double sigma_hat);

// Kernel scalings in the theta-weighted form r^2 = sum theta_n (x_n - y_n)^2.
std::vector<double> kernel_theta(const kernels::KernelSpec &spec, int d);

struct Constants {
  double sigma = 0.0;
  double delta_star = 0.0;
  double c_sigma = 0.0;   // C(sigma)
  double c2_tilde = 0.0;  // C~_2(sigma)
  double a = 0.0;         // a(delta*, sigma)
  double c1 = 0.0;        // C_1(sigma, delta*, M~)
  double q = 0.0;         // Q(sigma, delta*, d, M~)
  double mu1 = 0.0;
  double mu2 = 0.0;
  double mu3 = 0.0;
  double m_tilde = 0.0;

  nlohmann::json to_json() const;
};

Constants constants(double sigma, int d, double m_tilde);
double c1_of(double sigma, double m_tilde);

struct DecayBound {
  Regime regime = Regime::Algebraic;
  double eta_lower = 0.0;
  double eta_upper = 0.0;
  double at_lower = 0.0;  // bound evaluated at the lower eta estimate
  double at_upper = 0.0;
  bool singular = false;  // C_1 == 1, bound reported as infinite
  Constants constants;

  nlohmann::json to_json() const;
};

// Sparse-grid interpolation error bound with eta from the collocation
// count estimates at level w + a.
DecayBound decay_bound(double sigma, int d, int w, int a, double m_tilde);

// Per-pair bound on one block of C_W - C~_W for the Gaussian kernel,
// including the nested constant of the tensor interpolation argument.
DecayBound gaussian_pair_bound(double sigma, int d, int w, int a, double m_tilde);

struct PairBound {
  int i = 0;
  int j = 0;
  double tau_ij = 0.0;
  Radius radius;
  double sigma = 0.0;
  double m_tilde = 0.0;
  DecayBound decay;
};

struct MatrixBound {
  int n = -1;
  int t = 0;
  double p_tilde = 0.0;
  double lower = 0.0; // at the lower eta estimate
  double upper = 0.0; // at the upper eta estimate
  bool c1_below_one = true;
  std::vector<PairBound> pairs;

  nlohmann::json to_json() const;
};

// 2^(t+1) p~^2 times the sum of per-pair bounds over i, j in max(n,1)..t.
double matrix_error_bound(int n, int t, double p_tilde,
                          const std::vector<std::vector<double>> &per_pair);

struct BoundSettings {
  double tau = 1.0;
  int w = 0;
  int a = 0;
  // sigma_hat = shrink * |radius|, strictly inside the analyticity region.
  double shrink = 0.99;
  // Gaussian only: sigma_hat used for the extension bound.
  double gaussian_sigma_hat = 1.0;
};

MatrixBound matrix_bound(const kernels::KernelSpec &spec, int d, int n, int t,
                         double p_tilde, const BoundSettings &s);

struct InverseBound {
  double value = 0.0;
  bool in_regime = true; // sigma_min * ||E|| < 1
  double sigma_min = 0.0;
  double sigma_max = 0.0;
  double e_norm = 0.0;
  nlohmann::json to_json() const;
};

InverseBound inverse_perturbation_bound(double sigma_min, double sigma_max,
                                        double e_norm);

} // namespace mlkrig::bounds
