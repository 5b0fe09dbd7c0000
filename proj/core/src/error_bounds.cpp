#include "mlkrig/error_bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "mlkrig/error.hpp"
#include "mlkrig/index_sets.hpp"

namespace mlkrig::bounds {

namespace {
constexpr double kE = std::numbers::e;
constexpr double kLn2 = std::numbers::ln2;
constexpr double kInf = std::numeric_limits<double>::infinity();

// max{1, c}^d / |1 - c|
double amplifier(double c, int d) {
  const double den = std::abs(1.0 - c);
  if (den == 0.0)
    return kInf;
  return std::pow(std::max(1.0, c), d) / den;
}

nlohmann::json num(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}
} // namespace

std::string to_string(Regime r) {
  return r == Regime::SubExponential ? "sub_exponential" : "algebraic";
}

Regime select_regime(int d, int level) {
  return level > d / kLn2 ? Regime::SubExponential : Regime::Algebraic;
}

Radius analyticity_radius(double tau_ij, int d) {
  if (!(tau_ij > 0))
    throw ConfigError("analyticity_radius: tau must be positive");
  if (d < 1)
    throw ConfigError("analyticity_radius: d must be >= 1");
  const double x = tau_ij / (2.0 * d);
  Radius r;
  r.literal = std::log(x + 1.0 - std::sqrt(x * (x + 2.0)));
  r.magnitude = std::acosh(x + 1.0);
  r.sign_flag = !(r.literal > 0);
  return r;
}

double gaussian_extension_bound(const std::vector<double> &theta,
                                double sigma_hat, int d) {
  if (!(sigma_hat > 0))
    throw ConfigError("gaussian_extension_bound: sigma_hat must be positive");
  double log_b = 2.0 * d * (std::exp(2.0 * sigma_hat) + std::exp(-2.0 * sigma_hat));
  for (double th : theta) {
    if (th < 0)
      throw ConfigError("gaussian_extension_bound: theta must be nonnegative");
    log_b += th;
  }
  return std::exp(log_b);
}

double matern_extension_bound(double nu, const std::vector<double> &theta,
                              double sigma_hat) {
  const double nh = nu - 0.5;
  const int n = static_cast<int>(std::lround(nh));
  if (std::abs(nh - n) > 1e-12 || n < 1)
    throw ConfigError("matern_extension_bound: needs nu = n + 1/2 with n >= 1");
  double tn = 0.0;
  for (double th : theta)
    tn += th * th;
  tn = std::sqrt(tn);
  const double alpha = tn * std::sqrt(2.0 * (3.0 + std::sqrt(2.0) * std::exp(sigma_hat)));
  const double base = std::sqrt(8.0 * nu) * alpha;
  double sum = 0.0;
  for (int k = 1; k <= n; ++k)
    sum += std::exp(std::lgamma(n + 2.0) - std::lgamma(n + 1.0) - std::lgamma(n - k + 1.0)) *
           std::pow(base, n - k);
  const double pref = std::exp(-std::sqrt(4.0 * (3.0 + std::sqrt(2.0))) * nu * tn +
                               std::lgamma(n + 1.0) - std::lgamma(2.0 * n + 1.0));
  return pref * sum;
}

std::vector<double> kernel_theta(const kernels::KernelSpec &spec, int d) {
  // The Gaussian kernel is exp(-r^2 / 2), so its weights are halved.
  const double g = spec.family == kernels::Family::Gaussian ? 0.5 : 1.0;
  std::vector<double> theta = spec.theta;
  if (theta.empty())
    theta.assign(static_cast<std::size_t>(d), 1.0 / (spec.rho * spec.rho));
  for (double &th : theta)
    th *= g;
  return theta;
}

nlohmann::json Constants::to_json() const {
  return {{"sigma", num(sigma)},       {"delta_star", num(delta_star)},
          {"C_sigma", num(c_sigma)},   {"C2_tilde", num(c2_tilde)},
          {"a", num(a)},               {"C1", num(c1)},
          {"Q", num(q)},               {"mu1", num(mu1)},
          {"mu2", num(mu2)},           {"mu3", num(mu3)},
          {"M_tilde", num(m_tilde)}};
}

Constants constants(double sigma, int d, double m_tilde) {
  if (!(sigma > 0))
    throw ConfigError("error bound constants: sigma must be positive");
  if (d < 1)
    throw ConfigError("error bound constants: d must be >= 1");
  Constants c;
  c.sigma = sigma;
  c.m_tilde = m_tilde;
  c.c_sigma = 4.0 / std::expm1(2.0 * sigma);
  const double root = std::sqrt(std::numbers::pi / (2.0 * sigma));
  c.c2_tilde = 1.0 + root / kLn2;
  c.delta_star = (kE * kLn2 - 1.0) / c.c2_tilde;
  c.a = std::exp(c.delta_star * sigma *
                 (1.0 / (sigma * kLn2 * kLn2) + 1.0 / (kLn2 * std::sqrt(2.0 * sigma)) +
                  2.0 * (1.0 + root / kLn2)));
  c.c1 = 4.0 * m_tilde * c.c_sigma * c.a / (kE * c.delta_star * sigma);
  const double logd = 1.0 + std::log(2.0 * d);
  c.mu1 = sigma / logd;
  c.mu2 = kLn2 / (d * logd);
  c.mu3 = sigma * c.delta_star * c.c2_tilde / logd;
  c.q = c.c1 / std::exp(sigma * c.delta_star * c.c2_tilde) * amplifier(c.c1, d);
  return c;
}

double c1_of(double sigma, double m_tilde) { return constants(sigma, 1, m_tilde).c1; }

nlohmann::json DecayBound::to_json() const {
  return {{"regime", to_string(regime)},
          {"eta_lower", num(eta_lower)},
          {"eta_upper", num(eta_upper)},
          {"bound_at_eta_lower", num(at_lower)},
          {"bound_at_eta_upper", num(at_upper)},
          {"singular", singular},
          {"constants", constants.to_json()}};
}

DecayBound decay_bound(double sigma, int d, int w, int a, double m_tilde) {
  DecayBound r;
  r.constants = constants(sigma, d, m_tilde);
  r.regime = select_regime(d, w + a);
  std::tie(r.eta_lower, r.eta_upper) = index_sets::collocation_count_bounds(d, w + a);
  const auto &c = r.constants;
  r.singular = c.c1 == 1.0;
  auto at = [&](double eta) {
    if (r.singular)
      return kInf;
    if (eta <= 0.0)
      eta = 1.0;
    if (r.regime == Regime::SubExponential)
      return c.q * std::pow(eta, c.mu3) *
             std::exp(-d * sigma / std::pow(2.0, 1.0 / d) * std::pow(eta, c.mu2));
    return c.c1 * amplifier(c.c1, d) * std::pow(eta, -c.mu1);
  };
  r.at_lower = at(r.eta_lower);
  r.at_upper = at(r.eta_upper);
  return r;
}

DecayBound gaussian_pair_bound(double sigma, int d, int w, int a, double m_tilde) {
  DecayBound r;
  r.constants = constants(sigma, d, m_tilde);
  r.regime = select_regime(d, w + a);
  std::tie(r.eta_lower, r.eta_upper) = index_sets::collocation_count_bounds(d, w + a);
  const auto &c = r.constants;
  r.singular = c.c1 == 1.0;
  const double lead = c.c_sigma * c.a / (kE * c.delta_star * sigma);
  auto at = [&](double eta) {
    if (r.singular)
      return kInf;
    if (eta <= 0.0)
      eta = 1.0;
    if (r.regime == Regime::SubExponential) {
      const double m_eps = c.q * std::pow(eta, c.mu3) *
                           std::exp(-d * sigma / std::pow(2.0, 1.0 / d) * std::pow(eta, c.mu2));
      const double c1_eps = c1_of(sigma, m_eps);
      const double big_m = 8.0 * c.q * lead / std::exp(sigma * c.delta_star * c.c2_tilde) *
                           amplifier(c1_eps, 1);
      return big_m * std::pow(eta, 2.0 * c.mu3) *
             std::exp(-2.0 * d * sigma / std::pow(2.0, 1.0 / d) * std::pow(eta, c.mu2));
    }
    const double p_eps = 2.0 * c.c1 * amplifier(c.c1, d) * std::pow(eta, -c.mu1);
    return 8.0 * lead * c.c1 * std::pow(eta, -2.0 * c.mu1) *
           amplifier(c1_of(sigma, p_eps), d) * amplifier(c.c1, d);
  };
  r.at_lower = at(r.eta_lower);
  r.at_upper = at(r.eta_upper);
  return r;
}

nlohmann::json MatrixBound::to_json() const {
  nlohmann::json pj = nlohmann::json::array();
  for (const auto &p : pairs)
    pj.push_back({{"i", p.i},
                  {"j", p.j},
                  {"tau_ij", num(p.tau_ij)},
                  {"radius_literal", num(p.radius.literal)},
                  {"radius_magnitude", num(p.radius.magnitude)},
                  {"radius_sign_flag", p.radius.sign_flag},
                  {"sigma", num(p.sigma)},
                  {"M_tilde", num(p.m_tilde)},
                  {"decay", p.decay.to_json()}});
  return {{"n", n},
          {"t", t},
          {"p_tilde", p_tilde},
          {"E_bound_at_eta_lower", num(lower)},
          {"E_bound_at_eta_upper", num(upper)},
          {"C1_below_one", c1_below_one},
          {"pairs", pj}};
}

double matrix_error_bound(int n, int t, double p_tilde,
                          const std::vector<std::vector<double>> &per_pair) {
  const int lo = std::max(n, 1);
  double sum = 0.0;
  for (int i = lo; i <= t; ++i)
    for (int j = lo; j <= t; ++j)
      sum += per_pair.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(j));
  if (sum == 0.0)
    return 0.0;
  return std::ldexp(1.0, t + 1) * p_tilde * p_tilde * sum;
}

MatrixBound matrix_bound(const kernels::KernelSpec &spec, int d, int n, int t,
                         double p_tilde, const BoundSettings &s) {
  spec.validate();
  if (!(s.tau > 0) || !(s.shrink > 0) || !(s.shrink < 1))
    throw ConfigError("matrix_bound: need tau > 0 and 0 < shrink < 1");
  MatrixBound mb;
  mb.n = n;
  mb.t = t;
  mb.p_tilde = p_tilde;
  const auto theta = kernel_theta(spec, d);
  const std::size_t sz = static_cast<std::size_t>(std::max(t, 0) + 1);
  std::vector<std::vector<double>> lo(sz, std::vector<double>(sz, 0.0));
  auto hi = lo;
  const int first = std::max(n, 1);
  for (int i = first; i <= t; ++i)
    for (int j = first; j <= t; ++j) {
      PairBound pb;
      pb.i = i;
      pb.j = j;
      pb.tau_ij = s.tau * std::pow(2.0, t - 0.5 * (i + j));
      if (spec.family == kernels::Family::Gaussian) {
        const double sh = s.gaussian_sigma_hat;
        pb.sigma = sh / 2.0;
        pb.m_tilde = gaussian_extension_bound(theta, sh, d);
        pb.decay = gaussian_pair_bound(pb.sigma, d, s.w, s.a, pb.m_tilde);
      } else {
        pb.radius = analyticity_radius(pb.tau_ij, d);
        const double sh = s.shrink * pb.radius.magnitude;
        pb.sigma = sh / 2.0;
        pb.m_tilde = matern_extension_bound(spec.nu, theta, sh);
        pb.decay = decay_bound(pb.sigma, d, s.w, s.a, pb.m_tilde);
      }
      mb.c1_below_one = mb.c1_below_one && pb.decay.constants.c1 < 1.0;
      lo[i][j] = pb.decay.at_lower;
      hi[i][j] = pb.decay.at_upper;
      mb.pairs.push_back(pb);
    }
  mb.lower = matrix_error_bound(n, t, p_tilde, lo);
  mb.upper = matrix_error_bound(n, t, p_tilde, hi);
  return mb;
}

nlohmann::json InverseBound::to_json() const {
  return {{"bound", num(value)},
          {"in_regime", in_regime},
          {"sigma_min", num(sigma_min)},
          {"sigma_max", num(sigma_max)},
          {"E_norm", num(e_norm)}};
}

InverseBound inverse_perturbation_bound(double sigma_min, double sigma_max,
                                        double e_norm) {
  if (!(sigma_min > 0) || !(sigma_max >= sigma_min) || e_norm < 0)
    throw ConfigError("inverse_perturbation_bound: need 0 < sigma_min <= "
                      "sigma_max and ||E|| >= 0");
  InverseBound b;
  b.sigma_min = sigma_min;
  b.sigma_max = sigma_max;
  b.e_norm = e_norm;
  b.value = (1.0 + e_norm / sigma_max) * e_norm / (sigma_min * sigma_min);
  b.in_regime = sigma_min * e_norm < 1.0;
  return b;
}

} // namespace mlkrig::bounds
