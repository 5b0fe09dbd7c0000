#include <cmath>
#include <limits>
#include <numbers>

#include "mlkrig/error.hpp"
#include "mlkrig/kernels.hpp"

// K_nu by Temme's method: reduce to |mu| <= 1/2, evaluate K_mu and
// K_{mu+1} by the Temme series (x < 2) or Steed's continued fraction
// (x >= 2), then recur upward in order.

namespace mlkrig::kernels {

namespace {

constexpr double kEps = 1e-16;
constexpr int kMaxIter = 10000;

// Taylor coefficients of 1/Gamma(1+z) about z = 0.
constexpr double kRecipGamma[] = {
    1.0,
    0.5772156649015329,
    -0.6558780715202538,
    -0.0420026350340952,
    0.1665386113822915,
    -0.0421977345555443,
    -0.0096219715278770,
    0.0072189432466630,
    -0.0011651675918591,
    -0.0002152416741149,
    0.0001280502823882,
    -0.0000201348547807,
    -0.0000012504934821,
    0.0000011330272320,
    -0.0000002056338417,
    0.0000000061160950,
    0.0000000050020075,
    -0.0000000011812746,
    0.0000000001043427,
};

// gam1 = (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu)
// gam2 = (1/Gamma(1-mu) + 1/Gamma(1+mu)) / 2
void temme_gammas(double mu, double &gam1, double &gam2, double &gampl,
                  double &gammi) {
  constexpr int n = sizeof(kRecipGamma) / sizeof(double);
  double even = 0.0, odd = 0.0, mu2 = mu * mu;
  double pe = 1.0;
  for (int k = 0; k < n; k += 2) {
    even += kRecipGamma[k] * pe;
    if (k + 1 < n)
      odd += kRecipGamma[k + 1] * pe;
    pe *= mu2;
  }
  // 1/Gamma(1+mu) = even + mu odd, 1/Gamma(1-mu) = even - mu odd
  gampl = even + mu * odd;
  gammi = even - mu * odd;
  gam1 = -odd;
  gam2 = even;
}

void k_mu_series(double mu, double x, double &kmu, double &kmu1) {
  const double x2 = 0.5 * x;
  const double pimu = std::numbers::pi * mu;
  const double fact = std::abs(pimu) < kEps ? 1.0 : pimu / std::sin(pimu);
  double d = -std::log(x2);
  double e = mu * d;
  const double fact2 = std::abs(e) < kEps ? 1.0 : std::sinh(e) / e;
  double gam1, gam2, gampl, gammi;
  temme_gammas(mu, gam1, gam2, gampl, gammi);
  double ff = fact * (gam1 * std::cosh(e) + gam2 * fact2 * d);
  double sum = ff;
  e = std::exp(e);
  double p = 0.5 * e / gampl;
  double q = 0.5 / (e * gammi);
  double c = 1.0;
  d = x2 * x2;
  double sum1 = p;
  for (int i = 1; i <= kMaxIter; ++i) {
    ff = (i * ff + p + q) / (i * static_cast<double>(i) - mu * mu);
    c *= d / i;
    p /= (i - mu);
    q /= (i + mu);
    const double del = c * ff;
    sum += del;
    sum1 += c * (p - i * ff);
    if (std::abs(del) < std::abs(sum) * kEps)
      break;
  }
  kmu = sum;
  kmu1 = sum1 * (2.0 / x);
}

void k_mu_fraction(double mu, double x, double &kmu, double &kmu1) {
  double b = 2.0 * (1.0 + x);
  double d = 1.0 / b;
  double h = d, delh = d;
  double q1 = 0.0, q2 = 1.0;
  const double a1 = 0.25 - mu * mu;
  double q = a1, c = a1;
  double a = -a1;
  double s = 1.0 + q * delh;
  for (int i = 1; i <= kMaxIter; ++i) {
    a -= 2 * i;
    c = -a * c / (i + 1.0);
    const double qnew = (q1 - b * q2) / a;
    q1 = q2;
    q2 = qnew;
    q += c * qnew;
    b += 2.0;
    d = 1.0 / (b + a * d);
    delh = (b * d - 1.0) * delh;
    h += delh;
    const double dels = q * delh;
    s += dels;
    if (std::abs(dels / s) < kEps)
      break;
  }
  kmu = std::sqrt(std::numbers::pi / (2.0 * x)) * std::exp(-x) / s;
  kmu1 = kmu * (mu + x + 0.5 - a1 * h) / x;
}

} // namespace

double bessel_k(double nu, double x) {
  if (!(x > 0.0) || !std::isfinite(x))
    throw ConfigError("bessel_k: argument must be positive and finite");
  nu = std::abs(nu);
  const int nl = static_cast<int>(std::floor(nu + 0.5));
  const double mu = nu - nl;
  double kmu, kmu1;
  if (x < 2.0)
    k_mu_series(mu, x, kmu, kmu1);
  else
    k_mu_fraction(mu, x, kmu, kmu1);
  const double xi2 = 2.0 / x;
  for (int i = 1; i <= nl; ++i) {
    const double next = (mu + i) * xi2 * kmu1 + kmu;
    kmu = kmu1;
    kmu1 = next;
  }
  return kmu;
}

} // namespace mlkrig::kernels
