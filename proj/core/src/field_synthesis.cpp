#include "mlkrig/field_synthesis.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iostream>

#include "mlkrig/error.hpp"
#include "mlkrig/multilevel_basis.hpp"
#include "mlkrig/rng.hpp"

namespace mlkrig::synthesis {

Shape parse_shape(const std::string &s) {
  std::string v = s;
  std::transform(v.begin(), v.end(), v.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (v == "cube")
    return Shape::Cube;
  if (v == "sphere")
    return Shape::Sphere;
  throw ConfigError("unknown shape '" + s + "' (cube|sphere)");
}

std::string to_string(Shape s) { return s == Shape::Cube ? "cube" : "sphere"; }

Points sample_points(Shape shape, Index n, int d, std::uint64_t seed) {
  if (n < 1 || d < 1)
    throw ConfigError("sample_points: need N >= 1 and d >= 1");
  Rng rng(seed);
  Points p(d, n);
  for (Index j = 0; j < n; ++j) {
    if (shape == Shape::Cube) {
      for (int i = 0; i < d; ++i)
        p(i, j) = rng.uniform(-1.0, 1.0);
    } else {
      double norm = 0.0;
      do {
        for (int i = 0; i < d; ++i)
          p(i, j) = rng.normal();
        norm = p.col(j).norm();
      } while (norm == 0.0);
      p.col(j) /= norm;
    }
  }
  return p;
}

FieldSampler::FieldSampler(const Points &points, const kernels::KernelSpec &spec) {
  factor(kernels::cov_matrix(points, spec));
}

FieldSampler::FieldSampler(Eigen::MatrixXd c) { factor(std::move(c)); }

void FieldSampler::factor(Eigen::MatrixXd c) {
  Eigen::LLT<Eigen::MatrixXd> llt(c);
  if (llt.info() != Eigen::Success) {
    jitter_ = 1e-12 * c.trace() / static_cast<double>(c.rows());
    std::cerr << "field_synthesis: covariance not positive definite, adding "
                 "diagonal jitter "
              << jitter_ << "\n";
    c.diagonal().array() += jitter_;
    llt.compute(c);
    if (llt.info() != Eigen::Success)
      throw NumericalError("field_synthesis: covariance factorization failed "
                           "(near-duplicate points?)");
  }
  l_ = llt.matrixL();
}

Eigen::VectorXd standard_normals(Index n, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd xi(n);
  for (Index i = 0; i < n; ++i)
    xi[i] = rng.normal();
  return xi;
}

Eigen::VectorXd FieldSampler::sample(std::uint64_t seed) const {
  return sample(standard_normals(size(), seed));
}

Eigen::VectorXd FieldSampler::sample(const Eigen::VectorXd &xi) const {
  if (xi.size() != size())
    throw ConfigError("FieldSampler: noise length does not match");
  return l_.triangularView<Eigen::Lower>() * xi;
}

Eigen::VectorXd sample_field(const Points &points, const kernels::KernelSpec &spec,
                             const Eigen::VectorXd &beta,
                             const index_sets::MultiIndexSet &trend_set,
                             std::uint64_t seed) {
  if (beta.size() != static_cast<Index>(trend_set.size()))
    throw ConfigError("sample_field: beta length does not match the trend set");
  Eigen::VectorXd z = FieldSampler(points, spec).sample(seed);
  if (beta.size() > 0)
    z += basis::design_matrix(points, trend_set) * beta;
  return z;
}

} // namespace mlkrig::synthesis
