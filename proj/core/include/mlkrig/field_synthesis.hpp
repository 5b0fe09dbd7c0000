#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "mlkrig/index_sets.hpp"
#include "mlkrig/kernels.hpp"
#include "mlkrig/types.hpp"

namespace mlkrig::synthesis {

enum class Shape { Cube, Sphere };

Shape parse_shape(const std::string &s);
std::string to_string(Shape s);

// Streams one point at a time, so the first N' columns do not depend on N.
Points sample_points(Shape shape, Index n, int d, std::uint64_t seed);

// Draws Z = M beta + G xi with G G^T = C. Factorizes once.
class FieldSampler {
public:
  FieldSampler(const Points &points, const kernels::KernelSpec &spec);
  explicit FieldSampler(Eigen::MatrixXd c);

  Eigen::VectorXd sample(std::uint64_t seed) const;
  Eigen::VectorXd sample(const Eigen::VectorXd &xi) const;
  Index size() const { return l_.rows(); }
  // Diagonal shift applied when the plain factorization failed, else 0.
  double jitter() const { return jitter_; }

private:
  void factor(Eigen::MatrixXd c);
  Eigen::MatrixXd l_;
  double jitter_ = 0.0;
};

Eigen::VectorXd standard_normals(Index n, std::uint64_t seed);

Eigen::VectorXd sample_field(const Points &points, const kernels::KernelSpec &spec,
                             const Eigen::VectorXd &beta,
                             const index_sets::MultiIndexSet &trend_set,
                             std::uint64_t seed);

} // namespace mlkrig::synthesis
