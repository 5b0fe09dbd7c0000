#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mlkrig/field_synthesis.hpp"

using namespace mlkrig;
using namespace mlkrig::synthesis;
using testing::matern;

TEST_SUITE("field_synthesis") {

TEST_CASE("point clouds") {
  const Points s = sample_points(Shape::Sphere, 500, 4, 1);
  for (Index k = 0; k < s.cols(); ++k)
    CHECK(std::abs(s.col(k).norm() - 1.0) <= 1e-12);
  const Points c = sample_points(Shape::Cube, 500, 3, 1);
  CHECK(c.minCoeff() >= -1.0);
  CHECK(c.maxCoeff() <= 1.0);
  for (Shape sh : {Shape::Cube, Shape::Sphere}) {
    const Points a = sample_points(sh, 1000, 3, 7);
    const Points b = sample_points(sh, 2000, 3, 7);
    CHECK(b.leftCols(1000) == a);
    CHECK(sample_points(sh, 10, 3, 8) != a.leftCols(10));
  }
}

TEST_CASE("identity covariance gives standard normals") {
  const FieldSampler fs(Eigen::MatrixXd::Identity(5000, 5000));
  const Eigen::VectorXd z = fs.sample(3);
  const double mean = z.mean();
  const double var = (z.array() - mean).square().sum() / (z.size() - 1);
  CHECK(var >= 0.9);
  CHECK(var <= 1.1);
}

TEST_CASE("trend shift is exact") {
  const Points p = sample_points(Shape::Cube, 200, 2, 2);
  const auto set = index_sets::build_index_set(index_sets::Kind::TD, 2, 1);
  const Eigen::VectorXd b0 = Eigen::VectorXd::Zero(3);
  const Eigen::VectorXd b1(Eigen::Vector3d(1, -2, 0.5));
  const Eigen::VectorXd z0 = sample_field(p, matern(1, 0.3), b0, set, 9);
  const Eigen::VectorXd z1 = sample_field(p, matern(1, 0.3), b1, set, 9);
  const Eigen::MatrixXd m = basis::design_matrix(p, set);
  CHECK((z1 - z0 - m * b1).cwiseAbs().maxCoeff() <= 1e-13);
}

TEST_CASE("empirical covariance matches the kernel") {
  const Points p = sample_points(Shape::Cube, 50, 2, 4);
  const auto spec = matern(1.0, 0.5);
  const FieldSampler fs(p, spec);
  const int reps = 200;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(50, 50);
  for (int r = 0; r < reps; ++r) {
    const Eigen::VectorXd z = fs.sample(static_cast<std::uint64_t>(100 + r));
    acc += z * z.transpose();
  }
  acc /= reps;
  const Eigen::MatrixXd c = kernels::cov_matrix(p, spec);
  CHECK((acc - c).cwiseAbs().maxCoeff() <= 5.0 * std::sqrt(2.0 / reps));
}

TEST_CASE("deterministic normals") {
  CHECK(standard_normals(100, 5) == standard_normals(100, 5));
  CHECK(standard_normals(100, 5) != standard_normals(100, 6));
}

TEST_CASE("singular covariance is jittered") {
  Points p(2, 3);
  p << 0.1, 0.1, 0.5, 0.2, 0.2, 0.7;
  const FieldSampler fs(p, matern(1, 1));
  CHECK(fs.jitter() > 0.0);
  CHECK(fs.sample(1).allFinite());
}

}
