#include <doctest.h>

#include <cmath>

#include <Eigen/Eigenvalues>

#include "helpers.hpp"
#include "mlkrig/error.hpp"
#include "mlkrig/rng.hpp"
#include "mlkrig/sparse_solver.hpp"

using namespace mlkrig;
using namespace mlkrig::solver;

namespace {

SparseMatrix from_dense(const Eigen::MatrixXd &a) { return a.sparseView(); }

Index fill(const SparseMatrix &a, const std::vector<Index> &order) {
  return analyze(a, order).nnz();
}

SparseMatrix grid_laplacian(int m) {
  std::vector<Eigen::Triplet<double, Index>> t;
  auto id = [m](int i, int j) { return static_cast<Index>(i * m + j); };
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      t.emplace_back(id(i, j), id(i, j), 4.0);
      if (i + 1 < m) {
        t.emplace_back(id(i, j), id(i + 1, j), -1.0);
        t.emplace_back(id(i + 1, j), id(i, j), -1.0);
      }
      if (j + 1 < m) {
        t.emplace_back(id(i, j), id(i, j + 1), -1.0);
        t.emplace_back(id(i, j + 1), id(i, j), -1.0);
      }
    }
  SparseMatrix a(m * m, m * m);
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

Eigen::MatrixXd random_spd(Index n, double density, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < i; ++j)
      if (rng.uniform() < density / 2)
        a(i, j) = a(j, i) = rng.uniform(-1, 1);
  a.diagonal().array() += a.cwiseAbs().rowwise().sum().array() + 1.0;
  return a;
}

} // namespace

TEST_SUITE("sparse_solver") {

TEST_CASE("orderings") {
  const SparseMatrix diag = from_dense(Eigen::VectorXd::LinSpaced(10, 1, 10).asDiagonal().toDenseMatrix());
  CHECK(fill(diag, fill_reducing_ordering(diag)) == 10);
  Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(20, 20);
  for (int i = 0; i < 20; ++i) {
    tri(i, i) = 3;
    if (i + 1 < 20)
      tri(i, i + 1) = tri(i + 1, i) = -1;
  }
  const auto ts = from_dense(tri);
  CHECK(fill(ts, fill_reducing_ordering(ts)) == fill(ts, natural_ordering(20)));
  const auto lap = grid_laplacian(32);
  CHECK(fill(lap, fill_reducing_ordering(lap)) < fill(lap, natural_ordering(32 * 32)));
}

TEST_CASE("hand factorization") {
  Eigen::MatrixXd a(2, 2);
  a << 4, 2, 2, 3;
  for (Index threshold : {Index{0}, Index{512}}) {
    const auto f = CholeskyFactor::factorize(from_dense(a), threshold);
    CHECK(f.log_det() == doctest::Approx(std::log(8.0)));
    const Eigen::VectorXd d = f.diagonal();
    CHECK(d.prod() == doctest::Approx(2.0 * std::sqrt(2.0)));
  }
  const auto eye = CholeskyFactor::factorize(from_dense(Eigen::MatrixXd::Identity(5, 5)), 0);
  CHECK(eye.log_det() == 0.0);
  CHECK(Eigen::MatrixXd(eye.factor()) == Eigen::MatrixXd::Identity(5, 5));
  Eigen::MatrixXd d(2, 2);
  d << 2, 0, 0, 8;
  CHECK(CholeskyFactor::factorize(from_dense(d), 0).log_det() == doctest::Approx(std::log(16.0)));
}

TEST_CASE("random SPD solve and log-determinant") {
  const Eigen::MatrixXd a = random_spd(200, 0.05, 3);
  const auto f = CholeskyFactor::factorize(from_dense(a), 0);
  const Eigen::VectorXd b = synthesis::standard_normals(200, 4);
  const Eigen::VectorXd x = f.solve(b);
  CHECK((a * x - b).norm() / b.norm() <= 1e-9);
  CHECK(f.inverse_quadratic(b) == doctest::Approx(b.dot(x)).epsilon(1e-10));

  const Eigen::MatrixXd a3 = random_spd(300, 0.05, 5);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a3);
  const double ref = es.eigenvalues().array().log().sum();
  CHECK(CholeskyFactor::factorize(from_dense(a3), 0).log_det() == doctest::Approx(ref).epsilon(1e-8));
  const auto sym = analyze(from_dense(a3), fill_reducing_ordering(from_dense(a3)));
  CHECK(CholeskyFactor::factorize(from_dense(a3), sym).log_det() == doctest::Approx(ref).epsilon(1e-8));
}

TEST_CASE("indefinite input reports the failing column") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(4, 4);
  a(2, 2) = -1.0;
  try {
    CholeskyFactor::factorize(from_dense(a), 0);
    FAIL("expected NotSpdError");
  } catch (const NotSpdError &e) {
    CHECK(e.column() == 2);
  }
  CHECK_THROWS_AS(CholeskyFactor::factorize(from_dense(a), 512), NotSpdError);
}

TEST_CASE("PCG basics") {
  const Index n = 30;
  const Operator eye = [](const Eigen::VectorXd &v) { return v; };
  const Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(n, 1, 2);
  const auto r = pcg_solve(eye, BlockPreconditioner::identity(n), b, 1e-10);
  CHECK(r.iterations == 1);
  CHECK((r.x - b).norm() <= 1e-14);
  const auto z = pcg_solve(eye, BlockPreconditioner::identity(n), Eigen::VectorXd::Zero(n), 1e-10);
  CHECK(z.iterations == 0);
  CHECK(z.x.norm() == 0.0);
}

TEST_CASE("PCG on C_W matches the dense solve") {
  const auto f = testing::make_fixture(1000, 3, 2, 31);
  const auto spec = testing::matern(0.75, 1.0 / 6.0);
  const Eigen::MatrixXd cw = assembly::assemble_dense_CW(f.basis, spec, f.points);
  const Eigen::VectorXd b = synthesis::standard_normals(cw.rows(), 6);
  const Eigen::VectorXd exact = cw.llt().solve(b);
  const Operator op = [&](const Eigen::VectorXd &v) { return Eigen::VectorXd(cw * v); };
  const double eps = 1e-3;
  const auto plain = pcg_solve(op, BlockPreconditioner::identity(cw.rows()), b, eps);
  const auto pre = pcg_solve(op, BlockPreconditioner::build(f.basis, spec, f.points), b, eps);
  CHECK(plain.converged);
  CHECK(pre.converged);
  CHECK((pre.x - exact).norm() / exact.norm() <= 10 * eps);
  CHECK(pre.iterations <= plain.iterations);
  CHECK(pre.relative_residual <= eps);
}

TEST_CASE("preconditioner with one cell spanning everything is exact") {
  const Points p = synthesis::sample_points(synthesis::Shape::Cube, 40, 2, 7);
  const auto set = index_sets::build_index_set(index_sets::Kind::TD, 2, 1);
  const auto t = tree::build_tree(p, 100, tree::SplitRule::KD, 7);
  const auto b = basis::build_basis(t, p, set);
  const auto spec = testing::matern(1.0, 0.5);
  const Eigen::MatrixXd cw = assembly::assemble_dense_CW(b, spec, p);
  const auto pc = BlockPreconditioner::build(b, spec, p);
  const Eigen::VectorXd v = synthesis::standard_normals(cw.rows(), 1);
  CHECK((pc.apply(cw * v) - v).norm() <= 1e-9 * v.norm());
}

TEST_CASE("PCG iteration limit") {
  const Eigen::MatrixXd a = random_spd(100, 0.3, 9);
  const Operator op = [&](const Eigen::VectorXd &v) { return Eigen::VectorXd(a * v); };
  CHECK_THROWS_AS(pcg_solve(op, BlockPreconditioner::identity(100),
                            Eigen::VectorXd::Ones(100), 1e-14, 2),
                  PcgNotConverged);
}

TEST_CASE("extreme singular values") {
  const Eigen::MatrixXd d = Eigen::VectorXd::LinSpaced(10, 1, 10).asDiagonal().toDenseMatrix();
  const auto s = extreme_singular_values(d);
  CHECK(s.sigma_min == doctest::Approx(1.0));
  CHECK(s.sigma_max == doctest::Approx(10.0));
  const auto e = extreme_singular_values(from_dense(Eigen::MatrixXd::Identity(8, 8)));
  CHECK(e.sigma_min == doctest::Approx(1.0));
  CHECK(e.sigma_max == doctest::Approx(1.0));
  const Eigen::MatrixXd a = random_spd(200, 0.1, 10);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  const auto r = extreme_singular_values(from_dense(a));
  CHECK(r.sigma_min == doctest::Approx(es.eigenvalues().minCoeff()).epsilon(1e-3));
  CHECK(r.sigma_max == doctest::Approx(es.eigenvalues().maxCoeff()).epsilon(1e-3));
}

}
