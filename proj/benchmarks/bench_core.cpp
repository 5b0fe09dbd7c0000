#include <benchmark/benchmark.h>

#include "mlkrig/covariance_assembly.hpp"
#include "mlkrig/estimation.hpp"
#include "mlkrig/field_synthesis.hpp"
#include "mlkrig/index_sets.hpp"
#include "mlkrig/kernels.hpp"
#include "mlkrig/multilevel_basis.hpp"
#include "mlkrig/partition_tree.hpp"
#include "mlkrig/sparse_solver.hpp"

namespace {

using namespace mlkrig;

constexpr int kDim = 3;
constexpr int kDegree = 2;

kernels::KernelSpec matern_spec(double nu, double rho) {
  kernels::KernelSpec s;
  s.nu = nu;
  s.rho = rho;
  return s;
}

struct Model {
  Points points;
  tree::PartitionTree tree;
  basis::MultiLevelBasis basis;
};

Model make_model(Index n) {
  Model m;
  m.points = synthesis::sample_points(synthesis::Shape::Cube, n, kDim, 1);
  const auto set = index_sets::build_index_set(index_sets::Kind::TD, kDim, kDegree);
  m.tree = tree::build_tree(m.points, 2 * static_cast<int>(set.size()),
                            tree::SplitRule::KD, 1);
  m.basis = basis::build_basis(m.tree, m.points, set);
  return m;
}

void BM_MaternGeneral(benchmark::State &state) {
  double r = 0.01;
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::matern(r, 1.25, 0.5));
    r = r < 3.0 ? r + 0.01 : 0.01;
  }
}
BENCHMARK(BM_MaternGeneral);

void BM_MaternHalfInteger(benchmark::State &state) {
  double r = 0.01;
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::matern(r, 1.5, 0.5));
    r = r < 3.0 ? r + 0.01 : 0.01;
  }
}
BENCHMARK(BM_MaternHalfInteger);

void BM_IndexSet(benchmark::State &state) {
  const int d = static_cast<int>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(index_sets::build_index_set(index_sets::Kind::TD, d, 4));
}
BENCHMARK(BM_IndexSet)->Arg(5)->Arg(10)->Arg(20);

void BM_BuildTree(benchmark::State &state) {
  const auto pts = synthesis::sample_points(synthesis::Shape::Cube, state.range(0), kDim, 1);
  for (auto _ : state)
    benchmark::DoNotOptimize(tree::build_tree(pts, 20, tree::SplitRule::KD, 1));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_BuildTree)->RangeMultiplier(2)->Range(1000, 8000)->Complexity();

void BM_BuildBasis(benchmark::State &state) {
  const auto m = make_model(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(basis::build_basis(m.tree, m.points, m.basis.trend_set));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_BuildBasis)->RangeMultiplier(2)->Range(1000, 8000)->Complexity()
    ->Unit(benchmark::kMillisecond);

void BM_ApplyW(benchmark::State &state) {
  const auto m = make_model(state.range(0));
  const Eigen::VectorXd z = synthesis::standard_normals(state.range(0), 2);
  for (auto _ : state)
    benchmark::DoNotOptimize(basis::apply_W(m.basis, z));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ApplyW)->RangeMultiplier(2)->Range(1000, 8000)->Complexity();

void BM_AssembleSparse(benchmark::State &state) {
  const auto m = make_model(state.range(0));
  const auto pattern = assembly::build_pattern(m.basis, m.tree, m.points, 0.1,
                                               m.basis.t - 1, tree::SearchRule::TwoSided);
  const auto spec = matern_spec(1.25, 0.2);
  for (auto _ : state)
    benchmark::DoNotOptimize(assembly::assemble(pattern, m.basis, m.points, spec));
}
BENCHMARK(BM_AssembleSparse)->Arg(1000)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_SparseCholesky(benchmark::State &state) {
  const auto m = make_model(state.range(0));
  const auto pattern = assembly::build_pattern(m.basis, m.tree, m.points, 0.1,
                                               m.basis.t - 1, tree::SearchRule::TwoSided);
  const auto a = assembly::assemble(pattern, m.basis, m.points, matern_spec(1.25, 0.2))
                     .to_sparse();
  const auto sym = solver::analyze(a, solver::fill_reducing_ordering(a));
  for (auto _ : state)
    benchmark::DoNotOptimize(solver::CholeskyFactor::factorize(a, sym).log_det());
}
BENCHMARK(BM_SparseCholesky)->Arg(1000)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_LogLikelihood(benchmark::State &state) {
  const auto m = make_model(state.range(0));
  const Eigen::VectorXd z = synthesis::standard_normals(state.range(0), 3);
  const estimation::LikelihoodContext ctx(m.basis, m.tree, m.points, z,
                                          kernels::Family::Matern, 0.1, m.basis.t - 1);
  for (auto _ : state)
    benchmark::DoNotOptimize(ctx.evaluate(1.25, 0.2).value);
}
BENCHMARK(BM_LogLikelihood)->Arg(1000)->Arg(2000)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
