#pragma once

#include <filesystem>
#include <string>

#include <Eigen/Dense>

#include "mlkrig/field_synthesis.hpp"
#include "mlkrig/index_sets.hpp"
#include "mlkrig/kernels.hpp"
#include "mlkrig/multilevel_basis.hpp"
#include "mlkrig/partition_tree.hpp"

namespace testing {

inline mlkrig::kernels::KernelSpec matern(double nu, double rho) {
  mlkrig::kernels::KernelSpec s;
  s.nu = nu;
  s.rho = rho;
  return s;
}

struct Fixture {
  mlkrig::Points points;
  mlkrig::tree::PartitionTree tree;
  mlkrig::basis::MultiLevelBasis basis;
};

inline Fixture make_fixture(mlkrig::Index n, int d, int w, std::uint64_t seed,
                            mlkrig::synthesis::Shape shape = mlkrig::synthesis::Shape::Cube,
                            mlkrig::tree::SplitRule rule = mlkrig::tree::SplitRule::KD,
                            mlkrig::index_sets::Kind kind = mlkrig::index_sets::Kind::TD) {
  Fixture f;
  f.points = mlkrig::synthesis::sample_points(shape, n, d, seed);
  const auto set = mlkrig::index_sets::build_index_set(kind, d, w);
  f.tree = mlkrig::tree::build_tree(f.points, 2 * static_cast<int>(set.size()), rule, seed);
  f.basis = mlkrig::basis::build_basis(f.tree, f.points, set);
  return f;
}

inline std::filesystem::path scratch_dir(const std::string &name) {
  auto p = std::filesystem::temp_directory_path() / ("mlkrig_unit_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

} // namespace testing
