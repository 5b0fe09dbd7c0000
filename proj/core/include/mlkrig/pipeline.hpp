#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlkrig/estimation.hpp"
#include "mlkrig/field_synthesis.hpp"
#include "mlkrig/index_sets.hpp"
#include "mlkrig/kernels.hpp"
#include "mlkrig/multilevel_basis.hpp"
#include "mlkrig/partition_tree.hpp"
#include "mlkrig/prediction.hpp"

namespace mlkrig::pipeline {

struct Config {
  synthesis::Shape shape = synthesis::Shape::Cube;
  Index n = 0;
  int d = 0;
  std::uint64_t seed = 0;
  kernels::KernelSpec kernel;

  index_sets::Kind trend_kind = index_sets::Kind::TD;
  int trend_w = 1;
  int accuracy_offset = 0;
  bool extended = false;

  tree::SplitRule tree_rule = tree::SplitRule::KD;
  int n0 = 0; // 0 selects 2 * p~
  tree::SearchRule search = tree::SearchRule::Verbatim;

  double tau = tree::kInfiniteTau;
  int level = -1;
  double eps = 1e-3;
  prediction::PrecondMode precond = prediction::PrecondMode::On;

  std::vector<double> beta; // empty means zero
  std::string data;         // observation CSV; synthesized when empty
  std::string targets;      // target CSV for predict
  Index num_targets = 0;    // synthesized targets when no file is given
  std::string fit;          // fit JSON for predict

  estimation::OptimizerConfig optimizer;
  int replicates = 1;

  // Bench grids.
  std::vector<std::string> kinds;
  std::vector<int> ws;
  std::vector<double> taus;
  std::vector<Index> sizes;
  Index kappa_cap = 2000;   // largest N for dense condition numbers
  Index oracle_cap = 4000;  // largest N for dense log-det oracles

  bool timings = false; // fill wall-clock columns
  int threads = 1;

  nlohmann::json to_json() const;
};

// Errors name the offending field, e.g. "config.kernel.nu".
Config parse_config(const nlohmann::json &j);
Config load_config(const std::string &path);

struct Dataset {
  Points points;
  Eigen::VectorXd z;
};

Dataset make_dataset(const Config &cfg);
index_sets::MultiIndexSet trend_set(const Config &cfg);
int leaf_size(const Config &cfg);

struct Model {
  tree::PartitionTree tree;
  basis::MultiLevelBasis basis;
};

Model build_model(const Config &cfg, const Points &points);

// Subcommands. Each writes into out_dir and returns a JSON summary.
nlohmann::json run_gen(const Config &cfg, const std::string &out_dir);
nlohmann::json run_indexset(const Config &cfg, const std::string &out_dir);
nlohmann::json run_tree(const Config &cfg, const std::string &out_dir);
nlohmann::json run_basis(const Config &cfg, const std::string &out_dir);
nlohmann::json run_assemble(const Config &cfg, const std::string &out_dir);
nlohmann::json run_estimate(const Config &cfg, const std::string &out_dir);
nlohmann::json run_predict(const Config &cfg, const std::string &out_dir);
nlohmann::json run_bounds(const Config &cfg, const std::string &out_dir);

// gen -> tree -> basis -> assemble -> estimate -> predict with a hash
// manifest of every artifact.
nlohmann::json run_pipeline(const Config &cfg, const std::string &out_dir);

nlohmann::json bench_condition(const Config &cfg, const std::string &out_dir);
nlohmann::json bench_sparsity(const Config &cfg, const std::string &out_dir);
nlohmann::json bench_estimation(const Config &cfg, const std::string &out_dir);
nlohmann::json bench_prediction(const Config &cfg, const std::string &out_dir);

// Condition numbers of C^n_W for n = t, ..., -1 from a dense C_W.
std::vector<double> nested_condition_numbers(const basis::MultiLevelBasis &b,
                                             const Eigen::MatrixXd &cw);
double condition_number(const Eigen::MatrixXd &symmetric);

} // namespace mlkrig::pipeline
