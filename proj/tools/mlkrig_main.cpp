// mlkrig command-line workbench.
//
// Exit codes: 0 ok, 2 configuration error, 3 numerical failure.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mlkrig/error.hpp"
#include "mlkrig/io.hpp"
#include "mlkrig/pipeline.hpp"

namespace {

using nlohmann::json;
namespace pl = mlkrig::pipeline;

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Overrides {
  std::string config;
  std::string out;
  std::optional<std::string> shape, family, kind, tree_rule, search, tau, precond;
  std::optional<std::string> data, targets, fit;
  std::optional<long long> n, n0, num_targets;
  std::optional<int> d, w, accuracy_offset, level, replicates;
  std::optional<double> nu, rho, h, eps;
  bool timings = false;

  void attach(CLI::App *app) {
    app->add_option("--config", config, "JSON configuration file");
    app->add_option("--out", out, "copy the main artifact to this path");
    app->add_option("--shape", shape, "cube|sphere");
    app->add_option("--n", n, "number of observations");
    app->add_option("--d", d, "dimension");
    app->add_option("--family", family, "matern|gaussian");
    app->add_option("--nu", nu, "Matern smoothness");
    app->add_option("--rho", rho, "length scale");
    app->add_option("--bandwidth", h, "Gaussian length scale h");
    app->add_option("--kind", kind, "trend index set TP|TD|SM|HC");
    app->add_option("--w", w, "trend index set level");
    app->add_option("--accuracy-offset", accuracy_offset, "accuracy level offset a");
    app->add_option("--tree-rule", tree_rule, "rp|kd");
    app->add_option("--n0", n0, "leaf size (0 = 2 p~)");
    app->add_option("--search", search, "verbatim|two_sided");
    app->add_option("--tau", tau, "truncation radius or inf");
    app->add_option("--level", level, "coarsest level n kept (-1 = all)");
    app->add_option("--eps", eps, "PCG relative tolerance");
    app->add_option("--precond", precond, "on|off|auto");
    app->add_option("--data", data, "observation CSV");
    app->add_option("--targets", targets, "target CSV");
    app->add_option("--num-targets", num_targets, "synthesized targets");
    app->add_option("--fit", fit, "fit JSON from estimate");
    app->add_option("--replicates", replicates, "replicates for bench-estimation");
    app->add_flag("--timings", timings, "fill wall-clock columns");
  }

  json build(std::optional<std::uint64_t> seed, int threads) const {
    json j = config.empty() ? json::object() : mlkrig::io::read_json(config);
    if (!j.is_object())
      throw mlkrig::ConfigError("config: expected an object");
    auto set = [&](const char *key, const auto &v) {
      if (v)
        j[key] = *v;
    };
    set("shape", shape);
    set("N", n);
    set("d", d);
    set("level", level);
    set("eps", eps);
    set("precond", precond);
    set("data", data);
    set("targets", targets);
    set("num_targets", num_targets);
    set("fit", fit);
    set("replicates", replicates);
    if (tau) {
      if (*tau == "inf")
        j["tau"] = "inf";
      else
        try {
          j["tau"] = std::stod(*tau);
        } catch (const std::exception &) {
          throw mlkrig::ConfigError("--tau: expected a number or inf");
        }
    }
    if (family || nu || rho || h) {
      json &k = j["kernel"];
      if (!k.is_object())
        k = json::object();
      if (family)
        k["family"] = *family;
      if (nu)
        k["nu"] = *nu;
      if (rho)
        k["rho"] = *rho;
      if (h)
        k["h"] = *h;
    }
    if (!j.contains("kernel") && fit) {
      const json f = mlkrig::io::read_json(*fit);
      j["kernel"] = {{"family", f.value("family", std::string("matern"))},
                     {"nu", f.value("nu", 0.5)},
                     {"rho", f.value("rho", 1.0)}};
    }
    if (kind || w || accuracy_offset) {
      json &t = j["trend"];
      if (!t.is_object())
        t = json::object();
      if (kind)
        t["kind"] = *kind;
      if (w)
        t["w"] = *w;
      if (accuracy_offset)
        t["accuracy_offset"] = *accuracy_offset;
    }
    if (tree_rule || n0 || search) {
      json &t = j["tree"];
      if (!t.is_object())
        t = json::object();
      if (tree_rule)
        t["rule"] = *tree_rule;
      if (n0)
        t["n0"] = *n0;
      if (search)
        t["search"] = *search;
    }
    if (seed)
      j["seed"] = *seed;
    if (timings)
      j["timings"] = true;
    j["threads"] = threads;
    return j;
  }
};

using Runner = std::function<json(const pl::Config &, const std::string &)>;

struct Command {
  const char *name;
  const char *help;
  Runner run;
  const char *artifact;
};

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"mlkrig: multi-level kriging workbench"};
  app.require_subcommand(1);
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string out_dir = ".";
  app.add_option("--seed", seed, "random seed")->configurable();
  app.add_option("--threads", threads, "worker threads (computation is single-threaded)")
      ->check(CLI::PositiveNumber);
  app.add_option("--out-dir", out_dir, "output directory");

  const Command commands[] = {
      {"gen", "generate observations", pl::run_gen, "obs.csv"},
      {"indexset", "enumerate a trend index set", pl::run_indexset, "indexset.json"},
      {"tree", "build the partition tree", pl::run_tree, "tree.json"},
      {"basis", "build the multi-level basis", pl::run_basis, "basis.bin"},
      {"assemble", "assemble the sparse C_W", pl::run_assemble, "cw.mtx"},
      {"estimate", "maximum likelihood fit", pl::run_estimate, "fit.json"},
      {"predict", "kriging prediction", pl::run_predict, "pred.csv"},
      {"bounds", "a-posteriori error bounds", pl::run_bounds, "bounds.json"},
      {"run", "full pipeline with manifest", pl::run_pipeline, "manifest.json"},
      {"bench-condition", "condition numbers table", pl::bench_condition,
       "bench_condition.csv"},
      {"bench-sparsity", "sparsity / log-det table", pl::bench_sparsity,
       "bench_sparsity.csv"},
      {"bench-estimation", "estimation replicates table", pl::bench_estimation,
       "bench_estimation.csv"},
      {"bench-prediction", "PCG iteration table", pl::bench_prediction,
       "bench_prediction.csv"},
  };
  std::map<CLI::App *, const Command *> lookup;
  std::map<CLI::App *, Overrides> overrides;
  for (const auto &c : commands) {
    auto *sub = app.add_subcommand(c.name, c.help);
    overrides[sub].attach(sub);
    lookup[sub] = &c;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    for (auto &[sub, cmd] : lookup) {
      if (!sub->parsed())
        continue;
      const auto &ov = overrides[sub];
      const pl::Config cfg = pl::parse_config(ov.build(seed, threads));
      const json summary = cmd->run(cfg, out_dir);
      if (!ov.out.empty()) {
        const auto src = mlkrig::io::join_path(out_dir, cmd->artifact);
        std::error_code ec;
        std::filesystem::copy_file(src, ov.out,
                                   std::filesystem::copy_options::overwrite_existing, ec);
        if (ec)
          throw mlkrig::ConfigError("--out: cannot write '" + ov.out + "': " + ec.message());
      }
      std::cout << summary.dump(2) << '\n';
    }
  } catch (const mlkrig::ConfigError &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const mlkrig::NumericalError &e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const nlohmann::json::exception &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  return 0;
}
