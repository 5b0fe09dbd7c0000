#include <doctest.h>

#include <chrono>
#include <cmath>
#include <fstream>

#include "helpers.hpp"
#include "mlkrig/error.hpp"
#include "mlkrig/io.hpp"
#include "mlkrig/pipeline.hpp"
#include "mlkrig/rng.hpp"

using namespace mlkrig;
using namespace mlkrig::pipeline;
using nlohmann::json;

namespace {

json minimal() {
  return {{"N", 200}, {"d", 2}, {"seed", 3}, {"kernel", {{"nu", 1.0}, {"rho", 0.3}}}};
}

std::string slurp(const std::filesystem::path &p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

} // namespace

TEST_SUITE("cli_bench") {

TEST_CASE("config validation names the field") {
  json j = minimal();
  j.erase("kernel");
  try {
    parse_config(j);
    FAIL("expected ConfigError");
  } catch (const ConfigError &e) {
    CHECK(std::string(e.what()).find("kernel") != std::string::npos);
  }
  j = minimal();
  j["trend"] = {{"wdith", 2}};
  CHECK_THROWS_WITH_AS(parse_config(j), doctest::Contains("wdith"), ConfigError);
  j = minimal();
  j["N"] = -5;
  CHECK_THROWS_AS(parse_config(j), ConfigError);
  j = minimal();
  j["tau"] = "inf";
  CHECK(std::isinf(parse_config(j).tau));
}

TEST_CASE("minimal pipeline runs end to end and reruns identically") {
  const auto dir = testing::scratch_dir("pipeline");
  const auto cfg = parse_config(minimal());
  const auto t0 = std::chrono::steady_clock::now();
  run_pipeline(cfg, (dir / "a").string());
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(secs < 10.0);
  run_pipeline(cfg, (dir / "b").string());
  int compared = 0;
  for (const auto &e : std::filesystem::directory_iterator(dir / "a")) {
    const auto other = dir / "b" / e.path().filename();
    REQUIRE(std::filesystem::exists(other));
    CHECK(slurp(e.path()) == slurp(other));
    ++compared;
  }
  CHECK(compared >= 8);
  const auto manifest = io::read_json((dir / "a" / "manifest.json").string());
  CHECK(manifest.contains("files"));
}

TEST_CASE("bench tables") {
  const auto dir = testing::scratch_dir("bench");
  json j = minimal();
  j["N"] = 400;
  j["d"] = 3;
  j["kernel"] = {{"nu", 1.0}, {"rho", 1.0}};
  j["bench"] = {{"kinds", {"TD", "HC"}}, {"ws", {0, 1, 2}}, {"taus", {0.1, 1.0, "inf"}}};
  j["level"] = 1;
  const auto cfg = parse_config(j);

  bench_condition(cfg, dir.string());
  const auto cond = io::read_csv((dir / "bench_condition.csv").string());
  CHECK(cond.rows.size() == 6);
  const Index kc = cond.column("kappa_C"), kw = cond.column("kappa_CW"), w = cond.column("w");
  for (const auto &row : cond.rows)
    if (row[w] == "0")
      CHECK(std::stod(row[kw]) <= std::stod(row[kc]) * (1 + 1e-8));

  bench_sparsity(cfg, dir.string());
  const auto sp = io::read_csv((dir / "bench_sparsity.csv").string());
  REQUIRE(sp.rows.size() == 3);
  const Index nnz = sp.column("nnz_frac"), err = sp.column("logdet_rel_err");
  for (const auto &row : sp.rows) {
    CHECK(std::stod(row[nnz]) > 0.0);
    CHECK(std::stod(row[nnz]) <= 1.0);
  }
  CHECK(std::stod(sp.rows.back()[err]) <= 1e-10);
  CHECK(sp.rows.back()[sp.column("t_ML")] == "NA");
}

TEST_CASE("single replicate flags the std columns") {
  const auto dir = testing::scratch_dir("estimation");
  json j = minimal();
  j["replicates"] = 1;
  j["tau"] = 0.5;
  j["level"] = 1;
  const auto res = bench_estimation(parse_config(j), dir.string());
  CHECK(res.at("std_flag").get<bool>());
  CHECK(res.at("std_nu").get<double>() == 0.0);
}

TEST_CASE("bench prediction rows match the stand-alone solve") {
  const auto dir = testing::scratch_dir("prediction");
  json j = minimal();
  j["N"] = 500;
  j["d"] = 3;
  j["kernel"] = {{"nu", 0.75}, {"rho", 1.0 / 6.0}};
  j["bench"] = {{"sizes", {250, 500}}};
  const auto cfg = parse_config(j);
  const auto res = bench_prediction(cfg, dir.string());
  REQUIRE(res.at("rows").size() == 4);

  const Points pts = synthesis::sample_points(cfg.shape, 500, 3, cfg.seed);
  Config c = cfg;
  c.n = 500;
  const auto model = build_model(c, pts);
  Eigen::MatrixXd cm = kernels::cov_matrix(pts, c.kernel);
  const auto set = trend_set(c);
  const Eigen::VectorXd z = synthesis::FieldSampler(cm).sample(derive_seed(c.seed, 1));
  const kernels::CachedDense op(cm);
  prediction::SolveOptions opts;
  opts.eps = c.eps;
  const auto sol = prediction::solve_gamma(model.basis, c.kernel, pts, z, opts, &op);
  CHECK(res.at("rows")[2].at("iterations").get<int>() == sol.iterations);
}

TEST_CASE("io helpers") {
  CHECK(io::format_double(0.1) == "0.1");
  CHECK(std::stod(io::format_double(1.0 / 3.0)) == 1.0 / 3.0);
  CHECK(io::format_double(NAN) == "nan");
  CHECK(io::sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  const auto dir = testing::scratch_dir("io");
  io::CsvTable t;
  t.header = {"a", "b"};
  t.add_row({"x,y", "say \"hi\""});
  io::write_csv((dir / "t.csv").string(), t);
  const auto r = io::read_csv((dir / "t.csv").string());
  CHECK(r.rows == t.rows);
  CHECK_THROWS_AS(io::read_json((dir / "t.csv").string()), ConfigError);
  Points p(2, 3);
  p << 1, 2, 3, 4, 5, 6;
  Eigen::VectorXd z(3);
  z << 0.5, -1, 1e-300;
  io::write_observations((dir / "o.csv").string(), p, z);
  Points p2;
  Eigen::VectorXd z2;
  io::read_observations((dir / "o.csv").string(), p2, z2);
  CHECK(p2 == p);
  CHECK(z2 == z);
}

}
