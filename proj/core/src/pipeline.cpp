#include "mlkrig/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include <Eigen/Eigenvalues>

#include "mlkrig/covariance_assembly.hpp"
#include "mlkrig/error.hpp"
#include "mlkrig/error_bounds.hpp"
#include "mlkrig/io.hpp"
#include "mlkrig/rng.hpp"
#include "mlkrig/sparse_solver.hpp"

namespace mlkrig::pipeline {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

const double kInf = std::numeric_limits<double>::infinity();
const double kNaN = std::numeric_limits<double>::quiet_NaN();

// Reads one JSON object, tracking which keys were consumed so that unknown
// keys can be reported with their full path.
class Reader {
public:
  Reader(const json &j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object())
      throw ConfigError(path_ + ": expected an object");
  }

  bool has(const std::string &key) const { return j_.contains(key); }
  std::string field(const std::string &key) const { return path_ + "." + key; }

  template <class T> T get(const std::string &key, T fallback) {
    used_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null())
      return fallback;
    return convert<T>(key);
  }

  template <class T> T require(const std::string &key) {
    used_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null())
      throw ConfigError(field(key) + ": required field is missing");
    return convert<T>(key);
  }

  const json &object(const std::string &key) {
    used_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto &[k, v] : j_.items())
      if (!used_.count(k))
        throw ConfigError(field(k) + ": unknown field");
  }

private:
  template <class T> T convert(const std::string &key) const {
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception &) {
      throw ConfigError(field(key) + ": wrong type");
    }
  }

  const json &j_;
  std::string path_;
  std::set<std::string> used_;
};

double read_tau(const json &v, const std::string &field) {
  if (v.is_null())
    return kInf;
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "infinity")
      return kInf;
    throw ConfigError(field + ": expected a positive number or \"inf\"");
  }
  if (!v.is_number())
    throw ConfigError(field + ": expected a positive number or \"inf\"");
  const double t = v.get<double>();
  if (!(t > 0))
    throw ConfigError(field + ": must be positive");
  return t;
}

json tau_json(double tau) { return std::isfinite(tau) ? json(tau) : json("inf"); }

std::string num(double v) { return io::format_double(v); }

std::string time_cell(const Config &cfg, double secs) {
  return cfg.timings ? num(secs) : std::string("NA");
}

void write_table(const Config &cfg, const std::string &out_dir,
                 const std::string &stem, const io::CsvTable &t, io::Manifest *m,
                 json extra = json::object()) {
  const auto csv = io::join_path(out_dir, stem + ".csv");
  io::write_csv(csv, t);
  extra["config"] = cfg.to_json();
  extra["seed"] = cfg.seed;
  extra["columns"] = t.header;
  extra["rows"] = t.rows.size();
  const auto side = io::join_path(out_dir, stem + ".json");
  io::write_json(side, extra);
  if (m) {
    m->add(stem, csv);
    m->add(stem + "_sidecar", side);
  }
}

Eigen::VectorXd beta_of(const Config &cfg, const index_sets::MultiIndexSet &set) {
  const Index p = static_cast<Index>(set.size());
  if (cfg.beta.empty())
    return Eigen::VectorXd::Zero(p);
  if (static_cast<Index>(cfg.beta.size()) != p)
    throw ConfigError("config.beta: expected " + std::to_string(p) +
                      " coefficients for the trend set");
  return Eigen::Map<const Eigen::VectorXd>(cfg.beta.data(), p);
}

kernels::KernelSpec fitted_kernel(const Config &cfg) {
  auto spec = cfg.kernel;
  if (cfg.fit.empty())
    return spec;
  const json f = io::read_json(cfg.fit);
  if (!f.contains("nu") || !f.contains("rho"))
    throw ConfigError("config.fit: fit file lacks nu/rho");
  spec.nu = f.at("nu").get<double>();
  spec.rho = f.at("rho").get<double>();
  spec.theta.clear();
  spec.validate();
  return spec;
}

Points target_points(const Config &cfg, int d) {
  if (!cfg.targets.empty())
    return io::read_points(cfg.targets, d);
  const Index k = cfg.num_targets > 0 ? cfg.num_targets : 16;
  return synthesis::sample_points(cfg.shape, k, d, derive_seed(cfg.seed, 0x7a7));
}

double sample_std(const std::vector<double> &v) {
  if (v.size() < 2)
    return 0.0;
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v)
    s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double mean(const std::vector<double> &v) {
  return v.empty() ? 0.0
                   : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

} // namespace

json Config::to_json() const {
  json j;
  j["shape"] = synthesis::to_string(shape);
  j["N"] = n;
  j["d"] = d;
  j["seed"] = seed;
  j["kernel"] = kernels::to_json(kernel);
  j["trend"] = {{"kind", index_sets::to_string(trend_kind)},
                {"w", trend_w},
                {"accuracy_offset", accuracy_offset},
                {"extended", extended}};
  j["tree"] = {{"rule", tree::to_string(tree_rule)},
               {"n0", n0},
               {"search", tree::to_string(search)}};
  j["tau"] = tau_json(tau);
  j["level"] = level;
  j["eps"] = eps;
  j["precond"] = prediction::to_string(precond);
  j["beta"] = beta;
  j["data"] = data;
  j["targets"] = targets;
  j["num_targets"] = num_targets;
  j["fit"] = fit;
  j["optimizer"] = {{"nu0", optimizer.nu0},
                    {"rho0", optimizer.rho0},
                    {"perturbation", optimizer.perturbation},
                    {"tolerance", optimizer.tolerance},
                    {"max_evaluations", optimizer.max_evaluations}};
  j["replicates"] = replicates;
  json taus_j = json::array();
  for (double t : taus)
    taus_j.push_back(tau_json(t));
  j["bench"] = {{"kinds", kinds},         {"ws", ws},
                {"taus", taus_j},         {"sizes", sizes},
                {"kappa_cap", kappa_cap}, {"oracle_cap", oracle_cap}};
  j["timings"] = timings;
  j["threads"] = threads;
  return j;
}

Config parse_config(const json &j) {
  Reader r(j, "config");
  Config c;
  c.data = r.get<std::string>("data", "");
  const bool has_data = !c.data.empty();
  try {
    c.shape = synthesis::parse_shape(r.get<std::string>("shape", "cube"));
  } catch (const ConfigError &e) {
    throw ConfigError(r.field("shape") + ": " + e.what());
  }
  if (has_data) {
    c.n = r.get<Index>("N", 0);
    c.d = r.get<int>("d", 0);
  } else {
    c.n = r.require<Index>("N");
    c.d = r.require<int>("d");
    if (c.n < 1)
      throw ConfigError(r.field("N") + ": must be >= 1");
    if (c.d < 1)
      throw ConfigError(r.field("d") + ": must be >= 1");
  }
  c.seed = r.get<std::uint64_t>("seed", 0);
  if (!r.has("kernel"))
    throw ConfigError(r.field("kernel") + ": required field is missing");
  try {
    c.kernel = kernels::parse_kernel(r.object("kernel"));
  } catch (const ConfigError &e) {
    throw ConfigError("config." + std::string(e.what()));
  }

  if (r.has("trend")) {
    Reader t(r.object("trend"), r.field("trend"));
    try {
      c.trend_kind = index_sets::parse_kind(t.get<std::string>("kind", "TD"));
    } catch (const ConfigError &e) {
      throw ConfigError(t.field("kind") + ": " + e.what());
    }
    c.trend_w = t.get<int>("w", 1);
    if (c.trend_w < 0)
      throw ConfigError(t.field("w") + ": must be >= 0");
    c.accuracy_offset = t.get<int>("accuracy_offset", 0);
    if (c.accuracy_offset < 0)
      throw ConfigError(t.field("accuracy_offset") + ": must be >= 0");
    c.extended = t.get<bool>("extended", false);
    t.finish();
  }
  if (r.has("tree")) {
    Reader t(r.object("tree"), r.field("tree"));
    try {
      c.tree_rule = tree::parse_rule(t.get<std::string>("rule", "kd"));
    } catch (const ConfigError &e) {
      throw ConfigError(t.field("rule") + ": " + e.what());
    }
    c.n0 = t.get<int>("n0", 0);
    if (c.n0 < 0)
      throw ConfigError(t.field("n0") + ": must be >= 0");
    try {
      c.search = tree::parse_search_rule(t.get<std::string>("search", "verbatim"));
    } catch (const ConfigError &e) {
      throw ConfigError(t.field("search") + ": " + e.what());
    }
    t.finish();
  }
  if (r.has("tau"))
    c.tau = read_tau(r.object("tau"), r.field("tau"));
  c.level = r.get<int>("level", -1);
  if (c.level < -1)
    throw ConfigError(r.field("level") + ": must be >= -1");
  c.eps = r.get<double>("eps", 1e-3);
  if (!(c.eps > 0) || !(c.eps < 1))
    throw ConfigError(r.field("eps") + ": must lie in (0, 1)");
  try {
    c.precond = prediction::parse_precond(r.get<std::string>("precond", "on"));
  } catch (const ConfigError &e) {
    throw ConfigError(r.field("precond") + ": " + e.what());
  }
  c.beta = r.get<std::vector<double>>("beta", {});
  c.targets = r.get<std::string>("targets", "");
  c.num_targets = r.get<Index>("num_targets", 0);
  c.fit = r.get<std::string>("fit", "");
  if (r.has("optimizer")) {
    Reader o(r.object("optimizer"), r.field("optimizer"));
    c.optimizer.nu0 = o.get<double>("nu0", 1.0);
    c.optimizer.rho0 = o.get<double>("rho0", 1.0);
    c.optimizer.perturbation = o.get<double>("perturbation", 0.2);
    c.optimizer.tolerance = o.get<double>("tolerance", 1e-6);
    c.optimizer.max_evaluations = o.get<int>("max_evaluations", 500);
    if (!(c.optimizer.nu0 > 0) || !(c.optimizer.rho0 > 0))
      throw ConfigError(o.field("nu0") + ": initial parameters must be positive");
    if (!(c.optimizer.perturbation > 0))
      throw ConfigError(o.field("perturbation") + ": must be positive");
    if (c.optimizer.max_evaluations < 3)
      throw ConfigError(o.field("max_evaluations") + ": must be >= 3");
    o.finish();
  }
  c.replicates = r.get<int>("replicates", 1);
  if (c.replicates < 1)
    throw ConfigError(r.field("replicates") + ": must be >= 1");
  if (r.has("bench")) {
    Reader b(r.object("bench"), r.field("bench"));
    c.kinds = b.get<std::vector<std::string>>("kinds", {});
    for (const auto &k : c.kinds) {
      try {
        index_sets::parse_kind(k);
      } catch (const ConfigError &e) {
        throw ConfigError(b.field("kinds") + ": " + e.what());
      }
    }
    c.ws = b.get<std::vector<int>>("ws", {});
    if (b.has("taus")) {
      const json &tj = b.object("taus");
      if (!tj.is_array())
        throw ConfigError(b.field("taus") + ": expected an array");
      for (std::size_t i = 0; i < tj.size(); ++i)
        c.taus.push_back(read_tau(tj[i], b.field("taus") + "[" + std::to_string(i) + "]"));
    }
    c.sizes = b.get<std::vector<Index>>("sizes", {});
    c.kappa_cap = b.get<Index>("kappa_cap", 2000);
    c.oracle_cap = b.get<Index>("oracle_cap", 4000);
    b.finish();
  }
  c.timings = r.get<bool>("timings", false);
  c.threads = r.get<int>("threads", 1);
  if (c.threads < 1)
    throw ConfigError(r.field("threads") + ": must be >= 1");
  r.finish();
  return c;
}

Config load_config(const std::string &path) { return parse_config(io::read_json(path)); }

Dataset make_dataset(const Config &cfg) {
  Dataset ds;
  if (!cfg.data.empty()) {
    io::read_observations(cfg.data, ds.points, ds.z);
    if (cfg.d > 0 && ds.points.rows() != cfg.d)
      throw ConfigError("config.d: does not match the columns of " + cfg.data);
    return ds;
  }
  ds.points = synthesis::sample_points(cfg.shape, cfg.n, cfg.d, cfg.seed);
  const auto set = trend_set(cfg);
  const Eigen::VectorXd beta = beta_of(cfg, set);
  ds.z = synthesis::sample_field(ds.points, cfg.kernel, beta, set,
                                 derive_seed(cfg.seed, 1));
  return ds;
}

index_sets::MultiIndexSet trend_set(const Config &cfg) {
  const int d = cfg.d > 0 ? cfg.d : 1;
  return index_sets::build_index_set(cfg.trend_kind, d, cfg.trend_w);
}

int leaf_size(const Config &cfg) {
  if (cfg.n0 > 0)
    return cfg.n0;
  auto acc = index_sets::build_index_set(index_sets::base_kind(cfg.trend_kind), cfg.d,
                                         cfg.trend_w + cfg.accuracy_offset);
  if (cfg.extended || index_sets::is_extended(cfg.trend_kind))
    acc = index_sets::extend_index_set(acc);
  return std::max(2, 2 * static_cast<int>(acc.size()));
}

Model build_model(const Config &cfg, const Points &points) {
  Config c = cfg;
  c.d = static_cast<int>(points.rows());
  Model m;
  m.tree = tree::build_tree(points, leaf_size(c), c.tree_rule, c.seed);
  basis::BasisOptions opt;
  opt.accuracy_offset = c.accuracy_offset;
  opt.extended = c.extended;
  m.basis = basis::build_basis(m.tree, points, trend_set(c), opt);
  return m;
}

namespace {

Config with_data_dims(Config cfg, const Dataset &ds) {
  cfg.d = static_cast<int>(ds.points.rows());
  cfg.n = ds.points.cols();
  return cfg;
}

json gen_into(const Config &cfg, const std::string &out_dir, const Dataset &ds,
              io::Manifest *m) {
  const auto path = io::join_path(out_dir, "obs.csv");
  io::write_observations(path, ds.points, ds.z);
  json side = {{"config", cfg.to_json()},
               {"seed", cfg.seed},
               {"rng_version", Rng::kVersion},
               {"N", ds.points.cols()},
               {"d", ds.points.rows()}};
  const auto spath = io::join_path(out_dir, "obs.json");
  io::write_json(spath, side);
  if (m) {
    m->add("observations", path);
    m->add("observations_sidecar", spath);
  }
  return side;
}

json fit_into(const Config &cfg, const std::string &out_dir, const Dataset &ds,
              const Model &model, io::Manifest *m, kernels::KernelSpec *fitted) {
  estimation::LikelihoodContext ctx(model.basis, model.tree, ds.points, ds.z,
                                    cfg.kernel.family, cfg.tau, cfg.level, cfg.search);
  const auto t0 = Clock::now();
  const auto fit = estimation::mle_fit(ctx, cfg.optimizer);
  const double secs = seconds_since(t0);
  json j = fit.to_json();
  j["family"] = cfg.kernel.family == kernels::Family::Matern ? "matern" : "gaussian";
  j["level"] = cfg.level;
  j["tau"] = tau_json(cfg.tau);
  j["dim"] = ctx.data().size();
  j["pattern_pairs"] = ctx.pattern().pairs.size();
  if (cfg.timings)
    j["seconds"] = secs;
  const auto path = io::join_path(out_dir, "fit.json");
  io::write_json(path, j);
  if (m)
    m->add("fit", path);
  if (fitted) {
    *fitted = cfg.kernel;
    fitted->nu = fit.nu;
    fitted->rho = fit.rho;
    fitted->theta.clear();
  }
  return j;
}

json predict_into(const Config &cfg, const std::string &out_dir, const Dataset &ds,
                  const Model &model, const kernels::KernelSpec &spec,
                  io::Manifest *m) {
  const Points targets = target_points(cfg, static_cast<int>(ds.points.rows()));
  prediction::SolveOptions opts;
  opts.eps = cfg.eps;
  opts.precond = cfg.precond;
  const bool dense_ok = ds.points.cols() <= cfg.oracle_cap;
  std::optional<kernels::CachedDense> cached;
  if (dense_ok)
    cached.emplace(ds.points, spec);
  const kernels::KernelOperator *op = cached ? &*cached : nullptr;
  const auto sol = prediction::solve_gamma(model.basis, spec, ds.points, ds.z, opts, op);
  const Eigen::MatrixXd mm = basis::design_matrix(ds.points, model.basis.trend_set);
  const auto beta = prediction::recover_beta(sol.gamma, ds.z, mm, spec, ds.points, op);
  const Eigen::VectorXd zhat = prediction::predict(targets, beta.beta, sol.gamma, spec,
                                                   ds.points, model.basis.trend_set);
  std::optional<prediction::DenseKriging> dk;
  if (dense_ok)
    dk.emplace(spec, ds.points, model.basis.trend_set);

  io::CsvTable t;
  for (Index i = 0; i < targets.rows(); ++i)
    t.header.push_back("x" + std::to_string(i + 1));
  t.header.push_back("zhat");
  t.header.push_back("mse");
  for (Index j = 0; j < targets.cols(); ++j) {
    std::vector<std::string> row;
    for (Index i = 0; i < targets.rows(); ++i)
      row.push_back(num(targets(i, j)));
    row.push_back(num(zhat[j]));
    row.push_back(dk ? num(dk->mse(targets.col(j))) : std::string("NA"));
    t.add_row(std::move(row));
  }
  json extra = sol.to_json();
  if (!cfg.timings) {
    extra.erase("precond_seconds");
    extra.erase("iterate_seconds");
  }
  extra["beta_rank"] = beta.rank;
  extra["beta_rank_deficient"] = beta.rank_deficient;
  extra["beta_hat"] = std::vector<double>(beta.beta.data(), beta.beta.data() + beta.beta.size());
  extra["kernel"] = kernels::to_json(spec);
  write_table(cfg, out_dir, "pred", t, m, extra);
  return extra;
}

} // namespace

json run_gen(const Config &cfg, const std::string &out_dir) {
  io::ensure_dir(out_dir);
  const auto ds = make_dataset(cfg);
  return gen_into(cfg, out_dir, ds, nullptr);
}

json run_indexset(const Config &cfg, const std::string &out_dir) {
  io::ensure_dir(out_dir);
  const auto set = trend_set(cfg);
  json j = index_sets::to_json(set, true);
  const auto [lo, hi] = index_sets::collocation_count_bounds(set.d, set.w);
  j["collocation_count_bounds"] = {lo, hi};
  io::write_json(io::join_path(out_dir, "indexset.json"), j);
  j.erase("indices");
  return j;
}

json run_tree(const Config &cfg, const std::string &out_dir) {
  io::ensure_dir(out_dir);
  const auto ds = make_dataset(cfg);
  const Config c = with_data_dims(cfg, ds);
  const auto tr = tree::build_tree(ds.points, leaf_size(c), c.tree_rule, c.seed);
  json j = tree::tree_stats(tr);
  io::write_json(io::join_path(out_dir, "tree.json"), j);
  return j;
}

json run_basis(const Config &cfg, const std::string &out_dir) {
  io::ensure_dir(out_dir);
  const auto ds = make_dataset(cfg);
  const Config c = with_data_dims(cfg, ds);
  const auto model = build_model(c, ds.points);
  basis::write_basis(model.basis, io::join_path(out_dir, "basis.bin"));
  json j = basis::basis_stats(model.basis);
  const auto chk = basis::check_basis(model.basis, ds.points);
  j["check"] = {{"orthonormality", chk.orthonormality},
                {"trend_moments", chk.trend_moments},
                {"accuracy_moments", chk.accuracy_moments},
                {"count_bound", chk.count_bound},
                {"support_bound", chk.support_bound},
                {"completeness", chk.completeness}};
  io::write_json(io::join_path(out_dir, "basis.json"), j);
  return j;
}

json run_assemble(const Config &cfg, const std::string &out_dir) {
  io::ensure_dir(out_dir);
  const auto ds = make_dataset(cfg);
  const Config c = with_data_dims(cfg, ds);
  const auto model = build_model(c, ds.points);
  const auto m = assembly::assemble_sparse_CW(model.basis, model.tree, c.kernel, ds.points,
                                              c.tau, c.level, c.search);
  assembly::write_block_sparse(m, io::join_path(out_dir, "cw.bin"));
  assembly::write_matrix_market(m.to_sparse(), io::join_path(out_dir, "cw.mtx"));
  json j = {{"dim", m.dim},
            {"t", m.t},
            {"level", m.n},
            {"tau", tau_json(c.tau)},
            {"blocks", m.blocks.size()},
            {"nnz", m.nnz()},
            {"density", m.density()},
            {"kernel_evals", m.cost.kernel_evals},
            {"flops", m.cost.flops}};
  io::write_json(io::join_path(out_dir, "assemble.json"), j);
  return j;
}

json run_estimate(const Config &cfg, const std::string &out_dir) {
  io::ensure_dir(out_dir);
  const auto ds = make_dataset(cfg);
  const Config c = with_data_dims(cfg, ds);
  const auto model = build_model(c, ds.points);
  return fit_into(c, out_dir, ds, model, nullptr, nullptr);
}

json run_predict(const Config &cfg, const std::string &out_dir) {
  io::ensure_dir(out_dir);
  const auto ds = make_dataset(cfg);
  const Config c = with_data_dims(cfg, ds);
  const auto model = build_model(c, ds.points);
  return predict_into(c, out_dir, ds, model, fitted_kernel(c), nullptr);
}

json run_bounds(const Config &cfg, const std::string &out_dir) {
  io::ensure_dir(out_dir);
  const auto ds = make_dataset(cfg);
  const Config c = with_data_dims(cfg, ds);
  const auto model = build_model(c, ds.points);
  const auto &b = model.basis;
  bounds::BoundSettings s;
  s.tau = std::isfinite(c.tau) ? c.tau : 1e300;
  s.w = c.trend_w;
  s.a = c.accuracy_offset;
  json report;
  report["config"] = c.to_json();
  try {
    report["matrix_bound"] = bounds::matrix_bound(c.kernel, c.d, c.level, b.t,
                                                  static_cast<double>(b.p_tilde), s)
                                 .to_json();
  } catch (const ConfigError &e) {
    report["matrix_bound"] = {{"skipped", e.what()}};
  }
  if (ds.points.cols() <= c.oracle_cap) {
    const Index rows = b.rows_through(c.level);
    const Eigen::MatrixXd cw =
        assembly::assemble_dense_CW(b, c.kernel, ds.points).topLeftCorner(rows, rows);
    const Eigen::MatrixXd ct = assembly::assemble_sparse_CW(b, model.tree, c.kernel,
                                                            ds.points, c.tau, c.level, c.search)
                                   .to_dense();
    const auto gap = assembly::truncation_gap(cw, ct);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ct, Eigen::EigenvaluesOnly);
    const double smin = es.eigenvalues().cwiseAbs().minCoeff();
    const double smax = es.eigenvalues().cwiseAbs().maxCoeff();
    json measured = {{"E_max", gap.max_norm}, {"E_two", gap.two_norm},
                     {"sigma_min", smin},     {"sigma_max", smax}};
    if (smin > 0) {
      const auto ib = bounds::inverse_perturbation_bound(smin, smax, gap.two_norm);
      measured["inverse_bound"] = ib.to_json();
      Eigen::LLT<Eigen::MatrixXd> l1(cw);
      const Eigen::MatrixXd diff =
          l1.solve(Eigen::MatrixXd::Identity(rows, rows)) -
          ct.fullPivLu().inverse();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ed(0.5 * (diff + diff.transpose()),
                                                        Eigen::EigenvaluesOnly);
      measured["inverse_diff_two"] = ed.eigenvalues().cwiseAbs().maxCoeff();
    }
    report["measured"] = measured;
  }
  io::write_json(io::join_path(out_dir, "bounds.json"), report);
  return report;
}

json run_pipeline(const Config &cfg, const std::string &out_dir) {
  io::ensure_dir(out_dir);
  io::Manifest manifest;
  const auto ds = make_dataset(cfg);
  const Config c = with_data_dims(cfg, ds);
  gen_into(c, out_dir, ds, &manifest);

  const auto model = build_model(c, ds.points);
  const auto tpath = io::join_path(out_dir, "tree.json");
  io::write_json(tpath, tree::tree_stats(model.tree));
  manifest.add("tree", tpath);

  const auto bpath = io::join_path(out_dir, "basis.bin");
  basis::write_basis(model.basis, bpath);
  manifest.add("basis", bpath);
  const auto bjpath = io::join_path(out_dir, "basis.json");
  io::write_json(bjpath, basis::basis_stats(model.basis));
  manifest.add("basis_stats", bjpath);

  const auto m = assembly::assemble_sparse_CW(model.basis, model.tree, c.kernel, ds.points,
                                              c.tau, c.level, c.search);
  const auto apath = io::join_path(out_dir, "cw.mtx");
  assembly::write_matrix_market(m.to_sparse(), apath);
  manifest.add("covariance", apath);
  const auto ajpath = io::join_path(out_dir, "assemble.json");
  io::write_json(ajpath, {{"dim", m.dim},
                          {"nnz", m.nnz()},
                          {"density", m.density()},
                          {"blocks", m.blocks.size()},
                          {"kernel_evals", m.cost.kernel_evals}});
  manifest.add("assemble", ajpath);

  kernels::KernelSpec fitted;
  const json fit = fit_into(c, out_dir, ds, model, &manifest, &fitted);
  const json pred = predict_into(c, out_dir, ds, model, fitted, &manifest);

  const auto mpath = io::join_path(out_dir, "manifest.json");
  manifest.write(mpath, c.to_json());
  return {{"fit", {{"nu", fit.at("nu")}, {"rho", fit.at("rho")}}},
          {"iterations", pred.at("iterations")},
          {"files", manifest.json()}};
}

double condition_number(const Eigen::MatrixXd &a) {
  if (a.rows() == 0)
    return kNaN;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
  const auto &ev = es.eigenvalues();
  if (!(ev.minCoeff() > 0))
    return kInf;
  return ev.maxCoeff() / ev.minCoeff();
}

std::vector<double> nested_condition_numbers(const basis::MultiLevelBasis &b,
                                             const Eigen::MatrixXd &cw) {
  std::vector<double> out;
  for (int n = b.t; n >= -1; --n) {
    const Index rows = b.rows_through(n);
    out.push_back(rows > 0 ? condition_number(cw.topLeftCorner(rows, rows)) : kNaN);
  }
  return out;
}

json bench_condition(const Config &cfg, const std::string &out_dir) {
  io::ensure_dir(out_dir);
  const auto ds = make_dataset(cfg);
  const Config c = with_data_dims(cfg, ds);
  if (c.n > c.kappa_cap)
    throw ConfigError("config.N: bench-condition needs N <= bench.kappa_cap");
  const std::vector<std::string> kinds =
      c.kinds.empty() ? std::vector<std::string>{index_sets::to_string(c.trend_kind)} : c.kinds;
  const std::vector<int> ws = c.ws.empty() ? std::vector<int>{c.trend_w} : c.ws;
  const Eigen::MatrixXd cmat = kernels::cov_matrix(ds.points, c.kernel);
  const double kappa_c = condition_number(cmat);
  io::CsvTable t;
  t.header = {"kind", "w", "p", "trend_rank", "kappa_C", "kappa_CW"};
  for (const auto &k : kinds)
    for (int w : ws) {
      Config cc = c;
      cc.trend_kind = index_sets::parse_kind(k);
      cc.trend_w = w;
      const auto model = build_model(cc, ds.points);
      const double kcw = model.basis.rows() > 0
                             ? condition_number(assembly::assemble_dense_CW(model.basis, cmat))
                             : kNaN;
      t.add_row({index_sets::to_string(cc.trend_kind), std::to_string(w),
                 std::to_string(model.basis.p), std::to_string(model.basis.trend_rank),
                 num(kappa_c), num(kcw)});
    }
  write_table(c, out_dir, "bench_condition", t, nullptr);
  return {{"rows", t.rows.size()}, {"kappa_C", kappa_c}};
}

json bench_sparsity(const Config &cfg, const std::string &out_dir) {
  io::ensure_dir(out_dir);
  const auto ds = make_dataset(cfg);
  const Config c = with_data_dims(cfg, ds);
  const auto t0 = Clock::now();
  const auto model = build_model(c, ds.points);
  const double t_ml = seconds_since(t0);
  const auto &b = model.basis;
  const Index rows = b.rows_through(c.level);
  double dense_logdet = kNaN;
  if (c.n <= c.oracle_cap && rows > 0) {
    const Eigen::MatrixXd cw =
        assembly::assemble_dense_CW(b, c.kernel, ds.points).topLeftCorner(rows, rows);
    Eigen::LLT<Eigen::MatrixXd> llt(cw);
    if (llt.info() == Eigen::Success) {
      const Eigen::MatrixXd l = llt.matrixL();
      dense_logdet = 2.0 * l.diagonal().array().log().sum();
    }
  }
  const std::vector<double> taus = c.taus.empty() ? std::vector<double>{c.tau} : c.taus;
  io::CsvTable t;
  t.header = {"N",     "t",        "n",     "kappa_CW_tilde", "size",      "tau",
              "t_ML",  "nnz_frac", "t_con", "nnz_G_frac",     "t_chol",    "spd",
              "logdet", "logdet_dense", "logdet_rel_err"};
  for (double tau : taus) {
    auto t1 = Clock::now();
    const auto m = assembly::assemble_sparse_CW(b, model.tree, c.kernel, ds.points, tau,
                                                c.level, c.search);
    const double t_con = seconds_since(t1);
    const auto a = m.to_sparse();
    const double size2 = static_cast<double>(rows) * static_cast<double>(rows);
    double kappa = kNaN, logdet = kNaN, nnz_g = kNaN, t_chol = 0.0;
    bool spd = true;
    try {
      t1 = Clock::now();
      const auto f = solver::CholeskyFactor::factorize(a);
      t_chol = seconds_since(t1);
      logdet = f.log_det();
      nnz_g = static_cast<double>(f.factor_nnz()) / size2;
      const auto sv = solver::extreme_singular_values(a);
      kappa = sv.sigma_max / sv.sigma_min;
    } catch (const NotSpdError &) {
      spd = false;
    }
    const double rel = std::isfinite(dense_logdet) && std::isfinite(logdet)
                           ? std::abs(logdet - dense_logdet) / std::abs(dense_logdet)
                           : kNaN;
    t.add_row({std::to_string(c.n), std::to_string(b.t), std::to_string(c.level), num(kappa),
               std::to_string(rows), std::isfinite(tau) ? num(tau) : std::string("inf"),
               time_cell(c, t_ml), num(static_cast<double>(m.nnz()) / size2),
               time_cell(c, t_con), num(nnz_g), time_cell(c, t_chol), spd ? "1" : "0",
               num(logdet), num(dense_logdet), num(rel)});
  }
  write_table(c, out_dir, "bench_sparsity", t, nullptr);
  return {{"rows", t.rows.size()}};
}

json bench_estimation(const Config &cfg, const std::string &out_dir) {
  io::ensure_dir(out_dir);
  if (!cfg.data.empty())
    throw ConfigError("config.data: bench-estimation synthesizes its own replicates");
  const auto t0 = Clock::now();
  const Points points = synthesis::sample_points(cfg.shape, cfg.n, cfg.d, cfg.seed);
  const auto model = build_model(cfg, points);
  const synthesis::FieldSampler sampler(points, cfg.kernel);
  const Eigen::VectorXd trend =
      basis::design_matrix(points, model.basis.trend_set) * beta_of(cfg, model.basis.trend_set);

  std::optional<estimation::LikelihoodContext> ctx;
  std::vector<double> nus, rhos;
  io::CsvTable reps;
  reps.header = {"replicate", "nu_hat", "rho_hat", "loglik", "evaluations", "converged",
                 "non_identifiable"};
  for (int r = 0; r < cfg.replicates; ++r) {
    const Eigen::VectorXd z =
        sampler.sample(derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(r))) + trend;
    if (!ctx)
      ctx.emplace(model.basis, model.tree, points, z, cfg.kernel.family, cfg.tau, cfg.level,
                  cfg.search);
    else
      ctx->set_data(z);
    const auto fit = estimation::mle_fit(*ctx, cfg.optimizer);
    nus.push_back(fit.nu);
    rhos.push_back(fit.rho);
    reps.add_row({std::to_string(r), num(fit.nu), num(fit.rho), num(fit.loglik),
                  std::to_string(fit.evaluations), fit.converged ? "1" : "0",
                  fit.non_identifiable ? "1" : "0"});
  }
  const double total = seconds_since(t0);
  io::CsvTable t;
  t.header = {"N",           "w",          "t",         "n",       "replicates",
              "mean_bias_nu", "mean_bias_rho", "std_nu", "std_rho", "std_flag",
              "t_total"};
  const bool single = cfg.replicates < 2;
  const double bias_nu = mean(nus) - cfg.kernel.nu;
  const double bias_rho = mean(rhos) - cfg.kernel.rho;
  t.add_row({std::to_string(cfg.n), std::to_string(cfg.trend_w),
             std::to_string(model.basis.t), std::to_string(cfg.level),
             std::to_string(cfg.replicates), num(bias_nu), num(bias_rho),
             num(sample_std(nus)), num(sample_std(rhos)), single ? "1" : "0",
             time_cell(cfg, total)});
  write_table(cfg, out_dir, "bench_estimation", t, nullptr);
  write_table(cfg, out_dir, "bench_estimation_replicates", reps, nullptr);
  return {{"mean_bias_nu", bias_nu},
          {"mean_bias_rho", bias_rho},
          {"std_nu", sample_std(nus)},
          {"std_rho", sample_std(rhos)},
          {"std_flag", single},
          {"seconds", total}};
}

json bench_prediction(const Config &cfg, const std::string &out_dir) {
  io::ensure_dir(out_dir);
  if (!cfg.data.empty())
    throw ConfigError("config.data: bench-prediction synthesizes its own data");
  const std::vector<Index> sizes = cfg.sizes.empty() ? std::vector<Index>{cfg.n} : cfg.sizes;
  const Index nmax = *std::max_element(sizes.begin(), sizes.end());
  const Points all = synthesis::sample_points(cfg.shape, nmax, cfg.d, cfg.seed);
  io::CsvTable t;
  t.header = {"N", "kappa_C", "precond", "itr", "residual", "t_precond", "t_itr", "t_total"};
  json summary = json::array();
  for (Index n : sizes) {
    Config c = cfg;
    c.n = n;
    const Points points = all.leftCols(n);
    Eigen::MatrixXd cmat = kernels::cov_matrix(points, c.kernel);
    const double kappa = n <= c.kappa_cap ? condition_number(cmat) : kNaN;
    const auto set = trend_set(c);
    const Eigen::VectorXd z =
        synthesis::FieldSampler(cmat).sample(derive_seed(c.seed, 1)) +
        basis::design_matrix(points, set) * beta_of(c, set);
    const kernels::CachedDense op(std::move(cmat));
    const auto t0 = Clock::now();
    const auto model = build_model(c, points);
    const double t_basis = seconds_since(t0);
    for (auto mode : {prediction::PrecondMode::On, prediction::PrecondMode::Off}) {
      prediction::SolveOptions opts;
      opts.eps = c.eps;
      opts.precond = mode;
      const auto sol = prediction::solve_gamma(model.basis, c.kernel, points, z, opts, &op);
      t.add_row({std::to_string(n), num(kappa), prediction::to_string(mode),
                 std::to_string(sol.iterations), num(sol.residual),
                 time_cell(c, sol.precond_seconds), time_cell(c, sol.iterate_seconds),
                 time_cell(c, t_basis + sol.precond_seconds + sol.iterate_seconds)});
      summary.push_back({{"N", n},
                         {"precond", prediction::to_string(mode)},
                         {"iterations", sol.iterations}});
    }
  }
  write_table(cfg, out_dir, "bench_prediction", t, nullptr);
  return {{"rows", summary}};
}

} // namespace mlkrig::pipeline
