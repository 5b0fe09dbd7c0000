#include "mlkrig/multilevel_basis.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/Sparse>

#include "mlkrig/binary_io.hpp"
#include "mlkrig/error.hpp"

namespace mlkrig::basis {

namespace {

using index_sets::MultiIndexSet;

// Sparse exponent lists so high-dimensional sets only touch the
// non-zero coordinates.
struct SparseMonomials {
  std::vector<std::vector<std::pair<int, int>>> terms;
  int max_exp = 0;

  explicit SparseMonomials(const MultiIndexSet &set) {
    terms.reserve(set.size());
    for (const auto &p : set.indices) {
      std::vector<std::pair<int, int>> t;
      for (int n = 0; n < static_cast<int>(p.size()); ++n)
        if (p[n] > 0) {
          t.emplace_back(n, p[n]);
          max_exp = std::max(max_exp, p[n]);
        }
      terms.push_back(std::move(t));
    }
  }

  // Fills row `r` of `out` with the monomials evaluated at u.
  void eval(const double *u, int d, Eigen::MatrixXd &out, Index r,
            std::vector<double> &pow) const {
    const int stride = max_exp + 1;
    pow.assign(static_cast<std::size_t>(d) * stride, 1.0);
    for (int n = 0; n < d; ++n)
      for (int e = 1; e <= max_exp; ++e)
        pow[n * stride + e] = pow[n * stride + e - 1] * u[n];
    for (std::size_t j = 0; j < terms.size(); ++j) {
      double v = 1.0;
      for (const auto &[n, e] : terms[j])
        v *= pow[n * stride + e];
      out(r, static_cast<Index>(j)) = v;
    }
  }
};

// Monomials of the set over the cell's points, in coordinates centred at
// the cell centroid and scaled to unit radius. Downward-closed sets span
// the same space in these coordinates; extended sets are not downward
// closed, so for them only the scaling is applied.
Eigen::MatrixXd local_design(const Points &points,
                             const std::vector<Index> &perm, Index begin,
                             Index end, const MultiIndexSet &set,
                             const SparseMonomials &mono) {
  const int d = static_cast<int>(points.rows());
  const Index s = end - begin;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(d);
  const bool centre = !index_sets::is_extended(set.kind);
  if (centre) {
    for (Index k = begin; k < end; ++k)
      c += points.col(perm[k]);
    c /= static_cast<double>(s);
  }
  double h = 0.0;
  for (Index k = begin; k < end; ++k)
    h = std::max(h, (points.col(perm[k]) - c).cwiseAbs().maxCoeff());
  if (!(h > 0))
    h = 1.0;
  Eigen::MatrixXd g(s, static_cast<Index>(set.size()));
  std::vector<double> pow;
  Eigen::VectorXd u(d);
  for (Index k = 0; k < s; ++k) {
    u = (points.col(perm[begin + k]) - c) / h;
    mono.eval(u.data(), d, g, k, pow);
  }
  return g;
}

double orthonormality_residual(const Eigen::MatrixXd &q) {
  if (q.cols() == 0)
    return 0.0;
  Eigen::MatrixXd g = q.transpose() * q;
  g.diagonal().array() -= 1.0;
  return g.cwiseAbs().maxCoeff();
}

void modified_gram_schmidt(Eigen::MatrixXd &q) {
  for (Index j = 0; j < q.cols(); ++j) {
    for (Index i = 0; i < j; ++i)
      q.col(j) -= q.col(i).dot(q.col(j)) * q.col(i);
    q.col(j) /= q.col(j).norm();
  }
}

constexpr Index kReorthCheckLimit = 512;

} // namespace

Eigen::MatrixXd design_matrix(const Points &points, const MultiIndexSet &set) {
  if (points.rows() != set.d)
    throw ConfigError("design_matrix: dimension mismatch");
  SparseMonomials mono(set);
  Eigen::MatrixXd m(points.cols(), static_cast<Index>(set.size()));
  std::vector<double> pow;
  for (Index i = 0; i < points.cols(); ++i)
    mono.eval(points.col(i).data(), set.d, m, i, pow);
  return m;
}

RankReport design_rank(const Eigen::MatrixXd &m) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m);
  qr.setThreshold(1e-10);
  RankReport r;
  r.rank = qr.rank();
  const auto &perm = qr.colsPermutation().indices();
  for (Index k = r.rank; k < m.cols(); ++k)
    r.deficient_columns.push_back(perm[k]);
  return r;
}

Eigen::VectorXd monomial_row(const Eigen::Ref<const Eigen::VectorXd> &x,
                             const MultiIndexSet &set) {
  if (x.size() != set.d)
    throw ConfigError("monomial_row: dimension mismatch");
  Eigen::VectorXd out(static_cast<Index>(set.size()));
  for (std::size_t j = 0; j < set.size(); ++j)
    out[static_cast<Index>(j)] = index_sets::eval_monomial(set.indices[j], x);
  return out;
}

LocalSplit local_split(const Eigen::MatrixXd &q, const Eigen::MatrixXd &moment,
                       double rank_eps) {
  LocalSplit out;
  const Index s = q.cols();
  if (s == 0) {
    out.scaling.resize(q.rows(), 0);
    out.detail.resize(q.rows(), 0);
    return out;
  }
  if (moment.cols() != s)
    throw ConfigError("local_split: moment has the wrong number of columns");
  Eigen::MatrixXd v;
  Index rank = 0;
  if (moment.rows() == 0) {
    v = Eigen::MatrixXd::Identity(s, s);
  } else {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(moment, Eigen::ComputeFullV);
    const auto &sv = svd.singularValues();
    const double smax = sv.size() ? sv[0] : 0.0;
    const double cut = rank_eps * std::sqrt(static_cast<double>(s)) * smax;
    for (Index k = 0; k < sv.size(); ++k)
      if (sv[k] > cut && sv[k] > 0)
        ++rank;
    v = svd.matrixV();
  }
  Eigen::MatrixXd qv = q * v;
  out.rank = rank;
  out.scaling = qv.leftCols(rank);
  out.detail = qv.rightCols(s - rank);
  return out;
}

Index MultiLevelBasis::rows() const {
  Index r = 0;
  for (Index c : level_rows)
    r += c;
  return r;
}

Index MultiLevelBasis::rows_through(int n) const {
  if (n < -1 || n > t)
    throw ConfigError("level out of range");
  Index r = 0;
  for (int q = t; q >= n; --q)
    r += rows_at(q);
  return r;
}

MultiLevelBasis build_basis(const tree::PartitionTree &tree,
                            const Points &points,
                            const MultiIndexSet &trend_set,
                            const BasisOptions &options) {
  const Index n = points.cols();
  if (tree.num_points() != n)
    throw ConfigError("build_basis: tree and points disagree");
  if (trend_set.d != points.rows())
    throw ConfigError("build_basis: trend set dimension mismatch");
  if (options.accuracy_offset < 0)
    throw ConfigError("build_basis: accuracy offset must be >= 0");

  MultiLevelBasis b;
  b.n = n;
  b.d = static_cast<int>(points.rows());
  b.t = tree.t;
  b.permutation = tree.permutation;
  b.trend_set = trend_set;
  b.accuracy_set = index_sets::build_index_set(
      index_sets::base_kind(trend_set.kind), trend_set.d,
      trend_set.w + options.accuracy_offset);
  if (options.extended || index_sets::is_extended(trend_set.kind))
    b.accuracy_set = index_sets::extend_index_set(b.accuracy_set);
  b.p = static_cast<Index>(trend_set.size());
  b.p_tilde = static_cast<Index>(b.accuracy_set.size());
  b.level_rows.assign(b.t + 2, 0);

  const SparseMonomials acc_mono(b.accuracy_set);
  const auto &perm = tree.permutation;

  // Scaling vectors handed from each processed node to its parent.
  std::vector<Eigen::MatrixXd> scaling(tree.nodes.size());
  std::vector<std::vector<CellBlock>> per_level(b.t + 2);

  for (int q = b.t; q >= 0; --q) {
    for (Index id : tree.levels[q]) {
      const auto &node = tree.nodes[id];
      const Index s = node.size();
      Eigen::MatrixXd input;
      if (node.leaf()) {
        input = Eigen::MatrixXd::Identity(s, s);
      } else {
        const auto &ls = scaling[node.left];
        const auto &rs = scaling[node.right];
        input = Eigen::MatrixXd::Zero(s, ls.cols() + rs.cols());
        input.topLeftCorner(ls.rows(), ls.cols()) = ls;
        input.bottomRightCorner(rs.rows(), rs.cols()) = rs;
        scaling[node.left].resize(0, 0);
        scaling[node.right].resize(0, 0);
      }
      const Eigen::MatrixXd g =
          local_design(points, perm, node.begin, node.end, b.accuracy_set, acc_mono);
      LocalSplit split = local_split(input, g.transpose() * input, options.rank_eps);
      if (input.cols() <= kReorthCheckLimit) {
        Eigen::MatrixXd all(s, input.cols());
        all << split.scaling, split.detail;
        if (orthonormality_residual(all) > 1e-12) {
          modified_gram_schmidt(all);
          split.scaling = all.leftCols(split.rank);
          split.detail = all.rightCols(all.cols() - split.rank);
          ++b.reorthogonalizations;
        }
      }
      scaling[id] = std::move(split.scaling);
      if (split.detail.cols() > 0) {
        CellBlock blk;
        blk.cell = id;
        blk.level = q;
        blk.begin = node.begin;
        blk.end = node.end;
        blk.coeffs = std::move(split.detail);
        per_level[q + 1].push_back(std::move(blk));
      }
    }
  }

  // Level -1: split the root's scaling vectors against the trend space.
  {
    const auto &root = tree.root();
    const SparseMonomials trend_mono(trend_set);
    const Eigen::MatrixXd g =
        local_design(points, perm, root.begin, root.end, trend_set, trend_mono);
    const Eigen::MatrixXd &input = scaling[root.id];
    LocalSplit split = local_split(input, g.transpose() * input, options.rank_eps);
    b.trend_rank = split.rank;
    b.l = std::move(split.scaling);
    if (split.detail.cols() > 0) {
      CellBlock blk;
      blk.cell = root.id;
      blk.level = -1;
      blk.begin = root.begin;
      blk.end = root.end;
      blk.coeffs = std::move(split.detail);
      per_level[0].push_back(std::move(blk));
    }
  }

  Index offset = 0;
  for (int q = b.t; q >= -1; --q) {
    for (auto &blk : per_level[q + 1]) {
      blk.row_offset = offset;
      offset += blk.count();
      b.level_rows[q + 1] += blk.count();
      b.blocks.push_back(std::move(blk));
    }
  }
  return b;
}

namespace {

Eigen::VectorXd permute(const MultiLevelBasis &b,
                        const Eigen::Ref<const Eigen::VectorXd> &v) {
  Eigen::VectorXd vp(b.n);
  for (Index k = 0; k < b.n; ++k)
    vp[k] = v[b.permutation[k]];
  return vp;
}

Eigen::VectorXd unpermute(const MultiLevelBasis &b, const Eigen::VectorXd &vp) {
  Eigen::VectorXd v(b.n);
  for (Index k = 0; k < b.n; ++k)
    v[b.permutation[k]] = vp[k];
  return v;
}

} // namespace

Eigen::VectorXd apply_W(const MultiLevelBasis &b,
                        const Eigen::Ref<const Eigen::VectorXd> &v) {
  if (v.size() != b.n)
    throw ConfigError("apply_W: length mismatch");
  const Eigen::VectorXd vp = permute(b, v);
  Eigen::VectorXd out(b.rows());
  for (const auto &blk : b.blocks)
    out.segment(blk.row_offset, blk.count()).noalias() =
        blk.coeffs.transpose() * vp.segment(blk.begin, blk.support());
  return out;
}

Eigen::VectorXd apply_WT(const MultiLevelBasis &b,
                         const Eigen::Ref<const Eigen::VectorXd> &u) {
  if (u.size() != b.rows())
    throw ConfigError("apply_WT: length mismatch");
  Eigen::VectorXd vp = Eigen::VectorXd::Zero(b.n);
  for (const auto &blk : b.blocks)
    vp.segment(blk.begin, blk.support()).noalias() +=
        blk.coeffs * u.segment(blk.row_offset, blk.count());
  return unpermute(b, vp);
}

Eigen::VectorXd apply_L(const MultiLevelBasis &b,
                        const Eigen::Ref<const Eigen::VectorXd> &v) {
  if (v.size() != b.n)
    throw ConfigError("apply_L: length mismatch");
  return b.l.transpose() * permute(b, v);
}

Eigen::VectorXd apply_LT(const MultiLevelBasis &b,
                         const Eigen::Ref<const Eigen::VectorXd> &u) {
  if (u.size() != b.trend_rank)
    throw ConfigError("apply_LT: length mismatch");
  return unpermute(b, b.l * u);
}

Eigen::VectorXd partial_transform(const MultiLevelBasis &b,
                                  const Eigen::Ref<const Eigen::VectorXd> &z,
                                  int n) {
  const Index rows = b.rows_through(n);
  return apply_W(b, z).head(rows);
}

Eigen::MatrixXd dense_W(const MultiLevelBasis &b) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(b.rows(), b.n);
  for (const auto &blk : b.blocks)
    for (Index k = 0; k < blk.support(); ++k)
      w.col(b.permutation[blk.begin + k])
          .segment(blk.row_offset, blk.count()) = blk.coeffs.row(k).transpose();
  return w;
}

Eigen::MatrixXd dense_L(const MultiLevelBasis &b) {
  Eigen::MatrixXd l(b.trend_rank, b.n);
  for (Index k = 0; k < b.n; ++k)
    l.col(b.permutation[k]) = b.l.row(k).transpose();
  return l;
}

BasisCheck check_basis(const MultiLevelBasis &b, const Points &points) {
  BasisCheck c;
  // P = [W; L] as a sparse matrix; the Gram product stays sparse.
  using Sparse = Eigen::SparseMatrix<double, Eigen::RowMajor, Index>;
  std::vector<Eigen::Triplet<double, Index>> trips;
  for (const auto &blk : b.blocks)
    for (Index j = 0; j < blk.count(); ++j)
      for (Index k = 0; k < blk.support(); ++k)
        if (blk.coeffs(k, j) != 0.0)
          trips.emplace_back(blk.row_offset + j, b.permutation[blk.begin + k], blk.coeffs(k, j));
  for (Index k = 0; k < b.n; ++k)
    for (Index j = 0; j < b.trend_rank; ++j)
      trips.emplace_back(b.rows() + j, b.permutation[k], b.l(k, j));
  Sparse p(b.rows() + b.trend_rank, b.n);
  p.setFromTriplets(trips.begin(), trips.end());
  const Sparse pt = p.transpose();
  Sparse g = (p * pt).pruned(0.0);
  double worst = 0.0;
  for (Index i = 0; i < g.outerSize(); ++i) {
    bool seen_diag = false;
    for (Sparse::InnerIterator it(g, i); it; ++it) {
      const double v = it.col() == i ? it.value() - 1.0 : it.value();
      seen_diag = seen_diag || it.col() == i;
      worst = std::max(worst, std::abs(v));
    }
    if (!seen_diag)
      worst = std::max(worst, 1.0);
  }
  c.orthonormality = worst;

  const Sparse w = p.topRows(b.rows());
  const Eigen::MatrixXd m = design_matrix(points, b.trend_set);
  c.trend_moments = w.rows() ? Eigen::MatrixXd(w * m).cwiseAbs().maxCoeff() : 0.0;

  const Eigen::MatrixXd ma = design_matrix(points, b.accuracy_set);
  const Index fine_rows = b.rows_through(0);
  if (fine_rows > 0)
    c.accuracy_moments =
        Eigen::MatrixXd(Sparse(p.topRows(fine_rows)) * ma).cwiseAbs().maxCoeff();

  for (int q = 0; q <= b.t; ++q)
    if (b.rows_at(q) > b.p_tilde * (Index{1} << q))
      c.count_bound = false;
  if (b.rows_at(-1) > b.p_tilde - b.p)
    c.count_bound = false;

  for (const auto &blk : b.blocks) {
    const int q = blk.level;
    const double cap = std::ldexp(static_cast<double>(b.p_tilde), b.t - q + 1);
    for (Index j = 0; j < blk.count(); ++j) {
      const Index nnz = (blk.coeffs.col(j).array() != 0.0).count();
      if (static_cast<double>(nnz) > cap)
        c.support_bound = false;
    }
  }
  c.completeness = (b.trend_rank + b.rows() == b.n);
  return c;
}

nlohmann::json basis_stats(const MultiLevelBasis &b) {
  nlohmann::json j;
  j["n"] = b.n;
  j["d"] = b.d;
  j["t"] = b.t;
  j["p"] = b.p;
  j["p_tilde"] = b.p_tilde;
  j["trend_rank"] = b.trend_rank;
  j["trend_set"] = index_sets::to_json(b.trend_set, false);
  j["accuracy_set"] = index_sets::to_json(b.accuracy_set, false);
  j["detail_rows"] = b.rows();
  j["reorthogonalizations"] = b.reorthogonalizations;
  nlohmann::json lv = nlohmann::json::array();
  for (int q = b.t; q >= -1; --q)
    lv.push_back({{"level", q}, {"rows", b.rows_at(q)}});
  j["levels"] = lv;
  return j;
}

namespace {
constexpr char kMagic[4] = {'M', 'L', 'K', 'B'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::int32_t kTrendLevelCode = -2;
} // namespace

void write_basis(const MultiLevelBasis &b, const std::string &path) {
  io::BinaryWriter w(path);
  w.bytes(kMagic, 4);
  w.u32(kFormatVersion);
  w.i64(b.n);
  w.i32(b.d);
  w.i64(b.p);
  w.i64(b.p_tilde);
  w.i32(b.t);
  w.i64(b.trend_rank);
  w.i32(static_cast<std::int32_t>(b.trend_set.kind));
  w.i32(b.trend_set.w);
  w.i32(static_cast<std::int32_t>(b.accuracy_set.kind));
  w.i32(b.accuracy_set.w);
  w.i32(b.reorthogonalizations);
  w.i32(static_cast<std::int32_t>(b.level_rows.size()));
  for (Index c : b.level_rows)
    w.i64(c);
  for (Index k : b.permutation)
    w.i64(k);
  auto row = [&](std::int32_t level, Index cell, Index begin, Index end,
                 const Eigen::MatrixXd &coeffs, Index j) {
    w.i32(level);
    w.i64(cell);
    w.i64(end - begin);
    for (Index k = begin; k < end; ++k)
      w.i64(b.permutation[k]);
    for (Index k = 0; k < end - begin; ++k)
      w.f64(coeffs(k, j));
  };
  w.i64(b.rows() + b.trend_rank);
  for (const auto &blk : b.blocks)
    for (Index j = 0; j < blk.count(); ++j)
      row(blk.level, blk.cell, blk.begin, blk.end, blk.coeffs, j);
  for (Index j = 0; j < b.trend_rank; ++j)
    row(kTrendLevelCode, 0, 0, b.n, b.l, j);
  w.close();
}

MultiLevelBasis read_basis(const std::string &path) {
  io::BinaryReader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (!std::equal(magic, magic + 4, kMagic))
    throw ConfigError("read_basis: bad magic in " + path);
  if (r.u32() != kFormatVersion)
    throw ConfigError("read_basis: unsupported version");
  MultiLevelBasis b;
  b.n = r.i64();
  b.d = r.i32();
  b.p = r.i64();
  b.p_tilde = r.i64();
  b.t = r.i32();
  b.trend_rank = r.i64();
  const auto tk = static_cast<index_sets::Kind>(r.i32());
  const int tw = r.i32();
  const auto ak = static_cast<index_sets::Kind>(r.i32());
  const int aw = r.i32();
  b.reorthogonalizations = r.i32();
  b.trend_set = index_sets::build_index_set(tk, b.d, tw);
  b.accuracy_set = index_sets::build_index_set(ak, b.d, aw);
  const auto nlev = r.i32();
  b.level_rows.resize(nlev);
  for (auto &c : b.level_rows)
    c = r.i64();
  b.permutation.resize(b.n);
  for (auto &k : b.permutation)
    k = r.i64();
  std::vector<Index> inverse(b.n);
  for (Index k = 0; k < b.n; ++k)
    inverse[b.permutation[k]] = k;

  const Index total = r.i64();
  b.l.resize(b.n, b.trend_rank);
  Index trend_col = 0, offset = 0;
  std::vector<double> vals;
  for (Index row = 0; row < total; ++row) {
    const std::int32_t level = r.i32();
    const Index cell = r.i64();
    const Index nnz = r.i64();
    Index begin = b.n;
    for (Index k = 0; k < nnz; ++k)
      begin = std::min(begin, inverse[r.i64()]);
    vals.resize(nnz);
    for (auto &v : vals)
      v = r.f64();
    if (level == kTrendLevelCode) {
      for (Index k = 0; k < nnz; ++k)
        b.l(begin + k, trend_col) = vals[k];
      ++trend_col;
      continue;
    }
    if (b.blocks.empty() || b.blocks.back().cell != cell ||
        b.blocks.back().level != level) {
      CellBlock blk;
      blk.cell = cell;
      blk.level = level;
      blk.begin = begin;
      blk.end = begin + nnz;
      blk.row_offset = offset;
      b.blocks.push_back(std::move(blk));
    }
    auto &blk = b.blocks.back();
    blk.coeffs.conservativeResize(nnz, blk.coeffs.cols() + 1);
    for (Index k = 0; k < nnz; ++k)
      blk.coeffs(k, blk.coeffs.cols() - 1) = vals[k];
    ++offset;
  }
  return b;
}

} // namespace mlkrig::basis
