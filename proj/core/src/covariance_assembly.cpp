#include "mlkrig/covariance_assembly.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>

#include "mlkrig/binary_io.hpp"
#include "mlkrig/error.hpp"
#include "mlkrig/rng.hpp"

namespace mlkrig::assembly {

using basis::CellBlock;
using basis::MultiLevelBasis;

double tau_schedule(double tau, int t, int i, int j) {
  return tau * std::exp2(t - 0.5 * (i + j));
}

Pattern build_pattern(const MultiLevelBasis &b, const tree::PartitionTree &tree,
                      const Points &points, double tau, int n,
                      tree::SearchRule rule) {
  if (tau < 0 || std::isnan(tau))
    throw ConfigError("build_pattern: tau must be non-negative");
  Pattern pat;
  pat.n = n;
  pat.dim = b.rows_through(n);
  pat.tau = tau;
  pat.rule = rule;

  // Blocks taking part in the truncated matrix, and node -> block per level.
  std::vector<Index> active;
  std::vector<std::map<Index, Index>> by_node(b.t + 2);
  for (Index k = 0; k < static_cast<Index>(b.blocks.size()); ++k) {
    const auto &blk = b.blocks[k];
    if (blk.level < n)
      continue;
    active.push_back(k);
    by_node[blk.level + 1][blk.cell] = k;
  }

  std::set<std::pair<Index, Index>> pairs;
  auto add = [&](Index x, Index y) { pairs.emplace(std::min(x, y), std::max(x, y)); };

  std::vector<Index> members;
  for (Index ka : active) {
    const auto &a = b.blocks[ka];
    if (a.level <= 0) {
      // Coarse root blocks interact with everything.
      for (Index kb : active)
        add(ka, kb);
      continue;
    }
    members.assign(tree.permutation.begin() + a.begin,
                   tree.permutation.begin() + a.end);
    for (int j = a.level; j <= b.t; ++j) {
      const auto &targets = by_node[j + 1];
      if (targets.empty())
        continue;
      const double tij = tau_schedule(tau, b.t, a.level, j);
      const auto cells = tree::search_cells(tree, points, members, j, tij, rule);
      ++pat.searches;
      for (Index cell : cells) {
        auto it = targets.find(cell);
        if (it != targets.end())
          add(ka, it->second);
      }
    }
    add(ka, ka);
  }
  pat.pairs.assign(pairs.begin(), pairs.end());

  for (const auto &node : tree.nodes)
    if (node.leaf())
      pat.leaf_bounds.push_back(node.begin);
  std::sort(pat.leaf_bounds.begin(), pat.leaf_bounds.end());
  pat.leaf_bounds.push_back(b.n);
  const Index nl = static_cast<Index>(pat.leaf_bounds.size()) - 1;
  auto leaf_of = [&](Index pos) {
    return static_cast<Index>(std::upper_bound(pat.leaf_bounds.begin(), pat.leaf_bounds.end(), pos) -
                              pat.leaf_bounds.begin()) - 1;
  };
  std::vector<char> mask(static_cast<std::size_t>(nl * nl), 0);
  for (const auto &[ka, kb] : pat.pairs) {
    const auto &x = b.blocks[ka];
    const auto &y = b.blocks[kb];
    if (x.level <= 0 || y.level <= 0) {
      pat.full = true;
      break;
    }
    const Index x0 = leaf_of(x.begin), x1 = leaf_of(x.end - 1);
    const Index y0 = leaf_of(y.begin), y1 = leaf_of(y.end - 1);
    for (Index i = x0; i <= x1; ++i)
      for (Index j = y0; j <= y1; ++j)
        mask[static_cast<std::size_t>(std::min(i, j) * nl + std::max(i, j))] = 1;
  }
  if (!pat.full) {
    double covered = 0.0;
    for (Index i = 0; i < nl; ++i)
      for (Index j = i; j < nl; ++j)
        if (mask[static_cast<std::size_t>(i * nl + j)]) {
          pat.leaf_pairs.emplace_back(i, j);
          const double sz = static_cast<double>(pat.leaf_bounds[i + 1] - pat.leaf_bounds[i]) *
                            static_cast<double>(pat.leaf_bounds[j + 1] - pat.leaf_bounds[j]);
          covered += i == j ? sz : 2.0 * sz;
        }
    if (covered > 0.5 * static_cast<double>(b.n) * static_cast<double>(b.n)) {
      pat.full = true;
      pat.leaf_pairs.clear();
    }
  }
  return pat;
}

namespace {

Points gather(const Points &points, const std::vector<Index> &perm, Index begin,
              Index end) {
  Points out(points.rows(), end - begin);
  for (Index k = begin; k < end; ++k)
    out.col(k - begin) = points.col(perm[k]);
  return out;
}

} // namespace

BlockSparseMatrix assemble(const Pattern &pattern, const MultiLevelBasis &b,
                           const Points &points,
                           const kernels::KernelSpec &spec) {
  BlockSparseMatrix m;
  m.t = b.t;
  m.n = pattern.n;
  m.dim = pattern.dim;
  const kernels::Kernel kernel(spec);
  const Points all = gather(points, b.permutation, 0, b.n);
  const Index d = all.rows();
  const double diag = kernel.of_distance(0.0);

  // Kernel entries in permuted order: either the full matrix or one block
  // per needed pair of leaf cells, each evaluated once.
  Eigen::MatrixXd full;
  const auto &bounds = pattern.leaf_bounds;
  const Index nl = bounds.empty() ? 0 : static_cast<Index>(bounds.size()) - 1;
  std::vector<Index> slot;
  std::vector<Eigen::MatrixXd> leaf_blocks;
  if (pattern.full) {
    full.resize(b.n, b.n);
    for (Index j = 0; j < b.n; ++j) {
      full(j, j) = diag;
      for (Index i = j + 1; i < b.n; ++i)
        full(i, j) = full(j, i) = kernel(all.col(i).data(), all.col(j).data(), d);
    }
    m.cost.kernel_evals += 0.5 * static_cast<double>(b.n) * (b.n + 1);
  } else {
    slot.assign(static_cast<std::size_t>(nl * nl), -1);
    leaf_blocks.reserve(pattern.leaf_pairs.size());
    for (const auto &[li, lj] : pattern.leaf_pairs) {
      const Index r0 = bounds[li], r1 = bounds[li + 1];
      const Index c0 = bounds[lj], c1 = bounds[lj + 1];
      Eigen::MatrixXd blk(r1 - r0, c1 - c0);
      for (Index j = c0; j < c1; ++j)
        for (Index i = r0; i < r1; ++i)
          blk(i - r0, j - c0) = i == j ? diag : kernel(all.col(i).data(), all.col(j).data(), d);
      m.cost.kernel_evals += static_cast<double>(blk.size());
      slot[static_cast<std::size_t>(li * nl + lj)] = static_cast<Index>(leaf_blocks.size());
      leaf_blocks.push_back(std::move(blk));
    }
  }
  auto leaf_of = [&](Index pos) {
    return static_cast<Index>(std::upper_bound(bounds.begin(), bounds.end(), pos) -
                              bounds.begin()) - 1;
  };
  // Kernel rows [r0, r1) x columns [c0, c1) of the permuted matrix.
  auto kernel_rect = [&](Index r0, Index r1, Index c0, Index c1) -> Eigen::MatrixXd {
    if (pattern.full)
      return full.block(r0, c0, r1 - r0, c1 - c0);
    Eigen::MatrixXd out(r1 - r0, c1 - c0);
    for (Index li = leaf_of(r0); li < nl && bounds[li] < r1; ++li)
      for (Index lj = leaf_of(c0); lj < nl && bounds[lj] < c1; ++lj) {
        const Index s = slot[static_cast<std::size_t>(std::min(li, lj) * nl + std::max(li, lj))];
        if (s < 0)
          throw NumericalError("assemble: kernel block missing from the pattern");
        const Index hr = bounds[li + 1] - bounds[li], hc = bounds[lj + 1] - bounds[lj];
        if (li <= lj)
          out.block(bounds[li] - r0, bounds[lj] - c0, hr, hc) = leaf_blocks[s];
        else
          out.block(bounds[li] - r0, bounds[lj] - c0, hr, hc) = leaf_blocks[s].transpose();
      }
    return out;
  };

  // Root blocks see every point, so C D_root is formed once and reused.
  std::map<Index, Eigen::MatrixXd> root_products;
  if (pattern.full)
    for (const auto &[ka, kb] : pattern.pairs)
      for (Index k : {ka, kb})
        if (b.blocks[k].level <= 0 && !root_products.count(k)) {
          root_products.emplace(k, full * b.blocks[k].coeffs);
          m.cost.flops += 2.0 * b.n * b.n * b.blocks[k].count();
        }

  m.blocks.reserve(pattern.pairs.size());
  for (const auto &[ka, kb] : pattern.pairs) {
    const CellBlock &a = b.blocks[ka];
    const CellBlock &c = b.blocks[kb];
    BlockSparseMatrix::Block out;
    out.a = ka;
    out.b = kb;
    out.row = a.row_offset;
    out.col = c.row_offset;
    if (a.level <= 0 || c.level <= 0) {
      // One side is a root block: D_x^T (C D_root) restricted to x's range.
      const bool a_root = a.level <= 0;
      const Index kr = a_root ? ka : kb;
      const CellBlock &other = a_root ? c : a;
      const Eigen::MatrixXd &u = root_products.at(kr);
      Eigen::MatrixXd v = other.coeffs.transpose() * u.middleRows(other.begin, other.support());
      out.values = a_root ? Eigen::MatrixXd(v.transpose()) : v;
      m.cost.flops += 2.0 * other.support() * other.count() * u.cols();
    } else {
      const Eigen::MatrixXd kab = kernel_rect(a.begin, a.end, c.begin, c.end);
      out.values = a.coeffs.transpose() * (kab * c.coeffs);
      m.cost.flops += 2.0 * a.support() * c.support() * c.count() +
                      2.0 * a.support() * a.count() * c.count();
    }
    if (ka == kb)
      out.values = 0.5 * (out.values + out.values.transpose()).eval();
    m.blocks.push_back(std::move(out));
  }
  return m;
}

BlockSparseMatrix assemble_sparse_CW(const MultiLevelBasis &b,
                                     const tree::PartitionTree &tree,
                                     const kernels::KernelSpec &spec,
                                     const Points &points, double tau, int n,
                                     tree::SearchRule rule) {
  return assemble(build_pattern(b, tree, points, tau, n, rule), b, points, spec);
}

Index BlockSparseMatrix::nnz() const {
  Index total = 0;
  for (const auto &blk : blocks)
    total += blk.values.size() * (blk.a == blk.b ? 1 : 2);
  return total;
}

double BlockSparseMatrix::density() const {
  return dim ? static_cast<double>(nnz()) / (static_cast<double>(dim) * dim) : 0.0;
}

SparseMatrix BlockSparseMatrix::to_sparse() const {
  std::vector<Eigen::Triplet<double, Index>> trips;
  trips.reserve(static_cast<std::size_t>(nnz()));
  for (const auto &blk : blocks) {
    for (Index j = 0; j < blk.values.cols(); ++j)
      for (Index i = 0; i < blk.values.rows(); ++i) {
        const double v = blk.values(i, j);
        trips.emplace_back(blk.row + i, blk.col + j, v);
        if (blk.a != blk.b)
          trips.emplace_back(blk.col + j, blk.row + i, v);
      }
  }
  SparseMatrix s(dim, dim);
  s.setFromTriplets(trips.begin(), trips.end());
  return s;
}

Eigen::MatrixXd BlockSparseMatrix::to_dense() const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto &blk : blocks) {
    out.block(blk.row, blk.col, blk.values.rows(), blk.values.cols()) = blk.values;
    if (blk.a != blk.b)
      out.block(blk.col, blk.row, blk.values.cols(), blk.values.rows()) =
          blk.values.transpose();
  }
  return out;
}

Eigen::MatrixXd assemble_dense_CW(const MultiLevelBasis &b,
                                  const Eigen::MatrixXd &c) {
  if (b.rows() == 0)
    return Eigen::MatrixXd(0, 0);
  // W is sparse with O(p~ N t) entries, so apply it column by column.
  const Index n = c.rows();
  Eigen::MatrixXd wc(b.rows(), n);
  for (Index j = 0; j < n; ++j)
    wc.col(j) = basis::apply_W(b, c.col(j));
  const Eigen::MatrixXd cwt = wc.transpose();
  Eigen::MatrixXd out(b.rows(), b.rows());
  for (Index i = 0; i < b.rows(); ++i)
    out.col(i) = basis::apply_W(b, cwt.col(i));
  return 0.5 * (out + out.transpose());
}

Eigen::MatrixXd assemble_dense_CW(const MultiLevelBasis &b,
                                  const kernels::KernelSpec &spec,
                                  const Points &points, std::size_t cap) {
  if (b.rows() == 0)
    return Eigen::MatrixXd(0, 0);
  return assemble_dense_CW(b, kernels::cov_matrix(points, spec, cap));
}

double symmetric_norm_estimate(const Eigen::MatrixXd &e, int max_iter,
                               double rel_tol, int *iterations) {
  if (e.size() == 0)
    return 0.0;
  Rng rng(0x5eed);
  Eigen::VectorXd v(e.rows());
  for (Index k = 0; k < v.size(); ++k)
    v[k] = rng.normal();
  v.normalize();
  double est = 0.0;
  int it = 0;
  for (; it < max_iter; ++it) {
    Eigen::VectorXd w = e * v;
    const double nw = w.norm();
    if (nw == 0.0) {
      est = 0.0;
      ++it;
      break;
    }
    const bool done = std::abs(nw - est) <= rel_tol * nw;
    est = nw;
    v = w / nw;
    if (done) {
      ++it;
      break;
    }
  }
  if (iterations)
    *iterations = it;
  return est;
}

TruncationGap truncation_gap(const Eigen::MatrixXd &dense,
                             const Eigen::MatrixXd &sparse) {
  if (dense.rows() != sparse.rows() || dense.cols() != sparse.cols())
    throw ConfigError("truncation_gap: shape mismatch");
  TruncationGap g;
  if (dense.size() == 0)
    return g;
  const Eigen::MatrixXd e = dense - sparse;
  g.max_norm = e.cwiseAbs().maxCoeff();
  if (g.max_norm > 0)
    g.two_norm = symmetric_norm_estimate(e, 50, 1e-6, &g.iterations);
  return g;
}

namespace {
constexpr char kMagic[4] = {'M', 'L', 'K', 'S'};
constexpr std::uint32_t kFormatVersion = 1;
} // namespace

void write_block_sparse(const BlockSparseMatrix &m, const std::string &path) {
  io::BinaryWriter w(path);
  w.bytes(kMagic, 4);
  w.u32(kFormatVersion);
  w.i32(m.t);
  w.i32(m.n);
  w.i64(m.dim);
  w.i64(static_cast<std::int64_t>(m.blocks.size()));
  for (const auto &blk : m.blocks) {
    w.i64(blk.a);
    w.i64(blk.b);
    w.i64(blk.row);
    w.i64(blk.col);
    w.i64(blk.values.rows());
    w.i64(blk.values.cols());
    for (Index j = 0; j < blk.values.cols(); ++j)
      for (Index i = 0; i < blk.values.rows(); ++i) {
        w.i64(blk.row + i);
        w.i64(blk.col + j);
        w.f64(blk.values(i, j));
      }
  }
  w.close();
}

BlockSparseMatrix read_block_sparse(const std::string &path) {
  io::BinaryReader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (!std::equal(magic, magic + 4, kMagic))
    throw ConfigError("read_block_sparse: bad magic in " + path);
  if (r.u32() != kFormatVersion)
    throw ConfigError("read_block_sparse: unsupported version");
  BlockSparseMatrix m;
  m.t = r.i32();
  m.n = r.i32();
  m.dim = r.i64();
  const Index count = r.i64();
  m.blocks.resize(count);
  for (auto &blk : m.blocks) {
    blk.a = r.i64();
    blk.b = r.i64();
    blk.row = r.i64();
    blk.col = r.i64();
    const Index rows = r.i64(), cols = r.i64();
    blk.values.resize(rows, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) {
        r.i64();
        r.i64();
        blk.values(i, j) = r.f64();
      }
  }
  return m;
}

void write_matrix_market(const SparseMatrix &m, const std::string &path) {
  std::ofstream out(path);
  if (!out)
    throw ConfigError("cannot open '" + path + "' for writing");
  Index lower = 0;
  for (Index j = 0; j < m.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(m, j); it; ++it)
      if (it.row() >= it.col())
        ++lower;
  out << "%%MatrixMarket matrix coordinate real symmetric\n";
  out << m.rows() << ' ' << m.cols() << ' ' << lower << '\n';
  char buf[64];
  for (Index j = 0; j < m.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(m, j); it; ++it)
      if (it.row() >= it.col()) {
        std::snprintf(buf, sizeof buf, "%.17g", it.value());
        out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << buf << '\n';
      }
}

} // namespace mlkrig::assembly
