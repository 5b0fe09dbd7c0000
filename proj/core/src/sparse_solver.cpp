#include "mlkrig/sparse_solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/OrderingMethods>

#include "mlkrig/rng.hpp"

namespace mlkrig::solver {

std::vector<Index> natural_ordering(Index n) {
  std::vector<Index> o(n);
  std::iota(o.begin(), o.end(), 0);
  return o;
}

std::vector<Index> fill_reducing_ordering(const SparseMatrix &pattern) {
  if (pattern.rows() != pattern.cols())
    throw ConfigError("fill_reducing_ordering: matrix must be square");
  const Index n = pattern.rows();
  if (n == 0)
    return {};
  Eigen::AMDOrdering<Index> amd;
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, Index> pinv;
  SparseMatrix a = pattern;
  amd(a, pinv);
  std::vector<Index> order(n);
  for (Index k = 0; k < n; ++k)
    order[k] = pinv.indices()[k];
  return order;
}

namespace {

// Upper triangle of P^T A P in compressed columns.
struct UpperCsc {
  Index n = 0;
  std::vector<Index> p, i;
  std::vector<double> x;
};

UpperCsc permuted_upper(const SparseMatrix &a, const std::vector<Index> &inverse) {
  UpperCsc c;
  c.n = a.rows();
  std::vector<Index> count(c.n + 1, 0);
  for (Index j = 0; j < a.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(a, j); it; ++it) {
      const Index pi = inverse[it.row()], pj = inverse[it.col()];
      if (pi <= pj)
        ++count[pj + 1];
    }
  for (Index k = 0; k < c.n; ++k)
    count[k + 1] += count[k];
  c.p = count;
  c.i.resize(count.back());
  c.x.resize(count.back());
  std::vector<Index> next(count.begin(), count.end() - 1);
  for (Index j = 0; j < a.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(a, j); it; ++it) {
      const Index pi = inverse[it.row()], pj = inverse[it.col()];
      if (pi <= pj) {
        const Index q = next[pj]++;
        c.i[q] = pi;
        c.x[q] = it.value();
      }
    }
  return c;
}

std::vector<Index> etree(const UpperCsc &c) {
  std::vector<Index> parent(c.n, -1), ancestor(c.n, -1);
  for (Index k = 0; k < c.n; ++k) {
    for (Index q = c.p[k]; q < c.p[k + 1]; ++q) {
      Index i = c.i[q];
      while (i != -1 && i < k) {
        const Index inext = ancestor[i];
        ancestor[i] = k;
        if (inext == -1)
          parent[i] = k;
        i = inext;
      }
    }
  }
  return parent;
}

// Nonzero pattern of row k of L (off-diagonal) in s[top..n), topologically
// ordered. `mark` must be false on entry and is restored on exit.
Index ereach(const UpperCsc &c, Index k, const std::vector<Index> &parent,
             std::vector<Index> &s, std::vector<char> &mark) {
  Index top = c.n;
  mark[k] = 1;
  for (Index q = c.p[k]; q < c.p[k + 1]; ++q) {
    Index i = c.i[q];
    if (i > k)
      continue;
    Index len = 0;
    for (; !mark[i]; i = parent[i]) {
      s[len++] = i;
      mark[i] = 1;
    }
    while (len > 0)
      s[--top] = s[--len];
  }
  for (Index q = top; q < c.n; ++q)
    mark[s[q]] = 0;
  mark[k] = 0;
  return top;
}

// Scalar dense Cholesky used only to locate the failing column.
Index dense_failing_column(Eigen::MatrixXd a) {
  const Index n = a.rows();
  for (Index k = 0; k < n; ++k) {
    double d = a(k, k) - a.row(k).head(k).squaredNorm();
    if (!(d > 0))
      return k;
    d = std::sqrt(d);
    a(k, k) = d;
    for (Index i = k + 1; i < n; ++i)
      a(i, k) = (a(i, k) - a.row(i).head(k).dot(a.row(k).head(k))) / d;
  }
  return -1;
}

} // namespace

SymbolicCholesky analyze(const SparseMatrix &a, const std::vector<Index> &order) {
  SymbolicCholesky sym;
  sym.n = a.rows();
  sym.order = order;
  sym.inverse.resize(sym.n);
  for (Index k = 0; k < sym.n; ++k)
    sym.inverse[order[k]] = k;
  const UpperCsc c = permuted_upper(a, sym.inverse);
  sym.parent = etree(c);
  std::vector<Index> counts(sym.n, 1), s(sym.n);
  std::vector<char> mark(sym.n, 0);
  for (Index k = 0; k < sym.n; ++k) {
    const Index top = ereach(c, k, sym.parent, s, mark);
    for (Index q = top; q < sym.n; ++q)
      ++counts[s[q]];
  }
  sym.colptr.assign(sym.n + 1, 0);
  for (Index k = 0; k < sym.n; ++k)
    sym.colptr[k + 1] = sym.colptr[k] + counts[k];
  return sym;
}

CholeskyFactor CholeskyFactor::factorize_dense(const Eigen::MatrixXd &a) {
  CholeskyFactor f;
  f.n_ = a.rows();
  f.dense_ = true;
  f.order_ = natural_ordering(f.n_);
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) {
    const Index col = dense_failing_column(a);
    throw NotSpdError("Cholesky: matrix is not positive definite (column " +
                          std::to_string(col) + ")",
                      col);
  }
  f.dense_l_ = llt.matrixL();
  for (Index k = 0; k < f.n_; ++k)
    if (!(f.dense_l_(k, k) > 0))
      throw NotSpdError("Cholesky: non-positive pivot (column " + std::to_string(k) + ")", k);
  return f;
}

CholeskyFactor CholeskyFactor::factorize(const SparseMatrix &a, Index dense_threshold) {
  if (a.rows() != a.cols())
    throw ConfigError("Cholesky: matrix must be square");
  if (a.rows() < dense_threshold)
    return factorize_dense(Eigen::MatrixXd(a));
  return factorize(a, analyze(a, fill_reducing_ordering(a)));
}

CholeskyFactor CholeskyFactor::factorize(const SparseMatrix &a, const SymbolicCholesky &sym) {
  if (a.rows() != sym.n)
    throw ConfigError("Cholesky: symbolic analysis does not match the matrix");
  CholeskyFactor f;
  const Index n = sym.n;
  f.n_ = n;
  f.order_ = sym.order;
  const UpperCsc c = permuted_upper(a, sym.inverse);
  f.lp_ = sym.colptr;
  f.li_.assign(sym.nnz(), 0);
  f.lx_.assign(sym.nnz(), 0.0);
  std::vector<Index> next(f.lp_.begin(), f.lp_.end() - 1), s(n);
  std::vector<char> mark(n, 0);
  std::vector<double> x(n, 0.0);
  for (Index k = 0; k < n; ++k) {
    const Index top = ereach(c, k, sym.parent, s, mark);
    x[k] = 0.0;
    for (Index q = c.p[k]; q < c.p[k + 1]; ++q)
      if (c.i[q] <= k)
        x[c.i[q]] += c.x[q];
    double d = x[k];
    x[k] = 0.0;
    for (Index q = top; q < n; ++q) {
      const Index i = s[q];
      const double lki = x[i] / f.lx_[f.lp_[i]];
      x[i] = 0.0;
      for (Index r = f.lp_[i] + 1; r < next[i]; ++r)
        x[f.li_[r]] -= f.lx_[r] * lki;
      d -= lki * lki;
      const Index r = next[i]++;
      f.li_[r] = k;
      f.lx_[r] = lki;
    }
    if (!(d > 0)) {
      const Index col = sym.order[k];
      throw NotSpdError("Cholesky: matrix is not positive definite (column " +
                            std::to_string(col) + ")",
                        col);
    }
    const Index r = next[k]++;
    f.li_[r] = k;
    f.lx_[r] = std::sqrt(d);
  }
  return f;
}

Eigen::VectorXd CholeskyFactor::diagonal() const {
  Eigen::VectorXd d(n_);
  for (Index k = 0; k < n_; ++k)
    d[k] = dense_ ? dense_l_(k, k) : lx_[lp_[k]];
  return d;
}

double CholeskyFactor::log_det() const {
  const Eigen::VectorXd d = diagonal();
  double s = 0.0;
  for (Index k = 0; k < n_; ++k)
    s += std::log(d[k]);
  return 2.0 * s;
}

double log_det(const CholeskyFactor &f) { return f.log_det(); }

Index CholeskyFactor::factor_nnz() const {
  return dense_ ? n_ * (n_ + 1) / 2 : static_cast<Index>(lx_.size());
}

SparseMatrix CholeskyFactor::factor() const {
  if (dense_)
    return dense_l_.sparseView();
  std::vector<Eigen::Triplet<double, Index>> trips;
  trips.reserve(lx_.size());
  for (Index j = 0; j < n_; ++j)
    for (Index q = lp_[j]; q < lp_[j + 1]; ++q)
      trips.emplace_back(li_[q], j, lx_[q]);
  SparseMatrix g(n_, n_);
  g.setFromTriplets(trips.begin(), trips.end());
  return g;
}

Eigen::VectorXd CholeskyFactor::forward(const Eigen::VectorXd &pb) const {
  if (dense_)
    return dense_l_.triangularView<Eigen::Lower>().solve(pb);
  Eigen::VectorXd y = pb;
  for (Index j = 0; j < n_; ++j) {
    y[j] /= lx_[lp_[j]];
    for (Index q = lp_[j] + 1; q < lp_[j + 1]; ++q)
      y[li_[q]] -= lx_[q] * y[j];
  }
  return y;
}

Eigen::VectorXd CholeskyFactor::backward(const Eigen::VectorXd &y) const {
  if (dense_)
    return dense_l_.transpose().triangularView<Eigen::Upper>().solve(y);
  Eigen::VectorXd x = y;
  for (Index j = n_ - 1; j >= 0; --j) {
    for (Index q = lp_[j] + 1; q < lp_[j + 1]; ++q)
      x[j] -= lx_[q] * x[li_[q]];
    x[j] /= lx_[lp_[j]];
  }
  return x;
}

Eigen::VectorXd CholeskyFactor::solve(const Eigen::VectorXd &b) const {
  if (b.size() != n_)
    throw ConfigError("Cholesky solve: length mismatch");
  Eigen::VectorXd pb(n_);
  for (Index k = 0; k < n_; ++k)
    pb[k] = b[order_[k]];
  const Eigen::VectorXd px = backward(forward(pb));
  Eigen::VectorXd x(n_);
  for (Index k = 0; k < n_; ++k)
    x[order_[k]] = px[k];
  return x;
}

double CholeskyFactor::inverse_quadratic(const Eigen::VectorXd &b) const {
  if (b.size() != n_)
    throw ConfigError("Cholesky: length mismatch");
  Eigen::VectorXd pb(n_);
  for (Index k = 0; k < n_; ++k)
    pb[k] = b[order_[k]];
  return forward(pb).squaredNorm();
}

BlockPreconditioner BlockPreconditioner::identity(Index dim) {
  BlockPreconditioner p;
  p.dim_ = dim;
  p.identity_ = true;
  return p;
}

BlockPreconditioner BlockPreconditioner::build(const basis::MultiLevelBasis &b,
                                               const kernels::KernelSpec &spec,
                                               const Points &points, int n) {
  BlockPreconditioner p;
  p.identity_ = false;
  p.dim_ = b.rows_through(n);
  const kernels::Kernel kernel(spec);
  for (const auto &blk : b.blocks) {
    if (blk.level < n)
      continue;
    const Index s = blk.support();
    Points x(points.rows(), s);
    for (Index k = 0; k < s; ++k)
      x.col(k) = points.col(b.permutation[blk.begin + k]);
    Eigen::MatrixXd c(s, s);
    for (Index j = 0; j < s; ++j) {
      c(j, j) = kernel.of_distance(0.0);
      for (Index i = j + 1; i < s; ++i)
        c(i, j) = c(j, i) = kernel(x.col(i).data(), x.col(j).data(), x.rows());
    }
    Eigen::MatrixXd g = blk.coeffs.transpose() * c * blk.coeffs;
    g = 0.5 * (g + g.transpose()).eval();
    Block out;
    out.offset = blk.row_offset;
    out.llt.compute(g);
    if (out.llt.info() != Eigen::Success)
      throw NumericalError("preconditioner: cell block is not positive definite");
    p.blocks_.push_back(std::move(out));
  }
  return p;
}

BlockPreconditioner BlockPreconditioner::from_matrix(const assembly::BlockSparseMatrix &m) {
  BlockPreconditioner p;
  p.identity_ = false;
  p.dim_ = m.dim;
  for (const auto &blk : m.blocks) {
    if (blk.a != blk.b)
      continue;
    Block out;
    out.offset = blk.row;
    out.llt.compute(blk.values);
    if (out.llt.info() != Eigen::Success)
      throw NumericalError("preconditioner: cell block is not positive definite");
    p.blocks_.push_back(std::move(out));
  }
  return p;
}

Eigen::VectorXd BlockPreconditioner::apply(const Eigen::VectorXd &r) const {
  if (identity_)
    return r;
  Eigen::VectorXd z(r.size());
  for (const auto &blk : blocks_) {
    const Index k = blk.llt.matrixLLT().rows();
    z.segment(blk.offset, k) = blk.llt.solve(r.segment(blk.offset, k));
  }
  return z;
}

nlohmann::json PcgResult::to_json() const {
  nlohmann::json j;
  j["iterations"] = iterations;
  j["converged"] = converged;
  j["relative_residual"] = relative_residual;
  j["residual_history"] = residual_history;
  nlohmann::json tr = nlohmann::json::array();
  for (const auto &[it, r] : true_residuals)
    tr.push_back({it, r});
  j["true_residuals"] = tr;
  return j;
}

PcgResult pcg_solve(const Operator &a, const BlockPreconditioner &precond,
                    const Eigen::VectorXd &b, double eps, int max_iter) {
  if (!(eps > 0))
    throw ConfigError("pcg: eps must be positive");
  PcgResult res;
  const Index n = b.size();
  res.x = Eigen::VectorXd::Zero(n);
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    res.converged = true;
    return res;
  }
  Eigen::VectorXd r = b;
  Eigen::VectorXd z = precond.apply(r);
  Eigen::VectorXd p = z;
  double rz = r.dot(z);
  for (int it = 1; it <= max_iter; ++it) {
    const Eigen::VectorXd ap = a(p);
    const double pap = p.dot(ap);
    if (!(pap > 0))
      throw NumericalError("pcg: operator is not positive definite");
    const double alpha = rz / pap;
    res.x += alpha * p;
    r -= alpha * ap;
    res.iterations = it;
    const double rel = r.norm() / bnorm;
    res.residual_history.push_back(rel);
    if (rel <= eps || it % 10 == 0) {
      const Eigen::VectorXd rt = b - a(res.x);
      const double trel = rt.norm() / bnorm;
      res.true_residuals.emplace_back(it, trel);
      res.relative_residual = trel;
      if (trel <= eps) {
        res.converged = true;
        return res;
      }
      if (rel <= eps) {
        // The recurrence drifted from the true residual: restart from it.
        r = rt;
        z = precond.apply(r);
        p = z;
        rz = r.dot(z);
        continue;
      }
    }
    z = precond.apply(r);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  throw PcgNotConverged(std::move(res));
}

double power_iteration(const Operator &a, Index dim, int max_iter, double rel_tol,
                       int *iterations) {
  if (dim == 0)
    return 0.0;
  Rng rng(0x9e3779b9);
  Eigen::VectorXd v(dim);
  for (Index k = 0; k < dim; ++k)
    v[k] = rng.normal();
  v.normalize();
  double lambda = 0.0;
  int it = 0;
  for (; it < max_iter; ++it) {
    Eigen::VectorXd w = a(v);
    const double rq = std::abs(v.dot(w));
    const double nw = w.norm();
    if (nw == 0.0)
      return 0.0;
    v = w / nw;
    if (it > 0 && std::abs(rq - lambda) <= rel_tol * rq) {
      lambda = rq;
      ++it;
      break;
    }
    lambda = rq;
  }
  if (iterations)
    *iterations = it;
  return lambda;
}

double lanczos_min(const Operator &a, Index dim, int steps) {
  if (dim == 0)
    return 0.0;
  const int m = static_cast<int>(std::min<Index>(steps, dim));
  Rng rng(0x1a2c20);
  Eigen::MatrixXd q(dim, m + 1);
  Eigen::VectorXd alpha(m), beta(m);
  Eigen::VectorXd v(dim);
  for (Index k = 0; k < dim; ++k)
    v[k] = rng.normal();
  q.col(0) = v / v.norm();
  int used = m;
  for (int j = 0; j < m; ++j) {
    Eigen::VectorXd w = a(q.col(j));
    alpha[j] = q.col(j).dot(w);
    // full reorthogonalization
    w -= q.leftCols(j + 1) * (q.leftCols(j + 1).transpose() * w);
    w -= q.leftCols(j + 1) * (q.leftCols(j + 1).transpose() * w);
    beta[j] = w.norm();
    if (beta[j] < 1e-14 * std::abs(alpha[j]) || beta[j] == 0.0) {
      used = j + 1;
      break;
    }
    q.col(j + 1) = w / beta[j];
  }
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(used, used);
  for (int j = 0; j < used; ++j) {
    t(j, j) = alpha[j];
    if (j + 1 < used)
      t(j, j + 1) = t(j + 1, j) = beta[j];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t, Eigen::EigenvaluesOnly);
  return es.eigenvalues()[0];
}

namespace {

SingularValues extremes(const Operator &a, Index dim,
                        const std::function<CholeskyFactor()> &factorize) {
  SingularValues sv;
  if (dim == 0)
    return sv;
  sv.sigma_max = power_iteration(a, dim, 2000, 1e-10, &sv.iterations_max);
  try {
    const CholeskyFactor f = factorize();
    const Operator inv = [&f](const Eigen::VectorXd &v) { return f.solve(v); };
    const double mu = power_iteration(inv, dim, 2000, 1e-10, &sv.iterations_min);
    sv.sigma_min = 1.0 / mu;
  } catch (const NotSpdError &) {
    sv.sigma_min = std::abs(lanczos_min(a, dim, 100));
    sv.approximate = true;
  }
  return sv;
}

} // namespace

SingularValues extreme_singular_values(const SparseMatrix &a) {
  const Operator op = [&a](const Eigen::VectorXd &v) -> Eigen::VectorXd { return a * v; };
  return extremes(op, a.rows(), [&a] { return CholeskyFactor::factorize(a); });
}

SingularValues extreme_singular_values(const Eigen::MatrixXd &a) {
  const Operator op = [&a](const Eigen::VectorXd &v) -> Eigen::VectorXd { return a * v; };
  return extremes(op, a.rows(), [&a] { return CholeskyFactor::factorize_dense(a); });
}

} // namespace mlkrig::solver
