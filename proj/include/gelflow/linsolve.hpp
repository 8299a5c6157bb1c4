#pragma once

#include <memory>
#include <numeric>
#include <span>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "gelflow/common.hpp"

namespace gelflow {

struct Triplet {
  int row = 0;
  int col = 0;
  double val = 0.0;
};

// Compressed-row sparse matrix. Column indices are sorted per row and
// duplicates have been summed.
struct SparseMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<int> row_ptr;
  std::vector<int> col_idx;
  std::vector<double> vals;

  static SparseMatrix from_triplets(int rows, int cols, std::vector<Triplet> ts) {
    std::sort(ts.begin(), ts.end(), [](const Triplet& a, const Triplet& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    SparseMatrix m;
    m.rows = rows;
    m.cols = cols;
    m.row_ptr.assign(rows + 1, 0);
    for (std::size_t i = 0; i < ts.size();) {
      const auto& t = ts[i];
      if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols)
        throw InvalidParameterError("SparseMatrix: triplet index out of range");
      double sum = 0.0;
      std::size_t j = i;
      while (j < ts.size() && ts[j].row == t.row && ts[j].col == t.col) sum += ts[j++].val;
      m.col_idx.push_back(t.col);
      m.vals.push_back(sum);
      ++m.row_ptr[t.row + 1];
      i = j;
    }
    std::partial_sum(m.row_ptr.begin(), m.row_ptr.end(), m.row_ptr.begin());
    return m;
  }

  std::vector<double> apply(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != cols) throw InvalidParameterError("SparseMatrix::apply: dimension mismatch");
    std::vector<double> y(rows, 0.0);
    for (int r = 0; r < rows; ++r)
      for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k) y[r] += vals[k] * x[col_idx[k]];
    return y;
  }

  double coeff(int r, int c) const {
    for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
      if (col_idx[k] == c) return vals[k];
    return 0.0;
  }

  double norm_inf() const {
    double best = 0.0;
    for (int r = 0; r < rows; ++r) {
      double s = 0.0;
      for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k) s += std::abs(vals[k]);
      best = std::max(best, s);
    }
    return best;
  }

  double norm_max() const {
    double best = 0.0;
    for (double v : vals) best = std::max(best, std::abs(v));
    return best;
  }
};

inline double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double norm_inf_vec(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::abs(x));
  return s;
}

// Direct LU factorization of a square sparse matrix. One factorization serves
// any number of right-hand sides, which is what the time loop relies on.
class SparseFactor {
 public:
  explicit SparseFactor(SparseMatrix matrix) : matrix_(std::move(matrix)) {
    if (matrix_.rows != matrix_.cols) throw InvalidParameterError("SparseFactor: matrix must be square");
    Eigen::SparseMatrix<double> a(matrix_.rows, matrix_.cols);
    std::vector<Eigen::Triplet<double>> ts;
    ts.reserve(matrix_.vals.size());
    for (int r = 0; r < matrix_.rows; ++r)
      for (int k = matrix_.row_ptr[r]; k < matrix_.row_ptr[r + 1]; ++k)
        ts.emplace_back(r, matrix_.col_idx[k], matrix_.vals[k]);
    a.setFromTriplets(ts.begin(), ts.end());
    a.makeCompressed();
    lu_ = std::make_unique<Lu>();
    lu_->analyzePattern(a);
    lu_->factorize(a);
    if (lu_->info() != Eigen::Success)
      throw SingularMatrixError("sparse factorization failed: " + lu_->lastErrorMessage());
  }

  // Solve with one step of iterative refinement.
  std::vector<double> solve(std::span<const double> b) const {
    if (static_cast<int>(b.size()) != matrix_.rows) throw InvalidParameterError("SparseFactor::solve: dimension mismatch");
    Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(b.data(), b.size());
    Eigen::VectorXd x = lu_->solve(rhs);
    std::vector<double> xv(x.data(), x.data() + x.size());
    std::vector<double> r = matrix_.apply(xv);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
    Eigen::VectorXd dx = lu_->solve(Eigen::Map<const Eigen::VectorXd>(r.data(), r.size()));
    for (std::size_t i = 0; i < xv.size(); ++i) xv[i] += dx[i];
    return xv;
  }

  const SparseMatrix& matrix() const { return matrix_; }

 private:
  using Lu = Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>>;
  SparseMatrix matrix_;
  std::unique_ptr<Lu> lu_;
};

inline std::vector<double> solve_sparse(const SparseMatrix& a, std::span<const double> b) {
  return SparseFactor(a).solve(b);
}

// Gaussian elimination with partial pivoting on a dense matrix. Testing
// oracle for small instances; independent of the sparse path above.
inline std::vector<double> dense_oracle(std::vector<std::vector<double>> a, std::vector<double> b) {
  const int n = static_cast<int>(a.size());
  if (static_cast<int>(b.size()) != n) throw InvalidParameterError("dense_oracle: dimension mismatch");
  double scale = 0.0;
  for (const auto& row : a) {
    if (static_cast<int>(row.size()) != n) throw InvalidParameterError("dense_oracle: matrix not square");
    for (double v : row) scale = std::max(scale, std::abs(v));
  }
  for (int p = 0; p < n; ++p) {
    int piv = p;
    for (int r = p + 1; r < n; ++r)
      if (std::abs(a[r][p]) > std::abs(a[piv][p])) piv = r;
    if (std::abs(a[piv][p]) <= 1e-14 * scale)
      throw SingularMatrixError("dense_oracle: zero pivot at column " + std::to_string(p));
    std::swap(a[piv], a[p]);
    std::swap(b[piv], b[p]);
    for (int r = p + 1; r < n; ++r) {
      const double m = a[r][p] / a[p][p];
      if (m == 0.0) continue;
      for (int c = p; c < n; ++c) a[r][c] -= m * a[p][c];
      b[r] -= m * b[p];
    }
  }
  std::vector<double> x(n, 0.0);
  for (int r = n - 1; r >= 0; --r) {
    double s = b[r];
    for (int c = r + 1; c < n; ++c) s -= a[r][c] * x[c];
    x[r] = s / a[r][r];
  }
  return x;
}

// Saddle system: a square core block plus dense constraint rows appended as
// Lagrange-multiplier rows/columns.
struct AugmentedSystem {
  SparseMatrix core;
  std::vector<std::vector<double>> constraint_rows;
  std::vector<double> constraint_rhs;
  std::vector<double> rhs;
};

struct AugmentedSolution {
  std::vector<double> x;
  std::vector<double> multipliers;
};

// Cached factorization of the saddle matrix H = [[core, C^T],[C, 0]] for
// repeated solves. Dense constraint rows would ruin the sparse ordering, so
// the factored matrix uses sparse single-entry surrogate rows and the true
// system is recovered through a rank-2k Woodbury correction. If the surrogate
// matrix turns out singular the solver falls back to factoring H directly.
class AugmentedSolver {
 public:
  AugmentedSolver(const SparseMatrix& core, std::vector<std::vector<double>> constraint_rows)
      : n_(core.rows), k_(static_cast<int>(constraint_rows.size())), rows_(std::move(constraint_rows)) {
    if (core.rows != core.cols) throw InvalidParameterError("AugmentedSolver: core must be square");
    for (const auto& row : rows_)
      if (static_cast<int>(row.size()) != n_) throw InvalidParameterError("AugmentedSolver: constraint row length mismatch");
    check_row_independence();
    if (!try_build_woodbury(core)) build_direct(core);
  }

  AugmentedSolution solve(std::span<const double> rhs, std::span<const double> constraint_rhs) const {
    if (static_cast<int>(rhs.size()) != n_ || static_cast<int>(constraint_rhs.size()) != k_)
      throw InvalidParameterError("AugmentedSolver::solve: dimension mismatch");
    std::vector<double> full(n_ + k_);
    std::copy(rhs.begin(), rhs.end(), full.begin());
    std::copy(constraint_rhs.begin(), constraint_rhs.end(), full.begin() + n_);
    std::vector<double> sol = solve_full(full);
    // one refinement pass against the true saddle matrix
    std::vector<double> res = apply_true(sol);
    for (int i = 0; i < n_ + k_; ++i) res[i] = full[i] - res[i];
    const std::vector<double> corr = solve_full(res);
    for (int i = 0; i < n_ + k_; ++i) sol[i] += corr[i];
    AugmentedSolution out;
    out.x.assign(sol.begin(), sol.begin() + n_);
    out.multipliers.assign(sol.begin() + n_, sol.end());
    return out;
  }

 private:
  bool try_build_woodbury(const SparseMatrix& core) {
    // surrogate row i pins the dof where constraint row i is largest
    std::vector<int> pins;
    for (const auto& row : rows_) {
      std::vector<int> order(n_);
      for (int i = 0; i < n_; ++i) order[i] = i;
      std::nth_element(order.begin(), order.begin(), order.end(),
                       [&](int a, int b) { return std::abs(row[a]) > std::abs(row[b]); });
      std::sort(order.begin(), order.end(), [&](int a, int b) { return std::abs(row[a]) > std::abs(row[b]); });
      int chosen = -1;
      for (int cand : order) {
        if (row[cand] == 0.0) break;
        if (std::find(pins.begin(), pins.end(), cand) == pins.end()) {
          chosen = cand;
          break;
        }
      }
      if (chosen < 0) return false;
      pins.push_back(chosen);
    }
    std::vector<Triplet> ts = core_triplets(core);
    for (int i = 0; i < k_; ++i) {
      ts.push_back({n_ + i, pins[i], 1.0});
      ts.push_back({pins[i], n_ + i, 1.0});
    }
    std::unique_ptr<SparseFactor> factor;
    try {
      factor = std::make_unique<SparseFactor>(SparseMatrix::from_triplets(n_ + k_, n_ + k_, std::move(ts)));
    } catch (const SingularMatrixError&) {
      return false;
    }
    // H = Hhat + P*J + J^T*P^T with J = [C - E | 0] and P the border selector;
    // stack them as U = [P | J^T], V^T = [J ; P^T].
    const int m = n_ + k_;
    std::vector<std::vector<double>> u_cols(2 * k_, std::vector<double>(m, 0.0));
    std::vector<std::vector<double>> v_rows(2 * k_, std::vector<double>(m, 0.0));
    for (int i = 0; i < k_; ++i) {
      u_cols[i][n_ + i] = 1.0;
      v_rows[k_ + i][n_ + i] = 1.0;
      for (int j = 0; j < n_; ++j) {
        double d = rows_[i][j];
        if (j == pins[i]) d -= 1.0;
        u_cols[k_ + i][j] = d;
        v_rows[i][j] = d;
      }
    }
    std::vector<std::vector<double>> w(2 * k_);
    for (int j = 0; j < 2 * k_; ++j) w[j] = factor->solve(u_cols[j]);
    std::vector<std::vector<double>> g(2 * k_, std::vector<double>(2 * k_, 0.0));
    for (int a = 0; a < 2 * k_; ++a)
      for (int b = 0; b < 2 * k_; ++b) {
        double s = (a == b) ? 1.0 : 0.0;
        for (int i = 0; i < m; ++i) s += v_rows[a][i] * w[b][i];
        g[a][b] = s;
      }
    try {
      std::vector<double> probe(2 * k_, 1.0);
      (void)dense_oracle(g, probe);
    } catch (const SingularMatrixError&) {
      return false;
    }
    factor_ = std::move(factor);
    w_ = std::move(w);
    g_ = std::move(g);
    v_rows_ = std::move(v_rows);
    woodbury_ = true;
    return true;
  }

  void build_direct(const SparseMatrix& core) {
    std::vector<Triplet> ts = core_triplets(core);
    for (int c = 0; c < k_; ++c)
      for (int j = 0; j < n_; ++j)
        if (rows_[c][j] != 0.0) {
          ts.push_back({n_ + c, j, rows_[c][j]});
          ts.push_back({j, n_ + c, rows_[c][j]});
        }
    try {
      factor_ = std::make_unique<SparseFactor>(SparseMatrix::from_triplets(n_ + k_, n_ + k_, std::move(ts)));
    } catch (const SingularMatrixError& e) {
      throw RankDeficiencyError(std::string("augmented system is singular: ") + e.what());
    }
    woodbury_ = false;
  }

  std::vector<Triplet> core_triplets(const SparseMatrix& core) const {
    std::vector<Triplet> ts;
    ts.reserve(core.vals.size() + 4 * k_ * k_ + 2 * k_);
    for (int r = 0; r < n_; ++r)
      for (int j = core.row_ptr[r]; j < core.row_ptr[r + 1]; ++j) ts.push_back({r, core.col_idx[j], core.vals[j]});
    return ts;
  }

  // one solve with the factored matrix, plus the Woodbury correction when active
  std::vector<double> solve_full(std::span<const double> b) const {
    std::vector<double> t = factor_->solve(b);
    if (!woodbury_) return t;
    const int m = n_ + k_;
    std::vector<double> s(2 * k_, 0.0);
    for (int a = 0; a < 2 * k_; ++a)
      for (int i = 0; i < m; ++i) s[a] += v_rows_[a][i] * t[i];
    const std::vector<double> y = dense_oracle(g_, s);
    for (int j = 0; j < 2 * k_; ++j)
      for (int i = 0; i < m; ++i) t[i] -= w_[j][i] * y[j];
    return t;
  }

  // y = H x for the true saddle matrix (refinement residuals)
  std::vector<double> apply_true(std::span<const double> x) const {
    std::vector<double> y(n_ + k_, 0.0);
    {
      const SparseMatrix& mat = factor_->matrix();
      for (int r = 0; r < n_; ++r) {
        double s = 0.0;
        for (int j = mat.row_ptr[r]; j < mat.row_ptr[r + 1]; ++j)
          if (mat.col_idx[j] < n_) s += mat.vals[j] * x[mat.col_idx[j]];
        y[r] = s;
      }
    }
    for (int i = 0; i < k_; ++i) {
      double s = 0.0;
      for (int j = 0; j < n_; ++j) {
        s += rows_[i][j] * x[j];
        y[j] += rows_[i][j] * x[n_ + i];
      }
      y[n_ + i] = s;
    }
    return y;
  }
  // Rank of the small Gram matrix C*C^T must equal the number of rows.
  void check_row_independence() const {
    const int k = static_cast<int>(rows_.size());
    if (k == 0) return;
    std::vector<std::vector<double>> gram(k, std::vector<double>(k, 0.0));
    double scale = 0.0;
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) {
        double s = 0.0;
        for (int c = 0; c < n_; ++c) s += rows_[i][c] * rows_[j][c];
        gram[i][j] = s;
        scale = std::max(scale, std::abs(s));
      }
    for (int p = 0; p < k; ++p) {
      int piv = p;
      for (int r = p + 1; r < k; ++r)
        if (std::abs(gram[r][p]) > std::abs(gram[piv][p])) piv = r;
      if (std::abs(gram[piv][p]) <= 1e-12 * scale)
        throw RankDeficiencyError("constraint rows are linearly dependent");
      std::swap(gram[piv], gram[p]);
      for (int r = p + 1; r < k; ++r) {
        const double m = gram[r][p] / gram[p][p];
        for (int c = p; c < k; ++c) gram[r][c] -= m * gram[p][c];
      }
    }
  }

  int n_ = 0;
  int k_ = 0;
  std::vector<std::vector<double>> rows_;
  std::unique_ptr<SparseFactor> factor_;
  bool woodbury_ = false;
  std::vector<std::vector<double>> w_;       // Hhat^{-1} U
  std::vector<std::vector<double>> g_;       // I + V^T Hhat^{-1} U
  std::vector<std::vector<double>> v_rows_;  // rows of V^T
};

inline AugmentedSolution solve_augmented(const AugmentedSystem& sys) {
  AugmentedSolver solver(sys.core, sys.constraint_rows);
  return solver.solve(sys.rhs, sys.constraint_rhs);
}

}  // namespace gelflow
