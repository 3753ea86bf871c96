#include "anyload/eigensolver.hpp"

#include "anyload/common.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace anyload {

namespace {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Op = std::function<Vec(const Vec&)>;

void canonicalize_signs(Mat& vectors) {
  for (int c = 0; c < vectors.cols(); ++c) {
    int idx = 0;
    vectors.col(c).cwiseAbs().maxCoeff(&idx);
    if (vectors(idx, c) < 0) vectors.col(c) = -vectors.col(c);
  }
}

// Lanczos on C = solve_shifted(B x), self-adjoint in the B-inner product.
// Returns false if the first k pairs did not meet tol within the subspace.
bool lanczos_pass(const Op& solve_shifted, const Op& apply_B, int dim, int k, int m_max,
                  double tol, std::uint64_t seed, double shift, Vec& values, Mat& vectors) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);

  Mat V(dim, m_max);      // B-orthonormal Lanczos basis
  Mat BV(dim, m_max);     // B * V, cached for reorthogonalization
  std::vector<double> alpha, beta;  // tridiagonal entries

  Vec v(dim);
  for (int i = 0; i < dim; ++i) v[i] = unif(rng);
  Vec bv = apply_B(v);
  double nrm = std::sqrt(v.dot(bv));
  if (!(nrm > 0)) fail("eigensolver: start vector has zero B-norm");
  v /= nrm;
  V.col(0) = v;
  BV.col(0) = apply_B(v);

  int m = 0;
  for (; m < m_max; ++m) {
    Vec w = solve_shifted(BV.col(m));
    const double a = w.dot(BV.col(m));
    alpha.push_back(a);
    w -= a * V.col(m);
    if (m > 0) w -= beta[m - 1] * V.col(m - 1);
    // Full reorthogonalization, two sweeps.
    for (int sweep = 0; sweep < 2; ++sweep)
      for (int i = 0; i <= m; ++i) w -= (w.dot(BV.col(i))) * V.col(i);

    if (m + 1 == m_max) break;
    Vec bw = apply_B(w);
    double b = std::sqrt(std::max(w.dot(bw), 0.0));
    if (b < 1e-13 * std::abs(alpha[0] + 1.0)) {
      // Invariant subspace hit; restart direction B-orthogonal to the basis.
      for (int i = 0; i < dim; ++i) w[i] = unif(rng);
      for (int sweep = 0; sweep < 2; ++sweep)
        for (int i = 0; i <= m; ++i) w -= (w.dot(BV.col(i))) * V.col(i);
      bw = apply_B(w);
      b = std::sqrt(std::max(w.dot(bw), 0.0));
      if (!(b > 0)) break;  // space exhausted
      beta.push_back(0.0);
    } else {
      beta.push_back(b);
    }
    V.col(m + 1) = w / b;
    BV.col(m + 1) = apply_B(V.col(m + 1));
  }
  const int steps = static_cast<int>(alpha.size());
  if (steps < k) return false;

  Mat T = Mat::Zero(steps, steps);
  for (int i = 0; i < steps; ++i) {
    T(i, i) = alpha[i];
    if (i + 1 < steps && i < static_cast<int>(beta.size())) {
      T(i, i + 1) = beta[i];
      T(i + 1, i) = beta[i];
    }
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(T);
  if (es.info() != Eigen::Success) return false;

  // Largest Ritz values of the shift-inverted operator map to the smallest
  // pencil eigenvalues: lambda = 1/theta - shift.
  values.resize(k);
  vectors.resize(dim, k);
  for (int i = 0; i < k; ++i) {
    const int col = steps - 1 - i;
    const double theta = es.eigenvalues()[col];
    if (!(theta > 0)) return false;  // shifted pencil must be PD
    values[i] = 1.0 / theta - shift;
    vectors.col(i) = V.leftCols(steps) * es.eigenvectors().col(col);
  }
  // Convergence estimate from the tridiagonal residual. A subspace equal to
  // the full dimension is exact up to roundoff, so only require the loose
  // bound there.
  const double last_beta = beta.empty() ? 0.0 : std::abs(beta.back());
  const double bound = (steps >= dim) ? std::sqrt(tol) : tol;
  for (int i = 0; i < k; ++i) {
    const int col = steps - 1 - i;
    const double resid = last_beta * std::abs(es.eigenvectors()(steps - 1, col));
    if (resid > bound * std::max(std::abs(es.eigenvalues()[col]), 1e-30)) return false;
  }
  return true;
}

EigsResult lanczos_driver(const Op& solve_shifted, const Op& apply_B, int dim, int k,
                          double shift, const EigsOptions& opts) {
  if (k < 1) fail("eigensolver: need k >= 1");
  if (k > dim) fail(cat("eigensolver: k=", k, " exceeds problem dimension ", dim));
  int m_max = opts.max_subspace > 0 ? opts.max_subspace
                                    : std::min(dim, std::max(4 * k + 20, 50));
  EigsResult result;
  for (int attempt = 0; attempt <= opts.max_restarts; ++attempt) {
    Vec values;
    Mat vectors;
    if (lanczos_pass(solve_shifted, apply_B, dim, k, m_max, opts.tol, opts.seed + attempt,
                     shift, values, vectors)) {
      // Re-sort ascending (Ritz ordering already is, but keep it explicit).
      std::vector<int> order(k);
      for (int i = 0; i < k; ++i) order[i] = i;
      std::sort(order.begin(), order.end(), [&](int a, int b) { return values[a] < values[b]; });
      result.values.resize(k);
      result.vectors.resize(dim, k);
      for (int i = 0; i < k; ++i) {
        result.values[i] = values[order[i]];
        result.vectors.col(i) = vectors.col(order[i]);
      }
      canonicalize_signs(result.vectors);
      return result;
    }
    if (m_max >= dim) break;
    m_max = std::min(dim, 2 * m_max);
  }
  fail("eigensolver: Lanczos did not converge (subspace exhausted)");
}

EigsResult dense_fallback(const Mat& A, const Mat& B, int k) {
  if (k < 1 || k > A.rows()) fail(cat("eigensolver: k=", k, " outside [1,", A.rows(), "]"));
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(A, B);
  if (es.info() != Eigen::Success) fail("eigensolver: dense generalized solve failed");
  EigsResult result;
  result.values = es.eigenvalues().head(k);
  result.vectors = es.eigenvectors().leftCols(k);
  canonicalize_signs(result.vectors);
  return result;
}

double scale_shift(const Eigen::SparseMatrix<double>& A, const Vec& b_diag_sum, int dim) {
  double trace_a = 0.0;
  for (int i = 0; i < A.outerSize(); ++i)
    trace_a += A.coeff(i, i);
  const double mean_a = trace_a / dim;
  const double mean_b = b_diag_sum.sum() / dim;
  return 1e-6 * std::max(mean_a, 1e-300) / std::max(mean_b, 1e-300);
}

}  // namespace

EigsResult smallest_eigenpairs(const Eigen::SparseMatrix<double>& A, const Vec& B_diagonal,
                               int k, const EigsOptions& opts) {
  const int dim = static_cast<int>(A.rows());
  if (B_diagonal.size() != dim) fail("eigensolver: B diagonal size mismatch");
  if ((B_diagonal.array() <= 0).any()) fail("eigensolver: B must be positive definite");
  if (dim <= 200) {
    Mat Ad = Mat(A);
    Mat Bd = B_diagonal.asDiagonal();
    return dense_fallback(Ad, Bd, k);
  }
  const double shift = scale_shift(A, B_diagonal, dim);
  Eigen::SparseMatrix<double> shifted = A;
  for (int i = 0; i < dim; ++i) shifted.coeffRef(i, i) += shift * B_diagonal[i];
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(shifted);
  if (ldlt.info() != Eigen::Success) fail("eigensolver: shifted factorization failed");
  auto solve = [&](const Vec& x) { return Vec(ldlt.solve(x)); };
  auto apply_b = [&](const Vec& x) { return Vec(B_diagonal.cwiseProduct(x)); };
  return lanczos_driver(solve, apply_b, dim, k, shift, opts);
}

EigsResult smallest_eigenpairs(const Eigen::SparseMatrix<double>& A,
                               const Eigen::SparseMatrix<double>& B, int k,
                               const EigsOptions& opts) {
  const int dim = static_cast<int>(A.rows());
  if (B.rows() != dim || B.cols() != dim) fail("eigensolver: B size mismatch");
  if (dim <= 200) return dense_fallback(Mat(A), Mat(B), k);
  Vec b_diag(dim);
  for (int i = 0; i < dim; ++i) b_diag[i] = B.coeff(i, i);
  const double shift = scale_shift(A, b_diag, dim);
  Eigen::SparseMatrix<double> shifted = A + shift * B;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(shifted);
  if (ldlt.info() != Eigen::Success) fail("eigensolver: shifted factorization failed");
  auto solve = [&](const Vec& x) { return Vec(ldlt.solve(x)); };
  auto apply_b = [&](const Vec& x) { return Vec(B * x); };
  return lanczos_driver(solve, apply_b, dim, k, shift, opts);
}

EigsResult smallest_eigenpairs_op(const Op& solve_A, const Op& apply_B, int dim, int k,
                                  const EigsOptions& opts) {
  return lanczos_driver(solve_A, apply_B, dim, k, 0.0, opts);
}

}  // namespace anyload
