#pragma once

#include <Eigen/Core>
#include <Eigen/Sparse>

#include <cstdint>
#include <functional>

namespace anyload {

struct EigsOptions {
  double tol = 1e-9;       // relative pencil residual per pair
  int max_subspace = 0;    // 0 = auto; doubled on restart
  int max_restarts = 3;
  std::uint64_t seed = 0x9e3779b97f4a7c15ull;  // Lanczos start vector
};

struct EigsResult {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // dim x k, B-orthonormal, sign-canonicalized
};

/// Smallest k eigenpairs of A x = lambda B x with A symmetric positive
/// semidefinite and B symmetric positive definite. Shift-invert Lanczos with
/// full reorthogonalization in the B-inner product; small problems fall back
/// to a dense solve.
EigsResult smallest_eigenpairs(const Eigen::SparseMatrix<double>& A,
                               const Eigen::VectorXd& B_diagonal, int k,
                               const EigsOptions& opts = {});
EigsResult smallest_eigenpairs(const Eigen::SparseMatrix<double>& A,
                               const Eigen::SparseMatrix<double>& B, int k,
                               const EigsOptions& opts = {});

/// Operator form for reusing an existing factorization: solve_A applies
/// A^{-1} (A must be positive definite), apply_B applies B (SPD).
EigsResult smallest_eigenpairs_op(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& solve_A,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply_B,
    int dim, int k, const EigsOptions& opts = {});

}  // namespace anyload
