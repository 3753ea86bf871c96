#pragma once

#include "anyload/fem.hpp"
#include "anyload/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace anyload {

/// Smooth density basis: eigenvectors of the element-adjacency graph
/// Laplacian in the volume inner product, ascending eigenvalues, rows of
/// shell elements zeroed after the eigensolve so those elements ignore the
/// design variables.
struct MaterialBasis {
  Eigen::MatrixXd gamma;        // m x k, shell rows exactly zero
  Eigen::VectorXd eigenvalues;  // nonnegative magnitudes, ascending
  std::vector<int> shell_elements;
  int k() const { return static_cast<int>(gamma.cols()); }
};

/// Computes (or loads from `cache_dir`, keyed by mesh hash and k) the first
/// k modes. The cache stores the unmasked basis; masking is applied on load.
MaterialBasis compute_material_basis(const TetMesh& mesh, const std::vector<int>& shell, int k,
                                     const std::string& cache_dir = "");

/// Decreasing logistic squashing reduced coordinates into (0,1). The
/// inflection point keeps value(0) close to 1 so zeroed shell rows stay
/// solid.
struct LogisticMap {
  double steepness = 5.0;   // squashing sharpness
  double inflection = 2.0;  // value(0) = 1/(1+exp(-steepness*inflection))
  double threshold = 0.5;   // binarization cut

  // Clamped to the open interval so saturated designs never round to an
  // exact 0 or 1 density.
  double value(double x) const {
    const double v = 1.0 / (1.0 + std::exp(steepness * (x - inflection)));
    return std::clamp(v, std::numeric_limits<double>::min(),
                      1.0 - std::numeric_limits<double>::epsilon() / 2);
  }
  double derivative(double x) const {
    const double g = value(x);
    return -steepness * g * (1.0 - g);
  }
};

/// rho = value(gamma * alpha), elementwise; always inside (0,1).
DensityField density_from_alpha(const MaterialBasis& basis, const LogisticMap& logistic,
                                const Eigen::VectorXd& alpha);

/// d rho / d alpha (m x k); shell rows are zero.
Eigen::MatrixXd density_jacobian(const MaterialBasis& basis, const LogisticMap& logistic,
                                 const Eigen::VectorXd& alpha);

/// Thresholds to {0,1}; ties keep material; shell elements forced solid.
DensityField binarize(const DensityField& density, const std::vector<int>& shell,
                      double threshold = 0.5);

}  // namespace anyload
