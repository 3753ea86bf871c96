#pragma once

#include "anyload/mesh.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <vector>

namespace anyload {

/// Per-element density in [0,1]; the physical design state.
using DensityField = Eigen::VectorXd;

/// Linear isotropic material plus the density interpolation constants.
struct MaterialModel {
  double youngs_modulus = 2100.0;  // MPa
  double poisson_ratio = 0.3;
  double yield_strength = 50.0;    // MPa
  double simp_exponent = 3.0;      // penalization of intermediate densities
  double void_fraction = 1e-8;     // stiffness floor for empty elements
  void validate() const;
};

/// Density-to-stiffness scale: void_fraction + rho^beta (1 - void_fraction).
/// Values outside [0,1] are clamped with a warning.
double simp_scale(double rho, const MaterialModel& material);
double simp_scale_derivative(double rho, const MaterialModel& material);

/// Rest-shape quantities of one linear tet. The strain-displacement matrix
/// uses Voigt order (xx, yy, zz, xy, yz, zx) with engineering shear strains.
struct ElementData {
  Eigen::Matrix<double, 6, 12> B;
  Eigen::Matrix<double, 12, 12> K_solid;  // volume * B^T C_solid B
  Eigen::Matrix<double, 6, 6> C_solid;
  double volume = 0.0;
};

ElementData element_solid_stiffness(const TetMesh& mesh, const MaterialModel& material, int e);

/// K_e at the given density.
Eigen::Matrix<double, 12, 12> simp_stiffness(const ElementData& entry, double rho,
                                             const MaterialModel& material);

/// Precomputed ElementData for every tet; shared by assembly, stress
/// recovery, and sensitivities.
class ElementDataSet {
 public:
  ElementDataSet(const TetMesh& mesh, const MaterialModel& material);
  const ElementData& operator[](int e) const { return data_[e]; }
  int size() const { return static_cast<int>(data_.size()); }
  const MaterialModel& material() const { return material_; }

 private:
  std::vector<ElementData> data_;
  MaterialModel material_;
};

struct SolveCounters {
  long factorizations = 0;
  long back_substitutions = 0;
};

/// Assembled and factorized stiffness for one density field. Fixed nodes are
/// removed symmetrically before factorization, so the reduced matrix stays
/// positive definite. Immutable after construction; solves are const and may
/// run concurrently.
class FemSystem {
 public:
  FemSystem(const TetMesh& mesh, const ElementDataSet& elements,
            const std::vector<int>& fixed_nodes, DensityField density);

  /// Solves K u = f. Takes and returns full 3n vectors; entries at fixed
  /// dofs are ignored on input and zero on output.
  Eigen::VectorXd solve(const Eigen::VectorXd& f) const;

  int num_dofs() const { return 3 * mesh_->num_nodes(); }
  int num_free_dofs() const { return num_free_; }
  bool is_fixed_dof(int dof) const { return free_index_[dof] < 0; }
  const DensityField& density() const { return density_; }
  const TetMesh& mesh() const { return *mesh_; }
  const ElementDataSet& elements() const { return *elements_; }
  const std::vector<int>& fixed_nodes() const { return fixed_nodes_; }
  const SolveCounters& counters() const { return counters_; }

 private:
  const TetMesh* mesh_;
  const ElementDataSet* elements_;
  std::vector<int> fixed_nodes_;
  DensityField density_;
  std::vector<int> free_index_;  // dof -> reduced index, -1 if fixed
  int num_free_ = 0;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
  mutable SolveCounters counters_;
};

/// Constant per-element stress, Voigt order as above, plus von Mises.
struct StressField {
  Eigen::Matrix<double, Eigen::Dynamic, 6> sigma;  // MPa
  Eigen::VectorXd von_mises;                       // MPa
};

StressField recover_stress(const FemSystem& system, const Eigen::VectorXd& u);

double von_mises(const Eigen::Matrix<double, 6, 1>& sigma);

struct ModalResult {
  Eigen::VectorXd eigenvalues;  // magnitudes, ascending
  Eigen::MatrixXd modes;        // 3n x num_modes, zero at fixed dofs, M-orthonormal
};

/// Density-to-mass weight for modal analysis: linear above 0.1, then a rho^6
/// continuation so near-void mass vanishes faster than the rho^3 stiffness
/// and voids cannot inject spurious low modes.
double modal_mass_scale(double rho);

/// Low vibration modes of the current structure. Mass is lumped per element
/// (equal split to the four nodes) and weighted by modal_mass_scale. Reuses
/// the system's stiffness factorization.
ModalResult modal_analysis(const FemSystem& system, int num_modes);

}  // namespace anyload
