#include "anyload/fem.hpp"

#include "anyload/common.hpp"
#include "anyload/eigensolver.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace anyload {

void MaterialModel::validate() const {
  if (!(youngs_modulus > 0)) fail("material: youngs_modulus must be positive");
  if (!(poisson_ratio >= 0 && poisson_ratio < 0.5)) fail("material: poisson_ratio must be in [0, 0.5)");
  if (!(yield_strength > 0)) fail("material: yield_strength must be positive");
  if (!(simp_exponent >= 1)) fail("material: simp_exponent must be >= 1");
  if (!(void_fraction > 0 && void_fraction < 1e-2)) fail("material: void_fraction must be tiny and positive");
}

double simp_scale(double rho, const MaterialModel& material) {
  if (rho < 0.0 || rho > 1.0) {
    warn(cat("density ", rho, " outside [0,1]; clamped"));
    rho = std::clamp(rho, 0.0, 1.0);
  }
  const double eps = material.void_fraction;
  return eps + std::pow(rho, material.simp_exponent) * (1.0 - eps);
}

double simp_scale_derivative(double rho, const MaterialModel& material) {
  rho = std::clamp(rho, 0.0, 1.0);
  const double eps = material.void_fraction;
  return material.simp_exponent * std::pow(rho, material.simp_exponent - 1.0) * (1.0 - eps);
}

ElementData element_solid_stiffness(const TetMesh& mesh, const MaterialModel& material, int e) {
  if (e < 0 || e >= mesh.num_tets()) fail(cat("element_solid_stiffness: element ", e, " out of range"));
  ElementData entry;
  entry.volume = mesh.tet_volumes[e];

  const Vec3 x0 = mesh.nodes.row(mesh.tets(e, 0));
  Eigen::Matrix3d D;
  for (int v = 0; v < 3; ++v) D.col(v) = Vec3(mesh.nodes.row(mesh.tets(e, v + 1))) - x0;
  // Shape-function gradients: nodes 1..3 are the columns of D^{-T}, node 0
  // closes them to zero sum.
  const Eigen::Matrix3d Dinv_t = D.inverse().transpose();
  Eigen::Matrix<double, 3, 4> grad;
  grad.col(1) = Dinv_t.col(0);
  grad.col(2) = Dinv_t.col(1);
  grad.col(3) = Dinv_t.col(2);
  grad.col(0) = -(grad.col(1) + grad.col(2) + grad.col(3));

  entry.B.setZero();
  for (int v = 0; v < 4; ++v) {
    const double gx = grad(0, v), gy = grad(1, v), gz = grad(2, v);
    const int c = 3 * v;
    entry.B(0, c + 0) = gx;
    entry.B(1, c + 1) = gy;
    entry.B(2, c + 2) = gz;
    entry.B(3, c + 0) = gy;
    entry.B(3, c + 1) = gx;
    entry.B(4, c + 1) = gz;
    entry.B(4, c + 2) = gy;
    entry.B(5, c + 0) = gz;
    entry.B(5, c + 2) = gx;
  }

  const double E = material.youngs_modulus, nu = material.poisson_ratio;
  const double lambda = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
  const double mu = E / (2.0 * (1.0 + nu));
  entry.C_solid.setZero();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) entry.C_solid(i, j) = lambda;
    entry.C_solid(i, i) = lambda + 2.0 * mu;
    entry.C_solid(3 + i, 3 + i) = mu;
  }

  entry.K_solid = entry.volume * entry.B.transpose() * entry.C_solid * entry.B;
  return entry;
}

Eigen::Matrix<double, 12, 12> simp_stiffness(const ElementData& entry, double rho,
                                             const MaterialModel& material) {
  return simp_scale(rho, material) * entry.K_solid;
}

ElementDataSet::ElementDataSet(const TetMesh& mesh, const MaterialModel& material)
    : material_(material) {
  material.validate();
  data_.reserve(mesh.num_tets());
  for (int e = 0; e < mesh.num_tets(); ++e) data_.push_back(element_solid_stiffness(mesh, material, e));
}

FemSystem::FemSystem(const TetMesh& mesh, const ElementDataSet& elements,
                     const std::vector<int>& fixed_nodes, DensityField density)
    : mesh_(&mesh), elements_(&elements), fixed_nodes_(fixed_nodes), density_(std::move(density)) {
  if (density_.size() != mesh.num_tets()) fail("fem: density length must equal element count");
  if (elements.size() != mesh.num_tets()) fail("fem: element data does not match mesh");

  const int dofs = 3 * mesh.num_nodes();
  free_index_.assign(dofs, 0);
  for (int node : fixed_nodes_) {
    if (node < 0 || node >= mesh.num_nodes()) fail(cat("fem: fixed node ", node, " out of range"));
    for (int c = 0; c < 3; ++c) free_index_[3 * node + c] = -1;
  }
  num_free_ = 0;
  for (int d = 0; d < dofs; ++d)
    if (free_index_[d] == 0) free_index_[d] = num_free_++;

  const MaterialModel& mat = elements.material();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(mesh.num_tets()) * 78);
  for (int e = 0; e < mesh.num_tets(); ++e) {
    const double scale = simp_scale(density_[e], mat);
    const auto& Ks = elements[e].K_solid;
    int dof[12];
    for (int v = 0; v < 4; ++v)
      for (int c = 0; c < 3; ++c) dof[3 * v + c] = free_index_[3 * mesh.tets(e, v) + c];
    for (int i = 0; i < 12; ++i) {
      if (dof[i] < 0) continue;
      for (int j = 0; j < 12; ++j) {
        if (dof[j] < 0) continue;
        trip.emplace_back(dof[i], dof[j], scale * Ks(i, j));
      }
    }
  }
  Eigen::SparseMatrix<double> K(num_free_, num_free_);
  K.setFromTriplets(trip.begin(), trip.end());
  K.makeCompressed();

  ldlt_.compute(K);
  if (ldlt_.info() != Eigen::Success || (num_free_ > 0 && ldlt_.vectorD().minCoeff() <= 0.0))
    fail("fem: stiffness factorization failed; check that the fixed nodes anchor the structure");
  counters_.factorizations = 1;
}

Eigen::VectorXd FemSystem::solve(const Eigen::VectorXd& f) const {
  if (f.size() != num_dofs()) fail("fem: force vector has wrong length");
  Eigen::VectorXd f_free(num_free_);
  for (int d = 0; d < num_dofs(); ++d)
    if (free_index_[d] >= 0) f_free[free_index_[d]] = f[d];
  const Eigen::VectorXd u_free = ldlt_.solve(f_free);
  ++counters_.back_substitutions;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(num_dofs());
  for (int d = 0; d < num_dofs(); ++d)
    if (free_index_[d] >= 0) u[d] = u_free[free_index_[d]];
  return u;
}

double von_mises(const Eigen::Matrix<double, 6, 1>& s) {
  const double dx = s[0] - s[1], dy = s[1] - s[2], dz = s[2] - s[0];
  const double val = 0.5 * (dx * dx + dy * dy + dz * dz) +
                     3.0 * (s[3] * s[3] + s[4] * s[4] + s[5] * s[5]);
  return std::sqrt(std::max(val, 0.0));
}

StressField recover_stress(const FemSystem& system, const Eigen::VectorXd& u) {
  const TetMesh& mesh = system.mesh();
  const ElementDataSet& elements = system.elements();
  const MaterialModel& mat = elements.material();
  if (u.size() != system.num_dofs()) fail("recover_stress: displacement length mismatch");

  StressField field;
  field.sigma.resize(mesh.num_tets(), 6);
  field.von_mises.resize(mesh.num_tets());
  Eigen::Matrix<double, 12, 1> ue;
  for (int e = 0; e < mesh.num_tets(); ++e) {
    for (int v = 0; v < 4; ++v) ue.segment<3>(3 * v) = u.segment<3>(3 * mesh.tets(e, v));
    const double scale = simp_scale(system.density()[e], mat);
    const Eigen::Matrix<double, 6, 1> s = scale * (elements[e].C_solid * (elements[e].B * ue));
    field.sigma.row(e) = s.transpose();
    field.von_mises[e] = von_mises(s);
  }
  return field;
}

double modal_mass_scale(double rho) {
  constexpr double kCut = 0.1;
  rho = std::clamp(rho, 0.0, 1.0);
  if (rho >= kCut) return rho;
  const double r = rho / kCut;
  return std::max(kCut * r * r * r * r * r * r, 1e-9);
}

ModalResult modal_analysis(const FemSystem& system, int num_modes) {
  if (num_modes < 1) fail("modal_analysis: need num_modes >= 1");
  const TetMesh& mesh = system.mesh();
  const int free = system.num_free_dofs();
  if (free < 1) fail("modal_analysis: no free dofs");
  const int k = std::min(num_modes, free);

  // Lumped mass on free dofs. Below the cutoff the mass decays as rho^6 so it
  // falls much faster than the rho^3 stiffness; otherwise near-void regions
  // turn into heavy floppy blobs whose spurious modes crowd out the real low
  // spectrum once the design hollows.
  Eigen::VectorXd node_mass = Eigen::VectorXd::Zero(mesh.num_nodes());
  for (int e = 0; e < mesh.num_tets(); ++e) {
    const double me = mesh.tet_volumes[e] * modal_mass_scale(system.density()[e]) / 4.0;
    for (int v = 0; v < 4; ++v) node_mass[mesh.tets(e, v)] += me;
  }
  Eigen::VectorXd m_free(free);
  {
    int idx = 0;
    for (int d = 0; d < system.num_dofs(); ++d)
      if (!system.is_fixed_dof(d)) m_free[idx++] = node_mass[d / 3];
  }

  auto solve_k = [&](const Eigen::VectorXd& x) {
    // Expand to full dofs, run the counted solve, gather back.
    Eigen::VectorXd full = Eigen::VectorXd::Zero(system.num_dofs());
    int idx = 0;
    for (int d = 0; d < system.num_dofs(); ++d)
      if (!system.is_fixed_dof(d)) full[d] = x[idx++];
    const Eigen::VectorXd u = system.solve(full);
    Eigen::VectorXd out(free);
    idx = 0;
    for (int d = 0; d < system.num_dofs(); ++d)
      if (!system.is_fixed_dof(d)) out[idx++] = u[d];
    return out;
  };
  auto apply_m = [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(m_free.cwiseProduct(x)); };

  EigsOptions opts;
  opts.tol = 1e-8;
  const EigsResult eig = smallest_eigenpairs_op(solve_k, apply_m, free, k, opts);

  ModalResult result;
  result.eigenvalues = eig.values;
  result.modes = Eigen::MatrixXd::Zero(system.num_dofs(), k);
  for (int j = 0; j < k; ++j) {
    int idx = 0;
    for (int d = 0; d < system.num_dofs(); ++d)
      if (!system.is_fixed_dof(d)) result.modes(d, j) = eig.vectors(idx++, j);
  }
  return result;
}

}  // namespace anyload
