#include "anyload/reduction.hpp"

#include "anyload/common.hpp"
#include "anyload/eigensolver.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

namespace anyload {

namespace {

std::string cache_file(const std::string& dir, const TetMesh& mesh, int k) {
  return dir + "/material_basis_" + mesh.hash + "_k" + std::to_string(k) + ".txt";
}

bool load_cached_basis(const std::string& path, const TetMesh& mesh, int k,
                       Eigen::MatrixXd& gamma, Eigen::VectorXd& values) {
  std::ifstream in(path);
  if (!in) return false;
  std::string tag, hash;
  int kk = 0, m = 0;
  in >> tag >> hash >> kk >> m;
  if (tag != "anyload_material_basis" || hash != mesh.hash || kk != k || m != mesh.num_tets())
    return false;
  values.resize(k);
  for (int j = 0; j < k; ++j) in >> values[j];
  gamma.resize(m, k);
  for (int e = 0; e < m; ++e)
    for (int j = 0; j < k; ++j) in >> gamma(e, j);
  return static_cast<bool>(in);
}

void store_cached_basis(const std::string& path, const TetMesh& mesh, int k,
                        const Eigen::MatrixXd& gamma, const Eigen::VectorXd& values) {
  std::ofstream out(path);
  if (!out) {
    warn(cat("could not write basis cache ", path));
    return;
  }
  out.precision(17);
  out << "anyload_material_basis " << mesh.hash << " " << k << " " << mesh.num_tets() << "\n";
  for (int j = 0; j < k; ++j) out << values[j] << (j + 1 == k ? "\n" : " ");
  for (int e = 0; e < mesh.num_tets(); ++e) {
    for (int j = 0; j < k; ++j) out << gamma(e, j) << (j + 1 == k ? "\n" : " ");
  }
}

}  // namespace

MaterialBasis compute_material_basis(const TetMesh& mesh, const std::vector<int>& shell, int k,
                                     const std::string& cache_dir) {
  const int m = mesh.num_tets();
  if (k < 1 || k > m) fail(cat("compute_material_basis: k=", k, " outside [1,", m, "]"));

  MaterialBasis basis;
  basis.shell_elements = shell;

  bool loaded = false;
  std::string path;
  if (!cache_dir.empty()) {
    std::filesystem::create_directories(cache_dir);
    path = cache_file(cache_dir, mesh, k);
    loaded = load_cached_basis(path, mesh, k, basis.gamma, basis.eigenvalues);
  }
  if (!loaded) {
    const GraphLaplacian lap = build_laplacian(LaplacianKind::Elements, mesh);
    const EigsResult eig = smallest_eigenpairs(lap.matrix, mesh.tet_volumes, k, EigsOptions{});
    basis.gamma = eig.vectors;
    basis.eigenvalues = eig.values;
    if (!cache_dir.empty()) store_cached_basis(path, mesh, k, basis.gamma, basis.eigenvalues);
  }

  for (int e : shell) {
    if (e < 0 || e >= m) fail(cat("compute_material_basis: shell element ", e, " out of range"));
    basis.gamma.row(e).setZero();
  }
  return basis;
}

DensityField density_from_alpha(const MaterialBasis& basis, const LogisticMap& logistic,
                                const Eigen::VectorXd& alpha) {
  if (alpha.size() != basis.k()) fail("density_from_alpha: alpha length mismatch");
  const Eigen::VectorXd x = basis.gamma * alpha;
  DensityField rho(x.size());
  for (int e = 0; e < x.size(); ++e) rho[e] = logistic.value(x[e]);
  return rho;
}

Eigen::MatrixXd density_jacobian(const MaterialBasis& basis, const LogisticMap& logistic,
                                 const Eigen::VectorXd& alpha) {
  if (alpha.size() != basis.k()) fail("density_jacobian: alpha length mismatch");
  const Eigen::VectorXd x = basis.gamma * alpha;
  Eigen::MatrixXd jac = basis.gamma;
  for (int e = 0; e < x.size(); ++e) jac.row(e) *= logistic.derivative(x[e]);
  return jac;
}

DensityField binarize(const DensityField& density, const std::vector<int>& shell,
                      double threshold) {
  DensityField out(density.size());
  for (int e = 0; e < density.size(); ++e) {
    if (density[e] < 0.0 || density[e] > 1.0) fail("binarize: density outside [0,1]");
    out[e] = density[e] >= threshold ? 1.0 : 0.0;
  }
  for (int e : shell) out[e] = 1.0;
  return out;
}

}  // namespace anyload
