#include "anyload/reduction.hpp"

#include "anyload/common.hpp"
#include "anyload/meshgen.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>

using namespace anyload;
using namespace anyload::testing;

TEST_CASE("material basis eigenstructure") {
  const TetMesh mesh = meshgen::box(Vec3(4, 2, 2), Eigen::Vector3i(8, 4, 4));

  SUBCASE("first mode is constant with a vanishing eigenvalue") {
    const MaterialBasis basis = compute_material_basis(mesh, {}, 1);
    CHECK(std::abs(basis.eigenvalues[0]) <= 1e-10);
    const Eigen::VectorXd mode = basis.gamma.col(0);
    CHECK((mode.array() - mode.mean()).abs().maxCoeff() <= 1e-8 * std::abs(mode.mean()));
  }
  SUBCASE("two-tet mesh matches the dense 2x2 generalized solve") {
    const TetMesh two = two_tets();
    const MaterialBasis basis = compute_material_basis(two, {}, 2);
    // Dense reference: L = [[1,-1],[-1,1]], V = diag(volumes).
    Eigen::Matrix2d L;
    L << 1, -1, -1, 1;
    const Eigen::Matrix2d V = Eigen::Vector2d(two.tet_volumes[0], two.tet_volumes[1]).asDiagonal();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::Matrix2d> ref(L, V);
    for (int j = 0; j < 2; ++j)
      CHECK(basis.eigenvalues[j] == doctest::Approx(ref.eigenvalues()[j]).epsilon(1e-9).scale(1.0));
    // First mode constant, second a volume-weighted opposition.
    CHECK(basis.gamma(0, 0) == doctest::Approx(basis.gamma(1, 0)).epsilon(1e-9));
    CHECK(basis.gamma(0, 1) * basis.gamma(1, 1) < 0.0);
  }
  SUBCASE("V-orthonormal with small eigen-residuals before masking") {
    const MaterialBasis basis = compute_material_basis(mesh, {}, 6);
    const GraphLaplacian lap = build_laplacian(LaplacianKind::Elements, mesh);
    const Eigen::VectorXd& V = mesh.tet_volumes;
    for (int i = 0; i < 6; ++i) {
      for (int j = 0; j <= i; ++j) {
        const double dot = basis.gamma.col(i).dot(V.cwiseProduct(basis.gamma.col(j)));
        CHECK(dot == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-8).scale(1.0));
      }
      const Eigen::VectorXd resid = lap.matrix * basis.gamma.col(i) -
                                    basis.eigenvalues[i] * V.cwiseProduct(basis.gamma.col(i));
      CHECK(resid.norm() <= 1e-6 * basis.gamma.col(i).norm() *
                                std::max(1.0, std::abs(basis.eigenvalues[i])));
    }
  }
  SUBCASE("shell rows are exactly zero after masking") {
    const auto shell = tag_shell_elements(mesh, 0.4);
    const MaterialBasis basis = compute_material_basis(mesh, shell, 4);
    for (int e : shell) CHECK(basis.gamma.row(e).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("basis disk cache round-trips and rejects stale entries") {
  const TetMesh mesh = meshgen::box(Vec3(3, 1, 1), Eigen::Vector3i(6, 2, 2));
  const std::string dir = temp_dir() + "/basis_cache";
  std::filesystem::remove_all(dir);

  const MaterialBasis fresh = compute_material_basis(mesh, {}, 3, dir);
  REQUIRE(std::filesystem::exists(dir));
  const MaterialBasis cached = compute_material_basis(mesh, {}, 3, dir);
  CHECK((fresh.gamma - cached.gamma).cwiseAbs().maxCoeff() == 0.0);
  CHECK((fresh.eigenvalues - cached.eigenvalues).cwiseAbs().maxCoeff() == 0.0);

  // A different mesh must not reuse the entry.
  const TetMesh other = meshgen::box(Vec3(3, 1, 1.01), Eigen::Vector3i(6, 2, 2));
  const MaterialBasis separate = compute_material_basis(other, {}, 3, dir);
  CHECK(separate.gamma.rows() == other.num_tets());
}

TEST_CASE("logistic density map") {
  const TetMesh mesh = meshgen::box(Vec3(2, 1, 1), Eigen::Vector3i(4, 2, 2));
  const auto shell = tag_shell_elements(mesh, 0.3);
  const MaterialBasis basis = compute_material_basis(mesh, shell, 4);
  const LogisticMap logistic;

  SUBCASE("value at zero is nearly one") {
    CHECK(logistic.value(0.0) == doctest::Approx(1.0 / (1.0 + std::exp(-10.0))).epsilon(1e-12));
    CHECK(logistic.value(0.0) >= 0.99);
  }
  SUBCASE("zero design gives a uniformly solid start") {
    const DensityField rho = density_from_alpha(basis, logistic, Eigen::VectorXd::Zero(4));
    CHECK((rho.array() - logistic.value(0.0)).abs().maxCoeff() == 0.0);
  }
  SUBCASE("large design along the constant mode empties the interior only") {
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(4);
    // Column 0 is constant over non-shell rows; push far into the void tail.
    const double entry = basis.gamma.col(0).cwiseAbs().maxCoeff();
    alpha[0] = (basis.gamma.col(0).sum() > 0 ? 1.0 : -1.0) * 1e3 / entry;
    const DensityField rho = density_from_alpha(basis, logistic, alpha);
    std::vector<char> is_shell(mesh.num_tets(), 0);
    for (int e : shell) is_shell[e] = 1;
    for (int e = 0; e < mesh.num_tets(); ++e) {
      if (is_shell[e])
        CHECK(rho[e] == logistic.value(0.0));
      else
        CHECK(rho[e] <= 1e-6);
    }
  }
  SUBCASE("densities stay strictly inside (0,1) for wild designs") {
    auto gen = rng(9);
    std::uniform_real_distribution<double> unif(-50.0, 50.0);
    for (int trial = 0; trial < 1000; ++trial) {
      Eigen::VectorXd alpha(4);
      for (int j = 0; j < 4; ++j) alpha[j] = unif(gen);
      const DensityField rho = density_from_alpha(basis, logistic, alpha);
      CHECK(rho.minCoeff() > 0.0);
      CHECK(rho.maxCoeff() < 1.0);
    }
  }
}

TEST_CASE("density jacobian") {
  const TetMesh mesh = meshgen::box(Vec3(2, 1, 1), Eigen::Vector3i(4, 2, 2));
  const auto shell = tag_shell_elements(mesh, 0.3);
  const MaterialBasis basis = compute_material_basis(mesh, shell, 4);
  const LogisticMap logistic;
  auto gen = rng(21);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);

  SUBCASE("matches central differences") {
    for (int trial = 0; trial < 3; ++trial) {
      Eigen::VectorXd alpha(4);
      const double amp = 1.0 / basis.gamma.cwiseAbs().maxCoeff();
      for (int j = 0; j < 4; ++j) alpha[j] = amp * unif(gen);
      const Eigen::MatrixXd jac = density_jacobian(basis, logistic, alpha);
      const double h = 1e-5 * amp;
      for (int j = 0; j < 4; ++j) {
        Eigen::VectorXd ap = alpha, am = alpha;
        ap[j] += h;
        am[j] -= h;
        const Eigen::VectorXd fd =
            (density_from_alpha(basis, logistic, ap) - density_from_alpha(basis, logistic, am)) /
            (2 * h);
        const double scale = std::max(jac.col(j).cwiseAbs().maxCoeff(), 1e-12);
        CHECK((jac.col(j) - fd).cwiseAbs().maxCoeff() <= 1e-6 * scale);
      }
    }
  }
  SUBCASE("shell rows vanish; saturated rows nearly vanish") {
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(4);
    const Eigen::MatrixXd jac = density_jacobian(basis, logistic, alpha);
    for (int e : shell) CHECK(jac.row(e).cwiseAbs().maxCoeff() == 0.0);
    // At alpha = 0 every element sits deep in the logistic tail.
    CHECK(jac.cwiseAbs().maxCoeff() <= 5 * logistic.steepness * logistic.value(0.0) *
                                           (1.0 - logistic.value(0.0)) *
                                           basis.gamma.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("binarization") {
  const std::vector<int> shell{2};
  DensityField rho(5);
  rho << 0.49, 0.51, 0.1, 0.5, 1.0;
  const DensityField bin = binarize(rho, shell);
  CHECK(bin[0] == 0.0);
  CHECK(bin[1] == 1.0);
  CHECK(bin[2] == 1.0);  // shell forced solid
  CHECK(bin[3] == 1.0);  // exact threshold keeps material
  CHECK(bin[4] == 1.0);

  const DensityField again = binarize(bin, shell);
  CHECK((again - bin).cwiseAbs().maxCoeff() == 0.0);

  DensityField bad(2);
  bad << -0.1, 0.5;
  CHECK_THROWS_AS(binarize(bad, {}), Error);
}
