#include "anyload/loadcase.hpp"

#include "anyload/common.hpp"
#include "anyload/fem.hpp"
#include "anyload/meshgen.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

#include <Eigen/Geometry>

#include <cmath>
#include <map>

using namespace anyload;
using namespace anyload::testing;

namespace {

// Monte-Carlo estimate of |triangle ∩ ball| by uniform sampling in the triangle.
double mc_triangle_ball_area(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& center,
                             double radius, std::mt19937_64& gen, int samples = 400000) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double area = 0.5 * (b - a).cross(c - a).norm();
  int inside = 0;
  for (int s = 0; s < samples; ++s) {
    double u = unif(gen), v = unif(gen);
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    const Vec3 p = a + u * (b - a) + v * (c - a);
    if ((p - center).norm() <= radius) ++inside;
  }
  return area * inside / samples;
}

}  // namespace

TEST_CASE("triangle-ball intersection area") {
  auto gen = rng(2024);

  SUBCASE("triangle entirely inside the ball") {
    const Vec3 a(0, 0, 0), b(1, 0, 0), c(0, 1, 0);
    CHECK(triangle_ball_area(a, b, c, Vec3(0.3, 0.3, 0), 10.0) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("ball far away") {
    const Vec3 a(0, 0, 0), b(1, 0, 0), c(0, 1, 0);
    CHECK(triangle_ball_area(a, b, c, Vec3(5, 5, 5), 1.0) == 0.0);
  }
  SUBCASE("small ball at a right-angle vertex cuts a quarter disk") {
    const Vec3 a(0, 0, 0), b(4, 0, 0), c(0, 4, 0);
    const double r = 0.5;
    CHECK(triangle_ball_area(a, b, c, a, r) == doctest::Approx(0.25 * M_PI * r * r).epsilon(1e-9));
  }
  SUBCASE("ball centered above the plane shrinks the disk radius") {
    const Vec3 a(-5, -5, 0), b(5, -5, 0), c(0, 8, 0);
    const double r = 1.0, h = 0.6;
    const double expected = M_PI * (r * r - h * h);
    CHECK(triangle_ball_area(a, b, c, Vec3(0, 0, h), r) == doctest::Approx(expected).epsilon(1e-9));
  }
  SUBCASE("random cases match Monte Carlo") {
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
      const Vec3 a(unif(gen), unif(gen), unif(gen));
      const Vec3 b(unif(gen), unif(gen), unif(gen));
      const Vec3 c(unif(gen), unif(gen), unif(gen));
      if ((b - a).cross(c - a).norm() < 0.2) continue;
      const Vec3 center(unif(gen), unif(gen), unif(gen));
      const double r = 0.3 + 0.7 * std::abs(unif(gen));
      const double exact = triangle_ball_area(a, b, c, center, r);
      const double mc = mc_triangle_ball_area(a, b, c, center, r, gen);
      CHECK(exact == doctest::Approx(mc).epsilon(0.02).scale(0.01));
    }
  }
}

TEST_CASE("force instants") {
  const TetMesh mesh = meshgen::box(Vec3(6, 6, 2), Eigen::Vector3i(12, 12, 4));
  auto gen = rng(7);

  SUBCASE("magnitudes sum to the budget on random nodes") {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
      const int node =
          mesh.surface_nodes[static_cast<std::size_t>(unif(gen) * mesh.num_surface_nodes())];
      const double P = 0.5 + 30.0 * unif(gen);
      const double r = (0.5 + 2.5 * unif(gen)) * mesh.mean_surface_edge;
      const ForceInstant instant = build_force_instant(mesh, node, P, r);
      CHECK(instant.total_magnitude() == doctest::Approx(P).epsilon(1e-9));
    }
  }
  SUBCASE("flat interior patch area approaches pi r^2") {
    // Center node of the top face; radius inside the flat region.
    int node = -1;
    for (int cand : mesh.surface_nodes) {
      const Vec3 p = mesh.nodes.row(cand);
      if (std::abs(p[0] - 3.0) < 1e-9 && std::abs(p[1] - 3.0) < 1e-9 && std::abs(p[2] - 2.0) < 1e-9)
        node = cand;
    }
    REQUIRE(node >= 0);
    const double r = 1.2;
    const ForceInstant instant = build_force_instant(mesh, node, 5.0, r);
    CHECK(instant.patch_area == doctest::Approx(M_PI * r * r).epsilon(0.02));
    CHECK(!instant.one_ring_fallback);
  }
  SUBCASE("forces are compressive along the contact normal") {
    for (int node : {mesh.surface_nodes[0], mesh.surface_nodes[10], mesh.surface_nodes[40]}) {
      const ForceInstant instant = build_force_instant(mesh, node, 3.0, mesh.mean_surface_edge);
      const Vec3 n = mesh.node_normals.row(mesh.surface_ordinal[node]);
      for (const auto& [j, p] : instant.nodal_forces) CHECK(p.dot(n) <= 0.0);
    }
  }
  SUBCASE("tiny radius falls back to one-ring weighting, still conservative") {
    const int node = mesh.surface_nodes[0];
    const ForceInstant instant = build_force_instant(mesh, node, 2.0, 1e-4);
    CHECK(instant.one_ring_fallback);
    CHECK(instant.total_magnitude() == doctest::Approx(2.0).epsilon(1e-9));
  }
  SUBCASE("zero budget is allowed and produces zero forces") {
    const ForceInstant instant =
        build_force_instant(mesh, mesh.surface_nodes[5], 0.0, mesh.mean_surface_edge);
    CHECK(instant.total_magnitude() == 0.0);
  }
}

TEST_CASE("rhs assembly and magnitude rows") {
  const TetMesh mesh = meshgen::box(Vec3(4, 2, 1), Eigen::Vector3i(8, 4, 2));
  const int a = mesh.surface_nodes[3];
  int b = -1;  // pick a node far from a so supports are disjoint
  for (int cand : mesh.surface_nodes)
    if ((mesh.nodes.row(cand) - mesh.nodes.row(a)).norm() > 3.0) b = cand;
  REQUIRE(b >= 0);
  const ForceInstant ia = build_force_instant(mesh, a, 2.0, mesh.mean_surface_edge);
  const ForceInstant ib = build_force_instant(mesh, b, 3.0, mesh.mean_surface_edge);

  SUBCASE("empty instant gives the zero vector") {
    ForceInstant empty;
    CHECK(assemble_rhs(empty, mesh).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("instants at distinct nodes add componentwise") {
    const Eigen::VectorXd fa = assemble_rhs(ia, mesh);
    const Eigen::VectorXd fb = assemble_rhs(ib, mesh);
    Eigen::VectorXd sum = fa + fb;
    ForceInstant both = ia;
    both.nodal_forces.insert(both.nodal_forces.end(), ib.nodal_forces.begin(),
                             ib.nodal_forces.end());
    const Eigen::VectorXd fboth = assemble_rhs(both, mesh);
    CHECK((fboth - sum).cwiseAbs().maxCoeff() <= 1e-15 * sum.cwiseAbs().maxCoeff());
  }
  SUBCASE("magnitude row sums to the budget") {
    CHECK(magnitude_row(ia, mesh).sum() == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(magnitude_row(ib, mesh).sum() == doctest::Approx(3.0).epsilon(1e-12));
  }
}

TEST_CASE("rigid rotation equivariance") {
  const TetMesh mesh = meshgen::box(Vec3(3, 2, 1), Eigen::Vector3i(6, 4, 2));
  const int node = mesh.surface_nodes[7];
  const double P = 4.0, r = 1.5 * mesh.mean_surface_edge;
  const ForceInstant base = build_force_instant(mesh, node, P, r);

  const Eigen::Matrix3d R =
      Eigen::AngleAxisd(0.83, Vec3(1, 2, 0.5).normalized()).toRotationMatrix();
  Eigen::Matrix<double, Eigen::Dynamic, 3> rotated = (mesh.nodes * R.transpose()).eval();
  rotated.rowwise() += Eigen::RowVector3d(5, -2, 1);
  const TetMesh mesh_rot = make_tet_mesh(std::move(rotated), mesh.tets);
  const ForceInstant rot = build_force_instant(mesh_rot, node, P, r);

  // Compare as maps; grazing-contact slivers may differ by ~machine-epsilon
  // areas, so missing entries must themselves be negligible.
  std::map<int, Vec3> base_map(base.nodal_forces.begin(), base.nodal_forces.end());
  std::map<int, Vec3> rot_map(rot.nodal_forces.begin(), rot.nodal_forces.end());
  const double tiny = 1e-9 * P;
  for (const auto& [node, p] : base_map) {
    const Vec3 expected = R * p;
    const auto it = rot_map.find(node);
    const Vec3 actual = it == rot_map.end() ? Vec3::Zero().eval() : it->second;
    CHECK((actual - expected).cwiseAbs().maxCoeff() <= 1e-9 * P + 1e-12);
  }
  for (const auto& [node, p] : rot_map)
    if (!base_map.count(node)) CHECK(p.norm() <= tiny);
}

TEST_CASE("whole budget at one point dominates convex combinations") {
  const MaterialModel mat{2100.0, 0.3, 50.0};
  const TetMesh mesh = meshgen::box(Vec3(4, 1, 1), Eigen::Vector3i(8, 2, 2));
  const ElementDataSet elements(mesh, mat);
  const auto fixed = nodes_where(mesh, [](const Vec3& p) { return p[0] < 1e-9; });
  const FemSystem system(mesh, elements, fixed, DensityField::Ones(mesh.num_tets()));

  const auto top = nodes_where(mesh, [](const Vec3& p) { return p[1] > 0.99 && p[0] > 2.0; });
  REQUIRE(top.size() >= 2);
  const ForceInstant ia = build_force_instant(mesh, top.front(), 5.0, mesh.mean_surface_edge);
  const ForceInstant ib = build_force_instant(mesh, top.back(), 5.0, mesh.mean_surface_edge);
  const Eigen::VectorXd fa = assemble_rhs(ia, mesh, fixed);
  const Eigen::VectorXd fb = assemble_rhs(ib, mesh, fixed);

  auto sigma_max = [&](const Eigen::VectorXd& f) {
    return recover_stress(system, system.solve(f)).von_mises.maxCoeff();
  };
  const double end_max = std::max(sigma_max(fa), sigma_max(fb));
  double comb_max = 0.0;
  for (int i = 0; i <= 10; ++i) {
    const double lambda = i / 10.0;
    comb_max = std::max(comb_max, sigma_max(lambda * fa + (1 - lambda) * fb));
  }
  CHECK(comb_max <= end_max + 1e-9 * end_max);
  CHECK(comb_max == doctest::Approx(end_max).epsilon(1e-9));
}
