#include "anyload/loadcase.hpp"

#include "anyload/common.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <unordered_set>

namespace anyload {

namespace {

// Signed area contribution of one directed edge (p1 -> p2), both relative to
// the circle center, for the intersection of a polygon with a disk of radius
// r (Green's theorem: chord pieces contribute triangle area, outside pieces
// contribute circular sectors).
double edge_disk_area(const Eigen::Vector2d& p1, const Eigen::Vector2d& p2, double r) {
  auto sector = [&](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    // Signed sector between directions a and b, |angle| <= pi.
    const double ang = std::atan2(a.x() * b.y() - a.y() * b.x(), a.dot(b));
    return 0.5 * r * r * ang;
  };
  auto chord = [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return 0.5 * (a.x() * b.y() - a.y() * b.x());
  };

  const Eigen::Vector2d d = p2 - p1;
  const double a = d.squaredNorm();
  if (a < 1e-30) return 0.0;
  const double b = 2.0 * p1.dot(d);
  const double c = p1.squaredNorm() - r * r;
  const double disc = b * b - 4.0 * a * c;

  // Split [0,1] at the circle crossings.
  double t0 = 1.0, t1 = 1.0;
  bool crosses = false;
  if (disc > 0.0) {
    const double sq = std::sqrt(disc);
    t0 = (-b - sq) / (2.0 * a);
    t1 = (-b + sq) / (2.0 * a);
    crosses = t1 > 0.0 && t0 < 1.0 && t1 > t0;
  }

  const bool p1_in = p1.squaredNorm() <= r * r;
  const bool p2_in = p2.squaredNorm() <= r * r;

  if (!crosses || (t0 <= 0.0 && t1 >= 1.0)) {
    // Entirely on one side.
    return (p1_in && p2_in) ? chord(p1, p2) : sector(p1, p2);
  }

  const double s0 = std::clamp(t0, 0.0, 1.0);
  const double s1 = std::clamp(t1, 0.0, 1.0);
  const Eigen::Vector2d q0 = p1 + s0 * d;
  const Eigen::Vector2d q1 = p1 + s1 * d;

  double area = 0.0;
  // [p1, q0]: inside iff p1 is inside (segment before first crossing).
  area += (s0 > 0.0) ? (p1_in ? chord(p1, q0) : sector(p1, q0)) : 0.0;
  // [q0, q1]: between the crossings the segment is inside the disk.
  area += chord(q0, q1);
  // [q1, p2]: inside iff p2 is inside.
  area += (s1 < 1.0) ? (p2_in ? chord(q1, p2) : sector(q1, p2)) : 0.0;
  return area;
}

double tri_inradius(const Vec3& a, const Vec3& b, const Vec3& c) {
  const double la = (b - c).norm(), lb = (c - a).norm(), lc = (a - b).norm();
  const double s = 0.5 * (la + lb + lc);
  const double area2 = std::max(s * (s - la) * (s - lb) * (s - lc), 0.0);
  return s > 0 ? std::sqrt(area2) / s : 0.0;
}

double tri_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

}  // namespace

double triangle_ball_area(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& center,
                          double radius) {
  const Vec3 n = (b - a).cross(c - a);
  const double n_len = n.norm();
  if (n_len < 1e-300) return 0.0;
  const Vec3 unit = n / n_len;
  const double h = unit.dot(center - a);
  if (std::abs(h) >= radius) return 0.0;
  const double r2d = std::sqrt(radius * radius - h * h);
  // In-plane frame centered at the disk center.
  const Vec3 origin = center - h * unit;
  const Vec3 e1 = (b - a).normalized();
  const Vec3 e2 = unit.cross(e1);
  auto project = [&](const Vec3& p) {
    const Vec3 d = p - origin;
    return Eigen::Vector2d(d.dot(e1), d.dot(e2));
  };
  const Eigen::Vector2d pa = project(a), pb = project(b), pc = project(c);
  const double area = edge_disk_area(pa, pb, r2d) + edge_disk_area(pb, pc, r2d) +
                      edge_disk_area(pc, pa, r2d);
  return std::abs(area);
}

double ForceInstant::total_magnitude() const {
  double sum = 0.0;
  for (const auto& [node, p] : nodal_forces) sum += p.norm();
  return sum;
}

ForceInstant build_force_instant(const TetMesh& mesh, int contact_node, double budget,
                                 double patch_radius) {
  if (!mesh.is_surface_node(contact_node))
    fail(cat("build_force_instant: node ", contact_node, " is not on the surface"));
  if (!(patch_radius > 0)) fail("build_force_instant: patch_radius must be positive");
  if (budget < 0) fail("build_force_instant: negative force budget");

  ForceInstant instant;
  instant.contact_node = contact_node;
  instant.patch_radius = patch_radius;
  instant.budget = budget;

  const int ord = mesh.surface_ordinal[contact_node];
  const Vec3 center = mesh.nodes.row(contact_node);
  const Vec3 normal = mesh.node_normals.row(ord);

  // Degenerate patch: the ball is smaller than every incident triangle's
  // inscribed circle, so clipping yields slivers near the vertex only.
  double min_inradius = std::numeric_limits<double>::infinity();
  for (int tri : mesh.surface_node_tris[ord]) {
    min_inradius = std::min(min_inradius, tri_inradius(mesh.nodes.row(mesh.surface_tris(tri, 0)),
                                                       mesh.nodes.row(mesh.surface_tris(tri, 1)),
                                                       mesh.nodes.row(mesh.surface_tris(tri, 2))));
  }

  std::map<int, double> node_area;  // A_j accumulation, ordered for determinism
  double patch_area = 0.0;

  if (patch_radius < min_inradius) {
    warn(cat("patch radius ", patch_radius, " is below the incident inradius at node ",
             contact_node, "; using one-ring area weighting"));
    instant.one_ring_fallback = true;
    for (int tri : mesh.surface_node_tris[ord]) {
      const double area = tri_area(mesh.nodes.row(mesh.surface_tris(tri, 0)),
                                   mesh.nodes.row(mesh.surface_tris(tri, 1)),
                                   mesh.nodes.row(mesh.surface_tris(tri, 2)));
      patch_area += area;
      for (int v = 0; v < 3; ++v) node_area[mesh.surface_tris(tri, v)] += area;
    }
  } else {
    // Flood outward over edge-adjacent surface triangles while they still
    // intersect the ball; keeps the patch connected around the contact node.
    std::queue<int> frontier;
    std::unordered_set<int> seen;
    for (int tri : mesh.surface_node_tris[ord]) {
      frontier.push(tri);
      seen.insert(tri);
    }
    // Slivers from triangles barely grazing the ball carry no load and make
    // the support set fragile under roundoff.
    const double area_floor = 1e-12 * patch_radius * patch_radius;
    while (!frontier.empty()) {
      const int tri = frontier.front();
      frontier.pop();
      const double clipped = triangle_ball_area(mesh.nodes.row(mesh.surface_tris(tri, 0)),
                                                mesh.nodes.row(mesh.surface_tris(tri, 1)),
                                                mesh.nodes.row(mesh.surface_tris(tri, 2)),
                                                center, patch_radius);
      if (clipped <= area_floor) continue;
      patch_area += clipped;
      for (int v = 0; v < 3; ++v) node_area[mesh.surface_tris(tri, v)] += clipped;
      for (int nb : mesh.tri_neighbors[tri])
        if (seen.insert(nb).second) frontier.push(nb);
    }
  }

  if (!(patch_area > 0)) fail(cat("build_force_instant: empty patch at node ", contact_node));
  instant.patch_area = patch_area;

  instant.nodal_forces.reserve(node_area.size());
  for (const auto& [node, area] : node_area) {
    const Vec3 p = -budget * (area / (3.0 * patch_area)) * normal;
    instant.nodal_forces.emplace_back(node, p);
  }
  return instant;
}

Eigen::VectorXd assemble_rhs(const ForceInstant& instant, const TetMesh& mesh,
                             const std::vector<int>& fixed_nodes) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(3 * mesh.num_nodes());
  for (const auto& [node, p] : instant.nodal_forces) f.segment<3>(3 * node) += p;
  for (int node : fixed_nodes) {
    if (f.segment<3>(3 * node).norm() > 0) {
      warn_once("rhs-fixed-overlap",
                cat("force instant at node ", instant.contact_node, " touches fixed node ", node,
                    "; such contributions are zeroed, the supports react them directly"));
      f.segment<3>(3 * node).setZero();
    }
  }
  return f;
}

Eigen::VectorXd magnitude_row(const ForceInstant& instant, const TetMesh& mesh) {
  Eigen::VectorXd row = Eigen::VectorXd::Zero(mesh.num_surface_nodes());
  for (const auto& [node, p] : instant.nodal_forces) {
    const int ord = mesh.surface_ordinal[node];
    if (ord < 0) fail("magnitude_row: instant touches a non-surface node");
    row[ord] += p.norm();
  }
  return row;
}

}  // namespace anyload
