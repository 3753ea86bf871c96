#pragma once

#include "anyload/mesh.hpp"

#include <utility>
#include <vector>

namespace anyload {

/// One admissible load case: the whole force budget applied compressively
/// along the inward normal at a contact node, spread over the surface patch
/// cut out by a ball of radius patch_radius around the node. Nodal force
/// magnitudes sum to the budget exactly.
struct ForceInstant {
  int contact_node = -1;
  double patch_radius = 0.0;  // mm
  double budget = 0.0;        // N
  double patch_area = 0.0;    // mm^2
  bool one_ring_fallback = false;  // patch clipping degenerated; full one-ring used
  std::vector<std::pair<int, Vec3>> nodal_forces;  // sorted by node id, N

  double total_magnitude() const;
};

/// Spreads `budget` over the connected set of surface triangles around
/// `contact_node` that intersect the ball of radius `patch_radius`. Each
/// triangle's clipped area is credited in thirds to its nodes; forces point
/// against the contact node's outward normal. If the radius is smaller than
/// every incident triangle's inradius the clipped patch is considered
/// degenerate and the full one-ring takes over (with a warning).
ForceInstant build_force_instant(const TetMesh& mesh, int contact_node, double budget,
                                 double patch_radius);

/// Scatters an instant into a dense 3n force vector. Entries landing on
/// fixed nodes are zeroed with a warning.
Eigen::VectorXd assemble_rhs(const ForceInstant& instant, const TetMesh& mesh,
                             const std::vector<int>& fixed_nodes = {});

/// Per-surface-node force magnitudes (length s, surface ordinals); the
/// reduced representation used by the criticality surrogate. Sums to the
/// budget.
Eigen::VectorXd magnitude_row(const ForceInstant& instant, const TetMesh& mesh);

/// Area of the intersection of a 3D triangle with a ball. Exact for the flat
/// triangle (plane section of the ball is a disk).
double triangle_ball_area(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& center,
                          double radius);

}  // namespace anyload
