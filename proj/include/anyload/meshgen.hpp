#pragma once

#include "anyload/mesh.hpp"

#include <functional>

namespace anyload::meshgen {

/// Regular tetrahedron with the given edge length.
TetMesh regular_tet(double edge = 1.0);

/// Axis-aligned box [0,size] split into cells, six tets per cell
/// (Kuhn subdivision; face-compatible across cells).
TetMesh box(const Vec3& size, const Eigen::Vector3i& cells);

/// Structured grid over [0,size] keeping only cells whose center satisfies
/// the predicate. Unused nodes are dropped.
TetMesh voxels(const Vec3& size, const Eigen::Vector3i& cells,
               const std::function<bool(const Vec3&)>& keep);

/// Simply-supported beam with two reduced-height spans hanging from a flat
/// top chord; the first span is thinner than the second. Used as the
/// two-budget benchmark shape. cell = edge length in mm.
TetMesh two_neck_plate(double cell = 1.0);
/// Element ids whose centroid lies in the thinner / thicker neck span.
std::vector<int> two_neck_thin_region(const TetMesh& mesh);
std::vector<int> two_neck_thick_region(const TetMesh& mesh);

/// Mirror-symmetric two-prong fork: base slab plus two identical prongs,
/// built as a half model reflected through x = 0 so coordinates are exactly
/// symmetric.
TetMesh fork(double cell = 1.0);

/// Solid ball: icosphere surface (subdiv refinements) coned to the center.
/// The boundary of the result is exactly the icosphere.
TetMesh ball(int subdiv, double radius = 1.0);

}  // namespace anyload::meshgen
