#pragma once

#include <Eigen/Core>
#include <Eigen/Sparse>

#include <cstdint>
#include <string>
#include <vector>

namespace anyload {

using Vec3 = Eigen::Vector3d;

/// Tetrahedral mesh plus every derived structure the rest of the pipeline
/// indexes into: boundary triangles, surface node set with outward normals,
/// face adjacency between tets, the surface edge graph, and a fingerprint of
/// the geometry. Instances are immutable after make_tet_mesh(); treat all
/// members as read-only.
struct TetMesh {
  Eigen::Matrix<double, Eigen::Dynamic, 3> nodes;  // n x 3, mm
  Eigen::Matrix<int, Eigen::Dynamic, 4> tets;      // m x 4, positively oriented
  Eigen::VectorXd tet_volumes;                     // mm^3, all > 0

  // Boundary faces (faces incident to exactly one tet), oriented outward.
  Eigen::Matrix<int, Eigen::Dynamic, 3> surface_tris;
  std::vector<int> surface_nodes;   // sorted global node ids, size s
  std::vector<int> surface_ordinal; // n -> index into surface_nodes, or -1
  Eigen::Matrix<double, Eigen::Dynamic, 3> node_normals;  // s x 3, unit length

  std::vector<std::vector<int>> tet_neighbors;       // face-adjacent tets
  std::vector<std::vector<int>> node_tets;           // incident tets per node
  std::vector<std::vector<int>> surface_node_edges;  // surface graph, ordinals
  std::vector<std::vector<int>> surface_node_tris;   // incident surface tris, per ordinal
  std::vector<std::vector<int>> tri_neighbors;       // edge-adjacent surface tris

  double mean_surface_edge = 0.0;
  Vec3 bbox_min = Vec3::Zero(), bbox_max = Vec3::Zero();
  std::string hash;  // hex fingerprint of nodes+tets

  int num_nodes() const { return static_cast<int>(nodes.rows()); }
  int num_tets() const { return static_cast<int>(tets.rows()); }
  int num_surface_nodes() const { return static_cast<int>(surface_nodes.size()); }
  int num_surface_tris() const { return static_cast<int>(surface_tris.rows()); }
  double diameter() const { return (bbox_max - bbox_min).norm(); }
  double total_volume() const { return tet_volumes.sum(); }
  /// Volume via the divergence theorem on the oriented boundary; independent
  /// cross-check of tet volumes and surface orientation.
  double surface_enclosed_volume() const;
  Vec3 tet_centroid(int e) const;
  bool is_surface_node(int node) const { return surface_ordinal[node] >= 0; }
};

/// Builds a validated mesh from raw arrays: checks index ranges, rejects
/// degenerate tets, re-orients negative tets, derives the boundary.
TetMesh make_tet_mesh(Eigen::Matrix<double, Eigen::Dynamic, 3> nodes,
                      Eigen::Matrix<int, Eigen::Dynamic, 4> tets);

/// Reads TetGen-style ASCII .node/.ele files. 0- or 1-based indexing is
/// detected from the first row index. Parse errors report file and line.
TetMesh load_tet_mesh(const std::string& node_file, const std::string& ele_file);

/// Boundary conditions and design-region bookkeeping for one run.
struct RegionSpec {
  std::vector<int> fixed_nodes;     // >= 3 non-collinear surface nodes
  std::vector<int> contact_nodes;   // admissible force locations, disjoint from fixed
  std::vector<int> shell_elements;  // tets kept fully solid
  double shell_thickness = 0.0;     // mm
};

/// Validates the invariants above; throws with a precise message on failure.
void validate_regions(const TetMesh& mesh, const RegionSpec& regions);

/// Distance from each tet centroid to the boundary surface (exact
/// point-to-triangle distances, BVH accelerated).
Eigen::VectorXd centroid_surface_distances(const TetMesh& mesh);

/// All tets whose centroid lies within `thickness` of the boundary.
/// Monotone in thickness. Warns when nothing is left to design.
std::vector<int> tag_shell_elements(const TetMesh& mesh, double thickness);

/// Shortest-path distances along surface edges from `source` (a global node
/// id on the surface) to every surface node, indexed by surface ordinal.
/// Unreachable nodes get +inf.
Eigen::VectorXd geodesic_distances(const TetMesh& mesh, int source);

/// Same metric, but stops once every node in `targets` (global ids) has been
/// settled. Entries outside the settled set may be +inf.
Eigen::VectorXd geodesic_distances_to(const TetMesh& mesh, int source,
                                      const std::vector<int>& targets);

/// Picks `count` spread-out representatives of `contact` (global node ids) by
/// k-means under the geodesic metric, farthest-first seeded. seed == 0 starts
/// from the lowest-index contact node and is fully deterministic; a nonzero
/// seed randomizes the starting node only. Returns sorted global ids.
std::vector<int> sample_contact_nodes(const TetMesh& mesh,
                                      const std::vector<int>& contact,
                                      int count, std::uint64_t seed = 0);

enum class LaplacianKind { SurfaceNodes, Elements };

/// Combinatorial (unweighted) graph Laplacian: degree on the diagonal, -1 per
/// edge. SurfaceNodes uses the surface edge graph (s x s, surface ordinals);
/// Elements uses tet face adjacency (m x m).
struct GraphLaplacian {
  LaplacianKind kind;
  Eigen::SparseMatrix<double> matrix;
};

GraphLaplacian build_laplacian(LaplacianKind kind, const TetMesh& mesh);

}  // namespace anyload
