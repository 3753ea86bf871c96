#include "anyload/meshgen.hpp"

#include "anyload/common.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <unordered_map>
#include <vector>

namespace anyload::meshgen {

namespace {

// Kuhn subdivision of the unit cube into six tets around the 000-111 diagonal.
// Each entry indexes the cube corner (bit0 = x, bit1 = y, bit2 = z).
constexpr int kCubeTets[6][4] = {
    {0, 1, 3, 7}, {0, 3, 2, 7}, {0, 2, 6, 7},
    {0, 6, 4, 7}, {0, 4, 5, 7}, {0, 5, 1, 7},
};

}  // namespace

TetMesh regular_tet(double edge) {
  // Vertices of a regular tet with the requested edge length.
  const double a = edge / std::sqrt(2.0);
  Eigen::Matrix<double, Eigen::Dynamic, 3> nodes(4, 3);
  nodes << a, 0, -a / std::sqrt(2.0),
      -a, 0, -a / std::sqrt(2.0),
      0, a, a / std::sqrt(2.0),
      0, -a, a / std::sqrt(2.0);
  // Rescale so edges are exactly `edge`.
  const double cur = (nodes.row(0) - nodes.row(1)).norm();
  nodes *= edge / cur;
  Eigen::Matrix<int, Eigen::Dynamic, 4> tets(1, 4);
  tets << 0, 1, 2, 3;
  return make_tet_mesh(std::move(nodes), std::move(tets));
}

TetMesh voxels(const Vec3& size, const Eigen::Vector3i& cells,
               const std::function<bool(const Vec3&)>& keep) {
  const int nx = cells[0], ny = cells[1], nz = cells[2];
  if (nx < 1 || ny < 1 || nz < 1) fail("meshgen: need at least one cell per axis");
  const Vec3 h(size[0] / nx, size[1] / ny, size[2] / nz);

  auto node_id = [&](int i, int j, int k) { return (k * (ny + 1) + j) * (nx + 1) + i; };

  std::vector<std::array<int, 4>> tets;
  std::vector<char> used(static_cast<std::size_t>((nx + 1) * (ny + 1) * (nz + 1)), 0);
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const Vec3 center((i + 0.5) * h[0], (j + 0.5) * h[1], (k + 0.5) * h[2]);
        if (!keep(center)) continue;
        int corner[8];
        for (int c = 0; c < 8; ++c)
          corner[c] = node_id(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
        for (const auto& t : kCubeTets) {
          tets.push_back({corner[t[0]], corner[t[1]], corner[t[2]], corner[t[3]]});
          for (int v : {t[0], t[1], t[2], t[3]}) used[corner[v]] = 1;
        }
      }
    }
  }
  if (tets.empty()) fail("meshgen: predicate kept no cells");

  std::vector<int> remap(used.size(), -1);
  int n = 0;
  for (std::size_t v = 0; v < used.size(); ++v)
    if (used[v]) remap[v] = n++;

  Eigen::Matrix<double, Eigen::Dynamic, 3> nodes(n, 3);
  for (int k = 0; k <= nz; ++k)
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i <= nx; ++i) {
        const int id = node_id(i, j, k);
        if (remap[id] >= 0) nodes.row(remap[id]) = Vec3(i * h[0], j * h[1], k * h[2]);
      }

  Eigen::Matrix<int, Eigen::Dynamic, 4> T(static_cast<int>(tets.size()), 4);
  for (std::size_t e = 0; e < tets.size(); ++e)
    for (int v = 0; v < 4; ++v) T(static_cast<int>(e), v) = remap[tets[e][v]];
  return make_tet_mesh(std::move(nodes), std::move(T));
}

TetMesh box(const Vec3& size, const Eigen::Vector3i& cells) {
  return voxels(size, cells, [](const Vec3&) { return true; });
}

namespace {

// Two-neck beam layout, in units of `cell`: a 32 x 8 x 4 bounding box.
// Full-height blocks at x [0,7], [11,19], [23,32]; spans x (7,11) and
// (19,23) keep only the band hanging from the top so the top surface stays
// flat for contact. The first span is one cell thinner than the second.
struct TwoNeckDims {
  double L, H, T, cell;
  double neck1_lo, neck1_hi, neck1_ymin;
  double neck2_lo, neck2_hi, neck2_ymin;
};

// Fixed physical dimensions (mm); `cell` is the target element edge and only
// controls resolution.
TwoNeckDims two_neck_dims(double cell) {
  TwoNeckDims d;
  d.cell = cell;
  d.L = 32;
  d.H = 8;
  d.T = 8;
  // Necks sit symmetric about mid-span so both see the same bending moment
  // and only the section height differentiates them.
  d.neck1_lo = 7;
  d.neck1_hi = 11;
  d.neck1_ymin = 5;  // neck height 3 mm (the thin one)
  d.neck2_lo = 21;
  d.neck2_hi = 25;
  d.neck2_ymin = 2;  // neck height 6 mm
  return d;
}

bool two_neck_keep(const TwoNeckDims& d, const Vec3& c) {
  if (c[0] > d.neck1_lo && c[0] < d.neck1_hi) return c[1] > d.neck1_ymin;
  if (c[0] > d.neck2_lo && c[0] < d.neck2_hi) return c[1] > d.neck2_ymin;
  return true;
}

std::vector<int> elements_in_span(const TetMesh& mesh, double lo, double hi) {
  std::vector<int> out;
  for (int e = 0; e < mesh.num_tets(); ++e) {
    const double x = mesh.tet_centroid(e)[0];
    if (x > lo && x < hi) out.push_back(e);
  }
  return out;
}

}  // namespace

TetMesh two_neck_plate(double cell) {
  const TwoNeckDims d = two_neck_dims(cell);
  const auto cells = [&](double extent) { return std::max(1, static_cast<int>(std::lround(extent / cell))); };
  return voxels(Vec3(d.L, d.H, d.T), Eigen::Vector3i(cells(d.L), cells(d.H), cells(d.T)),
                [&](const Vec3& c) { return two_neck_keep(d, c); });
}

std::vector<int> two_neck_thin_region(const TetMesh& mesh) {
  const TwoNeckDims d = two_neck_dims(1.0);
  return elements_in_span(mesh, d.neck1_lo, d.neck1_hi);
}

std::vector<int> two_neck_thick_region(const TetMesh& mesh) {
  const TwoNeckDims d = two_neck_dims(1.0);
  return elements_in_span(mesh, d.neck2_lo, d.neck2_hi);
}

TetMesh fork(double cell) {
  // Half model on x >= 0 (mm): base slab 6 x 4 x 4, prong 4 x 10 x 4 at the
  // outer edge; reflected through x = 0. `cell` is the element edge.
  const double bx = 6, by = 4, bz = 4, px = 4, py = 10;
  const auto cells = [&](double extent) { return std::max(1, static_cast<int>(std::lround(extent / cell))); };
  const Vec3 size(bx, by + py, bz);
  TetMesh half = voxels(size, Eigen::Vector3i(cells(bx), cells(by + py), cells(bz)),
                        [&](const Vec3& c) {
                          if (c[1] < by) return true;  // base
                          return c[0] > bx - px;       // prong
                        });

  // Mirror: negate x, merge the x = 0 plane nodes, flip orientation.
  const int n = half.num_nodes();
  std::vector<int> mirror_id(n, -1);
  std::vector<Vec3> extra;
  for (int i = 0; i < n; ++i) {
    if (half.nodes(i, 0) == 0.0) {
      mirror_id[i] = i;
    } else {
      mirror_id[i] = n + static_cast<int>(extra.size());
      extra.emplace_back(-half.nodes(i, 0), half.nodes(i, 1), half.nodes(i, 2));
    }
  }
  Eigen::Matrix<double, Eigen::Dynamic, 3> nodes(n + static_cast<int>(extra.size()), 3);
  nodes.topRows(n) = half.nodes;
  for (std::size_t i = 0; i < extra.size(); ++i) nodes.row(n + static_cast<int>(i)) = extra[i];

  const int m = half.num_tets();
  Eigen::Matrix<int, Eigen::Dynamic, 4> tets(2 * m, 4);
  tets.topRows(m) = half.tets;
  for (int e = 0; e < m; ++e) {
    // Swap two vertices so the reflected tet keeps positive orientation.
    tets(m + e, 0) = mirror_id[half.tets(e, 1)];
    tets(m + e, 1) = mirror_id[half.tets(e, 0)];
    tets(m + e, 2) = mirror_id[half.tets(e, 2)];
    tets(m + e, 3) = mirror_id[half.tets(e, 3)];
  }
  return make_tet_mesh(std::move(nodes), std::move(tets));
}

TetMesh ball(int subdiv, double radius) {
  if (subdiv < 0 || subdiv > 7) fail("meshgen: ball subdiv out of range");
  // Icosahedron.
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  std::vector<std::array<int, 3>> tris = {
      {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
      {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
      {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
  for (auto& v : verts) v.normalize();

  for (int level = 0; level < subdiv; ++level) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const int id = static_cast<int>(verts.size());
      verts.push_back(((verts[a] + verts[b]) * 0.5).normalized());
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(tris.size() * 4);
    for (const auto& tr : tris) {
      const int ab = mid(tr[0], tr[1]), bc = mid(tr[1], tr[2]), ca = mid(tr[2], tr[0]);
      next.push_back({tr[0], ab, ca});
      next.push_back({tr[1], bc, ab});
      next.push_back({tr[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    tris = std::move(next);
  }

  const int n = static_cast<int>(verts.size());
  Eigen::Matrix<double, Eigen::Dynamic, 3> nodes(n + 1, 3);
  for (int i = 0; i < n; ++i) nodes.row(i) = verts[i] * radius;
  nodes.row(n) = Vec3::Zero();  // center

  Eigen::Matrix<int, Eigen::Dynamic, 4> tets(static_cast<int>(tris.size()), 4);
  for (std::size_t e = 0; e < tris.size(); ++e) {
    tets(static_cast<int>(e), 0) = n;
    tets(static_cast<int>(e), 1) = tris[e][0];
    tets(static_cast<int>(e), 2) = tris[e][1];
    tets(static_cast<int>(e), 3) = tris[e][2];
  }
  return make_tet_mesh(std::move(nodes), std::move(tets));
}

}  // namespace anyload::meshgen
