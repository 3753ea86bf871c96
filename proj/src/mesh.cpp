#include "anyload/mesh.hpp"

#include "anyload/common.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <queue>
#include <random>
#include <unordered_map>
#include <unordered_set>

namespace anyload {

void warn(const std::string& msg) { std::cerr << "[anyload] warning: " << msg << "\n"; }

void warn_once(const std::string& key, const std::string& msg) {
  static std::unordered_set<std::string> seen;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  if (seen.insert(key).second) warn(cat(msg, " (reported once)"));
}

std::string Fnv1a::hex() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(state_));
  return buf;
}

namespace {

double signed_tet_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return (b - a).cross(c - a).dot(d - a) / 6.0;
}

// Closest point on triangle (a,b,c) to p. Ericson, Real-Time Collision Detection.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return b + w * (c - b);
  }

  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

// Axis-aligned BVH over surface triangles for nearest-distance queries.
class TriBvh {
 public:
  explicit TriBvh(const TetMesh& mesh) : mesh_(mesh) {
    const int t = mesh.num_surface_tris();
    order_.resize(t);
    for (int i = 0; i < t; ++i) order_[i] = i;
    if (t > 0) build(0, t);
  }

  double distance(const Vec3& p) const {
    double best = std::numeric_limits<double>::infinity();
    if (!nodes_.empty()) query(0, p, best);
    return std::sqrt(best);
  }

 private:
  struct Node {
    Vec3 lo, hi;
    int left = -1, right = -1;  // children, or leaf range below
    int begin = 0, end = 0;
  };

  int build(int begin, int end) {
    Node node;
    node.lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    node.hi = -node.lo;
    for (int i = begin; i < end; ++i) {
      for (int v = 0; v < 3; ++v) {
        const Vec3 x = mesh_.nodes.row(mesh_.surface_tris(order_[i], v));
        node.lo = node.lo.cwiseMin(x);
        node.hi = node.hi.cwiseMax(x);
      }
    }
    const int idx = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    if (end - begin <= 8) {
      nodes_[idx].begin = begin;
      nodes_[idx].end = end;
      return idx;
    }
    int axis;
    (node.hi - node.lo).maxCoeff(&axis);
    const int mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int a, int b) { return tri_center(a, axis) < tri_center(b, axis); });
    const int l = build(begin, mid);
    const int r = build(mid, end);
    nodes_[idx].left = l;
    nodes_[idx].right = r;
    return idx;
  }

  double tri_center(int tri, int axis) const {
    double c = 0;
    for (int v = 0; v < 3; ++v) c += mesh_.nodes(mesh_.surface_tris(tri, v), axis);
    return c / 3.0;
  }

  double box_sq(const Node& n, const Vec3& p) const {
    const Vec3 d = (n.lo - p).cwiseMax(0.0).cwiseMax(p - n.hi);
    return d.squaredNorm();
  }

  void query(int idx, const Vec3& p, double& best) const {
    const Node& n = nodes_[idx];
    if (box_sq(n, p) >= best) return;
    if (n.left < 0) {
      for (int i = n.begin; i < n.end; ++i) {
        const int tri = order_[i];
        const Vec3 q = closest_point_on_triangle(p, mesh_.nodes.row(mesh_.surface_tris(tri, 0)),
                                                 mesh_.nodes.row(mesh_.surface_tris(tri, 1)),
                                                 mesh_.nodes.row(mesh_.surface_tris(tri, 2)));
        best = std::min(best, (q - p).squaredNorm());
      }
      return;
    }
    // Visit the nearer child first.
    const double dl = box_sq(nodes_[n.left], p), dr = box_sq(nodes_[n.right], p);
    if (dl < dr) {
      query(n.left, p, best);
      query(n.right, p, best);
    } else {
      query(n.right, p, best);
      query(n.left, p, best);
    }
  }

  const TetMesh& mesh_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

struct FaceKey {
  std::array<int, 3> v;
  bool operator==(const FaceKey& o) const { return v == o.v; }
};
struct FaceKeyHash {
  std::size_t operator()(const FaceKey& k) const {
    std::size_t h = 1469598103934665603ull;
    for (int x : k.v) {
      h ^= static_cast<std::size_t>(x);
      h *= 1099511628211ull;
    }
    return h;
  }
};

FaceKey face_key(int a, int b, int c) {
  std::array<int, 3> v{a, b, c};
  std::sort(v.begin(), v.end());
  return FaceKey{v};
}

void derive_topology(TetMesh& mesh) {
  const int n = mesh.num_nodes();
  const int m = mesh.num_tets();

  // Faces of tet (n0..n3), oriented outward for a positively oriented tet.
  static const int kFaces[4][3] = {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};

  struct FaceRec {
    int count = 0;
    int first_tet = -1;
    std::array<int, 3> oriented{};
  };
  std::unordered_map<FaceKey, FaceRec, FaceKeyHash> faces;
  faces.reserve(static_cast<std::size_t>(m) * 4);
  mesh.tet_neighbors.assign(m, {});
  for (int e = 0; e < m; ++e) {
    for (const auto& f : kFaces) {
      const int a = mesh.tets(e, f[0]), b = mesh.tets(e, f[1]), c = mesh.tets(e, f[2]);
      auto& rec = faces[face_key(a, b, c)];
      ++rec.count;
      if (rec.count == 1) {
        rec.first_tet = e;
        rec.oriented = {a, b, c};
      } else if (rec.count == 2) {
        mesh.tet_neighbors[e].push_back(rec.first_tet);
        mesh.tet_neighbors[rec.first_tet].push_back(e);
      } else {
        fail("mesh: face shared by more than two tets (non-manifold)");
      }
    }
  }
  for (auto& nb : mesh.tet_neighbors) std::sort(nb.begin(), nb.end());

  std::vector<std::array<int, 3>> boundary;
  for (const auto& [key, rec] : faces)
    if (rec.count == 1) boundary.push_back(rec.oriented);

  // Deterministic boundary order: sort by (min vertex, then full key).
  std::sort(boundary.begin(), boundary.end(), [](const auto& a, const auto& b) {
    auto ka = a, kb = b;
    std::sort(ka.begin(), ka.end());
    std::sort(kb.begin(), kb.end());
    return ka < kb;
  });
  mesh.surface_tris.resize(static_cast<int>(boundary.size()), 3);
  for (int i = 0; i < static_cast<int>(boundary.size()); ++i)
    for (int v = 0; v < 3; ++v) mesh.surface_tris(i, v) = boundary[i][v];

  // Surface node set and ordinals.
  std::vector<char> on_surface(n, 0);
  for (int i = 0; i < mesh.num_surface_tris(); ++i)
    for (int v = 0; v < 3; ++v) on_surface[mesh.surface_tris(i, v)] = 1;
  mesh.surface_nodes.clear();
  for (int i = 0; i < n; ++i)
    if (on_surface[i]) mesh.surface_nodes.push_back(i);
  mesh.surface_ordinal.assign(n, -1);
  for (int s = 0; s < mesh.num_surface_nodes(); ++s)
    mesh.surface_ordinal[mesh.surface_nodes[s]] = s;

  // Angle-weighted outward normals.
  const int s = mesh.num_surface_nodes();
  mesh.node_normals.setZero(s, 3);
  mesh.surface_node_tris.assign(s, {});
  for (int i = 0; i < mesh.num_surface_tris(); ++i) {
    const Vec3 a = mesh.nodes.row(mesh.surface_tris(i, 0));
    const Vec3 b = mesh.nodes.row(mesh.surface_tris(i, 1));
    const Vec3 c = mesh.nodes.row(mesh.surface_tris(i, 2));
    const Vec3 nrm = (b - a).cross(c - a);
    const Vec3 unit = nrm.normalized();
    const std::array<Vec3, 3> p{a, b, c};
    for (int v = 0; v < 3; ++v) {
      const Vec3 e1 = (p[(v + 1) % 3] - p[v]).normalized();
      const Vec3 e2 = (p[(v + 2) % 3] - p[v]).normalized();
      const double angle = std::acos(std::clamp(e1.dot(e2), -1.0, 1.0));
      const int ord = mesh.surface_ordinal[mesh.surface_tris(i, v)];
      mesh.node_normals.row(ord) += angle * unit.transpose();
      mesh.surface_node_tris[ord].push_back(i);
    }
  }
  for (int i = 0; i < s; ++i) {
    const double len = mesh.node_normals.row(i).norm();
    if (len < 1e-300) fail(cat("mesh: zero normal at surface node ", mesh.surface_nodes[i]));
    mesh.node_normals.row(i) /= len;
  }

  // Surface edge graph (unique edges of surface triangles) and tri adjacency.
  std::map<std::pair<int, int>, std::vector<int>> edge_tris;
  for (int i = 0; i < mesh.num_surface_tris(); ++i) {
    for (int v = 0; v < 3; ++v) {
      int a = mesh.surface_tris(i, v), b = mesh.surface_tris(i, (v + 1) % 3);
      if (a > b) std::swap(a, b);
      edge_tris[{a, b}].push_back(i);
    }
  }
  mesh.surface_node_edges.assign(s, {});
  mesh.tri_neighbors.assign(mesh.num_surface_tris(), {});
  double edge_total = 0.0;
  for (const auto& [edge, tris] : edge_tris) {
    const int oa = mesh.surface_ordinal[edge.first], ob = mesh.surface_ordinal[edge.second];
    mesh.surface_node_edges[oa].push_back(ob);
    mesh.surface_node_edges[ob].push_back(oa);
    edge_total += (mesh.nodes.row(edge.first) - mesh.nodes.row(edge.second)).norm();
    for (std::size_t x = 0; x < tris.size(); ++x)
      for (std::size_t y = x + 1; y < tris.size(); ++y) {
        mesh.tri_neighbors[tris[x]].push_back(tris[y]);
        mesh.tri_neighbors[tris[y]].push_back(tris[x]);
      }
  }
  for (auto& adj : mesh.surface_node_edges) std::sort(adj.begin(), adj.end());
  mesh.mean_surface_edge = edge_tris.empty() ? 0.0 : edge_total / static_cast<double>(edge_tris.size());

  mesh.node_tets.assign(n, {});
  for (int e = 0; e < m; ++e)
    for (int v = 0; v < 4; ++v) mesh.node_tets[mesh.tets(e, v)].push_back(e);

  mesh.bbox_min = mesh.nodes.colwise().minCoeff();
  mesh.bbox_max = mesh.nodes.colwise().maxCoeff();

  Fnv1a h;
  h.add_bytes(mesh.nodes.data(), sizeof(double) * mesh.nodes.size());
  h.add_bytes(mesh.tets.data(), sizeof(int) * mesh.tets.size());
  mesh.hash = h.hex();
}

}  // namespace

Vec3 TetMesh::tet_centroid(int e) const {
  Vec3 c = Vec3::Zero();
  for (int v = 0; v < 4; ++v) c += nodes.row(tets(e, v));
  return c / 4.0;
}

double TetMesh::surface_enclosed_volume() const {
  double vol = 0.0;
  for (int i = 0; i < num_surface_tris(); ++i) {
    const Vec3 a = nodes.row(surface_tris(i, 0));
    const Vec3 b = nodes.row(surface_tris(i, 1));
    const Vec3 c = nodes.row(surface_tris(i, 2));
    vol += a.dot(b.cross(c)) / 6.0;
  }
  return std::abs(vol);
}

TetMesh make_tet_mesh(Eigen::Matrix<double, Eigen::Dynamic, 3> nodes,
                      Eigen::Matrix<int, Eigen::Dynamic, 4> tets) {
  TetMesh mesh;
  mesh.nodes = std::move(nodes);
  mesh.tets = std::move(tets);
  const int n = mesh.num_nodes();
  const int m = mesh.num_tets();
  if (n < 4 || m < 1) fail("mesh: need at least 4 nodes and 1 tet");

  mesh.tet_volumes.resize(m);
  for (int e = 0; e < m; ++e) {
    for (int v = 0; v < 4; ++v) {
      const int idx = mesh.tets(e, v);
      if (idx < 0 || idx >= n) fail(cat("mesh: tet ", e, " references node ", idx, " out of range [0,", n, ")"));
    }
    const Vec3 a = mesh.nodes.row(mesh.tets(e, 0));
    const Vec3 b = mesh.nodes.row(mesh.tets(e, 1));
    const Vec3 c = mesh.nodes.row(mesh.tets(e, 2));
    const Vec3 d = mesh.nodes.row(mesh.tets(e, 3));
    double vol = signed_tet_volume(a, b, c, d);
    if (vol < 0.0) {
      std::swap(mesh.tets(e, 2), mesh.tets(e, 3));
      vol = -vol;
    }
    const double edge = std::max({(b - a).norm(), (c - a).norm(), (d - a).norm()});
    if (!(vol > 1e-14 * edge * edge * edge)) fail(cat("mesh: tet ", e, " is degenerate (volume ", vol, ")"));
    mesh.tet_volumes[e] = vol;
  }
  derive_topology(mesh);
  return mesh;
}

namespace {

struct LineReader {
  std::ifstream in;
  std::string path;
  int line_no = 0;
  explicit LineReader(const std::string& p) : in(p), path(p) {
    if (!in) fail(cat("cannot open ", p));
  }
  // Next non-empty, non-comment line split into tokens.
  bool next(std::vector<std::string>& tokens) {
    std::string line;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash_pos = line.find('#');
      if (hash_pos != std::string::npos) line.resize(hash_pos);
      tokens.clear();
      std::istringstream ss(line);
      std::string tok;
      while (ss >> tok) tokens.push_back(tok);
      if (!tokens.empty()) return true;
    }
    return false;
  }
  [[noreturn]] void die(const std::string& msg) const { fail(cat(path, ":", line_no, ": ", msg)); }
  long to_long(const std::string& tok) const {
    try {
      std::size_t pos = 0;
      const long v = std::stol(tok, &pos);
      if (pos != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      die(cat("expected integer, got '", tok, "'"));
    }
  }
  double to_double(const std::string& tok) const {
    try {
      std::size_t pos = 0;
      const double v = std::stod(tok, &pos);
      if (pos != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      die(cat("expected number, got '", tok, "'"));
    }
  }
};

}  // namespace

TetMesh load_tet_mesh(const std::string& node_file, const std::string& ele_file) {
  std::vector<std::string> tok;

  LineReader nr(node_file);
  if (!nr.next(tok)) nr.die("empty file");
  const long n = nr.to_long(tok[0]);
  if (n < 4) nr.die(cat("node count ", n, " too small"));
  Eigen::Matrix<double, Eigen::Dynamic, 3> nodes(n, 3);
  long node_base = -1;
  for (long i = 0; i < n; ++i) {
    if (!nr.next(tok)) nr.die(cat("expected ", n, " node rows, got ", i));
    if (tok.size() < 4) nr.die("node row needs: index x y z");
    const long idx = nr.to_long(tok[0]);
    if (i == 0) {
      if (idx != 0 && idx != 1) nr.die(cat("first node index must be 0 or 1, got ", idx));
      node_base = idx;
    }
    if (idx != node_base + i) nr.die(cat("non-contiguous node index ", idx));
    for (int c = 0; c < 3; ++c) nodes(i, c) = nr.to_double(tok[1 + c]);
  }

  LineReader er(ele_file);
  if (!er.next(tok)) er.die("empty file");
  const long m = er.to_long(tok[0]);
  if (m < 1) er.die(cat("element count ", m, " too small"));
  if (tok.size() >= 2 && er.to_long(tok[1]) != 4) er.die("only 4-node (linear) tets are supported");
  Eigen::Matrix<int, Eigen::Dynamic, 4> tets(m, 4);
  long ele_base = -1;
  for (long e = 0; e < m; ++e) {
    if (!er.next(tok)) er.die(cat("expected ", m, " element rows, got ", e));
    if (tok.size() < 5) er.die("element row needs: index n0 n1 n2 n3");
    const long idx = er.to_long(tok[0]);
    if (e == 0) {
      if (idx != 0 && idx != 1) er.die(cat("first element index must be 0 or 1, got ", idx));
      ele_base = idx;
    }
    if (idx != ele_base + e) er.die(cat("non-contiguous element index ", idx));
    for (int v = 0; v < 4; ++v) {
      const long ref = er.to_long(tok[1 + v]) - node_base;
      if (ref < 0 || ref >= n) er.die(cat("node index ", ref + node_base, " out of range"));
      tets(e, v) = static_cast<int>(ref);
    }
  }

  try {
    return make_tet_mesh(std::move(nodes), std::move(tets));
  } catch (const Error& e) {
    fail(cat(node_file, " + ", ele_file, ": ", e.what()));
  }
}

void validate_regions(const TetMesh& mesh, const RegionSpec& regions) {
  const int n = mesh.num_nodes();
  if (regions.fixed_nodes.size() < 3) fail("regions: need at least 3 fixed nodes");
  for (int idx : regions.fixed_nodes)
    if (idx < 0 || idx >= n) fail(cat("regions: fixed node ", idx, " out of range"));
  // Non-collinearity: rank of centered coordinates must exceed 1.
  Eigen::MatrixXd pts(regions.fixed_nodes.size(), 3);
  for (std::size_t i = 0; i < regions.fixed_nodes.size(); ++i)
    pts.row(static_cast<int>(i)) = mesh.nodes.row(regions.fixed_nodes[i]);
  const Eigen::RowVector3d mean = pts.colwise().mean();
  pts.rowwise() -= mean;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(pts);
  const auto& sv = svd.singularValues();
  if (sv.size() < 2 || sv[1] <= 1e-9 * std::max(sv[0], 1e-300))
    fail("regions: fixed nodes are collinear; the structure is not anchored");

  std::unordered_set<int> fixed(regions.fixed_nodes.begin(), regions.fixed_nodes.end());
  for (int idx : regions.contact_nodes) {
    if (idx < 0 || idx >= n || !mesh.is_surface_node(idx))
      fail(cat("regions: contact node ", idx, " is not a surface node"));
    if (fixed.count(idx)) fail(cat("regions: node ", idx, " is both fixed and contact"));
  }
  if (regions.shell_thickness > 0.0 && regions.shell_elements.empty())
    fail("regions: positive shell thickness but no shell elements tagged");
  for (int e : regions.shell_elements)
    if (e < 0 || e >= mesh.num_tets()) fail(cat("regions: shell element ", e, " out of range"));
}

Eigen::VectorXd centroid_surface_distances(const TetMesh& mesh) {
  TriBvh bvh(mesh);
  Eigen::VectorXd dist(mesh.num_tets());
  for (int e = 0; e < mesh.num_tets(); ++e) dist[e] = bvh.distance(mesh.tet_centroid(e));
  return dist;
}

std::vector<int> tag_shell_elements(const TetMesh& mesh, double thickness) {
  if (!(thickness > 0.0)) fail("tag_shell_elements: thickness must be positive");
  const Eigen::VectorXd dist = centroid_surface_distances(mesh);
  std::vector<int> shell;
  for (int e = 0; e < mesh.num_tets(); ++e)
    if (dist[e] <= thickness) shell.push_back(e);
  if (shell.empty())
    fail(cat("tag_shell_elements: no centroid within ", thickness,
             " of the surface (smallest usable thickness is ", dist.minCoeff(), ")"));
  if (static_cast<int>(shell.size()) == mesh.num_tets())
    warn("shell thickness covers every element; no design freedom remains");
  return shell;
}

namespace {

Eigen::VectorXd dijkstra_impl(const TetMesh& mesh, int source, const std::vector<int>* targets) {
  const int s = mesh.num_surface_nodes();
  const int src = mesh.surface_ordinal.at(source);
  if (src < 0) fail(cat("geodesic_distances: node ", source, " is not on the surface"));

  Eigen::VectorXd dist = Eigen::VectorXd::Constant(s, std::numeric_limits<double>::infinity());
  std::vector<char> done(s, 0);
  int remaining = -1;
  std::vector<char> wanted;
  if (targets) {
    wanted.assign(s, 0);
    remaining = 0;
    for (int t : *targets) {
      const int o = mesh.surface_ordinal.at(t);
      if (o < 0) fail(cat("geodesic_distances: target ", t, " is not on the surface"));
      if (!wanted[o]) ++remaining;
      wanted[o] = 1;
    }
  }

  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[src] = 0.0;
  pq.emplace(0.0, src);
  while (!pq.empty()) {
    const auto [d, u] = pq.top();
    pq.pop();
    if (done[u]) continue;
    done[u] = 1;
    if (targets && wanted[u] && --remaining == 0) break;
    const Vec3 pu = mesh.nodes.row(mesh.surface_nodes[u]);
    for (int v : mesh.surface_node_edges[u]) {
      if (done[v]) continue;
      const double w = (Vec3(mesh.nodes.row(mesh.surface_nodes[v])) - pu).norm();
      if (d + w < dist[v]) {
        dist[v] = d + w;
        pq.emplace(dist[v], v);
      }
    }
  }
  return dist;
}

}  // namespace

Eigen::VectorXd geodesic_distances(const TetMesh& mesh, int source) {
  return dijkstra_impl(mesh, source, nullptr);
}

Eigen::VectorXd geodesic_distances_to(const TetMesh& mesh, int source,
                                      const std::vector<int>& targets) {
  return dijkstra_impl(mesh, source, &targets);
}

std::vector<int> sample_contact_nodes(const TetMesh& mesh, const std::vector<int>& contact,
                                      int count, std::uint64_t seed) {
  if (contact.empty()) fail("sample_contact_nodes: empty contact set");
  if (count < 1 || count > static_cast<int>(contact.size()))
    fail(cat("sample_contact_nodes: count ", count, " outside [1, ", contact.size(), "]"));
  std::vector<int> sorted_contact = contact;
  std::sort(sorted_contact.begin(), sorted_contact.end());
  sorted_contact.erase(std::unique(sorted_contact.begin(), sorted_contact.end()), sorted_contact.end());
  for (int idx : sorted_contact)
    if (!mesh.is_surface_node(idx)) fail(cat("sample_contact_nodes: node ", idx, " not on surface"));
  if (count == static_cast<int>(sorted_contact.size())) return sorted_contact;

  int start = sorted_contact.front();
  if (seed != 0) {
    std::mt19937_64 rng(seed);
    start = sorted_contact[rng() % sorted_contact.size()];
  }

  // Distances from a center, cached across k-means sweeps.
  std::unordered_map<int, Eigen::VectorXd> dist_cache;
  auto dist_from = [&](int center) -> const Eigen::VectorXd& {
    auto it = dist_cache.find(center);
    if (it == dist_cache.end()) it = dist_cache.emplace(center, geodesic_distances(mesh, center)).first;
    return it->second;
  };

  // Farthest-first traversal.
  std::vector<int> centers{start};
  Eigen::VectorXd dmin = dist_from(start);
  while (static_cast<int>(centers.size()) < count) {
    // sorted_contact is ascending, so strict > keeps the lowest index on ties.
    int best = -1;
    double best_d = -1.0;
    for (int idx : sorted_contact) {
      const double d = dmin[mesh.surface_ordinal[idx]];
      if (d > best_d) {
        best_d = d;
        best = idx;
      }
    }
    centers.push_back(best);
    dmin = dmin.cwiseMin(dist_from(best));
  }

  // Lloyd sweeps with geodesic 1-median updates, lowest-index tie-breaks.
  for (int sweep = 0; sweep < 20; ++sweep) {
    std::vector<std::vector<int>> clusters(centers.size());
    for (int idx : sorted_contact) {
      const int ord = mesh.surface_ordinal[idx];
      int best_c = 0;
      double best_d = dist_from(centers[0])[ord];
      for (std::size_t c = 1; c < centers.size(); ++c) {
        const double d = dist_from(centers[c])[ord];
        if (d < best_d - 1e-15 ||
            (std::abs(d - best_d) <= 1e-15 && centers[c] < centers[best_c])) {
          best_d = d;
          best_c = static_cast<int>(c);
        }
      }
      clusters[best_c].push_back(idx);
    }
    std::vector<int> next(centers.size());
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      if (clusters[c].empty()) {  // keep the old center alive
        next[c] = centers[c];
        continue;
      }
      int best = -1;
      double best_sum = std::numeric_limits<double>::infinity();
      for (int cand : clusters[c]) {
        const Eigen::VectorXd d = geodesic_distances_to(mesh, cand, clusters[c]);
        double sum = 0.0;
        for (int member : clusters[c]) sum += d[mesh.surface_ordinal[member]];
        if (sum < best_sum - 1e-12 || (std::abs(sum - best_sum) <= 1e-12 && cand < best)) {
          best_sum = sum;
          best = cand;
        }
      }
      next[c] = best;
    }
    if (next == centers) break;
    centers = std::move(next);
  }

  std::sort(centers.begin(), centers.end());
  centers.erase(std::unique(centers.begin(), centers.end()), centers.end());
  // Collapsed duplicates would under-fill the sample; refill farthest-first.
  while (static_cast<int>(centers.size()) < count) {
    Eigen::VectorXd dmin2 = dist_from(centers[0]);
    for (std::size_t c = 1; c < centers.size(); ++c) dmin2 = dmin2.cwiseMin(dist_from(centers[c]));
    int best = -1;
    double best_d = -1.0;
    for (int idx : sorted_contact) {
      if (std::binary_search(centers.begin(), centers.end(), idx)) continue;
      const double d = dmin2[mesh.surface_ordinal[idx]];
      if (d > best_d) {
        best_d = d;
        best = idx;
      }
    }
    centers.insert(std::lower_bound(centers.begin(), centers.end(), best), best);
  }
  return centers;
}

GraphLaplacian build_laplacian(LaplacianKind kind, const TetMesh& mesh) {
  std::vector<Eigen::Triplet<double>> trip;
  int dim = 0;
  if (kind == LaplacianKind::SurfaceNodes) {
    dim = mesh.num_surface_nodes();
    Eigen::VectorXd degree = Eigen::VectorXd::Zero(dim);
    for (int u = 0; u < dim; ++u) {
      for (int v : mesh.surface_node_edges[u]) {
        if (v <= u) continue;
        trip.emplace_back(u, v, -1.0);
        trip.emplace_back(v, u, -1.0);
        degree[u] += 1.0;
        degree[v] += 1.0;
      }
    }
    for (int u = 0; u < dim; ++u) trip.emplace_back(u, u, degree[u]);
  } else {
    dim = mesh.num_tets();
    Eigen::VectorXd degree = Eigen::VectorXd::Zero(dim);
    for (int e = 0; e < dim; ++e) {
      for (int f : mesh.tet_neighbors[e]) {
        if (f <= e) continue;
        trip.emplace_back(e, f, -1.0);
        trip.emplace_back(f, e, -1.0);
        degree[e] += 1.0;
        degree[f] += 1.0;
      }
    }
    for (int e = 0; e < dim; ++e) trip.emplace_back(e, e, degree[e]);
  }
  GraphLaplacian lap{kind, Eigen::SparseMatrix<double>(dim, dim)};
  lap.matrix.setFromTriplets(trip.begin(), trip.end());
  lap.matrix.makeCompressed();
  return lap;
}

}  // namespace anyload
