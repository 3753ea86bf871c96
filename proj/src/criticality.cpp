#include "anyload/criticality.hpp"

#include "anyload/common.hpp"
#include "anyload/eigensolver.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <unordered_map>
#include <unordered_set>

namespace anyload {

CriticalityContext::CriticalityContext(const TetMesh& mesh, const RegionSpec& regions,
                                       const MaterialModel& material, double force_budget,
                                       double patch_radius)
    : mesh_(&mesh), regions_(&regions), material_(material), force_budget_(force_budget),
      patch_radius_(patch_radius) {
  if (regions.contact_nodes.empty()) fail("criticality: empty contact region");
  contact_nodes_ = regions.contact_nodes;
  std::sort(contact_nodes_.begin(), contact_nodes_.end());
  contact_nodes_.erase(std::unique(contact_nodes_.begin(), contact_nodes_.end()),
                       contact_nodes_.end());
  contact_index_.assign(mesh.num_surface_nodes(), -1);
  instants_.reserve(contact_nodes_.size());
  for (std::size_t i = 0; i < contact_nodes_.size(); ++i) {
    const int node = contact_nodes_[i];
    if (!mesh.is_surface_node(node)) fail(cat("criticality: contact node ", node, " not on surface"));
    contact_index_[mesh.surface_ordinal[node]] = static_cast<int>(i);
    instants_.push_back(build_force_instant(mesh, node, force_budget, patch_radius));
  }
}

int CriticalityContext::contact_index(int node) const {
  if (!mesh_->is_surface_node(node)) return -1;
  return contact_index_[mesh_->surface_ordinal[node]];
}

const ForceInstant& CriticalityContext::instant(int contact_node) const {
  const int idx = contact_index(contact_node);
  if (idx < 0) fail(cat("criticality: node ", contact_node, " is not a contact node"));
  return instants_[idx];
}

const Eigen::MatrixXd& CriticalityContext::surface_basis(int q) {
  const int s = mesh_->num_surface_nodes();
  if (q < 1 || q > s) fail(cat("criticality: surface basis size ", q, " out of range"));
  if (psi_.cols() < q) {
    const GraphLaplacian lap = build_laplacian(LaplacianKind::SurfaceNodes, *mesh_);
    const EigsResult eig =
        smallest_eigenpairs(lap.matrix, Eigen::VectorXd::Ones(s), q, EigsOptions{});
    psi_ = eig.vectors;
  }
  // Callers receive the full cache; they use leftCols(q).
  return psi_;
}

const std::vector<int>& CriticalityContext::samples(int count, std::uint64_t seed) {
  const auto key = std::make_pair(count, seed);
  auto it = sample_cache_.find(key);
  if (it == sample_cache_.end())
    it = sample_cache_.emplace(key, sample_contact_nodes(*mesh_, contact_nodes_, count, seed)).first;
  return it->second;
}

int default_sample_count(int contact_size) {
  return std::max(3, static_cast<int>(std::ceil(0.05 * contact_size)));
}

int default_basis_size(int sample_count) {
  // Largest q whose quadratic feature count stays within the sample count;
  // the ridge keeps the square fit stable and the extra force-space
  // resolution pays for itself in criticality-map accuracy.
  const double budget = std::max(10.0, static_cast<double>(sample_count));
  int q = 1;
  while (q < 16 && ((q + 1) * (q + 1) + 3 * (q + 1) + 2) / 2 <= budget) ++q;
  return q;
}

Eigen::VectorXd CriticalityModel::features(const Eigen::VectorXd& z) const {
  Eigen::VectorXd f(feature_dim());
  f[0] = 1.0;
  f.segment(1, q) = z;
  int idx = 1 + q;
  for (int i = 0; i < q; ++i)
    for (int j = i; j < q; ++j) f[idx++] = z[i] * z[j];
  return f;
}

CriticalityModel train_criticality_model(CriticalityContext& ctx, const FemSystem& system,
                                         const TrainParams& params) {
  const TetMesh& mesh = ctx.mesh();
  const int contact_size = static_cast<int>(ctx.contact_nodes().size());
  const int l = params.l > 0 ? params.l : default_sample_count(contact_size);
  const int q = params.q > 0 ? params.q : default_basis_size(l);
  if (l < 3) fail("train_criticality_model: need at least 3 samples");
  if (l > contact_size) fail(cat("train_criticality_model: l=", l, " exceeds contact size"));

  CriticalityModel model;
  model.q = q;
  model.sample_nodes = ctx.samples(l, params.seed);
  if (model.feature_dim() > l)
    warn(cat("surrogate features (", model.feature_dim(), ") exceed training samples (", l,
             "); fit is interpolatory"));

  const int s = mesh.num_surface_nodes();
  const int m = mesh.num_tets();

  Eigen::MatrixXd rows(l, s);
  Eigen::MatrixXd stresses(l, m);
  model.sample_criticality.resize(l);
  for (int i = 0; i < l; ++i) {
    const ForceInstant& instant = ctx.instant(model.sample_nodes[i]);
    rows.row(i) = magnitude_row(instant, mesh).transpose();
    const Eigen::VectorXd f = assemble_rhs(instant, mesh, ctx.regions().fixed_nodes);
    const Eigen::VectorXd u = system.solve(f);
    stresses.row(i) = recover_stress(system, u).von_mises.transpose();
    model.sample_criticality[i] = stresses.row(i).maxCoeff();
  }

  model.mean_row = rows.colwise().mean().transpose();
  model.mean_stress = stresses.colwise().mean().transpose();
  Eigen::MatrixXd F = rows.rowwise() - model.mean_row.transpose();
  Eigen::MatrixXd T = stresses.rowwise() - model.mean_stress.transpose();

  model.psi = ctx.surface_basis(q).leftCols(q);

  // Stress principal vectors via the Gram matrix; zero-variance directions
  // are filled with a deterministic orthonormal complement so the basis
  // keeps exactly l-1 orthonormal columns.
  const int pcs = std::min(l - 1, m);
  if (pcs < l - 1)
    warn(cat("stress PCA truncated to ", pcs, " components (mesh has only ", m, " elements)"));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> gram(T * T.transpose());
  if (gram.info() != Eigen::Success) fail("train_criticality_model: PCA eigensolve failed");
  model.phi.resize(m, pcs);
  const double sigma_max = std::sqrt(std::max(gram.eigenvalues().maxCoeff(), 0.0));
  int filled = 0;
  for (int c = 0; c < pcs; ++c) {
    const int src = l - 1 - c;  // descending variance
    const double sv = std::sqrt(std::max(gram.eigenvalues()[src], 0.0));
    if (sv > std::max(1e-12 * sigma_max, 1e-300)) {
      model.phi.col(c) = T.transpose() * gram.eigenvectors().col(src) / sv;
      ++filled;
    } else {
      break;
    }
  }
  for (int c = filled; c < pcs; ++c) {
    // Gram-Schmidt a unit vector against everything already present.
    Eigen::VectorXd v = Eigen::VectorXd::Zero(m);
    for (int cand = 0; cand < m; ++cand) {
      v.setZero();
      v[cand] = 1.0;
      for (int j = 0; j < c; ++j) v -= model.phi.col(j).dot(v) * model.phi.col(j);
      if (v.norm() > 0.5) break;
    }
    model.phi.col(c) = v.normalized();
  }

  const Eigen::MatrixXd T_L = T * model.phi;       // l x pcs
  const Eigen::MatrixXd Z = F * model.psi;         // l x q
  Eigen::MatrixXd features(l, model.feature_dim());
  for (int i = 0; i < l; ++i) features.row(i) = model.features(Z.row(i).transpose()).transpose();

  const Eigen::MatrixXd normal = features.transpose() * features;
  const double diag_mean = normal.trace() / normal.rows();
  double ridge = params.ridge >= 0 ? params.ridge : 1e-6 * diag_mean;

  const Eigen::MatrixXd rhs = features.transpose() * T_L;
  for (int attempt = 0;; ++attempt) {
    Eigen::MatrixXd lhs = normal;
    lhs.diagonal().array() += ridge;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(lhs);
    const auto& d = ldlt.vectorD();
    const double dmin = d.minCoeff(), dmax = d.maxCoeff();
    if (ldlt.info() == Eigen::Success && dmin > 1e-14 * std::max(dmax, 1e-300)) {
      model.W = ldlt.solve(rhs);
      model.ridge = ridge;
      break;
    }
    if (attempt >= 3) fail("train_criticality_model: normal equations rank-deficient despite ridge escalation");
    ridge = std::max(ridge * 10.0, 1e-12 * std::max(diag_mean, 1e-300));
    warn(cat("surrogate normal equations ill-conditioned; ridge raised to ", ridge));
  }
  return model;
}

namespace {

Eigen::VectorXd project_features(const CriticalityModel& model, const ForceInstant& instant,
                                 const TetMesh& mesh) {
  const Eigen::VectorXd row = magnitude_row(instant, mesh);
  const Eigen::VectorXd z = model.psi.transpose() * (row - model.mean_row);
  return model.features(z);
}

}  // namespace

Eigen::VectorXd predict_stress(const CriticalityModel& model, const ForceInstant& instant,
                               const TetMesh& mesh) {
  const Eigen::VectorXd weights = model.W.transpose() * project_features(model, instant, mesh);
  return model.mean_stress + model.phi * weights;
}

double predict_criticality(const CriticalityModel& model, const ForceInstant& instant,
                           const TetMesh& mesh) {
  return std::max(predict_stress(model, instant, mesh).maxCoeff(), 0.0);
}

Eigen::VectorXd predict_criticality_all(const CriticalityModel& model, CriticalityContext& ctx) {
  const auto& contact = ctx.contact_nodes();
  const int count = static_cast<int>(contact.size());
  Eigen::MatrixXd weights(count, model.phi.cols());
  for (int i = 0; i < count; ++i)
    weights.row(i) =
        (model.W.transpose() * project_features(model, ctx.instant(contact[i]), ctx.mesh()))
            .transpose();

  // Chunked so the dense predicted-field block stays small.
  Eigen::VectorXd crit(count);
  const int chunk = 256;
  for (int begin = 0; begin < count; begin += chunk) {
    const int rows = std::min(chunk, count - begin);
    const Eigen::MatrixXd fields =
        (weights.middleRows(begin, rows) * model.phi.transpose()).rowwise() +
        model.mean_stress.transpose();
    for (int r = 0; r < rows; ++r) crit[begin + r] = std::max(fields.row(r).maxCoeff(), 0.0);
  }
  return crit;
}

ForceRegions extract_force_regions(const CriticalityModel& model, CriticalityContext& ctx) {
  ForceRegions out;
  out.criticality = predict_criticality_all(model, ctx);
  const auto& contact = ctx.contact_nodes();
  const int count = static_cast<int>(contact.size());
  const int keep = static_cast<int>(std::ceil(0.1 * count));

  std::vector<int> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (out.criticality[a] != out.criticality[b]) return out.criticality[a] > out.criticality[b];
    return contact[a] < contact[b];
  });
  out.selected.reserve(keep);
  for (int i = 0; i < keep; ++i) out.selected.push_back(contact[order[i]]);
  std::sort(out.selected.begin(), out.selected.end());

  // Surface-connected components within the selected set.
  const TetMesh& mesh = ctx.mesh();
  std::unordered_set<int> pool(out.selected.begin(), out.selected.end());
  std::unordered_set<int> visited;
  for (int start : out.selected) {
    if (visited.count(start)) continue;
    std::vector<int> island;
    std::queue<int> frontier;
    frontier.push(start);
    visited.insert(start);
    while (!frontier.empty()) {
      const int node = frontier.front();
      frontier.pop();
      island.push_back(node);
      for (int nb_ord : mesh.surface_node_edges[mesh.surface_ordinal[node]]) {
        const int nb = mesh.surface_nodes[nb_ord];
        if (pool.count(nb) && !visited.count(nb)) {
          visited.insert(nb);
          frontier.push(nb);
        }
      }
    }
    std::sort(island.begin(), island.end());
    out.islands.push_back(std::move(island));
  }
  std::sort(out.islands.begin(), out.islands.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return out;
}

WeakRegions compute_weak_regions(CriticalityContext& ctx, const FemSystem& system, int num_modes,
                                 double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) fail("compute_weak_regions: fraction outside (0,1]");
  const TetMesh& mesh = ctx.mesh();
  const ModalResult modal = modal_analysis(system, num_modes);

  const int n = mesh.num_nodes();
  const int keep = std::min(n, static_cast<int>(std::ceil(fraction * n)));
  WeakRegions out;
  std::unordered_set<int> all_nodes;
  for (int j = 0; j < modal.modes.cols(); ++j) {
    const StressField pseudo = recover_stress(system, modal.modes.col(j));
    Eigen::VectorXd node_score = Eigen::VectorXd::Zero(n);
    for (int e = 0; e < mesh.num_tets(); ++e)
      for (int v = 0; v < 4; ++v) {
        const int node = mesh.tets(e, v);
        node_score[node] = std::max(node_score[node], pseudo.von_mises[e]);
      }
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (node_score[a] != node_score[b]) return node_score[a] > node_score[b];
      return a < b;
    });
    std::vector<int> mode_sel(order.begin(), order.begin() + keep);
    std::sort(mode_sel.begin(), mode_sel.end());
    all_nodes.insert(mode_sel.begin(), mode_sel.end());
    out.mode_nodes.push_back(std::move(mode_sel));
  }

  std::unordered_set<int> elems;
  for (int node : all_nodes)
    for (int e : mesh.node_tets[node]) elems.insert(e);
  out.elements.assign(elems.begin(), elems.end());
  std::sort(out.elements.begin(), out.elements.end());
  if (out.elements.empty()) fail("compute_weak_regions: empty weak region");
  return out;
}

namespace {

double wr_max(const StressField& field, const std::vector<int>& wr) {
  double best = 0.0;
  for (int e : wr) best = std::max(best, field.von_mises[e]);
  return best;
}

// Deterministic k-means (k <= 4) on node coordinates: farthest-first init
// from the lowest id, mean-coordinate centroids, lowest-id tie-breaks.
// Returns segments sorted by their smallest node id.
std::vector<std::vector<int>> partition_segment(const TetMesh& mesh, const std::vector<int>& nodes,
                                                int k) {
  std::vector<Vec3> pts(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) pts[i] = mesh.nodes.row(nodes[i]);

  std::vector<int> center_idx{0};  // nodes is sorted, so index 0 is the lowest id
  while (static_cast<int>(center_idx.size()) < k) {
    int best = -1;
    double best_d = -1.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      double dmin = std::numeric_limits<double>::infinity();
      for (int c : center_idx) dmin = std::min(dmin, (pts[i] - pts[c]).squaredNorm());
      if (dmin > best_d) {
        best_d = dmin;
        best = static_cast<int>(i);
      }
    }
    center_idx.push_back(best);
  }
  std::vector<Vec3> centers;
  for (int c : center_idx) centers.push_back(pts[c]);

  std::vector<int> assign(nodes.size(), 0);
  for (int sweep = 0; sweep < 20; ++sweep) {
    bool changed = false;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      int best = 0;
      double best_d = (pts[i] - centers[0]).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double d = (pts[i] - centers[c]).squaredNorm();
        if (d < best_d - 1e-15) {
          best_d = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    for (int c = 0; c < k; ++c) {
      Vec3 mean = Vec3::Zero();
      int count = 0;
      for (std::size_t i = 0; i < nodes.size(); ++i)
        if (assign[i] == c) {
          mean += pts[i];
          ++count;
        }
      if (count > 0) centers[c] = mean / count;
    }
    if (!changed) break;
  }

  std::vector<std::vector<int>> segments(k);
  for (std::size_t i = 0; i < nodes.size(); ++i) segments[assign[i]].push_back(nodes[i]);
  segments.erase(std::remove_if(segments.begin(), segments.end(),
                                [](const auto& s) { return s.empty(); }),
                 segments.end());
  std::sort(segments.begin(), segments.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return segments;
}

int central_node(const TetMesh& mesh, const std::vector<int>& segment) {
  Vec3 centroid = Vec3::Zero();
  for (int node : segment) centroid += Vec3(mesh.nodes.row(node));
  centroid /= static_cast<double>(segment.size());
  int best = segment.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (int node : segment) {
    const double d = (Vec3(mesh.nodes.row(node)) - centroid).squaredNorm();
    if (d < best_d - 1e-15) {
      best_d = d;
      best = node;
    }
  }
  return best;
}

}  // namespace

CriticalInstantResult hierarchical_search(CriticalityContext& ctx, const FemSystem& system,
                                          const ForceRegions& frs, const WeakRegions& wrs,
                                          const std::vector<int>& extra_seeds) {
  const TetMesh& mesh = ctx.mesh();
  CriticalInstantResult result;

  std::unordered_map<int, double> cache;  // node -> weak-region max
  int best_node = -1;
  double best_val = -1.0;
  Eigen::VectorXd best_u;
  int island_id = 0;

  auto evaluate = [&](int node) {
    auto it = cache.find(node);
    if (it != cache.end()) {
      result.trace.push_back({island_id, node, it->second});
      return it->second;
    }
    const Eigen::VectorXd f = assemble_rhs(ctx.instant(node), mesh, ctx.regions().fixed_nodes);
    const Eigen::VectorXd u = system.solve(f);
    const StressField field = recover_stress(system, u);
    const double val = wr_max(field, wrs.elements);
    ++result.fea_count;
    cache.emplace(node, val);
    result.trace.push_back({island_id, node, val});
    if (val > best_val || (val == best_val && node < best_node)) {
      best_val = val;
      best_node = node;
      best_u = u;
    }
    return val;
  };

  for (const auto& island : frs.islands) {
    if (island.empty()) {
      warn("hierarchical_search: empty island skipped");
      continue;
    }
    // Seed with the island's top estimated instants; the descent alone can
    // commit to the wrong quarter when the stress varies sharply across an
    // island (edge nodes concentrate contact pressure).
    std::vector<int> by_crit = island;
    std::sort(by_crit.begin(), by_crit.end(), [&](int a, int b) {
      const double ca = frs.criticality[ctx.contact_index(a)];
      const double cb = frs.criticality[ctx.contact_index(b)];
      if (ca != cb) return ca > cb;
      return a < b;
    });
    for (std::size_t i = 0; i < std::min<std::size_t>(3, by_crit.size()); ++i)
      evaluate(by_crit[i]);

    std::vector<int> segment = island;
    while (segment.size() > 1) {
      if (segment.size() <= 4) {
        for (int node : segment) evaluate(node);
        break;
      }
      const auto parts = partition_segment(mesh, segment, 4);
      int best_part = -1;
      double best_part_val = -1.0;
      for (std::size_t p = 0; p < parts.size(); ++p) {
        const double val = evaluate(central_node(mesh, parts[p]));
        if (val > best_part_val) {
          best_part_val = val;
          best_part = static_cast<int>(p);
        }
      }
      segment = parts[best_part];
    }
    if (segment.size() == 1) evaluate(segment.front());

    // Local ascent within the island from the best node seen so far.
    std::unordered_set<int> members(island.begin(), island.end());
    bool improved = true;
    while (improved) {
      improved = false;
      const int current = best_node;
      if (!members.count(current)) break;  // best lives in another island
      for (int nb_ord : mesh.surface_node_edges[mesh.surface_ordinal[current]]) {
        const int nb = mesh.surface_nodes[nb_ord];
        if (!members.count(nb) || cache.count(nb)) continue;
        evaluate(nb);
      }
      improved = best_node != current;
    }
    ++island_id;
  }

  // Exactly-evaluated anchors (training samples) may sit outside every
  // island; climb from each over the whole contact set.
  island_id = -1;
  for (int seed : extra_seeds) {
    if (ctx.contact_index(seed) < 0) continue;
    int current = seed;
    evaluate(current);
    for (;;) {
      int next = current;
      double next_val = cache.at(current);
      for (int nb_ord : mesh.surface_node_edges[mesh.surface_ordinal[current]]) {
        const int nb = mesh.surface_nodes[nb_ord];
        if (ctx.contact_index(nb) < 0) continue;
        const double val = cache.count(nb) ? cache.at(nb) : evaluate(nb);
        if (val > next_val) {
          next_val = val;
          next = nb;
        }
      }
      if (next == current) break;
      current = next;
    }
  }

  if (best_node < 0) fail("hierarchical_search: no instants evaluated");
  result.critical_node = best_node;
  result.displacement = best_u;
  result.stress = recover_stress(system, best_u);
  result.sigma_wr = wr_max(result.stress, wrs.elements);
  result.sigma_all = result.stress.von_mises.maxCoeff();
  result.sigma_cr = result.sigma_wr;
  return result;
}

CriticalInstantResult brute_force_oracle(CriticalityContext& ctx, const FemSystem& system,
                                         const WeakRegions* wrs) {
  const TetMesh& mesh = ctx.mesh();
  const auto& contact = ctx.contact_nodes();
  CriticalInstantResult result;
  result.true_criticality.resize(static_cast<int>(contact.size()));

  int best = -1;
  double best_val = -1.0;
  Eigen::VectorXd best_u;
  for (std::size_t i = 0; i < contact.size(); ++i) {
    const Eigen::VectorXd f = assemble_rhs(ctx.instant(contact[i]), mesh, ctx.regions().fixed_nodes);
    const Eigen::VectorXd u = system.solve(f);
    const StressField field = recover_stress(system, u);
    const double val = field.von_mises.maxCoeff();
    result.true_criticality[static_cast<int>(i)] = val;
    ++result.fea_count;
    if (val > best_val) {
      best_val = val;
      best = contact[i];
      best_u = u;
    }
  }
  result.critical_node = best;
  result.displacement = best_u;
  result.stress = recover_stress(system, best_u);
  result.sigma_all = result.stress.von_mises.maxCoeff();
  result.sigma_wr = wrs ? wr_max(result.stress, wrs->elements) : 0.0;
  result.sigma_cr = result.sigma_all;
  return result;
}

AnalysisResult run_critical_instant_analysis(CriticalityContext& ctx,
                                             const ElementDataSet& elements,
                                             const DensityField& density,
                                             const AnalysisParams& params) {
  AnalysisResult out;
  out.system = std::make_shared<FemSystem>(ctx.mesh(), elements, ctx.regions().fixed_nodes, density);
  const long solves_before = out.system->counters().back_substitutions;
  out.model = train_criticality_model(ctx, *out.system, params.train);
  out.training_feas = static_cast<int>(out.system->counters().back_substitutions - solves_before);
  out.force_regions = extract_force_regions(out.model, ctx);
  out.weak_regions = compute_weak_regions(ctx, *out.system, params.wr_modes, params.wr_fraction);
  std::vector<int> anchors(out.model.sample_nodes.size());
  std::iota(anchors.begin(), anchors.end(), 0);
  std::sort(anchors.begin(), anchors.end(), [&](int a, int b) {
    return out.model.sample_criticality[a] > out.model.sample_criticality[b];
  });
  std::vector<int> seeds;
  for (std::size_t i = 0; i < std::min<std::size_t>(3, anchors.size()); ++i)
    seeds.push_back(out.model.sample_nodes[anchors[i]]);
  out.critical = hierarchical_search(ctx, *out.system, out.force_regions, out.weak_regions, seeds);
  out.search_feas = out.critical.fea_count;
  return out;
}

}  // namespace anyload
