#pragma once

#include "anyload/fem.hpp"
#include "anyload/loadcase.hpp"
#include "anyload/mesh.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <vector>

namespace anyload {

/// Geometry shared by every analysis step of a run: prebuilt force instants
/// for all contact nodes, the surface-Laplacian basis, and cached sample
/// sets. Everything here depends on the mesh and regions only, never on the
/// density, so one context serves a whole optimization.
class CriticalityContext {
 public:
  CriticalityContext(const TetMesh& mesh, const RegionSpec& regions,
                     const MaterialModel& material, double force_budget, double patch_radius);

  const TetMesh& mesh() const { return *mesh_; }
  const RegionSpec& regions() const { return *regions_; }
  const MaterialModel& material() const { return material_; }
  double force_budget() const { return force_budget_; }
  double patch_radius() const { return patch_radius_; }

  const std::vector<int>& contact_nodes() const { return contact_nodes_; }  // sorted
  int contact_index(int node) const;  // position in contact_nodes(), -1 if absent
  const ForceInstant& instant(int contact_node) const;

  /// First q eigenvectors of the surface graph Laplacian (s x q, ascending
  /// eigenvalues). Grown lazily and cached.
  const Eigen::MatrixXd& surface_basis(int q);

  /// Cached sample_contact_nodes result for (count, seed).
  const std::vector<int>& samples(int count, std::uint64_t seed);

 private:
  const TetMesh* mesh_;
  const RegionSpec* regions_;
  MaterialModel material_;
  double force_budget_, patch_radius_;
  std::vector<int> contact_nodes_;
  std::vector<int> contact_index_;  // per surface ordinal, -1 if not contact
  std::vector<ForceInstant> instants_;
  Eigen::MatrixXd psi_;
  std::map<std::pair<int, std::uint64_t>, std::vector<int>> sample_cache_;
};

/// Defaults: 5% of the contact nodes as training samples; the largest q whose
/// quadratic feature count stays within max(10, l/2), capped at 16.
int default_sample_count(int contact_size);
int default_basis_size(int sample_count);

struct TrainParams {
  int l = 0;            // 0 = default_sample_count
  int q = 0;            // 0 = default_basis_size
  double ridge = -1.0;  // < 0 = 1e-6 * mean diagonal of the normal matrix
  std::uint64_t seed = 0;
};

/// Quadratic map from spread contact forces to stress fields: force
/// magnitude rows are projected on the surface-Laplacian basis, stress
/// fields on their principal components, and a ridge-regularized quadratic
/// regression links the two.
struct CriticalityModel {
  std::vector<int> sample_nodes;
  Eigen::VectorXd sample_criticality;  // exact all-element max per sample
  Eigen::MatrixXd psi;          // s x q
  Eigen::VectorXd mean_row;     // s
  Eigen::MatrixXd phi;          // m x (l-1), orthonormal columns
  Eigen::VectorXd mean_stress;  // m
  Eigen::MatrixXd W;            // feature_dim x (l-1)
  double ridge = 0.0;
  int q = 0;

  int feature_dim() const { return (q * q + 3 * q + 2) / 2; }
  /// [1, z, upper-triangular z (x) z] for a projected row z.
  Eigen::VectorXd features(const Eigen::VectorXd& z) const;
};

/// Fits the surrogate with exactly params.l back-substitutions against the
/// supplied factorization.
CriticalityModel train_criticality_model(CriticalityContext& ctx, const FemSystem& system,
                                         const TrainParams& params = {});

/// Estimated von Mises field for one instant (length m).
Eigen::VectorXd predict_stress(const CriticalityModel& model, const ForceInstant& instant,
                               const TetMesh& mesh);
/// Estimated criticality: max of the predicted field over all elements,
/// clamped to be nonnegative.
double predict_criticality(const CriticalityModel& model, const ForceInstant& instant,
                           const TetMesh& mesh);
/// Criticality for every contact node, aligned with ctx.contact_nodes().
Eigen::VectorXd predict_criticality_all(const CriticalityModel& model, CriticalityContext& ctx);

/// Connected high-criticality islands of the contact region.
struct ForceRegions {
  std::vector<std::vector<int>> islands;  // global node ids, each sorted
  std::vector<int> selected;              // union of islands, sorted
  Eigen::VectorXd criticality;            // per contact node
};

/// Top decile of the contact nodes by estimated criticality (ties keep the
/// lower node id), split into surface-connected islands.
ForceRegions extract_force_regions(const CriticalityModel& model, CriticalityContext& ctx);

/// Elements likely to carry the stress maximum, from low vibration modes.
struct WeakRegions {
  std::vector<int> elements;                  // sorted element ids
  std::vector<std::vector<int>> mode_nodes;   // selected nodes per mode
};

/// Pseudo-stresses of the first num_modes vibration modes; per mode, the top
/// `fraction` of nodes by incident-element von Mises; union over modes; the
/// region is every element incident to a selected node.
WeakRegions compute_weak_regions(CriticalityContext& ctx, const FemSystem& system,
                                 int num_modes = 15, double fraction = 0.025);

struct SearchTraceEntry {
  int island = 0;
  int node = -1;
  double stress = 0.0;  // von Mises max over the weak region
};

struct CriticalInstantResult {
  int critical_node = -1;
  double sigma_cr = 0.0;   // headline stress: weak-region max for the search,
                           // all-element max for the oracle
  double sigma_wr = 0.0;   // max over the weak region at the critical instant
  double sigma_all = 0.0;  // max over all elements at the critical instant
  Eigen::VectorXd displacement;
  StressField stress;
  int fea_count = 0;
  std::vector<SearchTraceEntry> trace;
  Eigen::VectorXd true_criticality;  // oracle only: exact per-contact-node map
};

/// Greedy 4-way descent per island: k-means split on node coordinates,
/// evaluate the node nearest each segment centroid, recurse into the best
/// segment, then hill-climb locally. extra_seeds (e.g. the exactly-evaluated
/// training samples) are climbed over the whole contact set. Solves are
/// cached, so each instant costs at most one back-substitution.
CriticalInstantResult hierarchical_search(CriticalityContext& ctx, const FemSystem& system,
                                          const ForceRegions& frs, const WeakRegions& wrs,
                                          const std::vector<int>& extra_seeds = {});

/// One solve per contact node; exact argmax of the all-element von Mises
/// maximum. Records the weak-region maximum too when regions are given.
CriticalInstantResult brute_force_oracle(CriticalityContext& ctx, const FemSystem& system,
                                         const WeakRegions* wrs = nullptr);

/// One full analysis step: train, extract force regions, compute weak
/// regions, search. Owns the factorization for the given density.
struct AnalysisParams {
  TrainParams train;
  int wr_modes = 15;
  double wr_fraction = 0.025;
};

struct AnalysisResult {
  std::shared_ptr<FemSystem> system;
  CriticalityModel model;
  ForceRegions force_regions;
  WeakRegions weak_regions;
  CriticalInstantResult critical;
  int training_feas = 0;
  int search_feas = 0;
  int analysis_feas() const { return training_feas + search_feas; }
};

AnalysisResult run_critical_instant_analysis(CriticalityContext& ctx,
                                             const ElementDataSet& elements,
                                             const DensityField& density,
                                             const AnalysisParams& params = {});

}  // namespace anyload
