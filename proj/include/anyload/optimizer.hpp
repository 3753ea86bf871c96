#pragma once

#include "anyload/criticality.hpp"
#include "anyload/reduction.hpp"

#include <functional>
#include <string>
#include <vector>

namespace anyload {

/// Smooth stand-in for the max: p-norm of von Mises over the weak region.
/// Always sandwiched between the max and max * |region|^(1/p).
struct AggregatedStress {
  double p = 15.0;
  double value = 0.0;   // MPa
  double max_vm = 0.0;  // exact max over the region
  int region_size = 0;
};

AggregatedStress aggregate_stress(const StressField& field, const std::vector<int>& region,
                                  double p);

/// Interior mass and its gradient in the reduced coordinates.
std::pair<double, Eigen::VectorXd> mass_and_gradient(const MaterialBasis& basis,
                                                     const LogisticMap& logistic,
                                                     const Eigen::VectorXd& alpha,
                                                     const Eigen::VectorXd& volumes);

/// Gradient of the aggregated stress for one load case via the adjoint
/// method: exactly one extra back-substitution on the supplied system. Pass
/// the already-solved displacement to avoid re-solving the load.
struct StressGradient {
  double H = 0.0;
  double max_vm = 0.0;
  int region_size = 0;
  Eigen::VectorXd dH_dalpha;
  bool degenerate = false;  // zero stress everywhere; gradient is zero
};

StressGradient adjoint_stress_gradient(const FemSystem& system, const MaterialBasis& basis,
                                       const LogisticMap& logistic, const Eigen::VectorXd& alpha,
                                       const ForceInstant& instant,
                                       const std::vector<int>& weak_elements, double p,
                                       const Eigen::VectorXd* u_solved = nullptr);

/// One linearized constraint for the step QP: value + gradient . d <= limit.
struct StepConstraint {
  double value = 0.0;
  double limit = 0.0;
  Eigen::VectorXd gradient;
};

/// One trust-region step: minimize the normalized mass model subject to the
/// linearized stress constraints, by active-set enumeration, clipped to the
/// ball of radius delta.
Eigen::VectorXd constrained_step(const Eigen::VectorXd& mass_gradient,
                                 const std::vector<StepConstraint>& constraints, double delta);

struct OptimizerConfig {
  double tol_mass = 1e-4;      // relative decrease under which an iteration counts as stalled
  int stall_iterations = 3;    // consecutive stalled accepts before termination
  int max_iters = 300;
  double trust_radius = 0.5;   // initial
  double trust_min = 1e-6;
  double trust_max = 64.0;
  double feas_tol = 0.01;      // accepted overshoot of the yield stress, relative
  double p_norm = 15.0;
  int constraint_cache = 3;    // distinct recent critical instants kept active
  AnalysisParams analysis;
};

struct IterationRecord {
  int iteration = 0;
  bool accepted = false;
  double mass = 0.0;          // mm^3, of the accepted design after this iteration
  double sigma_cr = 0.0;      // weak-region max at the critical instant (trial design)
  double sigma_all = 0.0;     // all-element max at the critical instant
  double H = 0.0;             // aggregated stress
  double pnorm_bound = 0.0;   // max * |region|^(1/p); H must stay below
  int wr_size = 0;
  int critical_node = -1;
  double trust_radius = 0.0;
  int analysis_feas = 0;      // training + search back-substitutions
  int oracle_equivalent = 0;  // contact size (brute-force cost for the same step)
};

struct OptimizationResult {
  bool feasible_start = true;
  bool converged = false;
  bool stalled = false;
  std::string verdict;  // PASS / FAIL / INFEASIBLE / SKIPPED
  Eigen::VectorXd alpha;
  DensityField density;
  DensityField density_binarized;
  double mass_initial = 0.0;
  double mass_final = 0.0;
  double mass_binarized = 0.0;
  int iterations = 0;
  std::vector<IterationRecord> history;
  CriticalInstantResult verification;  // brute force on the binarized design
  double verification_limit = 0.0;     // 1.05 * yield
};

using IterationCallback = std::function<void(const IterationRecord&)>;

/// Mass minimization under the worst-contact stress constraint, one design
/// update per analysis step. Starts fully solid (alpha = 0) and aborts if
/// that start already violates the yield stress. Ends with binarization and
/// a brute-force verification of the binarized design.
OptimizationResult optimize(CriticalityContext& ctx, const ElementDataSet& elements,
                            const MaterialBasis& basis, const LogisticMap& logistic,
                            const OptimizerConfig& config, const IterationCallback& on_iteration = {});

}  // namespace anyload
