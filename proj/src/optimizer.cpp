#include "anyload/optimizer.hpp"

#include "anyload/common.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace anyload {

AggregatedStress aggregate_stress(const StressField& field, const std::vector<int>& region,
                                  double p) {
  AggregatedStress out;
  out.p = p;
  out.region_size = static_cast<int>(region.size());
  if (region.empty()) return out;
  double max_vm = 0.0;
  for (int e : region) max_vm = std::max(max_vm, field.von_mises[e]);
  out.max_vm = max_vm;
  if (max_vm <= 0.0) return out;
  // Factor the max out of the sum so powers stay in range.
  double sum = 0.0;
  for (int e : region) sum += std::pow(field.von_mises[e] / max_vm, p);
  out.value = max_vm * std::pow(sum, 1.0 / p);
  return out;
}

std::pair<double, Eigen::VectorXd> mass_and_gradient(const MaterialBasis& basis,
                                                     const LogisticMap& logistic,
                                                     const Eigen::VectorXd& alpha,
                                                     const Eigen::VectorXd& volumes) {
  const DensityField rho = density_from_alpha(basis, logistic, alpha);
  if (volumes.size() != rho.size()) fail("mass_and_gradient: volume vector mismatch");
  const double mass = rho.dot(volumes);
  const Eigen::MatrixXd jac = density_jacobian(basis, logistic, alpha);
  return {mass, jac.transpose() * volumes};
}

StressGradient adjoint_stress_gradient(const FemSystem& system, const MaterialBasis& basis,
                                       const LogisticMap& logistic, const Eigen::VectorXd& alpha,
                                       const ForceInstant& instant,
                                       const std::vector<int>& weak_elements, double p,
                                       const Eigen::VectorXd* u_solved) {
  const TetMesh& mesh = system.mesh();
  const ElementDataSet& elements = system.elements();
  const MaterialModel& mat = elements.material();

  Eigen::VectorXd u;
  if (u_solved) {
    u = *u_solved;
  } else {
    u = system.solve(assemble_rhs(instant, mesh, system.fixed_nodes()));
  }
  const StressField field = recover_stress(system, u);
  const AggregatedStress agg = aggregate_stress(field, weak_elements, p);

  StressGradient out;
  out.H = agg.value;
  out.max_vm = agg.max_vm;
  out.region_size = agg.region_size;
  out.dH_dalpha = Eigen::VectorXd::Zero(basis.k());
  if (!(agg.value > 0.0)) {
    warn("adjoint_stress_gradient: zero stress over the weak region; gradient is zero");
    out.degenerate = true;
    return out;
  }

  // Weight per weak element: dH/d(vm_e) * d(vm_e)/d(sigma_e), a 6-vector.
  // Assemble the adjoint load sum_e (s_e C B)^T w_e along the way.
  const double pm1 = p - 1.0;
  Eigen::VectorXd adjoint_load = Eigen::VectorXd::Zero(system.num_dofs());
  std::vector<Eigen::Matrix<double, 6, 1>> weights(weak_elements.size());
  for (std::size_t i = 0; i < weak_elements.size(); ++i) {
    const int e = weak_elements[i];
    const double vm = field.von_mises[e];
    Eigen::Matrix<double, 6, 1>& w = weights[i];
    if (vm <= 0.0) {
      w.setZero();
      continue;
    }
    const double dH_dvm = std::pow(vm / agg.value, pm1);
    const auto s = field.sigma.row(e);
    Eigen::Matrix<double, 6, 1> dvm;
    dvm << 2.0 * s[0] - s[1] - s[2], 2.0 * s[1] - s[0] - s[2], 2.0 * s[2] - s[0] - s[1],
        6.0 * s[3], 6.0 * s[4], 6.0 * s[5];
    dvm /= 2.0 * vm;
    w = dH_dvm * dvm;

    const double scale = simp_scale(system.density()[e], mat);
    const Eigen::Matrix<double, 12, 1> contrib =
        scale * (elements[e].B.transpose() * (elements[e].C_solid.transpose() * w));
    for (int v = 0; v < 4; ++v)
      adjoint_load.segment<3>(3 * mesh.tets(e, v)) += contrib.segment<3>(3 * v);
  }

  const Eigen::VectorXd xi = system.solve(adjoint_load);  // the one extra back-substitution

  // dH/drho per element: the stiffness term touches every element through
  // xi, the direct stress term only the weak region.
  Eigen::VectorXd dH_drho = Eigen::VectorXd::Zero(mesh.num_tets());
  Eigen::Matrix<double, 12, 1> ue, xie;
  for (int e = 0; e < mesh.num_tets(); ++e) {
    for (int v = 0; v < 4; ++v) {
      ue.segment<3>(3 * v) = u.segment<3>(3 * mesh.tets(e, v));
      xie.segment<3>(3 * v) = xi.segment<3>(3 * mesh.tets(e, v));
    }
    const double ds = simp_scale_derivative(system.density()[e], mat);
    dH_drho[e] = -ds * xie.dot(elements[e].K_solid * ue);
  }
  for (std::size_t i = 0; i < weak_elements.size(); ++i) {
    const int e = weak_elements[i];
    for (int v = 0; v < 4; ++v) ue.segment<3>(3 * v) = u.segment<3>(3 * mesh.tets(e, v));
    const double ds = simp_scale_derivative(system.density()[e], mat);
    dH_drho[e] += ds * weights[i].dot(elements[e].C_solid * (elements[e].B * ue));
  }

  const Eigen::MatrixXd jac = density_jacobian(basis, logistic, alpha);
  out.dH_dalpha = jac.transpose() * dH_drho;
  return out;
}

Eigen::VectorXd constrained_step(const Eigen::VectorXd& mass_gradient,
                                 const std::vector<StepConstraint>& constraints, double delta) {
  const int k = static_cast<int>(mass_gradient.size());
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(k);
  if (!(delta > 0)) return zero;

  // Normalized rows: a . d <= b.
  std::vector<Eigen::VectorXd> a;
  std::vector<double> b;
  for (const auto& c : constraints) {
    const double norm = c.gradient.norm();
    if (norm < 1e-300) continue;  // no usable direction
    a.push_back(c.gradient / norm);
    b.push_back((c.limit - c.value) / norm);
  }
  const int nc = static_cast<int>(a.size());

  const double g_norm = mass_gradient.norm();
  if (g_norm < 1e-300) {
    bool feasible = true;
    for (int i = 0; i < nc; ++i) feasible = feasible && b[i] >= 0.0;
    if (feasible) return zero;  // KKT point
  }
  const Eigen::VectorXd ghat = g_norm > 1e-300 ? (mass_gradient / g_norm).eval() : zero;

  // Objective ghat . d + |d|^2 / (2 delta); enumerate active sets.
  Eigen::VectorXd best_d;
  double best_obj = std::numeric_limits<double>::infinity();
  for (int mask = 0; mask < (1 << nc); ++mask) {
    std::vector<int> act;
    for (int i = 0; i < nc; ++i)
      if (mask & (1 << i)) act.push_back(i);
    Eigen::VectorXd d;
    if (act.empty()) {
      d = -delta * ghat;
    } else {
      const int na = static_cast<int>(act.size());
      Eigen::MatrixXd A(na, k);
      Eigen::VectorXd bb(na);
      for (int i = 0; i < na; ++i) {
        A.row(i) = a[act[i]].transpose();
        bb[i] = b[act[i]];
      }
      Eigen::MatrixXd gram = A * A.transpose();
      gram.diagonal().array() += 1e-12;
      const Eigen::VectorXd rhs = -(bb / delta + A * ghat);
      const Eigen::VectorXd nu = gram.ldlt().solve(rhs);
      if ((nu.array() < -1e-9).any()) continue;  // wrong multiplier sign
      d = -delta * (ghat + A.transpose() * nu);
    }
    bool feasible = true;
    for (int i = 0; i < nc && feasible; ++i)
      feasible = a[i].dot(d) <= b[i] + 1e-9 * (1.0 + std::abs(b[i]));
    if (!feasible) continue;
    const double obj = ghat.dot(d) + d.squaredNorm() / (2.0 * delta);
    if (obj < best_obj) {
      best_obj = obj;
      best_d = d;
    }
  }

  if (best_d.size() == 0) {
    // No feasible candidate: move against the violated constraints.
    Eigen::VectorXd dir = zero;
    for (int i = 0; i < nc; ++i)
      if (b[i] < 0.0) dir -= a[i];
    const double n = dir.norm();
    if (n < 1e-300) return zero;
    best_d = delta * dir / n;
  }
  const double len = best_d.norm();
  if (len > delta) best_d *= delta / len;
  return best_d;
}

namespace {

void push_instant(std::deque<int>& cache, int node, int cap) {
  auto it = std::find(cache.begin(), cache.end(), node);
  if (it != cache.end()) cache.erase(it);
  cache.push_front(node);
  while (static_cast<int>(cache.size()) > cap) cache.pop_back();
}

}  // namespace

OptimizationResult optimize(CriticalityContext& ctx, const ElementDataSet& elements,
                            const MaterialBasis& basis, const LogisticMap& logistic,
                            const OptimizerConfig& config, const IterationCallback& on_iteration) {
  const TetMesh& mesh = ctx.mesh();
  const Eigen::VectorXd& volumes = mesh.tet_volumes;
  const double sigma_y = ctx.material().yield_strength;

  OptimizationResult result;
  result.verification_limit = 1.05 * sigma_y;
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(basis.k());
  result.alpha = alpha;
  result.density = density_from_alpha(basis, logistic, alpha);
  result.mass_initial = result.density.dot(volumes);
  result.mass_final = result.mass_initial;

  if (config.max_iters == 0) {
    result.verdict = "SKIPPED";
    result.density_binarized = binarize(result.density, basis.shell_elements, logistic.threshold);
    result.mass_binarized = result.density_binarized.dot(volumes);
    return result;
  }

  AnalysisResult analysis = run_critical_instant_analysis(ctx, elements, result.density,
                                                          config.analysis);
  {
    IterationRecord rec;
    rec.iteration = 0;
    rec.accepted = true;
    rec.mass = result.mass_initial;
    rec.sigma_cr = analysis.critical.sigma_cr;
    rec.sigma_all = analysis.critical.sigma_all;
    const AggregatedStress agg =
        aggregate_stress(analysis.critical.stress, analysis.weak_regions.elements, config.p_norm);
    rec.H = agg.value;
    rec.pnorm_bound = agg.max_vm * std::pow(static_cast<double>(agg.region_size), 1.0 / config.p_norm);
    rec.wr_size = agg.region_size;
    rec.critical_node = analysis.critical.critical_node;
    rec.trust_radius = config.trust_radius;
    rec.analysis_feas = analysis.analysis_feas();
    rec.oracle_equivalent = static_cast<int>(ctx.contact_nodes().size());
    result.history.push_back(rec);
    if (on_iteration) on_iteration(rec);
  }

  if (analysis.critical.sigma_all > sigma_y) {
    result.feasible_start = false;
    result.verdict = "INFEASIBLE";
    result.density_binarized = binarize(result.density, basis.shell_elements, logistic.threshold);
    result.mass_binarized = result.density_binarized.dot(volumes);
    warn(cat("infeasible start: solid design reaches ", analysis.critical.sigma_all,
             " MPa > yield ", sigma_y, " MPa at node ", analysis.critical.critical_node));
    return result;
  }

  std::deque<int> instant_cache;
  push_instant(instant_cache, analysis.critical.critical_node, config.constraint_cache);
  double current_sigma = analysis.critical.sigma_cr;

  // Step preconditioning: the basis columns are volume-orthonormal, so their
  // entries scale like 1/sqrt(total volume) and raw trust-region steps would
  // barely move the logistic argument. Work in coordinates where each column
  // has unit max-abs entry.
  Eigen::VectorXd col_scale(basis.k());
  for (int j = 0; j < basis.k(); ++j)
    col_scale[j] = std::max(basis.gamma.col(j).cwiseAbs().maxCoeff(), 1e-300);

  double mass = result.mass_initial;
  double delta = config.trust_radius;
  int stall_count = 0;
  int binarization_rejects = 0;
  std::vector<Eigen::VectorXd> accepted_alphas{alpha};

  for (int iter = 1; iter <= config.max_iters; ++iter) {
    const auto [mass_now, mass_grad] = mass_and_gradient(basis, logistic, alpha, volumes);

    std::vector<StepConstraint> constraints;
    for (int node : instant_cache) {
      const Eigen::VectorXd* u = nullptr;
      if (node == analysis.critical.critical_node) u = &analysis.critical.displacement;
      const StressGradient sg = adjoint_stress_gradient(
          *analysis.system, basis, logistic, alpha, ctx.instant(node),
          analysis.weak_regions.elements, config.p_norm, u);
      if (sg.degenerate) continue;
      StepConstraint c;
      c.value = sg.H;
      c.limit = sigma_y * sg.H / std::max(sg.max_vm, 1e-300);  // scaled p-norm limit
      c.gradient = sg.dH_dalpha.cwiseQuotient(col_scale);
      constraints.push_back(std::move(c));
    }

    const Eigen::VectorXd step =
        constrained_step(mass_grad.cwiseQuotient(col_scale), constraints, delta)
            .cwiseQuotient(col_scale);

    IterationRecord rec;
    rec.iteration = iter;
    rec.trust_radius = delta;
    rec.oracle_equivalent = static_cast<int>(ctx.contact_nodes().size());

    if (step.norm() < 1e-14) {
      // KKT point of the model; nothing moves, no re-analysis needed.
      rec.accepted = true;
      rec.mass = mass;
      rec.sigma_cr = analysis.critical.sigma_cr;
      rec.sigma_all = analysis.critical.sigma_all;
      rec.critical_node = analysis.critical.critical_node;
      const AggregatedStress agg =
          aggregate_stress(analysis.critical.stress, analysis.weak_regions.elements, config.p_norm);
      rec.H = agg.value;
      rec.pnorm_bound =
          agg.max_vm * std::pow(static_cast<double>(agg.region_size), 1.0 / config.p_norm);
      rec.wr_size = agg.region_size;
      result.history.push_back(rec);
      if (on_iteration) on_iteration(rec);
      if (++stall_count >= config.stall_iterations) {
        result.converged = true;
        break;
      }
      continue;
    }

    const Eigen::VectorXd alpha_trial = alpha + step;
    const DensityField rho_trial = density_from_alpha(basis, logistic, alpha_trial);
    AnalysisResult trial = run_critical_instant_analysis(ctx, elements, rho_trial, config.analysis);

    // The trial's own search can miss instants the estimated map under-rates;
    // recent violators are known suspects, so check them explicitly before
    // accepting. The binarized counterpart of the trial is probed at the same
    // instants against the verification limit, since thresholding the final
    // design can concentrate stress well above the continuous value.
    double trial_sigma = trial.critical.sigma_cr;
    for (int node : instant_cache) {
      if (node == trial.critical.critical_node) continue;
      const Eigen::VectorXd f =
          assemble_rhs(ctx.instant(node), mesh, ctx.regions().fixed_nodes);
      const StressField field = recover_stress(*trial.system, trial.system->solve(f));
      double wr_max = 0.0;
      for (int e : trial.weak_regions.elements) wr_max = std::max(wr_max, field.von_mises[e]);
      trial_sigma = std::max(trial_sigma, wr_max);
    }
    double trial_sigma_bin = 0.0;
    {
      const DensityField rho_bin =
          binarize(rho_trial, basis.shell_elements, logistic.threshold);
      const FemSystem bin_system(mesh, elements, ctx.regions().fixed_nodes, rho_bin);
      std::vector<int> probes(instant_cache.begin(), instant_cache.end());
      if (std::find(probes.begin(), probes.end(), trial.critical.critical_node) == probes.end())
        probes.push_back(trial.critical.critical_node);
      for (int node : probes) {
        const Eigen::VectorXd f =
            assemble_rhs(ctx.instant(node), mesh, ctx.regions().fixed_nodes);
        const StressField field = recover_stress(bin_system, bin_system.solve(f));
        trial_sigma_bin = std::max(trial_sigma_bin, field.von_mises.maxCoeff());
      }
    }

    const AggregatedStress agg =
        aggregate_stress(trial.critical.stress, trial.weak_regions.elements, config.p_norm);
    rec.sigma_cr = trial.critical.sigma_cr;
    rec.sigma_all = trial.critical.sigma_all;
    rec.H = agg.value;
    rec.pnorm_bound =
        agg.max_vm * std::pow(static_cast<double>(agg.region_size), 1.0 / config.p_norm);
    rec.wr_size = agg.region_size;
    rec.critical_node = trial.critical.critical_node;
    rec.analysis_feas = trial.analysis_feas();
    push_instant(instant_cache, trial.critical.critical_node, config.constraint_cache);

    const double mass_trial = rho_trial.dot(volumes);
    // Restoration: if the accepted design itself violates (detected late by a
    // fresh analysis), any strict decrease of the violation is progress.
    const bool continuous_ok = trial_sigma <= sigma_y * (1.0 + config.feas_tol);
    const bool feasible_trial = continuous_ok && trial_sigma_bin <= result.verification_limit;
    const bool restoring =
        current_sigma > sigma_y * (1.0 + config.feas_tol) && trial_sigma < current_sigma * (1.0 - 1e-9);
    if (feasible_trial || restoring) {
      rec.accepted = true;
      binarization_rejects = 0;
      const double rel_dec = (mass - mass_trial) / std::max(mass, 1e-300);
      alpha = alpha_trial;
      analysis = std::move(trial);
      mass = mass_trial;
      current_sigma = trial_sigma;
      accepted_alphas.push_back(alpha);
      delta = std::min(delta * 2.0, config.trust_max);
      stall_count = (rel_dec < config.tol_mass) ? stall_count + 1 : 0;
      rec.mass = mass;
      result.history.push_back(rec);
      if (on_iteration) on_iteration(rec);
      if (stall_count >= config.stall_iterations) {
        result.converged = true;
        break;
      }
    } else {
      rec.accepted = false;
      rec.mass = mass;  // design unchanged
      delta *= 0.5;
      result.history.push_back(rec);
      if (on_iteration) on_iteration(rec);
      // A streak of rejections caused purely by the thresholded probe means
      // the continuous design cannot move without breaking binarizability;
      // that is convergence of the practical problem, not a stall.
      binarization_rejects = continuous_ok ? binarization_rejects + 1 : 0;
      if (binarization_rejects >= config.stall_iterations) {
        result.converged = true;
        break;
      }
      if (delta < config.trust_min) {
        result.stalled = true;
        warn(cat("optimizer stalled: trust radius ", delta, " below ", config.trust_min,
                 " with constraint violated by instant at node ", rec.critical_node));
        break;
      }
    }
  }

  result.iterations = result.history.empty() ? 0 : result.history.back().iteration;

  // Brute-force check of the design that will actually be built. If the
  // thresholded design fails, walk back through the accepted iterates (they
  // end at the feasible solid start, so this terminates) and keep the first
  // one whose binarized form verifies.
  for (auto it = accepted_alphas.rbegin(); it != accepted_alphas.rend(); ++it) {
    result.alpha = *it;
    result.density = density_from_alpha(basis, logistic, result.alpha);
    result.mass_final = result.density.dot(volumes);
    result.density_binarized = binarize(result.density, basis.shell_elements, logistic.threshold);
    result.mass_binarized = result.density_binarized.dot(volumes);
    FemSystem verify_system(mesh, elements, ctx.regions().fixed_nodes, result.density_binarized);
    result.verification = brute_force_oracle(ctx, verify_system);
    if (result.verification.sigma_cr <= result.verification_limit) break;
    if (std::next(it) != accepted_alphas.rend())
      warn(cat("binarized design reaches ", result.verification.sigma_cr,
               " MPa > ", result.verification_limit, "; reverting one accepted step"));
  }
  result.verdict = result.verification.sigma_cr <= result.verification_limit ? "PASS" : "FAIL";
  return result;
}

}  // namespace anyload
