#include "anyload/common.hpp"
#include "anyload/config.hpp"
#include "anyload/criticality.hpp"
#include "anyload/io.hpp"
#include "anyload/meshgen.hpp"
#include "anyload/optimizer.hpp"
#include "anyload/reduction.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <random>

namespace {

using namespace anyload;

constexpr int kExitOk = 0;
constexpr int kExitCrash = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitCheckFailed = 3;

struct Pipeline {
  RunConfig config;
  TetMesh mesh;
  RegionSpec regions;
  double patch_radius = 0.0;
  std::unique_ptr<ElementDataSet> elements;
  std::unique_ptr<CriticalityContext> ctx;
};

Pipeline make_pipeline(RunConfig config) {
  Pipeline p;
  p.config = std::move(config);
  Eigen::setNbThreads(p.config.threads);
  if (p.config.node_file.empty() || p.config.ele_file.empty())
    fail("config: mesh.node and mesh.ele are required");
  p.mesh = load_tet_mesh(p.config.node_file, p.config.ele_file);
  p.regions = resolve_regions(p.mesh, p.config);
  p.patch_radius = resolve_patch_radius(p.mesh, p.config);
  p.elements = std::make_unique<ElementDataSet>(p.mesh, p.config.material);
  p.ctx = std::make_unique<CriticalityContext>(p.mesh, p.regions, p.config.material,
                                               p.config.force_budget, p.patch_radius);
  std::filesystem::create_directories(p.config.output_dir);
  write_manifest(p.config.output_dir + "/manifest.txt", config_echo(p.config), p.mesh.hash,
                 p.config.seed);
  return p;
}

AnalysisParams analysis_params(const Pipeline& p) {
  AnalysisParams params;
  params.train.l = p.config.sample_count > 0
                       ? p.config.sample_count
                       : std::max(3, static_cast<int>(std::ceil(
                                         p.config.sample_fraction *
                                         static_cast<double>(p.ctx->contact_nodes().size()))));
  params.train.q = p.config.basis_q;
  params.train.ridge = p.config.ridge;
  params.train.seed = p.config.seed;
  params.wr_modes = p.config.wr_modes;
  params.wr_fraction = p.config.wr_fraction;
  return params;
}

DensityField starting_density(const Pipeline& p) {
  if (!p.config.density_file.empty()) return read_density_file(p.config.density_file, p.mesh);
  // Reduced start alpha = 0: every element sits at the logistic value at 0.
  const LogisticMap logistic{p.config.kappa, p.config.x0, p.config.threshold};
  return DensityField::Constant(p.mesh.num_tets(), logistic.value(0.0));
}

Eigen::VectorXd criticality_point_field(const Pipeline& p, const Eigen::VectorXd& per_contact) {
  Eigen::VectorXd field = Eigen::VectorXd::Zero(p.mesh.num_nodes());
  const auto& contact = p.ctx->contact_nodes();
  for (std::size_t i = 0; i < contact.size(); ++i)
    field[contact[i]] = per_contact[static_cast<int>(i)];
  return field;
}

int cmd_analyze(const RunConfig& config, bool with_oracle) {
  Pipeline p = make_pipeline(config);
  const std::string dir = p.config.output_dir;
  const DensityField density = starting_density(p);

  AnalysisResult analysis =
      run_critical_instant_analysis(*p.ctx, *p.elements, density, analysis_params(p));

  write_criticality_csv(dir + "/criticality.csv", p.ctx->contact_nodes(),
                        analysis.force_regions.criticality);
  write_force_regions(dir + "/force_regions.txt", analysis.force_regions);
  write_weak_regions(dir + "/weak_regions.txt", analysis.weak_regions);
  write_search_trace(dir + "/search_trace.txt", analysis.critical);
  write_critical_instant(dir + "/critical_instant.txt", analysis.critical,
                         p.config.force_budget, p.patch_radius);
  write_vtk(dir + "/analyze.vtk", p.mesh,
            {{"von_mises", analysis.critical.stress.von_mises}, {"density", density}},
            {{"criticality", criticality_point_field(p, analysis.force_regions.criticality)}});

  std::cout << "critical node " << analysis.critical.critical_node << ", sigma_cr "
            << analysis.critical.sigma_cr << " MPa, analysis FEAs "
            << analysis.analysis_feas() << "\n";

  if (with_oracle) {
    const CriticalInstantResult oracle =
        brute_force_oracle(*p.ctx, *analysis.system, &analysis.weak_regions);
    write_criticality_csv(dir + "/oracle_criticality.csv", p.ctx->contact_nodes(),
                          oracle.true_criticality);
    std::ofstream out(dir + "/critical_instant.txt", std::ios::app);
    out.precision(17);
    out << "oracle_critical_node " << oracle.critical_node << "\n";
    out << "oracle_sigma_cr " << oracle.sigma_cr << "\n";
    out << "oracle_fea_count " << oracle.fea_count << "\n";
    out << "search_vs_oracle_ratio "
        << (oracle.sigma_cr > 0 ? analysis.critical.sigma_wr / oracle.sigma_cr : 1.0) << "\n";
    const double ratio = oracle.sigma_cr > 0 ? analysis.critical.sigma_wr / oracle.sigma_cr : 1.0;
    std::cout << "oracle node " << oracle.critical_node << ", sigma_cr " << oracle.sigma_cr
              << " MPa, agreement " << ratio << "\n";
  }
  return kExitOk;
}

int cmd_oracle(const RunConfig& config) {
  Pipeline p = make_pipeline(config);
  const std::string dir = p.config.output_dir;
  const DensityField density = starting_density(p);
  FemSystem system(p.mesh, *p.elements, p.regions.fixed_nodes, density);
  const CriticalInstantResult oracle = brute_force_oracle(*p.ctx, system);
  write_criticality_csv(dir + "/oracle_criticality.csv", p.ctx->contact_nodes(),
                        oracle.true_criticality);
  write_critical_instant(dir + "/oracle_instant.txt", oracle, p.config.force_budget,
                         p.patch_radius);
  write_vtk(dir + "/oracle.vtk", p.mesh,
            {{"von_mises", oracle.stress.von_mises}, {"density", density}},
            {{"criticality", criticality_point_field(p, oracle.true_criticality)}});
  std::cout << "oracle critical node " << oracle.critical_node << ", sigma_cr "
            << oracle.sigma_cr << " MPa over " << oracle.fea_count << " instants\n";
  return kExitOk;
}

int cmd_optimize(const RunConfig& config) {
  Pipeline p = make_pipeline(config);
  const std::string dir = p.config.output_dir;

  const LogisticMap logistic{p.config.kappa, p.config.x0, p.config.threshold};
  const MaterialBasis basis = compute_material_basis(p.mesh, p.regions.shell_elements,
                                                     p.config.material_modes, p.config.basis_cache);

  OptimizerConfig opt;
  opt.tol_mass = p.config.tol_mass;
  opt.max_iters = p.config.max_iters;
  opt.trust_radius = p.config.trust_radius;
  opt.feas_tol = p.config.feas_tol;
  opt.p_norm = p.config.p_norm;
  opt.analysis = analysis_params(p);

  const OptimizationResult result =
      optimize(*p.ctx, *p.elements, basis, logistic, opt, [](const IterationRecord& rec) {
        std::cout << "iter " << rec.iteration << (rec.accepted ? "  accept" : "  reject")
                  << "  mass " << rec.mass << "  sigma_cr " << rec.sigma_cr << "  node "
                  << rec.critical_node << "\n";
      });

  write_history_csv(dir + "/history.csv", result.history);
  write_density_file(dir + "/density.txt", p.mesh, result.density);
  write_density_file(dir + "/density_binarized.txt", p.mesh, result.density_binarized);
  write_run_report(dir + "/report.txt", result, static_cast<int>(p.ctx->contact_nodes().size()));
  std::map<std::string, Eigen::VectorXd> cell_fields = {
      {"density", result.density}, {"density_binarized", result.density_binarized}};
  if (result.verification.stress.von_mises.size() == p.mesh.num_tets())
    cell_fields.emplace("von_mises", result.verification.stress.von_mises);
  write_vtk(dir + "/optimized.vtk", p.mesh, cell_fields, {});

  std::cout << "verdict " << result.verdict << ": mass " << result.mass_initial << " -> "
            << result.mass_binarized << " mm^3 in " << result.iterations << " iterations\n";
  if (!result.feasible_start) return kExitInfeasible;
  if (result.verdict == "FAIL") return kExitCheckFailed;
  return kExitOk;
}

int cmd_gradcheck(const RunConfig& config, int num_alphas, bool corrupt) {
  Pipeline p = make_pipeline(config);
  if (p.mesh.num_tets() > 20000)
    warn(cat("gradcheck on ", p.mesh.num_tets(), " elements will be slow; prefer a smaller mesh"));

  const LogisticMap logistic{p.config.kappa, p.config.x0, p.config.threshold};
  const MaterialBasis basis = compute_material_basis(p.mesh, p.regions.shell_elements,
                                                     p.config.material_modes, p.config.basis_cache);
  const int k = basis.k();
  const Eigen::VectorXd& volumes = p.mesh.tet_volumes;

  // One finite-difference unit per column of the basis; the columns are
  // volume-orthonormal so raw coordinate steps would sit in roundoff.
  Eigen::VectorXd scale(k);
  for (int j = 0; j < k; ++j)
    scale[j] = 1.0 / std::max(basis.gamma.col(j).cwiseAbs().maxCoeff(), 1e-300);

  std::mt19937_64 rng(p.config.seed);
  std::uniform_real_distribution<double> unif(-0.6, 0.6);

  // Component errors are measured against the gradient magnitude: at double
  // precision a per-component quotient on near-zero entries reads only
  // difference roundoff.
  auto report = [&](const char* tag, int trial, const Eigen::VectorXd& analytic,
                    const Eigen::VectorXd& fd_h, const Eigen::VectorXd& fd_h2, double tol) {
    const double norm = std::max(fd_h2.cwiseAbs().maxCoeff(), 1e-300);
    const double rel = (analytic - fd_h2).cwiseAbs().maxCoeff() / norm;
    const double err_h = (analytic - fd_h).cwiseAbs().maxCoeff() / norm;
    const bool converging = err_h >= 2.0 * rel || err_h < tol * 1e-2;
    const bool ok = rel < tol && converging;
    std::cout << tag << "[" << trial << "]  rel-err " << rel << "  halving " << err_h / std::max(rel, 1e-300)
              << "  " << (ok ? "PASS" : "FAIL") << "\n";
    return ok;
  };

  bool all_pass = true;
  std::cout << "check      rel-err       halving-ratio  status\n";
  for (int trial = 0; trial < num_alphas; ++trial) {
    Eigen::VectorXd alpha(k);
    for (int j = 0; j < k; ++j) alpha[j] = unif(rng) * scale[j];

    const auto [mass, mass_grad] = mass_and_gradient(basis, logistic, alpha, volumes);
    auto fd_mass = [&](double h) {
      Eigen::VectorXd out(k);
      for (int j = 0; j < k; ++j) {
        Eigen::VectorXd ap = alpha, am = alpha;
        ap[j] += h * scale[j];
        am[j] -= h * scale[j];
        out[j] = (mass_and_gradient(basis, logistic, ap, volumes).first -
                  mass_and_gradient(basis, logistic, am, volumes).first) /
                 (2 * h * scale[j]);
      }
      return out;
    };
    Eigen::VectorXd ga = mass_grad;
    if (corrupt) ga *= 1.5;
    all_pass &= report("M", trial, ga, fd_mass(4e-3), fd_mass(2e-3), 1e-6);

    const DensityField rho = density_from_alpha(basis, logistic, alpha);
    AnalysisResult analysis =
        run_critical_instant_analysis(*p.ctx, *p.elements, rho, analysis_params(p));
    const ForceInstant& instant = p.ctx->instant(analysis.critical.critical_node);
    const StressGradient sg = adjoint_stress_gradient(
        *analysis.system, basis, logistic, alpha, instant, analysis.weak_regions.elements,
        p.config.p_norm, &analysis.critical.displacement);
    auto H_at = [&](const Eigen::VectorXd& a) {
      const DensityField r = density_from_alpha(basis, logistic, a);
      FemSystem sys(p.mesh, *p.elements, p.regions.fixed_nodes, r);
      const Eigen::VectorXd u = sys.solve(assemble_rhs(instant, p.mesh, p.regions.fixed_nodes));
      return aggregate_stress(recover_stress(sys, u), analysis.weak_regions.elements,
                              p.config.p_norm)
          .value;
    };
    auto fd_stress = [&](double h) {
      Eigen::VectorXd out(k);
      for (int j = 0; j < k; ++j) {
        Eigen::VectorXd ap = alpha, am = alpha;
        ap[j] += h * scale[j];
        am[j] -= h * scale[j];
        out[j] = (H_at(ap) - H_at(am)) / (2 * h * scale[j]);
      }
      return out;
    };
    Eigen::VectorXd gh = sg.dH_dalpha;
    if (corrupt) gh *= 1.5;
    all_pass &= report("H", trial, gh, fd_stress(2e-3), fd_stress(1e-3), 1e-3);
  }
  std::cout << (all_pass ? "gradcheck PASS\n" : "gradcheck FAIL\n");
  return all_pass ? kExitOk : kExitCheckFailed;
}

int cmd_meshgen(const std::string& shape, const std::string& out_prefix, double cell,
                const std::vector<double>& size, const std::vector<int>& cells, int subdiv) {
  TetMesh mesh;
  if (shape == "twoneck") {
    mesh = meshgen::two_neck_plate(cell);
  } else if (shape == "fork") {
    mesh = meshgen::fork(cell);
  } else if (shape == "ball") {
    mesh = meshgen::ball(subdiv, cell);
  } else if (shape == "box") {
    if (size.size() != 3 || cells.size() != 3) fail("meshgen box needs --size x,y,z and --cells nx,ny,nz");
    mesh = meshgen::box(Vec3(size[0], size[1], size[2]),
                        Eigen::Vector3i(cells[0], cells[1], cells[2]));
  } else {
    fail(cat("unknown shape '", shape, "' (twoneck, fork, ball, box)"));
  }
  const auto parent = std::filesystem::path(out_prefix).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  write_mesh_files(out_prefix + ".node", out_prefix + ".ele", mesh);
  std::cout << "wrote " << out_prefix << ".node/.ele: " << mesh.num_nodes() << " nodes, "
            << mesh.num_tets() << " tets, " << mesh.num_surface_nodes() << " surface nodes\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"anyload: interior lightweighting under movable contact loads"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  int threads = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "run configuration file")->required();
    cmd->add_option("--set", overrides, "override a config key (section.key=value)");
    cmd->add_option("--threads", threads, "cap worker threads");
  };

  auto* analyze = app.add_subcommand("analyze", "criticality map, regions, critical instant");
  bool with_oracle = false;
  add_common(analyze);
  analyze->add_flag("--oracle", with_oracle, "cross-check against the brute-force oracle");

  auto* opt = app.add_subcommand("optimize", "run the lightweighting loop");
  add_common(opt);

  auto* oracle = app.add_subcommand("oracle", "brute-force criticality over all contact nodes");
  add_common(oracle);

  auto* gradcheck = app.add_subcommand("gradcheck", "adjoint vs finite-difference gradients");
  add_common(gradcheck);
  int gc_alphas = 3;
  bool gc_corrupt = false;
  gradcheck->add_option("--alphas", gc_alphas, "number of random design points");
  gradcheck->add_flag("--corrupt", gc_corrupt)->group("");  // test hook, hidden

  auto* gen = app.add_subcommand("meshgen", "write a bundled benchmark mesh");
  std::string shape, out_prefix = "mesh";
  double cell = 1.0;
  std::vector<double> size;
  std::vector<int> cells;
  int subdiv = 3;
  gen->add_option("--shape", shape, "twoneck | fork | ball | box")->required();
  gen->add_option("--out", out_prefix, "output path prefix");
  gen->add_option("--cell", cell, "cell edge length (mm) / ball radius");
  gen->add_option("--size", size, "box size x,y,z")->delimiter(',');
  gen->add_option("--cells", cells, "box cell counts nx,ny,nz")->delimiter(',');
  gen->add_option("--subdiv", subdiv, "ball refinement level");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_meshgen(shape, out_prefix, cell, size, cells, subdiv);

    RunConfig config = anyload::parse_config(config_path);
    for (const auto& assignment : overrides) anyload::apply_override(config, assignment);
    if (threads > 0) config.threads = threads;
    config.validate();

    if (analyze->parsed()) return cmd_analyze(config, with_oracle);
    if (oracle->parsed()) return cmd_oracle(config);
    if (opt->parsed()) return cmd_optimize(config);
    if (gradcheck->parsed()) return cmd_gradcheck(config, gc_alphas, gc_corrupt);
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << "\n";
    return kExitCrash;
  }
  return kExitCrash;
}
