#include "anyload/common.hpp"
#include "anyload/criticality.hpp"
#include "anyload/fem.hpp"
#include "anyload/io.hpp"
#include "anyload/loadcase.hpp"
#include "anyload/mesh.hpp"
#include "anyload/meshgen.hpp"
#include "anyload/optimizer.hpp"
#include "anyload/reduction.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

namespace py = pybind11;
using namespace anyload;

namespace {

// COO triplets so scipy.sparse can rebuild the matrix without copies of
// Eigen internals.
py::tuple laplacian_coo(LaplacianKind kind, const TetMesh& mesh) {
  const GraphLaplacian lap = build_laplacian(kind, mesh);
  const int nnz = static_cast<int>(lap.matrix.nonZeros());
  Eigen::VectorXi rows(nnz), cols(nnz);
  Eigen::VectorXd vals(nnz);
  int idx = 0;
  for (int outer = 0; outer < lap.matrix.outerSize(); ++outer)
    for (Eigen::SparseMatrix<double>::InnerIterator it(lap.matrix, outer); it; ++it) {
      rows[idx] = static_cast<int>(it.row());
      cols[idx] = static_cast<int>(it.col());
      vals[idx] = it.value();
      ++idx;
    }
  return py::make_tuple(rows, cols, vals, static_cast<int>(lap.matrix.rows()));
}

}  // namespace

PYBIND11_MODULE(anyload, m) {
  m.doc() = "Interior lightweighting of tetrahedral solids under movable contact loads";

  py::register_exception<Error>(m, "AnyloadError");

  py::class_<TetMesh>(m, "TetMesh")
      .def_readonly("nodes", &TetMesh::nodes)
      .def_readonly("tets", &TetMesh::tets)
      .def_readonly("surface_tris", &TetMesh::surface_tris)
      .def_readonly("surface_nodes", &TetMesh::surface_nodes)
      .def_readonly("node_normals", &TetMesh::node_normals)
      .def_readonly("tet_volumes", &TetMesh::tet_volumes)
      .def_readonly("mean_surface_edge", &TetMesh::mean_surface_edge)
      .def_readonly("hash", &TetMesh::hash)
      .def_property_readonly("num_nodes", &TetMesh::num_nodes)
      .def_property_readonly("num_tets", &TetMesh::num_tets)
      .def_property_readonly("num_surface_nodes", &TetMesh::num_surface_nodes)
      .def("total_volume", &TetMesh::total_volume)
      .def("surface_enclosed_volume", &TetMesh::surface_enclosed_volume)
      .def("is_surface_node", &TetMesh::is_surface_node);

  m.def("make_tet_mesh", &make_tet_mesh, py::arg("nodes"), py::arg("tets"));
  m.def("load_tet_mesh", &load_tet_mesh, py::arg("node_file"), py::arg("ele_file"));
  m.def("write_mesh_files", &write_mesh_files, py::arg("node_path"), py::arg("ele_path"),
        py::arg("mesh"));

  auto gen = m.def_submodule("meshgen", "bundled benchmark shapes");
  gen.def("regular_tet", &meshgen::regular_tet, py::arg("edge") = 1.0);
  gen.def("box", &meshgen::box, py::arg("size"), py::arg("cells"));
  gen.def("two_neck_plate", &meshgen::two_neck_plate, py::arg("cell") = 1.0);
  gen.def("two_neck_thin_region", &meshgen::two_neck_thin_region, py::arg("mesh"));
  gen.def("two_neck_thick_region", &meshgen::two_neck_thick_region, py::arg("mesh"));
  gen.def("fork", &meshgen::fork, py::arg("cell") = 1.0);
  gen.def("ball", &meshgen::ball, py::arg("subdiv"), py::arg("radius") = 1.0);

  py::class_<RegionSpec>(m, "RegionSpec")
      .def(py::init<>())
      .def_readwrite("fixed_nodes", &RegionSpec::fixed_nodes)
      .def_readwrite("contact_nodes", &RegionSpec::contact_nodes)
      .def_readwrite("shell_elements", &RegionSpec::shell_elements)
      .def_readwrite("shell_thickness", &RegionSpec::shell_thickness);
  m.def("validate_regions", &validate_regions);

  m.def("centroid_surface_distances", &centroid_surface_distances);
  m.def("tag_shell_elements", &tag_shell_elements, py::arg("mesh"), py::arg("thickness"));
  m.def("geodesic_distances", &geodesic_distances, py::arg("mesh"), py::arg("source"));
  m.def("sample_contact_nodes", &sample_contact_nodes, py::arg("mesh"), py::arg("contact"),
        py::arg("count"), py::arg("seed") = 0);
  m.def("surface_laplacian",
        [](const TetMesh& mesh) { return laplacian_coo(LaplacianKind::SurfaceNodes, mesh); });
  m.def("element_laplacian",
        [](const TetMesh& mesh) { return laplacian_coo(LaplacianKind::Elements, mesh); });

  py::class_<MaterialModel>(m, "MaterialModel")
      .def(py::init([](double E, double nu, double yield, double beta, double eps) {
             MaterialModel mat{E, nu, yield, beta, eps};
             mat.validate();
             return mat;
           }),
           py::arg("youngs_modulus"), py::arg("poisson_ratio"), py::arg("yield_strength"),
           py::arg("simp_exponent") = 3.0, py::arg("void_fraction") = 1e-8)
      .def_readwrite("youngs_modulus", &MaterialModel::youngs_modulus)
      .def_readwrite("poisson_ratio", &MaterialModel::poisson_ratio)
      .def_readwrite("yield_strength", &MaterialModel::yield_strength)
      .def_readwrite("simp_exponent", &MaterialModel::simp_exponent)
      .def_readwrite("void_fraction", &MaterialModel::void_fraction);

  m.def("simp_scale", &simp_scale);
  m.def("simp_scale_derivative", &simp_scale_derivative);

  py::class_<ElementDataSet, std::shared_ptr<ElementDataSet>>(m, "ElementDataSet")
      .def(py::init<const TetMesh&, const MaterialModel&>(), py::keep_alive<1, 2>())
      .def("__len__", &ElementDataSet::size)
      .def("solid_stiffness",
           [](const ElementDataSet& set, int e) { return Eigen::MatrixXd(set[e].K_solid); })
      .def("strain_displacement",
           [](const ElementDataSet& set, int e) { return Eigen::MatrixXd(set[e].B); });

  py::class_<SolveCounters>(m, "SolveCounters")
      .def_readonly("factorizations", &SolveCounters::factorizations)
      .def_readonly("back_substitutions", &SolveCounters::back_substitutions);

  py::class_<FemSystem, std::shared_ptr<FemSystem>>(m, "FemSystem")
      .def(py::init<const TetMesh&, const ElementDataSet&, const std::vector<int>&,
                    DensityField>(),
           py::arg("mesh"), py::arg("elements"), py::arg("fixed_nodes"), py::arg("density"),
           py::keep_alive<1, 2>(), py::keep_alive<1, 3>())
      .def("solve", &FemSystem::solve)
      .def_property_readonly("num_free_dofs", &FemSystem::num_free_dofs)
      .def_property_readonly("counters", &FemSystem::counters);

  m.def("recover_stress", [](const FemSystem& system, const Eigen::VectorXd& u) {
    const StressField f = recover_stress(system, u);
    return py::make_tuple(f.sigma, f.von_mises);
  });
  m.def("modal_analysis", [](const FemSystem& system, int num_modes) {
    const ModalResult r = modal_analysis(system, num_modes);
    return py::make_tuple(r.eigenvalues, r.modes);
  });

  py::class_<ForceInstant>(m, "ForceInstant")
      .def_readonly("contact_node", &ForceInstant::contact_node)
      .def_readonly("patch_radius", &ForceInstant::patch_radius)
      .def_readonly("budget", &ForceInstant::budget)
      .def_readonly("patch_area", &ForceInstant::patch_area)
      .def_readonly("one_ring_fallback", &ForceInstant::one_ring_fallback)
      .def_readonly("nodal_forces", &ForceInstant::nodal_forces)
      .def("total_magnitude", &ForceInstant::total_magnitude);

  m.def("build_force_instant", &build_force_instant, py::arg("mesh"), py::arg("contact_node"),
        py::arg("budget"), py::arg("patch_radius"));
  m.def("assemble_rhs", &assemble_rhs, py::arg("instant"), py::arg("mesh"),
        py::arg("fixed_nodes") = std::vector<int>{});
  m.def("magnitude_row", &magnitude_row);

  py::class_<CriticalityContext>(m, "CriticalityContext")
      .def(py::init<const TetMesh&, const RegionSpec&, const MaterialModel&, double, double>(),
           py::arg("mesh"), py::arg("regions"), py::arg("material"), py::arg("force_budget"),
           py::arg("patch_radius"), py::keep_alive<1, 2>(), py::keep_alive<1, 3>())
      .def_property_readonly("contact_nodes", &CriticalityContext::contact_nodes)
      .def("instant", &CriticalityContext::instant, py::return_value_policy::reference_internal)
      .def("samples", &CriticalityContext::samples, py::arg("count"), py::arg("seed") = 0,
           py::return_value_policy::reference_internal);

  py::class_<TrainParams>(m, "TrainParams")
      .def(py::init<>())
      .def_readwrite("l", &TrainParams::l)
      .def_readwrite("q", &TrainParams::q)
      .def_readwrite("ridge", &TrainParams::ridge)
      .def_readwrite("seed", &TrainParams::seed);

  py::class_<CriticalityModel>(m, "CriticalityModel")
      .def_readonly("sample_nodes", &CriticalityModel::sample_nodes)
      .def_readonly("psi", &CriticalityModel::psi)
      .def_readonly("mean_row", &CriticalityModel::mean_row)
      .def_readonly("phi", &CriticalityModel::phi)
      .def_readonly("mean_stress", &CriticalityModel::mean_stress)
      .def_readonly("W", &CriticalityModel::W)
      .def_readonly("ridge", &CriticalityModel::ridge)
      .def_readonly("q", &CriticalityModel::q)
      .def_property_readonly("feature_dim", &CriticalityModel::feature_dim);

  m.def("train_criticality_model", &train_criticality_model, py::arg("ctx"), py::arg("system"),
        py::arg("params") = TrainParams{});
  m.def("predict_stress", &predict_stress);
  m.def("predict_criticality", &predict_criticality);
  m.def("predict_criticality_all", &predict_criticality_all);

  py::class_<ForceRegions>(m, "ForceRegions")
      .def_readonly("islands", &ForceRegions::islands)
      .def_readonly("selected", &ForceRegions::selected)
      .def_readonly("criticality", &ForceRegions::criticality);
  m.def("extract_force_regions", &extract_force_regions);

  py::class_<WeakRegions>(m, "WeakRegions")
      .def_readonly("elements", &WeakRegions::elements)
      .def_readonly("mode_nodes", &WeakRegions::mode_nodes);
  m.def("compute_weak_regions", &compute_weak_regions, py::arg("ctx"), py::arg("system"),
        py::arg("num_modes") = 15, py::arg("fraction") = 0.025);

  py::class_<CriticalInstantResult>(m, "CriticalInstantResult")
      .def_readonly("critical_node", &CriticalInstantResult::critical_node)
      .def_readonly("sigma_cr", &CriticalInstantResult::sigma_cr)
      .def_readonly("sigma_wr", &CriticalInstantResult::sigma_wr)
      .def_readonly("sigma_all", &CriticalInstantResult::sigma_all)
      .def_readonly("displacement", &CriticalInstantResult::displacement)
      .def_readonly("fea_count", &CriticalInstantResult::fea_count)
      .def_readonly("true_criticality", &CriticalInstantResult::true_criticality)
      .def_property_readonly("von_mises", [](const CriticalInstantResult& r) {
        return r.stress.von_mises;
      });

  m.def("hierarchical_search", &hierarchical_search);
  m.def("brute_force_oracle",
        [](CriticalityContext& ctx, const FemSystem& system) {
          return brute_force_oracle(ctx, system);
        },
        py::arg("ctx"), py::arg("system"));

  py::class_<AnalysisParams>(m, "AnalysisParams")
      .def(py::init<>())
      .def_readwrite("train", &AnalysisParams::train)
      .def_readwrite("wr_modes", &AnalysisParams::wr_modes)
      .def_readwrite("wr_fraction", &AnalysisParams::wr_fraction);

  py::class_<AnalysisResult>(m, "AnalysisResult")
      .def_readonly("system", &AnalysisResult::system)
      .def_readonly("model", &AnalysisResult::model)
      .def_readonly("force_regions", &AnalysisResult::force_regions)
      .def_readonly("weak_regions", &AnalysisResult::weak_regions)
      .def_readonly("critical", &AnalysisResult::critical)
      .def_readonly("training_feas", &AnalysisResult::training_feas)
      .def_readonly("search_feas", &AnalysisResult::search_feas);

  m.def("run_critical_instant_analysis", &run_critical_instant_analysis, py::arg("ctx"),
        py::arg("elements"), py::arg("density"), py::arg("params") = AnalysisParams{});

  py::class_<MaterialBasis>(m, "MaterialBasis")
      .def_readonly("gamma", &MaterialBasis::gamma)
      .def_readonly("eigenvalues", &MaterialBasis::eigenvalues)
      .def_readonly("shell_elements", &MaterialBasis::shell_elements)
      .def_property_readonly("k", &MaterialBasis::k);
  m.def("compute_material_basis", &compute_material_basis, py::arg("mesh"), py::arg("shell"),
        py::arg("k"), py::arg("cache_dir") = std::string{});

  py::class_<LogisticMap>(m, "LogisticMap")
      .def(py::init([](double steepness, double inflection, double threshold) {
             return LogisticMap{steepness, inflection, threshold};
           }),
           py::arg("steepness") = 5.0, py::arg("inflection") = 2.0, py::arg("threshold") = 0.5)
      .def_readwrite("steepness", &LogisticMap::steepness)
      .def_readwrite("inflection", &LogisticMap::inflection)
      .def_readwrite("threshold", &LogisticMap::threshold)
      .def("value", &LogisticMap::value)
      .def("derivative", &LogisticMap::derivative);

  m.def("density_from_alpha", &density_from_alpha);
  m.def("density_jacobian", &density_jacobian);
  m.def("binarize", &binarize, py::arg("density"), py::arg("shell"), py::arg("threshold") = 0.5);

  m.def("mass_and_gradient", [](const MaterialBasis& basis, const LogisticMap& logistic,
                                const Eigen::VectorXd& alpha, const Eigen::VectorXd& volumes) {
    const auto [mass, grad] = mass_and_gradient(basis, logistic, alpha, volumes);
    return py::make_tuple(mass, grad);
  });

  py::class_<StressGradient>(m, "StressGradient")
      .def_readonly("H", &StressGradient::H)
      .def_readonly("max_vm", &StressGradient::max_vm)
      .def_readonly("region_size", &StressGradient::region_size)
      .def_readonly("dH_dalpha", &StressGradient::dH_dalpha)
      .def_readonly("degenerate", &StressGradient::degenerate);

  m.def("adjoint_stress_gradient",
        [](const FemSystem& system, const MaterialBasis& basis, const LogisticMap& logistic,
           const Eigen::VectorXd& alpha, const ForceInstant& instant,
           const std::vector<int>& weak_elements, double p) {
          return adjoint_stress_gradient(system, basis, logistic, alpha, instant, weak_elements, p);
        },
        py::arg("system"), py::arg("basis"), py::arg("logistic"), py::arg("alpha"),
        py::arg("instant"), py::arg("weak_elements"), py::arg("p") = 15.0);

  py::class_<StepConstraint>(m, "StepConstraint")
      .def(py::init([](double value, double limit, Eigen::VectorXd gradient) {
             return StepConstraint{value, limit, std::move(gradient)};
           }),
           py::arg("value"), py::arg("limit"), py::arg("gradient"))
      .def_readwrite("value", &StepConstraint::value)
      .def_readwrite("limit", &StepConstraint::limit)
      .def_readwrite("gradient", &StepConstraint::gradient);
  m.def("constrained_step", &constrained_step, py::arg("mass_gradient"), py::arg("constraints"),
        py::arg("delta"));

  py::class_<OptimizerConfig>(m, "OptimizerConfig")
      .def(py::init<>())
      .def_readwrite("tol_mass", &OptimizerConfig::tol_mass)
      .def_readwrite("stall_iterations", &OptimizerConfig::stall_iterations)
      .def_readwrite("max_iters", &OptimizerConfig::max_iters)
      .def_readwrite("trust_radius", &OptimizerConfig::trust_radius)
      .def_readwrite("feas_tol", &OptimizerConfig::feas_tol)
      .def_readwrite("p_norm", &OptimizerConfig::p_norm)
      .def_readwrite("constraint_cache", &OptimizerConfig::constraint_cache)
      .def_readwrite("analysis", &OptimizerConfig::analysis);

  py::class_<IterationRecord>(m, "IterationRecord")
      .def_readonly("iteration", &IterationRecord::iteration)
      .def_readonly("accepted", &IterationRecord::accepted)
      .def_readonly("mass", &IterationRecord::mass)
      .def_readonly("sigma_cr", &IterationRecord::sigma_cr)
      .def_readonly("sigma_all", &IterationRecord::sigma_all)
      .def_readonly("H", &IterationRecord::H)
      .def_readonly("pnorm_bound", &IterationRecord::pnorm_bound)
      .def_readonly("wr_size", &IterationRecord::wr_size)
      .def_readonly("critical_node", &IterationRecord::critical_node)
      .def_readonly("trust_radius", &IterationRecord::trust_radius)
      .def_readonly("analysis_feas", &IterationRecord::analysis_feas);

  py::class_<OptimizationResult>(m, "OptimizationResult")
      .def_readonly("feasible_start", &OptimizationResult::feasible_start)
      .def_readonly("converged", &OptimizationResult::converged)
      .def_readonly("stalled", &OptimizationResult::stalled)
      .def_readonly("verdict", &OptimizationResult::verdict)
      .def_readonly("alpha", &OptimizationResult::alpha)
      .def_readonly("density", &OptimizationResult::density)
      .def_readonly("density_binarized", &OptimizationResult::density_binarized)
      .def_readonly("mass_initial", &OptimizationResult::mass_initial)
      .def_readonly("mass_final", &OptimizationResult::mass_final)
      .def_readonly("mass_binarized", &OptimizationResult::mass_binarized)
      .def_readonly("iterations", &OptimizationResult::iterations)
      .def_readonly("history", &OptimizationResult::history)
      .def_readonly("verification", &OptimizationResult::verification)
      .def_readonly("verification_limit", &OptimizationResult::verification_limit);

  m.def("optimize",
        [](CriticalityContext& ctx, const ElementDataSet& elements, const MaterialBasis& basis,
           const LogisticMap& logistic, const OptimizerConfig& config) {
          return optimize(ctx, elements, basis, logistic, config);
        },
        py::arg("ctx"), py::arg("elements"), py::arg("basis"), py::arg("logistic"),
        py::arg("config"));

  m.def("write_density_file", &write_density_file);
  m.def("read_density_file", &read_density_file);
}
