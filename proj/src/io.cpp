#include "anyload/io.hpp"

#include "anyload/common.hpp"
#include "anyload/config.hpp"

#include <fstream>
#include <iomanip>

namespace anyload {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(cat("cannot write ", path));
  out.precision(17);
  return out;
}

}  // namespace

void write_density_file(const std::string& path, const TetMesh& mesh,
                        const DensityField& density) {
  if (density.size() != mesh.num_tets()) fail("write_density_file: length mismatch");
  auto out = open_out(path);
  out << "# anyload density\n";
  out << "# mesh_hash " << mesh.hash << "\n";
  out << "# elements " << mesh.num_tets() << "\n";
  for (int e = 0; e < density.size(); ++e) out << density[e] << "\n";
}

DensityField read_density_file(const std::string& path, const TetMesh& mesh) {
  std::ifstream in(path);
  if (!in) fail(cat("cannot open density file ", path));
  std::string line;
  std::string hash;
  long count = -1;
  std::vector<double> values;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line[0] == '#') {
      std::istringstream ss(line.substr(1));
      std::string key;
      ss >> key;
      if (key == "mesh_hash") ss >> hash;
      if (key == "elements") ss >> count;
      continue;
    }
    const std::string trimmed = line;
    if (trimmed.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      values.push_back(std::stod(trimmed));
    } catch (const std::exception&) {
      fail(cat(path, ":", line_no, ": expected a density value"));
    }
  }
  if (hash.empty()) fail(cat(path, ": missing mesh_hash header"));
  if (hash != mesh.hash)
    fail(cat(path, ": density was written for mesh ", hash, " but the loaded mesh is ", mesh.hash));
  if (static_cast<int>(values.size()) != mesh.num_tets())
    fail(cat(path, ": ", values.size(), " values for ", mesh.num_tets(), " elements"));
  DensityField density(mesh.num_tets());
  for (int e = 0; e < mesh.num_tets(); ++e) {
    if (values[e] < 0.0 || values[e] > 1.0) fail(cat(path, ": density out of [0,1] at element ", e));
    density[e] = values[e];
  }
  return density;
}

void write_vtk(const std::string& path, const TetMesh& mesh,
               const std::map<std::string, Eigen::VectorXd>& cell_scalars,
               const std::map<std::string, Eigen::VectorXd>& point_scalars) {
  auto out = open_out(path);
  out << "# vtk DataFile Version 3.0\n";
  out << "anyload export\n";
  out << "ASCII\n";
  out << "DATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.num_nodes() << " double\n";
  for (int i = 0; i < mesh.num_nodes(); ++i)
    out << mesh.nodes(i, 0) << " " << mesh.nodes(i, 1) << " " << mesh.nodes(i, 2) << "\n";
  out << "CELLS " << mesh.num_tets() << " " << 5 * mesh.num_tets() << "\n";
  for (int e = 0; e < mesh.num_tets(); ++e)
    out << "4 " << mesh.tets(e, 0) << " " << mesh.tets(e, 1) << " " << mesh.tets(e, 2) << " "
        << mesh.tets(e, 3) << "\n";
  out << "CELL_TYPES " << mesh.num_tets() << "\n";
  for (int e = 0; e < mesh.num_tets(); ++e) out << "10\n";
  if (!cell_scalars.empty()) {
    out << "CELL_DATA " << mesh.num_tets() << "\n";
    for (const auto& [name, values] : cell_scalars) {
      if (values.size() != mesh.num_tets()) fail(cat("write_vtk: cell field ", name, " length mismatch"));
      out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
      for (int e = 0; e < values.size(); ++e) out << values[e] << "\n";
    }
  }
  if (!point_scalars.empty()) {
    out << "POINT_DATA " << mesh.num_nodes() << "\n";
    for (const auto& [name, values] : point_scalars) {
      if (values.size() != mesh.num_nodes()) fail(cat("write_vtk: point field ", name, " length mismatch"));
      out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
      for (int i = 0; i < values.size(); ++i) out << values[i] << "\n";
    }
  }
}

void write_criticality_csv(const std::string& path, const std::vector<int>& nodes,
                           const Eigen::VectorXd& values) {
  if (static_cast<int>(nodes.size()) != values.size())
    fail("write_criticality_csv: size mismatch");
  auto out = open_out(path);
  out << "node,criticality\n";
  for (std::size_t i = 0; i < nodes.size(); ++i) out << nodes[i] << "," << values[static_cast<int>(i)] << "\n";
}

void write_force_regions(const std::string& path, const ForceRegions& frs) {
  auto out = open_out(path);
  out << "# force regions: island_id node_id\n";
  for (std::size_t island = 0; island < frs.islands.size(); ++island)
    for (int node : frs.islands[island]) out << island << " " << node << "\n";
}

void write_weak_regions(const std::string& path, const WeakRegions& wrs) {
  auto out = open_out(path);
  out << "# weak region elements\n";
  for (int e : wrs.elements) out << e << "\n";
}

void write_search_trace(const std::string& path, const CriticalInstantResult& result) {
  auto out = open_out(path);
  out << "# hierarchical search trace\n";
  out << "# island node stress\n";
  for (const auto& entry : result.trace)
    out << entry.island << " " << entry.node << " " << entry.stress << "\n";
  out << "# evaluations (back-substitutions): " << result.fea_count << "\n";
  out << "# critical node: " << result.critical_node << "\n";
  out << "# sigma_cr: " << result.sigma_cr << "\n";
}

void write_critical_instant(const std::string& path, const CriticalInstantResult& result,
                            double budget, double patch_radius) {
  auto out = open_out(path);
  out.precision(17);
  out << "critical_node " << result.critical_node << "\n";
  out << "sigma_cr " << result.sigma_cr << "\n";
  out << "sigma_weak_region " << result.sigma_wr << "\n";
  out << "sigma_all_elements " << result.sigma_all << "\n";
  out << "fea_count " << result.fea_count << "\n";
  out << "force_budget " << budget << "\n";
  out << "patch_radius " << patch_radius << "\n";
}

void write_history_csv(const std::string& path, const std::vector<IterationRecord>& history) {
  auto out = open_out(path);
  out << "iteration,accepted,mass,sigma_cr,sigma_all,H,pnorm_bound,wr_size,critical_node,"
         "trust_radius,analysis_feas,oracle_equivalent\n";
  for (const auto& rec : history) {
    out << rec.iteration << "," << (rec.accepted ? 1 : 0) << "," << rec.mass << ","
        << rec.sigma_cr << "," << rec.sigma_all << "," << rec.H << "," << rec.pnorm_bound << ","
        << rec.wr_size << "," << rec.critical_node << "," << rec.trust_radius << ","
        << rec.analysis_feas << "," << rec.oracle_equivalent << "\n";
  }
}

void write_run_report(const std::string& path, const OptimizationResult& result,
                      int contact_size) {
  auto out = open_out(path);
  out << std::setprecision(6);
  out << "verdict: " << result.verdict << "\n";
  out << "iterations: " << result.iterations << "\n";
  out << "converged: " << (result.converged ? "yes" : "no") << "\n";
  out << "feasible_start: " << (result.feasible_start ? "yes" : "no") << "\n";
  out << "initial_volume_mm3: " << result.mass_initial << "\n";
  out << "optimized_volume_mm3: " << result.mass_final << "\n";
  out << "binarized_volume_mm3: " << result.mass_binarized << "\n";
  if (result.mass_initial > 0)
    out << "mass_reduction_percent: " << 100.0 * (1.0 - result.mass_binarized / result.mass_initial)
        << "\n";
  long total_feas = 0;
  int analysis_steps = 0;
  for (const auto& rec : result.history)
    if (rec.analysis_feas > 0) {
      total_feas += rec.analysis_feas;
      ++analysis_steps;
    }
  if (analysis_steps > 0) {
    out << "avg_feas_per_analysis_step: " << static_cast<double>(total_feas) / analysis_steps << "\n";
    out << "brute_force_feas_per_step: " << contact_size << "\n";
  }
  out << "verification_sigma_cr: " << result.verification.sigma_cr << "\n";
  out << "verification_limit: " << result.verification_limit << "\n";
  out << "verification_critical_node: " << result.verification.critical_node << "\n";
}

void write_manifest(const std::string& path, const std::string& config_echo,
                    const std::string& mesh_hash, std::uint64_t seed) {
  auto out = open_out(path);
  out << "# anyload " << kVersion << "\n";
  out << "# mesh_hash " << mesh_hash << "\n";
  out << "# seed " << seed << "\n";
  out << config_echo;
}

void write_mesh_files(const std::string& node_path, const std::string& ele_path,
                      const TetMesh& mesh) {
  {
    auto out = open_out(node_path);
    out << mesh.num_nodes() << " 3 0 0\n";
    for (int i = 0; i < mesh.num_nodes(); ++i)
      out << i << " " << mesh.nodes(i, 0) << " " << mesh.nodes(i, 1) << " " << mesh.nodes(i, 2)
          << "\n";
  }
  {
    auto out = open_out(ele_path);
    out << mesh.num_tets() << " 4 0\n";
    for (int e = 0; e < mesh.num_tets(); ++e)
      out << e << " " << mesh.tets(e, 0) << " " << mesh.tets(e, 1) << " " << mesh.tets(e, 2)
          << " " << mesh.tets(e, 3) << "\n";
  }
}

}  // namespace anyload
