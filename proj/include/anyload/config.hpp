#pragma once

#include "anyload/fem.hpp"
#include "anyload/mesh.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace anyload {

inline constexpr const char* kVersion = "0.1.0";

/// Everything a run needs, read from a sectioned key=value file. Unknown
/// keys are rejected so typos cannot silently fall back to defaults.
struct RunConfig {
  // [mesh]
  std::string node_file;
  std::string ele_file;

  // [material]
  MaterialModel material;

  // [regions] boxes are xmin,ymin,zmin,xmax,ymax,zmax over surface nodes
  std::vector<std::array<double, 6>> fixed_boxes;
  std::vector<std::array<double, 6>> contact_boxes;
  std::vector<int> fixed_nodes;
  std::vector<int> contact_nodes;
  double shell_thickness = 1.0;  // mm

  // [load]
  double force_budget = 1.0;   // N
  double patch_radius = -1.0;  // mm; negative = 2 x mean surface edge length

  // [surrogate]
  double sample_fraction = 0.05;
  int sample_count = 0;  // 0 = ceil(sample_fraction * contact size)
  int basis_q = 0;       // 0 = automatic
  double ridge = -1.0;   // negative = scale-relative default

  // [weak_regions]
  int wr_modes = 15;
  double wr_fraction = 0.025;

  // [reduction]
  int material_modes = 15;
  double kappa = 5.0;
  double x0 = 2.0;
  double threshold = 0.5;
  std::string basis_cache;  // directory; empty disables caching

  // [optimizer]
  double tol_mass = 1e-4;
  int max_iters = 300;
  double trust_radius = 0.5;
  double feas_tol = 0.01;
  double p_norm = 15.0;

  // [run]
  std::string output_dir = "out";
  std::uint64_t seed = 1;
  int threads = 1;
  std::string density_file;  // optional starting density for analyze/oracle

  void validate() const;
};

RunConfig parse_config(const std::string& path);

/// Applies one "section.key=value" override (CLI flags beat the file).
void apply_override(RunConfig& config, const std::string& assignment);

/// Canonical echo of every setting, reproducing the run when fed back in.
std::string config_echo(const RunConfig& config);

/// Resolves boxes and explicit lists into node sets, tags the shell, and
/// validates. Contact defaults to every surface node that is not fixed.
/// Contact nodes that also match the fixed set are dropped with a warning.
RegionSpec resolve_regions(const TetMesh& mesh, const RunConfig& config);

/// Effective patch radius (config value or the mesh-derived default).
double resolve_patch_radius(const TetMesh& mesh, const RunConfig& config);

}  // namespace anyload
