#pragma once

#include "anyload/criticality.hpp"
#include "anyload/mesh.hpp"
#include "anyload/optimizer.hpp"

#include <map>
#include <string>
#include <vector>

namespace anyload {

/// Density file: '#'-prefixed header carrying the mesh fingerprint, then one
/// value per line in element order. Reading verifies the fingerprint.
void write_density_file(const std::string& path, const TetMesh& mesh, const DensityField& density);
DensityField read_density_file(const std::string& path, const TetMesh& mesh);

/// Legacy ASCII unstructured-grid file (tetra cells, type 10) with the given
/// per-cell and per-point scalar fields.
void write_vtk(const std::string& path, const TetMesh& mesh,
               const std::map<std::string, Eigen::VectorXd>& cell_scalars,
               const std::map<std::string, Eigen::VectorXd>& point_scalars);

/// node_index,value rows.
void write_criticality_csv(const std::string& path, const std::vector<int>& nodes,
                           const Eigen::VectorXd& values);

void write_force_regions(const std::string& path, const ForceRegions& frs);
void write_weak_regions(const std::string& path, const WeakRegions& wrs);
void write_search_trace(const std::string& path, const CriticalInstantResult& result);
void write_critical_instant(const std::string& path, const CriticalInstantResult& result,
                            double budget, double patch_radius);

void write_history_csv(const std::string& path, const std::vector<IterationRecord>& history);
void write_run_report(const std::string& path, const OptimizationResult& result,
                      int contact_size);

/// Config echo + version + seed; everything needed to reproduce the run.
void write_manifest(const std::string& path, const std::string& config_echo,
                    const std::string& mesh_hash, std::uint64_t seed);

void write_mesh_files(const std::string& node_path, const std::string& ele_path,
                      const TetMesh& mesh);

}  // namespace anyload
