#include "anyload/config.hpp"

#include "anyload/common.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <unordered_set>

namespace anyload {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& v, const std::string& where) {
  if (v == "inf" || v == "+inf") return std::numeric_limits<double>::infinity();
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    fail(cat(where, ": expected a number, got '", v, "'"));
  }
}

long parse_long(const std::string& v, const std::string& where) {
  try {
    std::size_t pos = 0;
    const long x = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    fail(cat(where, ": expected an integer, got '", v, "'"));
  }
}

std::vector<double> parse_list(const std::string& v, const std::string& where) {
  std::vector<double> out;
  std::string item;
  std::stringstream ss(v);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_double(item, where));
  }
  return out;
}

// One handler per known key; repeats accumulate where that makes sense.
using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& key_table() {
  static const std::map<std::string, Setter> table = {
      {"mesh.node", [](RunConfig& c, const std::string& v, const std::string&) { c.node_file = v; }},
      {"mesh.ele", [](RunConfig& c, const std::string& v, const std::string&) { c.ele_file = v; }},
      {"material.youngs_modulus",
       [](RunConfig& c, const std::string& v, const std::string& w) { c.material.youngs_modulus = parse_double(v, w); }},
      {"material.poisson_ratio",
       [](RunConfig& c, const std::string& v, const std::string& w) { c.material.poisson_ratio = parse_double(v, w); }},
      {"material.yield_strength",
       [](RunConfig& c, const std::string& v, const std::string& w) { c.material.yield_strength = parse_double(v, w); }},
      {"material.simp_exponent",
       [](RunConfig& c, const std::string& v, const std::string& w) { c.material.simp_exponent = parse_double(v, w); }},
      {"material.void_fraction",
       [](RunConfig& c, const std::string& v, const std::string& w) { c.material.void_fraction = parse_double(v, w); }},
      {"regions.fixed_box",
       [](RunConfig& c, const std::string& v, const std::string& w) {
         const auto vals = parse_list(v, w);
         if (vals.size() != 6) fail(cat(w, ": box needs 6 numbers"));
         std::array<double, 6> box;
         std::copy(vals.begin(), vals.end(), box.begin());
         c.fixed_boxes.push_back(box);
       }},
      {"regions.contact_box",
       [](RunConfig& c, const std::string& v, const std::string& w) {
         const auto vals = parse_list(v, w);
         if (vals.size() != 6) fail(cat(w, ": box needs 6 numbers"));
         std::array<double, 6> box;
         std::copy(vals.begin(), vals.end(), box.begin());
         c.contact_boxes.push_back(box);
       }},
      {"regions.fixed_nodes",
       [](RunConfig& c, const std::string& v, const std::string& w) {
         for (double x : parse_list(v, w)) c.fixed_nodes.push_back(static_cast<int>(x));
       }},
      {"regions.contact_nodes",
       [](RunConfig& c, const std::string& v, const std::string& w) {
         for (double x : parse_list(v, w)) c.contact_nodes.push_back(static_cast<int>(x));
       }},
      {"regions.shell_thickness",
       [](RunConfig& c, const std::string& v, const std::string& w) { c.shell_thickness = parse_double(v, w); }},
      {"load.force_budget",
       [](RunConfig& c, const std::string& v, const std::string& w) { c.force_budget = parse_double(v, w); }},
      {"load.patch_radius",
       [](RunConfig& c, const std::string& v, const std::string& w) {
         c.patch_radius = (v == "auto") ? -1.0 : parse_double(v, w);
       }},
      {"surrogate.sample_fraction",
       [](RunConfig& c, const std::string& v, const std::string& w) { c.sample_fraction = parse_double(v, w); }},
      {"surrogate.sample_count",
       [](RunConfig& c, const std::string& v, const std::string& w) { c.sample_count = static_cast<int>(parse_long(v, w)); }},
      {"surrogate.basis_q",
       [](RunConfig& c, const std::string& v, const std::string& w) {
         c.basis_q = (v == "auto") ? 0 : static_cast<int>(parse_long(v, w));
       }},
      {"surrogate.ridge",
       [](RunConfig& c, const std::string& v, const std::string& w) {
         c.ridge = (v == "auto") ? -1.0 : parse_double(v, w);
       }},
      {"weak_regions.num_modes",
       [](RunConfig& c, const std::string& v, const std::string& w) { c.wr_modes = static_cast<int>(parse_long(v, w)); }},
      {"weak_regions.fraction",
       [](RunConfig& c, const std::string& v, const std::string& w) { c.wr_fraction = parse_double(v, w); }},
      {"reduction.material_modes",
       [](RunConfig& c, const std::string& v, const std::string& w) { c.material_modes = static_cast<int>(parse_long(v, w)); }},
      {"reduction.kappa",
       [](RunConfig& c, const std::string& v, const std::string& w) { c.kappa = parse_double(v, w); }},
      {"reduction.x0",
       [](RunConfig& c, const std::string& v, const std::string& w) { c.x0 = parse_double(v, w); }},
      {"reduction.threshold",
       [](RunConfig& c, const std::string& v, const std::string& w) { c.threshold = parse_double(v, w); }},
      {"reduction.basis_cache",
       [](RunConfig& c, const std::string& v, const std::string&) { c.basis_cache = v; }},
      {"optimizer.tol_mass",
       [](RunConfig& c, const std::string& v, const std::string& w) { c.tol_mass = parse_double(v, w); }},
      {"optimizer.max_iters",
       [](RunConfig& c, const std::string& v, const std::string& w) { c.max_iters = static_cast<int>(parse_long(v, w)); }},
      {"optimizer.trust_radius",
       [](RunConfig& c, const std::string& v, const std::string& w) { c.trust_radius = parse_double(v, w); }},
      {"optimizer.feas_tol",
       [](RunConfig& c, const std::string& v, const std::string& w) { c.feas_tol = parse_double(v, w); }},
      {"optimizer.p_norm",
       [](RunConfig& c, const std::string& v, const std::string& w) { c.p_norm = parse_double(v, w); }},
      {"run.output_dir",
       [](RunConfig& c, const std::string& v, const std::string&) { c.output_dir = v; }},
      {"run.seed",
       [](RunConfig& c, const std::string& v, const std::string& w) { c.seed = static_cast<std::uint64_t>(parse_long(v, w)); }},
      {"run.threads",
       [](RunConfig& c, const std::string& v, const std::string& w) { c.threads = static_cast<int>(parse_long(v, w)); }},
      {"run.density_file",
       [](RunConfig& c, const std::string& v, const std::string&) { c.density_file = v; }},
  };
  return table;
}

void set_key(RunConfig& config, const std::string& full_key, const std::string& value,
             const std::string& where) {
  const auto& table = key_table();
  const auto it = table.find(full_key);
  if (it == table.end()) fail(cat(where, ": unknown key '", full_key, "'"));
  it->second(config, value, where);
}

}  // namespace

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(cat("cannot open config ", path));
  RunConfig config;
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = cat(path, ":", line_no);
    if (line.front() == '[') {
      if (line.back() != ']') fail(cat(where, ": malformed section header"));
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(cat(where, ": expected key = value"));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) fail(cat(where, ": key outside any [section]"));
    set_key(config, section + "." + key, value, where);
  }
  config.validate();
  return config;
}

void apply_override(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) fail(cat("override '", assignment, "': expected section.key=value"));
  set_key(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)),
          cat("override '", assignment, "'"));
}

void RunConfig::validate() const {
  material.validate();
  if (!(shell_thickness > 0)) fail("config: regions.shell_thickness must be positive");
  if (force_budget < 0) fail("config: load.force_budget must be nonnegative");
  if (!(sample_fraction > 0 && sample_fraction <= 1)) fail("config: surrogate.sample_fraction outside (0,1]");
  if (sample_count < 0) fail("config: surrogate.sample_count must be nonnegative");
  if (wr_modes < 1) fail("config: weak_regions.num_modes must be >= 1");
  if (!(wr_fraction > 0 && wr_fraction <= 1)) fail("config: weak_regions.fraction outside (0,1]");
  if (material_modes < 1) fail("config: reduction.material_modes must be >= 1");
  if (!(kappa > 0)) fail("config: reduction.kappa must be positive");
  if (!(threshold > 0 && threshold < 1)) fail("config: reduction.threshold outside (0,1)");
  if (!(tol_mass > 0)) fail("config: optimizer.tol_mass must be positive");
  if (max_iters < 0) fail("config: optimizer.max_iters must be nonnegative");
  if (!(trust_radius > 0)) fail("config: optimizer.trust_radius must be positive");
  if (!(feas_tol >= 0)) fail("config: optimizer.feas_tol must be nonnegative");
  if (!(p_norm > 1)) fail("config: optimizer.p_norm must exceed 1");
  if (threads < 1) fail("config: run.threads must be >= 1");
}

std::string config_echo(const RunConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "[mesh]\n"
     << "node = " << c.node_file << "\n"
     << "ele = " << c.ele_file << "\n\n";
  os << "[material]\n"
     << "youngs_modulus = " << c.material.youngs_modulus << "\n"
     << "poisson_ratio = " << c.material.poisson_ratio << "\n"
     << "yield_strength = " << c.material.yield_strength << "\n"
     << "simp_exponent = " << c.material.simp_exponent << "\n"
     << "void_fraction = " << c.material.void_fraction << "\n\n";
  os << "[regions]\n";
  for (const auto& b : c.fixed_boxes) {
    os << "fixed_box = ";
    for (int i = 0; i < 6; ++i) os << b[i] << (i + 1 < 6 ? "," : "\n");
  }
  for (const auto& b : c.contact_boxes) {
    os << "contact_box = ";
    for (int i = 0; i < 6; ++i) os << b[i] << (i + 1 < 6 ? "," : "\n");
  }
  if (!c.fixed_nodes.empty()) {
    os << "fixed_nodes = ";
    for (std::size_t i = 0; i < c.fixed_nodes.size(); ++i)
      os << c.fixed_nodes[i] << (i + 1 < c.fixed_nodes.size() ? "," : "\n");
  }
  if (!c.contact_nodes.empty()) {
    os << "contact_nodes = ";
    for (std::size_t i = 0; i < c.contact_nodes.size(); ++i)
      os << c.contact_nodes[i] << (i + 1 < c.contact_nodes.size() ? "," : "\n");
  }
  os << "shell_thickness = " << c.shell_thickness << "\n\n";
  os << "[load]\n"
     << "force_budget = " << c.force_budget << "\n"
     << "patch_radius = " << (c.patch_radius < 0 ? std::string("auto") : cat(c.patch_radius)) << "\n\n";
  os << "[surrogate]\n"
     << "sample_fraction = " << c.sample_fraction << "\n"
     << "sample_count = " << c.sample_count << "\n"
     << "basis_q = " << (c.basis_q == 0 ? std::string("auto") : cat(c.basis_q)) << "\n"
     << "ridge = " << (c.ridge < 0 ? std::string("auto") : cat(c.ridge)) << "\n\n";
  os << "[weak_regions]\n"
     << "num_modes = " << c.wr_modes << "\n"
     << "fraction = " << c.wr_fraction << "\n\n";
  os << "[reduction]\n"
     << "material_modes = " << c.material_modes << "\n"
     << "kappa = " << c.kappa << "\n"
     << "x0 = " << c.x0 << "\n"
     << "threshold = " << c.threshold << "\n";
  if (!c.basis_cache.empty()) os << "basis_cache = " << c.basis_cache << "\n";
  os << "\n[optimizer]\n"
     << "tol_mass = " << c.tol_mass << "\n"
     << "max_iters = " << c.max_iters << "\n"
     << "trust_radius = " << c.trust_radius << "\n"
     << "feas_tol = " << c.feas_tol << "\n"
     << "p_norm = " << c.p_norm << "\n\n";
  os << "[run]\n"
     << "output_dir = " << c.output_dir << "\n"
     << "seed = " << c.seed << "\n"
     << "threads = " << c.threads << "\n";
  if (!c.density_file.empty()) os << "density_file = " << c.density_file << "\n";
  return os.str();
}

namespace {

bool in_box(const Vec3& p, const std::array<double, 6>& box) {
  return p[0] >= box[0] && p[1] >= box[1] && p[2] >= box[2] && p[0] <= box[3] &&
         p[1] <= box[4] && p[2] <= box[5];
}

}  // namespace

RegionSpec resolve_regions(const TetMesh& mesh, const RunConfig& config) {
  RegionSpec regions;
  regions.shell_thickness = config.shell_thickness;

  std::unordered_set<int> fixed(config.fixed_nodes.begin(), config.fixed_nodes.end());
  for (int node : mesh.surface_nodes) {
    const Vec3 p = mesh.nodes.row(node);
    for (const auto& box : config.fixed_boxes)
      if (in_box(p, box)) fixed.insert(node);
  }
  regions.fixed_nodes.assign(fixed.begin(), fixed.end());
  std::sort(regions.fixed_nodes.begin(), regions.fixed_nodes.end());

  std::unordered_set<int> contact(config.contact_nodes.begin(), config.contact_nodes.end());
  if (config.contact_boxes.empty() && config.contact_nodes.empty()) {
    for (int node : mesh.surface_nodes) contact.insert(node);  // default: whole surface
  } else {
    for (int node : mesh.surface_nodes) {
      const Vec3 p = mesh.nodes.row(node);
      for (const auto& box : config.contact_boxes)
        if (in_box(p, box)) contact.insert(node);
    }
  }
  int dropped = 0;
  for (int node : regions.fixed_nodes) dropped += static_cast<int>(contact.erase(node));
  if (dropped > 0) warn(cat(dropped, " contact nodes overlapped the fixed set and were dropped"));
  regions.contact_nodes.assign(contact.begin(), contact.end());
  std::sort(regions.contact_nodes.begin(), regions.contact_nodes.end());
  if (regions.contact_nodes.empty()) fail("regions: contact region is empty after resolution");

  regions.shell_elements = tag_shell_elements(mesh, config.shell_thickness);
  validate_regions(mesh, regions);
  return regions;
}

double resolve_patch_radius(const TetMesh& mesh, const RunConfig& config) {
  if (config.patch_radius > 0) return config.patch_radius;
  return 2.0 * mesh.mean_surface_edge;
}

}  // namespace anyload
