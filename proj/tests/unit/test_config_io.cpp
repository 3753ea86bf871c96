#include "anyload/config.hpp"
#include "anyload/io.hpp"

#include "anyload/common.hpp"
#include "anyload/meshgen.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace anyload;
using namespace anyload::testing;

namespace {

const char* kSampleConfig = R"(# sample run
[mesh]
node = bar.node
ele = bar.ele

[material]
youngs_modulus = 2100
poisson_ratio = 0.3
yield_strength = 1.7

[regions]
fixed_box = -0.1,-0.1,-0.1, 1.1, 0.1, 8.1
fixed_box = 30.9,-0.1,-0.1, 32.1, 0.1, 8.1
contact_box = -0.1, 7.9, -0.1, 32.1, 8.1, 8.1
shell_thickness = 0.6

[load]
force_budget = 4.0
patch_radius = auto

[surrogate]
sample_fraction = 0.1

[run]
output_dir = out
seed = 3
)";

std::string write_sample(const std::string& name, const std::string& content) {
  const std::string path = temp_dir() + "/" + name;
  write_file(path, content);
  return path;
}

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("round-trips through its own echo") {
    const RunConfig a = parse_config(write_sample("a.cfg", kSampleConfig));
    const RunConfig b = parse_config(write_sample("b.cfg", config_echo(a)));
    CHECK(b.material.yield_strength == a.material.yield_strength);
    CHECK(b.fixed_boxes.size() == a.fixed_boxes.size());
    CHECK(b.force_budget == a.force_budget);
    CHECK(b.patch_radius == a.patch_radius);
    CHECK(b.sample_fraction == a.sample_fraction);
    CHECK(b.seed == a.seed);
    CHECK(config_echo(a) == config_echo(b));
  }
  SUBCASE("unknown keys are rejected with the location") {
    const std::string path = write_sample("bad.cfg", "[material]\nyoungs_modulus = 1\nbogus = 2\n");
    CHECK_THROWS_WITH_AS(parse_config(path), doctest::Contains("unknown key"), Error);
  }
  SUBCASE("keys outside sections are rejected") {
    const std::string path = write_sample("loose.cfg", "force_budget = 1\n");
    CHECK_THROWS_AS(parse_config(path), Error);
  }
  SUBCASE("invalid values are rejected") {
    CHECK_THROWS_AS(parse_config(write_sample("neg.cfg", "[load]\nforce_budget = -2\n")), Error);
    CHECK_THROWS_AS(
        parse_config(write_sample("frac.cfg", "[surrogate]\nsample_fraction = 1.5\n")), Error);
    CHECK_THROWS_AS(parse_config(write_sample("nan.cfg", "[load]\nforce_budget = abc\n")), Error);
  }
  SUBCASE("overrides beat the file") {
    RunConfig config = parse_config(write_sample("c.cfg", kSampleConfig));
    apply_override(config, "load.force_budget=5.5");
    CHECK(config.force_budget == 5.5);
    CHECK_THROWS_AS(apply_override(config, "load.bogus=1"), Error);
    CHECK_THROWS_AS(apply_override(config, "malformed"), Error);
  }
  SUBCASE("infinite yield strength is accepted") {
    RunConfig config = parse_config(write_sample("d.cfg", kSampleConfig));
    apply_override(config, "material.yield_strength=inf");
    CHECK(std::isinf(config.material.yield_strength));
  }
}

TEST_CASE("region resolution from boxes") {
  const TetMesh mesh = meshgen::two_neck_plate(1.0);
  RunConfig config = parse_config(write_sample("r.cfg", kSampleConfig));
  const RegionSpec regions = resolve_regions(mesh, config);

  for (int node : regions.fixed_nodes) {
    CHECK(mesh.nodes(node, 1) <= 0.1);
    CHECK((mesh.nodes(node, 0) <= 1.1 || mesh.nodes(node, 0) >= 30.9));
  }
  for (int node : regions.contact_nodes) CHECK(mesh.nodes(node, 1) >= 7.9);
  CHECK(!regions.shell_elements.empty());

  SUBCASE("contact defaults to the whole non-fixed surface") {
    RunConfig open = config;
    open.contact_boxes.clear();
    const RegionSpec wide = resolve_regions(mesh, open);
    CHECK(wide.contact_nodes.size() ==
          mesh.surface_nodes.size() - wide.fixed_nodes.size());
  }
  SUBCASE("patch radius auto rule") {
    CHECK(resolve_patch_radius(mesh, config) == doctest::Approx(2.0 * mesh.mean_surface_edge));
    RunConfig fixed_r = config;
    fixed_r.patch_radius = 1.25;
    CHECK(resolve_patch_radius(mesh, fixed_r) == 1.25);
  }
}

TEST_CASE("density files") {
  const TetMesh mesh = meshgen::box(Vec3(2, 1, 1), Eigen::Vector3i(4, 2, 2));
  const std::string path = temp_dir() + "/density.txt";
  auto gen = rng(5);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  DensityField rho(mesh.num_tets());
  for (int e = 0; e < rho.size(); ++e) rho[e] = unif(gen);

  write_density_file(path, mesh, rho);
  const DensityField read = read_density_file(path, mesh);
  CHECK((read - rho).cwiseAbs().maxCoeff() == 0.0);

  SUBCASE("mesh mismatch is fatal") {
    const TetMesh other = meshgen::box(Vec3(2, 1, 1.01), Eigen::Vector3i(4, 2, 2));
    CHECK_THROWS_WITH_AS(read_density_file(path, other), doctest::Contains("mesh"), Error);
  }
  SUBCASE("length mismatch is fatal") {
    std::ofstream out(path, std::ios::app);
    out << "0.5\n";
    out.close();
    CHECK_THROWS_AS(read_density_file(path, mesh), Error);
  }
}

TEST_CASE("mesh files round-trip") {
  const TetMesh mesh = meshgen::two_neck_plate(2.0);
  const std::string node = temp_dir() + "/rt.node";
  const std::string ele = temp_dir() + "/rt.ele";
  write_mesh_files(node, ele, mesh);
  const TetMesh back = load_tet_mesh(node, ele);
  CHECK(back.hash == mesh.hash);
}

TEST_CASE("legacy grid export carries the advertised sections") {
  const TetMesh mesh = meshgen::box(Vec3(1, 1, 1), Eigen::Vector3i(1, 1, 1));
  const std::string path = temp_dir() + "/out.vtk";
  Eigen::VectorXd cell = Eigen::VectorXd::LinSpaced(mesh.num_tets(), 0.0, 1.0);
  Eigen::VectorXd point = Eigen::VectorXd::LinSpaced(mesh.num_nodes(), -1.0, 1.0);
  write_vtk(path, mesh, {{"von_mises", cell}, {"density", cell}}, {{"criticality", point}});

  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(text.find("DATASET UNSTRUCTURED_GRID") != std::string::npos);
  CHECK(text.find("CELL_TYPES") != std::string::npos);
  CHECK(text.find("\n10\n") != std::string::npos);  // tetra cell type
  CHECK(text.find("CELL_DATA") != std::string::npos);
  CHECK(text.find("SCALARS von_mises double 1") != std::string::npos);
  CHECK(text.find("SCALARS density double 1") != std::string::npos);
  CHECK(text.find("POINT_DATA") != std::string::npos);
  CHECK(text.find("SCALARS criticality double 1") != std::string::npos);
}

TEST_CASE("manifest embeds version, fingerprint, and the config echo") {
  const std::string path = temp_dir() + "/manifest.txt";
  write_manifest(path, "[mesh]\nnode = x\n", "abc123", 42);
  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(text.find(kVersion) != std::string::npos);
  CHECK(text.find("abc123") != std::string::npos);
  CHECK(text.find("seed 42") != std::string::npos);
  CHECK(text.find("[mesh]") != std::string::npos);
}
