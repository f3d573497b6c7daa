#include <gtest/gtest.h>

#include <cstdlib>
#include <sys/wait.h>

#include "mmpoint/io.hpp"
#include "mmpoint/pipeline.hpp"
#include "support.hpp"

using namespace mmpoint;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kSmallScene = R"({
  "frame_interval_s": 0.05,
  "n_frames": 2,
  "scatterers": [
    {"pos": [0.0, 20.0, 0.0], "vel": [0.0, -3.0, 0.0], "rcs": 1.0, "label": "car"},
    {"pos": [2.0, 35.0, 0.0], "vel": [0.0, 0.0, 0.0], "rcs": 2.0, "label": "roadside"}
  ]
})";

// Scatterer leaves the unambiguous range between frame 0 and frame 1.
const char* kEscapingScene = R"({
  "frame_interval_s": 0.5,
  "n_frames": 2,
  "scatterers": [{"pos": [0.0, 95.0, 0.0], "vel": [0.0, 20.0, 0.0], "rcs": 1.0, "label": "car"}]
})";

void write_layout(const fs::path& path, int n_rx) { write_text_file(path, serialize_layout(mmtest::ula_layout(n_rx))); }

// Config document with scene.json and layout.json next to it.
json base_config() {
  return json{{"scene", "scene.json"},
              {"layout", "layout.json"},
              {"seed", 7},
              {"noise_power", 1e-8},
              {"output_dir", "out"},
              {"products", json::array()}};
}

struct Workspace {
  mmtest::ScratchDir dir{"pipe"};
  explicit Workspace(const char* scene = kSmallScene) {
    write_text_file(dir / "scene.json", scene);
    write_layout(dir / "layout.json", 4);
  }
  RunConfig load(const json& cfg) const { return load_run_config(cfg.dump(), dir.path()); }
  fs::path config_file(const json& cfg, const std::string& name = "run.json") const {
    write_text_file(dir / name, cfg.dump(2));
    return dir / name;
  }
};

std::set<std::string> files_under(const fs::path& root) {
  std::set<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out.insert(fs::relative(e.path(), root).generic_string());
  return out;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(MMPOINT_CLI_PATH) + " " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string shq(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST(Pipeline, LoadsMinimalConfig) {
  Workspace ws;
  const RunConfig c = ws.load(base_config());
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.scene.scatterers.size(), 2u);
  EXPECT_EQ(c.layout.rx.size(), 4u);
  EXPECT_EQ(c.output_dir, ws.dir / "out");
  EXPECT_EQ(c.scene_path, ws.dir / "scene.json");
  EXPECT_TRUE(c.products.empty());
  EXPECT_EQ(c.radar.n_samples, RadarParams{}.n_samples);
}

TEST(Pipeline, ConfigReadsNestedSections) {
  Workspace ws;
  json cfg = base_config();
  cfg["cfar"] = {{"pfa", 1e-3}, {"train_range", 6}};
  cfg["angles"] = {{"zoom", 2}, {"window", "rect"}};
  cfg["ram"] = {{"mode", "zero_doppler_slice"}, {"max_angle_deg", 45.0}};
  cfg["clustering"] = {{"k_spatial", 3}, {"spatial_eps", 1.5}};
  cfg["products"] = {"cloud", "metrics", "cloud"};
  const RunConfig c = ws.load(cfg);
  EXPECT_EQ(c.detection.cfar.pfa, 1e-3);
  EXPECT_EQ(c.detection.cfar.train_range, 6);
  EXPECT_EQ(c.detection.zoom, 2);
  EXPECT_EQ(c.detection.window, Window::rect);
  EXPECT_EQ(c.ram.mode, RamMode::zero_doppler_slice);
  EXPECT_NEAR(rad2deg(c.ram.max_angle), 45.0, 1e-12);
  EXPECT_EQ(c.clustering.k_spatial, 3);
  ASSERT_TRUE(c.clustering.spatial_eps.has_value());
  EXPECT_EQ(*c.clustering.spatial_eps, 1.5);
  EXPECT_EQ(c.products, (std::vector<Product>{Product::cloud, Product::metrics}));
}

TEST(Pipeline, UnknownKeysAreSchemaErrors) {
  Workspace ws;
  json cfg = base_config();
  cfg["bogus"] = 1;
  try {
    ws.load(cfg);
    FAIL() << "no throw";
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("bogus"), std::string::npos) << e.what();
  }
  cfg = base_config();
  cfg["cfar"] = {{"pfa", 1e-3}, {"gaurd_range", 2}};
  try {
    ws.load(cfg);
    FAIL() << "no throw";
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("gaurd_range"), std::string::npos) << e.what();
  }
}

TEST(Pipeline, MalformedConfigsAreRejected) {
  Workspace ws;
  EXPECT_THROW(load_run_config("{", ws.dir.path()), SchemaError);
  EXPECT_THROW(load_run_config("[]", ws.dir.path()), SchemaError);

  json cfg = base_config();
  cfg.erase("seed");
  EXPECT_THROW(ws.load(cfg), SchemaError);

  cfg = base_config();
  cfg["seed"] = "seven";
  EXPECT_THROW(ws.load(cfg), SchemaError);

  cfg = base_config();
  cfg["products"] = {"cloud", "hologram"};
  EXPECT_THROW(ws.load(cfg), SchemaError);

  cfg = base_config();
  cfg["angles"] = {{"window", "kaiser"}};
  EXPECT_THROW(ws.load(cfg), SchemaError);
}

TEST(Pipeline, InvalidValuesAreValidationErrors) {
  Workspace ws;
  json cfg = base_config();
  cfg["scene"] = "nowhere.json";
  EXPECT_THROW(ws.load(cfg), ValidationError);

  cfg = base_config();
  cfg["cfar"] = {{"pfa", 0.0}};
  EXPECT_THROW(ws.load(cfg), ValidationError);

  cfg = base_config();
  cfg["noise_power"] = -1.0;
  EXPECT_THROW(ws.load(cfg), ValidationError);

  cfg = base_config();
  cfg["overlay_window"] = 0;
  EXPECT_THROW(ws.load(cfg), ValidationError);

  cfg = base_config();
  cfg["density_edges_m"] = {0.0, 10.0, 10.0};
  EXPECT_THROW(ws.load(cfg), ValidationError);

  cfg = base_config();
  cfg["radar"] = {{"n_samples", 100}};
  EXPECT_THROW(ws.load(cfg), ValidationError);

  EXPECT_THROW(load_run_config_file(ws.dir / "absent.json"), ValidationError);
}

TEST(Pipeline, ResolvedConfigOmitsOutputDir) {
  Workspace ws;
  json a = base_config();
  json b = base_config();
  b["output_dir"] = "elsewhere";
  const json ra = resolved_config(ws.load(a));
  EXPECT_EQ(ra, resolved_config(ws.load(b)));
  EXPECT_FALSE(ra.contains("output_dir"));
  EXPECT_EQ(ra["scene"]["sha256"], sha256_file(ws.dir / "scene.json"));
  EXPECT_EQ(ra["seed"], 7);
}

TEST(Pipeline, NoProductsWritesManifestOnly) {
  Workspace ws;
  const RunResult r = run_pipeline(ws.load(base_config()));
  ASSERT_TRUE(r.ok) << r.error;
  EXPECT_TRUE(r.outputs.empty());
  EXPECT_EQ(files_under(ws.dir / "out"), (std::set<std::string>{"manifest.json"}));
  const json m = json::parse(read_text_file(r.manifest_path));
  EXPECT_EQ(m["status"], "ok");
  EXPECT_TRUE(m["failed_stage"].is_null());
  EXPECT_TRUE(m["outputs"].empty());
  EXPECT_EQ(sha256_file(r.manifest_path), r.manifest_sha256);
}

TEST(Pipeline, RerunIsByteIdentical) {
  Workspace ws;
  json cfg = base_config();
  cfg["products"] = {"cloud", "clusters", "metrics"};
  const RunResult a = run_pipeline(ws.load(cfg));
  ASSERT_TRUE(a.ok) << a.error;
  const std::string csv_a = read_text_file(ws.dir / "out" / "points.csv");

  cfg["output_dir"] = "out2";
  const RunResult b = run_pipeline(ws.load(cfg), Exec::serial);
  ASSERT_TRUE(b.ok) << b.error;
  EXPECT_EQ(a.manifest_sha256, b.manifest_sha256);
  EXPECT_EQ(read_text_file(ws.dir / "out2" / "points.csv"), csv_a);

  // Both targets show up in the first frame.
  const auto m = json::parse(read_text_file(ws.dir / "out" / "metrics.json"));
  EXPECT_GE(m["frames"][0]["n_points"].get<int>(), 2);

  cfg["seed"] = 8;
  cfg["output_dir"] = "out3";
  const RunResult c = run_pipeline(ws.load(cfg));
  ASSERT_TRUE(c.ok) << c.error;
  EXPECT_NE(c.manifest_sha256, a.manifest_sha256);
}

TEST(Pipeline, OutputsStayInsideOutputDir) {
  Workspace ws;
  json cfg = base_config();
  cfg["products"] = {"rdm", "ram", "cloud", "clusters", "metrics"};
  const RunResult r = run_pipeline(ws.load(cfg));
  ASSERT_TRUE(r.ok) << r.error;

  std::set<std::string> listed{"manifest.json"};
  for (const auto& p : r.outputs) {
    EXPECT_FALSE(p.is_absolute());
    EXPECT_NE(p.begin()->string(), "..");
    listed.insert(p.generic_string());
  }
  EXPECT_EQ(files_under(ws.dir / "out"), listed);
  EXPECT_TRUE(listed.contains("rdm_f000.pgm"));
  EXPECT_TRUE(listed.contains("ram_f001.pgm.json"));

  // Nothing else appeared next to the config.
  EXPECT_EQ(files_under(ws.dir.path()).size(), listed.size() + 2);

  const json m = json::parse(read_text_file(r.manifest_path));
  for (const auto& o : m["outputs"])
    EXPECT_EQ(o["sha256"], sha256_file(ws.dir / "out" / o["path"].get<std::string>()));
}

TEST(Pipeline, StageFailureRemovesProducts) {
  Workspace ws(kEscapingScene);
  json cfg = base_config();
  cfg["products"] = {"rdm", "cloud"};
  const RunResult r = run_pipeline(ws.load(cfg));
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.failed_stage, "simulate");
  EXPECT_NE(r.error.find("scatterer 0"), std::string::npos) << r.error;
  EXPECT_TRUE(r.outputs.empty());
  EXPECT_EQ(files_under(ws.dir / "out"), (std::set<std::string>{"manifest.json"}));
  const json m = json::parse(read_text_file(r.manifest_path));
  EXPECT_EQ(m["status"], "failed");
  EXPECT_EQ(m["failed_stage"], "simulate");
}

TEST(Pipeline, CliExitCodes) {
  Workspace ws;
  json cfg = base_config();
  cfg["products"] = {"cloud"};
  const fs::path good = ws.config_file(cfg);
  const fs::path log = ws.dir / "cli.log";

  EXPECT_EQ(run_cli("run " + shq(good), log), 0) << read_text_file(log);
  EXPECT_NE(read_text_file(log).find("sha256"), std::string::npos);

  EXPECT_EQ(run_cli("run " + shq(ws.dir / "absent.json"), log), 2);
  json bad = base_config();
  bad["extra"] = true;
  EXPECT_EQ(run_cli("run " + shq(ws.config_file(bad, "bad.json")), log), 2);
  EXPECT_NE(read_text_file(log).find("extra"), std::string::npos);
  EXPECT_EQ(run_cli("run " + shq(good) + " --products cloud,nope", log), 2);
  EXPECT_EQ(run_cli("frobnicate", log), 2);

  write_text_file(ws.dir / "scene.json", kEscapingScene);
  EXPECT_EQ(run_cli("run " + shq(good), log), 3);
  EXPECT_NE(read_text_file(log).find("simulate"), std::string::npos);
}

TEST(Pipeline, CliSeedAndOutOverrides) {
  Workspace ws;
  const fs::path cfg = ws.config_file(base_config());
  const fs::path log = ws.dir / "cli.log";
  ASSERT_EQ(run_cli("run " + shq(cfg) + " --seed 8 --out " + shq(ws.dir / "o"), log), 0) << read_text_file(log);
  const json m = json::parse(read_text_file(ws.dir / "o" / "manifest.json"));
  EXPECT_EQ(m["config"]["seed"], 8);
}

TEST(Pipeline, CliAfm) {
  mmtest::ScratchDir dir("afm");
  const fs::path log = dir / "afm.log";
  ASSERT_EQ(run_cli("afm " + shq(mmtest::source_path("data/layout_ula16.json")) + " --image " +
                        shq(dir / "afm.pgm"),
                    log),
            0)
      << read_text_file(log);
  const json j = json::parse(read_text_file(log));
  EXPECT_EQ(j["virtual_elements"], 16);
  EXPECT_TRUE(j["el_resolution_deg"].is_null());
  EXPECT_NEAR(j["az_resolution_deg"].get<double>(), rad2deg(0.886 / 8.0), 0.1);
  EXPECT_TRUE(fs::exists(dir / "afm.pgm.json"));
  EXPECT_EQ(run_cli("afm " + shq(dir / "none.json"), log), 2);
}

// Golden hash of the shipped demo run. Regenerate with
// `mmpoint run data/demo/run.json` after any intended output change.
TEST(Pipeline, DemoManifestMatchesGolden) {
  mmtest::ScratchDir dir("demo");
  RunConfig c = load_run_config_file(mmtest::source_path("data/demo/run.json"));
  c.output_dir = dir / "out";
  const RunResult r = run_pipeline(c);
  ASSERT_TRUE(r.ok) << r.error;
  std::string golden = read_text_file(mmtest::source_path("tests/golden/demo_manifest.sha256"));
  golden.erase(golden.find_last_not_of(" \n") + 1);
  EXPECT_EQ(r.manifest_sha256, golden);
}

// --- mask evaluation ---

namespace {

// 20 x 16 grid, pitch 0.5, x in [-5, 4.5], y in [0, 7.5].
CartesianMap demo_grid() {
  CartesianMap m;
  m.x0 = -5.0;
  m.y0 = 0.0;
  m.pitch = 0.5;
  m.nx = 20;
  m.ny = 16;
  m.values.assign(m.nx * m.ny, 1.0);
  return m;
}

// Mask with cells whose centres fall inside [x_lo, x_hi] x [y_lo, y_hi].
GrayImage box_mask(const CartesianMap& g, double x_lo, double y_lo, double x_hi, double y_hi) {
  GrayImage img;
  img.width = g.nx;
  img.height = g.ny;
  img.maxval = 255;
  img.pixels.assign(g.nx * g.ny, 0);
  for (std::size_t iy = 0; iy < g.ny; ++iy)
    for (std::size_t ix = 0; ix < g.nx; ++ix)
      if (g.x(ix) >= x_lo && g.x(ix) <= x_hi && g.y0 + g.pitch * iy >= y_lo && g.y0 + g.pitch * iy <= y_hi)
        img.pixels[iy * g.nx + ix] = 255;
  return img;
}

}  // namespace

TEST(Pipeline, EvalMasksSelfIsOne) {
  mmtest::ScratchDir dir("eval");
  const CartesianMap g = demo_grid();
  write_ram_image(dir / "ram.pgm", g);
  write_text_file(dir / "pred.pgm", encode_pgm(box_mask(g, -2.1, 1.9, 1.1, 4.1)));
  const MaskReport r = evaluate_masks(dir / "ram.pgm", dir / "pred.pgm", dir / "pred.pgm");
  EXPECT_EQ(r.overall_iou, 1.0);
  EXPECT_TRUE(r.regions.empty());
}

TEST(Pipeline, EvalMasksShiftedBox) {
  mmtest::ScratchDir dir("eval");
  const CartesianMap g = demo_grid();
  write_ram_image(dir / "ram.pgm", g);
  // 7 x 5 cells against the same box shifted one metre (2 cells) in x:
  // overlap 5 x 5, union 9 x 5.
  write_text_file(dir / "pred.pgm", encode_pgm(box_mask(g, -2.1, 1.9, 1.1, 4.1)));
  write_text_file(dir / "truth.pgm", encode_pgm(box_mask(g, -1.1, 1.9, 2.1, 4.1)));
  const MaskReport r = evaluate_masks(dir / "ram.pgm", dir / "pred.pgm", dir / "truth.pgm");
  EXPECT_NEAR(r.overall_iou, 25.0 / 45.0, 1e-12);

  // The same truth as a regions document; edges sit between cell centres.
  write_text_file(dir / "regions.json", R"({"regions": [{"name": "curb", "box": [-1.1, 1.9, 2.1, 4.1]}]})");
  const MaskReport rr = evaluate_masks(dir / "ram.pgm", dir / "pred.pgm", dir / "regions.json");
  EXPECT_NEAR(rr.overall_iou, 25.0 / 45.0, 1e-12);
  ASSERT_EQ(rr.regions.size(), 1u);
  EXPECT_EQ(rr.regions[0].first, "curb");
  EXPECT_NEAR(rr.regions[0].second, 25.0 / 45.0, 1e-12);

  const json j = rr.to_json();
  EXPECT_EQ(j["regions"][0]["name"], "curb");
}

TEST(Pipeline, EvalMasksPerRegionIgnoresFarAwayErrors) {
  mmtest::ScratchDir dir("eval");
  const CartesianMap g = demo_grid();
  write_ram_image(dir / "ram.pgm", g);
  GrayImage pred = box_mask(g, -4.1, 0.9, -2.9, 2.1);  // matches region a exactly
  const GrayImage stray = box_mask(g, 3.4, 6.4, 4.6, 7.6);
  for (std::size_t i = 0; i < pred.pixels.size(); ++i) pred.pixels[i] |= stray.pixels[i];
  write_text_file(dir / "pred.pgm", encode_pgm(pred));
  write_text_file(dir / "regions.json", R"({"regions": [
    {"name": "a", "polygon": [[-4.1, 0.9], [-2.9, 0.9], [-2.9, 2.1], [-4.1, 2.1]]},
    {"name": "b", "box": [0.9, 4.9, 2.1, 6.1]}]})");
  const MaskReport r = evaluate_masks(dir / "ram.pgm", dir / "pred.pgm", dir / "regions.json");
  ASSERT_EQ(r.regions.size(), 2u);
  EXPECT_EQ(r.regions[0].second, 1.0);
  EXPECT_EQ(r.regions[1].second, 0.0);
  // Overall: 9 matched cells, 9 cells of b missed, 9 stray cells.
  EXPECT_NEAR(r.overall_iou, 9.0 / 27.0, 1e-12);
}

TEST(Pipeline, EvalMasksErrors) {
  mmtest::ScratchDir dir("eval");
  const CartesianMap g = demo_grid();
  write_ram_image(dir / "ram.pgm", g);
  GrayImage small;
  small.width = 4;
  small.height = 4;
  small.maxval = 255;
  small.pixels.assign(16, 255);
  write_text_file(dir / "small.pgm", encode_pgm(small));
  write_text_file(dir / "pred.pgm", encode_pgm(box_mask(g, -2.1, 1.9, 1.1, 4.1)));
  EXPECT_THROW(evaluate_masks(dir / "ram.pgm", dir / "small.pgm", dir / "pred.pgm"), DomainError);
  EXPECT_THROW(evaluate_masks(dir / "ram.pgm", dir / "pred.pgm", dir / "small.pgm"), DomainError);

  write_text_file(dir / "r1.json", R"({"areas": []})");
  EXPECT_THROW(evaluate_masks(dir / "ram.pgm", dir / "pred.pgm", dir / "r1.json"), SchemaError);
  write_text_file(dir / "r2.json", R"({"regions": [{"name": "x", "box": [0, 1, 2]}]})");
  EXPECT_THROW(evaluate_masks(dir / "ram.pgm", dir / "pred.pgm", dir / "r2.json"), SchemaError);
  write_text_file(dir / "r3.json", R"({"regions": [{"name": "x"}]})");
  EXPECT_THROW(evaluate_masks(dir / "ram.pgm", dir / "pred.pgm", dir / "r3.json"), SchemaError);
}

TEST(Pipeline, LoadRegions) {
  const auto regs = load_regions(R"({"regions": [{"box": [0, 0, 2, 1]}, {"name": "t", "polygon": [[0,0],[1,0],[0,1]]}]})");
  ASSERT_EQ(regs.size(), 2u);
  EXPECT_EQ(regs[0].first, "regions[0]");
  EXPECT_NEAR(regs[0].second.area(), 2.0, 1e-12);
  EXPECT_EQ(regs[1].first, "t");
  EXPECT_NEAR(regs[1].second.area(), 0.5, 1e-12);
}

TEST(Pipeline, ProductNames) {
  for (auto p : {Product::rdm, Product::ram, Product::cloud, Product::clusters, Product::metrics})
    EXPECT_EQ(product_from_string(to_string(p)), p);
  EXPECT_THROW(product_from_string("pointcloud"), SchemaError);
}
