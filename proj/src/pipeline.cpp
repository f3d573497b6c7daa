#include "mmpoint/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "mmpoint/io.hpp"

namespace mmpoint {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kProductNames[] = {"rdm", "ram", "cloud", "clusters", "metrics"};

// Reads keys out of one JSON object and rejects any it did not consume.
class Reader {
 public:
  Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw SchemaError(path_ + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!obj_.contains(key)) return;
    try {
      out = obj_.at(key).get<T>();
    } catch (const json::exception&) {
      throw SchemaError(path_ + "." + key + ": wrong type");
    }
  }

  template <typename T>
  void get(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (!obj_.contains(key) || obj_.at(key).is_null()) return;
    T v{};
    get(key, v);
    out = v;
  }

  template <typename T>
  T require(const char* key) {
    if (!obj_.contains(key)) throw SchemaError(path_ + ": missing required key '" + key + "'");
    T v{};
    get(key, v);
    return v;
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return obj_.contains(key) ? &obj_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [k, v] : obj_.items())
      if (!seen_.contains(k)) throw SchemaError(path_ + ": unknown key '" + k + "'");
  }

  std::string sub(const char* key) const { return path_ + "." + key; }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

Window window_from_string(const std::string& s) {
  if (s == "hann") return Window::hann;
  if (s == "rect") return Window::rect;
  throw SchemaError("unknown window '" + s + "'");
}

std::string_view to_string(Window w) { return w == Window::hann ? "hann" : "rect"; }

RamMode ram_mode_from_string(const std::string& s) {
  if (s == "static_scene") return RamMode::static_scene;
  if (s == "zero_doppler_slice") return RamMode::zero_doppler_slice;
  throw SchemaError("unknown ram mode '" + s + "'");
}

std::string_view to_string(RamMode m) { return m == RamMode::static_scene ? "static_scene" : "zero_doppler_slice"; }

fs::path resolve(const fs::path& base, const std::string& ref) {
  fs::path p(ref);
  return p.is_absolute() ? p : base / p;
}

std::string frame_tag(int frame) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "f%03d", frame);
  return buf;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
json optional_json(const std::optional<int>& v) { return v ? json(*v) : json(nullptr); }

struct StageError {
  std::string stage;
  std::string message;
};

}  // namespace

std::string_view to_string(Product p) { return kProductNames[static_cast<int>(p)]; }

Product product_from_string(std::string_view name) {
  for (std::size_t i = 0; i < std::size(kProductNames); ++i)
    if (kProductNames[i] == name) return static_cast<Product>(i);
  throw SchemaError("unknown product '" + std::string(name) + "'");
}

RunConfig load_run_config(std::string_view text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("run config: ") + e.what());
  }
  RunConfig c;
  Reader top(doc, "config");
  c.scene_ref = top.require<std::string>("scene");
  c.layout_ref = top.require<std::string>("layout");
  c.seed = top.require<std::uint64_t>("seed");
  c.output_dir = resolve(base_dir, top.require<std::string>("output_dir"));
  top.get("noise_power", c.noise_power);
  top.get("overlay_window", c.overlay_window);
  top.get("density_edges_m", c.density_edges);

  if (const json* j = top.child("radar")) {
    Reader r(*j, top.sub("radar"));
    r.get("fc_hz", c.radar.fc);
    r.get("kr_hz_per_s", c.radar.kr);
    r.get("tp_s", c.radar.tp);
    r.get("fs_hz", c.radar.fs);
    r.get("n_samples", c.radar.n_samples);
    r.get("n_chirps", c.radar.n_chirps);
    r.get("ta_s", c.radar.ta);
    r.get("residual_video_phase", c.radar.residual_video_phase);
    r.finish();
  }
  if (const json* j = top.child("cfar")) {
    Reader r(*j, top.sub("cfar"));
    r.get("guard_range", c.detection.cfar.guard_range);
    r.get("guard_doppler", c.detection.cfar.guard_doppler);
    r.get("train_range", c.detection.cfar.train_range);
    r.get("train_doppler", c.detection.cfar.train_doppler);
    r.get("pfa", c.detection.cfar.pfa);
    r.get("min_abs_power", c.detection.cfar.min_abs_power);
    r.finish();
  }
  if (const json* j = top.child("angles")) {
    Reader r(*j, top.sub("angles"));
    std::string window(to_string(c.detection.window));
    r.get("window", window);
    c.detection.window = window_from_string(window);
    r.get("zoom", c.detection.zoom);
    r.get("max_peaks", c.detection.max_angle_peaks);
    r.get("peak_rel", c.detection.angle_peak_rel);
    r.get("compensate_tdm", c.detection.compensate_tdm);
    r.finish();
  }
  if (const json* j = top.child("ram")) {
    Reader r(*j, top.sub("ram"));
    std::string mode(to_string(c.ram.mode));
    r.get("mode", mode);
    c.ram.mode = ram_mode_from_string(mode);
    r.get("slow_time_index", c.ram.slow_time_index);
    r.get("n_angle_fft", c.ram.n_angle_fft);
    double max_deg = rad2deg(c.ram.max_angle);
    r.get("max_angle_deg", max_deg);
    c.ram.max_angle = deg2rad(max_deg);
    r.get("pixel_pitch_m", c.ram.pixel_pitch);
    r.finish();
  }
  if (const json* j = top.child("clustering")) {
    Reader r(*j, top.sub("clustering"));
    auto& k = c.clustering;
    r.get("k_velocity", k.k_velocity);
    r.get("k_spatial", k.k_spatial);
    r.get("min_pts_velocity", k.min_pts_velocity);
    r.get("min_pts_spatial", k.min_pts_spatial);
    r.get("velocity_eps", k.velocity_eps);
    r.get("spatial_eps", k.spatial_eps);
    r.get("velocity_eps_floor", k.velocity_eps_floor);
    r.get("spatial_eps_floor", k.spatial_eps_floor);
    r.get("min_cluster_size", k.min_cluster_size);
    r.get("max_extent_m", k.max_extent);
    r.get("max_aspect", k.max_aspect);
    r.get("min_extent_m", k.min_extent);
    r.get("tag_mode", k.tag_mode);
    r.finish();
  }
  if (const json* j = top.child("overlay")) {
    Reader r(*j, top.sub("overlay"));
    r.get("compensate", c.overlay.compensate);
    r.get("stationary_velocity", c.overlay.stationary_velocity);
    r.finish();
  }
  std::vector<std::string> products;
  top.get("products", products);
  for (const auto& p : products) {
    const Product prod = product_from_string(p);
    if (std::find(c.products.begin(), c.products.end(), prod) == c.products.end()) c.products.push_back(prod);
  }
  top.finish();

  c.scene_path = resolve(base_dir, c.scene_ref);
  c.layout_path = resolve(base_dir, c.layout_ref);
  for (const auto& p : {c.scene_path, c.layout_path})
    if (!fs::is_regular_file(p)) throw ValidationError("referenced file does not exist: " + p.string());

  c.scene = load_scene_file(c.scene_path.string());
  c.layout = load_layout_file(c.layout_path.string());
  validate(c.radar, c.layout.tx.size());
  if (c.noise_power < 0.0) throw ValidationError("noise_power must be >= 0");
  if (c.overlay_window < 1) throw ValidationError("overlay_window must be >= 1");
  if (c.clustering.k_velocity < 1 || c.clustering.k_spatial < 1) throw ValidationError("clustering k must be >= 1");
  for (const auto& mp : {c.clustering.min_pts_velocity, c.clustering.min_pts_spatial})
    if (mp && *mp < 1) throw ValidationError("clustering min_pts must be >= 1");
  if (c.detection.cfar.pfa <= 0.0 || c.detection.cfar.pfa >= 1.0) throw ValidationError("cfar.pfa must be in (0, 1)");
  if (c.density_edges.size() < 2) throw ValidationError("density_edges_m needs at least two edges");
  for (std::size_t i = 1; i < c.density_edges.size(); ++i)
    if (!(c.density_edges[i] > c.density_edges[i - 1])) throw ValidationError("density_edges_m must increase");
  return c;
}

RunConfig load_run_config_file(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw ValidationError("config file does not exist: " + path.string());
  return load_run_config(read_text_file(path), path.parent_path());
}

json resolved_config(const RunConfig& c) {
  json j;
  j["scene"] = {{"path", c.scene_ref}, {"sha256", sha256_file(c.scene_path)}};
  j["layout"] = {{"path", c.layout_ref}, {"sha256", sha256_file(c.layout_path)}};
  j["seed"] = c.seed;
  j["noise_power"] = c.noise_power;
  j["radar"] = {{"fc_hz", c.radar.fc},       {"kr_hz_per_s", c.radar.kr}, {"tp_s", c.radar.tp},
                {"fs_hz", c.radar.fs},       {"n_samples", c.radar.n_samples},
                {"n_chirps", c.radar.n_chirps}, {"ta_s", c.radar.ta},
                {"residual_video_phase", c.radar.residual_video_phase}};
  const auto& cf = c.detection.cfar;
  j["cfar"] = {{"guard_range", cf.guard_range}, {"guard_doppler", cf.guard_doppler},
               {"train_range", cf.train_range}, {"train_doppler", cf.train_doppler},
               {"pfa", cf.pfa},                 {"min_abs_power", cf.min_abs_power}};
  j["angles"] = {{"window", to_string(c.detection.window)},
                 {"zoom", c.detection.zoom},
                 {"max_peaks", c.detection.max_angle_peaks},
                 {"peak_rel", c.detection.angle_peak_rel},
                 {"compensate_tdm", c.detection.compensate_tdm}};
  j["ram"] = {{"mode", to_string(c.ram.mode)},
              {"slow_time_index", c.ram.slow_time_index},
              {"n_angle_fft", c.ram.n_angle_fft},
              {"max_angle_deg", rad2deg(c.ram.max_angle)},
              {"pixel_pitch_m", c.ram.pixel_pitch}};
  const auto& k = c.clustering;
  j["clustering"] = {{"k_velocity", k.k_velocity},
                     {"k_spatial", k.k_spatial},
                     {"min_pts_velocity", optional_json(k.min_pts_velocity)},
                     {"min_pts_spatial", optional_json(k.min_pts_spatial)},
                     {"velocity_eps", optional_json(k.velocity_eps)},
                     {"spatial_eps", optional_json(k.spatial_eps)},
                     {"velocity_eps_floor", k.velocity_eps_floor},
                     {"spatial_eps_floor", k.spatial_eps_floor},
                     {"min_cluster_size", k.min_cluster_size},
                     {"max_extent_m", k.max_extent},
                     {"max_aspect", k.max_aspect},
                     {"min_extent_m", k.min_extent},
                     {"tag_mode", k.tag_mode}};
  j["overlay"] = {{"compensate", c.overlay.compensate}, {"stationary_velocity", c.overlay.stationary_velocity}};
  j["overlay_window"] = c.overlay_window;
  j["density_edges_m"] = c.density_edges;
  json products = json::array();
  for (Product p : c.products) products.push_back(to_string(p));
  j["products"] = products;
  return j;
}

RunResult run_pipeline(const RunConfig& config, Exec exec) {
  RunResult result;
  const fs::path out_dir = config.output_dir;
  fs::create_directories(out_dir);
  const auto wants = [&](Product p) {
    return std::find(config.products.begin(), config.products.end(), p) != config.products.end();
  };

  std::vector<fs::path> written;  // absolute
  std::string stage = "simulate";
  auto write_product = [&](const fs::path& name, std::string_view bytes) {
    const fs::path p = out_dir / name;
    write_text_file(p, bytes);
    written.push_back(p);
  };
  auto track = [&](const std::vector<fs::path>& paths) { written.insert(written.end(), paths.begin(), paths.end()); };

  json metrics;
  try {
    const Scene& scene = config.scene;
    std::vector<PointCloud> clouds;
    json frames = json::array();
    std::string cluster_lines;
    PointCloud last_overlay;

    for (int f = 0; f < scene.n_frames; ++f) {
      stage = "simulate";
      EchoOptions eo;
      eo.noise_power = config.noise_power;
      eo.seed = config.seed;
      eo.frame_index = f;
      const auto states = sample_scene(scene, f * scene.frame_interval);
      const EchoCube cube = synthesize_echo(states, config.radar, config.layout, eo, exec);

      stage = "image";
      if (wants(Product::rdm)) {
        const RDMap rdm = compute_rdm(cube, config.detection.window, exec);
        track(write_rdm_image(out_dir / ("rdm_" + frame_tag(f) + ".pgm"), rdm));
      }
      if (wants(Product::ram)) {
        const RAMap ram = compute_ram(cube, config.ram, exec);
        track(write_ram_image(out_dir / ("ram_" + frame_tag(f) + ".pgm"), ram.cartesian));
      }

      stage = "detect";
      clouds.push_back(generate_point_cloud(cube, config.detection, exec));

      stage = "cluster";
      const std::size_t take = std::min<std::size_t>(clouds.size(), static_cast<std::size_t>(config.overlay_window));
      const std::span<const PointCloud> window(clouds.data() + clouds.size() - take, take);
      last_overlay = overlay_frames(window, config.overlay_window, scene.frame_interval, config.overlay);
      json fm;
      fm["frame"] = f;
      fm["n_points"] = clouds.back().points.size();
      fm["n_overlay_points"] = last_overlay.points.size();
      fm["density_profile"] = density_profile(clouds.back(), config.density_edges);
      if (!last_overlay.points.empty()) {
        const DynamicDbscanResult dd = dynamic_dbscan(last_overlay, config.clustering, exec);
        cluster_lines += clusters_jsonl(dd.clusters, f);
        fm["n_clusters"] = dd.clusters.size();
        fm["n_clusters_unfiltered"] = dd.unfiltered_count;
        fm["velocity_eps"] = dd.velocity_eps;
        fm["spatial_eps"] = dd.spatial_eps;
      } else {
        fm["n_clusters"] = 0;
        fm["n_clusters_unfiltered"] = 0;
        fm["velocity_eps"] = nullptr;
        fm["spatial_eps"] = nullptr;
      }
      frames.push_back(fm);
    }

    stage = "write";
    if (wants(Product::cloud)) {
      write_product("points.csv", points_csv(clouds));
      write_product("overlay_final.ply", points_ply(last_overlay));
    }
    if (wants(Product::clusters)) write_product("clusters.jsonl", cluster_lines);
    if (wants(Product::metrics)) {
      metrics["density_edges_m"] = config.density_edges;
      metrics["frames"] = frames;
      write_product("metrics.json", metrics.dump(2) + "\n");
    }
  } catch (const std::exception& e) {
    for (const auto& p : written) {
      std::error_code ec;
      fs::remove(p, ec);
    }
    written.clear();
    result.ok = false;
    result.failed_stage = stage;
    result.error = e.what();
  }

  json manifest;
  manifest["tool"] = "mmpoint";
  manifest["version"] = kVersion;
  manifest["status"] = result.ok ? "ok" : "failed";
  manifest["failed_stage"] = result.ok ? json(nullptr) : json(result.failed_stage);
  if (!result.ok) manifest["error"] = result.error;
  manifest["config"] = resolved_config(config);
  json outputs = json::array();
  std::vector<fs::path> rel;
  for (const auto& p : written) rel.push_back(fs::relative(p, out_dir));
  std::sort(rel.begin(), rel.end());
  for (const auto& r : rel)
    outputs.push_back({{"path", r.generic_string()}, {"sha256", sha256_file(out_dir / r)},
                       {"bytes", fs::file_size(out_dir / r)}});
  manifest["outputs"] = outputs;

  const std::string text = manifest.dump(2) + "\n";
  result.manifest_path = out_dir / "manifest.json";
  write_text_file(result.manifest_path, text);
  result.manifest_sha256 = sha256_hex(text);
  result.outputs = rel;
  return result;
}

json MaskReport::to_json() const {
  json j;
  j["overall_iou"] = overall_iou;
  json regs = json::array();
  for (const auto& [name, v] : regions) regs.push_back({{"name", name}, {"iou", v}});
  j["regions"] = regs;
  return j;
}

std::vector<std::pair<std::string, Region2D>> load_regions(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("regions: ") + e.what());
  }
  if (!doc.contains("regions") || !doc["regions"].is_array()) throw SchemaError("regions: missing array 'regions'");
  std::vector<std::pair<std::string, Region2D>> out;
  std::size_t i = 0;
  for (const auto& r : doc["regions"]) {
    const std::string where = "regions[" + std::to_string(i++) + "]";
    std::string name = r.value("name", where);
    try {
      if (r.contains("box")) {
        const auto b = r.at("box").get<std::vector<double>>();
        if (b.size() != 4) throw SchemaError(where + ".box: need 4 numbers");
        out.emplace_back(name, Region2D::box(b[0], b[1], b[2], b[3]));
      } else if (r.contains("polygon")) {
        std::vector<Point2> pts;
        for (const auto& v : r.at("polygon")) {
          const auto xy = v.get<std::vector<double>>();
          if (xy.size() != 2) throw SchemaError(where + ".polygon: vertices need 2 numbers");
          pts.push_back({xy[0], xy[1]});
        }
        out.emplace_back(name, Region2D::polygon(std::move(pts)));
      } else {
        throw SchemaError(where + ": need 'box' or 'polygon'");
      }
    } catch (const json::exception& e) {
      throw SchemaError(where + ": " + e.what());
    }
  }
  return out;
}

MaskReport evaluate_masks(const fs::path& ram_image, const fs::path& predicted_mask, const fs::path& truth,
                          double margin) {
  const MaskGrid grid = read_grid_sidecar(ram_image);
  const GrayImage ram = read_pgm(ram_image);
  if (ram.width != grid.nx || ram.height != grid.ny) throw DomainError("evaluate_masks: RAM image does not match its sidecar grid");
  const MaskGrid pred = read_mask(predicted_mask, grid);

  MaskReport report;
  if (truth.extension() == ".json") {
    const auto regions = load_regions(read_text_file(truth));
    MaskGrid all = grid;
    for (const auto& [name, region] : regions) {
      const MaskGrid t = rasterize(region, grid);
      for (std::size_t i = 0; i < all.values.size(); ++i) all.values[i] = std::max(all.values[i], t.values[i]);

      double x_lo = region.vertices()[0].x, x_hi = x_lo, y_lo = region.vertices()[0].y, y_hi = y_lo;
      for (const auto& v : region.vertices()) {
        x_lo = std::min(x_lo, v.x);
        x_hi = std::max(x_hi, v.x);
        y_lo = std::min(y_lo, v.y);
        y_hi = std::max(y_hi, v.y);
      }
      MaskGrid pa = grid, ta = grid;
      for (std::size_t iy = 0; iy < grid.ny; ++iy)
        for (std::size_t ix = 0; ix < grid.nx; ++ix) {
          const bool in = grid.x(ix) >= x_lo - margin && grid.x(ix) <= x_hi + margin && grid.y(iy) >= y_lo - margin &&
                          grid.y(iy) <= y_hi + margin;
          pa.at(ix, iy) = in ? pred.at(ix, iy) : 0.0;
          ta.at(ix, iy) = in ? t.at(ix, iy) : 0.0;
        }
      report.regions.emplace_back(name, iou(pa, ta));
    }
    report.overall_iou = iou(pred, all);
  } else {
    report.overall_iou = iou(pred, read_mask(truth, grid));
  }
  return report;
}

}  // namespace mmpoint
