#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmpoint/clustering.hpp"
#include "mmpoint/detection.hpp"
#include "mmpoint/metrics.hpp"

namespace mmpoint {

inline constexpr const char* kVersion = "0.1.0";

enum class Product { rdm, ram, cloud, clusters, metrics };
std::string_view to_string(Product p);
Product product_from_string(std::string_view name);  // throws SchemaError

struct RunConfig {
  std::filesystem::path scene_path;   // resolved against the config file
  std::filesystem::path layout_path;
  std::string scene_ref;              // as written in the config
  std::string layout_ref;
  Scene scene;          // loaded and validated with the config
  ArrayLayout layout;
  RadarParams radar;
  double noise_power = 0.0;
  std::uint64_t seed = 0;
  PointCloudConfig detection;
  RamOptions ram;
  ClusteringConfig clustering;
  OverlayOptions overlay;
  int overlay_window = 1;
  std::vector<double> density_edges{0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
  std::filesystem::path output_dir;
  std::vector<Product> products;
};

// Run config document (JSON). Required: "scene", "layout", "seed",
// "output_dir". Optional: "radar", "noise_power", "cfar", "angles", "ram",
// "clustering", "overlay", "density_edges_m", "products". Relative paths
// resolve against the config file's directory. Throws SchemaError or
// ValidationError; a referenced file that does not exist is a
// ValidationError.
RunConfig load_run_config(std::string_view text, const std::filesystem::path& base_dir);
RunConfig load_run_config_file(const std::filesystem::path& path);

// Config as recorded in the manifest: everything except the output
// directory, plus content hashes of the scene and layout files.
nlohmann::json resolved_config(const RunConfig& config);

struct RunResult {
  bool ok = true;
  std::string failed_stage;
  std::string error;
  std::filesystem::path manifest_path;
  std::string manifest_sha256;
  std::vector<std::filesystem::path> outputs;  // relative to output_dir
};

// Simulate every frame, image, detect, overlay and cluster, then write the
// requested products and manifest.json into output_dir. A stage error
// deletes the products written so far and leaves a manifest naming the
// failing stage. Never throws for stage errors; config problems surface
// from load_run_config.
RunResult run_pipeline(const RunConfig& config, Exec exec = Exec::parallel);

struct MaskReport {
  double overall_iou = 0.0;
  std::vector<std::pair<std::string, double>> regions;
  nlohmann::json to_json() const;
};

// IoU of a predicted mask against either a truth mask image or a regions
// document {"regions": [{"name": .., "polygon": [[x, y], ..]} | {"name": ..,
// "box": [x_min, y_min, x_max, y_max]}]}, both on the grid recorded next to
// the RAM image. Per-region scores compare both masks inside the region's
// bounding box grown by `margin` metres.
MaskReport evaluate_masks(const std::filesystem::path& ram_image, const std::filesystem::path& predicted_mask,
                          const std::filesystem::path& truth, double margin = 1.0);

std::vector<std::pair<std::string, Region2D>> load_regions(std::string_view text);

}  // namespace mmpoint
