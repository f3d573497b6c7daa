#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mmpoint/io.hpp"
#include "mmpoint/pipeline.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

void apply_thread_cap() {
  const char* env = std::getenv("MMPOINT_THREADS");
  if (env == nullptr || *env == '\0') return;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1) {
    std::cerr << "mmpoint: ignoring MMPOINT_THREADS='" << env << "' (want a positive integer)\n";
    return;
  }
#ifdef _OPENMP
  omp_set_num_threads(static_cast<int>(n));
#endif
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

int cmd_run(const std::string& config_path, const std::optional<std::uint64_t>& seed,
            const std::optional<std::string>& out, const std::optional<std::string>& products) {
  mmpoint::RunConfig config;
  try {
    config = mmpoint::load_run_config_file(config_path);
    if (seed) config.seed = *seed;
    if (out) config.output_dir = *out;
    if (products) {
      config.products.clear();
      for (const auto& name : split_list(*products)) {
        const auto p = mmpoint::product_from_string(name);
        if (std::find(config.products.begin(), config.products.end(), p) == config.products.end())
          config.products.push_back(p);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "mmpoint: config error: " << e.what() << "\n";
    return kExitConfig;
  }

  const mmpoint::RunResult res = mmpoint::run_pipeline(config);
  if (!res.ok) {
    std::cerr << "mmpoint: stage '" << res.failed_stage << "' failed: " << res.error << "\n";
    return kExitStage;
  }
  std::cout << "manifest " << res.manifest_path.string() << " sha256 " << res.manifest_sha256 << "\n";
  return 0;
}

int cmd_eval_masks(const std::string& ram, const std::string& pred, const std::string& truth,
                   const std::optional<std::string>& report_path) {
  try {
    const auto report = mmpoint::evaluate_masks(ram, pred, truth);
    const std::string text = report.to_json().dump(2) + "\n";
    if (report_path)
      mmpoint::write_text_file(*report_path, text);
    else
      std::cout << text;
    return 0;
  } catch (const mmpoint::SchemaError& e) {
    std::cerr << "mmpoint: input error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "mmpoint: eval-masks failed: " << e.what() << "\n";
    return kExitStage;
  }
}

int cmd_afm(const std::string& layout_path, double span_az_deg, double span_el_deg, double step_deg,
            const std::optional<std::string>& image) {
  mmpoint::VirtualArray va;
  try {
    va = mmpoint::build_virtual_array(mmpoint::load_layout_file(layout_path));
  } catch (const std::exception& e) {
    std::cerr << "mmpoint: layout error: " << e.what() << "\n";
    return kExitConfig;
  }
  try {
    // An axis with no aperture gets a single sample and no resolution.
    const auto spread = [&](auto coord) {
      const auto [lo, hi] = std::minmax_element(va.elements.begin(), va.elements.end(),
                                                [&](const auto& a, const auto& b) { return coord(a) < coord(b); });
      return coord(*hi) - coord(*lo) > 1e-9;
    };
    const bool has_az = spread([](const auto& e) { return e.az; });
    const bool has_el = spread([](const auto& e) { return e.el; });
    const auto axis = [&](bool open, double span_deg) {
      if (!open) return std::vector<double>{0.0};
      const auto n = static_cast<std::size_t>(std::lround(2 * span_deg / step_deg)) + 1;
      return mmpoint::linspace(-mmpoint::deg2rad(span_deg), mmpoint::deg2rad(span_deg), n);
    };
    const auto az = axis(has_az, span_az_deg);
    const auto el = axis(has_el, span_el_deg);
    const auto afm = mmpoint::compute_afm(va, 0.0, 0.0, az, el);
    const auto res = mmpoint::angular_resolution(afm);
    nlohmann::json j;
    j["virtual_elements"] = va.size();
    j["duplicate_pairs"] = va.duplicates.size();
    j["az_resolution_deg"] = has_az ? nlohmann::json(res.az_deg) : nlohmann::json(nullptr);
    j["el_resolution_deg"] = has_el ? nlohmann::json(res.el_deg) : nlohmann::json(nullptr);
    if (image) {
      mmpoint::write_afm_image(*image, afm);
      j["image"] = *image;
    }
    std::cout << j.dump(2) << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "mmpoint: afm failed: " << e.what() << "\n";
    return kExitStage;
  }
}

}  // namespace

int main(int argc, char** argv) {
  apply_thread_cap();
  CLI::App app{"mmWave radar point-cloud toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> products;
  auto* run = app.add_subcommand("run", "Simulate, image, detect and cluster a configured scene");
  run->add_option("config", config_path, "Run config (JSON)")->required();
  run->add_option("--seed", seed, "Override the noise seed");
  run->add_option("--out", out, "Override the output directory");
  run->add_option("--products", products, "Comma list of rdm,ram,cloud,clusters,metrics");

  std::string ram, pred, truth;
  std::optional<std::string> report;
  auto* eval = app.add_subcommand("eval-masks", "IoU of a predicted mask against a truth mask or regions file");
  eval->add_option("ram", ram, "RAM image with its .json sidecar")->required();
  eval->add_option("pred", pred, "Predicted mask (PGM)")->required();
  eval->add_option("truth", truth, "Truth mask (PGM) or regions (JSON)")->required();
  eval->add_option("--report", report, "Write the JSON report here instead of stdout");

  std::string layout;
  double span_az = 10.0, span_el = 30.0, step = 0.05;
  std::optional<std::string> image;
  auto* afm = app.add_subcommand("afm", "Ambiguity function and -3 dB widths of an array layout");
  afm->add_option("layout", layout, "Array layout (JSON)")->required();
  afm->add_option("--span-az", span_az, "Half span in azimuth, degrees")->check(CLI::PositiveNumber);
  afm->add_option("--span-el", span_el, "Half span in elevation, degrees")->check(CLI::PositiveNumber);
  afm->add_option("--step", step, "Grid step, degrees")->check(CLI::PositiveNumber);
  afm->add_option("--image", image, "Write the AFM as a 16-bit PGM");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (*run) return cmd_run(config_path, seed, out, products);
  if (*eval) return cmd_eval_masks(ram, pred, truth, report);
  return cmd_afm(layout, span_az, span_el, step, image);
}
