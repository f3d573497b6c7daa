#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmpoint/clustering.hpp"
#include "mmpoint/metrics.hpp"

namespace mmpoint {

// Shortest round-trip decimal form of v.
std::string format_double(double v);

// Hex SHA-256 of a byte string or file.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  int maxval = 65535;
  std::vector<std::uint16_t> pixels;  // row-major
};

// Linear map of values onto [0, 65535]: pixel = round(v * scale) with
// scale = 65535 / max(values); all-zero input gives scale 0.
struct ScaledImage {
  GrayImage image;
  double scale = 0.0;
};
ScaledImage scale_to_gray16(std::span<const double> values, std::size_t width, std::size_t height);

// Binary P5, big-endian samples when maxval > 255.
std::string encode_pgm(const GrayImage& image);
GrayImage decode_pgm(std::string_view bytes);
GrayImage read_pgm(const std::filesystem::path& path);

// PGM plus a JSON sidecar at `path` + ".json" holding `meta` and the scale.
// Returns both paths.
std::vector<std::filesystem::path> write_scaled_pgm(const std::filesystem::path& path, std::span<const double> values,
                                                    std::size_t width, std::size_t height, nlohmann::json meta);

std::vector<std::filesystem::path> write_rdm_image(const std::filesystem::path& path, const RDMap& rdm);
std::vector<std::filesystem::path> write_ram_image(const std::filesystem::path& path, const CartesianMap& map);
std::vector<std::filesystem::path> write_afm_image(const std::filesystem::path& path, const AfmGrid& afm);

// Grid stored in a Cartesian-map sidecar.
MaskGrid read_grid_sidecar(const std::filesystem::path& image_path);
// Mask pixels divided by maxval, on the given grid.
MaskGrid read_mask(const std::filesystem::path& path, const MaskGrid& grid);

// Header line "mmpoint-echo <channels> <chirps> <samples>\n", then
// little-endian float32 re, im per sample in cube order.
std::string encode_echo_dump(const EchoCube& cube);
EchoCube decode_echo_dump(std::string_view bytes);

std::string points_csv(std::span<const PointCloud> clouds);
std::string points_ply(const PointCloud& cloud);

nlohmann::json cluster_json(const Cluster& cluster, int frame_index);
std::string clusters_jsonl(std::span<const Cluster> clusters, int frame_index);

}  // namespace mmpoint
