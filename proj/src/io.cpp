#include "mmpoint/io.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

namespace mmpoint {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256: digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_text_file(path)); }

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("write failed for " + path.string());
}

ScaledImage scale_to_gray16(std::span<const double> values, std::size_t width, std::size_t height) {
  if (values.size() != width * height) throw DomainError("scale_to_gray16: size mismatch");
  double peak = 0.0;
  for (double v : values) {
    if (!std::isfinite(v) || v < 0.0) throw DomainError("scale_to_gray16: values must be finite and >= 0");
    peak = std::max(peak, v);
  }
  ScaledImage out;
  out.scale = peak > 0.0 ? 65535.0 / peak : 0.0;
  out.image.width = width;
  out.image.height = height;
  out.image.pixels.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    out.image.pixels[i] = static_cast<std::uint16_t>(std::min(65535.0, std::round(values[i] * out.scale)));
  return out;
}

std::string encode_pgm(const GrayImage& img) {
  if (img.maxval < 1 || img.maxval > 65535) throw DomainError("encode_pgm: maxval out of range");
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n" +
                    std::to_string(img.maxval) + "\n";
  const bool wide = img.maxval > 255;
  for (std::uint16_t p : img.pixels) {
    if (wide) out.push_back(static_cast<char>(p >> 8));
    out.push_back(static_cast<char>(p & 0xFF));
  }
  return out;
}

GrayImage decode_pgm(std::string_view bytes) {
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return std::string(bytes.substr(start, pos - start));
  };
  auto number = [&](const char* what) {
    const std::string t = token();
    std::size_t v = 0;
    auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc{} || res.ptr != t.data() + t.size()) throw SchemaError(std::string("pgm: bad ") + what);
    return v;
  };
  if (token() != "P5") throw SchemaError("pgm: not a binary P5 graymap");
  GrayImage img;
  img.width = number("width");
  img.height = number("height");
  const std::size_t maxval = number("maxval");
  if (maxval < 1 || maxval > 65535) throw SchemaError("pgm: maxval out of range");
  img.maxval = static_cast<int>(maxval);
  ++pos;  // single whitespace before the raster
  const std::size_t bpp = maxval > 255 ? 2 : 1;
  if (bytes.size() < pos + img.width * img.height * bpp) throw SchemaError("pgm: truncated raster");
  img.pixels.resize(img.width * img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const auto* b = reinterpret_cast<const unsigned char*>(bytes.data() + pos + i * bpp);
    img.pixels[i] = bpp == 2 ? static_cast<std::uint16_t>((b[0] << 8) | b[1]) : b[0];
  }
  return img;
}

GrayImage read_pgm(const fs::path& path) { return decode_pgm(read_text_file(path)); }

std::vector<fs::path> write_scaled_pgm(const fs::path& path, std::span<const double> values, std::size_t width,
                                       std::size_t height, json meta) {
  const ScaledImage s = scale_to_gray16(values, width, height);
  write_text_file(path, encode_pgm(s.image));
  meta["width"] = width;
  meta["height"] = height;
  meta["scale"] = s.scale;
  meta["maxval"] = 65535;
  fs::path side = path;
  side += ".json";
  write_text_file(side, meta.dump(2) + "\n");
  return {path, side};
}

std::vector<fs::path> write_rdm_image(const fs::path& path, const RDMap& rdm) {
  std::vector<double> mag = rdm.power_sum(Exec::serial);
  for (double& v : mag) v = std::sqrt(v);
  json meta;
  meta["kind"] = "rdm";
  meta["layout"] = "row = range bin, column = doppler bin; pixel = sqrt(sum over channels |S|^2) * scale";
  meta["range_axis_m"] = rdm.range_axis;
  meta["velocity_axis_mps"] = rdm.velocity_axis;
  return write_scaled_pgm(path, mag, rdm.n_doppler, rdm.n_range, std::move(meta));
}

std::vector<fs::path> write_ram_image(const fs::path& path, const CartesianMap& map) {
  json meta;
  meta["kind"] = "ram_cartesian";
  meta["layout"] = "row iy at y = y0 + iy * pitch, column ix at x = x0 + ix * pitch";
  meta["grid"] = {{"x0", map.x0}, {"y0", map.y0}, {"pitch", map.pitch}, {"nx", map.nx}, {"ny", map.ny}};
  return write_scaled_pgm(path, map.values, map.nx, map.ny, std::move(meta));
}

std::vector<fs::path> write_afm_image(const fs::path& path, const AfmGrid& afm) {
  json meta;
  meta["kind"] = "afm";
  meta["layout"] = "row = elevation sample, column = azimuth sample";
  meta["azimuth_axis_rad"] = afm.az;
  meta["elevation_axis_rad"] = afm.el;
  return write_scaled_pgm(path, afm.values, afm.az.size(), afm.el.size(), std::move(meta));
}

MaskGrid read_grid_sidecar(const fs::path& image_path) {
  fs::path side = image_path;
  side += ".json";
  json meta;
  try {
    meta = json::parse(read_text_file(side));
  } catch (const json::parse_error& e) {
    throw SchemaError(side.string() + ": " + e.what());
  }
  if (!meta.contains("grid")) throw SchemaError(side.string() + ": missing key 'grid'");
  const json& g = meta["grid"];
  MaskGrid m;
  try {
    m.x0 = g.at("x0").get<double>();
    m.y0 = g.at("y0").get<double>();
    m.pitch = g.at("pitch").get<double>();
    m.nx = g.at("nx").get<std::size_t>();
    m.ny = g.at("ny").get<std::size_t>();
  } catch (const json::exception& e) {
    throw SchemaError(side.string() + ": grid: " + e.what());
  }
  m.values.assign(m.nx * m.ny, 0.0);
  return m;
}

MaskGrid read_mask(const fs::path& path, const MaskGrid& grid) {
  const GrayImage img = read_pgm(path);
  if (img.width != grid.nx || img.height != grid.ny)
    throw DomainError(path.string() + ": mask is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                      ", grid is " + std::to_string(grid.nx) + "x" + std::to_string(grid.ny));
  MaskGrid m = grid;
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    m.values[i] = static_cast<double>(img.pixels[i]) / static_cast<double>(img.maxval);
  return m;
}

namespace {

void put_f32(std::string& out, double v) {
  const auto f = static_cast<float>(v);
  std::uint32_t bits = 0;
  std::memcpy(&bits, &f, sizeof bits);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

float get_f32(const unsigned char* b) {
  const std::uint32_t bits = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                             (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  float f = 0.0f;
  std::memcpy(&f, &bits, sizeof f);
  return f;
}

}  // namespace

std::string encode_echo_dump(const EchoCube& cube) {
  std::string out = "mmpoint-echo " + std::to_string(cube.n_channels) + " " + std::to_string(cube.n_chirps) + " " +
                    std::to_string(cube.n_samples) + "\n";
  out.reserve(out.size() + cube.samples.size() * 8);
  for (const cplx& s : cube.samples) {
    put_f32(out, s.real());
    put_f32(out, s.imag());
  }
  return out;
}

EchoCube decode_echo_dump(std::string_view bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string_view::npos) throw SchemaError("echo dump: missing header line");
  std::istringstream header{std::string(bytes.substr(0, nl))};
  std::string magic;
  EchoCube cube;
  header >> magic >> cube.n_channels >> cube.n_chirps >> cube.n_samples;
  if (magic != "mmpoint-echo" || !header) throw SchemaError("echo dump: bad header");
  const std::size_t n = cube.n_channels * cube.n_chirps * cube.n_samples;
  if (bytes.size() - nl - 1 != n * 8) throw SchemaError("echo dump: payload size does not match header");
  cube.samples.resize(n);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + nl + 1);
  for (std::size_t i = 0; i < n; ++i) cube.samples[i] = {get_f32(p + 8 * i), get_f32(p + 8 * i + 4)};
  return cube;
}

std::string points_csv(std::span<const PointCloud> clouds) {
  std::string out = "frame,r,az,el,v,intensity,x,y,z\n";
  for (const auto& c : clouds)
    for (const auto& p : c.points) {
      out += std::to_string(p.frame_index);
      for (double v : {p.range, p.azimuth, p.elevation, p.v_radial, p.intensity, p.x, p.y, p.z}) {
        out.push_back(',');
        out += format_double(v);
      }
      out.push_back('\n');
    }
  return out;
}

std::string points_ply(const PointCloud& cloud) {
  std::string out = "ply\nformat ascii 1.0\nelement vertex " + std::to_string(cloud.points.size()) +
                    "\nproperty double x\nproperty double y\nproperty double z\nproperty double v\n"
                    "property double intensity\nend_header\n";
  for (const auto& p : cloud.points) {
    out += format_double(p.x) + " " + format_double(p.y) + " " + format_double(p.z) + " " +
           format_double(p.v_radial) + " " + format_double(p.intensity) + "\n";
  }
  return out;
}

json cluster_json(const Cluster& c, int frame_index) {
  json j;
  j["frame"] = frame_index;
  j["members"] = c.members;
  j["centroid"] = {c.centroid.x, c.centroid.y, c.centroid.z};
  j["bbox"] = {{"min", {c.bbox.min.x, c.bbox.min.y, c.bbox.min.z}}, {"max", {c.bbox.max.x, c.bbox.max.y, c.bbox.max.z}}};
  j["mean_v"] = c.mean_v;
  j["velocity_cluster"] = c.velocity_cluster;
  j["spatial_cluster"] = c.spatial_cluster;
  j["label"] = c.label ? json(std::string(to_string(*c.label))) : json(nullptr);
  j["verdict"] = {{"too_small", c.verdict.too_small},
                  {"too_large", c.verdict.too_large},
                  {"bad_aspect", c.verdict.bad_aspect}};
  return j;
}

std::string clusters_jsonl(std::span<const Cluster> clusters, int frame_index) {
  std::string out;
  for (const auto& c : clusters) out += cluster_json(c, frame_index).dump() + "\n";
  return out;
}

}  // namespace mmpoint
