#include "mmpoint/scene.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace mmpoint {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<Label, std::string_view>, 5> kLabelNames{{
    {Label::car, "car"},
    {Label::roadside, "roadside"},
    {Label::bicycle, "bicycle"},
    {Label::pedestrian, "pedestrian"},
    {Label::unlabeled, "unlabeled"},
}};

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(where + ": missing key '" + key + "'");
  return *it;
}

void only_keys(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& where) {
  for (const auto& [k, v] : obj.items())
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
      throw SchemaError(where + ": unknown key '" + k + "'");
}

double number(const json& value, const std::string& key) {
  if (!value.is_number()) throw SchemaError("key '" + key + "' must be a number");
  return value.get<double>();
}

Vec3 vec3(const json& value, const std::string& key) {
  if (!value.is_array() || value.size() != 3)
    throw SchemaError("key '" + key + "' must be an array of 3 numbers");
  return {number(value[0], key), number(value[1], key), number(value[2], key)};
}

Label label_of(const json& obj, const std::string& where) {
  auto it = obj.find("label");
  if (it == obj.end()) return Label::unlabeled;
  if (!it->is_string()) throw SchemaError(where + ": key 'label' must be a string");
  try {
    return label_from_string(it->get<std::string>());
  } catch (const SchemaError& e) {
    throw SchemaError(where + ": key 'label': " + e.what());
  }
}

json to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

}  // namespace

std::string_view to_string(Label label) {
  for (const auto& [l, name] : kLabelNames)
    if (l == label) return name;
  return "unlabeled";
}

Label label_from_string(std::string_view name) {
  for (const auto& [l, n] : kLabelNames)
    if (n == name) return l;
  throw SchemaError("unknown label '" + std::string(name) + "'");
}

void validate(const Scene& scene) {
  if (scene.n_frames < 1) throw ValidationError("n_frames must be >= 1");
  if (!(scene.frame_interval > 0.0) || !std::isfinite(scene.frame_interval))
    throw ValidationError("frame_interval_s must be > 0");
  for (std::size_t i = 0; i < scene.scatterers.size(); ++i) {
    const auto& s = scene.scatterers[i];
    const std::string tag = "scatterer " + std::to_string(i);
    if (!(s.rcs >= 0.0) || !std::isfinite(s.rcs)) throw ValidationError(tag + ": rcs must be >= 0");
    if (!s.position.finite()) throw ValidationError(tag + ": position must be finite");
    if (!s.velocity.finite()) throw ValidationError(tag + ": velocity must be finite");
  }
}

int default_point_count(Label label, const Vec3& extent) {
  switch (label) {
    case Label::car:
      return 8;
    case Label::bicycle:
      return 2;
    case Label::roadside:
      return std::max(1, static_cast<int>(std::ceil(std::max(extent.x, extent.y))));
    case Label::pedestrian:
    case Label::unlabeled:
      return 1;
  }
  return 1;
}

std::vector<Scatterer> make_distributed_target(const Vec3& center, const Vec3& extent, int n_points,
                                               Label label, double rcs_total, const Vec3& velocity) {
  if (n_points < 1) throw DomainError("make_distributed_target: n_points must be >= 1");
  if (extent.x < 0.0 || extent.y < 0.0 || extent.z < 0.0)
    throw DomainError("make_distributed_target: extent components must be >= 0");

  const double rcs_each = rcs_total / n_points;
  std::vector<Scatterer> out;
  out.reserve(static_cast<std::size_t>(n_points));
  if (n_points == 1) {
    out.push_back({center, velocity, rcs_total, label});
    return out;
  }

  // Walk the outline counter-clockwise from the near-left corner: near face
  // (y = -b), right side, far face, left side.
  const double a = extent.x / 2.0;
  const double b = extent.y / 2.0;
  const double perimeter = 4.0 * (a + b);
  for (int i = 0; i < n_points; ++i) {
    double s = (i + 0.5) * perimeter / n_points;
    double dx = 0.0;
    double dy = 0.0;
    if (s < 2 * a) {
      dx = -a + s;
      dy = -b;
    } else if ((s -= 2 * a) < 2 * b) {
      dx = a;
      dy = -b + s;
    } else if ((s -= 2 * b) < 2 * a) {
      dx = a - s;
      dy = b;
    } else {
      s -= 2 * a;
      dx = -a;
      dy = b - std::min(s, 2 * b);
    }
    out.push_back({{center.x + dx, center.y + dy, center.z}, velocity, rcs_each, label});
  }
  return out;
}

Scene load_scene(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("scene document is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw SchemaError("scene document must be an object");

  only_keys(doc, {"frame_interval_s", "n_frames", "scatterers", "distributed"}, "scene");
  Scene scene;
  scene.frame_interval = number(require(doc, "frame_interval_s", "scene"), "frame_interval_s");
  const json& nf = require(doc, "n_frames", "scene");
  if (!nf.is_number_integer()) throw SchemaError("key 'n_frames' must be an integer");
  scene.n_frames = nf.get<int>();

  if (auto it = doc.find("scatterers"); it != doc.end()) {
    if (!it->is_array()) throw SchemaError("key 'scatterers' must be an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const json& s = (*it)[i];
      const std::string where = "scatterers[" + std::to_string(i) + "]";
      if (!s.is_object()) throw SchemaError(where + " must be an object");
      only_keys(s, {"pos", "vel", "rcs", "label"}, where);
      Scatterer sc;
      sc.position = vec3(require(s, "pos", where), where + ".pos");
      sc.velocity = s.contains("vel") ? vec3(s["vel"], where + ".vel") : Vec3{};
      sc.rcs = number(require(s, "rcs", where), where + ".rcs");
      sc.label = label_of(s, where);
      scene.scatterers.push_back(sc);
    }
  }

  if (auto it = doc.find("distributed"); it != doc.end()) {
    if (!it->is_array()) throw SchemaError("key 'distributed' must be an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const json& d = (*it)[i];
      const std::string where = "distributed[" + std::to_string(i) + "]";
      if (!d.is_object()) throw SchemaError(where + " must be an object");
      only_keys(d, {"center", "extent", "n_points", "rcs_total", "label", "vel"}, where);
      const Vec3 center = vec3(require(d, "center", where), where + ".center");
      const Vec3 extent = vec3(require(d, "extent", where), where + ".extent");
      const Label label = label_of(d, where);
      const double rcs_total = number(require(d, "rcs_total", where), where + ".rcs_total");
      const Vec3 vel = d.contains("vel") ? vec3(d["vel"], where + ".vel") : Vec3{};
      int n = default_point_count(label, extent);
      if (d.contains("n_points")) {
        if (!d["n_points"].is_number_integer())
          throw SchemaError("key '" + where + ".n_points' must be an integer");
        n = d["n_points"].get<int>();
      }
      if (rcs_total < 0.0) throw ValidationError(where + ": rcs_total must be >= 0");
      try {
        auto pts = make_distributed_target(center, extent, n, label, rcs_total, vel);
        scene.scatterers.insert(scene.scatterers.end(), pts.begin(), pts.end());
      } catch (const DomainError& e) {
        throw ValidationError(where + ": " + e.what());
      }
    }
  }

  validate(scene);
  return scene;
}

Scene load_scene_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open scene file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return load_scene(buf.str());
}

std::string serialize_scene(const Scene& scene) {
  json doc;
  doc["frame_interval_s"] = scene.frame_interval;
  doc["n_frames"] = scene.n_frames;
  json list = json::array();
  for (const auto& s : scene.scatterers) {
    list.push_back({{"pos", to_json(s.position)},
                    {"vel", to_json(s.velocity)},
                    {"rcs", s.rcs},
                    {"label", std::string(to_string(s.label))}});
  }
  doc["scatterers"] = std::move(list);
  return doc.dump(2);
}

std::vector<Scatterer> sample_scene(const Scene& scene, double t) {
  if (!(t >= 0.0) || t > scene.duration())
    throw DomainError("sample_scene: t=" + std::to_string(t) + " outside [0, " +
                      std::to_string(scene.duration()) + "]");
  std::vector<Scatterer> out = scene.scatterers;
  for (auto& s : out) s.position = s.position + s.velocity * t;
  return out;
}

}  // namespace mmpoint
