#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mmpoint/common.hpp"

namespace mmpoint {

enum class Label { car, roadside, bicycle, pedestrian, unlabeled };

std::string_view to_string(Label label);
// Throws SchemaError for unknown names.
Label label_from_string(std::string_view name);

struct Scatterer {
  Vec3 position;  // m; radar at origin, boresight +y, elevation +z
  Vec3 velocity;  // m/s
  double rcs = 1.0;  // m^2
  Label label = Label::unlabeled;
};

struct Scene {
  std::vector<Scatterer> scatterers;
  double frame_interval = 0.05;  // s
  int n_frames = 1;

  double duration() const { return frame_interval * n_frames; }
};

// Throws ValidationError when a scatterer or the frame settings break
// their invariants.
void validate(const Scene& scene);

// Scene document (JSON):
//   { "frame_interval_s": 0.05, "n_frames": 3,
//     "scatterers":  [ {"pos": [x,y,z], "vel": [vx,vy,vz], "rcs": 10, "label": "car"} ],
//     "distributed": [ {"center": [..], "extent": [..], "n_points": 8,
//                       "rcs_total": 10, "label": "car", "vel": [..]} ] }
// `distributed` blocks are expanded into scatterers at load time. `vel` and
// `n_points` are optional in a distributed block; the point count then
// falls back to default_point_count().
Scene load_scene(std::string_view text);
Scene load_scene_file(const std::string& path);

// Emits only the expanded `scatterers` list; load_scene(serialize_scene(s)) == s.
std::string serialize_scene(const Scene& scene);

// Constant-velocity positions at time t. Throws DomainError if t is outside
// [0, n_frames * frame_interval].
std::vector<Scatterer> sample_scene(const Scene& scene, double t);

// Stratified points on the horizontal outline of the extent box, equally
// spaced by arc length and centrally symmetric for even counts.
std::vector<Scatterer> make_distributed_target(const Vec3& center, const Vec3& extent, int n_points,
                                               Label label, double rcs_total,
                                               const Vec3& velocity = {});

// Convention for scatterer counts when a distributed block omits n_points:
// car 8, bicycle 2, pedestrian 1, roadside 1 per metre of longest extent.
int default_point_count(Label label, const Vec3& extent);

}  // namespace mmpoint
