#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "mmpoint/detection.hpp"
#include "mmpoint/scene.hpp"

namespace mmpoint {

// Row-major n x dims matrix of feature vectors.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t dims) : dims_(dims), data_(rows * dims, 0.0) {}
  FeatureMatrix(std::size_t dims, std::vector<double> data);

  std::size_t rows() const { return dims_ == 0 ? 0 : data_.size() / dims_; }
  std::size_t dims() const { return dims_; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * dims_, dims_}; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * dims_, dims_}; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * dims_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * dims_ + j]; }
  const std::vector<double>& data() const { return data_; }

  // Subset of rows, in the given order.
  FeatureMatrix select(std::span<const std::size_t> indices) const;

 private:
  std::size_t dims_ = 0;
  std::vector<double> data_;
};

double euclidean(std::span<const double> a, std::span<const double> b);

FeatureMatrix velocity_features(const PointCloud& cloud);  // n x 1
FeatureMatrix planar_features(const PointCloud& cloud);    // n x 2 (x, y)

// Distance from every point to its k-th nearest other point.
std::vector<double> k_distances(const FeatureMatrix& points, int k, Exec exec = Exec::parallel);

// Knee of a k-distance curve: sort descending, normalise both axes to
// [0, 1], and take the value furthest below the chord joining the ends.
// A flat curve returns its common value.
double knee_value(std::vector<double> k_dist);

// knee_value(k_distances(points, k)). Throws DomainError when there are at
// most k points or the knee is zero.
double k_distance_radius(const FeatureMatrix& points, int k);

struct DbscanResult {
  std::vector<std::vector<std::size_t>> clusters;  // ascending member indices
  std::vector<std::size_t> noise;
  std::vector<int> labels;  // cluster id per point, -1 for noise
};

// Classic DBSCAN: neighbours within eps inclusive, the point itself counted.
// Clusters are numbered in order of their lowest-index core point; a border
// point belongs to the first cluster that reaches it.
DbscanResult dbscan(const FeatureMatrix& points, double eps, int min_pts, Exec exec = Exec::parallel);

struct Box3 {
  Vec3 min;
  Vec3 max;
  bool contains(const Vec3& p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z && p.z <= max.z;
  }
};

struct FilterVerdict {
  bool too_small = false;
  bool too_large = false;
  bool bad_aspect = false;
  bool roadside_like() const { return too_large || bad_aspect; }
};

struct Cluster {
  std::vector<std::size_t> members;  // indices into the clustered PointCloud
  Vec3 centroid;
  double mean_v = 0.0;
  Box3 bbox;
  std::optional<Label> label;
  int velocity_cluster = -1;
  int spatial_cluster = -1;
  FilterVerdict verdict;

  double extent_x() const { return bbox.max.x - bbox.min.x; }
  double extent_y() const { return bbox.max.y - bbox.min.y; }
};

Cluster make_cluster(const PointCloud& cloud, std::vector<std::size_t> members);

struct ClusteringConfig {
  int k_velocity = 2;  // 1D velocity data
  int k_spatial = 4;   // 2D (x, y) data
  std::optional<int> min_pts_velocity;  // default k_velocity + 1
  std::optional<int> min_pts_spatial;   // default k_spatial + 1
  std::optional<double> velocity_eps;   // overrides the k-distance knee
  std::optional<double> spatial_eps;
  // Lower bounds applied to knee radii; quantised Doppler often gives a
  // zero velocity knee.
  double velocity_eps_floor = 0.25;
  double spatial_eps_floor = 0.2;
  int min_cluster_size = 4;
  double max_extent = 6.0;   // m, horizontal
  double max_aspect = 8.0;
  double min_extent = 0.2;   // m, floor for the shorter horizontal side
  bool tag_mode = false;     // tag bad shapes as roadside instead of dropping
};

// Size and shape screening. Clusters below min_cluster_size are always
// dropped. Shape violations are dropped, or kept with label roadside when
// tag_mode is on. Survivors keep their members unchanged.
std::vector<Cluster> filter_clusters(std::vector<Cluster> clusters, const ClusteringConfig& config);

struct DynamicDbscanResult {
  std::vector<Cluster> clusters;
  double velocity_eps = 0.0;
  double spatial_eps = 0.0;
  std::size_t unfiltered_count = 0;
};

// Velocity DBSCAN, then (x, y) DBSCAN inside every velocity cluster, then
// filter_clusters. The spatial knee is taken over k-distances measured
// within each velocity cluster. Clusters come out ordered by (velocity id, spatial id).
DynamicDbscanResult dynamic_dbscan(const PointCloud& cloud, const ClusteringConfig& config = {},
                                   Exec exec = Exec::parallel);

struct OverlayOptions {
  bool compensate = true;
  double stationary_velocity = 0.05;  // |v| at or below this is stationary, m/s
};

// Merge the newest `window` clouds. Moving points are shifted along their
// line of sight to r + v * dt (v is range rate) at the newest frame time.
PointCloud overlay_frames(std::span<const PointCloud> clouds, int window, double frame_interval,
                          const OverlayOptions& options = {});

struct NormalizedCloud {
  FeatureMatrix features;  // n x 4: x, y, z, v
  std::array<double, 4> mean{};
  std::array<double, 4> stddev{};  // population; 0 for constant columns

  FeatureMatrix denormalize() const;
};

NormalizedCloud normalize_points(const PointCloud& cloud);

// Greedy farthest point sampling from start_index; ties go to the lowest index.
std::vector<std::size_t> fps(const FeatureMatrix& points, std::size_t m, std::size_t start_index,
                             Exec exec = Exec::parallel);

// Indices within radius of each centre, ascending, at most max_k. An empty
// neighbourhood falls back to the single nearest point.
std::vector<std::vector<std::size_t>> ball_query(const FeatureMatrix& points, const FeatureMatrix& centers,
                                                 double radius, std::size_t max_k, Exec exec = Exec::parallel);

}  // namespace mmpoint
