#include "mmpoint/clustering.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mmpoint {

namespace {

template <typename F>
void for_each_index(std::size_t n, Exec exec, F&& body) {
  const auto count = static_cast<std::ptrdiff_t>(n);
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
  } else {
    for (std::ptrdiff_t i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
  }
}

std::vector<std::vector<std::size_t>> neighbour_lists(const FeatureMatrix& pts, double eps, Exec exec) {
  const std::size_t n = pts.rows();
  std::vector<std::vector<std::size_t>> out(n);
  for_each_index(n, exec, [&](std::size_t i) {
    for (std::size_t j = 0; j < n; ++j)
      if (euclidean(pts.row(i), pts.row(j)) <= eps) out[i].push_back(j);
  });
  return out;
}

double knee_or_floor(const FeatureMatrix& pts, int k, double floor, Exec exec) {
  if (pts.rows() <= static_cast<std::size_t>(k)) return floor;
  return std::max(knee_value(k_distances(pts, k, exec)), floor);
}

}  // namespace

FeatureMatrix::FeatureMatrix(std::size_t dims, std::vector<double> data) : dims_(dims), data_(std::move(data)) {
  if (dims_ == 0 || data_.size() % dims_ != 0) throw DomainError("FeatureMatrix: data size not a multiple of dims");
}

FeatureMatrix FeatureMatrix::select(std::span<const std::size_t> indices) const {
  FeatureMatrix out(indices.size(), dims_);
  for (std::size_t i = 0; i < indices.size(); ++i) std::copy_n(row(indices[i]).begin(), dims_, out.row(i).begin());
  return out;
}

double euclidean(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

FeatureMatrix velocity_features(const PointCloud& cloud) {
  FeatureMatrix f(cloud.points.size(), 1);
  for (std::size_t i = 0; i < cloud.points.size(); ++i) f(i, 0) = cloud.points[i].v_radial;
  return f;
}

FeatureMatrix planar_features(const PointCloud& cloud) {
  FeatureMatrix f(cloud.points.size(), 2);
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    f(i, 0) = cloud.points[i].x;
    f(i, 1) = cloud.points[i].y;
  }
  return f;
}

std::vector<double> k_distances(const FeatureMatrix& points, int k, Exec exec) {
  const std::size_t n = points.rows();
  if (k < 1) throw DomainError("k_distances: k must be >= 1");
  if (n <= static_cast<std::size_t>(k)) throw DomainError("k_distances: need more than k points");
  std::vector<double> out(n);
  for_each_index(n, exec, [&](std::size_t i) {
    std::vector<double> d;
    d.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) d.push_back(euclidean(points.row(i), points.row(j)));
    auto kth = d.begin() + (k - 1);
    std::nth_element(d.begin(), kth, d.end());
    out[i] = *kth;
  });
  return out;
}

double knee_value(std::vector<double> k_dist) {
  if (k_dist.empty()) throw DomainError("knee_value: empty curve");
  std::sort(k_dist.begin(), k_dist.end(), std::greater<>());
  const double hi = k_dist.front();
  const double lo = k_dist.back();
  if (hi - lo <= 1e-12 * std::max(std::abs(hi), 1e-300) || k_dist.size() < 3) return hi;

  const auto last = static_cast<double>(k_dist.size() - 1);
  std::size_t best = 0;
  double best_gap = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k_dist.size(); ++i) {
    const double x = static_cast<double>(i) / last;
    const double y = (k_dist[i] - lo) / (hi - lo);
    const double gap = 1.0 - x - y;  // proportional to distance below the chord
    if (gap > best_gap) {
      best_gap = gap;
      best = i;
    }
  }
  return k_dist[best];
}

double k_distance_radius(const FeatureMatrix& points, int k) {
  if (points.rows() <= static_cast<std::size_t>(k))
    throw DomainError("k_distance_radius: need at least k+1 points");
  const double eps = knee_value(k_distances(points, k));
  if (!(eps > 0.0)) throw DomainError("k_distance_radius: knee radius is zero (duplicate points)");
  return eps;
}

DbscanResult dbscan(const FeatureMatrix& points, double eps, int min_pts, Exec exec) {
  if (!(eps > 0.0)) throw DomainError("dbscan: eps must be > 0");
  if (min_pts < 1) throw DomainError("dbscan: min_pts must be >= 1");
  const std::size_t n = points.rows();
  const auto nbrs = neighbour_lists(points, eps, exec);
  const auto min_n = static_cast<std::size_t>(min_pts);

  DbscanResult res;
  res.labels.assign(n, -1);
  std::vector<bool> visited(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (visited[i]) continue;
    visited[i] = true;
    if (nbrs[i].size() < min_n) continue;
    const int id = static_cast<int>(res.clusters.size());
    res.clusters.emplace_back();
    res.labels[i] = id;
    std::deque<std::size_t> queue{i};
    while (!queue.empty()) {
      const std::size_t p = queue.front();
      queue.pop_front();
      if (nbrs[p].size() < min_n) continue;
      for (std::size_t q : nbrs[p]) {
        if (res.labels[q] == -1) res.labels[q] = id;
        if (!visited[q]) {
          visited[q] = true;
          queue.push_back(q);
        }
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (res.labels[i] < 0)
      res.noise.push_back(i);
    else
      res.clusters[static_cast<std::size_t>(res.labels[i])].push_back(i);
  }
  return res;
}

Cluster make_cluster(const PointCloud& cloud, std::vector<std::size_t> members) {
  if (members.empty()) throw DomainError("make_cluster: empty member list");
  std::sort(members.begin(), members.end());
  members.erase(std::unique(members.begin(), members.end()), members.end());
  Cluster c;
  const double inf = std::numeric_limits<double>::infinity();
  c.bbox.min = {inf, inf, inf};
  c.bbox.max = {-inf, -inf, -inf};
  Vec3 sum;
  double v_sum = 0.0;
  for (std::size_t i : members) {
    const auto& p = cloud.points.at(i);
    sum = sum + Vec3{p.x, p.y, p.z};
    v_sum += p.v_radial;
    c.bbox.min = {std::min(c.bbox.min.x, p.x), std::min(c.bbox.min.y, p.y), std::min(c.bbox.min.z, p.z)};
    c.bbox.max = {std::max(c.bbox.max.x, p.x), std::max(c.bbox.max.y, p.y), std::max(c.bbox.max.z, p.z)};
  }
  const auto n = static_cast<double>(members.size());
  c.centroid = sum * (1.0 / n);
  c.mean_v = v_sum / n;
  c.members = std::move(members);
  return c;
}

std::vector<Cluster> filter_clusters(std::vector<Cluster> clusters, const ClusteringConfig& config) {
  std::vector<Cluster> out;
  for (auto& c : clusters) {
    c.verdict = {};
    c.verdict.too_small = c.members.size() < static_cast<std::size_t>(std::max(config.min_cluster_size, 0));
    const double ex = c.extent_x();
    const double ey = c.extent_y();
    const double longest = std::max(ex, ey);
    const double shortest = std::max(std::min(ex, ey), config.min_extent);
    c.verdict.too_large = longest > config.max_extent;
    c.verdict.bad_aspect = longest / shortest > config.max_aspect;
    if (c.verdict.too_small) continue;
    if (c.verdict.roadside_like()) {
      if (!config.tag_mode) continue;
      c.label = Label::roadside;
    }
    out.push_back(std::move(c));
  }
  return out;
}

DynamicDbscanResult dynamic_dbscan(const PointCloud& cloud, const ClusteringConfig& config, Exec exec) {
  if (cloud.points.empty()) throw DomainError("dynamic_dbscan: empty point cloud");
  if (config.k_velocity < 1 || config.k_spatial < 1) throw DomainError("dynamic_dbscan: k must be >= 1");

  DynamicDbscanResult res;
  const FeatureMatrix vel = velocity_features(cloud);
  const FeatureMatrix xy = planar_features(cloud);
  res.velocity_eps = config.velocity_eps.value_or(knee_or_floor(vel, config.k_velocity, config.velocity_eps_floor, exec));
  const int mp_v = config.min_pts_velocity.value_or(config.k_velocity + 1);
  const int mp_s = config.min_pts_spatial.value_or(config.k_spatial + 1);

  const DbscanResult by_velocity = dbscan(vel, res.velocity_eps, mp_v, exec);

  // k-distances are taken inside each velocity cluster and pooled, so
  // overlapping objects at different speeds do not shrink eps_xy.
  if (config.spatial_eps) {
    res.spatial_eps = *config.spatial_eps;
  } else {
    std::vector<double> pooled;
    for (const auto& members : by_velocity.clusters) {
      if (members.size() <= static_cast<std::size_t>(config.k_spatial)) continue;
      const auto kd = k_distances(xy.select(members), config.k_spatial, exec);
      pooled.insert(pooled.end(), kd.begin(), kd.end());
    }
    res.spatial_eps = pooled.empty() ? config.spatial_eps_floor
                                     : std::max(knee_value(std::move(pooled)), config.spatial_eps_floor);
  }

  std::vector<std::vector<Cluster>> per_vc(by_velocity.clusters.size());
  auto spatial_pass = [&](std::size_t vc) {
    const auto& members = by_velocity.clusters[vc];
    const FeatureMatrix sub = xy.select(members);
    const DbscanResult by_space = dbscan(sub, res.spatial_eps, mp_s, Exec::serial);
    for (std::size_t sc = 0; sc < by_space.clusters.size(); ++sc) {
      std::vector<std::size_t> global;
      for (std::size_t local : by_space.clusters[sc]) global.push_back(members[local]);
      Cluster c = make_cluster(cloud, std::move(global));
      c.velocity_cluster = static_cast<int>(vc);
      c.spatial_cluster = static_cast<int>(sc);
      per_vc[vc].push_back(std::move(c));
    }
  };
  for_each_index(per_vc.size(), exec, spatial_pass);

  std::vector<Cluster> merged;
  for (auto& group : per_vc)
    for (auto& c : group) merged.push_back(std::move(c));
  res.unfiltered_count = merged.size();
  res.clusters = filter_clusters(std::move(merged), config);
  return res;
}

PointCloud overlay_frames(std::span<const PointCloud> clouds, int window, double frame_interval,
                          const OverlayOptions& options) {
  if (clouds.empty()) throw DomainError("overlay_frames: no clouds");
  if (window < 1) throw DomainError("overlay_frames: window must be >= 1");
  for (std::size_t i = 1; i < clouds.size(); ++i)
    if (clouds[i].frame_index != clouds[i - 1].frame_index + 1)
      throw DomainError("overlay_frames: frames must be consecutive");

  const std::size_t take = std::min(clouds.size(), static_cast<std::size_t>(window));
  const PointCloud& newest = clouds.back();
  PointCloud out;
  out.frame_index = newest.frame_index;
  out.params = newest.params;
  for (std::size_t i = clouds.size() - take; i < clouds.size(); ++i) {
    const double dt = static_cast<double>(newest.frame_index - clouds[i].frame_index) * frame_interval;
    for (const auto& p : clouds[i].points) {
      RadarPoint q = p;
      if (options.compensate && dt > 0.0 && std::abs(p.v_radial) > options.stationary_velocity) {
        const double r = p.range + p.v_radial * dt;
        if (r > 0.0) q = make_point(r, p.azimuth, p.elevation, p.v_radial, p.intensity, p.frame_index);
      }
      q.frame_index = newest.frame_index;
      out.points.push_back(q);
    }
  }
  return out;
}

NormalizedCloud normalize_points(const PointCloud& cloud) {
  if (cloud.points.empty()) throw DomainError("normalize_points: empty point cloud");
  const std::size_t n = cloud.points.size();
  NormalizedCloud out;
  out.features = FeatureMatrix(n, 4);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = cloud.points[i];
    out.features(i, 0) = p.x;
    out.features(i, 1) = p.y;
    out.features(i, 2) = p.z;
    out.features(i, 3) = p.v_radial;
  }
  for (std::size_t j = 0; j < 4; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += out.features(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = out.features(i, j) - mean;
      var += d * d;
    }
    double sd = std::sqrt(var / static_cast<double>(n));
    if (sd <= 1e-12 * std::max(1.0, std::abs(mean))) sd = 0.0;
    out.mean[j] = mean;
    out.stddev[j] = sd;
    for (std::size_t i = 0; i < n; ++i)
      out.features(i, j) = sd == 0.0 ? 0.0 : (out.features(i, j) - mean) / sd;
  }
  return out;
}

FeatureMatrix NormalizedCloud::denormalize() const {
  FeatureMatrix out = features;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < 4; ++j) out(i, j) = features(i, j) * stddev[j] + mean[j];
  return out;
}

std::vector<std::size_t> fps(const FeatureMatrix& points, std::size_t m, std::size_t start_index, Exec exec) {
  const std::size_t n = points.rows();
  if (m < 1 || m > n) throw DomainError("fps: m must be in [1, point count]");
  if (start_index >= n) throw DomainError("fps: start_index out of range");

  // Picked points carry -1 so they never win again, even among duplicates.
  std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> picks{start_index};
  min_dist[start_index] = -1.0;
  const auto count = static_cast<std::ptrdiff_t>(n);

  while (picks.size() < m) {
    const auto last = points.row(picks.back());
    double best_v = -2.0;
    std::size_t best_i = n;
    auto consider = [](double v, std::size_t i, double& bv, std::size_t& bi) {
      if (v > bv || (v == bv && i < bi)) {
        bv = v;
        bi = i;
      }
    };
    if (exec == Exec::parallel) {
#pragma omp parallel
      {
        double local_v = -2.0;
        std::size_t local_i = n;
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < count; ++i) {
          const auto u = static_cast<std::size_t>(i);
          if (min_dist[u] >= 0.0) min_dist[u] = std::min(min_dist[u], euclidean(points.row(u), last));
          consider(min_dist[u], u, local_v, local_i);
        }
#pragma omp critical(mmpoint_fps)
        consider(local_v, local_i, best_v, best_i);
      }
    } else {
      for (std::size_t u = 0; u < n; ++u) {
        if (min_dist[u] >= 0.0) min_dist[u] = std::min(min_dist[u], euclidean(points.row(u), last));
        consider(min_dist[u], u, best_v, best_i);
      }
    }
    picks.push_back(best_i);
    min_dist[best_i] = -1.0;
  }
  return picks;
}

std::vector<std::vector<std::size_t>> ball_query(const FeatureMatrix& points, const FeatureMatrix& centers,
                                                 double radius, std::size_t max_k, Exec exec) {
  if (points.rows() == 0) throw DomainError("ball_query: empty point set");
  if (!(radius > 0.0)) throw DomainError("ball_query: radius must be > 0");
  if (max_k < 1) throw DomainError("ball_query: max_k must be >= 1");
  if (centers.rows() > 0 && centers.dims() != points.dims()) throw DomainError("ball_query: dimension mismatch");

  std::vector<std::vector<std::size_t>> out(centers.rows());
  for_each_index(centers.rows(), exec, [&](std::size_t c) {
    std::size_t nearest = 0;
    double nearest_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points.rows(); ++i) {
      const double d = euclidean(points.row(i), centers.row(c));
      if (d < nearest_d) {
        nearest_d = d;
        nearest = i;
      }
      if (d <= radius && out[c].size() < max_k) out[c].push_back(i);
    }
    if (out[c].empty()) out[c].push_back(nearest);
  });
  return out;
}

}  // namespace mmpoint
