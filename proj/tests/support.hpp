#pragma once

// Shared fixtures for unit and acceptance tests: seeded generators,
// brute-force reference implementations and small scene builders.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mmpoint/array.hpp"
#include "mmpoint/clustering.hpp"
#include "mmpoint/echo.hpp"
#include "mmpoint/io.hpp"

namespace mmtest {

using mmpoint::cplx;

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : eng_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng_); }
  double normal(double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(eng_); }
  std::mt19937_64& engine() { return eng_; }

  std::vector<double> vector(std::size_t n, double lo, double hi) {
    std::vector<double> v(n);
    for (auto& x : v) x = uniform(lo, hi);
    return v;
  }

  mmpoint::FeatureMatrix features(std::size_t n, std::size_t dims, double lo, double hi) {
    return mmpoint::FeatureMatrix(dims, vector(n * dims, lo, hi));
  }

  // Points on an integer lattice scaled by `step`, so many pairwise distances
  // tie exactly and boundary cases in eps comparisons get exercised.
  mmpoint::FeatureMatrix lattice_features(std::size_t n, std::size_t dims, int extent, double step) {
    std::vector<double> v(n * dims);
    for (auto& x : v) x = step * integer(0, extent);
    return mmpoint::FeatureMatrix(dims, std::move(v));
  }

 private:
  std::mt19937_64 eng_;
};

inline std::string source_path(const std::string& rel) { return std::string(MMPOINT_SOURCE_DIR) + "/" + rel; }

inline mmpoint::ArrayLayout ula_layout(int n_rx) {
  mmpoint::ArrayLayout l;
  l.tx.push_back({0.0, 0.0});
  for (int j = 0; j < n_rx; ++j) l.rx.push_back({static_cast<double>(j), 0.0});
  return l;
}

inline mmpoint::ArrayLayout shipped_layout() { return mmpoint::load_layout_file(source_path("data/layout_12x16.json")); }

// Default radar with a repetition interval long enough for n_tx TDM slots.
inline mmpoint::RadarParams radar_for(std::size_t n_tx, int n_chirps = 64) {
  mmpoint::RadarParams p;
  p.n_chirps = n_chirps;
  const double t_rep = std::max(40e-6, static_cast<double>(n_tx) * 26e-6);
  p.ta = n_chirps * t_rep;
  return p;
}

inline mmpoint::Scatterer point_at(double range, double az_deg, double el_deg, double v_radial, double rcs = 1.0) {
  const double az = mmpoint::deg2rad(az_deg);
  const double el = mmpoint::deg2rad(el_deg);
  const mmpoint::Vec3 dir{std::cos(el) * std::sin(az), std::cos(el) * std::cos(az), std::sin(el)};
  mmpoint::Scatterer s;
  s.position = dir * range;
  s.velocity = dir * v_radial;
  s.rcs = rcs;
  return s;
}

// Textbook DBSCAN: union-find over core points joined within eps; each
// border point joins the earliest-formed cluster among its core neighbours.
// Clusters are numbered by their lowest core index.
struct ReferencePartition {
  std::vector<std::vector<std::size_t>> clusters;
  std::vector<std::size_t> noise;
};

inline ReferencePartition reference_dbscan(const mmpoint::FeatureMatrix& pts, double eps, int min_pts) {
  const std::size_t n = pts.rows();
  std::vector<std::vector<bool>> near(n, std::vector<bool>(n));
  std::vector<bool> core(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t count = 0;
    for (std::size_t j = 0; j < n; ++j) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < pts.dims(); ++k) d2 += (pts(i, k) - pts(j, k)) * (pts(i, k) - pts(j, k));
      near[i][j] = std::sqrt(d2) <= eps;
      count += near[i][j] ? 1 : 0;
    }
    core[i] = count >= static_cast<std::size_t>(min_pts);
  }
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (core[i] && core[j] && near[i][j]) parent[std::max(find(i), find(j))] = std::min(find(i), find(j));

  std::map<std::size_t, std::size_t> root_to_id;  // root = lowest core index of the component
  for (std::size_t i = 0; i < n; ++i)
    if (core[i] && !root_to_id.contains(find(i))) root_to_id.emplace(find(i), root_to_id.size());

  ReferencePartition out;
  out.clusters.resize(root_to_id.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = SIZE_MAX;
    if (core[i]) {
      best = root_to_id[find(i)];
    } else {
      for (std::size_t j = 0; j < n; ++j)
        if (core[j] && near[i][j]) best = std::min(best, root_to_id[find(j)]);
    }
    if (best == SIZE_MAX)
      out.noise.push_back(i);
    else
      out.clusters[best].push_back(i);
  }
  return out;
}

// Canonical form for comparing partitions up to relabelling.
inline std::set<std::vector<std::size_t>> as_set(const std::vector<std::vector<std::size_t>>& clusters) {
  std::set<std::vector<std::size_t>> s;
  for (auto c : clusters) {
    std::sort(c.begin(), c.end());
    s.insert(c);
  }
  return s;
}

// Each pick after the first must maximise its minimum distance to earlier
// picks, with the lowest index among ties.
inline bool fps_picks_are_greedy(const mmpoint::FeatureMatrix& pts, const std::vector<std::size_t>& picks,
                                 std::string* why = nullptr) {
  for (std::size_t k = 1; k < picks.size(); ++k) {
    double best = -1.0;
    std::size_t best_i = SIZE_MAX;
    for (std::size_t i = 0; i < pts.rows(); ++i) {
      if (std::find(picks.begin(), picks.begin() + static_cast<std::ptrdiff_t>(k), i) !=
          picks.begin() + static_cast<std::ptrdiff_t>(k))
        continue;
      double m = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < k; ++j) m = std::min(m, mmpoint::euclidean(pts.row(i), pts.row(picks[j])));
      if (m > best) {
        best = m;
        best_i = i;
      }
    }
    if (picks[k] != best_i) {
      if (why) *why = "pick " + std::to_string(k) + " is " + std::to_string(picks[k]) + ", expected " + std::to_string(best_i);
      return false;
    }
  }
  return true;
}

// Direct DFT (no FFT) of one fast-time row at an arbitrary normalised frequency.
inline cplx direct_dft(const cplx* x, std::size_t n, double cycles_per_sample) {
  cplx acc{};
  for (std::size_t i = 0; i < n; ++i)
    acc += x[i] * std::polar(1.0, 2.0 * mmpoint::kPi * cycles_per_sample * static_cast<double>(i));
  return acc;
}

// Fresh directory under the system temp dir, removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("mmpoint-" + tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace mmtest
