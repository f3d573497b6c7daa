#include "mmpoint/detection.hpp"

#include <algorithm>
#include <limits>

#include "mmpoint/fft.hpp"

namespace mmpoint {

namespace {

std::size_t wrap(std::ptrdiff_t i, std::size_t n) {
  const auto m = static_cast<std::ptrdiff_t>(n);
  return static_cast<std::size_t>(((i % m) + m) % m);
}

double clamp_unit(double v) { return std::clamp(v, -1.0, 1.0); }

struct BeamSpace {
  std::size_t n_az = 1;
  std::size_t n_el = 1;
  double az_pitch = 0.5;
  double el_pitch = 0.5;
  std::vector<double> magnitude;  // [el][az], fft-shifted

  double at(std::size_t e, std::size_t a) const { return magnitude[e * n_az + a]; }

  double u_az(std::size_t a) const {
    return (static_cast<double>(a) - static_cast<double>(n_az / 2)) / (static_cast<double>(n_az) * az_pitch);
  }
  double u_el(std::size_t e) const {
    return (static_cast<double>(e) - static_cast<double>(n_el / 2)) / (static_cast<double>(n_el) * el_pitch);
  }
  bool visible(std::size_t e, std::size_t a) const { return u_az(a) * u_az(a) + u_el(e) * u_el(e) <= 1.0; }

  AngleEstimate angles_at(std::size_t e, std::size_t a) const {
    AngleEstimate est;
    est.elevation = std::asin(clamp_unit(u_el(e)));
    est.azimuth = std::asin(clamp_unit(u_az(a) / std::cos(est.elevation)));
    est.magnitude = at(e, a);
    return est;
  }
};

BeamSpace beam_space(std::span<const cplx> snapshot, const VirtualArray& array, int zoom) {
  if (snapshot.size() != array.size())
    throw DomainError("estimate_angles: snapshot length must equal virtual element count");
  if (zoom < 1) throw DomainError("estimate_angles: zoom must be >= 1");
  const ArrayLattice lat = lattice_of(array);
  BeamSpace bs;
  bs.az_pitch = lat.az_pitch;
  bs.el_pitch = lat.el_pitch;
  bs.n_az = lat.n_az > 1 ? lat.n_az * static_cast<std::size_t>(zoom) : 1;
  bs.n_el = lat.n_el > 1 ? lat.n_el * static_cast<std::size_t>(zoom) : 1;

  std::vector<cplx> grid(bs.n_az * bs.n_el, cplx{});
  for (std::size_t k = 0; k < snapshot.size(); ++k) grid[lat.el_index[k] * bs.n_az + lat.az_index[k]] += snapshot[k];
  const int na = static_cast<int>(bs.n_az);
  const int ne = static_cast<int>(bs.n_el);
  if (na > 1) fft_many(grid, na, ne, 1, na, FftSign::negative);
  if (ne > 1) fft_many(grid, ne, na, na, 1, FftSign::negative);

  bs.magnitude.resize(grid.size());
  const std::size_t sa = bs.n_az - bs.n_az / 2;
  const std::size_t se = bs.n_el - bs.n_el / 2;
  for (std::size_t e = 0; e < bs.n_el; ++e)
    for (std::size_t a = 0; a < bs.n_az; ++a)
      bs.magnitude[e * bs.n_az + a] = std::abs(grid[((e + se) % bs.n_el) * bs.n_az + (a + sa) % bs.n_az]);
  return bs;
}

}  // namespace

double cfar_alpha(std::size_t n_train, double pfa) {
  const auto n = static_cast<double>(n_train);
  return n * (std::pow(pfa, -1.0 / n) - 1.0);
}

std::size_t cfar_training_cells(const CfarConfig& c) {
  const auto outer = static_cast<std::size_t>((2 * (c.guard_range + c.train_range) + 1) *
                                              (2 * (c.guard_doppler + c.train_doppler) + 1));
  const auto inner = static_cast<std::size_t>((2 * c.guard_range + 1) * (2 * c.guard_doppler + 1));
  return outer - inner;
}

std::vector<Detection> cfar_detect(std::span<const double> power, std::size_t n_range, std::size_t n_doppler,
                                   const CfarConfig& c, Exec exec) {
  if (power.size() != n_range * n_doppler) throw DomainError("cfar_detect: map size mismatch");
  if (c.guard_range < 0 || c.guard_doppler < 0 || c.train_range < 0 || c.train_doppler < 0)
    throw DomainError("cfar_detect: guard and training sizes must be >= 0");
  if (!(c.pfa > 0.0 && c.pfa < 1.0)) throw DomainError("cfar_detect: pfa must be in (0, 1)");
  const int half_r = c.guard_range + c.train_range;
  const int half_d = c.guard_doppler + c.train_doppler;
  if (static_cast<std::size_t>(2 * half_r + 1) > n_range || static_cast<std::size_t>(2 * half_d + 1) > n_doppler)
    throw DomainError("cfar_detect: training window exceeds map size");
  const std::size_t n_train = cfar_training_cells(c);
  if (n_train == 0) throw DomainError("cfar_detect: training band is empty");
  const double alpha = cfar_alpha(n_train, c.pfa);

  auto value = [&](std::size_t r, std::size_t d) { return power[r * n_doppler + d]; };

  auto is_peak = [&](std::size_t r, std::size_t d) {
    const double v = value(r, d);
    for (int dr = -1; dr <= 1; ++dr) {
      const auto rr = static_cast<std::ptrdiff_t>(r) + dr;
      if (rr < 0 || rr >= static_cast<std::ptrdiff_t>(n_range)) continue;
      for (int dd = -1; dd <= 1; ++dd) {
        if (dr == 0 && dd == 0) continue;
        const std::size_t d2 = wrap(static_cast<std::ptrdiff_t>(d) + dd, n_doppler);
        const double w = value(static_cast<std::size_t>(rr), d2);
        const bool earlier = dr < 0 || (dr == 0 && dd < 0);
        if (w > v || (earlier && w == v)) return false;
      }
    }
    return true;
  };

  auto test_row = [&](std::size_t r, std::vector<Detection>& out) {
    for (std::size_t d = 0; d < n_doppler; ++d) {
      const double cut = value(r, d);
      if (!(cut > c.min_abs_power)) continue;
      double sum = 0.0;
      for (int dr = -half_r; dr <= half_r; ++dr) {
        const std::size_t rr = r + static_cast<std::size_t>(static_cast<std::ptrdiff_t>(dr));
        const bool in_guard_r = std::abs(dr) <= c.guard_range;
        for (int dd = -half_d; dd <= half_d; ++dd) {
          if (in_guard_r && std::abs(dd) <= c.guard_doppler) continue;
          sum += value(rr, wrap(static_cast<std::ptrdiff_t>(d) + dd, n_doppler));
        }
      }
      const double threshold = alpha * (sum / static_cast<double>(n_train));
      if (cut > threshold && is_peak(r, d)) out.push_back({r, d, cut});
    }
  };

  const std::size_t r_begin = static_cast<std::size_t>(half_r);
  const std::size_t r_end = n_range - static_cast<std::size_t>(half_r);
  std::vector<std::vector<Detection>> rows(n_range);
  const auto lo = static_cast<std::ptrdiff_t>(r_begin);
  const auto hi = static_cast<std::ptrdiff_t>(r_end);
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t r = lo; r < hi; ++r) test_row(static_cast<std::size_t>(r), rows[static_cast<std::size_t>(r)]);
  } else {
    for (std::ptrdiff_t r = lo; r < hi; ++r) test_row(static_cast<std::size_t>(r), rows[static_cast<std::size_t>(r)]);
  }
  std::vector<Detection> out;
  for (auto& row : rows) out.insert(out.end(), row.begin(), row.end());
  return out;
}

AngleEstimate estimate_angles(std::span<const cplx> snapshot, const VirtualArray& array, int zoom) {
  const BeamSpace bs = beam_space(snapshot, array, zoom);
  const auto best = std::max_element(bs.magnitude.begin(), bs.magnitude.end());
  const auto idx = static_cast<std::size_t>(best - bs.magnitude.begin());
  return bs.angles_at(idx / bs.n_az, idx % bs.n_az);
}

std::vector<AngleEstimate> estimate_angle_peaks(std::span<const cplx> snapshot, const VirtualArray& array,
                                                int zoom, std::size_t max_peaks, double rel_threshold) {
  const BeamSpace bs = beam_space(snapshot, array, zoom);
  const double top = *std::max_element(bs.magnitude.begin(), bs.magnitude.end());
  std::vector<std::pair<double, std::size_t>> peaks;
  if (!(top > 0.0)) {
    // Flat (all-zero) spectrum: report the broadside bin only.
    peaks.emplace_back(0.0, (bs.n_el / 2) * bs.n_az + bs.n_az / 2);
  } else {
    for (std::size_t e = 0; e < bs.n_el; ++e)
      for (std::size_t a = 0; a < bs.n_az; ++a) {
        const double v = bs.at(e, a);
        if (v < rel_threshold * top || !bs.visible(e, a)) continue;
        bool peak = true;
        for (int de = -1; de <= 1 && peak; ++de)
          for (int da = -1; da <= 1; ++da) {
            if (de == 0 && da == 0) continue;
            if (bs.n_el == 1 && de != 0) continue;
            if (bs.n_az == 1 && da != 0) continue;
            const std::size_t e2 = wrap(static_cast<std::ptrdiff_t>(e) + de, bs.n_el);
            const std::size_t a2 = wrap(static_cast<std::ptrdiff_t>(a) + da, bs.n_az);
            const double w = bs.at(e2, a2);
            const bool earlier = e2 * bs.n_az + a2 < e * bs.n_az + a;
            if (w > v || (earlier && w == v)) {
              peak = false;
              break;
            }
          }
        if (peak) peaks.emplace_back(v, e * bs.n_az + a);
      }
    std::stable_sort(peaks.begin(), peaks.end(), [](const auto& l, const auto& r) { return l.first > r.first; });
    if (peaks.empty()) {
      const auto it = std::max_element(bs.magnitude.begin(), bs.magnitude.end());
      peaks.emplace_back(*it, static_cast<std::size_t>(it - bs.magnitude.begin()));
    }
  }
  if (peaks.size() > max_peaks) peaks.resize(max_peaks);
  std::vector<AngleEstimate> out;
  for (const auto& [v, idx] : peaks) out.push_back(bs.angles_at(idx / bs.n_az, idx % bs.n_az));
  return out;
}

RadarPoint make_point(double range, double azimuth, double elevation, double v_radial, double intensity,
                      int frame_index) {
  RadarPoint p;
  p.range = range;
  p.azimuth = azimuth;
  p.elevation = elevation;
  p.v_radial = v_radial;
  p.intensity = intensity;
  p.frame_index = frame_index;
  const double ce = std::cos(elevation);
  p.x = range * ce * std::sin(azimuth);
  p.y = range * ce * std::cos(azimuth);
  p.z = range * std::sin(elevation);
  return p;
}

PointCloud generate_point_cloud(const EchoCube& cube, const PointCloudConfig& config, Exec exec) {
  PointCloud cloud;
  cloud.frame_index = cube.frame_index;
  cloud.params = cube.params;
  // Throwing inside the parallel region below would terminate.
  (void)lattice_of(cube.array);
  if (config.zoom < 1) throw DomainError("generate_point_cloud: zoom must be >= 1");

  const RDMap rdm = compute_rdm(cube, config.window, exec);
  const std::vector<double> power = rdm.power_sum(exec);
  const auto dets = cfar_detect(power, rdm.n_range, rdm.n_doppler, config.cfar, exec);

  const double slot = cube.params.repetition_interval() / static_cast<double>(cube.array.n_tx);
  const double lambda = cube.params.lambda();
  std::vector<std::vector<RadarPoint>> per_det(dets.size());

  auto process = [&](std::size_t i) {
    const Detection& det = dets[i];
    if (det.range_bin == 0) return;
    std::vector<cplx> snap(rdm.n_channels);
    const double v = rdm.velocity_axis[det.doppler_bin];
    for (std::size_t ch = 0; ch < rdm.n_channels; ++ch) {
      snap[ch] = rdm.at(ch, det.range_bin, det.doppler_bin);
      if (config.compensate_tdm) {
        const double delay = slot * static_cast<double>(cube.array.tx_of(ch));
        snap[ch] *= std::polar(1.0, 2.0 * kPi * doppler_frequency(v, lambda) * delay);
      }
    }
    const auto peaks = estimate_angle_peaks(snap, cube.array, config.zoom, config.max_angle_peaks,
                                            config.angle_peak_rel);
    const double top = peaks.front().magnitude;
    const double amp = std::sqrt(det.power);
    for (const auto& pk : peaks) {
      const double rel = top > 0.0 ? pk.magnitude / top : 1.0;
      per_det[i].push_back(make_point(rdm.range_axis[det.range_bin], pk.azimuth, pk.elevation, v, amp * rel,
                                      cube.frame_index));
    }
  };

  const auto n = static_cast<std::ptrdiff_t>(dets.size());
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) process(static_cast<std::size_t>(i));
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) process(static_cast<std::size_t>(i));
  }
  for (auto& pts : per_det) cloud.points.insert(cloud.points.end(), pts.begin(), pts.end());
  return cloud;
}

}  // namespace mmpoint
