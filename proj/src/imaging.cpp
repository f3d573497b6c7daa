#include "mmpoint/imaging.hpp"

#include <algorithm>

#include "mmpoint/fft.hpp"

namespace mmpoint {

namespace {

template <typename F>
void for_each_index(std::size_t n, Exec exec, F&& body) {
  const auto count = static_cast<std::ptrdiff_t>(n);
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
  } else {
    for (std::ptrdiff_t i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
  }
}

// Index i with axis[i] <= v <= axis[i+1]; axis has at least two entries and
// v is inside [front, back].
std::size_t bracket(std::span<const double> axis, double v) {
  auto it = std::upper_bound(axis.begin(), axis.end(), v);
  auto i = static_cast<std::size_t>(it - axis.begin());
  if (i == 0) return 0;
  return std::min(i - 1, axis.size() - 2);
}

double range_of_bin(const RadarParams& p, std::size_t k) {
  const double f = static_cast<double>(k) * p.fs / static_cast<double>(p.n_samples);
  return f * kSpeedOfLight / (2.0 * p.kr);
}

// Range-FFT of one chirp per channel: [channel][range bin].
std::vector<cplx> range_profiles(const EchoCube& cube, std::size_t chirp, Window window, Exec exec) {
  const std::size_t ns = cube.n_samples;
  const auto w = make_window(window, ns);
  std::vector<cplx> out(cube.n_channels * ns);
  for_each_index(cube.n_channels, exec, [&](std::size_t ch) {
    std::span<cplx> row(&out[ch * ns], ns);
    for (std::size_t i = 0; i < ns; ++i) row[i] = cube.at(ch, chirp, i) * w[i];
    fft(row, FftSign::positive);
  });
  return out;
}

}  // namespace

std::vector<double> make_window(Window w, std::size_t n) {
  std::vector<double> out(n, 1.0);
  if (w == Window::hann)
    for (std::size_t i = 0; i < n; ++i)
      out[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n));
  return out;
}

std::vector<double> RDMap::magnitude(std::size_t ch) const {
  std::vector<double> out(n_range * n_doppler);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::abs(spectrum[ch * n_range * n_doppler + i]);
  return out;
}

std::vector<double> RDMap::power_sum(Exec exec) const {
  std::vector<double> out(n_range * n_doppler, 0.0);
  const std::size_t plane = n_range * n_doppler;
  for_each_index(n_range, exec, [&](std::size_t r) {
    for (std::size_t ch = 0; ch < n_channels; ++ch) {
      const cplx* src = &spectrum[ch * plane + r * n_doppler];
      double* dst = &out[r * n_doppler];
      for (std::size_t d = 0; d < n_doppler; ++d) dst[d] += std::norm(src[d]);
    }
  });
  return out;
}

double RDMap::energy(std::size_t ch) const {
  double e = 0.0;
  const std::size_t plane = n_range * n_doppler;
  for (std::size_t i = 0; i < plane; ++i) e += std::norm(spectrum[ch * plane + i]);
  return e;
}

RDMap compute_rdm(const EchoCube& cube, Window window, Exec exec) {
  RDMap map;
  map.n_channels = cube.n_channels;
  map.n_range = cube.n_samples;
  map.n_doppler = cube.n_chirps;
  map.spectrum.resize(map.n_channels * map.n_range * map.n_doppler);

  const auto& p = cube.params;
  map.range_axis.resize(map.n_range);
  for (std::size_t k = 0; k < map.n_range; ++k) map.range_axis[k] = range_of_bin(p, k);
  map.velocity_axis.resize(map.n_doppler);
  const double dv = p.velocity_resolution();
  for (std::size_t k = 0; k < map.n_doppler; ++k)
    map.velocity_axis[k] = (static_cast<double>(k) - static_cast<double>(map.n_doppler / 2)) * dv;

  const std::size_t ns = cube.n_samples;
  const std::size_t nc = cube.n_chirps;
  const auto w_fast = make_window(window, ns);
  const auto w_slow = make_window(window, nc);

  for_each_index(cube.n_channels, exec, [&](std::size_t ch) {
    std::vector<cplx> buf(nc * ns);
    for (std::size_t a = 0; a < nc; ++a)
      for (std::size_t i = 0; i < ns; ++i) buf[a * ns + i] = cube.at(ch, a, i) * (w_fast[i] * w_slow[a]);
    fft_many(buf, static_cast<int>(ns), static_cast<int>(nc), 1, static_cast<int>(ns), FftSign::positive);
    fft_many(buf, static_cast<int>(nc), static_cast<int>(ns), static_cast<int>(ns), 1, FftSign::positive);
    const std::size_t shift = nc - nc / 2;
    for (std::size_t r = 0; r < ns; ++r)
      for (std::size_t d = 0; d < nc; ++d)
        map.spectrum[map.index(ch, r, d)] = buf[((d + shift) % nc) * ns + r];
  });
  return map;
}

RAMap compute_ram(const EchoCube& cube, const RamOptions& options, Exec exec) {
  const ArrayLattice lat = lattice_of(cube.array);
  const std::size_t nfft = options.n_angle_fft;
  if (nfft < lat.n_az) throw DomainError("compute_ram: n_angle_fft smaller than azimuth aperture");

  // [channel][range] complex profile.
  const std::size_t ns = cube.n_samples;
  std::vector<cplx> profiles;
  if (options.mode == RamMode::static_scene) {
    if (options.slow_time_index >= cube.n_chirps) throw DomainError("compute_ram: slow_time_index out of range");
    profiles = range_profiles(cube, options.slow_time_index, options.window, exec);
  } else {
    const RDMap rdm = compute_rdm(cube, options.window, exec);
    profiles.resize(cube.n_channels * ns);
    for (std::size_t ch = 0; ch < cube.n_channels; ++ch)
      for (std::size_t r = 0; r < ns; ++r) profiles[ch * ns + r] = rdm.at(ch, r, rdm.zero_doppler_bin());
  }

  // Angle bins kept after the shift: sin(theta) = (k - nfft/2) / (nfft * pitch).
  std::vector<std::size_t> kept;
  std::vector<double> angles;
  for (std::size_t k = 0; k < nfft; ++k) {
    const double u = (static_cast<double>(k) - static_cast<double>(nfft / 2)) / (static_cast<double>(nfft) * lat.az_pitch);
    if (std::abs(u) >= 1.0) continue;
    const double theta = std::asin(u);
    if (std::abs(theta) > options.max_angle) continue;
    kept.push_back(k);
    angles.push_back(theta);
  }

  RAMap ram;
  ram.polar.angle_axis = angles;
  ram.polar.range_axis.resize(ns);
  for (std::size_t k = 0; k < ns; ++k) ram.polar.range_axis[k] = range_of_bin(cube.params, k);
  ram.polar.values.assign(ns * kept.size(), 0.0);

  const std::size_t shift = nfft - nfft / 2;
  for_each_index(ns, exec, [&](std::size_t r) {
    std::vector<cplx> line(nfft, cplx{});
    for (std::size_t ch = 0; ch < cube.n_channels; ++ch) line[lat.az_index[ch]] += profiles[ch * ns + r];
    fft(line, FftSign::negative);
    for (std::size_t j = 0; j < kept.size(); ++j) ram.polar.at(r, j) = std::abs(line[(kept[j] + shift) % nfft]);
  });

  ram.cartesian = polar_to_cartesian(ram.polar, options.pixel_pitch, exec);
  return ram;
}

CartesianMap polar_to_cartesian(const PolarMap& map, double pixel_pitch, Exec exec) {
  if (!(pixel_pitch > 0.0)) throw DomainError("polar_to_cartesian: pixel pitch must be > 0");
  if (map.range_axis.size() < 2 || map.angle_axis.size() < 2)
    throw DomainError("polar_to_cartesian: need at least 2 range and 2 angle samples");
  const double r_max = map.range_axis.back();
  const double th_lo = map.angle_axis.front();
  const double th_hi = map.angle_axis.back();
  const double th_abs = std::min(kPi / 2.0, std::max(std::abs(th_lo), std::abs(th_hi)));

  CartesianMap out;
  out.pitch = pixel_pitch;
  const double half_width = r_max * std::sin(th_abs);
  const auto half_cells = static_cast<std::size_t>(std::ceil(half_width / pixel_pitch));
  out.nx = 2 * half_cells + 1;
  out.x0 = -static_cast<double>(half_cells) * pixel_pitch;
  out.y0 = 0.0;
  out.ny = static_cast<std::size_t>(std::ceil(r_max / pixel_pitch)) + 1;
  out.values.assign(out.nx * out.ny, 0.0);

  const std::span<const double> ra(map.range_axis);
  const std::span<const double> aa(map.angle_axis);
  for_each_index(out.ny, exec, [&](std::size_t iy) {
    const double y = out.y(iy);
    for (std::size_t ix = 0; ix < out.nx; ++ix) {
      const double x = out.x(ix);
      const double r = std::hypot(x, y);
      const double th = std::atan2(x, y);
      if (r < ra.front() || r > ra.back() || th < aa.front() || th > aa.back()) continue;
      const std::size_t i = bracket(ra, r);
      const std::size_t j = bracket(aa, th);
      const double fr = (r - ra[i]) / (ra[i + 1] - ra[i]);
      const double fa = (th - aa[j]) / (aa[j + 1] - aa[j]);
      out.at(ix, iy) = (1 - fr) * ((1 - fa) * map.at(i, j) + fa * map.at(i, j + 1)) +
                       fr * ((1 - fa) * map.at(i + 1, j) + fa * map.at(i + 1, j + 1));
    }
  });
  return out;
}

PolarMap cartesian_to_polar(const CartesianMap& map, std::span<const double> range_axis,
                            std::span<const double> angle_axis, Exec exec) {
  if (map.nx < 2 || map.ny < 2) throw DomainError("cartesian_to_polar: need at least a 2x2 grid");
  PolarMap out;
  out.range_axis.assign(range_axis.begin(), range_axis.end());
  out.angle_axis.assign(angle_axis.begin(), angle_axis.end());
  out.values.assign(out.range_axis.size() * out.angle_axis.size(), 0.0);

  const double x_hi = map.x(map.nx - 1);
  const double y_hi = map.y(map.ny - 1);
  for_each_index(out.range_axis.size(), exec, [&](std::size_t i) {
    const double r = out.range_axis[i];
    for (std::size_t j = 0; j < out.angle_axis.size(); ++j) {
      const double x = r * std::sin(out.angle_axis[j]);
      const double y = r * std::cos(out.angle_axis[j]);
      if (x < map.x0 || x > x_hi || y < map.y0 || y > y_hi) continue;
      const double gx = (x - map.x0) / map.pitch;
      const double gy = (y - map.y0) / map.pitch;
      const auto ix = std::min(static_cast<std::size_t>(gx), map.nx - 2);
      const auto iy = std::min(static_cast<std::size_t>(gy), map.ny - 2);
      const double fx = gx - static_cast<double>(ix);
      const double fy = gy - static_cast<double>(iy);
      out.at(i, j) = (1 - fy) * ((1 - fx) * map.at(ix, iy) + fx * map.at(ix + 1, iy)) +
                     fy * ((1 - fx) * map.at(ix, iy + 1) + fx * map.at(ix + 1, iy + 1));
    }
  });
  return out;
}

}  // namespace mmpoint
