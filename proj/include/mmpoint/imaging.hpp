#pragma once

#include <span>
#include <vector>

#include "mmpoint/echo.hpp"

namespace mmpoint {

enum class Window { rect, hann };

// Periodic window of length n.
std::vector<double> make_window(Window w, std::size_t n);

// Per-channel range-Doppler spectra, stored [channel][range bin][Doppler bin].
// Range bin k sits at k * c / (2 kr tp); Doppler is fft-shifted so bin
// n_doppler/2 is zero velocity, and velocities are range rates (positive
// when receding), bin width lambda / (2 ta).
struct RDMap {
  std::size_t n_channels = 0;
  std::size_t n_range = 0;
  std::size_t n_doppler = 0;
  std::vector<cplx> spectrum;
  std::vector<double> range_axis;     // m
  std::vector<double> velocity_axis;  // m/s

  std::size_t index(std::size_t ch, std::size_t r, std::size_t d) const { return (ch * n_range + r) * n_doppler + d; }
  const cplx& at(std::size_t ch, std::size_t r, std::size_t d) const { return spectrum[index(ch, r, d)]; }
  std::size_t zero_doppler_bin() const { return n_doppler / 2; }

  // |S| for one channel, [range][doppler].
  std::vector<double> magnitude(std::size_t ch) const;
  // Noncoherent sum over channels of |S|^2, [range][doppler].
  std::vector<double> power_sum(Exec exec = Exec::parallel) const;
  double energy(std::size_t ch) const;
};

// Windowed FFT over fast time then slow time for every channel. Both axes
// use the positive-exponent kernel so that the dechirped tone at -f_b and
// the Doppler tone at -2 v / lambda land on positive bins. Unnormalized:
// with a rectangular window, energy(ch) == n_samples * n_chirps * cube energy.
RDMap compute_rdm(const EchoCube& cube, Window window = Window::hann, Exec exec = Exec::parallel);

// Magnitude grid over a polar (range, angle) domain, angle fastest.
struct PolarMap {
  std::vector<double> range_axis;  // m, increasing
  std::vector<double> angle_axis;  // rad, increasing
  std::vector<double> values;

  double at(std::size_t r, std::size_t a) const { return values[r * angle_axis.size() + a]; }
  double& at(std::size_t r, std::size_t a) { return values[r * angle_axis.size() + a]; }
};

// Bird's-eye grid: cell (ix, iy) is centred at (x0 + ix*pitch, y0 + iy*pitch),
// stored row-major with x fastest.
struct CartesianMap {
  double x0 = 0.0;
  double y0 = 0.0;
  double pitch = 1.0;
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::vector<double> values;

  double at(std::size_t ix, std::size_t iy) const { return values[iy * nx + ix]; }
  double& at(std::size_t ix, std::size_t iy) { return values[iy * nx + ix]; }
  double x(std::size_t ix) const { return x0 + pitch * static_cast<double>(ix); }
  double y(std::size_t iy) const { return y0 + pitch * static_cast<double>(iy); }
};

enum class RamMode { static_scene, zero_doppler_slice };

struct RamOptions {
  RamMode mode = RamMode::static_scene;
  std::size_t slow_time_index = 0;  // chirp used in static_scene mode
  std::size_t n_angle_fft = 256;
  double max_angle = 60.0 * kPi / 180.0;
  Window window = Window::hann;
  double pixel_pitch = 0.25;  // m, Cartesian projection
};

struct RAMap {
  PolarMap polar;
  CartesianMap cartesian;
};

// Range profile per channel, then an FFT across the azimuth lattice
// (zero-padded to n_angle_fft) for every range bin. Angle bin k maps to
// sin(theta) = k / (n_angle_fft * pitch); bins beyond max_angle are dropped.
// Elevation is collapsed by summing elements that share an azimuth slot.
RAMap compute_ram(const EchoCube& cube, const RamOptions& options = {}, Exec exec = Exec::parallel);

// Bilinear resampling onto a Cartesian grid spanning the polar domain's
// field of view (x = r sin(theta), y = r cos(theta)). Cells outside the
// polar domain are 0.
CartesianMap polar_to_cartesian(const PolarMap& map, double pixel_pitch, Exec exec = Exec::parallel);

// Bilinear sampling of a Cartesian map at every (r, theta) grid node.
PolarMap cartesian_to_polar(const CartesianMap& map, std::span<const double> range_axis,
                            std::span<const double> angle_axis, Exec exec = Exec::parallel);

}  // namespace mmpoint
