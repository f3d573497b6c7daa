#pragma once

#include <span>
#include <vector>

#include "mmpoint/imaging.hpp"

namespace mmpoint {

struct CfarConfig {
  int guard_range = 2;
  int guard_doppler = 2;
  int train_range = 8;
  int train_doppler = 4;
  double pfa = 1e-4;
  // Absolute power floor on top of the adaptive threshold; 0 disables it.
  double min_abs_power = 0.0;
};

struct Detection {
  std::size_t range_bin = 0;
  std::size_t doppler_bin = 0;
  double power = 0.0;
};

// Threshold multiplier on the mean training power for square-law
// exponential noise: n * (pfa^(-1/n) - 1).
double cfar_alpha(std::size_t n_train, double pfa);

// Number of training cells in the 2D window after removing the guard box.
std::size_t cfar_training_cells(const CfarConfig& config);

// 2D cell-averaging CFAR on a power map laid out [range][doppler]. A cell
// is reported when it exceeds alpha * mean(training cells), exceeds
// min_abs_power, and is a 3x3 local maximum. The Doppler axis wraps; range
// cells whose window would leave the map are not tested. Plateaus report the
// first cell in scan order.
std::vector<Detection> cfar_detect(std::span<const double> power, std::size_t n_range, std::size_t n_doppler,
                                   const CfarConfig& config, Exec exec = Exec::parallel);

struct AngleEstimate {
  double azimuth = 0.0;    // rad
  double elevation = 0.0;  // rad
  double magnitude = 0.0;  // beam-space magnitude at the peak
};

// Zero-padded 2D FFT over the array lattice (azimuth x elevation, each
// padded by `zoom`). The peak bin gives direction sines
// u = k / (n_fft * pitch); angles are principal values in the unambiguous
// sector. Throws UnsupportedLayoutError for off-lattice arrays.
AngleEstimate estimate_angles(std::span<const cplx> snapshot, const VirtualArray& array, int zoom = 8);

// All beam-space local maxima whose magnitude is at least rel_threshold of
// the strongest, strongest first, at most max_peaks of them. Only bins in
// the visible region u_az^2 + u_el^2 <= 1 count; when none qualifies the
// global maximum is returned.
std::vector<AngleEstimate> estimate_angle_peaks(std::span<const cplx> snapshot, const VirtualArray& array,
                                                int zoom, std::size_t max_peaks, double rel_threshold);

struct RadarPoint {
  double range = 0.0;      // m
  double azimuth = 0.0;    // rad
  double elevation = 0.0;  // rad
  double v_radial = 0.0;   // m/s, range rate
  double intensity = 0.0;  // linear magnitude
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  int frame_index = 0;
};

// Fills x, y, z from (range, azimuth, elevation).
RadarPoint make_point(double range, double azimuth, double elevation, double v_radial, double intensity,
                      int frame_index);

struct PointCloud {
  std::vector<RadarPoint> points;
  int frame_index = 0;
  RadarParams params;
};

struct PointCloudConfig {
  CfarConfig cfar;
  Window window = Window::hann;
  int zoom = 8;
  std::size_t max_angle_peaks = 4;
  double angle_peak_rel = 0.6;
  // Rotate each TX's channels by the TDM slot delay at the detected
  // Doppler before angle estimation.
  bool compensate_tdm = false;
};

// compute_rdm -> channel power sum -> cfar_detect -> angle peaks per detection.
PointCloud generate_point_cloud(const EchoCube& cube, const PointCloudConfig& config = {},
                                Exec exec = Exec::parallel);

}  // namespace mmpoint
