#pragma once

#include <cstdint>
#include <vector>

#include "mmpoint/array.hpp"
#include "mmpoint/common.hpp"
#include "mmpoint/scene.hpp"

namespace mmpoint {

// FMCW chirp and frame timing. Sampling is complex (IQ), so beat
// frequencies in [0, fs) are unambiguous and the range axis has n_samples
// bins. Under TDM each transmitter fires once per repetition interval
// ta / n_chirps, in slot order TX0, TX1, ...
struct RadarParams {
  double fc = 77e9;        // Hz
  double kr = 30e12;       // chirp slope, Hz/s
  double tp = 25.6e-6;     // chirp duration, s
  double fs = 20e6;        // fast-time sample rate, Hz
  int n_samples = 512;     // per chirp
  int n_chirps = 64;       // per TX per frame
  double ta = 64 * 40e-6;  // coherent processing time, s
  bool residual_video_phase = false;

  double lambda() const { return kSpeedOfLight / fc; }
  double repetition_interval() const { return ta / n_chirps; }
  // Width of one range bin, c / (2 kr tp).
  double range_resolution() const { return kSpeedOfLight * fs / (2.0 * kr * n_samples); }
  double max_unambiguous_range() const { return kSpeedOfLight * fs / (2.0 * kr); }
  // Width of one Doppler bin in m/s, lambda / (2 ta).
  double velocity_resolution() const { return lambda() / (2.0 * ta); }
};

// Throws ValidationError on non-positive fields, n_samples != round(fs tp),
// or a TDM slot shorter than the chirp.
void validate(const RadarParams& params, std::size_t n_tx = 1);

// Complex baseband samples indexed [virtual channel][chirp][fast-time sample].
struct EchoCube {
  std::vector<cplx> samples;
  std::size_t n_channels = 0;
  std::size_t n_chirps = 0;
  std::size_t n_samples = 0;
  RadarParams params;
  VirtualArray array;
  ArrayLayout layout;
  int frame_index = 0;
  std::uint64_t noise_seed = 0;

  std::size_t index(std::size_t ch, std::size_t chirp, std::size_t s) const {
    return (ch * n_chirps + chirp) * n_samples + s;
  }
  cplx& at(std::size_t ch, std::size_t chirp, std::size_t s) { return samples[index(ch, chirp, s)]; }
  const cplx& at(std::size_t ch, std::size_t chirp, std::size_t s) const { return samples[index(ch, chirp, s)]; }
  double energy() const;
};

struct EchoOptions {
  double noise_power = 0.0;  // E|n|^2 per sample, W
  std::uint64_t seed = 0;
  int frame_index = 0;
};

// Sum of point-scatterer returns per virtual channel (m, n):
//   amp * exp(-j 2 pi R / lambda) * exp(-j 2 pi kr (R / c) t)
// with R = |p - tx_m| + |p - rx_n| evaluated at each TX's chirp start time
// and amp = sqrt(rcs) / (R/2)^2. Positions in `states` are at frame start.
// The residual video phase exp(j pi kr (R/c)^2) is applied only when
// params.residual_video_phase is set. Noise substreams are keyed by
// (seed, frame_index, channel), so serial and parallel runs agree bit for bit.
EchoCube synthesize_echo(const std::vector<Scatterer>& states, const RadarParams& params,
                         const ArrayLayout& layout, const EchoOptions& options = {},
                         Exec exec = Exec::parallel);

// Physical element position (m) for a layout coordinate in half-wavelengths:
// azimuth along x, elevation along z.
Vec3 element_position(const Vec2& coord, double lambda);

double doppler_frequency(double v_radial, double lambda);

// Raw TDM frame as the receivers see it: [rx][global chirp][sample], where
// global chirp g carries TX g mod n_tx.
struct TdmFrame {
  std::vector<cplx> samples;
  std::size_t n_rx = 0;
  std::size_t n_tx = 0;
  std::size_t n_global_chirps = 0;
  std::size_t n_samples = 0;

  std::size_t index(std::size_t rx, std::size_t g, std::size_t s) const {
    return (rx * n_global_chirps + g) * n_samples + s;
  }
};

TdmFrame tdm_interleave(const EchoCube& cube);
// Samples of virtual channel (tx, rx) across all global chirps; zero on
// slots owned by other transmitters.
std::vector<cplx> tdm_channel_view(const TdmFrame& frame, std::size_t tx, std::size_t rx);
// Inverse of tdm_interleave: [channel][chirp][sample] sample buffer.
std::vector<cplx> tdm_demultiplex(const TdmFrame& frame);

}  // namespace mmpoint
