#include "mmpoint/echo.hpp"

#include <random>

namespace mmpoint {

namespace {

// Keep the phase argument small before sin/cos: returns 2*pi*frac(cycles).
double wrapped_phase(double cycles) { return 2.0 * kPi * (cycles - std::floor(cycles)); }

double bistatic_range(const Vec3& p, const Vec3& tx, const Vec3& rx) { return (p - tx).norm() + (p - rx).norm(); }

std::mt19937_64 channel_rng(std::uint64_t seed, int frame, std::size_t channel) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(frame), static_cast<std::uint32_t>(channel)};
  return std::mt19937_64(seq);
}

}  // namespace

void validate(const RadarParams& p, std::size_t n_tx) {
  for (double v : {p.fc, p.kr, p.tp, p.fs, p.ta})
    if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("radar params: fc, kr, tp, fs, ta must be > 0");
  if (p.n_samples < 1 || p.n_chirps < 1) throw ValidationError("radar params: n_samples and n_chirps must be >= 1");
  if (std::lround(p.fs * p.tp) != p.n_samples)
    throw ValidationError("radar params: n_samples must equal round(fs * tp)");
  if (n_tx == 0) throw ValidationError("radar params: need at least one transmitter");
  const double slot = p.repetition_interval() / static_cast<double>(n_tx);
  if (slot < p.tp * (1.0 - 1e-9))
    throw ValidationError("radar params: TDM slot (ta / n_chirps / n_tx) shorter than chirp duration tp");
}

double EchoCube::energy() const {
  double e = 0.0;
  for (const auto& s : samples) e += std::norm(s);
  return e;
}

Vec3 element_position(const Vec2& coord, double lambda) { return {coord.az * lambda / 2.0, 0.0, coord.el * lambda / 2.0}; }

double doppler_frequency(double v_radial, double lambda) { return 2.0 * v_radial / lambda; }

EchoCube synthesize_echo(const std::vector<Scatterer>& states, const RadarParams& params,
                         const ArrayLayout& layout, const EchoOptions& options, Exec exec) {
  EchoCube cube;
  cube.array = build_virtual_array(layout);
  cube.layout = layout;
  validate(params, cube.array.n_tx);
  if (options.noise_power < 0.0) throw DomainError("synthesize_echo: noise_power must be >= 0");

  cube.params = params;
  cube.frame_index = options.frame_index;
  cube.noise_seed = options.seed;
  cube.n_channels = cube.array.size();
  cube.n_chirps = static_cast<std::size_t>(params.n_chirps);
  cube.n_samples = static_cast<std::size_t>(params.n_samples);
  cube.samples.assign(cube.n_channels * cube.n_chirps * cube.n_samples, cplx{});

  const double lambda = params.lambda();
  const std::size_t n_tx = cube.array.n_tx;
  const std::size_t n_rx = cube.array.n_rx;
  std::vector<Vec3> tx_pos(n_tx);
  std::vector<Vec3> rx_pos(n_rx);
  for (std::size_t m = 0; m < n_tx; ++m) tx_pos[m] = element_position(layout.tx[m], lambda);
  for (std::size_t n = 0; n < n_rx; ++n) rx_pos[n] = element_position(layout.rx[n], lambda);

  const double t_rep = params.repetition_interval();
  const double t_slot = t_rep / static_cast<double>(n_tx);
  const double t_last = t_rep * (params.n_chirps - 1) + t_slot * static_cast<double>(n_tx - 1);

  // Range is convex in time under constant velocity, so checking the first
  // and last chirp bounds every beat frequency in the frame.
  const double max_beat = params.fs;
  for (std::size_t q = 0; q < states.size(); ++q) {
    const auto& s = states[q];
    for (double t : {0.0, t_last}) {
      const Vec3 p = s.position + s.velocity * t;
      if (p.norm() <= 0.0)
        throw DomainError("synthesize_echo: scatterer " + std::to_string(q) + " at range 0");
      for (const auto& tx : tx_pos)
        for (const auto& rx : rx_pos) {
          const double fb = params.kr * bistatic_range(p, tx, rx) / kSpeedOfLight;
          if (fb >= max_beat)
            throw DomainError("synthesize_echo: scatterer " + std::to_string(q) + " beat frequency " +
                              std::to_string(fb) + " Hz exceeds sample rate (range beyond " +
                              std::to_string(params.max_unambiguous_range()) + " m)");
        }
    }
  }

  const std::size_t ns = cube.n_samples;
  auto channel = [&](std::size_t ch) {
    const std::size_t m = ch / n_rx;
    const std::size_t n = ch % n_rx;
    for (std::size_t a = 0; a < cube.n_chirps; ++a) {
      const double t = t_rep * static_cast<double>(a) + t_slot * static_cast<double>(m);
      cplx* out = &cube.samples[cube.index(ch, a, 0)];
      for (const auto& s : states) {
        if (s.rcs == 0.0) continue;
        const Vec3 p = s.position + s.velocity * t;
        const double range = bistatic_range(p, tx_pos[m], rx_pos[n]);
        const double half = range / 2.0;
        const double amp = std::sqrt(s.rcs) / (half * half);
        const double delay = range / kSpeedOfLight;
        double phase0 = -wrapped_phase(range / lambda);
        if (params.residual_video_phase) phase0 += wrapped_phase(0.5 * params.kr * delay * delay);
        const double cycles_per_sample = params.kr * delay / params.fs;
        const cplx step = std::polar(1.0, -wrapped_phase(cycles_per_sample));
        // Phasor at sample i0 + k is start(i0) * step^k, with start exact
        // every 32 samples.
        double pow_r[32];
        double pow_i[32];
        pow_r[0] = 1.0;
        pow_i[0] = 0.0;
        for (std::size_t k = 1; k < 32; ++k) {
          pow_r[k] = pow_r[k - 1] * step.real() - pow_i[k - 1] * step.imag();
          pow_i[k] = pow_r[k - 1] * step.imag() + pow_i[k - 1] * step.real();
        }
        for (std::size_t i0 = 0; i0 < ns; i0 += 32) {
          const double cyc = cycles_per_sample * static_cast<double>(i0);
          const cplx start = std::polar(amp, phase0 - wrapped_phase(cyc));
          const double sr = start.real();
          const double si = start.imag();
          const std::size_t len = std::min<std::size_t>(32, ns - i0);
          auto* dst = reinterpret_cast<double*>(out + i0);
          for (std::size_t k = 0; k < len; ++k) {
            dst[2 * k] += sr * pow_r[k] - si * pow_i[k];
            dst[2 * k + 1] += sr * pow_i[k] + si * pow_r[k];
          }
        }
      }
    }
    if (options.noise_power > 0.0) {
      auto rng = channel_rng(options.seed, options.frame_index, ch);
      std::normal_distribution<double> gauss(0.0, std::sqrt(options.noise_power / 2.0));
      cplx* out = &cube.samples[cube.index(ch, 0, 0)];
      for (std::size_t k = 0; k < cube.n_chirps * ns; ++k) {
        const double re = gauss(rng);
        const double im = gauss(rng);
        out[k] += cplx(re, im);
      }
    }
  };

  const auto n_ch = static_cast<std::ptrdiff_t>(cube.n_channels);
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t ch = 0; ch < n_ch; ++ch) channel(static_cast<std::size_t>(ch));
  } else {
    for (std::ptrdiff_t ch = 0; ch < n_ch; ++ch) channel(static_cast<std::size_t>(ch));
  }
  return cube;
}

TdmFrame tdm_interleave(const EchoCube& cube) {
  TdmFrame f;
  f.n_tx = cube.array.n_tx;
  f.n_rx = cube.array.n_rx;
  f.n_samples = cube.n_samples;
  f.n_global_chirps = cube.n_chirps * f.n_tx;
  f.samples.assign(f.n_rx * f.n_global_chirps * f.n_samples, cplx{});
  for (std::size_t m = 0; m < f.n_tx; ++m)
    for (std::size_t n = 0; n < f.n_rx; ++n)
      for (std::size_t a = 0; a < cube.n_chirps; ++a) {
        const std::size_t g = a * f.n_tx + m;
        const cplx* src = &cube.samples[cube.index(cube.array.index(m, n), a, 0)];
        std::copy(src, src + f.n_samples, &f.samples[f.index(n, g, 0)]);
      }
  return f;
}

std::vector<cplx> tdm_channel_view(const TdmFrame& frame, std::size_t tx, std::size_t rx) {
  std::vector<cplx> out(frame.n_global_chirps * frame.n_samples);
  for (std::size_t g = 0; g < frame.n_global_chirps; ++g) {
    if (g % frame.n_tx != tx) continue;
    const cplx* src = &frame.samples[frame.index(rx, g, 0)];
    std::copy(src, src + frame.n_samples, &out[g * frame.n_samples]);
  }
  return out;
}

std::vector<cplx> tdm_demultiplex(const TdmFrame& frame) {
  const std::size_t n_chirps = frame.n_global_chirps / frame.n_tx;
  std::vector<cplx> out(frame.n_tx * frame.n_rx * n_chirps * frame.n_samples);
  for (std::size_t m = 0; m < frame.n_tx; ++m)
    for (std::size_t n = 0; n < frame.n_rx; ++n)
      for (std::size_t a = 0; a < n_chirps; ++a) {
        const std::size_t ch = m * frame.n_rx + n;
        const cplx* src = &frame.samples[frame.index(n, a * frame.n_tx + m, 0)];
        std::copy(src, src + frame.n_samples, &out[(ch * n_chirps + a) * frame.n_samples]);
      }
  return out;
}

}  // namespace mmpoint
