#pragma once

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mmpoint/common.hpp"

namespace mmpoint {

// Transmitter and receiver positions in half-wavelength units.
struct ArrayLayout {
  std::vector<Vec2> tx;
  std::vector<Vec2> rx;
};

// Layout document (JSON): {"tx": [[az, el], ...], "rx": [[az, el], ...]}
ArrayLayout load_layout(std::string_view text);
ArrayLayout load_layout_file(const std::string& path);
std::string serialize_layout(const ArrayLayout& layout);

// Phase centres (tx + rx) / 2, TX-major: element i * n_rx + j pairs TX i
// with RX j. A plane wave with direction sines u puts phase 2*pi*(e . u) on
// element e, so a spacing of 0.5 samples space like a half-wavelength ULA.
struct VirtualArray {
  std::vector<Vec2> elements;
  std::size_t n_tx = 0;
  std::size_t n_rx = 0;
  // Pairs of element indices that share a phase centre. Reported, never merged.
  std::vector<std::pair<std::size_t, std::size_t>> duplicates;

  std::size_t size() const { return elements.size(); }
  std::size_t index(std::size_t tx, std::size_t rx) const { return tx * n_rx + rx; }
  std::size_t tx_of(std::size_t element) const { return element / n_rx; }
};

VirtualArray build_virtual_array(const ArrayLayout& layout);

// Direction sines (u_az, u_el) = (cos(el) sin(az), sin(el)).
Vec2 direction_sines(double az, double el);

// Ambiguity function map sampled on az_grid x el_grid (radians). Stored
// row-major with azimuth fastest: values[i_el * az.size() + i_az].
struct AfmGrid {
  std::vector<double> az;
  std::vector<double> el;
  std::vector<double> values;

  double at(std::size_t i_el, std::size_t i_az) const { return values[i_el * az.size() + i_az]; }
};

// |a(steer)^H a(az, el)| / N for a single direction.
double afm_value(const VirtualArray& array, double steer_az, double steer_el, double az, double el);

AfmGrid compute_afm(const VirtualArray& array, double steer_az, double steer_el,
                    std::span<const double> az_grid, std::span<const double> el_grid,
                    Exec exec = Exec::parallel);

struct AngularResolution {
  double az_deg = 0.0;
  double el_deg = 0.0;
};

// Full -3 dB (amplitude 1/sqrt(2)) mainlobe widths through the AFM peak,
// linearly interpolated between samples. A single-row or single-column grid
// reports 0 for that axis. Throws AnalysisError if the mainlobe touches the
// grid edge.
AngularResolution angular_resolution(const AfmGrid& afm);

// Positions of each virtual element on a regular (azimuth x elevation)
// lattice. Imaging and angle estimation scatter channel samples onto this
// grid, leaving holes of a sparse layout at zero.
struct ArrayLattice {
  double az_origin = 0.0;
  double az_pitch = 0.5;
  std::size_t n_az = 1;
  double el_origin = 0.0;
  double el_pitch = 0.5;
  std::size_t n_el = 1;
  std::vector<std::size_t> az_index;  // per element
  std::vector<std::size_t> el_index;  // per element
};

// Throws UnsupportedLayoutError when coordinates along either axis do not
// sit on a common pitch within `tolerance` half-wavelengths.
ArrayLattice lattice_of(const VirtualArray& array, double tolerance = 1e-6);

struct LinkBudget {
  double pt = 1.0;            // W
  double g = 1.0;             // antenna gain
  double lambda = 0.0039;     // m
  double sigma = 1.0;         // m^2
  double k_boltzmann = 1.380649e-23;
  double b0 = 20e6;           // Hz
  double t0 = 290.0;          // K
  double f0 = 3.16;           // noise figure, linear
  double snr_min = 10.0;      // linear
  double l = 1.0;             // system loss, linear >= 1
};

// [pt g^2 lambda^2 sigma / ((4 pi)^3 k b0 t0 f0 snr_min l)]^(1/4), metres.
double max_range(const LinkBudget& budget);

std::vector<double> linspace(double first, double last, std::size_t n);

}  // namespace mmpoint
