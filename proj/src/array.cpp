#include "mmpoint/array.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace mmpoint {

using nlohmann::json;

namespace {

std::vector<Vec2> parse_positions(const json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end()) throw SchemaError(std::string("layout: missing key '") + key + "'");
  if (!it->is_array()) throw SchemaError(std::string("layout: key '") + key + "' must be an array");
  std::vector<Vec2> out;
  for (std::size_t i = 0; i < it->size(); ++i) {
    const json& p = (*it)[i];
    const std::string where = std::string(key) + "[" + std::to_string(i) + "]";
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
      throw SchemaError("layout: key '" + where + "' must be an array of 2 numbers");
    Vec2 v{p[0].get<double>(), p[1].get<double>()};
    if (!std::isfinite(v.az) || !std::isfinite(v.el))
      throw ValidationError("layout: " + where + " must be finite");
    out.push_back(v);
  }
  return out;
}

double steering_phase(const Vec2& e, const Vec2& du) { return 2.0 * kPi * (e.az * du.az + e.el * du.el); }

double correlation(const std::vector<Vec2>& elements, const Vec2& du) {
  double re = 0.0;
  double im = 0.0;
  for (const auto& e : elements) {
    const double ph = steering_phase(e, du);
    re += std::cos(ph);
    im += std::sin(ph);
  }
  return std::hypot(re, im) / static_cast<double>(elements.size());
}

struct AxisLattice {
  double origin = 0.0;
  double pitch = 0.5;
  std::size_t count = 1;
  std::vector<std::size_t> index;
};

AxisLattice fit_axis(const std::vector<double>& coords, double tol, const char* axis) {
  AxisLattice out;
  std::vector<double> uniq(coords);
  std::sort(uniq.begin(), uniq.end());
  std::vector<double> merged;
  for (double c : uniq)
    if (merged.empty() || c - merged.back() > tol) merged.push_back(c);

  out.origin = merged.front();
  if (merged.size() > 1) {
    double pitch = merged[1] - merged[0];
    for (std::size_t i = 2; i < merged.size(); ++i) pitch = std::min(pitch, merged[i] - merged[i - 1]);
    out.pitch = pitch;
    const double span = merged.back() - merged.front();
    const double steps = std::round(span / pitch);
    if (steps > 8192.0)
      throw UnsupportedLayoutError(std::string("array ") + axis + " axis: lattice too fine");
    out.count = static_cast<std::size_t>(steps) + 1;
  }
  out.index.reserve(coords.size());
  for (double c : coords) {
    const double k = std::round((c - out.origin) / out.pitch);
    if (std::abs(out.origin + k * out.pitch - c) > tol)
      throw UnsupportedLayoutError(std::string("array ") + axis +
                                   " axis: element spacing is not a multiple of " +
                                   std::to_string(out.pitch) + " half-wavelengths");
    out.index.push_back(static_cast<std::size_t>(k));
  }
  return out;
}

}  // namespace

ArrayLayout load_layout(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("layout document is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw SchemaError("layout document must be an object");
  return {parse_positions(doc, "tx"), parse_positions(doc, "rx")};
}

ArrayLayout load_layout_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open layout file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return load_layout(buf.str());
}

std::string serialize_layout(const ArrayLayout& layout) {
  auto dump = [](const std::vector<Vec2>& v) {
    json a = json::array();
    for (const auto& p : v) a.push_back({p.az, p.el});
    return a;
  };
  return json{{"tx", dump(layout.tx)}, {"rx", dump(layout.rx)}}.dump();
}

VirtualArray build_virtual_array(const ArrayLayout& layout) {
  if (layout.tx.empty() || layout.rx.empty())
    throw DomainError("build_virtual_array: need at least one TX and one RX");
  VirtualArray va;
  va.n_tx = layout.tx.size();
  va.n_rx = layout.rx.size();
  va.elements.reserve(va.n_tx * va.n_rx);
  for (const auto& t : layout.tx)
    for (const auto& r : layout.rx) va.elements.push_back({(t.az + r.az) / 2.0, (t.el + r.el) / 2.0});

  std::map<std::pair<double, double>, std::size_t> first_seen;
  for (std::size_t i = 0; i < va.elements.size(); ++i) {
    const auto key = std::make_pair(va.elements[i].az, va.elements[i].el);
    auto [it, inserted] = first_seen.emplace(key, i);
    if (!inserted) va.duplicates.emplace_back(it->second, i);
  }
  return va;
}

Vec2 direction_sines(double az, double el) { return {std::cos(el) * std::sin(az), std::sin(el)}; }

double afm_value(const VirtualArray& array, double steer_az, double steer_el, double az, double el) {
  const Vec2 s = direction_sines(steer_az, steer_el);
  const Vec2 u = direction_sines(az, el);
  return correlation(array.elements, {u.az - s.az, u.el - s.el});
}

AfmGrid compute_afm(const VirtualArray& array, double steer_az, double steer_el,
                    std::span<const double> az_grid, std::span<const double> el_grid, Exec exec) {
  if (az_grid.empty() || el_grid.empty()) throw DomainError("compute_afm: empty grid");
  auto monotone = [](std::span<const double> g) {
    for (std::size_t i = 1; i < g.size(); ++i)
      if (!(g[i] > g[i - 1])) return false;
    return true;
  };
  if (!monotone(az_grid) || !monotone(el_grid)) throw DomainError("compute_afm: grids must be increasing");

  AfmGrid out;
  out.az.assign(az_grid.begin(), az_grid.end());
  out.el.assign(el_grid.begin(), el_grid.end());
  out.values.resize(out.az.size() * out.el.size());

  const Vec2 s = direction_sines(steer_az, steer_el);
  const std::size_t n_az = out.az.size();
  const auto total = static_cast<std::ptrdiff_t>(out.values.size());
  auto cell = [&](std::ptrdiff_t idx) {
    const auto i_el = static_cast<std::size_t>(idx) / n_az;
    const auto i_az = static_cast<std::size_t>(idx) % n_az;
    const Vec2 u = direction_sines(out.az[i_az], out.el[i_el]);
    out.values[static_cast<std::size_t>(idx)] = correlation(array.elements, {u.az - s.az, u.el - s.el});
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t idx = 0; idx < total; ++idx) cell(idx);
  } else {
    for (std::ptrdiff_t idx = 0; idx < total; ++idx) cell(idx);
  }
  return out;
}

namespace {

// Width of the run of samples >= threshold containing `peak`, with linear
// interpolation at both crossings.
double half_power_width(std::span<const double> axis, const std::vector<double>& values, std::size_t peak,
                        const char* name) {
  if (axis.size() == 1) return 0.0;
  const double thr = 1.0 / std::sqrt(2.0);
  auto cross = [&](std::size_t inside, std::size_t outside) {
    const double v0 = values[inside];
    const double v1 = values[outside];
    return axis[inside] + (thr - v0) * (axis[outside] - axis[inside]) / (v1 - v0);
  };
  std::size_t hi = peak;
  while (hi + 1 < values.size() && values[hi + 1] >= thr) ++hi;
  std::size_t lo = peak;
  while (lo > 0 && values[lo - 1] >= thr) --lo;
  if (hi + 1 == values.size() || lo == 0)
    throw AnalysisError(std::string("angular_resolution: ") + name + " mainlobe clipped by grid edge");
  return cross(hi, hi + 1) - cross(lo, lo - 1);
}

}  // namespace

AngularResolution angular_resolution(const AfmGrid& afm) {
  if (afm.values.empty()) throw AnalysisError("angular_resolution: empty AFM");
  const auto best = std::max_element(afm.values.begin(), afm.values.end());
  const auto idx = static_cast<std::size_t>(best - afm.values.begin());
  const std::size_t n_az = afm.az.size();
  const std::size_t i_el = idx / n_az;
  const std::size_t i_az = idx % n_az;

  std::vector<double> row(afm.values.begin() + static_cast<std::ptrdiff_t>(i_el * n_az),
                          afm.values.begin() + static_cast<std::ptrdiff_t>((i_el + 1) * n_az));
  std::vector<double> col(afm.el.size());
  for (std::size_t k = 0; k < afm.el.size(); ++k) col[k] = afm.at(k, i_az);

  AngularResolution res;
  res.az_deg = rad2deg(half_power_width(afm.az, row, i_az, "azimuth"));
  res.el_deg = rad2deg(half_power_width(afm.el, col, i_el, "elevation"));
  return res;
}

ArrayLattice lattice_of(const VirtualArray& array, double tolerance) {
  if (array.elements.empty()) throw UnsupportedLayoutError("lattice_of: empty array");
  std::vector<double> az;
  std::vector<double> el;
  for (const auto& e : array.elements) {
    az.push_back(e.az);
    el.push_back(e.el);
  }
  const AxisLattice a = fit_axis(az, tolerance, "azimuth");
  const AxisLattice b = fit_axis(el, tolerance, "elevation");
  ArrayLattice out;
  out.az_origin = a.origin;
  out.az_pitch = a.pitch;
  out.n_az = a.count;
  out.az_index = a.index;
  out.el_origin = b.origin;
  out.el_pitch = b.pitch;
  out.n_el = b.count;
  out.el_index = b.index;
  return out;
}

double max_range(const LinkBudget& b) {
  for (double v : {b.pt, b.g, b.lambda, b.sigma, b.k_boltzmann, b.b0, b.t0, b.f0, b.snr_min, b.l})
    if (!(v > 0.0)) throw DomainError("max_range: all link-budget fields must be > 0");
  const double four_pi = 4.0 * kPi;
  const double num = b.pt * b.g * b.g * b.lambda * b.lambda * b.sigma;
  const double den = four_pi * four_pi * four_pi * b.k_boltzmann * b.b0 * b.t0 * b.f0 * b.snr_min * b.l;
  return std::pow(num / den, 0.25);
}

std::vector<double> linspace(double first, double last, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = first;
    return out;
  }
  const double step = (last - first) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) out[i] = first + step * static_cast<double>(i);
  out.back() = last;
  return out;
}

}  // namespace mmpoint
