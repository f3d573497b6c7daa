#include "mmpoint/metrics.hpp"

#include <algorithm>
#include <numeric>

namespace mmpoint {

namespace {

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

void require_same_size(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) throw DomainError(std::string(what) + ": length mismatch");
  if (a.empty()) throw DomainError(std::string(what) + ": empty input");
}

double clamp_probability(double p, double lo, double hi, bool& clamped) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("probability outside [0, 1]");
  if (p < lo) {
    clamped = true;
    return lo;
  }
  if (p > hi) {
    clamped = true;
    return hi;
  }
  return p;
}

double class_weight(const FocalOptions& o, std::span<const int> classes, std::size_t i) {
  if (o.class_weights.empty()) return 1.0;
  if (classes.size() <= i) throw DomainError("focal_loss: class weights need a class per sample");
  const int c = classes[i];
  if (c < 0 || static_cast<std::size_t>(c) >= o.class_weights.size())
    throw DomainError("focal_loss: class index outside class_weights");
  return o.class_weights[static_cast<std::size_t>(c)];
}

void check_focal(const FocalOptions& o) {
  if (!(o.alpha > 0.0)) throw DomainError("focal_loss: alpha must be > 0");
  if (!(o.gamma >= 0.0)) throw DomainError("focal_loss: gamma must be >= 0");
}

}  // namespace

Region2D Region2D::box(double x_min, double y_min, double x_max, double y_max) {
  if (!(x_max > x_min && y_max > y_min)) throw DomainError("Region2D::box: non-positive area");
  Region2D r;
  r.vertices_ = {{x_min, y_min}, {x_max, y_min}, {x_max, y_max}, {x_min, y_max}};
  r.is_box_ = true;
  return r;
}

Region2D Region2D::polygon(std::vector<Point2> v) {
  if (v.size() < 3) throw DomainError("Region2D::polygon: need at least 3 vertices");
  double signed_area = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto& a = v[i];
    const auto& b = v[(i + 1) % v.size()];
    signed_area += a.x * b.y - b.x * a.y;
  }
  if (std::abs(signed_area) <= 1e-15) throw DomainError("Region2D::polygon: zero area");
  if (signed_area < 0.0) std::reverse(v.begin(), v.end());
  for (std::size_t i = 0; i < v.size(); ++i)
    if (cross(v[i], v[(i + 1) % v.size()], v[(i + 2) % v.size()]) < -1e-12)
      throw DomainError("Region2D::polygon: vertices are not convex or not in a consistent winding");
  Region2D r;
  r.vertices_ = std::move(v);
  return r;
}

double Region2D::area() const { return polygon_area(vertices_); }

Region2D convex_hull(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) { return a.x == b.x && a.y == b.y; }),
            pts.end());
  if (pts.size() < 3) throw DomainError("convex_hull: need at least 3 distinct points");
  std::vector<Point2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return Region2D::polygon(std::move(hull));
}

double polygon_area(std::span<const Point2> ccw) {
  double s = 0.0;
  for (std::size_t i = 0; i < ccw.size(); ++i) {
    const auto& a = ccw[i];
    const auto& b = ccw[(i + 1) % ccw.size()];
    s += a.x * b.y - b.x * a.y;
  }
  return 0.5 * s;
}

std::vector<Point2> clip_convex(std::span<const Point2> subject, std::span<const Point2> clip) {
  std::vector<Point2> out(subject.begin(), subject.end());
  for (std::size_t e = 0; e < clip.size() && !out.empty(); ++e) {
    const Point2& a = clip[e];
    const Point2& b = clip[(e + 1) % clip.size()];
    std::vector<Point2> in = std::move(out);
    out.clear();
    for (std::size_t i = 0; i < in.size(); ++i) {
      const Point2& p = in[i];
      const Point2& q = in[(i + 1) % in.size()];
      const double sp = cross(a, b, p);
      const double sq = cross(a, b, q);
      if (sp >= 0.0) out.push_back(p);
      if ((sp >= 0.0) != (sq >= 0.0)) {
        const double t = sp / (sp - sq);
        out.push_back({p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)});
      }
    }
  }
  return out;
}

double iou(const Region2D& a, const Region2D& b) {
  double inter = 0.0;
  if (a.is_box() && b.is_box()) {
    const auto& va = a.vertices();
    const auto& vb = b.vertices();
    const double w = std::min(va[2].x, vb[2].x) - std::max(va[0].x, vb[0].x);
    const double h = std::min(va[2].y, vb[2].y) - std::max(va[0].y, vb[0].y);
    inter = (w > 0.0 && h > 0.0) ? w * h : 0.0;
  } else {
    // Average of both clip orders keeps iou(a, b) == iou(b, a) bit for bit.
    const double ab = polygon_area(clip_convex(a.vertices(), b.vertices()));
    const double ba = polygon_area(clip_convex(b.vertices(), a.vertices()));
    inter = std::max(0.0, 0.5 * (ab + ba));
  }
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

bool MaskGrid::same_grid(const MaskGrid& o) const {
  const double tol = 1e-9 * std::max(1.0, pitch);
  return nx == o.nx && ny == o.ny && std::abs(pitch - o.pitch) <= tol && std::abs(x0 - o.x0) <= tol &&
         std::abs(y0 - o.y0) <= tol;
}

MaskGrid MaskGrid::like(const CartesianMap& map) {
  MaskGrid m;
  m.x0 = map.x0;
  m.y0 = map.y0;
  m.pitch = map.pitch;
  m.nx = map.nx;
  m.ny = map.ny;
  m.values.assign(map.nx * map.ny, 0.0);
  return m;
}

void validate(const MaskGrid& mask) {
  if (mask.values.size() != mask.nx * mask.ny) throw ValidationError("MaskGrid: values size != nx * ny");
  if (!(mask.pitch > 0.0)) throw ValidationError("MaskGrid: pitch must be > 0");
  for (double v : mask.values)
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("MaskGrid: value outside [0, 1]");
}

MaskGrid rasterize(const Region2D& region, MaskGrid grid) {
  grid.values.assign(grid.nx * grid.ny, 0.0);
  const auto& v = region.vertices();
  for (std::size_t iy = 0; iy < grid.ny; ++iy)
    for (std::size_t ix = 0; ix < grid.nx; ++ix) {
      const Point2 c{grid.x(ix), grid.y(iy)};
      bool inside = true;
      for (std::size_t i = 0; i < v.size() && inside; ++i)
        inside = cross(v[i], v[(i + 1) % v.size()], c) >= 0.0;
      if (inside) grid.at(ix, iy) = 1.0;
    }
  return grid;
}

double iou(const MaskGrid& a, const MaskGrid& b) {
  validate(a);
  validate(b);
  if (!a.same_grid(b)) throw DomainError("iou: mask grids do not match");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const bool pa = a.values[i] >= 0.5;
    const bool pb = b.values[i] >= 0.5;
    inter += (pa && pb) ? 1 : 0;
    uni += (pa || pb) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double positioning_error(double extracted, double reference) {
  if (!(reference > 0.0)) throw DomainError("positioning_error: reference must be > 0");
  return (extracted - reference) / reference;
}

PositioningTable positioning_table(std::span<const std::array<double, 2>> distances, double reference_a,
                                   double reference_b) {
  if (distances.empty()) throw DomainError("positioning_table: no rows");
  PositioningTable t;
  t.reference_a = reference_a;
  t.reference_b = reference_b;
  double sa = 0.0;
  double sb = 0.0;
  for (const auto& d : distances) {
    t.rows.push_back({d[0], d[1], positioning_error(d[0], reference_a), positioning_error(d[1], reference_b)});
    sa += d[0];
    sb += d[1];
  }
  t.mean_a = sa / static_cast<double>(distances.size());
  t.mean_b = sb / static_cast<double>(distances.size());
  return t;
}

const PositioningFixture& corner_reflector_fixture() {
  static const PositioningFixture f{
      {{2.56, 2.325}, {2.275, 2.015}, {2.285, 1.885}, {2.22, 2.065}, {2.52, 2.38}, {2.2, 2.15},
       {2.5, 2.095}, {2.55, 2.055}, {2.31, 2.22}, {2.245, 2.315}, {2.565, 2.245}, {2.5, 2.345},
       {2.26, 2.4}, {1.975, 2.435}, {1.925, 2.425}, {2.13, 2.395}},
      {2.275, 2.235},
      {{12.53, 4.03}, {0.00, -9.84}, {0.44, -15.66}, {-2.42, -7.61}, {10.77, 6.49}, {-3.30, -3.80},
       {9.89, -6.26}, {12.09, -8.05}, {1.54, -0.67}, {-1.32, 3.58}, {12.75, 0.45}, {9.89, 4.92},
       {-0.66, 7.38}, {-13.19, 8.95}, {-15.38, 8.50}, {-6.37, 7.16}},
      {2.31375, 2.234375}};
  return f;
}

double dice_loss(std::span<const double> pred, std::span<const double> truth, double smooth) {
  require_same_size(pred, truth, "dice_loss");
  if (!(smooth >= 0.0)) throw DomainError("dice_loss: smooth must be >= 0");
  double pg = 0.0;
  double pp = 0.0;
  double gg = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    pg += pred[i] * truth[i];
    pp += pred[i] * pred[i];
    gg += truth[i] * truth[i];
  }
  const double den = pp + gg + smooth;
  if (!(den > 0.0)) throw DomainError("dice_loss: both masks empty and smooth is 0");
  return 1.0 - (2.0 * pg + smooth) / den;
}

std::vector<double> dice_gradient(std::span<const double> pred, std::span<const double> truth, double smooth) {
  require_same_size(pred, truth, "dice_gradient");
  double pg = 0.0;
  double pp = 0.0;
  double gg = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    pg += pred[i] * truth[i];
    pp += pred[i] * pred[i];
    gg += truth[i] * truth[i];
  }
  const double num = 2.0 * pg + smooth;
  const double den = pp + gg + smooth;
  if (!(den > 0.0)) throw DomainError("dice_gradient: both masks empty and smooth is 0");
  std::vector<double> g(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i)
    g[i] = -(2.0 * truth[i] * den - num * 2.0 * pred[i]) / (den * den);
  return g;
}

LossValue focal_loss(std::span<const double> pred, const FocalOptions& options, std::span<const int> classes) {
  check_focal(options);
  if (pred.empty()) throw DomainError("focal_loss: empty input");
  LossValue out;
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = clamp_probability(pred[i], kProbabilityEpsilon, 1.0, out.clamped);
    const double w = class_weight(options, classes, i);
    sum += -w * options.alpha * std::pow(1.0 - p, options.gamma) * std::log(p);
  }
  out.value = sum / static_cast<double>(pred.size());
  return out;
}

std::vector<double> focal_gradient(std::span<const double> pred, const FocalOptions& options,
                                   std::span<const int> classes) {
  check_focal(options);
  if (pred.empty()) throw DomainError("focal_gradient: empty input");
  bool clamped = false;
  const double n = static_cast<double>(pred.size());
  const double g = options.gamma;
  std::vector<double> grad(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = clamp_probability(pred[i], kProbabilityEpsilon, 1.0, clamped);
    const double w = class_weight(options, classes, i) * options.alpha / n;
    const double q = 1.0 - p;
    // d/dp [-(1-p)^g ln p] = g (1-p)^(g-1) ln p - (1-p)^g / p; the first
    // term vanishes at p = 1 for every g > 0.
    const double t1 = (g > 0.0 && q > 0.0) ? g * std::pow(q, g - 1.0) * std::log(p) : 0.0;
    const double t2 = std::pow(q, g) / p;
    grad[i] = w * (t1 - t2);
  }
  return grad;
}

LossValue cross_entropy(std::span<const double> y, std::span<const double> p) {
  require_same_size(y, p, "cross_entropy");
  LossValue out;
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 0.0 && y[i] != 1.0) throw DomainError("cross_entropy: labels must be 0 or 1");
    const double q = clamp_probability(p[i], kProbabilityEpsilon, 1.0 - kProbabilityEpsilon, out.clamped);
    sum += y[i] * std::log(q) + (1.0 - y[i]) * std::log(1.0 - q);
  }
  out.value = -sum;
  return out;
}

std::vector<double> cross_entropy_gradient(std::span<const double> y, std::span<const double> p) {
  require_same_size(y, p, "cross_entropy_gradient");
  bool clamped = false;
  std::vector<double> g(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double q = clamp_probability(p[i], kProbabilityEpsilon, 1.0 - kProbabilityEpsilon, clamped);
    g[i] = -y[i] / q + (1.0 - y[i]) / (1.0 - q);
  }
  return g;
}

LossValue softmax_cross_entropy(std::span<const double> y, std::span<const double> p) {
  require_same_size(y, p, "softmax_cross_entropy");
  LossValue out;
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(y[i] >= 0.0 && y[i] <= 1.0)) throw DomainError("softmax_cross_entropy: targets must be in [0, 1]");
    const double q = clamp_probability(p[i], kProbabilityEpsilon, 1.0, out.clamped);
    sum += y[i] * std::log(q);
  }
  out.value = -sum;
  return out;
}

std::vector<double> softmax_cross_entropy_gradient(std::span<const double> y, std::span<const double> p) {
  require_same_size(y, p, "softmax_cross_entropy_gradient");
  bool clamped = false;
  std::vector<double> g(y.size());
  for (std::size_t i = 0; i < y.size(); ++i)
    g[i] = -y[i] / clamp_probability(p[i], kProbabilityEpsilon, 1.0, clamped);
  return g;
}

LossValue composite_loss(std::span<const double> pred, std::span<const double> truth,
                         const CompositeLossOptions& options) {
  require_same_size(pred, truth, "composite_loss");
  std::vector<double> p_true(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) p_true[i] = truth[i] >= 0.5 ? pred[i] : 1.0 - pred[i];
  const LossValue focal = focal_loss(p_true, options.focal);
  LossValue out;
  out.value = dice_loss(pred, truth, options.dice_smooth) + options.focal_weight * focal.value;
  out.clamped = focal.clamped;
  return out;
}

std::vector<double> loss_gradients(LossId id, std::span<const double> pred, std::span<const double> truth,
                                   const FocalOptions& focal, double dice_smooth) {
  switch (id) {
    case LossId::dice:
      return dice_gradient(pred, truth, dice_smooth);
    case LossId::focal:
      return focal_gradient(pred, focal);
    case LossId::cross_entropy:
      return cross_entropy_gradient(truth, pred);
    case LossId::softmax_cross_entropy:
      return softmax_cross_entropy_gradient(truth, pred);
  }
  throw DomainError("loss_gradients: unknown loss");
}

double loss_value(LossId id, std::span<const double> pred, std::span<const double> truth,
                  const FocalOptions& focal, double dice_smooth) {
  switch (id) {
    case LossId::dice:
      return dice_loss(pred, truth, dice_smooth);
    case LossId::focal:
      return focal_loss(pred, focal).value;
    case LossId::cross_entropy:
      return cross_entropy(truth, pred).value;
    case LossId::softmax_cross_entropy:
      return softmax_cross_entropy(truth, pred).value;
  }
  throw DomainError("loss_value: unknown loss");
}

ConfusionMatrix confusion_matrix(std::span<const Label> truth, std::span<const Label> predicted,
                                 std::span<const Label> classes) {
  if (truth.size() != predicted.size()) throw DomainError("confusion_matrix: label lists differ in length");
  if (classes.empty()) throw DomainError("confusion_matrix: no classes");
  auto index_of = [&](Label l) {
    auto it = std::find(classes.begin(), classes.end(), l);
    if (it == classes.end()) throw DomainError("confusion_matrix: unknown label " + std::string(to_string(l)));
    return static_cast<std::size_t>(it - classes.begin());
  };
  const std::size_t k = classes.size();
  ConfusionMatrix m;
  m.classes.assign(classes.begin(), classes.end());
  m.rates.assign(k, std::vector<double>(k, 0.0));
  m.row_counts.assign(k, 0);
  m.empty_rows.assign(k, false);
  std::vector<std::vector<std::size_t>> counts(k, std::vector<std::size_t>(k, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const std::size_t t = index_of(truth[i]);
    ++counts[t][index_of(predicted[i])];
    ++m.row_counts[t];
  }
  for (std::size_t r = 0; r < k; ++r) {
    m.empty_rows[r] = m.row_counts[r] == 0;
    if (m.empty_rows[r]) continue;
    for (std::size_t c = 0; c < k; ++c)
      m.rates[r][c] = static_cast<double>(counts[r][c]) / static_cast<double>(m.row_counts[r]);
  }
  return m;
}

std::vector<std::size_t> density_profile(const PointCloud& cloud, std::span<const double> edges) {
  if (edges.size() < 2) throw DomainError("density_profile: need at least two edges");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1])) throw DomainError("density_profile: edges must increase");
  std::vector<std::size_t> counts(edges.size() - 1, 0);
  for (const auto& p : cloud.points) {
    if (p.range < edges.front() || p.range > edges.back()) continue;
    auto it = std::upper_bound(edges.begin(), edges.end(), p.range);
    auto bin = static_cast<std::size_t>(it - edges.begin());
    bin = bin == 0 ? 0 : std::min(bin - 1, counts.size() - 1);
    ++counts[bin];
  }
  return counts;
}

}  // namespace mmpoint
