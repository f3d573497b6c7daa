#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmpoint/detection.hpp"
#include "mmpoint/scene.hpp"

namespace mmpoint {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

// Axis-aligned box or convex polygon in the ground plane, metres.
class Region2D {
 public:
  static Region2D box(double x_min, double y_min, double x_max, double y_max);
  // Vertices in either winding; stored counter-clockwise. Throws DomainError
  // for non-convex or zero-area input.
  static Region2D polygon(std::vector<Point2> vertices);

  const std::vector<Point2>& vertices() const { return vertices_; }
  bool is_box() const { return is_box_; }
  double area() const;

 private:
  std::vector<Point2> vertices_;  // CCW
  bool is_box_ = false;
};

// Convex hull of at least three non-collinear points.
Region2D convex_hull(std::vector<Point2> points);

double polygon_area(std::span<const Point2> ccw);
// Convex clip of `subject` against convex `clip` (both CCW).
std::vector<Point2> clip_convex(std::span<const Point2> subject, std::span<const Point2> clip);

double iou(const Region2D& a, const Region2D& b);

// Values on a Cartesian grid shaped like CartesianMap (x fastest).
struct MaskGrid {
  double x0 = 0.0;
  double y0 = 0.0;
  double pitch = 1.0;
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::vector<double> values;

  double at(std::size_t ix, std::size_t iy) const { return values[iy * nx + ix]; }
  double& at(std::size_t ix, std::size_t iy) { return values[iy * nx + ix]; }
  double x(std::size_t ix) const { return x0 + static_cast<double>(ix) * pitch; }
  double y(std::size_t iy) const { return y0 + static_cast<double>(iy) * pitch; }
  bool same_grid(const MaskGrid& other) const;

  static MaskGrid like(const CartesianMap& map);
};

// Throws ValidationError for values outside [0, 1] or a size mismatch.
void validate(const MaskGrid& mask);

// Cells whose centre lies inside the region get 1.
MaskGrid rasterize(const Region2D& region, MaskGrid grid);

// Cell-count IoU after binarising both masks at >= 0.5. Two empty masks give 1.
double iou(const MaskGrid& a, const MaskGrid& b);

// (extracted - reference) / reference.
double positioning_error(double extracted, double reference);

struct PositioningRow {
  double a = 0.0;
  double b = 0.0;
  double error_a = 0.0;  // fraction
  double error_b = 0.0;
};

struct PositioningTable {
  std::vector<PositioningRow> rows;
  double reference_a = 0.0;
  double reference_b = 0.0;
  double mean_a = 0.0;
  double mean_b = 0.0;
};

PositioningTable positioning_table(std::span<const std::array<double, 2>> distances, double reference_a,
                                   double reference_b);

// Corner-reflector measurements (a, b) in metres with the tape-measured
// references, as recorded for the two-car positioning test.
struct PositioningFixture {
  std::vector<std::array<double, 2>> distances;
  std::array<double, 2> reference;
  std::vector<std::array<double, 2>> printed_errors_percent;
  std::array<double, 2> printed_means;
};
const PositioningFixture& corner_reflector_fixture();

inline constexpr double kProbabilityEpsilon = 1e-7;

struct LossValue {
  double value = 0.0;
  bool clamped = false;  // some probability was pulled into [eps, 1 - eps]
};

// 1 - (2 sum(p g) + smooth) / (sum(p^2) + sum(g^2) + smooth).
double dice_loss(std::span<const double> pred, std::span<const double> truth, double smooth = 0.0);
std::vector<double> dice_gradient(std::span<const double> pred, std::span<const double> truth, double smooth = 0.0);

struct FocalOptions {
  double alpha = 1.0;
  double gamma = 2.0;
  std::vector<double> class_weights;  // empty: all 1
};

// Mean over samples of -w_c alpha (1 - p)^gamma ln p, where p is the
// predicted probability of each sample's true class.
LossValue focal_loss(std::span<const double> pred, const FocalOptions& options = {},
                     std::span<const int> classes = {});
std::vector<double> focal_gradient(std::span<const double> pred, const FocalOptions& options = {},
                                   std::span<const int> classes = {});

// -sum y ln p + (1 - y) ln(1 - p), natural log.
LossValue cross_entropy(std::span<const double> y, std::span<const double> p);
std::vector<double> cross_entropy_gradient(std::span<const double> y, std::span<const double> p);

// Multiclass variant without the (1 - y) term: -sum y ln p.
LossValue softmax_cross_entropy(std::span<const double> y, std::span<const double> p);
std::vector<double> softmax_cross_entropy_gradient(std::span<const double> y, std::span<const double> p);

// dice(pred, truth) + focal_weight * focal(p_true), where p_true is pred on
// truth cells and 1 - pred elsewhere.
struct CompositeLossOptions {
  double dice_smooth = 1.0;
  double focal_weight = 1.0;
  FocalOptions focal;
};
LossValue composite_loss(std::span<const double> pred, std::span<const double> truth,
                         const CompositeLossOptions& options = {});

enum class LossId { dice, focal, cross_entropy, softmax_cross_entropy };

// Gradient of the chosen loss with respect to `pred`. `truth` is the mask
// (dice) or the label vector (both cross-entropies); focal ignores it.
std::vector<double> loss_gradients(LossId id, std::span<const double> pred, std::span<const double> truth,
                                   const FocalOptions& focal = {}, double dice_smooth = 0.0);
double loss_value(LossId id, std::span<const double> pred, std::span<const double> truth,
                  const FocalOptions& focal = {}, double dice_smooth = 0.0);

struct ConfusionMatrix {
  std::vector<Label> classes;
  std::vector<std::vector<double>> rates;  // [truth][prediction]
  std::vector<std::size_t> row_counts;
  std::vector<bool> empty_rows;
};

// Row-normalised; rows with no samples are all zero and flagged.
ConfusionMatrix confusion_matrix(std::span<const Label> truth, std::span<const Label> predicted,
                                 std::span<const Label> classes);

// Histogram of point ranges over [e_i, e_{i+1}); the last bin includes its
// upper edge.
std::vector<std::size_t> density_profile(const PointCloud& cloud, std::span<const double> range_bin_edges);

}  // namespace mmpoint
