#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace mmpoint {

using cplx = std::complex<double>;

inline constexpr double kSpeedOfLight = 2.99792458e8;
inline constexpr double kPi = 3.14159265358979323846;

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(const Vec3& a, double s) { return {a.x * s, a.y * s, a.z * s}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;

  double norm() const { return std::sqrt(x * x + y * y + z * z); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

// Array-plane coordinate: [0] azimuth axis, [1] elevation axis.
struct Vec2 {
  double az = 0.0;
  double el = 0.0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

// Kernels that have a parallel implementation also keep the serial one so
// tests can check the two produce bit-identical output.
enum class Exec { serial, parallel };

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad argument or precondition violation in a numeric routine.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed structured-text input; message names the offending key.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Well-formed input whose values break a type invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Array geometry the imaging/angle code cannot handle.
class UnsupportedLayoutError : public Error {
 public:
  using Error::Error;
};

// Post-processing of a computed map failed (e.g. mainlobe not inside the grid).
class AnalysisError : public Error {
 public:
  using Error::Error;
};

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

}  // namespace mmpoint
