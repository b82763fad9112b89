#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "xnorattn/matrix.hpp"

namespace xnorattn {

/// σ(x)σ(y) + (1 - σ(x))(1 - σ(y)): the two-bilinear-term stand-in for σ(xy).
double xnor_approx(double x, double y) noexcept;

/// Inclusive grid lo, lo + step, ..., up to hi.
struct AxisRange {
  double lo = -100.0;
  double hi = 100.0;
  double step = 0.5;

  std::size_t count() const;
  double at(std::size_t k) const noexcept { return lo + static_cast<double>(k) * step; }
};

enum class SurfaceKind {
  Sigmoid,  // σ(xy)
  Approx,   // xnor_approx(x, y)
  Error,    // |σ(xy) - xnor_approx(x, y)|
};

/// values(r, c) is the surface at (x_range.at(r), y_range.at(c)).
struct SurfaceGrid {
  AxisRange x_range;
  AxisRange y_range;
  DenseMatrix values;
};

struct ErrorSurface {
  SurfaceGrid grid;
  double max_error = 0.0;
  double argmax_x = 0.0;
  double argmax_y = 0.0;
  /// Share of grid points with error > 0.1.
  double fraction_above = 0.0;
};

inline constexpr double kErrorReportThreshold = 0.1;

SurfaceGrid compute_surface(SurfaceKind kind, const AxisRange& x_range, const AxisRange& y_range,
                            Execution exec = Execution::Serial);

/// Error surface plus its maximum (first in row-major order on ties).
ErrorSurface error_surface(const AxisRange& x_range, const AxisRange& y_range,
                           Execution exec = Execution::Serial);

struct SurfacePoint {
  double x = 0.0;
  double y = 0.0;
  double value = 0.0;
  friend bool operator==(const SurfacePoint&, const SurfacePoint&) = default;
};

/// CSV with header "x,y,value", one line per grid point in row-major order.
void export_surface(std::ostream& out, const SurfaceGrid& grid);
void export_surface(const std::filesystem::path& path, const SurfaceGrid& grid);
std::vector<SurfacePoint> read_surface(std::istream& in);

}  // namespace xnorattn
