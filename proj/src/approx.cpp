#include <algorithm>
#include "xnorattn/approx.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "xnorattn/io.hpp"

namespace xnorattn {

double xnor_approx(double x, double y) noexcept {
  // σ(-x) evaluated directly so both symmetries hold bit-exactly
  const double agree = sigmoid(x) * sigmoid(y);
  const double disagree = sigmoid(-x) * sigmoid(-y);
  return std::min(1.0, agree + disagree);
}

std::size_t AxisRange::count() const {
  if (!(step > 0.0) || !std::isfinite(step)) {
    throw Error(ErrorKind::InvalidArgument, "grid step must be finite and > 0");
  }
  if (!std::isfinite(lo) || !std::isfinite(hi) || hi < lo) {
    throw Error(ErrorKind::InvalidArgument, "empty grid range");
  }
  // Tolerance so that (hi - lo) / step landing a hair under an integer
  // still includes hi.
  return static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
}

namespace {

double surface_value(SurfaceKind kind, double x, double y) noexcept {
  switch (kind) {
    case SurfaceKind::Sigmoid: return sigmoid(x * y);
    case SurfaceKind::Approx: return xnor_approx(x, y);
    case SurfaceKind::Error: return std::abs(sigmoid(x * y) - xnor_approx(x, y));
  }
  return 0.0;
}

}  // namespace

SurfaceGrid compute_surface(SurfaceKind kind, const AxisRange& x_range, const AxisRange& y_range,
                            Execution exec) {
  const std::size_t nx = x_range.count();
  const std::size_t ny = y_range.count();
  SurfaceGrid grid{x_range, y_range, DenseMatrix(nx, ny)};
  const bool parallel = exec == Execution::Parallel;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::size_t r = 0; r < nx; ++r) {
    const double x = x_range.at(r);
    auto row = grid.values.row(r);
    for (std::size_t c = 0; c < ny; ++c) row[c] = surface_value(kind, x, y_range.at(c));
  }
  require_finite(grid.values, "surface");
  return grid;
}

ErrorSurface error_surface(const AxisRange& x_range, const AxisRange& y_range, Execution exec) {
  ErrorSurface out;
  out.grid = compute_surface(SurfaceKind::Error, x_range, y_range, exec);
  std::size_t above = 0;
  bool first = true;
  for (std::size_t r = 0; r < out.grid.values.rows(); ++r) {
    for (std::size_t c = 0; c < out.grid.values.cols(); ++c) {
      const double e = out.grid.values(r, c);
      if (e > kErrorReportThreshold) ++above;
      if (first || e > out.max_error) {
        out.max_error = e;
        out.argmax_x = x_range.at(r);
        out.argmax_y = y_range.at(c);
        first = false;
      }
    }
  }
  out.fraction_above = static_cast<double>(above) / static_cast<double>(out.grid.values.size());
  return out;
}

void export_surface(std::ostream& out, const SurfaceGrid& grid) {
  out << "x,y,value\n";
  for (std::size_t r = 0; r < grid.values.rows(); ++r) {
    const std::string x = io::format_double(grid.x_range.at(r));
    for (std::size_t c = 0; c < grid.values.cols(); ++c) {
      out << x << ',' << io::format_double(grid.y_range.at(c)) << ','
          << io::format_double(grid.values(r, c)) << '\n';
    }
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing surface CSV");
}

void export_surface(const std::filesystem::path& path, const SurfaceGrid& grid) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string());
  export_surface(out, grid);
}

std::vector<SurfacePoint> read_surface(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "x,y,value") {
    throw Error(ErrorKind::Io, "surface CSV must start with header x,y,value");
  }
  std::vector<SurfacePoint> points;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    SurfacePoint p;
    char* end = nullptr;
    const char* s = line.c_str();
    p.x = std::strtod(s, &end);
    if (*end != ',') throw Error(ErrorKind::Io, "malformed surface line: " + line);
    p.y = std::strtod(end + 1, &end);
    if (*end != ',') throw Error(ErrorKind::Io, "malformed surface line: " + line);
    p.value = std::strtod(end + 1, &end);
    if (*end != '\0') throw Error(ErrorKind::Io, "malformed surface line: " + line);
    points.push_back(p);
  }
  return points;
}

}  // namespace xnorattn
