#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <fstream>
#include <sstream>

#include "xnorattn/approx.hpp"
#include "xnorattn/io.hpp"

using namespace xnorattn;

TEST_CASE("xnor_approx examples") {
  CHECK(xnor_approx(0.0, 0.0) == 0.5);
  CHECK(std::abs(sigmoid(0.0) - xnor_approx(0.0, 0.0)) == 0.0);
  CHECK(xnor_approx(10.0, 10.0) == doctest::Approx(0.9999092083).epsilon(1e-10));
  CHECK(std::abs(sigmoid(100.0) - xnor_approx(10.0, 10.0)) == doctest::Approx(9.0791e-5).epsilon(1e-4));
  CHECK(xnor_approx(100.0, -100.0) < 1e-40);
}

TEST_CASE("xnor_approx symmetry and range") {
  for (double x = -30.0; x <= 30.0; x += 0.7) {
    for (double y = -30.0; y <= 30.0; y += 1.3) {
      const double a = xnor_approx(x, y);
      CHECK(a == xnor_approx(y, x));
      CHECK(a == xnor_approx(-x, -y));
      CHECK(a >= 0.0);
      CHECK(a <= 1.0);
    }
  }
}

TEST_CASE("axis ranges") {
  CHECK(AxisRange{-100.0, 100.0, 1.0}.count() == 201);
  CHECK(AxisRange{-100.0, 100.0, 0.5}.count() == 401);
  CHECK(AxisRange{0.0, 0.0, 1.0}.count() == 1);
  CHECK_THROWS_AS(AxisRange({0.0, 1.0, 0.0}).count(), Error);
  CHECK_THROWS_AS(AxisRange({1.0, 0.0, 0.5}).count(), Error);
}

TEST_CASE("surface grid shapes and values") {
  const AxisRange r{-1.0, 1.0, 1.0};
  const SurfaceGrid s = compute_surface(SurfaceKind::Sigmoid, r, r);
  CHECK(s.values.rows() == 3);
  CHECK(s.values.cols() == 3);
  CHECK(s.values(2, 2) == sigmoid(1.0));
  const SurfaceGrid e = compute_surface(SurfaceKind::Error, r, r);
  CHECK(e.values(1, 1) == 0.0);
  CHECK(compute_surface(SurfaceKind::Approx, r, r).values(0, 2) == xnor_approx(-1.0, 1.0));
  CHECK(compute_surface(SurfaceKind::Error, r, r, Execution::Parallel).values == e.values);
}

TEST_CASE("error surface properties on the default grid") {
  const AxisRange r{-100.0, 100.0, 0.5};
  const ErrorSurface s = error_surface(r, r);
  const std::size_t n = r.count();
  for (std::size_t k = 0; k < n; ++k) {
    CHECK(s.grid.values(200, k) <= 1e-15);
    CHECK(s.grid.values(k, 200) <= 1e-15);
  }
  for (std::size_t a : {std::size_t{0}, n - 1}) {
    for (std::size_t b : {std::size_t{0}, n - 1}) CHECK(s.grid.values(a, b) < 1e-8);
  }
  CHECK(std::min(std::abs(s.argmax_x), std::abs(s.argmax_y)) < 2.0);
  CHECK(std::max(std::abs(s.argmax_x), std::abs(s.argmax_y)) > 10.0);
}

TEST_CASE("error surface report matches frozen fixture") {
  // Max value checked against a 40-digit evaluation: 0.37754066879814543536...
  const AxisRange r{-100.0, 100.0, 0.5};
  const ErrorSurface s = error_surface(r, r);
  CHECK(s.max_error == doctest::Approx(0.3775406687981454353609).epsilon(1e-15));

  std::ifstream in(std::string(XNORATTN_FIXTURE_DIR) + "/error_surface_report.csv");
  std::string header;
  std::string line;
  std::getline(in, header);
  std::getline(in, line);
  CHECK(header == "max_error,argmax_x,argmax_y,fraction_above_0.1");
  CHECK(line == io::format_double(s.max_error) + "," + io::format_double(s.argmax_x) + "," +
                    io::format_double(s.argmax_y) + "," + io::format_double(s.fraction_above));
}

TEST_CASE("export and read back") {
  const AxisRange small{0.0, 1.0, 1.0};
  std::stringstream ss;
  export_surface(ss, compute_surface(SurfaceKind::Sigmoid, small, small));
  const std::string text = ss.str();
  CHECK(text.rfind("x,y,value\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 5);

  const AxisRange r{-3.0, 3.0, 0.25};
  const SurfaceGrid g = compute_surface(SurfaceKind::Error, r, r);
  std::stringstream round;
  export_surface(round, g);
  const auto points = read_surface(round);
  REQUIRE(points.size() == g.values.size());
  for (std::size_t k = 0; k < points.size(); ++k) CHECK(points[k].value == g.values.data()[k]);
  CHECK(points[1].x == -3.0);
  CHECK(points[1].y == -2.75);
}

TEST_CASE("full grid at step 1 has 40401 rows") {
  const AxisRange r{-100.0, 100.0, 1.0};
  std::stringstream ss;
  export_surface(ss, compute_surface(SurfaceKind::Sigmoid, r, r));
  const std::string text = ss.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 40402);
}
