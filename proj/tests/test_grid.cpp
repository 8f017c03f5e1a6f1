#include <catch2/catch_amalgamated.hpp>

#include "loctime/grid.hpp"

using namespace loctime;

TEST_CASE("mesh validation", "[grid]") {
  REQUIRE_NOTHROW(GridFunction::uniform(-1.0, 1.0, 1e-3));
  REQUIRE_THROWS_AS(GridFunction::uniform(1.0, -1.0, 1e-3), ValidationError);
  REQUIRE_THROWS_AS(GridFunction::uniform(-1.0, 1.0, 0.0), ValidationError);
  // step does not divide the interval
  REQUIRE_THROWS_AS(GridFunction::uniform(-1.0, 1.0, 0.3), ValidationError);
  // interval must contain 0 as a node
  REQUIRE_THROWS_AS(GridFunction::uniform(0.5, 1.5, 0.1), ValidationError);
  REQUIRE_THROWS_AS(GridFunction::uniform(-0.05, 1.0, 0.1), ValidationError);

  auto f = GridFunction::uniform(-1.0, 2.0, 1e-2);
  REQUIRE(f.size() == 301);
  REQUIRE(f.zero_node() == 100);
  REQUIRE(std::abs(f.x(f.zero_node())) < 1e-13);
}

TEST_CASE("cumulative trapezoid integrals", "[grid]") {
  auto f = GridFunction::sample(-1.0, 1.0, 1e-3, [](double x) { return x; });
  auto F = cumtrapz_forward(f);   // (x^2 - 1)/2, exact for linear data
  auto B = cumtrapz_backward(f);  // (1 - x^2)/2
  for (std::size_t i = 0; i < f.size(); i += 37) {
    const double x = f.x(i);
    REQUIRE(F.values[i] == Catch::Approx(0.5 * (x * x - 1.0)).margin(1e-13));
    REQUIRE(B.values[i] == Catch::Approx(0.5 * (1.0 - x * x)).margin(1e-13));
  }
  REQUIRE(trapz(f) == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("downsample keeps endpoints and stride nodes", "[grid]") {
  auto f = GridFunction::sample(-1.0, 1.0, 0.01, [](double x) { return x * x; });
  auto g = downsample(f, 10);
  REQUIRE(g.size() == 21);
  REQUIRE(g.h == Catch::Approx(0.1));
  REQUIRE(g.values.front() == f.values.front());
  REQUIRE(g.values.back() == f.values.back());
  REQUIRE_THROWS_AS(downsample(f, 7), ValidationError);
}

TEST_CASE("linear interpolation between nodes", "[grid]") {
  auto f = GridFunction::sample(-1.0, 1.0, 0.5, [](double x) { return x; });
  REQUIRE(f.at(0.25) == Catch::Approx(0.25));
  REQUIRE(f.at(-1.0) == Catch::Approx(-1.0));
  REQUIRE_THROWS_AS(f.at(1.5), ValidationError);
}
