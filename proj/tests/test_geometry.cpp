#include <doctest.h>

#include <cmath>
#include <numbers>

#include "atwflow/error.hpp"
#include "atwflow/interface.hpp"

using namespace atwflow;

namespace {

SetState disk(const Grid& g, Vec2 c, double r) {
  return SetState::from_level(tabulate(g, [&](const Vec2& x) { return (x - c).norm() - r; }));
}

}  // namespace

TEST_CASE("grid geometry") {
  Grid g = Grid::over(Box{Vec2(-1, 0), Vec2(1, 1)}, 128, 64);
  CHECK(g.dx == doctest::Approx(1.0 / 64));
  CHECK(g.center(0, 0).isApprox(Vec2(-1 + 0.5 / 64, 0.5 / 64)));
  CHECK(g.index(3, 2) == 2u * 128u + 3u);
  CHECK_THROWS_AS(Grid::over(Box{Vec2(0, 0), Vec2(1, 1)}, 64, 32), InputError);
  ScalarField f = tabulate(g, [](const Vec2& x) { return 2.0 * x.x() - 3.0 * x.y() + 1.0; });
  CHECK(f.sample(Vec2(0.123, 0.456)) == doctest::Approx(2 * 0.123 - 3 * 0.456 + 1));
  CHECK(f.sample_gradient(Vec2(0.3, 0.6)).isApprox(Vec2(2, -3)));
}

TEST_CASE("set state of a disk") {
  Grid g = Grid::over(Box{}, 128, 128);
  const double r = 0.3;
  SetState e = disk(g, Vec2(0.5, 0.5), r);
  CHECK(e.area() == doctest::Approx(std::numbers::pi * r * r).epsilon(1e-3));
  CHECK(e.bounded());
  CHECK_FALSE(e.co_bounded());
  CHECK(e.frame_margin() > 20);
  SetState c = e.complement();
  CHECK(c.co_bounded());
  CHECK_FALSE(c.bounded());
  CHECK(c.count() + e.count() == g.size());
  CHECK(c.area() == doctest::Approx(1.0 - e.area()).epsilon(1e-9));
  SetState ind = SetState::from_indicator(g, e.indicator());
  CHECK(ind.indicator() == e.indicator());
  CHECK(SetState::from_level(ScalarField(g, 1.0)).empty());
  CHECK(SetState::from_level(ScalarField(g, -1.0)).full());
}

TEST_CASE("interface quadrature") {
  Grid g = Grid::over(Box{}, 256, 256);
  const double r = 0.3;
  SetState e = disk(g, Vec2(0.5, 0.5), r);
  CHECK(perimeter(e, make_euclidean()) == doctest::Approx(2 * std::numbers::pi * r).epsilon(0.01));

  AnisotropyModel a = make_riemannian((Mat2() << 4.0, 0.0, 0.0, 1.0).finished());
  double exact = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    double th = 2 * std::numbers::pi * (i + 0.5) / n;
    exact += std::sqrt(4 * std::cos(th) * std::cos(th) + std::sin(th) * std::sin(th)) * r * 2 * std::numbers::pi / n;
  }
  CHECK(perimeter(e, a) == doctest::Approx(exact).epsilon(0.01));

  auto loops = interface_loops(e.level());
  REQUIRE(loops.size() == 1);
  CHECK(loops[0].front().isApprox(loops[0].back()));
  auto chains = interface_chains(e.level());
  REQUIRE(chains.size() == 1);
  CHECK(chains[0].closed);
  CHECK(chains[0].segments.size() == extract_interface(e.level()).size());
  for (const Segment& s : extract_interface(e.level())) {
    Vec2 radial = (s.midpoint() - Vec2(0.5, 0.5)).normalized();
    REQUIRE(s.normal.dot(radial) > 0.99);
  }
}

TEST_CASE("symmetric difference and Hausdorff distance of concentric disks") {
  Grid g = Grid::over(Box{}, 128, 128);
  SetState a = disk(g, Vec2(0.5, 0.5), 0.2), b = disk(g, Vec2(0.5, 0.5), 0.3);
  CHECK(symmetric_difference(a, b) == doctest::Approx(std::numbers::pi * (0.09 - 0.04)).epsilon(2e-3));
  CHECK(symmetric_difference(a, a) == 0.0);
  CHECK(hausdorff_distance(extract_interface(a.level()), extract_interface(b.level())) ==
        doctest::Approx(0.1).epsilon(0.02));
  double m = integrate(b, [](const Vec2& x) { return x.x(); });
  CHECK(m == doctest::Approx(0.5 * std::numbers::pi * 0.09).epsilon(2e-3));
}
