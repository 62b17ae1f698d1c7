#include <doctest.h>

#include <cmath>
#include <cstring>

#include "atwflow/error.hpp"
#include "atwflow/level_set_scheme.hpp"

using namespace atwflow;

namespace {

FlowConfig config(double h, double horizon) {
  FlowConfig c;
  c.h = h;
  c.horizon = horizon;
  return c;
}

}  // namespace

TEST_CASE("ladder construction") {
  Grid g = Grid::over(Box{}, 32, 32);
  ScalarField u0 = cone_function(g, Vec2(0.5, 0.5), 0.4, 0.0);
  LevelLadder l = make_ladder(u0, 8, LadderVariant::LowerMinus);
  REQUIRE(l.levels.size() == 8);
  const double ds = l.levels[1] - l.levels[0];
  for (std::size_t i = 1; i < l.sets.size(); ++i) CHECK(l.sets[i].area() <= l.sets[i - 1].area());
  ScalarField u = reconstruct(l);
  for (std::size_t k = 0; k < g.size(); ++k) {
    CHECK(u[k] <= u0[k] + 1e-15);
    CHECK(u0[k] - u[k] <= ds + 1e-12);
  }
  ScalarField ui = reconstruct_interpolated(l);
  double worst = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) worst = std::max(worst, std::abs(ui[k] - u0[k]));
  CHECK(worst <= ds + 1e-12);

  CHECK_THROWS_AS(make_ladder(u0, 0, LadderVariant::LowerMinus), InputError);
  CHECK_THROWS_AS(make_ladder(ScalarField(g, 1.0), 4, LadderVariant::LowerMinus), InputError);
  CHECK_THROWS_AS(make_ladder(u0, {0.2, 0.1}, 0.0, LadderVariant::LowerMinus), InputError);
  CHECK_THROWS_AS(make_ladder(u0, {0.1, 0.2}, 0.15, LadderVariant::LowerMinus), InputError);
}

TEST_CASE("a single level reproduces the set flow") {
  Grid g = Grid::over(Box{}, 64, 64);
  ScalarField u0 = cone_function(g, Vec2(0.5, 0.5), 0.4, 0.0);
  FlowConfig c = config(1e-3, 0.006);
  c.forcing = Expression::parse("2*y");
  LevelLadder l = make_ladder(u0, {0.15}, 0.0, LadderVariant::LowerMinus);
  LevelSetTrace lt = run_levelset(l, c);
  FlowTrace ft = run(l.sets[0], c);
  REQUIRE(lt.ladders.size() == ft.states.size());
  for (std::size_t k = 0; k < ft.states.size(); ++k) {
    CHECK(lt.times[k] == ft.times[k]);
    CHECK(std::memcmp(lt.ladders[k].sets[0].level().values.data(), ft.states[k].level().values.data(),
                      g.size() * sizeof(double)) == 0);
  }
}

TEST_CASE("cone ladders: ordering, nesting and symmetry") {
  Grid g = Grid::over(Box{}, 64, 64);
  ScalarField u0 = cone_function(g, Vec2(0.5, 0.5), 0.4, 0.0);
  FlowConfig c = config(2e-3, 0.01);
  LevelSetTrace minus = run_levelset(make_ladder(u0, 12, LadderVariant::LowerMinus), c);
  LevelSetTrace plus = run_levelset(make_ladder(u0, 12, LadderVariant::UpperPlus), c);
  CHECK(minus.total_corrections == 0);
  CHECK(plus.total_corrections == 0);
  REQUIRE(minus.ladders.size() == plus.ladders.size());
  const double ds = minus.ladders[0].levels[1] - minus.ladders[0].levels[0];
  for (std::size_t k = 0; k < minus.ladders.size(); ++k) {
    ScalarField lo = reconstruct(minus.ladders[k]), hi = reconstruct(plus.ladders[k]);
    std::size_t bad = 0;
    for (std::size_t q = 0; q < g.size(); ++q) bad += lo[q] > hi[q];
    CHECK(bad == 0);
  }
  ScalarField u = reconstruct(minus.ladders.back());
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      CHECK(std::abs(u(i, j) - u(j, i)) <= ds + 1e-12);
      CHECK(std::abs(u(i, j) - u(g.nx - 1 - i, j)) <= ds + 1e-12);
    }
  CHECK(&minus.at(0.0) == &minus.ladders[0]);
}

TEST_CASE("relabeling the levels keeps the sets") {
  Grid g = Grid::over(Box{}, 48, 48);
  ScalarField u0 = cone_function(g, Vec2(0.5, 0.5), 0.4, 0.0);
  ScalarField w0 = u0;
  for (double& v : w0.values) v = 3.0 * v + 1.0;
  std::vector<double> s = {0.1, 0.2, 0.3}, t;
  for (double v : s) t.push_back(3.0 * v + 1.0);
  FlowConfig c = config(2e-3, 0.006);
  LevelSetTrace a = run_levelset(make_ladder(u0, s, 0.0, LadderVariant::LowerMinus), c);
  LevelSetTrace b = run_levelset(make_ladder(w0, t, 1.0, LadderVariant::LowerMinus), c);
  for (std::size_t k = 0; k < a.ladders.size(); ++k)
    for (std::size_t i = 0; i < s.size(); ++i) {
      const SetState& ea = a.ladders[k].sets[i];
      const SetState& eb = b.ladders[k].sets[i];
      CHECK(symmetric_difference(ea, eb) <= 0.05 * perimeter(ea, make_euclidean()) * g.dx + 1e-12);
    }
}

TEST_CASE("residual of exact solutions") {
  Grid g = Grid::over(Box{}, 128, 128);
  AnisotropyModel e = make_euclidean();
  ProbeRegion probe{Vec2(0.5, 0.5), 0.1, 0.3};
  ScalarField flat = tabulate(g, [](const Vec2& x) { return 0.3 * x.x() + 0.4 * x.y(); });
  PdeResidualReport still = pde_residual({flat, flat}, {0.0, 1e-3}, e, e, Expression(0.0), probe);
  CHECK(still.stats.computed);
  CHECK(still.stats.max_abs < 1e-9);
  CHECK(still.interval == doctest::Approx(1e-3));

  auto exact = [&](double t) {
    return tabulate(g, [&](const Vec2& x) { return 0.4 - std::sqrt((x - Vec2(0.5, 0.5)).squaredNorm() + 2 * t); });
  };
  PdeResidualReport mcf = pde_residual({exact(0.0), exact(1e-3)}, {0.0, 1e-3}, e, e, Expression(0.0), probe);
  CHECK(mcf.stats.computed);
  CHECK(mcf.stats.median_abs < 0.05);
  CHECK(mcf.degenerate_cells == 0);

  PdeResidualReport wrong =
      pde_residual({exact(0.0), exact(1e-3)}, {0.0, 1e-3}, e, e, Expression(10.0), probe);
  CHECK(wrong.stats.median_abs > 5.0);
}
