#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numbers>

#include "atwflow/flow_driver.hpp"

using namespace atwflow;

namespace {

SetState disk(const Grid& g, Vec2 c, double r) {
  return SetState::from_level(tabulate(g, [&](const Vec2& x) { return (x - c).norm() - r; }));
}

double radius_of(const SetState& e) { return std::sqrt(e.area() / std::numbers::pi); }

FlowConfig config(double h, double horizon) {
  FlowConfig c;
  c.h = h;
  c.horizon = horizon;
  return c;
}

}  // namespace

TEST_CASE("shrinking disk on a coarse grid") {
  Grid g = Grid::over(Box{}, 128, 128);
  const double r0 = 0.3;
  FlowTrace tr = run(disk(g, Vec2(0.5, 0.5), r0), config(1e-3, 0.02));
  REQUIRE(tr.status == FlowStatus::Completed);
  REQUIRE(tr.states.size() == 21);
  for (std::size_t k = 0; k < tr.states.size(); ++k) {
    CHECK(tr.times[k] == doctest::Approx(k * 1e-3));
    double exact = std::sqrt(r0 * r0 - 2 * tr.times[k]);
    CHECK(std::abs(radius_of(tr.states[k]) - exact) / exact < 0.05);
  }
  CHECK(&tr.at(0.0) == &tr.states[0]);
  CHECK(&tr.at(0.999e-3) == &tr.states[0]);
  CHECK(&tr.at(1e-3) == &tr.states[1]);
  for (const StepRecord& s : tr.steps) {
    CHECK(s.dissipation.slack() <= 0.02 * tr.initial_perimeter);
    CHECK(s.hausdorff > 0.0);
    CHECK(s.el.computed);
  }

  const StepRecord& last = tr.steps.back();
  double mean_v = 0.0, len = 0.0;
  for (const BoundarySample& b : last.boundary) {
    mean_v += b.v * b.length;
    len += b.length;
  }
  mean_v /= len;
  double rt = radius_of(tr.states.back());
  CHECK(std::abs(mean_v + 1.0 / rt) < 0.1 / rt);

  HolderReport hr = holder_report(tr);
  CHECK(hr.holder_constant > 0.0);
  CHECK(hr.holder_constant < 1.2 * 2 * std::numbers::pi * std::sqrt(0.02));
  CHECK(hr.perimeter_excess <= 1e-12);
  VelocityReport vr = velocity_report(tr);
  CHECK(vr.sup.size() == tr.steps.size());
  CHECK(vr.sup_sqrt_h > 0.0);

  std::vector<ScalarField> v = velocity_fields(tr, make_euclidean());
  REQUIRE(v.size() == tr.steps.size());
  double sup = 0.0;
  for (double x : v.front().values) sup = std::max(sup, std::abs(x));
  CHECK(sup == doctest::Approx(tr.steps.front().v_sup));

  FlowTrace again = replay(tr.states, tr.times, config(1e-3, 0.02));
  REQUIRE(again.steps.size() == tr.steps.size());
  for (std::size_t k = 0; k < tr.steps.size(); ++k) {
    CHECK(again.steps[k].dissipation.lhs == doctest::Approx(tr.steps[k].dissipation.lhs));
    CHECK(again.steps[k].perimeter == doctest::Approx(tr.steps[k].perimeter));
  }
}

TEST_CASE("runs are deterministic") {
  Grid g = Grid::over(Box{}, 64, 64);
  FlowConfig c = config(1e-3, 0.005);
  c.phi = make_riemannian((Mat2() << 1.0, 0.2, 0.2, 0.7).finished());
  c.forcing = Expression::parse("1 + sin(20*t)");
  FlowTrace a = run(disk(g, Vec2(0.5, 0.5), 0.25), c), b = run(disk(g, Vec2(0.5, 0.5), 0.25), c);
  REQUIRE(a.states.size() == b.states.size());
  for (std::size_t k = 0; k < a.states.size(); ++k)
    CHECK(std::memcmp(a.states[k].level().values.data(), b.states[k].level().values.data(),
                      g.size() * sizeof(double)) == 0);
}

TEST_CASE("nested flows stay nested") {
  Grid g = Grid::over(Box{}, 96, 96);
  FlowConfig c = config(1e-3, 0.01);
  c.forcing = Expression::parse("3*x");
  FlowTrace in = run(disk(g, Vec2(0.45, 0.5), 0.15), c), out = run(disk(g, Vec2(0.5, 0.5), 0.25), c);
  auto v = comparison_violations(in, out);
  CHECK(v.size() == in.states.size());
  for (std::size_t n : v) CHECK(n == 0);
}

TEST_CASE("extinction, margin and solver aborts") {
  Grid g = Grid::over(Box{}, 64, 64);
  FlowTrace ext = run(disk(g, Vec2(0.5, 0.5), 0.08), config(1e-3, 0.01));
  CHECK(ext.status == FlowStatus::Extinct);
  CHECK(ext.states.back().empty());
  CHECK(ext.times.back() <= 0.08 * 0.08 / 2 + 2e-3);

  FlowTrace margin = run(disk(g, Vec2(0.2, 0.5), 0.17), config(1e-3, 0.01));
  CHECK(margin.status == FlowStatus::MarginAbort);
  CHECK(margin.failed_step == 0);

  FlowConfig c = config(1e-3, 0.01);
  c.solver.max_iterations = 10;
  c.solver.tolerance = 1e-12;
  FlowTrace solver = run(disk(g, Vec2(0.5, 0.5), 0.2), c);
  CHECK(solver.status == FlowStatus::SolverAbort);
  CHECK(solver.failed_step == 1);
  CHECK(solver.states.size() == 1);

  SetState half = SetState::from_level(tabulate(g, [](const Vec2& x) { return x.x() - 0.5; }));
  CHECK(run(half, config(1e-3, 0.002)).status == FlowStatus::MarginAbort);
  FlowConfig free = config(1e-3, 0.002);
  free.margin_cells = -1;
  FlowTrace ht = run(half, free);
  CHECK(ht.status == FlowStatus::Completed);
  CHECK(symmetric_difference(ht.states.back(), half) < g.ny * g.dx * g.dx);
}

TEST_CASE("hole in a co-bounded set shrinks by the same law") {
  Grid g = Grid::over(Box{}, 96, 96);
  const double r0 = 0.25;
  FlowTrace tr = run(disk(g, Vec2(0.5, 0.5), r0).complement(), config(1e-3, 0.01));
  REQUIRE(tr.status == FlowStatus::Completed);
  CHECK(tr.steps.front().complement_route);
  double hole = std::sqrt((1.0 - tr.states.back().area()) / std::numbers::pi);
  double exact = std::sqrt(r0 * r0 - 2 * tr.times.back());
  CHECK(std::abs(hole - exact) / exact < 0.05);
}

TEST_CASE("stationary forced disk") {
  Grid g = Grid::over(Box{}, 96, 96);
  FlowConfig c = config(1e-3, 0.01);
  c.forcing = Expression(5.0);
  FlowTrace tr = run(disk(g, Vec2(0.5, 0.5), 0.2), c);
  for (const SetState& s : tr.states) CHECK(std::abs(radius_of(s) - 0.2) / 0.2 < 0.02);
  CHECK(holder_report(tr).holder_constant < 0.01);
}

TEST_CASE("refinement report basics") {
  Grid g = Grid::over(Box{}, 64, 64);
  SetState e = disk(g, Vec2(0.5, 0.5), 0.25);
  std::vector<FlowTrace> traces;
  RefinementReport same = refinement_study(e, config(2e-3, 0.008), {2e-3, 2e-3}, &traces);
  REQUIRE(same.gaps.size() == 1);
  for (double gap : same.gaps[0]) CHECK(gap == 0.0);
  CHECK_FALSE(same.strictly_decreasing);
  RefinementReport r = refinement_study(e, config(2e-3, 0.008), {2e-3, 1e-3, 5e-4});
  REQUIRE(r.common_times.size() == 5);
  CHECK(r.gaps[0][0] == 0.0);
  CHECK(r.gaps[1][0] == 0.0);
  CHECK(r.ladder.size() == 3);
}
