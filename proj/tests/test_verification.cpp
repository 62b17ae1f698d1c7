#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "atwflow/error.hpp"
#include "atwflow/verification.hpp"

using namespace atwflow;

namespace {

SetState disk(const Grid& g, Vec2 c, double r) {
  return SetState::from_level(tabulate(g, [&](const Vec2& x) { return (x - c).norm() - r; }));
}

double relative_l2(const WeakCurvatureFit& fit, const std::function<double(const Vec2&)>& exact) {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < fit.points.size(); ++k) {
    double e = exact(fit.points[k]);
    num += fit.lengths[k] * (fit.curvature[k] - e) * (fit.curvature[k] - e);
    den += fit.lengths[k] * e * e;
  }
  return std::sqrt(num / den);
}

}  // namespace

TEST_CASE("weak curvature of a disk") {
  Grid g = Grid::over(Box{}, 128, 128);
  AnisotropyModel e = make_euclidean();
  WeakCurvatureFit fit = weak_curvature(disk(g, Vec2(0.5, 0.5), 0.3), e);
  CHECK(fit.equations >= fit.unknowns);
  CHECK(relative_l2(fit, [](const Vec2&) { return 1.0 / 0.3; }) < 0.05);

  AnisotropyModel s = make_scaled_euclidean(2.0);
  WeakCurvatureFit scaled = weak_curvature(disk(g, Vec2(0.5, 0.5), 0.3), s);
  CHECK(relative_l2(scaled, [](const Vec2&) { return 2.0 / 0.3; }) < 0.05);

  CHECK_THROWS_AS(weak_curvature(disk(g, Vec2(0.5, 0.5), 0.01), e), DegenerateSetError);
}

TEST_CASE("weak curvature of a flat interface") {
  Grid g = Grid::over(Box{}, 96, 96);
  SetState half = SetState::from_level(tabulate(g, [](const Vec2& x) { return x.y() - 0.5 - 0.2 * (x.x() - 0.5); }));
  WeakCurvatureFit fit = weak_curvature(half, make_euclidean());
  double worst = 0.0;
  for (std::size_t k = 0; k < fit.points.size(); ++k)
    if (std::abs(fit.points[k].x() - 0.5) < 0.3) worst = std::max(worst, std::abs(fit.curvature[k]));
  CHECK(worst < 0.2);
}

TEST_CASE("weak curvature of an ellipse against the pointwise formula") {
  Grid g = Grid::over(Box{}, 128, 128);
  const Vec2 c(0.5, 0.5);
  const double a = 0.32, b = 0.2;
  auto q = [&](const Vec2& x) {
    Vec2 d = x - c;
    return d.x() * d.x() / (a * a) + d.y() * d.y() / (b * b) - 1.0;
  };
  SetState e = SetState::from_level(tabulate(g, q));
  for (const AnisotropyModel& phi :
       {make_euclidean(), make_riemannian((Mat2() << 1.0, 0.3, 0.3, 0.8).finished())}) {
    WeakCurvatureFit fit = weak_curvature(e, phi);
    auto exact = [&](const Vec2& x) {
      Vec2 d = x - c;
      Vec2 grad(2 * d.x() / (a * a), 2 * d.y() / (b * b));
      Mat2 hess;
      hess << 2 / (a * a), 0, 0, 2 / (b * b);
      return pointwise_curvature(phi, x, grad, hess);
    };
    CHECK(relative_l2(fit, exact) < 0.08);
  }
}

TEST_CASE("pointwise curvature closed forms") {
  AnisotropyModel e = make_euclidean();
  Vec2 x(0.3, 0.0);
  Mat2 hess;
  hess << 2.0 * (1 - 0.0), 0, 0, 2.0;
  CHECK(pointwise_curvature(e, x, Vec2(0.6, 0.0), hess) == doctest::Approx(1.0 / 0.3));
  CHECK(pointwise_curvature(e, x, Vec2(0.0, 1.0), Mat2::Zero()) == doctest::Approx(0.0));
}

TEST_CASE("curvature monotonicity at a touching point") {
  AnisotropyModel phi = make_riemannian((Mat2() << 1.0, 0.2, 0.2, 0.6).finished());
  ImplicitShape small{[](const Vec2& x) { return (x - Vec2(0.4, 0.5)).norm() - 0.1; }};
  ImplicitShape large{[](const Vec2& x) { return (x - Vec2(0.3, 0.5)).norm() - 0.2; }};
  MonotonicityReport r = monotonicity_check(small, large, Vec2(0.5, 0.5), phi);
  CHECK(r.holds);
  CHECK(r.outer_curvature < r.inner_curvature);
  CHECK(r.normal_mismatch < 1e-6);
  CHECK_FALSE(monotonicity_check(large, small, Vec2(0.5, 0.5), phi).holds);
}

TEST_CASE("discrete perimeter is submodular") {
  Grid g = Grid::over(Box{}, 32, 32);
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  AnisotropyModel phi = make_smoothed_lp(3.0, 1e-3);
  for (int trial = 0; trial < 20; ++trial) {
    SetState a = SetState::from_level(tabulate(g, [&](const Vec2&) { return u(rng); }));
    SetState b = SetState::from_level(tabulate(g, [&](const Vec2&) { return u(rng); }));
    SubmodularityReport r = submodularity_check(a, b, phi);
    CHECK(r.slack() <= 1e-9 * std::max(1.0, r.sum));
  }
  SetState a = disk(g, Vec2(0.5, 0.5), 0.2), b = disk(g, Vec2(0.5, 0.5), 0.3);
  CHECK(discrete_perimeter(a, make_euclidean()) > 0.0);
  CHECK(submodularity_check(a, b, phi).slack() == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("distributional laws") {
  Grid g = Grid::over(Box{}, 96, 96);
  FlowConfig c;
  c.h = 1e-3;
  c.horizon = 0.01;
  FlowTrace tr = run(disk(g, Vec2(0.5, 0.5), 0.3), c);
  AnisotropyModel e = make_euclidean();
  std::vector<TestFunction> zero = {{"zero", [](const Vec2&, double) { return 0.0; }}};
  DistributionalReport z = distributional_laws_check(tr, e, e, c.forcing, zero);
  REQUIRE(z.curvature_law.size() == 1);
  CHECK(z.curvature_law[0].lhs == 0.0);
  CHECK(z.curvature_law[0].rhs == 0.0);
  CHECK(z.velocity_law[0].defect == 0.0);

  auto tests = default_test_functions(Vec2(0.5, 0.5), 0.45, tr.times.back());
  CHECK(tests.size() >= 2);
  for (const TestFunction& t : tests) CHECK(t.eta(Vec2(0.5, 0.5), tr.times.back()) == doctest::Approx(0.0));
  DistributionalReport r = distributional_laws_check(tr, e, e, c.forcing, tests);
  CHECK(r.curvature_defect < 0.3);
  CHECK(r.velocity_defect < 0.3);
  CHECK(r.curvature_l2 > 0.0);
  CHECK(r.velocity_l2 > 0.0);

  FlowTrace short_trace = tr;
  short_trace.states.resize(2);
  short_trace.times.resize(2);
  short_trace.steps.resize(1);
  CHECK_THROWS(distributional_laws_check(short_trace, e, e, c.forcing, tests));
}

TEST_CASE("report writers") {
  VerificationReport rep;
  rep.add("dissipation", 0.001, 0.02, true, true);
  rep.info("holder", 1.2, "K=0");
  CHECK_FALSE(rep.hard_failure());
  rep.add("comparison", 3, 0, false, true, "cells");
  CHECK(rep.hard_failure());
  rep.add("eikonal", 0.2, 0.05, false, false);
  REQUIRE(rep.rows().size() == 4);
  CHECK(rep.rows()[1].status == "info");
  CHECK(rep.rows()[2].status == "fail");

  auto dir = std::filesystem::temp_directory_path() / "atwflow_report_test";
  std::filesystem::create_directories(dir);
  rep.write_csv((dir / "r.csv").string());
  rep.write_markdown((dir / "r.md").string(), "Report");
  std::ifstream csv(dir / "r.csv");
  std::string line;
  int lines = 0;
  while (std::getline(csv, line)) ++lines;
  CHECK(lines == 5);
  std::stringstream md;
  md << std::ifstream(dir / "r.md").rdbuf();
  CHECK(md.str().find("Report") != std::string::npos);
  CHECK(md.str().find("comparison") != std::string::npos);
  std::filesystem::remove_all(dir);
}
