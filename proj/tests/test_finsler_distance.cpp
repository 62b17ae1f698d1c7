#include <doctest.h>

#include <cmath>
#include <limits>
#include <queue>
#include <random>

#include "atwflow/error.hpp"
#include "atwflow/finsler_distance.hpp"

using namespace atwflow;

namespace {

SetState disk(const Grid& g, Vec2 c, double r) {
  return SetState::from_level(tabulate(g, [&](const Vec2& x) { return (x - c).norm() - r; }));
}

/// Shortest paths on the 8-connected lattice of cell centers with edge
/// lengths psi°(midpoint, x_to - x_from), from the cells of `e`.
std::vector<double> dijkstra(const SetState& e, const AnisotropyModel& psi) {
  const Grid& g = e.grid();
  std::vector<double> d(g.size(), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> q;
  for (std::size_t k = 0; k < g.size(); ++k)
    if (e.inside(k)) {
      d[k] = 0.0;
      q.push({0.0, k});
    }
  while (!q.empty()) {
    auto [dk, k] = q.top();
    q.pop();
    if (dk > d[k]) continue;
    int i = static_cast<int>(k % g.nx), j = static_cast<int>(k / g.nx);
    for (int di = -1; di <= 1; ++di)
      for (int dj = -1; dj <= 1; ++dj) {
        int a = i + di, b = j + dj;
        if ((di == 0 && dj == 0) || a < 0 || b < 0 || a >= g.nx || b >= g.ny) continue;
        Vec2 from = g.center(i, j), to = g.center(a, b);
        double w = psi.polar(0.5 * (from + to), to - from);
        std::size_t n = g.index(a, b);
        if (dk + w < d[n]) {
          d[n] = dk + w;
          q.push({d[n], n});
        }
      }
  }
  return d;
}

}  // namespace

TEST_CASE("half-plane signed distance") {
  Grid g = Grid::over(Box{Vec2(-0.5, -0.5), Vec2(0.5, 0.5)}, 64, 64);
  SetState e = SetState::from_level(tabulate(g, [](const Vec2& x) { return x.x(); }));
  DistanceField sd = signed_distance(e, make_euclidean());
  double worst = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) worst = std::max(worst, std::abs(sd.values[k] - g.center(k).x()));
  CHECK(worst < 1e-9);

  Vec2 n = Vec2(1.0, 2.0).normalized();
  SetState tilted = SetState::from_level(tabulate(g, [&](const Vec2& x) { return n.dot(x) - 0.05; }));
  AnisotropyModel psi = make_riemannian((Mat2() << 2.0, 0.3, 0.3, 1.0).finished());
  DistanceField sp = signed_distance(tilted, psi);
  const double pn = psi.value(Vec2::Zero(), n);
  worst = 0.0;
  // Away from the frame, where the minimizing segments stay inside the box.
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (g.center(k).lpNorm<Eigen::Infinity>() > 0.2) continue;
    double exact = (n.dot(g.center(k)) - 0.05) / pn;
    worst = std::max(worst, std::abs(sp.values[k] - exact));
  }
  CHECK(worst < 1.5 * g.dx);
}

TEST_CASE("scaled mobility divides the Euclidean distance") {
  Grid g = Grid::over(Box{}, 96, 96);
  SetState e = disk(g, Vec2(0.5, 0.5), 0.25);
  DistanceField a = signed_distance(e, make_euclidean());
  DistanceField b = signed_distance(e, make_scaled_euclidean(2.0));
  for (std::size_t k = 0; k < g.size(); ++k) REQUIRE(b.values[k] == doctest::Approx(a.values[k] / 2.0).epsilon(1e-9));
  SandwichReport s = euclidean_sandwich_check(b, e, make_scaled_euclidean(2.0));
  CHECK(s.min_ratio == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(s.max_ratio == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(s.max_violation == 0.0);
}

TEST_CASE("disk distance: radial oracle, sign convention and eikonal residual") {
  Grid g = Grid::over(Box{}, 128, 128);
  const double r = 0.25;
  SetState e = disk(g, Vec2(0.5, 0.5), r);
  DistanceField sd = signed_distance(e, make_euclidean());
  double worst = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    double exact = (g.center(k) - Vec2(0.5, 0.5)).norm() - r;
    worst = std::max(worst, std::abs(sd.values[k] - exact));
    if (e.inside(k)) REQUIRE(sd.values[k] <= 0.0);
    else REQUIRE(sd.values[k] >= 0.0);
  }
  CHECK(worst < 1.5 * g.dx);
  EikonalResidual res = eikonal_residual(sd, make_euclidean());
  CHECK(res.median <= 0.05);
  CHECK(res.cut_locus_cells > 0);
}

TEST_CASE("Riemannian distance against a graph-geodesic oracle") {
  Grid g = Grid::over(Box{}, 128, 128);
  AnisotropyModel psi = make_riemannian((Mat2() << 4.0, 0.0, 0.0, 1.0).finished());
  SetState e = disk(g, Vec2(0.5, 0.5), 0.15);
  DistanceField sd = signed_distance(e, psi);
  std::vector<double> oracle = dijkstra(e, psi);
  double worst = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k)
    if (!e.inside(k)) worst = std::max(worst, std::abs(sd.values[k] - oracle[k]));
  // The lattice oracle is itself off by up to a cell plus its metrication error.
  CHECK(worst < 2.0 * g.dx + 0.03);
  SandwichReport s = euclidean_sandwich_check(sd, e, psi);
  CHECK(s.max_violation <= 0.03);
}

TEST_CASE("reversal identities") {
  Grid g = Grid::over(Box{}, 96, 96);
  AnisotropyModel psi = make_modulated(make_riemannian((Mat2() << 1.5, 0.4, 0.4, 1.0).finished()),
                                       Expression::parse("1 + 0.3*x"));
  SetState e = SetState::from_level(tabulate(g, [](const Vec2& x) {
    return std::hypot((x.x() - 0.45) / 0.25, (x.y() - 0.5) / 0.15) - 1.0;
  }));
  DistanceField a = signed_distance(e, psi);
  DistanceField b = signed_distance(e.complement(), psi.reversed());
  double worst = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) worst = std::max(worst, std::abs(a.values[k] + b.values[k]));
  CHECK(worst < 1e-9);

  DistanceField from = one_sided_distance(e, psi, Orientation::FromSet);
  DistanceField to = one_sided_distance(e, psi.reversed(), Orientation::ToSet);
  worst = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) worst = std::max(worst, std::abs(from.values[k] - to.values[k]));
  CHECK(worst < 1e-9);
}

TEST_CASE("point source cone and sweep count") {
  Grid g = Grid::over(Box{}, 128, 128);
  ScalarField b(g, std::numeric_limits<double>::infinity());
  std::vector<std::uint8_t> mask(g.size(), 0);
  const std::size_t src = g.index(40, 70);
  b[src] = 0.0;
  mask[src] = 1;
  int sweeps = 0;
  ScalarField d = eikonal_solve(b, mask, make_euclidean(), Orientation::FromSet, {}, &sweeps);
  double worst = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    double r = (g.center(k) - g.center(src)).norm();
    if (r > 3 * g.dx) worst = std::max(worst, std::abs(d[k] - r));
  }
  CHECK(worst < 1.5 * g.dx);
  CHECK(sweeps <= 8);
  DistanceOptions tight;
  tight.max_sweeps = 1;
  CHECK_THROWS_AS(eikonal_solve(b, mask, make_euclidean(), Orientation::FromSet, tight), SolverError);
}

TEST_CASE("monotonicity and triangle inequality") {
  Grid g = Grid::over(Box{}, 96, 96);
  AnisotropyModel psi = make_smoothed_lp(4.0, 0.2);
  SetState small = disk(g, Vec2(0.5, 0.5), 0.15), big = disk(g, Vec2(0.52, 0.5), 0.25);
  DistanceField a = signed_distance(small, psi), b = signed_distance(big, psi);
  for (std::size_t k = 0; k < g.size(); ++k) REQUIRE(a.values[k] >= b.values[k] - 1e-12);

  AnisotropyModel tri = make_riemannian((Mat2() << 2.0, 0.5, 0.5, 1.0).finished());
  std::mt19937 rng(5);
  std::uniform_int_distribution<int> cell(8, 87);
  auto point_field = [&](int i, int j) {
    ScalarField s(g, std::numeric_limits<double>::infinity());
    std::vector<std::uint8_t> m(g.size(), 0);
    s(i, j) = 0.0;
    m[g.index(i, j)] = 1;
    return eikonal_solve(s, m, tri, Orientation::FromSet);
  };
  for (int t = 0; t < 10; ++t) {
    int xi = cell(rng), xj = cell(rng), yi = cell(rng), yj = cell(rng);
    ScalarField dx = point_field(xi, xj), dy = point_field(yi, yj);
    for (int s = 0; s < 100; ++s) {
      int zi = cell(rng), zj = cell(rng);
      REQUIRE(dx(zi, zj) <= dx(yi, yj) + dy(zi, zj) + 2 * g.dx);
    }
  }
  CHECK_THROWS_AS(signed_distance(SetState::from_level(ScalarField(g, 1.0)), psi), DegenerateSetError);
}
