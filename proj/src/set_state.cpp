#include "atwflow/set_state.hpp"

#include <algorithm>
#include <cmath>

#include "atwflow/error.hpp"

namespace atwflow {

SetState SetState::from_level(ScalarField level) {
  SetState s;
  s.level_ = std::move(level);
  s.refresh();
  return s;
}

SetState SetState::from_indicator(const Grid& grid, const std::vector<std::uint8_t>& inside) {
  if (inside.size() != grid.size()) throw InputError("indicator size does not match the grid");
  ScalarField level(grid);
  for (std::size_t k = 0; k < grid.size(); ++k) level[k] = inside[k] ? -0.5 * grid.dx : 0.5 * grid.dx;
  return from_level(std::move(level));
}

void SetState::refresh() {
  const Grid& g = level_.grid;
  inside_.assign(g.size(), 0);
  count_ = 0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    inside_[k] = level_[k] < 0.0 ? 1 : 0;
    count_ += inside_[k];
  }
  bounded_ = true;
  co_bounded_ = true;
  auto visit = [&](int i, int j) {
    if (inside_[g.index(i, j)]) bounded_ = false;
    else co_bounded_ = false;
  };
  for (int i = 0; i < g.nx; ++i) {
    visit(i, 0);
    visit(i, g.ny - 1);
  }
  for (int j = 0; j < g.ny; ++j) {
    visit(0, j);
    visit(g.nx - 1, j);
  }
}

SetState SetState::complement() const {
  ScalarField neg = level_;
  for (double& v : neg.values) v = -v;
  return from_level(std::move(neg));
}

int SetState::frame_margin() const {
  const Grid& g = grid();
  if (!bounded_ && !co_bounded_) return 0;
  bool want = bounded_;
  int best = std::max(g.nx, g.ny);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      if ((inside_[g.index(i, j)] != 0) != want) continue;
      int m = std::min({i, j, g.nx - 1 - i, g.ny - 1 - j});
      best = std::min(best, m);
    }
  return best;
}

void box_quadrature(const ScalarField& a, const ScalarField* b, int sub, const QuadratureVisitor& f) {
  const Grid& g = a.grid;
  if (b && !(b->grid == g)) throw InputError("quadrature fields live on different grids");
  const ScalarField& bb = b ? *b : a;
  Box box = g.box();
  for (int j = -1; j < g.ny; ++j) {
    int j0 = std::max(j, 0), j1 = std::min(j + 1, g.ny - 1);
    double y0 = std::max(g.origin.y() + (j + 0.5) * g.dx, box.lower.y());
    double y1 = std::min(g.origin.y() + (j + 1.5) * g.dx, box.upper.y());
    for (int i = -1; i < g.nx; ++i) {
      int i0 = std::max(i, 0), i1 = std::min(i + 1, g.nx - 1);
      double x0 = std::max(g.origin.x() + (i + 0.5) * g.dx, box.lower.x());
      double x1 = std::min(g.origin.x() + (i + 1.5) * g.dx, box.upper.x());
      double wx = x1 - x0, wy = y1 - y0;
      // Corner values; for clipped cells the clamped duplicates make the
      // interpolant constant across the clipped direction.
      double a00 = a(i0, j0), a10 = a(i1, j0), a01 = a(i0, j1), a11 = a(i1, j1);
      double b00 = bb(i0, j0), b10 = bb(i1, j0), b01 = bb(i0, j1), b11 = bb(i1, j1);
      auto mixed = [](double p, double q, double r, double s) {
        bool n = p < 0.0;
        return (q < 0.0) != n || (r < 0.0) != n || (s < 0.0) != n;
      };
      double cx0 = g.origin.x() + (i + 0.5) * g.dx, cy0 = g.origin.y() + (j + 0.5) * g.dx;
      auto interp = [&](double v00, double v10, double v01, double v11, double x, double y) {
        double u = i0 == i1 ? 0.0 : (x - cx0) / g.dx;
        double v = j0 == j1 ? 0.0 : (y - cy0) / g.dx;
        return (1 - u) * (1 - v) * v00 + u * (1 - v) * v10 + (1 - u) * v * v01 + u * v * v11;
      };
      if (!mixed(a00, a10, a01, a11) && !mixed(b00, b10, b01, b11)) {
        double x = 0.5 * (x0 + x1), y = 0.5 * (y0 + y1);
        f(Vec2(x, y), wx * wy, interp(a00, a10, a01, a11, x, y), interp(b00, b10, b01, b11, x, y));
        continue;
      }
      double w = wx * wy / (sub * sub);
      for (int sj = 0; sj < sub; ++sj) {
        double y = y0 + (sj + 0.5) * wy / sub;
        for (int si = 0; si < sub; ++si) {
          double x = x0 + (si + 0.5) * wx / sub;
          f(Vec2(x, y), w, interp(a00, a10, a01, a11, x, y), interp(b00, b10, b01, b11, x, y));
        }
      }
    }
  }
}

double SetState::area() const {
  double acc = 0.0;
  box_quadrature(level_, nullptr, kDefaultSubsamples, [&](const Vec2&, double w, double la, double) {
    if (la < 0.0) acc += w;
  });
  return acc;
}

double symmetric_difference(const SetState& a, const SetState& b) {
  double acc = 0.0;
  box_quadrature(a.level(), &b.level(), kDefaultSubsamples,
                 [&](const Vec2&, double w, double la, double lb) {
                   if ((la < 0.0) != (lb < 0.0)) acc += w;
                 });
  return acc;
}

double integrate(const SetState& e, const std::function<double(const Vec2&)>& f, bool inside) {
  double acc = 0.0;
  box_quadrature(e.level(), nullptr, kDefaultSubsamples, [&](const Vec2& x, double w, double la, double) {
    if ((la < 0.0) == inside) acc += w * f(x);
  });
  return acc;
}

}  // namespace atwflow
