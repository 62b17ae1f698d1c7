#include "atwflow/grid.hpp"

#include <algorithm>
#include <cmath>

#include "atwflow/error.hpp"

namespace atwflow {

Grid Grid::over(const Box& box, int nx, int ny) {
  if (nx < 2 || ny < 2) throw InputError("grid needs at least 2 cells per axis");
  Vec2 ext = box.upper - box.lower;
  if (!(ext.x() > 0.0) || !(ext.y() > 0.0)) throw InputError("box extents must be positive");
  double dx = ext.x() / nx;
  double dy = ext.y() / ny;
  if (std::abs(dx - dy) > 1e-9 * dx) throw InputError("grid cells must be square");
  return Grid{nx, ny, dx, box.lower};
}

namespace {

struct Stencil {
  int i0, j0;
  double fx, fy;
};

Stencil locate(const Grid& g, const Vec2& x) {
  double u = (x.x() - g.origin.x()) / g.dx - 0.5;
  double v = (x.y() - g.origin.y()) / g.dx - 0.5;
  u = std::clamp(u, 0.0, g.nx - 1.0);
  v = std::clamp(v, 0.0, g.ny - 1.0);
  int i0 = std::min(static_cast<int>(u), g.nx - 2);
  int j0 = std::min(static_cast<int>(v), g.ny - 2);
  return {i0, j0, u - i0, v - j0};
}

}  // namespace

double ScalarField::sample(const Vec2& x) const {
  Stencil s = locate(grid, x);
  const ScalarField& f = *this;
  return (1 - s.fx) * (1 - s.fy) * f(s.i0, s.j0) + s.fx * (1 - s.fy) * f(s.i0 + 1, s.j0) +
         (1 - s.fx) * s.fy * f(s.i0, s.j0 + 1) + s.fx * s.fy * f(s.i0 + 1, s.j0 + 1);
}

Vec2 ScalarField::sample_gradient(const Vec2& x) const {
  Stencil s = locate(grid, x);
  const ScalarField& f = *this;
  double a = f(s.i0, s.j0), b = f(s.i0 + 1, s.j0), c = f(s.i0, s.j0 + 1), d = f(s.i0 + 1, s.j0 + 1);
  return Vec2((1 - s.fy) * (b - a) + s.fy * (d - c), (1 - s.fx) * (c - a) + s.fx * (d - b)) / grid.dx;
}

double ScalarField::max_abs() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace atwflow
