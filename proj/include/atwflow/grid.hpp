#pragma once

#include <cstddef>
#include <vector>

#include "atwflow/anisotropy.hpp"

namespace atwflow {

/// Uniform cell-centered grid with square cells on an axis-aligned box.
/// Cell (i, j) has center origin + ((i + 1/2) dx, (j + 1/2) dx) and linear
/// index j * nx + i.
struct Grid {
  int nx = 0;
  int ny = 0;
  double dx = 0.0;
  Vec2 origin{0.0, 0.0};

  /// Throws InputError unless the box splits into nx x ny square cells.
  static Grid over(const Box& box, int nx, int ny);

  std::size_t size() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nx + i; }
  Vec2 center(int i, int j) const { return origin + Vec2((i + 0.5) * dx, (j + 0.5) * dx); }
  Vec2 center(std::size_t k) const { return center(static_cast<int>(k % nx), static_cast<int>(k / nx)); }
  Box box() const { return {origin, origin + Vec2(nx * dx, ny * dx)}; }
  double cell_area() const { return dx * dx; }

  bool operator==(const Grid& o) const {
    return nx == o.nx && ny == o.ny && dx == o.dx && origin == o.origin;
  }
};

/// Real-valued field sampled at cell centers.
struct ScalarField {
  Grid grid;
  std::vector<double> values;

  ScalarField() = default;
  explicit ScalarField(const Grid& g, double fill = 0.0) : grid(g), values(g.size(), fill) {}

  double& operator()(int i, int j) { return values[grid.index(i, j)]; }
  double operator()(int i, int j) const { return values[grid.index(i, j)]; }
  double& operator[](std::size_t k) { return values[k]; }
  double operator[](std::size_t k) const { return values[k]; }

  /// Bilinear interpolation between cell centers, clamped at the frame.
  double sample(const Vec2& x) const;
  /// Gradient of the bilinear interpolant at x.
  Vec2 sample_gradient(const Vec2& x) const;

  double max_abs() const;
};

/// Field with every value at a cell center given by f(center).
template <class F>
ScalarField tabulate(const Grid& g, F&& f) {
  ScalarField out(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) out(i, j) = f(g.center(i, j));
  return out;
}

}  // namespace atwflow
