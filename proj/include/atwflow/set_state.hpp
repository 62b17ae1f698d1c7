#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "atwflow/grid.hpp"

namespace atwflow {

/// A discrete set E = { level < 0 } on a grid.
///
/// The level function carries the subcell position of the boundary (its zero
/// crossing); the indicator is the cell-center sign pattern. A set is bounded
/// when no inside cell lies on the outer frame of the grid.
class SetState {
 public:
  SetState() = default;

  static SetState from_level(ScalarField level);
  /// Level +-dx/2, so the boundary sits halfway between differing cells.
  static SetState from_indicator(const Grid& grid, const std::vector<std::uint8_t>& inside);

  const Grid& grid() const { return level_.grid; }
  const ScalarField& level() const { return level_; }
  const std::vector<std::uint8_t>& indicator() const { return inside_; }
  bool inside(std::size_t k) const { return inside_[k] != 0; }

  std::size_t count() const { return count_; }
  bool empty() const { return count_ == 0; }
  bool full() const { return count_ == inside_.size(); }
  bool bounded() const { return bounded_; }
  /// True when the complement is bounded, i.e. the boundary is compact.
  bool co_bounded() const { return co_bounded_; }

  /// The complement { level > 0 }, stored as { -level < 0 }.
  SetState complement() const;

  /// Smallest number of cells between an inside cell and the frame
  /// (for a co-bounded set, between an outside cell and the frame).
  int frame_margin() const;

  /// Lebesgue measure of the set with subcell resolution.
  double area() const;

 private:
  void refresh();

  ScalarField level_;
  std::vector<std::uint8_t> inside_;
  std::size_t count_ = 0;
  bool bounded_ = true;
  bool co_bounded_ = false;
};

/// Quadrature over the grid box for one or two level functions on the same
/// grid. The box is split into the cells of the dual lattice (corners at
/// cell centers, clipped to the frame); cells where a level changes sign are
/// subsampled sub x sub times, the others use their midpoint. For every
/// quadrature node the callback receives (x, weight, level_a(x), level_b(x)),
/// with level_b = level_a when b is null.
using QuadratureVisitor = std::function<void(const Vec2&, double, double, double)>;
void box_quadrature(const ScalarField& a, const ScalarField* b, int sub, const QuadratureVisitor& f);

constexpr int kDefaultSubsamples = 8;

double symmetric_difference(const SetState& a, const SetState& b);

/// Integral of f over E (when `inside` is true) or over E^c.
double integrate(const SetState& e, const std::function<double(const Vec2&)>& f, bool inside = true);

}  // namespace atwflow
