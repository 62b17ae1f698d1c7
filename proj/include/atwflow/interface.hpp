#pragma once

#include <vector>

#include "atwflow/set_state.hpp"

namespace atwflow {

/// Straight piece of the zero level line, oriented so that the set lies on
/// its left; `normal` is the outer unit normal.
struct Segment {
  Vec2 a;
  Vec2 b;
  Vec2 normal;

  Vec2 midpoint() const { return 0.5 * (a + b); }
  double length() const { return (b - a).norm(); }
};

/// Marching squares on the lattice of cell centers. Saddle cells are resolved
/// with the average of the four corner values.
std::vector<Segment> extract_interface(const ScalarField& level);

/// Segments chained into polylines; closed loops repeat their first vertex.
std::vector<std::vector<Vec2>> interface_loops(const ScalarField& level);

/// Indices into extract_interface(level), in boundary order.
struct InterfaceChain {
  std::vector<std::size_t> segments;
  bool closed = false;
};
std::vector<InterfaceChain> interface_chains(const ScalarField& level);

/// P_phi(E) = sum over segments of phi(midpoint, normal) * length.
double perimeter(const SetState& e, const AnisotropyModel& phi);
double perimeter(const std::vector<Segment>& segments, const AnisotropyModel& phi);

/// Hausdorff distance between the two boundaries, sampled at segment
/// endpoints and midpoints. Zero when both are empty, infinity when only one is.
double hausdorff_distance(const std::vector<Segment>& a, const std::vector<Segment>& b);

}  // namespace atwflow
