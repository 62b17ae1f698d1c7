#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "atwflow/set_state.hpp"

namespace atwflow {

/// FromSet: d(x) = inf over sources y of value(y) + dist(y, x).
/// ToSet:   d(x) = inf over sources y of value(y) + dist(x, y).
enum class Orientation { FromSet, ToSet };

std::string to_string(Orientation o);

struct DistanceOptions {
  int max_sweeps = 64;
  /// Convergence threshold on the largest update, in units of dx.
  double tolerance = 1e-3;
  /// Values beyond the cap are clamped to it; infinity disables the cap.
  double cap = std::numeric_limits<double>::infinity();
};

/// Signed Finsler distance: <= 0 on the set, >= 0 on its complement.
struct DistanceField {
  ScalarField values;
  Orientation orientation = Orientation::FromSet;
  int sweeps = 0;
};

/// Solves psi(x, grad d) = 1 by Gauss-Seidel sweeps in the four axis
/// orderings with the eight-triangle Hopf-Lax update
///   d(x) = min over triangles, theta in [0, 1] of d(y_theta) + psi°(x, x - y_theta).
/// Cells with mask != 0 keep their value; cells with value +infinity and
/// mask != 0 are excluded from the computation. Throws SolverError when the
/// largest update is still above tolerance after max_sweeps sweeps.
ScalarField eikonal_solve(const ScalarField& boundary, const std::vector<std::uint8_t>& mask,
                          const AnisotropyModel& psi, Orientation orientation = Orientation::FromSet,
                          const DistanceOptions& options = {}, int* sweeps = nullptr);

/// inf over y in E of dist(y, x) (FromSet) or dist(x, y) (ToSet); zero on E.
/// Cells next to the boundary are initialized from the subcell position of
/// the zero crossing of the level function.
DistanceField one_sided_distance(const SetState& e, const AnisotropyModel& psi,
                                 Orientation orientation = Orientation::FromSet,
                                 const DistanceOptions& options = {});

/// sd(x) = inf_{y in E} dist(y, x) - inf_{y not in E} dist(x, y). The second
/// term is computed as a distance from E^c under the reversed mobility.
/// Throws DegenerateSetError when E is empty or fills the grid.
DistanceField signed_distance(const SetState& e, const AnisotropyModel& psi,
                              const DistanceOptions& options = {});

struct SandwichReport {
  double c = 1.0;
  double max_violation = 0.0;  ///< relative, 0 when every sample is inside the bounds
  double min_ratio = 0.0;      ///< min and max of |sd_psi| / |sd_euclid|
  double max_ratio = 0.0;
  std::size_t samples = 0;
};

/// Checks |sd| / c <= |sd_euclid| <= c |sd| against the Euclidean signed
/// distance computed by the same solver, skipping the two-cell interface band.
SandwichReport euclidean_sandwich_check(const DistanceField& field, const SetState& e,
                                        const AnisotropyModel& psi);

struct EikonalResidual {
  double median = 0.0;
  double max = 0.0;
  std::size_t samples = 0;
  std::size_t cut_locus_cells = 0;
};

/// |psi(x, grad d) - 1| by central differences, away from the interface
/// band and the frame; cells where one-sided differences jump are counted as
/// cut locus and skipped.
EikonalResidual eikonal_residual(const DistanceField& field, const AnisotropyModel& psi);

/// Raw little-endian float64 values in row-major order plus a JSON sidecar
/// `<path>.json` with shape, spacing, origin and orientation.
void write_distance_dump(const DistanceField& field, const std::string& path);

}  // namespace atwflow
