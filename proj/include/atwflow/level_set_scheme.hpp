#pragma once

#include <string>
#include <vector>

#include "atwflow/flow_driver.hpp"

namespace atwflow {

/// UpperPlus steps { u >= s } with maximal solutions, LowerMinus steps
/// { u > s } with minimal solutions.
enum class LadderVariant { UpperPlus, LowerMinus };
std::string to_string(LadderVariant v);

/// Superlevel sets E_i of a level-set function at levels s_1 < ... < s_m.
struct LevelLadder {
  LadderVariant variant = LadderVariant::LowerMinus;
  std::vector<double> levels;
  std::vector<SetState> sets;
  /// Value assigned by the reconstruction outside every E_i.
  double floor = 0.0;
};

/// Uniform levels s_i = lo + (i + 1/2) (hi - lo) / m over [min u0, max u0].
LevelLadder make_ladder(const ScalarField& u0, int m, LadderVariant variant);
/// Explicit increasing levels; `floor` must not exceed the first one.
LevelLadder make_ladder(const ScalarField& u0, const std::vector<double>& levels, double floor,
                        LadderVariant variant);

struct LadderStepReport {
  /// Cells removed from E_{i+1} to keep it inside E_i.
  std::size_t corrections = 0;
  int iterations = 0;
  int complement_levels = 0;
  double plateau = 0.0;  ///< sum over levels of |E_max \ E_min|
};

/// Steps every level with atw_step over [t, t + h] and enforces nesting.
/// Solver failures are rethrown as SolverError naming the level index.
LevelLadder levelset_step(const LevelLadder& ladder, double h, double t, const FlowConfig& config,
                          LadderStepReport* report = nullptr);

/// u(x) = sup { s_i : x in E_i }, and `floor` where x lies in no E_i.
ScalarField reconstruct(const LevelLadder& ladder);

/// Same staircase refined between consecutive levels by the subcell zero
/// crossings of their level functions; used for finite differences.
ScalarField reconstruct_interpolated(const LevelLadder& ladder);

struct LevelSetTrace {
  double h = 0.0;
  std::vector<double> times;
  std::vector<LevelLadder> ladders;
  std::vector<LadderStepReport> steps;
  std::size_t total_corrections = 0;

  const LevelLadder& at(double t) const;
};

/// Iterates levelset_step up to the horizon of the configuration.
LevelSetTrace run_levelset(const LevelLadder& initial, const FlowConfig& config);

struct ProbeRegion {
  Vec2 center{0.0, 0.0};
  double r_min = 0.0;
  double r_max = 0.0;
};

struct PdeResidualReport {
  ResidualStats stats;
  std::size_t degenerate_cells = 0;  ///< probe cells with |grad u| < min_gradient
  double interval = 0.0;              ///< time difference used for u_t
};

/// r = (u(t + tau) - u(t)) / tau + psi(x, -grad u) (H(x, grad u, hess u) - f)
/// with the spatial terms taken from the average of the two frames, over the
/// probe cells and every pair of frames `stride` apart.
PdeResidualReport pde_residual(const std::vector<ScalarField>& frames, const std::vector<double>& times,
                               const AnisotropyModel& phi, const AnisotropyModel& psi, const Expression& forcing,
                               const ProbeRegion& probe, int stride = 1, double min_gradient = 0.25);

/// max(R0 - |x - c|, floor).
ScalarField cone_function(const Grid& grid, const Vec2& center, double radius, double floor);

}  // namespace atwflow
