#pragma once

#include <vector>

#include "atwflow/finsler_distance.hpp"
#include "atwflow/interface.hpp"

namespace atwflow {

struct SolverOptions {
  /// Relative primal-dual gap at which the saddle-point iteration stops.
  double tolerance = 1e-6;
  int max_iterations = 5000;
  /// Threshold tau of the relaxed solution; the level route uses tau * dx.
  double threshold = 1e-3;
  /// Midpoint samples of the forcing over [t, t + h].
  int forcing_samples = 4;
  DistanceOptions distance;
};

/// One minimizing-movement step
///   minimize P_phi(E) + int_E g,   g = sd^psi_F / h - F_h.
struct IncrementalProblem {
  AnisotropyModel phi = make_euclidean();
  double h = 0.0;
  ScalarField distance;  ///< sd^psi_F
  ScalarField forcing;   ///< F_h(x, t), the time average of f over [t, t + h]
  ScalarField g;         ///< distance / h - forcing
  int sweeps = 0;        ///< eikonal sweeps spent on the distance
  SolverOptions options;
};

/// F_h(x, t) = (1/h) int_t^{t+h} f(x, s) ds with `samples` midpoint nodes.
ScalarField forcing_average(const Grid& grid, const Expression& f, double t, double h, int samples);

IncrementalProblem make_problem(const SetState& f_set, double h, double t, const AnisotropyModel& phi,
                                const AnisotropyModel& psi, const Expression& forcing,
                                const SolverOptions& options = {});

/// Dual field xi on the cells, with phi°(x, xi) <= 1 at every cell center.
struct DualField {
  std::vector<double> x;
  std::vector<double> y;
};

/// Minimizer w in [0, 1] of int phi(x, Dw) + int g w.
struct RelaxedSolution {
  ScalarField w;
  DualField xi;
  double gap = 0.0;  ///< relative primal-dual gap at exit
  double primal = 0.0;
  int iterations = 0;
};

/// Primal-dual iteration on min_w max_xi int xi . Dw + int g w with w in
/// [0, 1] and xi projected onto the Wulff shape at every cell. Throws
/// SolverError when the gap stays above tolerance after max_iterations.
RelaxedSolution solve_relaxed(const IncrementalProblem& prob);

/// E_min = { w >= 1 - tau }, E_max = { w > tau }.
struct ThresholdPair {
  SetState e_min;
  SetState e_max;
};
ThresholdPair threshold(const RelaxedSolution& sol, double tau = 1e-3);

/// Minimizer u of int phi(x, Du) + (1/2h) int (u - h g)^2. Every sublevel
/// set { u < s } minimizes P_phi(E) + int_E (g - s/h), so { u < 0 } solves
/// the incremental problem and the zero crossing of u locates its boundary
/// below the cell size.
struct LevelSolution {
  ScalarField u;
  DualField xi;
  double gap = 0.0;
  double primal = 0.0;
  int iterations = 0;
};

/// Accelerated primal-dual iteration for the strongly convex problem above.
LevelSolution solve_level(const IncrementalProblem& prob);

/// E_min = { u < -tau dx }, E_max = { u <= tau dx }.
ThresholdPair threshold(const LevelSolution& sol, double tau = 1e-3);

struct StepDiagnostics {
  int iterations = 0;
  double gap = 0.0;
  int sweeps = 0;
  /// |E_max \ E_min|
  double fattening = 0.0;
  bool complement_route = false;
  bool frame_coercive = true;
  bool degenerate = false;  ///< F was empty or filled the grid; returned unchanged
};

struct StepResult {
  SetState e_min;
  SetState e_max;
  /// Level-route solution, in the orientation of F (E_min = { u < -tau dx }).
  ScalarField u;
  ScalarField distance;  ///< sd^psi_F
  ScalarField forcing;   ///< F_h
  StepDiagnostics diagnostics;
};

/// T^-_{h,t} F and T^+_{h,t} F. A set touching the frame whose complement
/// is bounded is stepped through T^pm F = (T~^mp F^c)^c, with the reversed
/// anisotropies and the forcing -f.
StepResult atw_step(const SetState& f_set, double h, double t, const AnisotropyModel& phi,
                    const AnisotropyModel& psi, const Expression& forcing, const SolverOptions& options = {});

/// P_phi(E) + int_E g.
double energy(const SetState& e, const IncrementalProblem& prob);
/// Same with the affinity of a step: g = distance / h - forcing.
double energy(const SetState& e, const AnisotropyModel& phi, const ScalarField& distance,
              const ScalarField& forcing, double h);

struct DissipationReport {
  double lhs = 0.0;  ///< P_phi(E) + (1/h) int_{E sym F} |sd_F|
  double rhs = 0.0;  ///< P_phi(F) + int_{E \ F} F_h - int_{F \ E} F_h
  double slack() const { return lhs - rhs; }
};

DissipationReport dissipation_check(const SetState& f_set, const SetState& e, const AnisotropyModel& phi,
                                    const ScalarField& distance, const ScalarField& forcing, double h);
DissipationReport dissipation_check(const SetState& f_set, const StepResult& step, const AnisotropyModel& phi,
                                    double h);

struct CurvatureSample {
  Vec2 x;
  Vec2 normal;
  double curvature = 0.0;
};

/// phi-curvature at the midpoints of the boundary segments of { level < 0 },
/// from a least-squares quadratic fit of the level function on a 5x5 window.
std::vector<CurvatureSample> fitted_curvature(const ScalarField& level, const AnisotropyModel& phi);

struct ResidualStats {
  bool computed = false;  ///< false when fewer than 8 boundary points
  std::size_t count = 0;
  double median_abs = 0.0;
  double max_abs = 0.0;
  double mean = 0.0;
};

/// r(x) = H^phi_E(x) + sd^psi_F(x) / h - F_h(x, t) at the boundary of E_min.
ResidualStats euler_lagrange_residual(const StepResult& step, const AnisotropyModel& phi, double h);

ResidualStats summarize(std::vector<double> values);

}  // namespace atwflow
