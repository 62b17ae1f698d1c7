#pragma once

#include <string>
#include <vector>

#include "atwflow/incremental_solver.hpp"

namespace atwflow {

struct FlowConfig {
  AnisotropyModel phi = make_euclidean();
  AnisotropyModel psi = make_euclidean();
  Expression forcing{0.0};
  double h = 1e-3;
  double horizon = 0.0;
  SolverOptions solver;
  /// Abort when the set (or the complement of a co-bounded set) comes within
  /// this many cells of the frame; negative disables the check.
  int margin_cells = 4;
  /// Per-step Euler-Lagrange statistics, Hausdorff distances and boundary
  /// velocity samples.
  bool full_diagnostics = true;
};

/// Boundary point of E_k with the discrete velocity v_h = sd_{E_{k-1}} / h.
struct BoundarySample {
  Vec2 x;
  Vec2 normal;
  double length = 0.0;
  double v = 0.0;
};

/// Diagnostics of the step producing state k from state k - 1.
struct StepRecord {
  int step = 0;
  double time = 0.0;
  double energy = 0.0;     ///< P_phi(E_k) + int_{E_k} (sd_{k-1}/h - F_h)
  double perimeter = 0.0;  ///< P_phi(E_k)
  double area = 0.0;
  double symdiff = 0.0;    ///< |E_k sym E_{k-1}|
  double hausdorff = 0.0;  ///< between the boundaries of E_k and E_{k-1}
  DissipationReport dissipation;
  ResidualStats el;
  int iterations = 0;
  double gap = 0.0;
  int sweeps = 0;
  double fattening = 0.0;
  double v_sup = 0.0;         ///< sup |sd_{k-1}| / h over E_k sym E_{k-1}
  double v_l2_boundary = 0.0; ///< int over the boundary of E_k of v_h^2
  bool complement_route = false;
  /// Segment midpoints of the boundary of E_k (with full diagnostics).
  std::vector<BoundarySample> boundary;
};

enum class FlowStatus { Completed, Extinct, MarginAbort, SolverAbort };
std::string to_string(FlowStatus s);

/// States at t_k = k h; E_t = states[k] for t in [t_k, t_{k+1}).
struct FlowTrace {
  double h = 0.0;
  std::vector<double> times;
  std::vector<SetState> states;
  std::vector<StepRecord> steps;  ///< steps[k - 1] produced states[k]
  double initial_perimeter = 0.0;
  double initial_area = 0.0;
  FlowStatus status = FlowStatus::Completed;
  std::string message;
  int failed_step = -1;

  const SetState& at(double t) const;
};

/// Iterates E_k = T^-_{h, t_{k-1}} E_{k-1} up to the horizon. Stops early on
/// extinction, on a margin violation or on a solver failure; the trace keeps
/// every state computed so far and records the reason. Deterministic.
FlowTrace run(const SetState& initial, const FlowConfig& config);

/// Rebuilds the step records of a stored trace of consecutive states t_k = k h:
/// distances and forcing averages are recomputed, solver statistics stay zero.
FlowTrace replay(const std::vector<SetState>& states, const std::vector<double>& times, const FlowConfig& config);
/// Cells inside a state of `inner` but outside the matching state of `outer`,
/// per common time index.
std::vector<std::size_t> comparison_violations(const FlowTrace& inner, const FlowTrace& outer);

struct HolderReport {
  double holder_constant = 0.0;  ///< sup |E_s sym E_t| / sqrt(|t - s|)
  double perimeter_excess = 0.0; ///< max_t P_phi(E_t) - P_phi(E_0)
  /// Smallest K >= 0 with P(E_k) + D_k / 2 <= (1 + K h) P(E_{k-1}) for all k,
  /// D_k = (1/h) int_{E_k sym E_{k-1}} |sd_{k-1}|.
  double growth_rate = 0.0;
  /// max over k of P(E_k) / ((1 + K h)^(k-1) P(E_1)).
  double envelope_ratio = 0.0;
  std::size_t pairs = 0;
};

/// Pairs are taken among at most `max_states` evenly spaced states.
HolderReport holder_report(const FlowTrace& trace, std::size_t max_states = 48);

struct RefinementReport {
  std::vector<double> ladder;
  std::vector<double> common_times;
  /// gaps[r][i]: |E^{(h_r)} sym E^{(h_{r+1})}| at common_times[i].
  std::vector<std::vector<double>> gaps;
  /// True when gaps decrease strictly from one ladder pair to the next at every
  /// common time after t = 0.
  bool strictly_decreasing = false;
};

/// Runs the flow for every h in the ladder (concurrently, at most
/// ATWFLOW_THREADS workers) and compares consecutive rungs at the times
/// common to all of them. `traces` receives the runs when not null.
RefinementReport refinement_study(const SetState& initial, const FlowConfig& config,
                                  const std::vector<double>& ladder, std::vector<FlowTrace>* traces = nullptr);

/// Compares precomputed traces, ordered from the coarsest to the finest h.
RefinementReport refinement_report(const std::vector<const FlowTrace*>& traces);

struct VelocityReport {
  std::vector<double> sup;            ///< per step sup |v_h|
  double sup_sqrt_h = 0.0;            ///< max over steps of sup |v_h| sqrt(h)
  double l2 = 0.0;                    ///< int_0^T int_{boundary} v_h^2
};

VelocityReport velocity_report(const FlowTrace& trace);

/// v_h = sd_{E_{k-1}} / h on the cells of E_k sym E_{k-1}, zero elsewhere,
/// for every step k of the trace.
std::vector<ScalarField> velocity_fields(const FlowTrace& trace, const AnisotropyModel& psi,
                                         const DistanceOptions& options = {});

/// Worker cap from ATWFLOW_THREADS (default: hardware concurrency, at least 1).
unsigned worker_limit();

}  // namespace atwflow
