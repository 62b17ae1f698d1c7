#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "atwflow/scenario.hpp"

namespace atwflow {

/// Process exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitInput = 2, kExitSolver = 3, kExitVerification = 4 };

/// Frame files of one state, all named `<dir>/<stem>.*`:
///   .ind        uint8 indicator, row-major (row j = y, column i = x)
///   .level.f64  level function, little-endian float64, same order
///   .json       sidecar with shape, spacing, origin, step and time
///   .csv        boundary polylines "x,y", loops separated by a blank line
void write_frame(const std::string& dir, const std::string& stem, const SetState& e, int step, double time);
/// Reads the level file back; `time` and `step` receive the sidecar values.
SetState read_frame(const std::string& dir, const std::string& stem, double* time = nullptr, int* step = nullptr);

/// Raw little-endian float64 field plus `<path>.json` sidecar.
void write_field(const std::string& path, const ScalarField& f, int step, double time, const std::string& kind);
ScalarField read_field(const std::string& path, double* time = nullptr);

void write_polylines(const std::string& path, const ScalarField& level);
/// One row per step record.
void write_diagnostics(const std::string& path, const FlowTrace& trace);

/// Superlevel sets of a ladder as one uint8 file of m x ny x nx bytes,
/// plus a sidecar with the levels, floor and variant.
void write_ladder(const std::string& dir, const std::string& stem, const LevelLadder& ladder, int step,
                  double time);

std::string frame_stem(int step);

/// Fixed "%.17g" formatting used by every CSV and sidecar writer.
std::string format_number(double v);

/// Command implementations; messages go to `log`, errors to `err`. Each
/// returns an ExitCode.
int command_run(const std::string& scenario_path, const std::string& out_dir, std::ostream& log,
                std::ostream& err);
/// `variant` is "plus", "minus" or "both"; empty keeps the scenario value.
int command_levelset(const std::string& scenario_path, const std::string& out_dir, std::optional<int> levels,
                     const std::string& variant, std::ostream& log, std::ostream& err);
/// Known checks: dissipation, comparison, nesting, ordering, holder, velocity,
/// laws, eikonal, submodularity, euler_lagrange. An empty list runs all of
/// them. Reports go to `out_dir` (the trace directory when empty).
int command_verify(const std::string& trace_dir, const std::vector<std::string>& checks,
                   const std::string& out_dir, std::ostream& log, std::ostream& err);
int command_convergence(const std::string& scenario_path, const std::vector<double>& ladder,
                        const std::string& out_dir, std::ostream& log, std::ostream& err);

std::vector<std::string> known_checks();

}  // namespace atwflow
