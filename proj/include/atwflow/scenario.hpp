#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "atwflow/level_set_scheme.hpp"

namespace atwflow {

/// Thresholds used by `verify`; every value can be overridden in the
/// "verify" object of a scenario.
struct VerifyTolerances {
  double dissipation_slack = 0.02;  ///< fraction of P_phi(E_0)
  double eikonal_median = 0.05;
  double sandwich_violation = 0.03;
  double submodularity_slack = 1e-9;
  std::size_t comparison_cells = 0;
  std::size_t nesting_corrections = 0;
};

struct LevelsetSpec {
  int levels = 32;
  LadderVariant variant = LadderVariant::LowerMinus;
  /// Initial function; without it u0 = -level of the initial set.
  std::optional<ScalarField> u0;
  std::optional<double> floor;
};

/// A fully deterministic run description.
struct Scenario {
  std::string name;
  Grid grid;
  AnisotropyModel phi = make_euclidean();
  AnisotropyModel psi = make_euclidean();
  Expression forcing{0.0};
  SetState initial;
  /// Second initial set run alongside for the comparison check.
  std::optional<SetState> companion;
  double h = 1e-3;
  double horizon = 0.0;
  int record_stride = 1;
  SolverOptions solver;
  int margin_cells = 4;
  bool full_diagnostics = true;
  LevelsetSpec levelset;
  VerifyTolerances verify;
  /// Canonical JSON text (sorted keys, no whitespace) the scenario was built from.
  std::string canonical;
  /// FNV-1a 64 of the canonical text and of every file it references.
  std::uint64_t hash = 0;

  FlowConfig config() const;
};

/// Schema violations throw InputError with the JSON path of the field,
/// e.g. "$.phi.family: unknown family 'foo'". Relative file paths are
/// resolved against `base_dir`. With `build_sets` false the initial and
/// companion sets are not constructed (used when replaying stored frames).
Scenario parse_scenario(const std::string& json_text, const std::string& base_dir = ".", bool build_sets = true);
Scenario load_scenario(const std::string& path, bool build_sets = true);

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed = 14695981039346656037ull);
std::string hex64(std::uint64_t v);

}  // namespace atwflow
