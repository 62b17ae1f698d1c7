#pragma once

#include <functional>
#include <string>
#include <vector>

#include "atwflow/flow_driver.hpp"

namespace atwflow {

/// Weak phi-curvature of a set: H piecewise linear in arclength along every
/// boundary chain, with nodal values fitted in the least-squares sense to
///   int div_phi X = int H nu . X,   div_phi X = grad_x phi . X + phi div_tau X,
/// for the test fields X = b e_1, b e_2 over cubic bumps b on two lattices.
struct WeakCurvatureFit {
  std::vector<Vec2> points;      ///< boundary segment midpoints
  std::vector<Vec2> normals;
  std::vector<double> lengths;
  std::vector<double> curvature; ///< fitted H at the points
  double coarse_spacing = 0.0;   ///< lattice spacing of the coarse test fields
  double fine_spacing = 0.0;     ///< lattice spacing of the fine test fields, node spacing of H
  std::size_t unknowns = 0;
  std::size_t equations = 0;
  int rank = 0;
  double residual = 0.0;         ///< relative least-squares residual
};

struct WeakCurvatureOptions {
  /// Coarse lattice spacing; zero picks an eighth of the shorter box side.
  double coarse_spacing = 0.0;
  std::size_t min_points = 32;
};

/// Throws DegenerateSetError with fewer than `min_points` boundary segments.
WeakCurvatureFit weak_curvature(const SetState& e, const AnisotropyModel& phi,
                                const WeakCurvatureOptions& options = {});

/// Pointwise phi-curvature of { level < 0 } from the level function and its
/// first and second derivatives.
double pointwise_curvature(const AnisotropyModel& phi, const Vec2& x, const Vec2& grad_level,
                           const Mat2& hess_level);

/// Space-time test function eta(x, t).
struct TestFunction {
  std::string name;
  std::function<double(const Vec2&, double)> eta;
};

/// Radial and tilted bumps around `center`, vanishing at t = horizon.
std::vector<TestFunction> default_test_functions(const Vec2& center, double radius, double horizon);

struct LawDefect {
  std::string test;
  double lhs = 0.0;
  double rhs = 0.0;
  double defect = 0.0;  ///< |lhs - rhs| / max(|lhs|, |rhs|), 0 when both vanish
};

struct DistributionalReport {
  std::vector<LawDefect> curvature_law;  ///< -int int v eta  vs  int int (H - f) eta
  std::vector<LawDefect> velocity_law;   ///< int int_{E_t} eta_t + int_{E_0} eta(0)  vs  -int int psi v eta
  double curvature_defect = 0.0;         ///< max over the tests
  double velocity_defect = 0.0;
  double curvature_l2 = 0.0;             ///< int_0^T int (H^phi)^2
  double velocity_l2 = 0.0;              ///< int_0^T int v_h^2
};

/// Needs a trace run with full diagnostics and at least 3 steps. The laws are
/// evaluated over [0, t_K] for the piecewise constant discrete flow.
DistributionalReport distributional_laws_check(const FlowTrace& trace, const AnisotropyModel& phi,
                                               const AnisotropyModel& psi, const Expression& forcing,
                                               const std::vector<TestFunction>& tests);

/// Smooth shape { level < 0 } given by a twice differentiable level function.
struct ImplicitShape {
  std::function<double(const Vec2&)> level;
};

struct MonotonicityReport {
  double inner_curvature = 0.0;  ///< H of the smaller set E at x
  double outer_curvature = 0.0;  ///< H of the larger set F at x
  double normal_mismatch = 0.0;  ///< |nu_E(x) - nu_F(x)|
  bool holds = false;            ///< H_F(x) <= H_E(x) + tolerance
};

/// E inside F, both boundaries through x. Derivatives by central differences
/// with step `step`.
MonotonicityReport monotonicity_check(const ImplicitShape& inner, const ImplicitShape& outer, const Vec2& x,
                                      const AnisotropyModel& phi, double tolerance = 1e-6, double step = 1e-4);

/// Discrete anisotropic total variation of the indicator of E with forward
/// differences: sum over cells of dx phi(x, (chi(i+1,j) - chi, chi(i,j+1) - chi)).
double discrete_perimeter(const SetState& e, const AnisotropyModel& phi);

struct SubmodularityReport {
  double union_plus_intersection = 0.0;
  double sum = 0.0;
  double slack() const { return union_plus_intersection - sum; }
};

/// P(E u F) + P(E n F) against P(E) + P(F). The discrete form is exactly
/// submodular; the interface quadrature form up to quadrature error.
SubmodularityReport submodularity_check(const SetState& a, const SetState& b, const AnisotropyModel& phi,
                                        bool discrete = true);

/// One row per check: name, status (pass, fail or info), measured value,
/// threshold and whether a failure is fatal.
struct CheckRow {
  std::string name;
  std::string status;
  double measured = 0.0;
  double threshold = 0.0;
  bool hard = false;
  std::string note;
};

class VerificationReport {
 public:
  void add(const std::string& name, double measured, double threshold, bool pass, bool hard,
           const std::string& note = {});
  void info(const std::string& name, double measured, const std::string& note = {});

  const std::vector<CheckRow>& rows() const { return rows_; }
  bool hard_failure() const;

  void write_markdown(const std::string& path, const std::string& title) const;
  void write_csv(const std::string& path) const;

 private:
  std::vector<CheckRow> rows_;
};

}  // namespace atwflow
