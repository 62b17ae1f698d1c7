#include "atwflow/incremental_solver.hpp"

#include <algorithm>
#include <cmath>

#include "atwflow/error.hpp"

namespace atwflow {

ScalarField forcing_average(const Grid& grid, const Expression& f, double t, double h, int samples) {
  if (samples < 1) throw InputError("forcing quadrature needs at least one sample");
  if (f.is_constant()) return ScalarField(grid, f(0.0, 0.0, 0.0));
  return tabulate(grid, [&](const Vec2& x) {
    double acc = 0.0;
    for (int m = 0; m < samples; ++m) acc += f(x.x(), x.y(), t + (m + 0.5) * h / samples);
    return acc / samples;
  });
}

IncrementalProblem make_problem(const SetState& f_set, double h, double t, const AnisotropyModel& phi,
                                const AnisotropyModel& psi, const Expression& forcing,
                                const SolverOptions& options) {
  if (!(h > 0.0)) throw InputError("time step h must be positive");
  IncrementalProblem p;
  p.phi = phi;
  p.h = h;
  p.options = options;
  DistanceField sd = signed_distance(f_set, psi, options.distance);
  p.distance = std::move(sd.values);
  p.sweeps = sd.sweeps;
  p.forcing = forcing_average(f_set.grid(), forcing, t, h, options.forcing_samples);
  p.g = ScalarField(f_set.grid());
  for (std::size_t k = 0; k < p.g.values.size(); ++k) p.g[k] = p.distance[k] / h - p.forcing[k];
  return p;
}

namespace {

// Forward differences with homogeneous Neumann conditions and the negative
// adjoint divergence.
class GridOps {
 public:
  explicit GridOps(const Grid& g) : g_(g), inv_(1.0 / g.dx) {}

  void grad(const std::vector<double>& u, std::vector<double>& gx, std::vector<double>& gy) const {
    const int nx = g_.nx, ny = g_.ny;
    for (int j = 0; j < ny; ++j) {
      const std::size_t row = static_cast<std::size_t>(j) * nx;
      for (int i = 0; i < nx; ++i) {
        std::size_t k = row + i;
        gx[k] = i + 1 < nx ? (u[k + 1] - u[k]) * inv_ : 0.0;
        gy[k] = j + 1 < ny ? (u[k + nx] - u[k]) * inv_ : 0.0;
      }
    }
  }

  void div(const std::vector<double>& px, const std::vector<double>& py, std::vector<double>& out) const {
    const int nx = g_.nx, ny = g_.ny;
    for (int j = 0; j < ny; ++j) {
      const std::size_t row = static_cast<std::size_t>(j) * nx;
      for (int i = 0; i < nx; ++i) {
        std::size_t k = row + i;
        double d = (i + 1 < nx ? px[k] : 0.0) - (i > 0 ? px[k - 1] : 0.0);
        d += (j + 1 < ny ? py[k] : 0.0) - (j > 0 ? py[k - nx] : 0.0);
        out[k] = d * inv_;
      }
    }
  }

  double norm_squared_bound() const { return 8.0 * inv_ * inv_; }

 private:
  const Grid& g_;
  double inv_;
};

// Per-cell projection onto the Wulff shape { phi°(x_k, .) <= 1 }.
class DualProjector {
 public:
  DualProjector(const AnisotropyModel& phi, const Grid& g)
      : phi_(phi), euclid_(phi.family() == Family::Euclidean) {
    centers_.reserve(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) centers_.push_back(g.center(k));
  }

  void operator()(std::size_t k, double& zx, double& zy) const {
    if (euclid_) {
      double r = zx * zx + zy * zy;
      if (r > 1.0) {
        double s = 1.0 / std::sqrt(r);
        zx *= s;
        zy *= s;
      }
      return;
    }
    Vec2 p = phi_.project_dual(centers_[k], Vec2(zx, zy));
    zx = p.x();
    zy = p.y();
  }

  double value(std::size_t k, double px, double py) const {
    if (euclid_) return std::sqrt(px * px + py * py);
    return phi_.value(centers_[k], Vec2(px, py));
  }

  Vec2 direction(std::size_t k, double px, double py) const {
    if (px == 0.0 && py == 0.0) return Vec2::Zero();
    return phi_.grad_p(centers_[k], Vec2(px, py));
  }

 private:
  const AnisotropyModel& phi_;
  bool euclid_;
  std::vector<Vec2> centers_;
};

double total_variation(const DualProjector& proj, const std::vector<double>& gx, const std::vector<double>& gy) {
  double acc = 0.0;
  for (std::size_t k = 0; k < gx.size(); ++k) acc += proj.value(k, gx[k], gy[k]);
  return acc;
}

}  // namespace

RelaxedSolution solve_relaxed(const IncrementalProblem& prob) {
  const Grid& grid = prob.g.grid;
  const std::size_t n = grid.size();
  const double area = grid.cell_area();
  GridOps ops(grid);
  DualProjector proj(prob.phi, grid);
  const std::vector<double>& g = prob.g.values;

  std::vector<double> w(n), wbar(n), wold(n), xx(n, 0.0), xy(n, 0.0), gx(n), gy(n), dv(n);
  for (std::size_t k = 0; k < n; ++k) w[k] = g[k] < 0.0 ? 1.0 : 0.0;
  wbar = w;
  const double step = 1.0 / std::sqrt(ops.norm_squared_bound());
  const double tau = step, sigma = step;

  RelaxedSolution sol;
  double gap = std::numeric_limits<double>::infinity(), primal = 0.0;
  int it = 0;
  for (; it < prob.options.max_iterations; ++it) {
    ops.grad(wbar, gx, gy);
    for (std::size_t k = 0; k < n; ++k) {
      xx[k] += sigma * gx[k];
      xy[k] += sigma * gy[k];
      proj(k, xx[k], xy[k]);
    }
    ops.div(xx, xy, dv);
    wold = w;
    for (std::size_t k = 0; k < n; ++k) {
      w[k] = std::clamp(w[k] + tau * (dv[k] - g[k]), 0.0, 1.0);
      wbar[k] = 2.0 * w[k] - wold[k];
    }
    if ((it + 1) % 10 == 0 || it + 1 == prob.options.max_iterations) {
      ops.grad(w, gx, gy);
      primal = total_variation(proj, gx, gy);
      double dual = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        primal += g[k] * w[k];
        dual += std::min(0.0, g[k] - dv[k]);
      }
      primal *= area;
      dual *= area;
      gap = (primal - dual) / std::max(1.0, std::abs(primal));
      if (gap < prob.options.tolerance) {
        ++it;
        break;
      }
    }
  }
  sol.w = ScalarField(grid);
  sol.w.values = std::move(w);
  sol.xi = {std::move(xx), std::move(xy)};
  sol.gap = gap;
  sol.primal = primal;
  sol.iterations = it;
  if (!(gap < prob.options.tolerance))
    throw SolverError("relaxed primal-dual iteration did not reach the gap tolerance", gap);
  return sol;
}

ThresholdPair threshold(const RelaxedSolution& sol, double tau) {
  ScalarField lo(sol.w.grid), hi(sol.w.grid);
  for (std::size_t k = 0; k < lo.values.size(); ++k) {
    // One ulp down so that w = 1 - tau counts as inside.
    lo[k] = std::nextafter((1.0 - tau) - sol.w[k], -1.0);
    hi[k] = tau - sol.w[k];
  }
  return {SetState::from_level(std::move(lo)), SetState::from_level(std::move(hi))};
}

LevelSolution solve_level(const IncrementalProblem& prob) {
  const Grid& grid = prob.g.grid;
  const std::size_t n = grid.size();
  const double h = prob.h;
  const double area = grid.cell_area();
  GridOps ops(grid);
  DualProjector proj(prob.phi, grid);

  std::vector<double> f(n), u(n), ubar, uold(n), xx(n, 0.0), xy(n, 0.0), gx(n), gy(n), dv(n), cand(n);
  for (std::size_t k = 0; k < n; ++k) f[k] = h * prob.g[k];
  u = f;
  ubar = u;
  // Warm start: the calibration of the data's own level lines.
  ops.grad(f, gx, gy);
  for (std::size_t k = 0; k < n; ++k) {
    Vec2 d = proj.direction(k, gx[k], gy[k]);
    xx[k] = d.x();
    xy[k] = d.y();
    proj(k, xx[k], xy[k]);
  }

  double tau = h;
  double sigma = 1.0 / (tau * ops.norm_squared_bound());
  const double gamma = 1.0 / h;

  LevelSolution sol;
  double gap = std::numeric_limits<double>::infinity(), primal = 0.0;
  bool use_candidate = false;
  int it = 0;
  auto primal_value = [&](const std::vector<double>& v) {
    ops.grad(v, gx, gy);
    double acc = total_variation(proj, gx, gy);
    double fid = 0.0;
    for (std::size_t k = 0; k < n; ++k) fid += (v[k] - f[k]) * (v[k] - f[k]);
    return area * (acc + 0.5 * fid / h);
  };
  for (; it < prob.options.max_iterations; ++it) {
    ops.grad(ubar, gx, gy);
    for (std::size_t k = 0; k < n; ++k) {
      xx[k] += sigma * gx[k];
      xy[k] += sigma * gy[k];
      proj(k, xx[k], xy[k]);
    }
    ops.div(xx, xy, dv);
    uold = u;
    const double a = tau / h;
    for (std::size_t k = 0; k < n; ++k) u[k] = (u[k] + tau * dv[k] + a * f[k]) / (1.0 + a);
    const double theta = 1.0 / std::sqrt(1.0 + 2.0 * gamma * tau);
    tau *= theta;
    sigma /= theta;
    for (std::size_t k = 0; k < n; ++k) ubar[k] = u[k] + theta * (u[k] - uold[k]);

    if ((it + 1) % 10 == 0 || it + 1 == prob.options.max_iterations) {
      double dual = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        dual -= dv[k] * f[k] + 0.5 * h * dv[k] * dv[k];
        cand[k] = f[k] + h * dv[k];
      }
      dual *= area;
      double p_u = primal_value(u);
      double p_c = primal_value(cand);
      use_candidate = p_c < p_u;
      primal = std::min(p_u, p_c);
      gap = (primal - dual) / std::max(1.0, std::abs(primal));
      if (gap < prob.options.tolerance) {
        ++it;
        break;
      }
    }
  }
  sol.u = ScalarField(grid);
  sol.u.values = use_candidate ? std::move(cand) : std::move(u);
  sol.xi = {std::move(xx), std::move(xy)};
  sol.gap = gap;
  sol.primal = primal;
  sol.iterations = it;
  if (!(gap < prob.options.tolerance))
    throw SolverError("primal-dual iteration did not reach the gap tolerance", gap);
  return sol;
}

ThresholdPair threshold(const LevelSolution& sol, double tau) {
  const double eta = tau * sol.u.grid.dx;
  ScalarField lo = sol.u, hi = sol.u;
  const double below = std::nextafter(0.0, -1.0);
  for (double& v : lo.values)
    if (v >= -eta) v = std::max(v, 0.0);
  for (double& v : hi.values)
    if (v <= eta) v = std::min(v, below);
  return {SetState::from_level(std::move(lo)), SetState::from_level(std::move(hi))};
}

namespace {

StepResult step_direct(const SetState& f_set, double h, double t, const AnisotropyModel& phi,
                       const AnisotropyModel& psi, const Expression& forcing, const SolverOptions& options) {
  IncrementalProblem prob = make_problem(f_set, h, t, phi, psi, forcing, options);
  LevelSolution lvl = solve_level(prob);
  ThresholdPair pair = threshold(lvl, options.threshold);
  StepResult r;
  r.diagnostics.iterations = lvl.iterations;
  r.diagnostics.gap = lvl.gap;
  r.diagnostics.sweeps = prob.sweeps;
  if (f_set.bounded()) {
    const Grid& g = f_set.grid();
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i)
        if ((i == 0 || j == 0 || i == g.nx - 1 || j == g.ny - 1) && !(prob.g(i, j) > 0.0))
          r.diagnostics.frame_coercive = false;
  }
  r.e_min = std::move(pair.e_min);
  r.e_max = std::move(pair.e_max);
  r.u = std::move(lvl.u);
  r.distance = std::move(prob.distance);
  r.forcing = std::move(prob.forcing);
  return r;
}

}  // namespace

StepResult atw_step(const SetState& f_set, double h, double t, const AnisotropyModel& phi,
                    const AnisotropyModel& psi, const Expression& forcing, const SolverOptions& options) {
  if (!(h > 0.0)) throw InputError("time step h must be positive");
  StepResult r;
  if (f_set.empty() || f_set.full()) {
    r.e_min = f_set;
    r.e_max = f_set;
    r.u = f_set.level();
    r.distance = ScalarField(f_set.grid(), 0.0);
    r.forcing = forcing_average(f_set.grid(), forcing, t, h, options.forcing_samples);
    r.diagnostics.degenerate = true;
    return r;
  }
  if (!f_set.bounded() && f_set.co_bounded()) {
    StepResult c = step_direct(f_set.complement(), h, t, phi.reversed(), psi.reversed(), -forcing, options);
    r.e_min = c.e_max.complement();
    r.e_max = c.e_min.complement();
    r.u = std::move(c.u);
    for (double& v : r.u.values) v = -v;
    r.distance = std::move(c.distance);
    for (double& v : r.distance.values) v = -v;
    r.forcing = std::move(c.forcing);
    for (double& v : r.forcing.values) v = -v;
    r.diagnostics = c.diagnostics;
    r.diagnostics.complement_route = true;
  } else {
    r = step_direct(f_set, h, t, phi, psi, forcing, options);
  }
  r.diagnostics.fattening = symmetric_difference(r.e_min, r.e_max);
  return r;
}

double energy(const SetState& e, const AnisotropyModel& phi, const ScalarField& distance,
              const ScalarField& forcing, double h) {
  double bulk = 0.0;
  box_quadrature(e.level(), nullptr, kDefaultSubsamples, [&](const Vec2& x, double w, double l, double) {
    if (l < 0.0) bulk += w * (distance.sample(x) / h - forcing.sample(x));
  });
  return perimeter(e, phi) + bulk;
}

double energy(const SetState& e, const IncrementalProblem& prob) {
  return energy(e, prob.phi, prob.distance, prob.forcing, prob.h);
}

DissipationReport dissipation_check(const SetState& f_set, const SetState& e, const AnisotropyModel& phi,
                                    const ScalarField& distance, const ScalarField& forcing, double h) {
  DissipationReport rep;
  double dis = 0.0, force = 0.0;
  box_quadrature(e.level(), &f_set.level(), kDefaultSubsamples,
                 [&](const Vec2& x, double w, double le, double lf) {
                   bool in_e = le < 0.0, in_f = lf < 0.0;
                   if (in_e == in_f) return;
                   dis += w * std::abs(distance.sample(x));
                   force += (in_e ? w : -w) * forcing.sample(x);
                 });
  rep.lhs = perimeter(e, phi) + dis / h;
  rep.rhs = perimeter(f_set, phi) + force;
  return rep;
}

DissipationReport dissipation_check(const SetState& f_set, const StepResult& step, const AnisotropyModel& phi,
                                    double h) {
  return dissipation_check(f_set, step.e_min, phi, step.distance, step.forcing, h);
}

std::vector<CurvatureSample> fitted_curvature(const ScalarField& level, const AnisotropyModel& phi) {
  const Grid& g = level.grid;
  std::vector<CurvatureSample> out;
  if (g.nx < 5 || g.ny < 5) return out;
  // Least-squares quadratic on the 5x5 window, in units of dx around the
  // window center: l ~ c0 + c1 s + c2 r + c3 s^2/2 + c4 s r + c5 r^2/2.
  Eigen::Matrix<double, 25, 6> a;
  for (int q = -2, row = 0; q <= 2; ++q)
    for (int p = -2; p <= 2; ++p, ++row) a.row(row) << 1.0, p, q, 0.5 * p * p, p * q, 0.5 * q * q;
  Eigen::Matrix<double, 6, 25> pinv = (a.transpose() * a).inverse() * a.transpose();
  for (const Segment& s : extract_interface(level)) {
    Vec2 x = s.midpoint();
    int ic = static_cast<int>(std::floor((x.x() - g.origin.x()) / g.dx));
    int jc = static_cast<int>(std::floor((x.y() - g.origin.y()) / g.dx));
    ic = std::clamp(ic, 2, g.nx - 3);
    jc = std::clamp(jc, 2, g.ny - 3);
    Eigen::Matrix<double, 25, 1> v;
    for (int q = -2, row = 0; q <= 2; ++q)
      for (int p = -2; p <= 2; ++p, ++row) v[row] = level(ic + p, jc + q);
    Eigen::Matrix<double, 6, 1> c = pinv * v;
    Vec2 off = (x - g.center(ic, jc)) / g.dx;
    Mat2 hess;
    hess << c[3], c[4], c[4], c[5];
    Vec2 grad = Vec2(c[1], c[2]) + hess * off;
    grad /= g.dx;
    hess /= g.dx * g.dx;
    if (grad.norm() == 0.0) continue;
    // E = { l < 0 } is the superlevel set { -l >= 0 }.
    out.push_back({x, s.normal, curvature(phi, x, -grad, -hess)});
  }
  return out;
}

ResidualStats summarize(std::vector<double> values) {
  ResidualStats st;
  st.count = values.size();
  if (values.size() < 8) return st;
  st.computed = true;
  double sum = 0.0;
  std::vector<double> mags;
  mags.reserve(values.size());
  for (double v : values) {
    sum += v;
    mags.push_back(std::abs(v));
  }
  st.mean = sum / values.size();
  st.max_abs = *std::max_element(mags.begin(), mags.end());
  std::nth_element(mags.begin(), mags.begin() + mags.size() / 2, mags.end());
  st.median_abs = mags[mags.size() / 2];
  return st;
}

ResidualStats euler_lagrange_residual(const StepResult& step, const AnisotropyModel& phi, double h) {
  std::vector<double> r;
  for (const CurvatureSample& c : fitted_curvature(step.u, phi))
    r.push_back(c.curvature + step.distance.sample(c.x) / h - step.forcing.sample(c.x));
  return summarize(std::move(r));
}

}  // namespace atwflow
