#include "atwflow/level_set_scheme.hpp"

#include <algorithm>
#include <cmath>
#include <future>

#include "atwflow/error.hpp"

namespace atwflow {

std::string to_string(LadderVariant v) { return v == LadderVariant::UpperPlus ? "plus" : "minus"; }

namespace {

SetState superlevel(const ScalarField& u, double s, LadderVariant variant) {
  ScalarField l(u.grid);
  const double eps = variant == LadderVariant::UpperPlus ? 1e-12 * std::max(1.0, std::abs(s)) : 0.0;
  for (std::size_t k = 0; k < l.values.size(); ++k) l[k] = s - u[k] - eps;
  return SetState::from_level(std::move(l));
}

}  // namespace

LevelLadder make_ladder(const ScalarField& u0, int m, LadderVariant variant) {
  if (m < 1) throw InputError("ladder needs at least one level");
  auto [lo_it, hi_it] = std::minmax_element(u0.values.begin(), u0.values.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) throw InputError("initial level-set function is constant");
  std::vector<double> levels;
  const double ds = (hi - lo) / m;
  for (int i = 0; i < m; ++i) levels.push_back(lo + (i + 0.5) * ds);
  return make_ladder(u0, levels, lo, variant);
}

LevelLadder make_ladder(const ScalarField& u0, const std::vector<double>& levels, double floor,
                        LadderVariant variant) {
  if (levels.empty()) throw InputError("ladder needs at least one level");
  for (std::size_t i = 1; i < levels.size(); ++i)
    if (!(levels[i] > levels[i - 1])) throw InputError("ladder levels must increase strictly");
  if (floor > levels.front()) throw InputError("ladder floor above the first level");
  LevelLadder l;
  l.variant = variant;
  l.levels = levels;
  l.floor = floor;
  for (double s : levels) l.sets.push_back(superlevel(u0, s, variant));
  return l;
}

LevelLadder levelset_step(const LevelLadder& ladder, double h, double t, const FlowConfig& config,
                          LadderStepReport* report) {
  const std::size_t m = ladder.sets.size();
  std::vector<StepResult> res(m);
  auto job = [&](std::size_t i) {
    try {
      return atw_step(ladder.sets[i], h, t, config.phi, config.psi, config.forcing, config.solver);
    } catch (const SolverError& e) {
      throw SolverError("level " + std::to_string(i) + ": " + e.what(), e.residual());
    }
  };
  const std::size_t cap = worker_limit();
  for (std::size_t first = 0; first < m; first += cap) {
    const std::size_t last = std::min(m, first + cap);
    if (last - first == 1) {
      res[first] = job(first);
      continue;
    }
    std::vector<std::future<StepResult>> batch;
    for (std::size_t i = first; i < last; ++i) batch.push_back(std::async(std::launch::async, job, i));
    for (std::size_t i = first; i < last; ++i) res[i] = batch[i - first].get();
  }
  LadderStepReport rep;
  LevelLadder out;
  out.variant = ladder.variant;
  out.levels = ladder.levels;
  out.floor = ladder.floor;
  for (std::size_t i = 0; i < m; ++i) {
    StepResult& r = res[i];
    rep.iterations += r.diagnostics.iterations;
    rep.plateau += r.diagnostics.fattening;
    if (r.diagnostics.complement_route) ++rep.complement_levels;
    SetState s = ladder.variant == LadderVariant::UpperPlus ? std::move(r.e_max) : std::move(r.e_min);
    if (i > 0) {
      const SetState& below = out.sets.back();
      ScalarField l = s.level();
      std::size_t fixes = 0;
      for (std::size_t k = 0; k < l.values.size(); ++k) {
        if (s.inside(k) && !below.inside(k)) ++fixes;
        l[k] = std::max(l[k], below.level()[k]);
      }
      if (fixes > 0) {
        rep.corrections += fixes;
        s = SetState::from_level(std::move(l));
      }
    }
    out.sets.push_back(std::move(s));
  }
  if (report) *report = rep;
  return out;
}

ScalarField reconstruct(const LevelLadder& ladder) {
  if (ladder.sets.empty()) throw InputError("empty ladder");
  ScalarField u(ladder.sets.front().grid(), ladder.floor);
  for (std::size_t i = 0; i < ladder.sets.size(); ++i)
    for (std::size_t k = 0; k < u.values.size(); ++k)
      if (ladder.sets[i].inside(k)) u[k] = std::max(u[k], ladder.levels[i]);
  return u;
}

ScalarField reconstruct_interpolated(const LevelLadder& ladder) {
  ScalarField u = reconstruct(ladder);
  const std::size_t m = ladder.sets.size();
  for (std::size_t k = 0; k < u.values.size(); ++k) {
    std::size_t top = m;
    for (std::size_t i = 0; i < m; ++i)
      if (ladder.sets[i].inside(k)) top = i;
    if (top == m || top + 1 >= m) continue;
    double a = ladder.sets[top].level()[k], b = ladder.sets[top + 1].level()[k];
    if (!(b > a)) continue;
    double frac = std::clamp(-a / (b - a), 0.0, 1.0);
    u[k] = ladder.levels[top] + frac * (ladder.levels[top + 1] - ladder.levels[top]);
  }
  return u;
}

const LevelLadder& LevelSetTrace::at(double t) const {
  if (ladders.empty()) throw InputError("empty level-set trace");
  if (t < 0.0 || h <= 0.0) return ladders.front();
  auto k = static_cast<std::size_t>(std::floor(t / h + 1e-9));
  return ladders[std::min(k, ladders.size() - 1)];
}

LevelSetTrace run_levelset(const LevelLadder& initial, const FlowConfig& config) {
  if (!(config.h > 0.0)) throw InputError("time step h must be positive");
  LevelSetTrace tr;
  tr.h = config.h;
  tr.times.push_back(0.0);
  tr.ladders.push_back(initial);
  const auto steps = static_cast<int>(std::floor(config.horizon / config.h + 1e-9));
  for (int k = 1; k <= steps; ++k) {
    LadderStepReport rep;
    LevelLadder next = levelset_step(tr.ladders.back(), config.h, (k - 1) * config.h, config, &rep);
    tr.total_corrections += rep.corrections;
    tr.steps.push_back(rep);
    tr.times.push_back(k * config.h);
    tr.ladders.push_back(std::move(next));
  }
  return tr;
}

PdeResidualReport pde_residual(const std::vector<ScalarField>& frames, const std::vector<double>& times,
                               const AnisotropyModel& phi, const AnisotropyModel& psi, const Expression& forcing,
                               const ProbeRegion& probe, int stride, double min_gradient) {
  if (frames.size() != times.size()) throw InputError("frames and times differ in length");
  if (stride < 1) throw InputError("stride must be positive");
  PdeResidualReport rep;
  std::vector<double> r;
  for (std::size_t a = 0; a + stride < frames.size(); a += stride) {
    const ScalarField& u0 = frames[a];
    const ScalarField& u1 = frames[a + stride];
    const double tau = times[a + stride] - times[a];
    const double tm = 0.5 * (times[a] + times[a + stride]);
    rep.interval = tau;
    const Grid& g = u0.grid;
    const double dx = g.dx;
    auto um = [&](int i, int j) { return 0.5 * (u0(i, j) + u1(i, j)); };
    for (int j = 1; j < g.ny - 1; ++j) {
      for (int i = 1; i < g.nx - 1; ++i) {
        Vec2 x = g.center(i, j);
        double rad = (x - probe.center).norm();
        if (rad < probe.r_min || rad > probe.r_max) continue;
        Vec2 grad((um(i + 1, j) - um(i - 1, j)) / (2 * dx), (um(i, j + 1) - um(i, j - 1)) / (2 * dx));
        if (grad.norm() < min_gradient) {
          ++rep.degenerate_cells;
          continue;
        }
        Mat2 hess;
        hess(0, 0) = (um(i + 1, j) - 2 * um(i, j) + um(i - 1, j)) / (dx * dx);
        hess(1, 1) = (um(i, j + 1) - 2 * um(i, j) + um(i, j - 1)) / (dx * dx);
        hess(0, 1) = hess(1, 0) =
            (um(i + 1, j + 1) - um(i + 1, j - 1) - um(i - 1, j + 1) + um(i - 1, j - 1)) / (4 * dx * dx);
        double ut = (u1(i, j) - u0(i, j)) / tau;
        double hval = curvature(phi, x, grad, hess);
        r.push_back(ut + psi.value(x, -grad) * (hval - forcing(x.x(), x.y(), tm)));
      }
    }
  }
  rep.stats = summarize(std::move(r));
  return rep;
}

ScalarField cone_function(const Grid& grid, const Vec2& center, double radius, double floor) {
  return tabulate(grid, [&](const Vec2& x) { return std::max(radius - (x - center).norm(), floor); });
}

}  // namespace atwflow
