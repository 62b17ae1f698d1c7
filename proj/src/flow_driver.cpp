#include "atwflow/flow_driver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <future>
#include <limits>
#include <thread>

#include "atwflow/error.hpp"

namespace atwflow {

std::string to_string(FlowStatus s) {
  switch (s) {
    case FlowStatus::Completed: return "completed";
    case FlowStatus::Extinct: return "extinct";
    case FlowStatus::MarginAbort: return "margin_abort";
    case FlowStatus::SolverAbort: return "solver_abort";
  }
  return "unknown";
}

const SetState& FlowTrace::at(double t) const {
  if (states.empty()) throw InputError("empty flow trace");
  if (t < 0.0 || h <= 0.0) return states.front();
  auto k = static_cast<std::size_t>(std::floor(t / h + 1e-9));
  return states[std::min(k, states.size() - 1)];
}

namespace {

bool margin_violated(const SetState& s, int cells) {
  if (cells < 0 || s.empty()) return false;
  if (!s.bounded() && !s.co_bounded()) return true;
  return s.frame_margin() < cells;
}

double boundary_velocity_l2(const SetState& e, const ScalarField& distance, double h) {
  double acc = 0.0;
  for (const Segment& s : extract_interface(e.level())) {
    double v = distance.sample(s.midpoint()) / h;
    acc += v * v * s.length();
  }
  return acc;
}

double velocity_sup(const SetState& prev, const SetState& next, const ScalarField& distance, double h) {
  double sup = 0.0;
  for (std::size_t k = 0; k < prev.indicator().size(); ++k)
    if (prev.inside(k) != next.inside(k)) sup = std::max(sup, std::abs(distance[k]) / h);
  return sup;
}

StepRecord describe_step(const SetState& prev, const StepResult& res, int k, const FlowConfig& config,
                         std::vector<Segment>& prev_boundary) {
  StepRecord rec;
  rec.step = k;
  rec.time = k * config.h;
  rec.perimeter = perimeter(res.e_min, config.phi);
  rec.energy = energy(res.e_min, config.phi, res.distance, res.forcing, config.h);
  rec.area = res.e_min.area();
  rec.symdiff = symmetric_difference(prev, res.e_min);
  rec.dissipation = dissipation_check(prev, res, config.phi, config.h);
  rec.iterations = res.diagnostics.iterations;
  rec.gap = res.diagnostics.gap;
  rec.sweeps = res.diagnostics.sweeps;
  rec.fattening = res.diagnostics.fattening;
  rec.complement_route = res.diagnostics.complement_route;
  rec.v_sup = velocity_sup(prev, res.e_min, res.distance, config.h);
  rec.v_l2_boundary = boundary_velocity_l2(res.e_min, res.distance, config.h);
  if (config.full_diagnostics) {
    std::vector<Segment> cur = extract_interface(res.e_min.level());
    rec.boundary.reserve(cur.size());
    for (const Segment& s : cur)
      rec.boundary.push_back({s.midpoint(), s.normal, s.length(), res.distance.sample(s.midpoint()) / config.h});
    rec.hausdorff = (cur.empty() && prev_boundary.empty()) ? 0.0 : hausdorff_distance(prev_boundary, cur);
    prev_boundary = std::move(cur);
    if (!res.e_min.empty()) rec.el = euler_lagrange_residual(res, config.phi, config.h);
  }
  return rec;
}

}  // namespace

FlowTrace run(const SetState& initial, const FlowConfig& config) {
  if (!(config.h > 0.0)) throw InputError("time step h must be positive");
  if (config.horizon < 0.0) throw InputError("horizon must be nonnegative");
  FlowTrace tr;
  tr.h = config.h;
  tr.times.push_back(0.0);
  tr.states.push_back(initial);
  tr.initial_perimeter = perimeter(initial, config.phi);
  tr.initial_area = initial.area();
  if (margin_violated(initial, config.margin_cells)) {
    tr.status = FlowStatus::MarginAbort;
    tr.failed_step = 0;
    tr.message = "initial set within " + std::to_string(config.margin_cells) + " cells of the frame";
    return tr;
  }
  if (initial.empty()) {
    tr.status = FlowStatus::Extinct;
    tr.message = "initial set is empty";
    return tr;
  }
  const auto steps = static_cast<int>(std::floor(config.horizon / config.h + 1e-9));
  std::vector<Segment> prev_boundary;
  if (config.full_diagnostics) prev_boundary = extract_interface(initial.level());
  for (int k = 1; k <= steps; ++k) {
    const SetState& prev = tr.states.back();
    const double t0 = (k - 1) * config.h;
    StepResult res;
    try {
      res = atw_step(prev, config.h, t0, config.phi, config.psi, config.forcing, config.solver);
    } catch (const SolverError& e) {
      tr.status = FlowStatus::SolverAbort;
      tr.failed_step = k;
      tr.message = e.what();
      return tr;
    }
    StepRecord rec = describe_step(prev, res, k, config, prev_boundary);
    tr.steps.push_back(rec);
    tr.times.push_back(rec.time);
    tr.states.push_back(std::move(res.e_min));
    const SetState& cur = tr.states.back();
    if (cur.empty()) {
      tr.status = FlowStatus::Extinct;
      tr.message = "extinct at step " + std::to_string(k);
      return tr;
    }
    if (margin_violated(cur, config.margin_cells)) {
      tr.status = FlowStatus::MarginAbort;
      tr.failed_step = k;
      tr.message = "set within " + std::to_string(config.margin_cells) + " cells of the frame at step " +
                   std::to_string(k);
      return tr;
    }
  }
  return tr;
}

FlowTrace replay(const std::vector<SetState>& states, const std::vector<double>& times, const FlowConfig& config) {
  if (states.empty() || states.size() != times.size()) throw InputError("replay needs matching states and times");
  if (!(config.h > 0.0)) throw InputError("time step h must be positive");
  FlowTrace tr;
  tr.h = config.h;
  tr.times = times;
  tr.states = states;
  tr.initial_perimeter = perimeter(states.front(), config.phi);
  tr.initial_area = states.front().area();
  std::vector<Segment> prev_boundary;
  if (config.full_diagnostics) prev_boundary = extract_interface(states.front().level());
  for (std::size_t k = 1; k < states.size(); ++k) {
    const SetState& prev = states[k - 1];
    if (prev.empty() || prev.full()) throw InputError("replay through an empty or full state");
    StepResult res;
    res.e_min = states[k];
    res.u = states[k].level();
    res.distance = signed_distance(prev, config.psi, config.solver.distance).values;
    res.forcing = forcing_average(prev.grid(), config.forcing, times[k - 1], config.h,
                                  config.solver.forcing_samples);
    tr.steps.push_back(describe_step(prev, res, static_cast<int>(k), config, prev_boundary));
    tr.steps.back().time = times[k];
  }
  if (states.back().empty()) tr.status = FlowStatus::Extinct;
  return tr;
}

namespace {

const SetState* state_or_extinct(const FlowTrace& tr, std::size_t i, bool& empty) {
  empty = i >= tr.states.size() && tr.status == FlowStatus::Extinct;
  return i < tr.states.size() ? &tr.states[i] : nullptr;
}

}  // namespace

std::vector<std::size_t> comparison_violations(const FlowTrace& inner, const FlowTrace& outer) {
  std::vector<std::size_t> out;
  const std::size_t n = std::max(inner.states.size(), outer.states.size());
  for (std::size_t i = 0; i < n; ++i) {
    bool in_empty = false, out_empty = false;
    const SetState* a = state_or_extinct(inner, i, in_empty);
    const SetState* b = state_or_extinct(outer, i, out_empty);
    if ((!a && !in_empty) || (!b && !out_empty)) break;
    std::size_t bad = 0;
    if (a) {
      for (std::size_t k = 0; k < a->indicator().size(); ++k)
        if (a->inside(k) && (!b || !b->inside(k))) ++bad;
    }
    out.push_back(bad);
  }
  return out;
}

HolderReport holder_report(const FlowTrace& trace, std::size_t max_states) {
  HolderReport rep;
  const std::size_t n = trace.states.size();
  if (n < 2) return rep;
  std::vector<std::size_t> idx;
  const std::size_t m = std::max<std::size_t>(2, std::min(max_states, n));
  for (std::size_t q = 0; q < m; ++q) {
    std::size_t i = static_cast<std::size_t>(std::llround(static_cast<double>(q) * (n - 1) / (m - 1)));
    if (idx.empty() || idx.back() != i) idx.push_back(i);
  }
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      double dt = trace.times[idx[b]] - trace.times[idx[a]];
      double d = symmetric_difference(trace.states[idx[a]], trace.states[idx[b]]);
      rep.holder_constant = std::max(rep.holder_constant, d / std::sqrt(dt));
      ++rep.pairs;
    }
  const double h = trace.h;
  double prev = trace.initial_perimeter;
  for (const StepRecord& s : trace.steps) {
    rep.perimeter_excess = std::max(rep.perimeter_excess, s.perimeter - trace.initial_perimeter);
    double dis = s.dissipation.lhs - s.perimeter;
    if (prev > 0.0) rep.growth_rate = std::max(rep.growth_rate, ((s.perimeter + 0.5 * dis) / prev - 1.0) / h);
    prev = s.perimeter;
  }
  if (!trace.steps.empty() && trace.steps.front().perimeter > 0.0) {
    const double p1 = trace.steps.front().perimeter;
    for (const StepRecord& s : trace.steps) {
      double env = std::pow(1.0 + rep.growth_rate * h, s.step - 1) * p1;
      rep.envelope_ratio = std::max(rep.envelope_ratio, s.perimeter / env);
    }
  }
  return rep;
}

unsigned worker_limit() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("ATWFLOW_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<unsigned>(v);
  }
  return hw;
}

RefinementReport refinement_report(const std::vector<const FlowTrace*>& traces) {
  RefinementReport rep;
  if (traces.empty()) return rep;
  for (const FlowTrace* t : traces) rep.ladder.push_back(t->h);
  const FlowTrace& coarse = *traces.front();
  double horizon = std::numeric_limits<double>::infinity();
  for (const FlowTrace* t : traces) {
    double end = t->times.back();
    if (t->status == FlowStatus::Extinct) end = std::numeric_limits<double>::infinity();
    horizon = std::min(horizon, end);
  }
  for (double t : coarse.times) {
    if (t > horizon + 1e-12) break;
    bool common = true;
    for (const FlowTrace* tr : traces) {
      double r = t / tr->h;
      if (std::abs(r - std::round(r)) > 1e-6) common = false;
    }
    if (common) rep.common_times.push_back(t);
  }
  for (std::size_t r = 0; r + 1 < traces.size(); ++r) {
    std::vector<double> row;
    for (double t : rep.common_times) {
      const SetState& a = traces[r]->at(t);
      const SetState& b = traces[r + 1]->at(t);
      row.push_back(symmetric_difference(a, b));
    }
    rep.gaps.push_back(std::move(row));
  }
  rep.strictly_decreasing = rep.gaps.size() >= 2;
  for (std::size_t r = 0; r + 1 < rep.gaps.size(); ++r)
    for (std::size_t i = 0; i < rep.common_times.size(); ++i)
      if (rep.common_times[i] > 0.0 && !(rep.gaps[r + 1][i] < rep.gaps[r][i])) rep.strictly_decreasing = false;
  return rep;
}

RefinementReport refinement_study(const SetState& initial, const FlowConfig& config,
                                  const std::vector<double>& ladder, std::vector<FlowTrace>* traces) {
  std::vector<FlowTrace> runs(ladder.size());
  const std::size_t cap = worker_limit();
  auto job = [&](std::size_t i) {
    FlowConfig c = config;
    c.h = ladder[i];
    return run(initial, c);
  };
  for (std::size_t first = 0; first < ladder.size(); first += cap) {
    const std::size_t last = std::min(ladder.size(), first + cap);
    if (last - first == 1) {
      runs[first] = job(first);
      continue;
    }
    std::vector<std::future<FlowTrace>> batch;
    for (std::size_t i = first; i < last; ++i) batch.push_back(std::async(std::launch::async, job, i));
    for (std::size_t i = first; i < last; ++i) runs[i] = batch[i - first].get();
  }
  std::vector<const FlowTrace*> ptrs;
  for (const FlowTrace& t : runs) ptrs.push_back(&t);
  RefinementReport rep = refinement_report(ptrs);
  if (traces) *traces = std::move(runs);
  return rep;
}

VelocityReport velocity_report(const FlowTrace& trace) {
  VelocityReport rep;
  for (const StepRecord& s : trace.steps) {
    rep.sup.push_back(s.v_sup);
    rep.sup_sqrt_h = std::max(rep.sup_sqrt_h, s.v_sup * std::sqrt(trace.h));
    rep.l2 += trace.h * s.v_l2_boundary;
  }
  return rep;
}

std::vector<ScalarField> velocity_fields(const FlowTrace& trace, const AnisotropyModel& psi,
                                         const DistanceOptions& options) {
  std::vector<ScalarField> out;
  for (std::size_t k = 1; k < trace.states.size(); ++k) {
    const SetState& prev = trace.states[k - 1];
    const SetState& cur = trace.states[k];
    ScalarField v(prev.grid(), 0.0);
    if (!prev.empty() && !prev.full()) {
      DistanceField sd = signed_distance(prev, psi, options);
      for (std::size_t c = 0; c < v.values.size(); ++c)
        if (prev.inside(c) != cur.inside(c)) v[c] = sd.values[c] / trace.h;
    }
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace atwflow
