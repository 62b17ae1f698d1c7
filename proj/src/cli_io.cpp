#include "atwflow/cli_io.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "atwflow/error.hpp"
#include "atwflow/verification.hpp"

#ifndef ATWFLOW_VERSION
#define ATWFLOW_VERSION "unknown"
#endif

namespace atwflow {

using nlohmann::json;
namespace fs = std::filesystem;

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string frame_stem(int step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%06d", step);
  return buf;
}

namespace {

void make_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create directory " + dir + ": " + ec.message());
}

std::ofstream open_out(const std::string& path, bool binary = false) {
  std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
  if (!os) throw InputError("cannot write " + path);
  return os;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json load_json(const std::string& path) {
  try {
    return json::parse(slurp(path));
  } catch (const json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
}

void write_json(const std::string& path, const json& j) { open_out(path) << j.dump(2) << "\n"; }

void write_f64(const std::string& path, const std::vector<double>& values) {
  std::ofstream os = open_out(path, true);
  for (double x : values) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof bits);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    os.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
}

std::vector<double> read_f64(const std::string& path, std::size_t count) {
  std::string bytes = slurp(path);
  if (bytes.size() != count * 8)
    throw InputError(path + ": expected " + std::to_string(count * 8) + " bytes, found " +
                     std::to_string(bytes.size()));
  std::vector<double> out(count);
  for (std::size_t k = 0; k < count; ++k) {
    std::uint64_t bits;
    std::memcpy(&bits, bytes.data() + 8 * k, sizeof bits);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    std::memcpy(&out[k], &bits, sizeof bits);
  }
  return out;
}

json grid_json(const Grid& g) {
  return {{"shape", {g.ny, g.nx}},
          {"spacing", g.dx},
          {"origin", {g.origin.x(), g.origin.y()}},
          {"order", "row-major, row index j (y), column index i (x)"}};
}

Grid grid_from_json(const json& j, const std::string& where) {
  try {
    Grid g;
    g.ny = j.at("shape").at(0).get<int>();
    g.nx = j.at("shape").at(1).get<int>();
    g.dx = j.at("spacing").get<double>();
    g.origin = Vec2(j.at("origin").at(0).get<double>(), j.at("origin").at(1).get<double>());
    if (g.nx < 1 || g.ny < 1 || !(g.dx > 0.0)) throw InputError(where + ": invalid grid");
    return g;
  } catch (const json::exception& e) {
    throw InputError(where + ": " + e.what());
  }
}

std::string path_in(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

}  // namespace

void write_polylines(const std::string& path, const ScalarField& level) {
  std::ofstream os = open_out(path);
  bool first = true;
  for (const auto& loop : interface_loops(level)) {
    if (!first) os << "\n";
    first = false;
    for (const Vec2& p : loop) os << format_number(p.x()) << ',' << format_number(p.y()) << '\n';
  }
}

void write_frame(const std::string& dir, const std::string& stem, const SetState& e, int step, double time) {
  const std::string base = path_in(dir, stem);
  {
    std::ofstream os = open_out(base + ".ind", true);
    os.write(reinterpret_cast<const char*>(e.indicator().data()), static_cast<std::streamsize>(e.indicator().size()));
  }
  write_f64(base + ".level.f64", e.level().values);
  write_polylines(base + ".csv", e.level());
  json side = grid_json(e.grid());
  side["step"] = step;
  side["time"] = time;
  side["indicator"] = {{"file", stem + ".ind"}, {"dtype", "uint8"}};
  side["level"] = {{"file", stem + ".level.f64"}, {"dtype", "float64le"}};
  side["polylines"] = stem + ".csv";
  write_json(base + ".json", side);
}

SetState read_frame(const std::string& dir, const std::string& stem, double* time, int* step) {
  const std::string base = path_in(dir, stem);
  json side = load_json(base + ".json");
  Grid g = grid_from_json(side, base + ".json");
  ScalarField level(g);
  level.values = read_f64(base + ".level.f64", g.size());
  if (time) *time = side.value("time", 0.0);
  if (step) *step = side.value("step", 0);
  return SetState::from_level(std::move(level));
}

void write_field(const std::string& path, const ScalarField& f, int step, double time, const std::string& kind) {
  write_f64(path, f.values);
  json side = grid_json(f.grid);
  side["step"] = step;
  side["time"] = time;
  side["kind"] = kind;
  side["dtype"] = "float64le";
  write_json(path + ".json", side);
}

ScalarField read_field(const std::string& path, double* time) {
  json side = load_json(path + ".json");
  ScalarField f(grid_from_json(side, path + ".json"));
  f.values = read_f64(path, f.grid.size());
  if (time) *time = side.value("time", 0.0);
  return f;
}

void write_ladder(const std::string& dir, const std::string& stem, const LevelLadder& ladder, int step,
                  double time) {
  const std::string base = path_in(dir, stem);
  {
    std::ofstream os = open_out(base + ".ladder", true);
    for (const SetState& s : ladder.sets)
      os.write(reinterpret_cast<const char*>(s.indicator().data()), static_cast<std::streamsize>(s.indicator().size()));
  }
  json side = grid_json(ladder.sets.front().grid());
  side["step"] = step;
  side["time"] = time;
  side["variant"] = to_string(ladder.variant);
  side["levels"] = ladder.levels;
  side["floor"] = ladder.floor;
  side["dtype"] = "uint8";
  side["layout"] = "levels x rows x columns, level i is the superlevel set at levels[i]";
  write_json(base + ".ladder.json", side);
}

void write_diagnostics(const std::string& path, const FlowTrace& trace) {
  std::ofstream os = open_out(path);
  os << "step,time,energy,perimeter,area,symdiff,hausdorff,dissipation_lhs,dissipation_rhs,dissipation_slack,"
        "el_median,el_max,iterations,gap,sweeps,fattening,v_sup,v_l2_boundary,complement_route\n";
  auto f = format_number;
  for (const StepRecord& s : trace.steps) {
    os << s.step << ',' << f(s.time) << ',' << f(s.energy) << ',' << f(s.perimeter) << ',' << f(s.area) << ','
       << f(s.symdiff) << ',' << f(s.hausdorff) << ',' << f(s.dissipation.lhs) << ',' << f(s.dissipation.rhs) << ','
       << f(s.dissipation.slack()) << ',' << f(s.el.median_abs) << ',' << f(s.el.max_abs) << ',' << s.iterations
       << ',' << f(s.gap) << ',' << s.sweeps << ',' << f(s.fattening) << ',' << f(s.v_sup) << ','
       << f(s.v_l2_boundary) << ',' << (s.complement_route ? 1 : 0) << '\n';
  }
}

std::vector<std::string> known_checks() {
  return {"dissipation", "comparison", "nesting", "ordering", "holder",
          "velocity",    "laws",       "eikonal", "submodularity", "euler_lagrange"};
}

namespace {

using Clock = std::chrono::steady_clock;

json versions() {
  std::string compiler;
#if defined(__clang__)
  compiler = "clang " __clang_version__;
#elif defined(__GNUC__)
  compiler = "gcc " __VERSION__;
#else
  compiler = "unknown";
#endif
  return {{"atwflow", ATWFLOW_VERSION},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"compiler", compiler}};
}

json manifest_base(const std::string& command, const Scenario& s) {
  return {{"tool", "atwflow"},
          {"command", command},
          {"scenario_name", s.name},
          {"scenario_hash", "fnv1a64:" + hex64(s.hash)},
          {"h", s.h},
          {"horizon", s.horizon},
          {"record_stride", s.record_stride},
          {"grid", grid_json(s.grid)},
          {"versions", versions()}};
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

/// Frames at every stride-th step and at the last one.
json write_trace(const std::string& dir, const FlowTrace& tr, int stride) {
  const std::string frames = path_in(dir, "frames");
  make_dir(frames);
  json list = json::array();
  const std::size_t last = tr.states.size() - 1;
  for (std::size_t k = 0; k <= last; ++k) {
    if (k % static_cast<std::size_t>(stride) != 0 && k != last) continue;
    const int step = static_cast<int>(k);
    write_frame(frames, frame_stem(step), tr.states[k], step, tr.times[k]);
    list.push_back({{"step", step}, {"time", tr.times[k]}, {"stem", "frames/" + frame_stem(step)}});
  }
  write_diagnostics(path_in(dir, "diagnostics.csv"), tr);
  return list;
}

int trace_exit(const FlowTrace& tr) {
  return tr.status == FlowStatus::SolverAbort || tr.status == FlowStatus::MarginAbort ? kExitSolver : kExitOk;
}

void report_trace(std::ostream& log, std::ostream& err, const std::string& label, const FlowTrace& tr) {
  log << label << ": " << to_string(tr.status) << ", " << tr.steps.size() << " steps";
  if (!tr.message.empty()) log << " (" << tr.message << ")";
  log << "\n";
  if (trace_exit(tr) != kExitOk) err << label << ": aborted at step " << tr.failed_step << ": " << tr.message << "\n";
}

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const InputError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ModelError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const SolverError& e) {
    err << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  } catch (const MarginError& e) {
    err << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  } catch (const DegenerateSetError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  }
}

}  // namespace

int command_run(const std::string& scenario_path, const std::string& out_dir, std::ostream& log,
                std::ostream& err) {
  return guarded(err, [&] {
    const auto t0 = Clock::now();
    Scenario s = load_scenario(scenario_path);
    make_dir(out_dir);
    const FlowConfig cfg = s.config();
    FlowTrace tr = run(s.initial, cfg);
    json manifest = manifest_base("run", s);
    manifest["status"] = to_string(tr.status);
    manifest["message"] = tr.message;
    manifest["failed_step"] = tr.failed_step;
    manifest["steps"] = tr.steps.size();
    manifest["frames"] = write_trace(out_dir, tr, s.record_stride);
    report_trace(log, err, "run", tr);
    int code = trace_exit(tr);
    if (s.companion) {
      FlowTrace comp = run(*s.companion, cfg);
      const std::string cdir = path_in(out_dir, "companion");
      make_dir(cdir);
      manifest["companion"] = {{"status", to_string(comp.status)},
                               {"message", comp.message},
                               {"failed_step", comp.failed_step},
                               {"steps", comp.steps.size()},
                               {"frames", write_trace(cdir, comp, s.record_stride)}};
      report_trace(log, err, "companion", comp);
      code = std::max(code, trace_exit(comp));
    }
    open_out(path_in(out_dir, "scenario.json")) << s.canonical << "\n";
    manifest["wall_clock_seconds"] = seconds_since(t0);
    write_json(path_in(out_dir, "manifest.json"), manifest);
    return code;
  });
}

namespace {

struct LevelsetOutcome {
  LevelSetTrace trace;
  std::string status = "completed";
  std::string message;
  int failed_step = -1;
};

LevelsetOutcome run_ladder(const LevelLadder& initial, const FlowConfig& cfg) {
  LevelsetOutcome out;
  out.trace.h = cfg.h;
  out.trace.times.push_back(0.0);
  out.trace.ladders.push_back(initial);
  const auto steps = static_cast<int>(std::floor(cfg.horizon / cfg.h + 1e-9));
  for (int k = 1; k <= steps; ++k) {
    LadderStepReport rep;
    try {
      LevelLadder next = levelset_step(out.trace.ladders.back(), cfg.h, (k - 1) * cfg.h, cfg, &rep);
      out.trace.ladders.push_back(std::move(next));
    } catch (const SolverError& e) {
      out.status = "solver_abort";
      out.message = e.what();
      out.failed_step = k;
      return out;
    }
    out.trace.total_corrections += rep.corrections;
    out.trace.steps.push_back(rep);
    out.trace.times.push_back(k * cfg.h);
  }
  return out;
}

json write_levelset(const std::string& dir, const LevelsetOutcome& o, int stride) {
  const std::string frames = path_in(dir, "frames");
  make_dir(frames);
  const LevelSetTrace& tr = o.trace;
  json list = json::array();
  const std::size_t last = tr.ladders.size() - 1;
  for (std::size_t k = 0; k <= last; ++k) {
    if (k % static_cast<std::size_t>(stride) != 0 && k != last) continue;
    const int step = static_cast<int>(k);
    char stem[32];
    std::snprintf(stem, sizeof stem, "ladder_%06d", step);
    write_ladder(frames, stem, tr.ladders[k], step, tr.times[k]);
    char rstem[32];
    std::snprintf(rstem, sizeof rstem, "u_%06d.f64", step);
    write_field(path_in(frames, rstem), reconstruct(tr.ladders[k]), step, tr.times[k], "reconstruction");
    list.push_back({{"step", step},
                    {"time", tr.times[k]},
                    {"ladder", std::string("frames/") + stem},
                    {"u", std::string("frames/") + rstem}});
  }
  std::ofstream os = open_out(path_in(dir, "levelset_diagnostics.csv"));
  os << "step,time,corrections,iterations,complement_levels,plateau\n";
  for (std::size_t k = 0; k < tr.steps.size(); ++k) {
    const LadderStepReport& r = tr.steps[k];
    os << k + 1 << ',' << format_number(tr.times[k + 1]) << ',' << r.corrections << ',' << r.iterations << ','
       << r.complement_levels << ',' << format_number(r.plateau) << '\n';
  }
  return {{"variant", to_string(tr.ladders.front().variant)},
          {"status", o.status},
          {"message", o.message},
          {"failed_step", o.failed_step},
          {"steps", tr.steps.size()},
          {"levels", tr.ladders.front().levels.size()},
          {"total_corrections", tr.total_corrections},
          {"frames", list}};
}

struct OrderingResult {
  double max_excess = 0.0;  ///< max of u^- - u^+ over all cells and common times
  std::size_t violating_cells = 0;
};

OrderingResult ordering(const LevelSetTrace& minus, const LevelSetTrace& plus) {
  OrderingResult r;
  const std::size_t n = std::min(minus.ladders.size(), plus.ladders.size());
  for (std::size_t k = 0; k < n; ++k) {
    ScalarField a = reconstruct(minus.ladders[k]), b = reconstruct(plus.ladders[k]);
    for (std::size_t c = 0; c < a.values.size(); ++c) {
      double d = a[c] - b[c];
      r.max_excess = std::max(r.max_excess, d);
      if (d > 0.0) ++r.violating_cells;
    }
  }
  return r;
}

}  // namespace

int command_levelset(const std::string& scenario_path, const std::string& out_dir, std::optional<int> levels,
                     const std::string& variant, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const auto t0 = Clock::now();
    Scenario s = load_scenario(scenario_path);
    if (levels) {
      if (*levels < 1) throw InputError("--levels: must be at least 1");
      s.levelset.levels = *levels;
    }
    std::vector<LadderVariant> variants;
    if (variant.empty()) variants = {s.levelset.variant};
    else if (variant == "plus") variants = {LadderVariant::UpperPlus};
    else if (variant == "minus") variants = {LadderVariant::LowerMinus};
    else if (variant == "both") variants = {LadderVariant::LowerMinus, LadderVariant::UpperPlus};
    else throw InputError("--variant: expected plus, minus or both");

    ScalarField u0 = s.levelset.u0 ? *s.levelset.u0 : s.initial.level();
    if (!s.levelset.u0)
      for (double& v : u0.values) v = -v;
    make_dir(out_dir);
    const FlowConfig cfg = s.config();
    json manifest = manifest_base("levelset", s);
    manifest["variants"] = json::array();
    std::map<LadderVariant, LevelsetOutcome> done;
    int code = kExitOk;
    for (LadderVariant v : variants) {
      LevelLadder ladder;
      if (s.levelset.floor) {
        const double hi = *std::max_element(u0.values.begin(), u0.values.end());
        const double lo = *s.levelset.floor;
        if (!(hi > lo)) throw InputError("$.levelset.floor: must lie below the maximum of the initial function");
        std::vector<double> lv;
        const int m = s.levelset.levels;
        for (int i = 0; i < m; ++i) lv.push_back(lo + (i + 0.5) * (hi - lo) / m);
        ladder = make_ladder(u0, lv, lo, v);
      } else {
        ladder = make_ladder(u0, s.levelset.levels, v);
      }
      LevelsetOutcome o = run_ladder(ladder, cfg);
      const std::string dir = variants.size() > 1 ? path_in(out_dir, to_string(v)) : out_dir;
      make_dir(dir);
      json entry = write_levelset(dir, o, s.record_stride);
      entry["dir"] = variants.size() > 1 ? to_string(v) : ".";
      manifest["variants"].push_back(entry);
      log << "levelset " << to_string(v) << ": " << o.status << ", " << o.trace.steps.size() << " steps, "
          << o.trace.total_corrections << " nesting corrections\n";
      if (o.failed_step >= 0) {
        err << "levelset " << to_string(v) << ": aborted at step " << o.failed_step << ": " << o.message << "\n";
        code = kExitSolver;
      }
      done.emplace(v, std::move(o));
    }
    if (done.size() == 2) {
      OrderingResult r = ordering(done.at(LadderVariant::LowerMinus).trace, done.at(LadderVariant::UpperPlus).trace);
      manifest["ordering"] = {{"max_excess", r.max_excess}, {"violating_cells", r.violating_cells}};
      log << "ordering u- <= u+: max excess " << r.max_excess << ", " << r.violating_cells << " violating cells\n";
    }
    open_out(path_in(out_dir, "scenario.json")) << s.canonical << "\n";
    manifest["wall_clock_seconds"] = seconds_since(t0);
    write_json(path_in(out_dir, "manifest.json"), manifest);
    return code;
  });
}

namespace {

struct StoredTrace {
  std::vector<SetState> states;
  std::vector<double> times;
  std::vector<int> steps;
  bool consecutive = true;
  bool extinct = false;
};

StoredTrace load_trace(const std::string& dir, const json& frames, const std::string& status) {
  StoredTrace t;
  for (const json& f : frames) {
    const std::string stem = f.at("stem").get<std::string>();
    fs::path p = fs::path(dir) / stem;
    double time = 0.0;
    int step = 0;
    t.states.push_back(read_frame(p.parent_path().string(), p.filename().string(), &time, &step));
    t.times.push_back(time);
    if (!t.steps.empty() && step != t.steps.back() + 1) t.consecutive = false;
    t.steps.push_back(step);
  }
  if (t.states.empty()) throw InputError(dir + ": trace has no frames");
  t.extinct = status == "extinct";
  return t;
}

FlowTrace as_trace(const StoredTrace& st, double h) {
  FlowTrace tr;
  tr.h = h;
  tr.states = st.states;
  tr.times = st.times;
  if (st.extinct) tr.status = FlowStatus::Extinct;
  return tr;
}

bool wanted(const std::vector<std::string>& checks, const std::string& name) {
  return checks.empty() || std::find(checks.begin(), checks.end(), name) != checks.end();
}

void verify_flow(const Scenario& s, const std::string& trace_dir, const json& manifest,
                 const std::vector<std::string>& checks, VerificationReport& rep, std::ostream& log) {
  const FlowConfig cfg = s.config();
  StoredTrace st = load_trace(trace_dir, manifest.at("frames"), manifest.value("status", ""));
  const bool stepwise = st.consecutive && st.states.size() >= 2;
  FlowTrace tr;
  if (stepwise) {
    std::vector<SetState> states = st.states;
    std::vector<double> times = st.times;
    while (states.size() > 1 && states[states.size() - 2].empty()) {
      states.pop_back();
      times.pop_back();
    }
    tr = replay(states, times, cfg);
    if (st.extinct) tr.status = FlowStatus::Extinct;
  } else {
    tr = as_trace(st, s.h * s.record_stride);
  }
  const double p0 = tr.initial_perimeter > 0.0 ? tr.initial_perimeter : perimeter(st.states.front(), s.phi);
  const std::string stride_note = "needs consecutive frames (record_stride 1)";

  if (wanted(checks, "dissipation")) {
    if (!stepwise) {
      rep.info("dissipation", 0.0, "skipped: " + stride_note);
    } else {
      double worst = -std::numeric_limits<double>::infinity();
      int at = 0;
      for (const StepRecord& r : tr.steps)
        if (r.dissipation.slack() > worst) {
          worst = r.dissipation.slack();
          at = r.step;
        }
      if (tr.steps.empty()) worst = 0.0;
      double rel = p0 > 0.0 ? worst / p0 : worst;
      rep.add("dissipation", rel, s.verify.dissipation_slack, rel <= s.verify.dissipation_slack, true,
              "max over steps of (lhs - rhs) / P(E0), worst step " + std::to_string(at));
    }
  }
  if (wanted(checks, "comparison")) {
    if (!manifest.contains("companion")) {
      rep.info("comparison", 0.0, "skipped: no companion run");
    } else {
      const json& c = manifest.at("companion");
      StoredTrace ct = load_trace(path_in(trace_dir, "companion"), c.at("frames"), c.value("status", ""));
      FlowTrace a = as_trace(st, s.h), b = as_trace(ct, s.h);
      auto outside = [](const SetState& x, const SetState& y) {
        std::size_t n = 0;
        for (std::size_t k = 0; k < x.indicator().size(); ++k)
          if (x.inside(k) && !y.inside(k)) ++n;
        return n;
      };
      const bool main_inner = outside(a.states.front(), b.states.front()) == 0;
      if (!main_inner && outside(b.states.front(), a.states.front()) != 0) {
        rep.info("comparison", 0.0, "skipped: initial sets are not nested");
      } else if (!st.consecutive || !ct.consecutive) {
        rep.info("comparison", 0.0, "skipped: " + stride_note);
      } else {
        std::vector<std::size_t> v = main_inner ? comparison_violations(a, b) : comparison_violations(b, a);
        std::size_t worst = v.empty() ? 0 : *std::max_element(v.begin(), v.end());
        rep.add("comparison", static_cast<double>(worst), static_cast<double>(s.verify.comparison_cells),
                worst <= s.verify.comparison_cells, true,
                "max violating cells over " + std::to_string(v.size()) + " common steps");
      }
    }
  }
  if (wanted(checks, "holder")) {
    HolderReport h = holder_report(tr);
    rep.info("holder_constant", h.holder_constant, std::to_string(h.pairs) + " pairs");
    if (stepwise) {
      rep.info("perimeter_growth_rate", h.growth_rate);
      rep.info("perimeter_envelope_ratio", h.envelope_ratio);
    }
  }
  if (wanted(checks, "velocity")) {
    if (!stepwise) {
      rep.info("velocity", 0.0, "skipped: " + stride_note);
    } else {
      VelocityReport v = velocity_report(tr);
      rep.info("velocity_sup_sqrt_h", v.sup_sqrt_h);
      rep.info("velocity_l2", v.l2);
    }
  }
  if (wanted(checks, "euler_lagrange")) {
    if (!stepwise) {
      rep.info("euler_lagrange", 0.0, "skipped: " + stride_note);
    } else {
      std::vector<double> med;
      for (const StepRecord& r : tr.steps)
        if (r.el.computed) med.push_back(r.el.median_abs);
      ResidualStats m = summarize(med);
      rep.info("euler_lagrange_median", m.median_abs, "median over steps of the per-step median |residual|");
    }
  }
  if (wanted(checks, "laws")) {
    if (!stepwise) {
      rep.info("laws", 0.0, "skipped: " + stride_note);
    } else {
      try {
        const Box b = s.grid.box();
        const Vec2 center = 0.5 * (b.lower + b.upper);
        const Vec2 ext = b.upper - b.lower;
        auto tests = default_test_functions(center, 0.45 * std::min(ext.x(), ext.y()), tr.times.back());
        DistributionalReport d = distributional_laws_check(tr, s.phi, s.psi, s.forcing, tests);
        rep.info("curvature_law_defect", d.curvature_defect, "max over test functions");
        rep.info("velocity_law_defect", d.velocity_defect, "max over test functions");
        rep.info("curvature_l2", d.curvature_l2);
        rep.info("velocity_l2_discrete", d.velocity_l2);
      } catch (const Error& e) {
        rep.info("laws", 0.0, std::string("skipped: ") + e.what());
      }
    }
  }
  if (wanted(checks, "eikonal")) {
    const SetState& e0 = st.states.front();
    if (e0.empty() || e0.full()) {
      rep.info("eikonal", 0.0, "skipped: degenerate initial set");
    } else {
      DistanceField sd = signed_distance(e0, s.psi, s.solver.distance);
      EikonalResidual r = eikonal_residual(sd, s.psi);
      rep.add("eikonal_residual_median", r.median, s.verify.eikonal_median, r.median <= s.verify.eikonal_median,
              false, std::to_string(r.samples) + " cells, " + std::to_string(r.cut_locus_cells) + " on the cut locus");
      SandwichReport w = euclidean_sandwich_check(sd, e0, s.psi);
      rep.add("euclidean_sandwich", w.max_violation, s.verify.sandwich_violation,
              w.max_violation <= s.verify.sandwich_violation, false, "c = " + format_number(w.c));
    }
  }
  if (wanted(checks, "submodularity")) {
    const SetState& a = st.states.front();
    const SetState& b = st.states[st.states.size() / 2];
    SubmodularityReport r = submodularity_check(a, b, s.phi, true);
    rep.add("submodularity", r.slack(), s.verify.submodularity_slack,
            r.slack() <= s.verify.submodularity_slack * std::max(1.0, r.sum), false,
            "P(A u B) + P(A n B) - P(A) - P(B), first and middle frames");
  }
  for (const char* name : {"nesting", "ordering"})
    if (!checks.empty() && wanted(checks, name)) rep.info(name, 0.0, "not applicable to a set trace");
  log << "verified " << st.states.size() << " frames\n";
}

void verify_levelset(const Scenario& s, const std::string& trace_dir, const json& manifest,
                     const std::vector<std::string>& checks, VerificationReport& rep) {
  std::map<std::string, std::vector<ScalarField>> recon;
  for (const json& v : manifest.at("variants")) {
    const std::string name = v.at("variant").get<std::string>();
    if (wanted(checks, "nesting")) {
      auto c = v.at("total_corrections").get<std::size_t>();
      rep.add("nesting_" + name, static_cast<double>(c), static_cast<double>(s.verify.nesting_corrections),
              c <= s.verify.nesting_corrections, true, "nesting corrections over the run");
    }
    if (wanted(checks, "ordering")) {
      const std::string dir = path_in(trace_dir, v.at("dir").get<std::string>());
      for (const json& f : v.at("frames")) recon[name].push_back(read_field(path_in(dir, f.at("u").get<std::string>())));
    }
  }
  if (wanted(checks, "ordering")) {
    if (recon.size() != 2) {
      rep.info("ordering", 0.0, "skipped: needs both variants");
    } else {
      const auto& a = recon.at("minus");
      const auto& b = recon.at("plus");
      double worst = 0.0;
      for (std::size_t k = 0; k < std::min(a.size(), b.size()); ++k)
        for (std::size_t c = 0; c < a[k].values.size(); ++c) worst = std::max(worst, a[k][c] - b[k][c]);
      rep.add("ordering", worst, 0.0, worst <= 0.0, true, "max of u- - u+ over stored frames");
    }
  }
  for (const std::string& name : known_checks())
    if (name != "nesting" && name != "ordering" && !checks.empty() && wanted(checks, name))
      rep.info(name, 0.0, "not applicable to a level-set trace");
}

}  // namespace

int command_verify(const std::string& trace_dir, const std::vector<std::string>& checks,
                   const std::string& out_dir, std::ostream& log, std::ostream& err) {
  return guarded(err, [&]() -> int {
    for (const std::string& c : checks) {
      auto all = known_checks();
      if (std::find(all.begin(), all.end(), c) == all.end()) throw InputError("--checks: unknown check '" + c + "'");
    }
    const std::string manifest_path = path_in(trace_dir, "manifest.json");
    if (!fs::exists(manifest_path)) throw InputError("no trace at " + trace_dir + " (manifest.json missing)");
    json manifest = load_json(manifest_path);
    Scenario s = parse_scenario(slurp(path_in(trace_dir, "scenario.json")), trace_dir, false);
    VerificationReport rep;
    const std::string command = manifest.value("command", "");
    try {
      if (command == "run") verify_flow(s, trace_dir, manifest, checks, rep, log);
      else if (command == "levelset") verify_levelset(s, trace_dir, manifest, checks, rep);
      else throw InputError(manifest_path + ": unknown command '" + command + "'");
    } catch (const json::exception& e) {
      throw InputError(manifest_path + ": " + e.what());
    }
    const std::string out = out_dir.empty() ? trace_dir : out_dir;
    make_dir(out);
    rep.write_markdown(path_in(out, "verify_report.md"), "Verification of " + trace_dir);
    rep.write_csv(path_in(out, "verify_report.csv"));
    for (const CheckRow& r : rep.rows())
      log << r.status << "  " << r.name << "  " << format_number(r.measured) << (r.hard ? "  [hard]" : "") << "\n";
    return rep.hard_failure() ? kExitVerification : kExitOk;
  });
}

int command_convergence(const std::string& scenario_path, const std::vector<double>& ladder,
                        const std::string& out_dir, std::ostream& log, std::ostream& err) {
  return guarded(err, [&]() -> int {
    const auto t0 = Clock::now();
    if (ladder.size() < 2) throw InputError("--ladder: needs at least two time steps");
    for (std::size_t i = 0; i < ladder.size(); ++i) {
      if (!(ladder[i] > 0.0)) throw InputError("--ladder: time steps must be positive");
      if (i > 0 && !(ladder[i] < ladder[i - 1])) throw InputError("--ladder: time steps must decrease");
    }
    Scenario s = load_scenario(scenario_path);
    make_dir(out_dir);
    std::vector<FlowTrace> traces;
    RefinementReport rr = refinement_study(s.initial, s.config(), ladder, &traces);

    std::ofstream os = open_out(path_in(out_dir, "convergence.csv"));
    os << "time";
    for (std::size_t r = 0; r + 1 < ladder.size(); ++r)
      os << ",gap_" << format_number(ladder[r]) << "_" << format_number(ladder[r + 1]);
    os << "\n";
    for (std::size_t i = 0; i < rr.common_times.size(); ++i) {
      os << format_number(rr.common_times[i]);
      for (const auto& g : rr.gaps) os << ',' << format_number(g[i]);
      os << "\n";
    }

    VerificationReport rep;
    json rungs = json::array();
    int code = kExitOk;
    for (std::size_t r = 0; r < traces.size(); ++r) {
      const FlowTrace& tr = traces[r];
      const std::string tag = "h=" + format_number(tr.h);
      const std::string dir = path_in(out_dir, "rung_" + std::to_string(r));
      make_dir(dir);
      write_diagnostics(path_in(dir, "diagnostics.csv"), tr);
      rungs.push_back({{"h", tr.h}, {"status", to_string(tr.status)}, {"steps", tr.steps.size()},
                       {"dir", "rung_" + std::to_string(r)}});
      report_trace(log, err, tag, tr);
      code = std::max(code, trace_exit(tr));
      double worst = 0.0;
      for (const StepRecord& st : tr.steps) worst = std::max(worst, st.dissipation.slack());
      double rel = tr.initial_perimeter > 0.0 ? worst / tr.initial_perimeter : worst;
      rep.add("dissipation " + tag, rel, s.verify.dissipation_slack, rel <= s.verify.dissipation_slack, true);
      rep.info("velocity_sup_sqrt_h " + tag, velocity_report(tr).sup_sqrt_h);
      rep.info("holder_constant " + tag, holder_report(tr).holder_constant);
      try {
        const Box b = s.grid.box();
        const Vec2 ext = b.upper - b.lower;
        auto tests = default_test_functions(0.5 * (b.lower + b.upper), 0.45 * std::min(ext.x(), ext.y()),
                                            tr.times.back());
        DistributionalReport d = distributional_laws_check(tr, s.phi, s.psi, s.forcing, tests);
        rep.info("curvature_law_defect " + tag, d.curvature_defect);
        rep.info("velocity_law_defect " + tag, d.velocity_defect);
      } catch (const Error& e) {
        rep.info("laws " + tag, 0.0, std::string("skipped: ") + e.what());
      }
    }
    double worst_ratio = 0.0;
    for (std::size_t r = 0; r + 1 < rr.gaps.size(); ++r)
      for (std::size_t i = 0; i < rr.common_times.size(); ++i)
        if (rr.common_times[i] > 0.0 && rr.gaps[r][i] > 0.0)
          worst_ratio = std::max(worst_ratio, rr.gaps[r + 1][i] / rr.gaps[r][i]);
    rep.add("gap_strictly_decreasing", worst_ratio, 1.0, rr.strictly_decreasing, false,
            "max ratio of consecutive gaps over common times");
    rep.write_markdown(path_in(out_dir, "convergence_report.md"), "Refinement study");
    rep.write_csv(path_in(out_dir, "convergence_report.csv"));

    json manifest = manifest_base("convergence", s);
    manifest["ladder"] = ladder;
    manifest["rungs"] = rungs;
    manifest["strictly_decreasing"] = rr.strictly_decreasing;
    open_out(path_in(out_dir, "scenario.json")) << s.canonical << "\n";
    manifest["wall_clock_seconds"] = seconds_since(t0);
    write_json(path_in(out_dir, "manifest.json"), manifest);
    log << "gaps strictly decreasing: " << (rr.strictly_decreasing ? "yes" : "no") << "\n";
    if (code != kExitOk) return code;
    return rep.hard_failure() ? kExitVerification : kExitOk;
  });
}

}  // namespace atwflow
