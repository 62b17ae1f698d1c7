#include "atwflow/scenario.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <initializer_list>
#include <sstream>

#include <nlohmann/json.hpp>

#include "atwflow/error.hpp"

namespace atwflow {

using nlohmann::json;

namespace {

class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  [[noreturn]] void fail(const std::string& msg) const { throw InputError(path_ + ": " + msg); }

  const std::string& path() const { return path_; }
  const json& raw() const { return j_; }

  bool has(const char* key) const { return j_.is_object() && j_.contains(key); }

  Node at(const char* key) const {
    if (!j_.is_object()) fail("expected an object");
    if (!j_.contains(key)) fail(std::string("missing required field '") + key + "'");
    return Node(j_.at(key), path_ + "." + key);
  }

  Node item(std::size_t i) const {
    if (!j_.is_array() || i >= j_.size()) fail("index " + std::to_string(i) + " out of range");
    return Node(j_.at(i), path_ + "[" + std::to_string(i) + "]");
  }

  std::size_t size() const {
    if (!j_.is_array()) fail("expected an array");
    return j_.size();
  }

  void only(std::initializer_list<const char*> keys) const {
    if (!j_.is_object()) fail("expected an object");
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      bool known = false;
      for (const char* k : keys) known = known || it.key() == k;
      if (!known) fail("unknown field '" + it.key() + "'");
    }
  }

  double number() const {
    if (!j_.is_number()) fail("expected a number");
    double v = j_.get<double>();
    if (!std::isfinite(v)) fail("expected a finite number");
    return v;
  }

  double positive() const {
    double v = number();
    if (!(v > 0.0)) fail("must be positive");
    return v;
  }

  int integer() const {
    if (!j_.is_number_integer()) fail("expected an integer");
    return j_.get<int>();
  }

  std::string string() const {
    if (!j_.is_string()) fail("expected a string");
    return j_.get<std::string>();
  }

  bool boolean() const {
    if (!j_.is_boolean()) fail("expected true or false");
    return j_.get<bool>();
  }

  Vec2 vec2() const {
    if (!j_.is_array() || j_.size() != 2) fail("expected an array of two numbers");
    return Vec2(item(0).number(), item(1).number());
  }

  Expression expression() const {
    if (j_.is_number()) return Expression(number());
    if (!j_.is_string()) fail("expected a number or an expression string");
    try {
      return Expression::parse(j_.get<std::string>());
    } catch (const InputError& e) {
      fail(e.what());
    }
  }

  double number_or(const char* key, double fallback) const { return has(key) ? at(key).number() : fallback; }
  int integer_or(const char* key, int fallback) const { return has(key) ? at(key).integer() : fallback; }
  bool boolean_or(const char* key, bool fallback) const { return has(key) ? at(key).boolean() : fallback; }

 private:
  const json& j_;
  std::string path_;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

AnisotropyModel parse_anisotropy(const Node& n, const Box& box) {
  if (n.raw().is_string()) {
    std::string f = n.string();
    if (f == "euclidean") return make_euclidean();
    n.fail("unknown family '" + f + "'");
  }
  n.only({"family", "scale", "matrix", "a11", "a12", "a22", "exponent", "smoothing", "modulation", "reversed",
          "reweight"});
  const std::string family = n.at("family").string();
  try {
    AnisotropyModel m = make_euclidean();
    if (family == "euclidean") {
    } else if (family == "scaled") {
      m = make_scaled_euclidean(n.at("scale").positive(), box);
    } else if (family == "riemannian") {
      if (n.has("matrix")) {
        Node a = n.at("matrix");
        if (a.size() != 2) a.fail("expected a 2x2 array");
        Mat2 mat;
        for (int i = 0; i < 2; ++i) {
          Node row = a.item(i);
          if (row.size() != 2) row.fail("expected a 2x2 array");
          for (int j = 0; j < 2; ++j) mat(i, j) = row.item(j).number();
        }
        m = make_riemannian(mat, box);
      } else {
        m = make_riemannian(n.at("a11").expression(), n.at("a12").expression(), n.at("a22").expression(), box);
      }
    } else if (family == "smoothed_lp") {
      m = make_smoothed_lp(n.at("exponent").number(), n.at("smoothing").number(), box);
    } else {
      n.at("family").fail("unknown family '" + family + "'");
    }
    if (n.has("modulation")) m = make_modulated(m, n.at("modulation").expression(), box);
    if (n.boolean_or("reweight", false)) m = finsler_reweight(m, box);
    if (n.boolean_or("reversed", false)) m = m.reversed();
    return m;
  } catch (const ModelError& e) {
    n.fail(e.what());
  }
}

struct ShapeContext {
  const Grid& grid;
  std::string base_dir;
  std::vector<std::string>* files;
};

ScalarField parse_shape(const Node& n, const ShapeContext& ctx) {
  const Grid& g = ctx.grid;
  const std::string type = n.at("type").string();
  if (type == "disk") {
    n.only({"type", "center", "radius"});
    Vec2 c = n.at("center").vec2();
    double r = n.at("radius").positive();
    return tabulate(g, [&](const Vec2& x) { return (x - c).norm() - r; });
  }
  if (type == "ellipse") {
    n.only({"type", "center", "axes", "angle"});
    Vec2 c = n.at("center").vec2();
    Node axes = n.at("axes");
    Vec2 ab = axes.vec2();
    if (!(ab.x() > 0.0 && ab.y() > 0.0)) axes.fail("semi-axes must be positive");
    double th = n.number_or("angle", 0.0);
    double ct = std::cos(th), st = std::sin(th);
    return tabulate(g, [&](const Vec2& x) {
      Vec2 d = x - c;
      double u = ct * d.x() + st * d.y(), v = -st * d.x() + ct * d.y();
      double q = std::hypot(u / ab.x(), v / ab.y());
      if (q < 1e-12) return -std::min(ab.x(), ab.y());
      double gn = std::hypot(u / (ab.x() * ab.x()), v / (ab.y() * ab.y())) / q;
      return (q - 1.0) / gn;
    });
  }
  if (type == "rectangle") {
    n.only({"type", "lower", "upper"});
    Vec2 lo = n.at("lower").vec2(), hi = n.at("upper").vec2();
    if (!(hi.x() > lo.x() && hi.y() > lo.y())) n.fail("upper corner must exceed lower corner");
    return tabulate(g, [&](const Vec2& x) {
      Vec2 q(std::max(lo.x() - x.x(), x.x() - hi.x()), std::max(lo.y() - x.y(), x.y() - hi.y()));
      double outside = Vec2(std::max(q.x(), 0.0), std::max(q.y(), 0.0)).norm();
      return outside + std::min(std::max(q.x(), q.y()), 0.0);
    });
  }
  if (type == "half_plane") {
    n.only({"type", "normal", "offset"});
    Node nn = n.at("normal");
    Vec2 nv = nn.vec2();
    if (!(nv.norm() > 0.0)) nn.fail("normal must be nonzero");
    nv.normalize();
    double off = n.at("offset").number();
    return tabulate(g, [&](const Vec2& x) { return nv.dot(x) - off; });
  }
  if (type == "union" || type == "intersection") {
    n.only({"type", "of"});
    Node of = n.at("of");
    if (of.size() == 0) of.fail("needs at least one shape");
    ScalarField out = parse_shape(of.item(0), ctx);
    for (std::size_t i = 1; i < of.size(); ++i) {
      ScalarField b = parse_shape(of.item(i), ctx);
      for (std::size_t k = 0; k < out.values.size(); ++k)
        out[k] = type == "union" ? std::min(out[k], b[k]) : std::max(out[k], b[k]);
    }
    return out;
  }
  if (type == "difference") {
    n.only({"type", "of"});
    Node of = n.at("of");
    if (of.size() != 2) of.fail("expected exactly two shapes");
    ScalarField a = parse_shape(of.item(0), ctx);
    ScalarField b = parse_shape(of.item(1), ctx);
    for (std::size_t k = 0; k < a.values.size(); ++k) a[k] = std::max(a[k], -b[k]);
    return a;
  }
  if (type == "complement") {
    n.only({"type", "of"});
    ScalarField a = parse_shape(n.at("of"), ctx);
    for (double& v : a.values) v = -v;
    return a;
  }
  if (type == "indicator_file") {
    n.only({"type", "path"});
    Node p = n.at("path");
    std::filesystem::path file(p.string());
    if (file.is_relative()) file = std::filesystem::path(ctx.base_dir) / file;
    std::string bytes;
    try {
      bytes = read_file(file.string());
    } catch (const InputError& e) {
      p.fail(e.what());
    }
    if (bytes.size() != g.size())
      p.fail("expected " + std::to_string(g.size()) + " bytes, found " + std::to_string(bytes.size()));
    if (ctx.files) ctx.files->push_back(bytes);
    ScalarField out(g);
    for (std::size_t k = 0; k < g.size(); ++k) out[k] = bytes[k] != 0 ? -0.5 * g.dx : 0.5 * g.dx;
    return out;
  }
  n.at("type").fail("unknown shape type '" + type + "'");
}

}  // namespace

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

FlowConfig Scenario::config() const {
  FlowConfig c;
  c.phi = phi;
  c.psi = psi;
  c.forcing = forcing;
  c.h = h;
  c.horizon = horizon;
  c.solver = solver;
  c.margin_cells = margin_cells;
  c.full_diagnostics = full_diagnostics;
  return c;
}

Scenario parse_scenario(const std::string& json_text, const std::string& base_dir, bool build_sets) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("$: invalid JSON: ") + e.what());
  }
  Node root(doc, "$");
  root.only({"name", "box", "grid", "phi", "psi", "forcing", "initial", "companion", "h", "horizon",
             "record_stride", "solver", "margin_cells", "full_diagnostics", "levelset", "verify"});
  Scenario s;
  s.canonical = doc.dump();
  if (root.has("name")) s.name = root.at("name").string();

  Box box;
  if (root.has("box")) {
    Node b = root.at("box");
    b.only({"origin", "extent"});
    box.lower = b.has("origin") ? b.at("origin").vec2() : Vec2(0.0, 0.0);
    Node ext = b.at("extent");
    Vec2 e = ext.vec2();
    if (!(e.x() > 0.0 && e.y() > 0.0)) ext.fail("extents must be positive");
    box.upper = box.lower + e;
  }
  Node gn = root.at("grid");
  if (gn.size() != 2) gn.fail("expected [nx, ny]");
  int nx = gn.item(0).integer(), ny = gn.item(1).integer();
  if (nx < 8 || ny < 8) gn.fail("expected at least 8 cells per axis");
  try {
    s.grid = Grid::over(box, nx, ny);
  } catch (const InputError& e) {
    gn.fail(e.what());
  }

  if (root.has("phi")) s.phi = parse_anisotropy(root.at("phi"), box);
  if (root.has("psi")) s.psi = parse_anisotropy(root.at("psi"), box);
  if (root.has("forcing")) s.forcing = root.at("forcing").expression();

  s.h = root.at("h").positive();
  Node hz = root.at("horizon");
  s.horizon = hz.number();
  if (s.horizon < 0.0) hz.fail("must be nonnegative");
  if (root.has("record_stride")) {
    Node rs = root.at("record_stride");
    s.record_stride = rs.integer();
    if (s.record_stride < 1) rs.fail("must be at least 1");
  }

  if (root.has("solver")) {
    Node sv = root.at("solver");
    sv.only({"tolerance", "max_iterations", "threshold", "forcing_samples", "distance_tolerance",
             "distance_max_sweeps"});
    if (sv.has("tolerance")) s.solver.tolerance = sv.at("tolerance").positive();
    if (sv.has("max_iterations")) {
      s.solver.max_iterations = sv.at("max_iterations").integer();
      if (s.solver.max_iterations < 10) sv.at("max_iterations").fail("must be at least 10");
    }
    if (sv.has("threshold")) {
      s.solver.threshold = sv.at("threshold").number();
      if (!(s.solver.threshold >= 0.0 && s.solver.threshold < 0.5)) sv.at("threshold").fail("must lie in [0, 0.5)");
    }
    if (sv.has("forcing_samples")) {
      s.solver.forcing_samples = sv.at("forcing_samples").integer();
      if (s.solver.forcing_samples < 1) sv.at("forcing_samples").fail("must be at least 1");
    }
    if (sv.has("distance_tolerance")) s.solver.distance.tolerance = sv.at("distance_tolerance").positive();
    if (sv.has("distance_max_sweeps")) {
      s.solver.distance.max_sweeps = sv.at("distance_max_sweeps").integer();
      if (s.solver.distance.max_sweeps < 1) sv.at("distance_max_sweeps").fail("must be at least 1");
    }
  }
  s.margin_cells = root.integer_or("margin_cells", s.margin_cells);
  s.full_diagnostics = root.boolean_or("full_diagnostics", s.full_diagnostics);

  if (root.has("verify")) {
    Node v = root.at("verify");
    v.only({"dissipation_slack", "eikonal_median", "sandwich_violation", "submodularity_slack",
            "comparison_cells", "nesting_corrections"});
    VerifyTolerances& t = s.verify;
    t.dissipation_slack = v.number_or("dissipation_slack", t.dissipation_slack);
    t.eikonal_median = v.number_or("eikonal_median", t.eikonal_median);
    t.sandwich_violation = v.number_or("sandwich_violation", t.sandwich_violation);
    t.submodularity_slack = v.number_or("submodularity_slack", t.submodularity_slack);
    int cc = v.integer_or("comparison_cells", 0), nc = v.integer_or("nesting_corrections", 0);
    if (cc < 0) v.at("comparison_cells").fail("must be nonnegative");
    if (nc < 0) v.at("nesting_corrections").fail("must be nonnegative");
    t.comparison_cells = static_cast<std::size_t>(cc);
    t.nesting_corrections = static_cast<std::size_t>(nc);
  }

  std::vector<std::string> files;
  ShapeContext ctx{s.grid, base_dir, &files};
  Node init = root.at("initial");
  if (build_sets) {
    s.initial = SetState::from_level(parse_shape(init, ctx));
    if (root.has("companion")) s.companion = SetState::from_level(parse_shape(root.at("companion"), ctx));
  }

  if (root.has("levelset")) {
    Node ls = root.at("levelset");
    ls.only({"levels", "variant", "initial", "floor"});
    if (ls.has("levels")) {
      s.levelset.levels = ls.at("levels").integer();
      if (s.levelset.levels < 1) ls.at("levels").fail("must be at least 1");
    }
    if (ls.has("variant")) {
      std::string v = ls.at("variant").string();
      if (v == "plus") s.levelset.variant = LadderVariant::UpperPlus;
      else if (v == "minus") s.levelset.variant = LadderVariant::LowerMinus;
      else ls.at("variant").fail("expected 'plus' or 'minus'");
    }
    if (ls.has("floor")) s.levelset.floor = ls.at("floor").number();
    if (ls.has("initial")) {
      Node u = ls.at("initial");
      const std::string type = u.at("type").string();
      if (type == "cone") {
        u.only({"type", "center", "radius", "floor"});
        double fl = u.number_or("floor", 0.0);
        s.levelset.u0 = cone_function(s.grid, u.at("center").vec2(), u.at("radius").positive(), fl);
        if (!s.levelset.floor) s.levelset.floor = fl;
      } else if (type == "expression") {
        u.only({"type", "value"});
        Expression e = u.at("value").expression();
        s.levelset.u0 = tabulate(s.grid, [&](const Vec2& x) { return e(x.x(), x.y()); });
      } else {
        u.at("type").fail("unknown initial function type '" + type + "'");
      }
    }
  }

  std::uint64_t h = fnv1a64(s.canonical.data(), s.canonical.size());
  for (const std::string& f : files) h = fnv1a64(f.data(), f.size(), h);
  s.hash = h;
  return s;
}

Scenario load_scenario(const std::string& path, bool build_sets) {
  std::string text = read_file(path);
  std::filesystem::path p(path);
  std::string base = p.has_parent_path() ? p.parent_path().string() : std::string(".");
  return parse_scenario(text, base, build_sets);
}

}  // namespace atwflow
