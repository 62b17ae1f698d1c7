#include "atwflow/verification.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "atwflow/error.hpp"

namespace atwflow {

namespace {

double bump1(double t) {
  double a = std::abs(t);
  return a < 1.0 ? (1.0 - a) * (1.0 - a) * (1.0 + 2.0 * a) : 0.0;
}

double bump1_d(double t) {
  double a = std::abs(t);
  return a < 1.0 ? -6.0 * t * (1.0 - a) : 0.0;
}

struct Lattice {
  Vec2 origin;
  double s = 0.0;
  int nx = 0, ny = 0;

  Lattice(const Box& box, double spacing) : origin(box.lower), s(spacing) {
    nx = static_cast<int>(std::ceil((box.upper.x() - box.lower.x()) / s - 1e-9)) + 1;
    ny = static_cast<int>(std::ceil((box.upper.y() - box.lower.y()) / s - 1e-9)) + 1;
  }
  int size() const { return nx * ny; }
  Vec2 node(int n) const { return origin + s * Vec2(n % nx, n / nx); }

  /// Nodes whose bump is nonzero at x.
  template <class F>
  void visit(const Vec2& x, F&& f) const {
    Vec2 z = (x - origin) / s;
    int i0 = static_cast<int>(std::floor(z.x())), j0 = static_cast<int>(std::floor(z.y()));
    for (int j = j0; j <= j0 + 1; ++j)
      for (int i = i0; i <= i0 + 1; ++i) {
        if (i < 0 || j < 0 || i >= nx || j >= ny) continue;
        double tx = z.x() - i, ty = z.y() - j;
        double b = bump1(tx) * bump1(ty);
        Vec2 grad(bump1_d(tx) * bump1(ty) / s, bump1(tx) * bump1_d(ty) / s);
        f(j * nx + i, b, grad);
      }
  }
};

}  // namespace

double pointwise_curvature(const AnisotropyModel& phi, const Vec2& x, const Vec2& grad_level,
                           const Mat2& hess_level) {
  return curvature(phi, x, -grad_level, -hess_level);
}

WeakCurvatureFit weak_curvature(const SetState& e, const AnisotropyModel& phi, const WeakCurvatureOptions& options) {
  std::vector<Segment> segs = extract_interface(e.level());
  if (segs.size() < options.min_points)
    throw DegenerateSetError("too few boundary points for the weak curvature fit");
  const Box box = e.grid().box();
  WeakCurvatureFit fit;
  fit.coarse_spacing = options.coarse_spacing > 0.0
                           ? options.coarse_spacing
                           : std::min(box.upper.x() - box.lower.x(), box.upper.y() - box.lower.y()) / 8.0;
  fit.fine_spacing = 0.5 * fit.coarse_spacing;
  const Lattice coarse(box, fit.coarse_spacing), fine(box, fit.fine_spacing);

  for (const Segment& s : segs) {
    fit.points.push_back(s.midpoint());
    fit.normals.push_back(s.normal);
    fit.lengths.push_back(s.length());
  }

  // Unknowns: nodal values of H, piecewise linear in arclength along every
  // boundary chain with node spacing close to the fine lattice spacing.
  std::vector<std::array<std::pair<int, double>, 2>> hat(segs.size());
  int columns = 0;
  for (const InterfaceChain& ch : interface_chains(e.level())) {
    double total = 0.0;
    for (std::size_t q : ch.segments) total += fit.lengths[q];
    const long want = std::lround(total / fit.fine_spacing);
    const int nodes = ch.closed ? static_cast<int>(std::max(3L, want)) : static_cast<int>(std::max(2L, want + 1));
    const double step = ch.closed ? total / nodes : total / (nodes - 1);
    double s = 0.0;
    for (std::size_t q : ch.segments) {
      double u = (s + 0.5 * fit.lengths[q]) / step;
      s += fit.lengths[q];
      int i = static_cast<int>(std::floor(u));
      double frac = u - i;
      int i0 = i, i1 = i + 1;
      if (ch.closed) {
        i0 = ((i0 % nodes) + nodes) % nodes;
        i1 = ((i1 % nodes) + nodes) % nodes;
      } else {
        i0 = std::clamp(i0, 0, nodes - 1);
        i1 = std::clamp(i1, 0, nodes - 1);
      }
      hat[q] = {std::make_pair(columns + i0, 1.0 - frac), std::make_pair(columns + i1, frac)};
    }
    columns += nodes;
  }

  // Rows: test fields b e_a on both lattices, indexed by (lattice, node, a).
  std::map<long, int> row;
  auto row_of = [&](int lattice, int node, int a) {
    long key = (static_cast<long>(node) * 2 + a) * 2 + lattice;
    auto it = row.find(key);
    if (it != row.end()) return it->second;
    int r = static_cast<int>(row.size());
    row.emplace(key, r);
    return r;
  };
  struct Entry {
    int r, c;
    double v;
  };
  std::vector<Entry> entries;
  std::map<int, double> rhs;
  for (std::size_t q = 0; q < segs.size(); ++q) {
    const Vec2 x = fit.points[q], nu = fit.normals[q];
    const double len = fit.lengths[q];
    const double ph = phi.value(x, nu);
    const Vec2 gx = phi.grad_x(x, nu);
    const Vec2 gp = phi.grad_p(x, nu);
    const auto& hb = hat[q];
    int lat = 0;
    for (const Lattice* l : {&coarse, &fine}) {
      l->visit(x, [&](int n, double b, const Vec2& gb) {
        if (b == 0.0 && gb.squaredNorm() == 0.0) return;
        for (int a = 0; a < 2; ++a) {
          double lhs = gx[a] * b + ph * gb[a] - nu[a] * gp.dot(gb);
          int r = row_of(lat, n, a);
          rhs[r] += len * lhs;
          for (auto [c, hv] : hb) entries.push_back({r, c, len * hv * b * nu[a]});
        }
      });
      ++lat;
    }
  }
  fit.unknowns = static_cast<std::size_t>(columns);
  fit.equations = row.size();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(fit.equations),
                                            static_cast<Eigen::Index>(fit.unknowns));
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fit.equations));
  for (const Entry& en : entries) a(en.r, en.c) += en.v;
  for (auto [r, v] : rhs) b[r] = v;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
  Eigen::VectorXd c = cod.solve(b);
  fit.rank = static_cast<int>(cod.rank());
  double bn = b.norm();
  fit.residual = bn > 0.0 ? (a * c - b).norm() / bn : 0.0;

  fit.curvature.resize(segs.size());
  for (std::size_t q = 0; q < segs.size(); ++q)
    fit.curvature[q] = hat[q][0].second * c[hat[q][0].first] + hat[q][1].second * c[hat[q][1].first];
  return fit;
}

std::vector<TestFunction> default_test_functions(const Vec2& center, double radius, double horizon) {
  auto a = [horizon](double t) {
    double s = std::max(0.0, 1.0 - t / horizon);
    return s * s;
  };
  auto rho = [center, radius](const Vec2& x) { return bump1((x - center).norm() / radius); };
  std::vector<TestFunction> out;
  out.push_back({"radial", [=](const Vec2& x, double t) { return a(t) * rho(x); }});
  out.push_back({"tilted", [=](const Vec2& x, double t) {
                   return a(t) * rho(x) * (1.0 + 0.5 * (x.x() - center.x()) / radius);
                 }});
  out.push_back({"saddle", [=](const Vec2& x, double t) {
                   Vec2 d = (x - center) / radius;
                   return a(t) * rho(x) * (1.0 + d.x() * d.y());
                 }});
  out.push_back({"oscillating", [=](const Vec2& x, double t) {
                   return std::max(0.0, 1.0 - t / horizon) * std::cos(0.5 * M_PI * t / horizon) * rho(x);
                 }});
  return out;
}

namespace {

double relative_defect(double l, double r) {
  double scale = std::max(std::abs(l), std::abs(r));
  return scale > 0.0 ? std::abs(l - r) / scale : 0.0;
}

/// Two-point Gauss rule on [t0, t1].
template <class F>
double time_integral(double t0, double t1, F&& f) {
  const double half = 0.5 * (t1 - t0), mid = 0.5 * (t0 + t1), off = half / std::sqrt(3.0);
  return half * (f(mid - off) + f(mid + off));
}

}  // namespace

DistributionalReport distributional_laws_check(const FlowTrace& trace, const AnisotropyModel& phi,
                                               const AnisotropyModel& psi, const Expression& forcing,
                                               const std::vector<TestFunction>& tests) {
  if (trace.steps.size() < 3) throw InputError("distributional laws need at least 3 steps");
  const std::size_t kmax = trace.steps.size();
  for (const StepRecord& s : trace.steps)
    if (s.boundary.empty() && !trace.states[static_cast<std::size_t>(s.step)].empty())
      throw InputError("trace was run without boundary samples");
  const std::size_t nt = tests.size();
  std::vector<double> cl(nt, 0.0), cr(nt, 0.0), vl(nt, 0.0), vr(nt, 0.0);
  DistributionalReport rep;
  for (std::size_t k = 0; k < kmax; ++k) {
    const double t0 = trace.times[k], t1 = trace.times[k + 1];
    const SetState& e = trace.states[k];
    if (e.empty()) continue;
    WeakCurvatureFit fit = weak_curvature(e, phi, {0.0, 1});
    const std::vector<BoundarySample>* vel = k > 0 ? &trace.steps[k - 1].boundary : nullptr;
    if (vel && vel->size() != fit.points.size()) throw Error("boundary samples do not match the state");
    for (std::size_t q = 0; q < fit.points.size(); ++q) {
      const Vec2 x = fit.points[q];
      const double len = fit.lengths[q], hq = fit.curvature[q];
      const double v = vel ? (*vel)[q].v : 0.0;
      const double ps = psi.value(x, fit.normals[q]);
      rep.curvature_l2 += (t1 - t0) * len * hq * hq;
      rep.velocity_l2 += (t1 - t0) * len * v * v;
      for (std::size_t i = 0; i < nt; ++i) {
        const auto& eta = tests[i].eta;
        double ie = time_integral(t0, t1, [&](double t) { return eta(x, t); });
        double ife = time_integral(t0, t1, [&](double t) { return forcing(x.x(), x.y(), t) * eta(x, t); });
        cl[i] += -len * v * ie;
        cr[i] += len * (hq * ie - ife);
        vr[i] += -len * ps * v * ie;
      }
    }
  }
  // int_0^T int_{E_t} eta_t + int_{E_0} eta(0) for the piecewise constant flow.
  for (std::size_t k = 1; k <= kmax; ++k) {
    const double tk = trace.times[k];
    box_quadrature(trace.states[k - 1].level(), &trace.states[k].level(), kDefaultSubsamples,
                   [&](const Vec2& x, double w, double la, double lb) {
                     bool in_prev = la < 0.0, in_cur = lb < 0.0;
                     if (in_prev == in_cur) return;
                     double sgn = in_prev ? w : -w;
                     for (std::size_t i = 0; i < nt; ++i) vl[i] += sgn * tests[i].eta(x, tk);
                   });
  }
  const double tk = trace.times[kmax];
  box_quadrature(trace.states[kmax].level(), nullptr, kDefaultSubsamples,
                 [&](const Vec2& x, double w, double l, double) {
                   if (l >= 0.0) return;
                   for (std::size_t i = 0; i < nt; ++i) vl[i] += w * tests[i].eta(x, tk);
                 });
  for (std::size_t i = 0; i < nt; ++i) {
    rep.curvature_law.push_back({tests[i].name, cl[i], cr[i], relative_defect(cl[i], cr[i])});
    rep.velocity_law.push_back({tests[i].name, vl[i], vr[i], relative_defect(vl[i], vr[i])});
    rep.curvature_defect = std::max(rep.curvature_defect, rep.curvature_law.back().defect);
    rep.velocity_defect = std::max(rep.velocity_defect, rep.velocity_law.back().defect);
  }
  return rep;
}

namespace {

void derivatives(const ImplicitShape& s, const Vec2& x, double d, Vec2& grad, Mat2& hess) {
  const Vec2 ex(d, 0.0), ey(0.0, d);
  const double c = s.level(x);
  const double xp = s.level(x + ex), xm = s.level(x - ex), yp = s.level(x + ey), ym = s.level(x - ey);
  grad = Vec2((xp - xm) / (2 * d), (yp - ym) / (2 * d));
  hess(0, 0) = (xp - 2 * c + xm) / (d * d);
  hess(1, 1) = (yp - 2 * c + ym) / (d * d);
  hess(0, 1) = hess(1, 0) =
      (s.level(x + ex + ey) - s.level(x + ex - ey) - s.level(x - ex + ey) + s.level(x - ex - ey)) / (4 * d * d);
}

}  // namespace

MonotonicityReport monotonicity_check(const ImplicitShape& inner, const ImplicitShape& outer, const Vec2& x,
                                      const AnisotropyModel& phi, double tolerance, double step) {
  Vec2 gi, go;
  Mat2 hi, ho;
  derivatives(inner, x, step, gi, hi);
  derivatives(outer, x, step, go, ho);
  MonotonicityReport rep;
  rep.inner_curvature = pointwise_curvature(phi, x, gi, hi);
  rep.outer_curvature = pointwise_curvature(phi, x, go, ho);
  rep.normal_mismatch = (gi.normalized() - go.normalized()).norm();
  rep.holds = rep.outer_curvature <= rep.inner_curvature + tolerance;
  return rep;
}

double discrete_perimeter(const SetState& e, const AnisotropyModel& phi) {
  const Grid& g = e.grid();
  double acc = 0.0;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      double c = e.inside(g.index(i, j)) ? 1.0 : 0.0;
      double dx = i + 1 < g.nx ? (e.inside(g.index(i + 1, j)) ? 1.0 : 0.0) - c : 0.0;
      double dy = j + 1 < g.ny ? (e.inside(g.index(i, j + 1)) ? 1.0 : 0.0) - c : 0.0;
      if (dx != 0.0 || dy != 0.0) acc += phi.value(g.center(i, j), Vec2(dx, dy));
    }
  return acc * g.dx;
}

SubmodularityReport submodularity_check(const SetState& a, const SetState& b, const AnisotropyModel& phi,
                                        bool discrete) {
  if (!(a.grid() == b.grid())) throw InputError("sets live on different grids");
  ScalarField uni = a.level(), inter = a.level();
  for (std::size_t k = 0; k < uni.values.size(); ++k) {
    uni[k] = std::min(a.level()[k], b.level()[k]);
    inter[k] = std::max(a.level()[k], b.level()[k]);
  }
  SetState su = SetState::from_level(std::move(uni)), si = SetState::from_level(std::move(inter));
  auto per = [&](const SetState& s) { return discrete ? discrete_perimeter(s, phi) : perimeter(s, phi); };
  SubmodularityReport rep;
  rep.union_plus_intersection = per(su) + per(si);
  rep.sum = per(a) + per(b);
  return rep;
}

void VerificationReport::add(const std::string& name, double measured, double threshold, bool pass, bool hard,
                             const std::string& note) {
  rows_.push_back({name, pass ? "pass" : "fail", measured, threshold, hard, note});
}

void VerificationReport::info(const std::string& name, double measured, const std::string& note) {
  rows_.push_back({name, "info", measured, 0.0, false, note});
}

bool VerificationReport::hard_failure() const {
  return std::any_of(rows_.begin(), rows_.end(), [](const CheckRow& r) { return r.hard && r.status == "fail"; });
}

namespace {

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

void VerificationReport::write_markdown(const std::string& path, const std::string& title) const {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path);
  os << "# " << title << "\n\n| check | status | measured | threshold | hard | note |\n|---|---|---|---|---|---|\n";
  for (const CheckRow& r : rows_)
    os << "| " << r.name << " | " << r.status << " | " << num(r.measured) << " | "
       << (r.status == "info" ? std::string("-") : num(r.threshold)) << " | " << (r.hard ? "yes" : "no") << " | "
       << r.note << " |\n";
}

void VerificationReport::write_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path);
  os << "check,status,measured,threshold,hard,note\n";
  for (const CheckRow& r : rows_)
    os << csv_field(r.name) << ',' << r.status << ',' << num(r.measured) << ',' << num(r.threshold) << ','
       << (r.hard ? 1 : 0) << ',' << csv_field(r.note) << '\n';
}

}  // namespace atwflow
