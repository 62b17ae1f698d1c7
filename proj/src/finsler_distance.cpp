#include "atwflow/finsler_distance.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <optional>

#include "atwflow/error.hpp"

namespace atwflow {

std::string to_string(Orientation o) { return o == Orientation::FromSet ? "from_set" : "to_set"; }

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Eight neighbors in counter-clockwise order; consecutive entries span the
// eight triangles of the local update.
constexpr int kRingI[8] = {1, 1, 0, -1, -1, -1, 0, 1};
constexpr int kRingJ[8] = {0, 1, 1, 1, 0, -1, -1, -1};

class LocalSolver {
 public:
  LocalSolver(const AnisotropyModel& psi, const Grid& g) : psi_(psi), g_(g) {
    if (psi.x_independent()) {
      uniform_ = psi.polar_form(g.center(0, 0));
    } else if (psi.polar_form(g.center(0, 0))) {
      forms_.resize(g.size());
      for (std::size_t k = 0; k < g.size(); ++k) forms_[k] = *psi.polar_form(g.center(k));
    }
  }

  // min over theta in [0, 1] of (1 - theta) a + theta b + psi°(x, v0 - theta w),
  // with v0 = x - y1 and w = y2 - y1 in physical units.
  double solve(std::size_t k, const Vec2& x, double a, double b, const Vec2& v0, const Vec2& w) const {
    const Mat2* q = uniform_ ? &*uniform_ : (forms_.empty() ? nullptr : &forms_[k]);
    if (!std::isfinite(b)) return a + length(q, x, v0);
    if (!std::isfinite(a)) return b + length(q, x, v0 - w);
    double c = b - a;
    double best = std::min(a + length(q, x, v0), b + length(q, x, v0 - w));
    if (q) {
      // f(theta) = a + c theta + sqrt(alpha theta^2 + 2 beta theta + gamma).
      double alpha = w.dot(*q * w);
      double beta = -w.dot(*q * v0);
      double gamma = v0.dot(*q * v0);
      if (c * c < alpha) {
        double disc = std::max(0.0, alpha * gamma - beta * beta);
        double s = c == 0.0 ? 0.0 : std::copysign(std::sqrt(c * c * disc / (alpha - c * c)), c);
        double theta = (-beta - s) / alpha;
        if (theta > 0.0 && theta < 1.0) {
          double qq = std::max(0.0, (alpha * theta + 2.0 * beta) * theta + gamma);
          best = std::min(best, a + c * theta + std::sqrt(qq));
        }
      }
      return best;
    }
    // Convex in theta: golden-section search.
    auto f = [&](double t) { return a + c * t + psi_.polar(x, v0 - t * w); };
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double lo = 0.0, hi = 1.0;
    double t1 = hi - gr * (hi - lo), t2 = lo + gr * (hi - lo);
    double f1 = f(t1), f2 = f(t2);
    for (int it = 0; it < 30; ++it) {
      if (f1 < f2) {
        hi = t2;
        t2 = t1;
        f2 = f1;
        t1 = hi - gr * (hi - lo);
        f1 = f(t1);
      } else {
        lo = t1;
        t1 = t2;
        f1 = f2;
        t2 = lo + gr * (hi - lo);
        f2 = f(t2);
      }
    }
    return std::min({best, f1, f2});
  }

 private:
  double length(const Mat2* q, const Vec2& x, const Vec2& v) const {
    if (q) return std::sqrt(std::max(0.0, v.dot(*q * v)));
    return psi_.polar(x, v);
  }

  const AnisotropyModel& psi_;
  const Grid& g_;
  std::optional<Mat2> uniform_;
  std::vector<Mat2> forms_;
};

}  // namespace

ScalarField eikonal_solve(const ScalarField& boundary, const std::vector<std::uint8_t>& mask,
                          const AnisotropyModel& psi, Orientation orientation,
                          const DistanceOptions& options, int* sweeps) {
  const Grid& g = boundary.grid;
  if (mask.size() != g.size()) throw InputError("eikonal mask size does not match the grid");
  if (std::none_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; }))
    throw DegenerateSetError("eikonal solve needs a nonempty source mask");
  // dist^psi(x, y) = dist^reversed(y, x): a ToSet field is a FromSet field of the reversal.
  AnisotropyModel metric = orientation == Orientation::FromSet ? psi : psi.reversed();
  LocalSolver local(metric, g);

  ScalarField d(g, kInf);
  for (std::size_t k = 0; k < g.size(); ++k)
    if (mask[k]) d[k] = boundary[k];

  const double tol = options.tolerance * g.dx;
  int pass = 0;
  double group_change = 0.0;
  for (;;) {
    if (pass >= options.max_sweeps) {
      if (sweeps) *sweeps = pass;
      throw SolverError("eikonal sweeps did not converge", group_change);
    }
    int order = pass % 4;
    if (order == 0) group_change = 0.0;
    int di = (order == 0 || order == 3) ? 1 : -1;
    int dj = order < 2 ? 1 : -1;
    double pass_change = 0.0;
    for (int jj = 0; jj < g.ny; ++jj) {
      int j = dj > 0 ? jj : g.ny - 1 - jj;
      for (int ii = 0; ii < g.nx; ++ii) {
        int i = di > 0 ? ii : g.nx - 1 - ii;
        std::size_t k = g.index(i, j);
        if (mask[k]) continue;
        double cur = d[k];
        double nv[8];
        double lowest = kInf;
        for (int r = 0; r < 8; ++r) {
          int ni = i + kRingI[r], nj = j + kRingJ[r];
          nv[r] = (ni < 0 || nj < 0 || ni >= g.nx || nj >= g.ny) ? kInf : d(ni, nj);
          lowest = std::min(lowest, nv[r]);
        }
        if (!(lowest < cur)) continue;
        Vec2 x = g.center(i, j);
        double best = cur;
        for (int r = 0; r < 8; ++r) {
          int s = (r + 1) % 8;
          double a = nv[r], b = nv[s];
          if (!std::isfinite(a) && !std::isfinite(b)) continue;
          if (std::min(a, b) >= best) continue;
          Vec2 v0(-kRingI[r] * g.dx, -kRingJ[r] * g.dx);
          Vec2 w((kRingI[s] - kRingI[r]) * g.dx, (kRingJ[s] - kRingJ[r]) * g.dx);
          best = std::min(best, local.solve(k, x, a, b, v0, w));
        }
        best = std::min(best, options.cap);
        if (best < cur) {
          double change = std::isfinite(cur) ? cur - best : kInf;
          pass_change = std::max(pass_change, change);
          d[k] = best;
        }
      }
    }
    group_change = std::max(group_change, pass_change);
    ++pass;
    if (pass % 4 == 0 && group_change < tol) break;
  }
  if (sweeps) *sweeps = pass;
  return d;
}

namespace {

// Outer unit normal of { level < 0 } at cell (i, j) from central differences.
Vec2 level_normal(const ScalarField& l, int i, int j) {
  const Grid& g = l.grid;
  int i0 = std::max(i - 1, 0), i1 = std::min(i + 1, g.nx - 1);
  int j0 = std::max(j - 1, 0), j1 = std::min(j + 1, g.ny - 1);
  Vec2 n((l(i1, j) - l(i0, j)) / (i1 - i0), (l(i, j1) - l(i, j0)) / (j1 - j0));
  double r = n.norm();
  return r > 0.0 ? Vec2(n / r) : Vec2(1.0, 0.0);
}

// Signed distance from the zero crossing for the cells on either side of the
// boundary, scaled by 1 / psi(x, n); the remaining cells of E are excluded.
void boundary_band(const SetState& e, const AnisotropyModel& psi, ScalarField& values,
                   std::vector<std::uint8_t>& mask) {
  const Grid& g = e.grid();
  const ScalarField& l = e.level();
  values = ScalarField(g, kInf);
  mask.assign(g.size(), 0);
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      std::size_t k = g.index(i, j);
      const bool in = e.inside(k);
      if (in) mask[k] = 1;
      double inv2 = 0.0;
      int touches = 0;
      double along[2] = {kInf, kInf};
      for (int axis = 0; axis < 2; ++axis) {
        double theta = kInf;
        for (int sgn = -1; sgn <= 1; sgn += 2) {
          int ni = i + (axis == 0 ? sgn : 0), nj = j + (axis == 1 ? sgn : 0);
          if (ni < 0 || nj < 0 || ni >= g.nx || nj >= g.ny) continue;
          if (e.inside(g.index(ni, nj)) == in) continue;
          double lk = l[k], ln = l(ni, nj);
          theta = std::min(theta, lk / (lk - ln));
        }
        if (std::isfinite(theta)) {
          ++touches;
          double dist = theta * g.dx;
          along[axis] = dist;
          inv2 = dist > 0.0 ? inv2 + 1.0 / (dist * dist) : kInf;
        }
      }
      if (touches == 0) continue;
      Vec2 n = level_normal(l, i, j);
      double delta = std::isfinite(inv2) ? 1.0 / std::sqrt(inv2) : 0.0;
      if (touches == 1) {
        int axis = std::isfinite(along[0]) ? 0 : 1;
        delta = along[axis] * std::max(std::abs(n[axis]), 0.2);
      }
      Vec2 x = g.center(i, j);
      values[k] = (in ? -delta : delta) / psi.value(x, n);
      mask[k] = 1;
    }
  }
}

}  // namespace

DistanceField one_sided_distance(const SetState& e, const AnisotropyModel& psi, Orientation orientation,
                                 const DistanceOptions& options) {
  if (e.empty()) throw DegenerateSetError("distance from an empty set");
  // Distance to E under psi equals distance from E under the reversal.
  const AnisotropyModel metric = orientation == Orientation::FromSet ? psi : psi.reversed();
  ScalarField values;
  std::vector<std::uint8_t> mask;
  boundary_band(e, metric, values, mask);
  DistanceField out;
  out.orientation = orientation;
  out.values = eikonal_solve(values, mask, metric, Orientation::FromSet, options, &out.sweeps);
  for (std::size_t k = 0; k < mask.size(); ++k)
    if (e.inside(k)) out.values[k] = 0.0;
  return out;
}

DistanceField signed_distance(const SetState& e, const AnisotropyModel& psi, const DistanceOptions& options) {
  if (e.empty()) throw DegenerateSetError("signed distance of an empty set");
  if (e.full()) throw DegenerateSetError("signed distance of a set filling the grid");
  const Grid& g = e.grid();
  ScalarField vo, vi;
  std::vector<std::uint8_t> mo, mi;
  SetState ec = e.complement();
  AnisotropyModel rev = psi.reversed();
  boundary_band(e, psi, vo, mo);
  boundary_band(ec, rev, vi, mi);
  int so = 0, si = 0;
  ScalarField outside = eikonal_solve(vo, mo, psi, Orientation::FromSet, options, &so);
  ScalarField inside = eikonal_solve(vi, mi, rev, Orientation::FromSet, options, &si);
  DistanceField out;
  out.values = ScalarField(g);
  for (std::size_t k = 0; k < g.size(); ++k) out.values[k] = e.inside(k) ? -inside[k] : outside[k];
  out.sweeps = std::max(so, si);
  return out;
}

SandwichReport euclidean_sandwich_check(const DistanceField& field, const SetState& e,
                                        const AnisotropyModel& psi) {
  SandwichReport rep;
  rep.c = psi.bounds().c;
  DistanceField eu = signed_distance(e, make_euclidean());
  const Grid& g = e.grid();
  rep.min_ratio = kInf;
  for (std::size_t k = 0; k < g.size(); ++k) {
    double de = std::abs(eu.values[k]);
    double dp = std::abs(field.values[k]);
    if (de < 2.0 * g.dx || !std::isfinite(dp)) continue;
    double r = dp / de;
    rep.min_ratio = std::min(rep.min_ratio, r);
    rep.max_ratio = std::max(rep.max_ratio, r);
    double lo = 1.0 / rep.c, hi = rep.c;
    double v = std::max({0.0, (lo - r) / lo, (r - hi) / hi});
    rep.max_violation = std::max(rep.max_violation, v);
    ++rep.samples;
  }
  if (rep.samples == 0) rep.min_ratio = 0.0;
  return rep;
}

EikonalResidual eikonal_residual(const DistanceField& field, const AnisotropyModel& psi) {
  const ScalarField& d = field.values;
  const Grid& g = d.grid;
  EikonalResidual rep;
  std::vector<double> r;
  const double band = 2.0 * g.dx * psi.bounds().c;
  for (int j = 1; j + 1 < g.ny; ++j) {
    for (int i = 1; i + 1 < g.nx; ++i) {
      double v = d(i, j);
      if (std::abs(v) < band || !std::isfinite(v)) continue;
      double fx = (d(i + 1, j) - v) / g.dx, bx = (v - d(i - 1, j)) / g.dx;
      double fy = (d(i, j + 1) - v) / g.dx, by = (v - d(i, j - 1)) / g.dx;
      if (!std::isfinite(fx + bx + fy + by)) continue;
      double scale = std::max({std::abs(fx), std::abs(bx), std::abs(fy), std::abs(by), 1e-12});
      if (std::abs(fx - bx) > 0.5 * scale || std::abs(fy - by) > 0.5 * scale) {
        ++rep.cut_locus_cells;
        continue;
      }
      Vec2 grad(0.5 * (fx + bx), 0.5 * (fy + by));
      r.push_back(std::abs(psi.value(g.center(i, j), grad) - 1.0));
    }
  }
  rep.samples = r.size();
  if (!r.empty()) {
    std::nth_element(r.begin(), r.begin() + r.size() / 2, r.end());
    rep.median = r[r.size() / 2];
    rep.max = *std::max_element(r.begin(), r.end());
  }
  return rep;
}

void write_distance_dump(const DistanceField& field, const std::string& path) {
  const ScalarField& v = field.values;
  std::ofstream raw(path, std::ios::binary);
  if (!raw) throw InputError("cannot open " + path + " for writing");
  for (double x : v.values) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof bits);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    raw.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
  nlohmann::json side = {{"shape", {v.grid.ny, v.grid.nx}},
                         {"spacing", v.grid.dx},
                         {"origin", {v.grid.origin.x(), v.grid.origin.y()}},
                         {"dtype", "float64le"},
                         {"order", "row-major, row index j (y), column index i (x)"},
                         {"orientation", to_string(field.orientation)}};
  std::ofstream js(path + ".json");
  js << side.dump(2) << "\n";
}

}  // namespace atwflow
