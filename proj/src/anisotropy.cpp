#include "atwflow/anisotropy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "atwflow/error.hpp"

namespace atwflow {

std::string to_string(Family f) {
  switch (f) {
    case Family::Euclidean: return "euclidean";
    case Family::Riemannian: return "riemannian";
    case Family::SmoothedLp: return "smoothed_lp";
    case Family::SpaceModulated: return "modulated";
    case Family::Reversed: return "reversed";
  }
  return "unknown";
}

namespace detail {

class AnisotropyKernel {
 public:
  virtual ~AnisotropyKernel() = default;
  virtual double value(const Vec2& x, const Vec2& p) const = 0;
  virtual Vec2 grad_p(const Vec2& x, const Vec2& p) const = 0;
  virtual Mat2 hess_p(const Vec2& x, const Vec2& p) const = 0;
  virtual Mat2 grad_x_grad_p(const Vec2& x, const Vec2& p) const = 0;
  virtual Vec2 grad_x(const Vec2& x, const Vec2& p) const = 0;
  virtual double polar(const Vec2& x, const Vec2& xi) const = 0;
  virtual Vec2 project_dual(const Vec2& x, const Vec2& z) const = 0;
  virtual Family family() const = 0;
  virtual bool x_independent() const = 0;
  virtual bool closed_form_polar() const = 0;
  virtual std::string describe() const = 0;
  /// Sets q with phi°(x, v) = sqrt(v . q v) when the polar is a quadratic form.
  virtual bool polar_form(const Vec2&, Mat2&) const { return false; }
};

}  // namespace detail

namespace {

using detail::AnisotropyKernel;
using KernelPtr = std::shared_ptr<const AnisotropyKernel>;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Vec2 unit(double theta) { return {std::cos(theta), std::sin(theta)}; }

void require_nonzero(const Vec2& p) {
  if (p.x() == 0.0 && p.y() == 0.0) throw DomainError("anisotropy derivative requested at p = 0");
}

class ExpressionFunction final : public SpatialFunction {
 public:
  explicit ExpressionFunction(Expression e)
      : e_(std::move(e)),
        dx_(e_.derivative(Expression::Variable::X)),
        dy_(e_.derivative(Expression::Variable::Y)) {}
  double value(const Vec2& x) const override { return e_(x.x(), x.y()); }
  Vec2 gradient(const Vec2& x) const override { return {dx_(x.x(), x.y()), dy_(x.x(), x.y())}; }
  bool is_constant() const override { return e_.is_constant(); }
  std::string describe() const override { return e_.to_string(); }

 private:
  Expression e_, dx_, dy_;
};

// ---------------------------------------------------------------- Euclidean

class EuclideanKernel final : public AnisotropyKernel {
 public:
  double value(const Vec2&, const Vec2& p) const override { return p.norm(); }
  Vec2 grad_p(const Vec2&, const Vec2& p) const override {
    require_nonzero(p);
    return p / p.norm();
  }
  Mat2 hess_p(const Vec2&, const Vec2& p) const override {
    require_nonzero(p);
    double r = p.norm();
    Vec2 n = p / r;
    return (Mat2::Identity() - n * n.transpose()) / r;
  }
  Mat2 grad_x_grad_p(const Vec2&, const Vec2& p) const override {
    require_nonzero(p);
    return Mat2::Zero();
  }
  Vec2 grad_x(const Vec2&, const Vec2&) const override { return Vec2::Zero(); }
  double polar(const Vec2&, const Vec2& xi) const override { return xi.norm(); }
  Vec2 project_dual(const Vec2&, const Vec2& z) const override {
    double r = z.norm();
    return r <= 1.0 ? z : Vec2(z / r);
  }
  Family family() const override { return Family::Euclidean; }
  bool x_independent() const override { return true; }
  bool closed_form_polar() const override { return true; }
  std::string describe() const override { return "euclidean"; }
  bool polar_form(const Vec2&, Mat2& q) const override {
    q = Mat2::Identity();
    return true;
  }
};

// --------------------------------------------------------------- Riemannian

class RiemannianKernel final : public AnisotropyKernel {
 public:
  RiemannianKernel(Expression a11, Expression a12, Expression a22) : entries_{a11, a12, a22} {
    using V = Expression::Variable;
    for (int k = 0; k < 3; ++k) {
      dx_[k] = entries_[k].derivative(V::X);
      dy_[k] = entries_[k].derivative(V::Y);
    }
    constant_ = std::all_of(entries_.begin(), entries_.end(), [](const Expression& e) {
      return e.independent_of(Expression::Variable::X) && e.independent_of(Expression::Variable::Y);
    });
  }

  Mat2 matrix(const Vec2& x) const {
    Mat2 a = assemble(entries_, x);
    if (!(a(0, 0) > 0.0) || !(a.determinant() > 0.0)) {
      std::ostringstream os;
      os << "riemannian matrix is not SPD at x = (" << x.x() << ", " << x.y() << ")";
      throw ModelError(os.str());
    }
    return a;
  }

  double value(const Vec2& x, const Vec2& p) const override {
    if (p.isZero(0.0)) return 0.0;
    return std::sqrt(p.dot(matrix(x) * p));
  }
  Vec2 grad_p(const Vec2& x, const Vec2& p) const override {
    require_nonzero(p);
    Mat2 a = matrix(x);
    Vec2 ap = a * p;
    return ap / std::sqrt(p.dot(ap));
  }
  Mat2 hess_p(const Vec2& x, const Vec2& p) const override {
    require_nonzero(p);
    Mat2 a = matrix(x);
    Vec2 ap = a * p;
    double phi = std::sqrt(p.dot(ap));
    return a / phi - ap * ap.transpose() / (phi * phi * phi);
  }
  Mat2 grad_x_grad_p(const Vec2& x, const Vec2& p) const override {
    require_nonzero(p);
    Mat2 a = matrix(x);
    Vec2 ap = a * p;
    double phi = std::sqrt(p.dot(ap));
    Mat2 out;
    for (int k = 0; k < 2; ++k) {
      Mat2 ak = assemble(k == 0 ? dx_ : dy_, x);
      Vec2 row = ak * p / phi - ap * p.dot(ak * p) / (2.0 * phi * phi * phi);
      out.row(k) = row.transpose();
    }
    return out;
  }
  Vec2 grad_x(const Vec2& x, const Vec2& p) const override {
    if (p.isZero(0.0)) return Vec2::Zero();
    double phi = value(x, p);
    Vec2 g;
    for (int k = 0; k < 2; ++k) g[k] = p.dot(assemble(k == 0 ? dx_ : dy_, x) * p) / (2.0 * phi);
    return g;
  }
  double polar(const Vec2& x, const Vec2& xi) const override {
    if (xi.isZero(0.0)) return 0.0;
    return std::sqrt(xi.dot(matrix(x).inverse() * xi));
  }
  Vec2 project_dual(const Vec2& x, const Vec2& z) const override {
    Mat2 a = matrix(x);
    if (z.dot(a.inverse() * z) <= 1.0) return z;
    // Nearest point on the ellipse { xi . A^-1 xi = 1 }: xi = A (A + mu)^-1 z
    // with mu > 0 the root of a convex decreasing secular equation.
    Eigen::SelfAdjointEigenSolver<Mat2> eig(a);
    Vec2 lam = eig.eigenvalues();
    Vec2 zeta = eig.eigenvectors().transpose() * z;
    double mu = 0.0;
    for (int it = 0; it < 100; ++it) {
      double q = -1.0, dq = 0.0;
      for (int i = 0; i < 2; ++i) {
        double den = lam[i] + mu;
        q += lam[i] * zeta[i] * zeta[i] / (den * den);
        dq -= 2.0 * lam[i] * zeta[i] * zeta[i] / (den * den * den);
      }
      if (dq == 0.0) break;
      double step = q / dq;
      mu -= step;
      if (std::abs(step) <= 1e-15 * (1.0 + mu)) break;
    }
    Vec2 xi_e(lam[0] * zeta[0] / (lam[0] + mu), lam[1] * zeta[1] / (lam[1] + mu));
    return eig.eigenvectors() * xi_e;
  }
  Family family() const override { return Family::Riemannian; }
  bool x_independent() const override { return constant_; }
  bool polar_form(const Vec2& x, Mat2& q) const override {
    q = matrix(x).inverse();
    return true;
  }
  bool closed_form_polar() const override { return true; }
  std::string describe() const override {
    return "riemannian(a11=" + entries_[0].to_string() + ", a12=" + entries_[1].to_string() +
           ", a22=" + entries_[2].to_string() + ")";
  }

 private:
  static Mat2 assemble(const std::array<Expression, 3>& e, const Vec2& x) {
    Mat2 a;
    a(0, 0) = e[0](x.x(), x.y());
    a(0, 1) = a(1, 0) = e[1](x.x(), x.y());
    a(1, 1) = e[2](x.x(), x.y());
    return a;
  }

  std::array<Expression, 3> entries_;
  std::array<Expression, 3> dx_, dy_;
  bool constant_ = true;
};

// ---------------------------------------------------------------- SmoothedLp

class SmoothedLpKernel final : public AnisotropyKernel {
 public:
  static constexpr int kTableSize = 4096;

  SmoothedLpKernel(double q, double eps) : q_(q), eps_(eps) {
    // Angles of the Cahn-Hoffman map n(theta) -> grad_p phi(n), which is
    // strictly increasing for a smooth elliptic integrand. Inverting it gives
    // the normal whose Wulff-shape point lies in a given direction.
    beta_.resize(kTableSize + 1);
    for (int k = 0; k <= kTableSize; ++k) {
      Vec2 w = grad(unit(kTwoPi * k / kTableSize));
      double b = std::atan2(w.y(), w.x());
      if (k > 0) {
        while (b <= beta_[k - 1]) b += kTwoPi;
      }
      beta_[k] = b;
    }
  }

  double value(const Vec2&, const Vec2& p) const override { return eval(p); }
  Vec2 grad_p(const Vec2&, const Vec2& p) const override {
    require_nonzero(p);
    return grad(p);
  }
  Mat2 hess_p(const Vec2&, const Vec2& p) const override {
    require_nonzero(p);
    return hess(p);
  }
  Mat2 grad_x_grad_p(const Vec2&, const Vec2& p) const override {
    require_nonzero(p);
    return Mat2::Zero();
  }
  Vec2 grad_x(const Vec2&, const Vec2&) const override { return Vec2::Zero(); }

  double polar(const Vec2&, const Vec2& xi) const override {
    if (xi.isZero(0.0)) return 0.0;
    Vec2 n = unit(normal_angle(std::atan2(xi.y(), xi.x())));
    return xi.dot(n) / eval(n);
  }

  Vec2 project_dual(const Vec2& x, const Vec2& z) const override {
    if (polar(x, z) <= 1.0) return z;
    // Nearest boundary point w(theta) = grad phi(n(theta)) with z - w parallel
    // to n(theta): Newton on g(theta) = (z - w) . t.
    double theta = normal_angle(std::atan2(z.y(), z.x()));
    for (int it = 0; it < 60; ++it) {
      Vec2 n = unit(theta);
      Vec2 t(-n.y(), n.x());
      Vec2 w = grad(n);
      Mat2 h = hess(n);
      double g = (z - w).dot(t);
      double dg = -t.dot(h * t) - (z - w).dot(n);
      if (dg >= 0.0) break;
      double step = std::clamp(-g / dg, -0.5, 0.5);
      theta += step;
      if (std::abs(step) < 1e-14) return grad(unit(theta));
    }
    return project_by_search(z);
  }

  Family family() const override { return Family::SmoothedLp; }
  bool x_independent() const override { return true; }
  bool closed_form_polar() const override { return false; }
  std::string describe() const override {
    std::ostringstream os;
    os << "smoothed_lp(q=" << q_ << ", eps=" << eps_ << ")";
    return os.str();
  }

 private:
  double sum(const Vec2& p) const {
    double r = p.norm();
    return std::pow(std::abs(p.x()), q_) + std::pow(std::abs(p.y()), q_) + eps_ * std::pow(r, q_);
  }
  double eval(const Vec2& p) const {
    if (p.isZero(0.0)) return 0.0;
    return std::pow(sum(p), 1.0 / q_);
  }
  Vec2 inner_grad(const Vec2& p) const {
    double r = p.norm();
    Vec2 g;
    for (int i = 0; i < 2; ++i)
      g[i] = std::pow(std::abs(p[i]), q_ - 2.0) * p[i] + eps_ * std::pow(r, q_ - 2.0) * p[i];
    return g;
  }
  Vec2 grad(const Vec2& p) const { return std::pow(sum(p), (1.0 - q_) / q_) * inner_grad(p); }
  Mat2 hess(const Vec2& p) const {
    double s = sum(p);
    double r = p.norm();
    Vec2 g = inner_grad(p);
    Mat2 dg = Mat2::Zero();
    for (int i = 0; i < 2; ++i) dg(i, i) = (q_ - 1.0) * std::pow(std::abs(p[i]), q_ - 2.0);
    dg += eps_ * (std::pow(r, q_ - 2.0) * Mat2::Identity() +
                  (q_ - 2.0) * std::pow(r, q_ - 4.0) * p * p.transpose());
    return std::pow(s, (1.0 - q_) / q_) * (dg - (q_ - 1.0) * g * g.transpose() / s);
  }

  double normal_angle(double alpha) const {
    double a = beta_[0] + std::fmod(alpha - beta_[0] + 4.0 * kTwoPi, kTwoPi);
    auto it = std::upper_bound(beta_.begin(), beta_.end(), a);
    int k = std::clamp(static_cast<int>(it - beta_.begin()) - 1, 0, kTableSize - 1);
    double frac = (a - beta_[k]) / (beta_[k + 1] - beta_[k]);
    return kTwoPi * (k + frac) / kTableSize;
  }

  Vec2 project_by_search(const Vec2& z) const {
    double center = std::atan2(z.y(), z.x());
    auto dist2 = [&](double th) { return (z - grad(unit(th))).squaredNorm(); };
    double lo = center - 0.5 * std::numbers::pi, hi = center + 0.5 * std::numbers::pi;
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = hi - gr * (hi - lo), d = lo + gr * (hi - lo);
    for (int it = 0; it < 120; ++it) {
      if (dist2(c) < dist2(d)) hi = d;
      else lo = c;
      c = hi - gr * (hi - lo);
      d = lo + gr * (hi - lo);
    }
    return grad(unit(0.5 * (lo + hi)));
  }

  double q_, eps_;
  std::vector<double> beta_;
};

// ----------------------------------------------------------------- Modulated

class ModulatedKernel final : public AnisotropyKernel {
 public:
  ModulatedKernel(KernelPtr base, std::shared_ptr<const SpatialFunction> m)
      : base_(std::move(base)), m_(std::move(m)) {}

  double mod(const Vec2& x) const {
    double v = m_->value(x);
    if (!(v > 0.0)) {
      std::ostringstream os;
      os << "modulation " << m_->describe() << " is not positive at x = (" << x.x() << ", " << x.y()
         << ")";
      throw ModelError(os.str());
    }
    return v;
  }

  double value(const Vec2& x, const Vec2& p) const override { return mod(x) * base_->value(x, p); }
  Vec2 grad_p(const Vec2& x, const Vec2& p) const override { return mod(x) * base_->grad_p(x, p); }
  Mat2 hess_p(const Vec2& x, const Vec2& p) const override { return mod(x) * base_->hess_p(x, p); }
  Mat2 grad_x_grad_p(const Vec2& x, const Vec2& p) const override {
    return m_->gradient(x) * base_->grad_p(x, p).transpose() + mod(x) * base_->grad_x_grad_p(x, p);
  }
  Vec2 grad_x(const Vec2& x, const Vec2& p) const override {
    return m_->gradient(x) * base_->value(x, p) + mod(x) * base_->grad_x(x, p);
  }
  double polar(const Vec2& x, const Vec2& xi) const override { return base_->polar(x, xi) / mod(x); }
  Vec2 project_dual(const Vec2& x, const Vec2& z) const override {
    double m = mod(x);
    return m * base_->project_dual(x, z / m);
  }
  bool polar_form(const Vec2& x, Mat2& q) const override {
    if (!base_->polar_form(x, q)) return false;
    double m = mod(x);
    q /= m * m;
    return true;
  }
  Family family() const override { return Family::SpaceModulated; }
  bool x_independent() const override { return base_->x_independent() && m_->is_constant(); }
  bool closed_form_polar() const override { return base_->closed_form_polar(); }
  std::string describe() const override {
    return "modulated(" + base_->describe() + ", m=" + m_->describe() + ")";
  }

 private:
  KernelPtr base_;
  std::shared_ptr<const SpatialFunction> m_;
};

// ------------------------------------------------------------------ Reversed

class ReversedKernel final : public AnisotropyKernel {
 public:
  explicit ReversedKernel(KernelPtr base) : base_(std::move(base)) {}

  const KernelPtr& base() const { return base_; }

  double value(const Vec2& x, const Vec2& p) const override { return base_->value(x, -p); }
  Vec2 grad_p(const Vec2& x, const Vec2& p) const override { return -base_->grad_p(x, -p); }
  Mat2 hess_p(const Vec2& x, const Vec2& p) const override { return base_->hess_p(x, -p); }
  Mat2 grad_x_grad_p(const Vec2& x, const Vec2& p) const override {
    return -base_->grad_x_grad_p(x, -p);
  }
  Vec2 grad_x(const Vec2& x, const Vec2& p) const override { return base_->grad_x(x, -p); }
  double polar(const Vec2& x, const Vec2& xi) const override { return base_->polar(x, -xi); }
  Vec2 project_dual(const Vec2& x, const Vec2& z) const override {
    return -base_->project_dual(x, -z);
  }
  bool polar_form(const Vec2& x, Mat2& q) const override { return base_->polar_form(x, q); }
  Family family() const override { return Family::Reversed; }
  bool x_independent() const override { return base_->x_independent(); }
  bool closed_form_polar() const override { return base_->closed_form_polar(); }
  std::string describe() const override { return "reversed(" + base_->describe() + ")"; }

 private:
  KernelPtr base_;
};

// ------------------------------------------------------------------- Bounds

AnisotropyBounds sample_bounds(const AnisotropyKernel& k, const Box& box) {
  constexpr int kPoints = 7;
  constexpr int kDirs = 48;
  AnisotropyBounds b;
  double vmin = 1e300, vmax = 0.0, dmax = 0.0, emin = 1e300, lip = 0.0;
  std::vector<double> prev_val(kDirs);
  std::vector<Vec2> prev_grad(kDirs);
  Vec2 ext = box.upper - box.lower;
  for (int j = 0; j < kPoints; ++j) {
    for (int i = 0; i < kPoints; ++i) {
      Vec2 x = box.lower + Vec2(ext.x() * i / (kPoints - 1), ext.y() * j / (kPoints - 1));
      for (int d = 0; d < kDirs; ++d) {
        Vec2 nu = unit(kTwoPi * d / kDirs);
        double v = k.value(x, nu);
        Vec2 g = k.grad_p(x, nu);
        Mat2 h = k.hess_p(x, nu);
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
        dmax = std::max(dmax, g.norm() + h.operatorNorm());
        Vec2 t(-nu.y(), nu.x());
        emin = std::min(emin, t.dot(h * t));
        if (i > 0) {
          double step = ext.x() / (kPoints - 1);
          if (step > 0.0)
            lip = std::max(lip, (std::abs(v - prev_val[d]) + (g - prev_grad[d]).norm()) / step);
        }
        prev_val[d] = v;
        prev_grad[d] = g;
      }
    }
  }
  b.c = std::max(vmax, 1.0 / vmin);
  b.ellipticity = emin;
  b.lambda = std::max({vmax, 1.0 / vmin, dmax, emin > 0.0 ? 1.0 / emin : 1e300});
  b.lipschitz = lip;
  return b;
}

}  // namespace

std::shared_ptr<const SpatialFunction> make_expression_function(const Expression& e) {
  return std::make_shared<ExpressionFunction>(e);
}

AnisotropyModel make_model(std::shared_ptr<const detail::AnisotropyKernel> kernel, const Box& box) {
  AnisotropyBounds b = sample_bounds(*kernel, box);
  return AnisotropyModel(std::move(kernel), b);
}

AnisotropyModel::AnisotropyModel(std::shared_ptr<const detail::AnisotropyKernel> kernel,
                                 AnisotropyBounds bounds)
    : kernel_(std::move(kernel)), bounds_(bounds) {}

double AnisotropyModel::value(const Vec2& x, const Vec2& p) const { return kernel_->value(x, p); }
Vec2 AnisotropyModel::grad_p(const Vec2& x, const Vec2& p) const { return kernel_->grad_p(x, p); }
Mat2 AnisotropyModel::hess_p(const Vec2& x, const Vec2& p) const { return kernel_->hess_p(x, p); }
Mat2 AnisotropyModel::grad_x_grad_p(const Vec2& x, const Vec2& p) const {
  return kernel_->grad_x_grad_p(x, p);
}
Vec2 AnisotropyModel::grad_x(const Vec2& x, const Vec2& p) const { return kernel_->grad_x(x, p); }
double AnisotropyModel::polar(const Vec2& x, const Vec2& xi) const { return kernel_->polar(x, xi); }
Vec2 AnisotropyModel::project_dual(const Vec2& x, const Vec2& z) const {
  return kernel_->project_dual(x, z);
}

AnisotropyModel AnisotropyModel::reversed() const {
  // Reversing twice gives back the original kernel.
  if (auto r = std::dynamic_pointer_cast<const ReversedKernel>(kernel_))
    return AnisotropyModel(r->base(), bounds_);
  return AnisotropyModel(std::make_shared<ReversedKernel>(kernel_), bounds_);
}

Family AnisotropyModel::family() const { return kernel_->family(); }
bool AnisotropyModel::x_independent() const { return kernel_->x_independent(); }
bool AnisotropyModel::closed_form_polar() const { return kernel_->closed_form_polar(); }
std::string AnisotropyModel::describe() const { return kernel_->describe(); }

std::optional<Mat2> AnisotropyModel::polar_form(const Vec2& x) const {
  Mat2 q;
  if (kernel_->polar_form(x, q)) return q;
  return std::nullopt;
}

AnisotropyModel AnisotropyModel::with_bounds_over(const Box& box) const {
  return make_model(kernel_, box);
}

AnisotropyModel make_euclidean() {
  AnisotropyBounds b;
  b.exact = true;
  return AnisotropyModel(std::make_shared<EuclideanKernel>(), b);
}

AnisotropyModel make_scaled_euclidean(double scale, const Box& box) {
  if (!(scale > 0.0)) throw ModelError("euclidean scale must be positive");
  return make_model(
      std::make_shared<ModulatedKernel>(std::make_shared<EuclideanKernel>(),
                                        make_expression_function(Expression(scale))),
      box);
}

AnisotropyModel make_riemannian(const Expression& a11, const Expression& a12, const Expression& a22,
                                const Box& box) {
  auto k = std::make_shared<RiemannianKernel>(a11, a12, a22);
  // Probe SPD-ness at the sampling points; throws ModelError on failure.
  return make_model(k, box);
}

AnisotropyModel make_riemannian(const Mat2& a, const Box& box) {
  return make_riemannian(Expression(a(0, 0)), Expression(0.5 * (a(0, 1) + a(1, 0))), Expression(a(1, 1)),
                         box);
}

AnisotropyModel make_smoothed_lp(double exponent, double smoothing, const Box& box) {
  if (!(exponent >= 2.0)) throw ModelError("smoothed_lp exponent must be >= 2");
  if (!(smoothing > 0.0)) throw ModelError("smoothed_lp smoothing must be > 0");
  return make_model(std::make_shared<SmoothedLpKernel>(exponent, smoothing), box);
}

AnisotropyModel make_modulated(const AnisotropyModel& base, std::shared_ptr<const SpatialFunction> m,
                               const Box& box) {
  return make_model(std::make_shared<ModulatedKernel>(base.kernel_for_wrapping(), std::move(m)), box);
}

AnisotropyModel make_modulated(const AnisotropyModel& base, const Expression& m, const Box& box) {
  return make_modulated(base, make_expression_function(m), box);
}

double polar_by_search(const AnisotropyModel& model, const Vec2& x, const Vec2& xi, int directions) {
  if (xi.isZero(0.0)) return 0.0;
  auto ratio = [&](double th) {
    Vec2 p = unit(th);
    return xi.dot(p) / model.value(x, p);
  };
  int best = 0;
  double best_val = -1e300;
  for (int k = 0; k < directions; ++k) {
    double v = ratio(kTwoPi * k / directions);
    if (v > best_val) {
      best_val = v;
      best = k;
    }
  }
  // One Newton step on the angle with centered differences.
  double th = kTwoPi * best / directions;
  double step = 1e-4;
  double f0 = ratio(th), fp = ratio(th + step), fm = ratio(th - step);
  double d1 = (fp - fm) / (2.0 * step);
  double d2 = (fp - 2.0 * f0 + fm) / (step * step);
  if (d2 < 0.0) {
    double delta = std::clamp(-d1 / d2, -kTwoPi / directions, kTwoPi / directions);
    best_val = std::max(best_val, ratio(th + delta));
  }
  return best_val;
}

double curvature(const AnisotropyModel& phi, const Vec2& x, const Vec2& g, const Mat2& hess) {
  if (g.isZero(0.0)) throw DomainError("curvature requested at a point with vanishing gradient");
  Vec2 p = -g;
  return phi.grad_x_grad_p(x, p).trace() - phi.hess_p(x, p).cwiseProduct(hess).sum();
}

namespace {

constexpr int kAreaNodes = 720;

double ball_area(const AnisotropyModel& phi, const Vec2& x) {
  // Area of the star-shaped set with radial function 1 / phi(x, e_theta);
  // trapezoid rule is spectrally accurate for the periodic integrand.
  double acc = 0.0;
  for (int k = 0; k < kAreaNodes; ++k) {
    double v = phi.value(x, unit(kTwoPi * k / kAreaNodes));
    acc += 1.0 / (v * v);
  }
  return 0.5 * acc * kTwoPi / kAreaNodes;
}

Vec2 ball_area_gradient(const AnisotropyModel& phi, const Vec2& x) {
  Vec2 acc = Vec2::Zero();
  for (int k = 0; k < kAreaNodes; ++k) {
    Vec2 e = unit(kTwoPi * k / kAreaNodes);
    double v = phi.value(x, e);
    acc -= phi.grad_x(x, e) / (v * v * v);
  }
  return acc * kTwoPi / kAreaNodes;
}

class ReweightFunction final : public SpatialFunction {
 public:
  explicit ReweightFunction(AnisotropyModel phi) : phi_(std::move(phi)) {}
  double value(const Vec2& x) const override { return std::numbers::pi / checked_area(x); }
  Vec2 gradient(const Vec2& x) const override {
    double a = checked_area(x);
    return -std::numbers::pi / (a * a) * ball_area_gradient(phi_, x);
  }
  bool is_constant() const override { return false; }
  std::string describe() const override { return "pi/|B(" + phi_.describe() + ")|"; }

 private:
  double checked_area(const Vec2& x) const {
    double a = ball_area(phi_, x);
    if (!std::isfinite(a) || !(a > 0.0)) throw ModelError("unit-ball quadrature failed");
    return a;
  }
  AnisotropyModel phi_;
};

}  // namespace

double unit_ball_area(const AnisotropyModel& phi, const Vec2& x) { return ball_area(phi, x); }

AnisotropyModel finsler_reweight(const AnisotropyModel& phi, const Box& box) {
  if (phi.x_independent()) {
    double a = ball_area(phi, Vec2::Zero());
    if (!std::isfinite(a) || !(a > 0.0)) throw ModelError("unit-ball quadrature failed");
    return make_modulated(phi, Expression(std::numbers::pi / a), box);
  }
  return make_modulated(phi, std::make_shared<ReweightFunction>(phi), box);
}

}  // namespace atwflow
