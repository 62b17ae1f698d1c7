#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>

#include "atwflow/expression.hpp"

namespace atwflow {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Axis-aligned rectangle used for sampling model constants.
struct Box {
  Vec2 lower{0.0, 0.0};
  Vec2 upper{1.0, 1.0};
};

enum class Family { Euclidean, Riemannian, SmoothedLp, SpaceModulated, Reversed };

std::string to_string(Family f);

/// Constants of a regular elliptic integrand, sampled over a box unless the
/// family provides them exactly.
///
///   1/c |p| <= phi(x, p) <= c |p|
///   lambda bounds phi on the sphere, |grad_p| + ||hess_p||, and the inverse
///   ellipticity on the tangent space; lipschitz bounds the x-variation.
struct AnisotropyBounds {
  double c = 1.0;
  double lambda = 1.0;
  double lipschitz = 0.0;
  double ellipticity = 1.0;  ///< min over samples of t . hess_p(x, nu) t, t _|_ nu
  bool exact = false;
};

/// Position-dependent positive scalar with a gradient, used as modulation m(x).
class SpatialFunction {
 public:
  virtual ~SpatialFunction() = default;
  virtual double value(const Vec2& x) const = 0;
  virtual Vec2 gradient(const Vec2& x) const = 0;
  virtual bool is_constant() const = 0;
  virtual std::string describe() const = 0;
};

std::shared_ptr<const SpatialFunction> make_expression_function(const Expression& e);

namespace detail {
class AnisotropyKernel;
}

/// An anisotropy phi(x, p): convex and positively 1-homogeneous in p,
/// possibly position dependent. Immutable; all queries are thread-safe.
class AnisotropyModel {
 public:
  /// phi(x, p). Returns 0 at p = 0.
  double value(const Vec2& x, const Vec2& p) const;

  /// Derivatives in p; all throw DomainError at p = 0.
  Vec2 grad_p(const Vec2& x, const Vec2& p) const;
  Mat2 hess_p(const Vec2& x, const Vec2& p) const;
  /// Entry (i, j) is d/dx_i d/dp_j phi.
  Mat2 grad_x_grad_p(const Vec2& x, const Vec2& p) const;
  Vec2 grad_x(const Vec2& x, const Vec2& p) const;

  /// phi°(x, xi) = sup { xi . p : phi(x, p) <= 1 }.
  double polar(const Vec2& x, const Vec2& xi) const;

  /// Euclidean projection of z onto the Wulff shape { xi : phi°(x, xi) <= 1 }.
  Vec2 project_dual(const Vec2& x, const Vec2& z) const;

  /// p -> phi(x, -p).
  AnisotropyModel reversed() const;

  Family family() const;
  bool x_independent() const;
  bool closed_form_polar() const;
  /// Q with phi°(x, v) = sqrt(v . Q v), for families whose polar is a quadratic form.
  std::optional<Mat2> polar_form(const Vec2& x) const;
  const AnisotropyBounds& bounds() const { return bounds_; }
  std::string describe() const;

  /// Re-estimates the sampled constants over `box`.
  AnisotropyModel with_bounds_over(const Box& box) const;

  /// Low-level constructor used by the factories; the kernel type is opaque.
  AnisotropyModel(std::shared_ptr<const detail::AnisotropyKernel> kernel, AnisotropyBounds bounds);
  const std::shared_ptr<const detail::AnisotropyKernel>& kernel_for_wrapping() const { return kernel_; }

 private:

  std::shared_ptr<const detail::AnisotropyKernel> kernel_;
  AnisotropyBounds bounds_;
};

AnisotropyModel make_euclidean();
/// phi(x, p) = scale * |p|.
AnisotropyModel make_scaled_euclidean(double scale, const Box& box = {});
/// phi(x, p) = sqrt(p . A(x) p) with A = [[a11, a12], [a12, a22]].
AnisotropyModel make_riemannian(const Expression& a11, const Expression& a12, const Expression& a22,
                                const Box& box = {});
AnisotropyModel make_riemannian(const Mat2& a, const Box& box = {});
/// phi(p) = (|p1|^q + |p2|^q + eps |p|^q)^(1/q), q >= 2, eps > 0.
AnisotropyModel make_smoothed_lp(double exponent, double smoothing, const Box& box = {});
/// phi(x, p) = m(x) base(x, p), m > 0.
AnisotropyModel make_modulated(const AnisotropyModel& base, std::shared_ptr<const SpatialFunction> m,
                               const Box& box = {});
AnisotropyModel make_modulated(const AnisotropyModel& base, const Expression& m, const Box& box = {});

/// Polar by brute-force search: maximize xi . p / phi(x, p) over `directions`
/// uniform angles followed by one Newton refinement of the angle.
double polar_by_search(const AnisotropyModel& model, const Vec2& x, const Vec2& xi,
                       int directions = 4096);

/// phi-curvature of the superlevel set {u >= u(x)} of a function with
/// gradient g and Hessian hess at x:
///   H = sum_i d_{x_i} d_{p_i} phi(x, -g) - hess_p phi(x, -g) : hess.
/// Positive for convex sets. Throws DomainError when g = 0.
double curvature(const AnisotropyModel& phi, const Vec2& x, const Vec2& g, const Mat2& hess);

/// Area of { v : phi(x, v) <= 1 }, the unit ball of the metric phi°.
double unit_ball_area(const AnisotropyModel& phi, const Vec2& x);

/// phi*(x, nu) = pi |B(x)|^-1 phi(x, nu), the reweighting that recasts the
/// flow on the plane endowed with the Finsler metric phi°.
AnisotropyModel finsler_reweight(const AnisotropyModel& phi, const Box& box = {});

}  // namespace atwflow
