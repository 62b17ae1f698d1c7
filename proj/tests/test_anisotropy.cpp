#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "atwflow/anisotropy.hpp"
#include "atwflow/error.hpp"

using namespace atwflow;

namespace {

std::vector<AnisotropyModel> families() {
  return {make_euclidean(),
          make_scaled_euclidean(2.0),
          make_riemannian(Expression::parse("2 + 0.5*sin(x)"), Expression(0.3), Expression::parse("1 + 0.2*y")),
          make_smoothed_lp(4.0, 0.1),
          make_modulated(make_riemannian((Mat2() << 1.0, 0.2, 0.2, 0.6).finished()),
                         Expression::parse("1 + 0.3*x + 0.2*y*y")),
          make_riemannian((Mat2() << 1.0, 0.2, 0.2, 0.6).finished()).reversed()};
}

Vec2 random_vec(std::mt19937& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return Vec2(u(rng), u(rng));
}

}  // namespace

TEST_CASE("closed-form values") {
  CHECK(make_euclidean().value(Vec2(0.3, 0.1), Vec2(3, 4)) == doctest::Approx(5.0));
  AnisotropyModel r = make_riemannian((Mat2() << 4.0, 0.0, 0.0, 1.0).finished());
  CHECK(r.value(Vec2::Zero(), Vec2(1, 0)) == doctest::Approx(2.0));
  const double eps = 0.05;
  AnisotropyModel lp = make_smoothed_lp(4.0, eps);
  double v = lp.value(Vec2::Zero(), Vec2(1, 1));
  CHECK(v == doctest::Approx(std::pow(2.0 + eps * 4.0, 0.25)).epsilon(1e-12));
  CHECK(v >= std::pow(2.0, 0.25));
  CHECK(make_euclidean().value(Vec2::Zero(), Vec2::Zero()) == 0.0);
}

TEST_CASE("smoothed lp value equals the support function of its polar ball") {
  AnisotropyModel lp = make_smoothed_lp(4.0, 0.05);
  const Vec2 p(1.0, 1.0);
  double best = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double th = 2.0 * std::numbers::pi * i / n;
    Vec2 xi(std::cos(th), std::sin(th));
    best = std::max(best, xi.dot(p) / lp.polar(Vec2::Zero(), xi));
  }
  CHECK(best == doctest::Approx(lp.value(Vec2::Zero(), p)).epsilon(1e-6));
}

TEST_CASE("homogeneity, convexity, bounds and Euler identity on random samples") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> s(0.0, 3.0);
  for (const AnisotropyModel& m : families()) {
    CAPTURE(m.describe());
    const AnisotropyBounds& b = m.bounds();
    for (int i = 0; i < 1000; ++i) {
      Vec2 x = random_vec(rng) * 0.5 + Vec2(0.5, 0.5);
      Vec2 p = random_vec(rng), q = random_vec(rng);
      double t = s(rng);
      REQUIRE(m.value(x, t * p) == doctest::Approx(t * m.value(x, p)).epsilon(1e-12));
      REQUIRE(m.value(x, 0.5 * (p + q)) <= 0.5 * (m.value(x, p) + m.value(x, q)) + 1e-12);
      Vec2 nu = p.normalized();
      double v = m.value(x, nu);
      REQUIRE(v >= 1.0 / b.c - 1e-9);
      REQUIRE(v <= b.c + 1e-9);
      REQUIRE(m.grad_p(x, p).dot(p) == doctest::Approx(m.value(x, p)).epsilon(1e-10));
      REQUIRE((m.grad_p(x, (t + 0.1) * p) - m.grad_p(x, p)).norm() < 1e-10);
    }
  }
}

TEST_CASE("analytic derivatives match finite differences") {
  std::mt19937 rng(11);
  const double d = 1e-5;
  for (const AnisotropyModel& m : families()) {
    CAPTURE(m.describe());
    for (int i = 0; i < 200; ++i) {
      Vec2 x = random_vec(rng) * 0.4 + Vec2(0.5, 0.5);
      Vec2 p = random_vec(rng);
      if (p.norm() < 0.2) continue;
      Mat2 h = m.hess_p(x, p), fd_h, fd_xp;
      Vec2 gx = m.grad_x(x, p), fd_gx;
      for (int k = 0; k < 2; ++k) {
        Vec2 e = Vec2::Unit(k) * d;
        fd_h.col(k) = (m.grad_p(x, p + e) - m.grad_p(x, p - e)) / (2 * d);
        fd_xp.row(k) = ((m.grad_p(x + e, p) - m.grad_p(x - e, p)) / (2 * d)).transpose();
        fd_gx[k] = (m.value(x + e, p) - m.value(x - e, p)) / (2 * d);
      }
      const double scale = 1.0 + h.norm();
      REQUIRE((h - fd_h).norm() / scale < 1e-4);
      REQUIRE((m.grad_x_grad_p(x, p) - fd_xp).norm() / (1.0 + fd_xp.norm()) < 1e-4);
      REQUIRE((gx - fd_gx).norm() / (1.0 + fd_gx.norm()) < 1e-4);
      REQUIRE((h - h.transpose()).norm() < 1e-10);
    }
  }
  CHECK_THROWS_AS(make_euclidean().grad_p(Vec2::Zero(), Vec2::Zero()), DomainError);
  CHECK(make_euclidean().grad_p(Vec2::Zero(), Vec2(0, 1)).isApprox(Vec2(0, 1)));
}

TEST_CASE("ellipticity on the tangent space") {
  for (const AnisotropyModel& m : families()) {
    CAPTURE(m.describe());
    CHECK(m.bounds().ellipticity > 0.0);
    for (int i = 0; i < 64; ++i) {
      double th = 2.0 * std::numbers::pi * i / 64;
      Vec2 nu(std::cos(th), std::sin(th)), t(-nu.y(), nu.x());
      CHECK(t.dot(m.hess_p(Vec2(0.5, 0.5), nu) * t) > 0.0);
    }
  }
}

TEST_CASE("polar: closed forms, duality and the search fallback") {
  std::mt19937 rng(3);
  Mat2 a;
  a << 2.0, 0.4, 0.4, 1.0;
  AnisotropyModel r = make_riemannian(a);
  Mat2 ai = a.inverse();
  for (int i = 0; i < 100; ++i) {
    Vec2 xi = random_vec(rng);
    REQUIRE(r.polar(Vec2::Zero(), xi) == doctest::Approx(std::sqrt(xi.dot(ai * xi))).epsilon(1e-10));
  }
  CHECK(make_euclidean().polar(Vec2::Zero(), Vec2(3, 4)) == doctest::Approx(5.0));
  CHECK(r.polar(Vec2::Zero(), Vec2::Zero()) == 0.0);
  for (const AnisotropyModel& m : families()) {
    CAPTURE(m.describe());
    for (int i = 0; i < 1000; ++i) {
      Vec2 x = random_vec(rng) * 0.4 + Vec2(0.5, 0.5);
      Vec2 p = random_vec(rng), xi = random_vec(rng);
      REQUIRE(p.dot(xi) <= m.value(x, p) * m.polar(x, xi) + 1e-10);
      if (p.norm() > 0.1 && i % 10 == 0) {
        REQUIRE(m.polar(x, m.grad_p(x, p)) == doctest::Approx(1.0).epsilon(1e-4));
        REQUIRE(polar_by_search(m, x, xi) == doctest::Approx(m.polar(x, xi)).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("reversal") {
  AnisotropyModel r = make_riemannian((Mat2() << 1.0, 0.2, 0.2, 0.6).finished());
  AnisotropyModel lp = make_modulated(make_smoothed_lp(4.0, 0.2), Expression::parse("1 + 0.5*x"));
  for (const AnisotropyModel& m : {r, lp}) {
    AnisotropyModel rev = m.reversed();
    for (int i = 0; i < 16; ++i) {
      Vec2 x(0.1 * i, 0.3), p(std::cos(i), std::sin(2 * i) + 0.3);
      CHECK(rev.value(x, p) == doctest::Approx(m.value(x, -p)));
      CHECK(rev.polar(x, p) == doctest::Approx(m.polar(x, -p)));
    }
    CHECK(rev.family() == Family::Reversed);
  }
}

TEST_CASE("curvature operator") {
  const double R = 0.4;
  for (double th : {0.0, 0.7, 2.0, 4.0}) {
    Vec2 x(R * std::cos(th), R * std::sin(th));
    Vec2 g = -x / R;
    Mat2 hess = -(Mat2::Identity() - x * x.transpose() / (R * R)) / R;
    CHECK(curvature(make_euclidean(), x, g, hess) == doctest::Approx(1.0 / R));
  }
  AnisotropyModel lp = make_smoothed_lp(4.0, 0.1);
  CHECK(curvature(lp, Vec2(0.2, 0.3), Vec2(0.3, -1.0), Mat2::Zero()) == doctest::Approx(0.0));
  AnisotropyModel m = make_modulated(make_euclidean(), Expression::parse("1 + 0.3*x + 0.5*y"));
  CHECK(curvature(m, Vec2(0.4, 0.5), Vec2(0.0, -1.0), Mat2::Zero()) == doctest::Approx(0.5));
  CHECK_THROWS_AS(curvature(make_euclidean(), Vec2::Zero(), Vec2::Zero(), Mat2::Zero()), DomainError);
}

TEST_CASE("Wulff shape of a Riemannian anisotropy has unit curvature") {
  Mat2 a;
  a << 2.0, 0.5, 0.5, 1.0;
  AnisotropyModel r = make_riemannian(a);
  Mat2 ai = a.inverse();
  for (int i = 0; i < 12; ++i) {
    double th = 2.0 * std::numbers::pi * i / 12;
    Vec2 d(std::cos(th), std::sin(th));
    Vec2 x = d / std::sqrt(d.dot(ai * d));
    double q = std::sqrt(x.dot(ai * x));
    Vec2 g = -(ai * x) / q;
    Mat2 hess = -(ai / q - (ai * x) * (ai * x).transpose() / (q * q * q));
    CHECK(curvature(r, x, g, hess) == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("Finsler reweighting") {
  AnisotropyModel e = finsler_reweight(make_euclidean());
  CHECK(e.value(Vec2(0.3, 0.2), Vec2(1, 0)) == doctest::Approx(1.0).epsilon(1e-6));
  AnisotropyModel r = make_riemannian((Mat2() << 4.0, 0.0, 0.0, 1.0).finished());
  CHECK(unit_ball_area(r, Vec2::Zero()) == doctest::Approx(std::numbers::pi / 2).epsilon(1e-6));
  AnisotropyModel rw = finsler_reweight(r);
  CHECK(rw.value(Vec2(0.1, 0.9), Vec2(0.3, 0.4)) ==
        doctest::Approx(2.0 * r.value(Vec2::Zero(), Vec2(0.3, 0.4))).epsilon(1e-6));
  CHECK(rw.x_independent());
}

TEST_CASE("model errors") {
  CHECK_THROWS_AS(make_riemannian((Mat2() << 1.0, 2.0, 2.0, 1.0).finished()), ModelError);
  CHECK_THROWS_AS(make_smoothed_lp(1.5, 0.1), ModelError);
  CHECK_THROWS_AS(make_smoothed_lp(4.0, 0.0), ModelError);
  CHECK_THROWS_AS(make_modulated(make_euclidean(), Expression::parse("x - 0.5")), ModelError);
}
