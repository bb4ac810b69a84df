// Test-only oracles: finite differences, dense closest-point search, and a
// generator of random expressions that stay smooth on the sampling box.
// These are kept independent of the library's derivative and projection
// paths on purpose; they are what the exact code is checked against.
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "propnormal/propnormal.hpp"

namespace testsupport {

using propnormal::Expr;
using propnormal::Mat;
using propnormal::Rng;
using propnormal::Vec;

inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x,
                       double h) {
  Vec g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vec xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

inline Mat fd_hessian(const std::function<double(const Vec&)>& f, const Vec& x,
                      double h) {
  const Eigen::Index n = x.size();
  Mat H(n, n);
  const double f0 = f(x);
  for (Eigen::Index i = 0; i < n; ++i) {
    Vec xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    H(i, i) = (f(xp) - 2.0 * f0 + f(xm)) / (h * h);
    for (Eigen::Index j = 0; j < i; ++j) {
      Vec xpp = x, xpm = x, xmp = x, xmm = x;
      xpp[i] += h; xpp[j] += h;
      xpm[i] += h; xpm[j] -= h;
      xmp[i] -= h; xmp[j] += h;
      xmm[i] -= h; xmm[j] -= h;
      double v = (f(xpp) - f(xpm) - f(xmp) + f(xmm)) / (4.0 * h * h);
      H(i, j) = v;
      H(j, i) = v;
    }
  }
  return H;
}

/// J(j, k) = d_j F_k by central differences.
inline Mat fd_jacobian(const std::function<Vec(const Vec&)>& field,
                       const Vec& x, double h) {
  const Eigen::Index n = x.size();
  Mat J(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Vec xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    J.row(j) = ((field(xp) - field(xm)) / (2.0 * h)).transpose();
  }
  return J;
}

struct ClosestPoint {
  Vec foot;
  double distance = 0.0;
};

/// Brute-force nearest point on the ellipse x1^2 + 2 x2^2 = 1 by dense
/// sampling of the parameterization (cos a, sin a / sqrt 2).
inline ClosestPoint ellipse_closest_point(const Vec& x, long samples) {
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  ClosestPoint best;
  best.distance = std::numeric_limits<double>::infinity();
  const double two_pi = 6.283185307179586476925286766559;
  for (long i = 0; i < samples; ++i) {
    double a = two_pi * static_cast<double>(i) / static_cast<double>(samples);
    Vec p(2);
    p << std::cos(a), inv_sqrt2 * std::sin(a);
    double d = (p - x).norm();
    if (d < best.distance) {
      best.distance = d;
      best.foot = p;
    }
  }
  return best;
}

/// Random expression that is smooth (C^2 with moderate derivatives) on
/// [-1.5, 1.5]^dim. Domain-restricted primitives only appear wrapped in
/// arguments bounded away from the trouble spots.
inline Expr random_smooth_expr(Rng& rng, int dim, int depth) {
  using Op = Expr::UnaryOp;
  using Bop = Expr::BinaryOp;
  auto leaf = [&]() {
    if (rng.uniform() < 0.7)
      return Expr::variable(1 + static_cast<int>(rng.uniform() * dim), dim);
    return Expr::constant(rng.uniform(-2.0, 2.0), dim);
  };
  if (depth <= 0) return leaf();
  double pick = rng.uniform();
  Expr a = random_smooth_expr(rng, dim, depth - 1);
  if (pick < 0.16) return Expr::binary(Bop::Add, a, random_smooth_expr(rng, dim, depth - 1));
  if (pick < 0.32) return Expr::binary(Bop::Sub, a, random_smooth_expr(rng, dim, depth - 1));
  if (pick < 0.44) return Expr::unary(Op::Sin, a);
  if (pick < 0.56) return Expr::unary(Op::Cos, a);
  if (pick < 0.62) return Expr::unary(Op::Neg, a);
  // bounded argument for exp: sin(a) in [-1, 1]
  if (pick < 0.68) return Expr::unary(Op::Exp, Expr::unary(Op::Sin, a));
  // positive arguments: 2.5 + sin(a) >= 1.5
  Expr positive =
      Expr::binary(Bop::Add, Expr::constant(2.5, dim), Expr::unary(Op::Sin, a));
  if (pick < 0.74) return Expr::unary(Op::Log, positive);
  if (pick < 0.80) return Expr::unary(Op::Sqrt, positive);
  if (pick < 0.86)
    return Expr::binary(Bop::Div, random_smooth_expr(rng, dim, depth - 1),
                        positive);
  if (pick < 0.92) {
    // bounded base keeps the finite-difference oracle inside its accuracy
    // regime: |0.8 sin(a)| <= 0.8, so high derivatives stay moderate
    int e = 2 + static_cast<int>(rng.uniform() * 3.0);  // 2..4
    Expr base = Expr::binary(Bop::Mul, Expr::constant(0.8, dim),
                             Expr::unary(Op::Sin, a));
    return Expr::binary(Bop::Pow, base, Expr::constant(e, dim));
  }
  if (pick < 0.96)
    return Expr::binary(Bop::Pow, positive,
                        Expr::constant(rng.uniform(-1.5, 1.5), dim));
  return Expr::binary(Bop::Mul, a, random_smooth_expr(rng, dim, depth - 1));
}

inline Vec random_point(Rng& rng, int dim, double lo = -1.5, double hi = 1.5) {
  Vec x(dim);
  for (int i = 0; i < dim; ++i) x[i] = rng.uniform(lo, hi);
  return x;
}

}  // namespace testsupport
