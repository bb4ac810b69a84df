#pragma once

#include <string>
#include <vector>

#include "propnormal/surface.hpp"

namespace propnormal {

/// A compiled-in test surface with a tube half-width known to validate.
struct BuiltinSurface {
  std::string name;
  ImplicitSurface surface;
  double default_epsilon;
};

inline const std::vector<std::string>& builtin_surface_names() {
  static const std::vector<std::string> names = {
      "ellipse", "circle", "sphere", "ellipsoid", "torus", "hyperplane"};
  return names;
}

inline BuiltinSurface make_builtin_surface(const std::string& name) {
  auto box = [](std::initializer_list<double> lo,
                std::initializer_list<double> hi) {
    Box b;
    b.lo = Vec(static_cast<Eigen::Index>(lo.size()));
    b.hi = Vec(static_cast<Eigen::Index>(hi.size()));
    int i = 0;
    for (double v : lo) b.lo[i++] = v;
    i = 0;
    for (double v : hi) b.hi[i++] = v;
    return b;
  };
  if (name == "ellipse")
    return {name,
            ImplicitSurface(Expr::parse("x1^2 + 2*x2^2 - 1", 2),
                            box({-2, -2}, {2, 2})),
            0.2};
  if (name == "circle")
    return {name,
            ImplicitSurface(Expr::parse("x1^2 + x2^2 - 1", 2),
                            box({-2, -2}, {2, 2})),
            0.5};
  if (name == "sphere")
    return {name,
            ImplicitSurface(Expr::parse("x1^2 + x2^2 + x3^2 - 1", 3),
                            box({-2, -2, -2}, {2, 2, 2})),
            0.5};
  if (name == "ellipsoid")
    return {name,
            ImplicitSurface(Expr::parse("x1^2 + 2*x2^2 + 3*x3^2 - 1", 3),
                            box({-2, -2, -2}, {2, 2, 2})),
            0.2};
  if (name == "torus")
    return {name,
            ImplicitSurface(
                Expr::parse("(sqrt(x1^2 + x2^2) - 1)^2 + x3^2 - 0.09", 3),
                box({-1.6, -1.6, -0.6}, {1.6, 1.6, 0.6})),
            0.15};
  if (name == "hyperplane")
    return {name,
            ImplicitSurface(Expr::parse("x2", 2), box({-2, -2}, {2, 2})),
            0.5};
  throw Error("unknown builtin surface '" + name +
              "' (have: ellipse, circle, sphere, ellipsoid, torus, "
              "hyperplane)");
}

}  // namespace propnormal
