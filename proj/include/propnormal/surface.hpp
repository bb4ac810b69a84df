#pragma once

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "propnormal/expr.hpp"

namespace propnormal {

/// Axis-aligned box in R^n.
struct Box {
  Vec lo;
  Vec hi;

  int dim() const { return static_cast<int>(lo.size()); }

  bool contains(const Vec& x, double slack = 0.0) const {
    for (int i = 0; i < dim(); ++i)
      if (x[i] < lo[i] - slack || x[i] > hi[i] + slack) return false;
    return true;
  }

  Vec sample(Rng& rng) const {
    Vec x(dim());
    for (int i = 0; i < dim(); ++i) x[i] = rng.uniform(lo[i], hi[i]);
    return x;
  }

  double max_extent() const { return (hi - lo).maxCoeff(); }
};

/// One evaluation of a vector field: value, Jacobian, and the derived
/// quantities every identity check in this library consumes.
///
/// Index convention: jacobian(j, k) is the derivative of component k in
/// direction j.
struct VectorFieldSample {
  Vec point;
  Vec value;
  Mat jacobian;
  double unit_norm_defect = 0.0;  // |value| - 1
  Mat asym;                       // jacobian - jacobian^T, exactly antisymmetric
  Vec autoparallel;               // (value . grad) value, i.e. jacobian^T value

  static VectorFieldSample from(Vec point, Vec value, Mat jacobian) {
    VectorFieldSample s;
    s.point = std::move(point);
    s.value = std::move(value);
    s.jacobian = std::move(jacobian);
    s.unit_norm_defect = s.value.norm() - 1.0;
    s.asym = s.jacobian - s.jacobian.transpose();
    s.autoparallel = s.jacobian.transpose() * s.value;
    return s;
  }

  double max_asym() const { return asym.cwiseAbs().maxCoeff(); }
  double max_autoparallel() const { return autoparallel.cwiseAbs().maxCoeff(); }

  /// Residual of the unit-field identity: for |value| = 1 the directional
  /// derivative along the field equals asym^T value, because the mixed term
  /// is half the gradient of |value|^2.
  double identity_defect() const {
    return (autoparallel - asym.transpose() * value).cwiseAbs().maxCoeff();
  }
};

/// Hypersurface {Psi = 0} given by a scalar expression, its domain box, and
/// the minimum gradient norm below which queries are refused.
class ImplicitSurface {
 public:
  ImplicitSurface(Expr psi, Box domain_box, double regularity_floor = 1e-12)
      : psi_(std::move(psi)),
        box_(std::move(domain_box)),
        floor_(regularity_floor) {
    if (box_.dim() != psi_.dim())
      throw ValidationError("domain box dimension does not match expression");
    for (int i = 0; i < box_.dim(); ++i)
      if (!(box_.lo[i] < box_.hi[i]))
        throw ValidationError("domain box is empty along axis " +
                              std::to_string(i + 1));
    check_nonempty();
  }

  const Expr& psi() const { return psi_; }
  int dim() const { return psi_.dim(); }
  const Box& box() const { return box_; }
  double regularity_floor() const { return floor_; }
  bool nonempty_check_skipped() const { return check_skipped_; }

  /// A point on the zero set found by the construction-time scan (empty when
  /// the scan was skipped for n > 4).
  const std::optional<Vec>& surface_witness() const { return witness_; }

  double psi_value(const Vec& x) const { return psi_.eval(x); }

  /// Jet of Psi with the regularity floor enforced.
  Jet2 psi_jet(const Vec& x) const {
    Jet2 j = psi_.eval_jet2(x);
    if (j.grad.norm() < floor_)
      throw RegularityError("|grad Psi| = " + format_double(j.grad.norm()) +
                            " below regularity floor at " + format_point(x));
    return j;
  }

  bool on_surface(const Vec& x, double tol) const {
    require_in_box(x);
    Jet2 j = psi_jet(x);
    return std::fabs(j.value) <= tol * (1.0 + j.grad.norm());
  }

  /// Unit normal at a surface point (the normalized gradient).
  Vec normal(const Vec& xhat) const {
    if (!on_surface(xhat, 1e-9))
      throw NotOnSurfaceError("point " + format_point(xhat) +
                              " is not on the surface");
    Jet2 j = psi_jet(xhat);
    return j.grad / j.grad.norm();
  }

  /// The field grad Psi / |grad Psi| away from the surface, with its exact
  /// Jacobian assembled from the second-order jet:
  ///   d_j N_k = H_jk / |g|  -  g_k (H g)_j / |g|^3.
  /// Off the zero set this field is generally not a gradient; its Jacobian
  /// asymmetry is what the identity checks quantify.
  VectorFieldSample naive_extension_sample(const Vec& x) const {
    require_in_box(x);
    Jet2 j = psi_jet(x);
    const double gn = j.grad.norm();
    Vec value = j.grad / gn;
    Vec hg = j.hess * j.grad;
    Mat jac = j.hess / gn - (hg / (gn * gn * gn)) * j.grad.transpose();
    return VectorFieldSample::from(x, std::move(value), std::move(jac));
  }

 private:
  void require_in_box(const Vec& x) const {
    if (static_cast<int>(x.size()) != dim())
      throw OutsideDomainError("point dimension mismatch");
    if (!box_.contains(x, 1e-12 * (1.0 + box_.max_extent())))
      throw OutsideDomainError("point " + format_point(x) +
                               " outside the domain box");
  }

  // Coarse 9^n lattice scan for a sign change, refined by bisection along
  // the offending edge. Skipped above n = 4 to bound construction cost.
  void check_nonempty() {
    const int n = dim();
    if (n > 4) {
      check_skipped_ = true;
      std::cerr << "propnormal: warning: surface non-emptiness check skipped "
                   "for dimension "
                << n << " > 4\n";
      return;
    }
    const int per_axis = 9;
    std::vector<int> idx(n, 0);
    std::vector<double> values;
    std::vector<bool> valid;
    int total = 1;
    for (int i = 0; i < n; ++i) total *= per_axis;
    values.resize(total);
    valid.resize(total);
    auto lattice_point = [&](int flat) {
      Vec x(n);
      for (int i = n - 1; i >= 0; --i) {
        int c = flat % per_axis;
        flat /= per_axis;
        x[i] = box_.lo[i] + (box_.hi[i] - box_.lo[i]) * c / (per_axis - 1);
      }
      return x;
    };
    for (int f = 0; f < total; ++f) {
      try {
        values[f] = psi_.eval(lattice_point(f));
        valid[f] = true;
        if (values[f] == 0.0) {
          witness_ = lattice_point(f);
          return;
        }
      } catch (const Error&) {
        valid[f] = false;
      }
    }
    int stride = 1;
    for (int axis = n - 1; axis >= 0; --axis) {
      for (int f = 0; f < total; ++f) {
        int c = (f / stride) % per_axis;
        if (c + 1 >= per_axis) continue;
        int g = f + stride;
        if (!valid[f] || !valid[g]) continue;
        if ((values[f] < 0.0) == (values[g] < 0.0)) continue;
        witness_ = bisect(lattice_point(f), lattice_point(g), values[f]);
        return;
      }
      stride *= per_axis;
    }
    throw ValidationError(
        "zero level set not found inside the domain box (coarse scan)");
  }

  Vec bisect(Vec a, Vec b, double fa) const {
    for (int it = 0; it < 80; ++it) {
      Vec m = 0.5 * (a + b);
      double fm = psi_.eval(m);
      if (fm == 0.0) return m;
      if ((fm < 0.0) == (fa < 0.0)) {
        a = std::move(m);
        fa = fm;
      } else {
        b = std::move(m);
      }
    }
    return 0.5 * (a + b);
  }

  Expr psi_;
  Box box_;
  double floor_;
  bool check_skipped_ = false;
  std::optional<Vec> witness_;
};

/// Draw points on S by rejection from the box: sample uniformly, pull each
/// sample onto the zero set with damped Newton steps along the gradient,
/// and drop points closer than `dedup_spacing` to an already accepted one.
inline std::vector<Vec> sample_surface_points(const ImplicitSurface& s,
                                              int count, Rng& rng,
                                              double dedup_spacing = 1e-3) {
  std::vector<Vec> points;
  points.reserve(count);
  const double clamp = 0.25 * s.box().max_extent();
  const long max_attempts = 400L * count + 1000;
  for (long attempt = 0; attempt < max_attempts; ++attempt) {
    if (static_cast<int>(points.size()) >= count) break;
    Vec y = s.box().sample(rng);
    bool converged = false;
    try {
      for (int it = 0; it < 80; ++it) {
        Jet2 j = s.psi_jet(y);
        double gn2 = j.grad.squaredNorm();
        if (std::fabs(j.value) <= 1e-13 * (1.0 + std::sqrt(gn2))) {
          converged = true;
          break;
        }
        Vec step = -(j.value / gn2) * j.grad;
        double sn = step.norm();
        if (sn > clamp) step *= clamp / sn;
        y += step;
      }
    } catch (const Error&) {
      continue;
    }
    if (!converged || !s.box().contains(y)) continue;
    bool dup = false;
    for (const Vec& p : points) {
      if ((p - y).norm() < dedup_spacing) {
        dup = true;
        break;
      }
    }
    if (!dup) points.push_back(std::move(y));
  }
  if (static_cast<int>(points.size()) < count)
    throw ValidationError("could not sample " + std::to_string(count) +
                          " surface points (got " +
                          std::to_string(points.size()) + ")");
  return points;
}

/// Load a surface from its plain-text spec:
///
///   # comment
///   dim = 2
///   psi = x1^2 + 2*x2^2 - 1
///   box = -2 2 -2 2
///   floor = 1e-12        (optional)
inline ImplicitSurface load_surface_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open surface file: " + path);
  int dim = 0;
  std::string psi_text;
  std::vector<double> box_vals;
  double floor = 1e-12;
  bool have_dim = false, have_psi = false, have_box = false;
  std::string line;
  while (std::getline(in, line)) {
    std::size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw Error("surface file: expected 'key = value' in line: " + line);
    auto trim = [](std::string v) {
      std::size_t b = v.find_first_not_of(" \t\r");
      std::size_t e = v.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key == "dim") {
      dim = std::stoi(value);
      have_dim = true;
    } else if (key == "psi") {
      psi_text = value;
      have_psi = true;
    } else if (key == "box") {
      std::istringstream vs(value);
      double v;
      while (vs >> v) box_vals.push_back(v);
      have_box = true;
    } else if (key == "floor") {
      floor = std::stod(value);
    } else {
      throw Error("surface file: unknown key '" + key + "'");
    }
  }
  if (!have_dim || !have_psi || !have_box)
    throw Error("surface file must define dim, psi, and box");
  if (static_cast<int>(box_vals.size()) != 2 * dim)
    throw Error("surface file: box needs " + std::to_string(2 * dim) +
                " numbers (lo hi per axis)");
  Box box;
  box.lo = Vec(dim);
  box.hi = Vec(dim);
  for (int i = 0; i < dim; ++i) {
    box.lo[i] = box_vals[2 * i];
    box.hi[i] = box_vals[2 * i + 1];
  }
  return ImplicitSurface(Expr::parse(psi_text, dim), std::move(box), floor);
}

}  // namespace propnormal
