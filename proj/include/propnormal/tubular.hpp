#pragma once

#include <algorithm>
#include <utility>
#include <vector>

#include "propnormal/surface.hpp"

namespace propnormal {

/// Tubular coordinates of a point x near S: x = foot + offset * nu(foot).
/// The offset is positive on the side nu points to.
struct TubularCoord {
  Vec foot;
  double offset = 0.0;
  Vec nu_at_foot;
};

struct EpsilonValidationReport {
  double epsilon = 0.0;
  int samples = 0;
  int failures = 0;  // projections that threw
  double max_foot_defect = 0.0;
  double max_offset_defect = 0.0;
  bool pass = false;
};

namespace detail {

/// Closest-point projection by Newton on the Lagrange system
///
///   F(y, lambda) = ( y - x + lambda * grad Psi(y),  Psi(y) ) = 0,
///
/// i.e. the stationarity conditions of min |y - x| subject to Psi(y) = 0.
/// Five damped gradient pre-steps pull the start onto the surface before the
/// full Newton iteration; on non-convergence the iteration restarts from
/// random perturbations of x of magnitude epsilon/4.
inline TubularCoord project_impl(const ImplicitSurface& s, const Vec& x,
                                 double epsilon) {
  const int n = s.dim();
  const double xref = 1.0 + x.norm();
  const int max_iter = 50;

  auto try_from = [&](Vec y) -> std::optional<Vec> {
    // damped pre-steps: y <- y - Psi * g / |g|^2, step length clamped
    const double clamp = 2.0 * epsilon;
    for (int it = 0; it < 5; ++it) {
      Jet2 j = s.psi_jet(y);
      Vec step = -(j.value / j.grad.squaredNorm()) * j.grad;
      double sn = step.norm();
      if (sn > clamp) step *= clamp / sn;
      y += step;
    }
    Jet2 j = s.psi_jet(y);
    double lambda = (x - y).dot(j.grad) / j.grad.squaredNorm();
    for (int it = 0; it < max_iter; ++it) {
      Vec f1 = y - x + lambda * j.grad;
      if (f1.cwiseAbs().maxCoeff() <= 1e-13 * xref &&
          std::fabs(j.value) <= 1e-13 * (1.0 + j.grad.norm()))
        return y;
      Mat big(n + 1, n + 1);
      big.topLeftCorner(n, n) = Mat::Identity(n, n) + lambda * j.hess;
      big.topRightCorner(n, 1) = j.grad;
      big.bottomLeftCorner(1, n) = j.grad.transpose();
      big(n, n) = 0.0;
      Vec rhs(n + 1);
      rhs.head(n) = -f1;
      rhs[n] = -j.value;
      Vec delta = big.partialPivLu().solve(rhs);
      if (!delta.allFinite()) return std::nullopt;
      double dn = delta.head(n).norm();
      if (dn > 2.0 * epsilon + 1.0) delta *= (2.0 * epsilon + 1.0) / dn;
      y += delta.head(n);
      lambda += delta[n];
      j = s.psi_jet(y);
    }
    return std::nullopt;
  };

  std::optional<Vec> foot;
  try {
    foot = try_from(x);
  } catch (const Error&) {
    foot = std::nullopt;
  }
  if (!foot) {
    // 32 perturbed restarts of magnitude epsilon/4, attempted best-first by
    // |Psi| at the start; the RNG is fixed so projection stays a pure function
    Rng rng(0x70726F6Au);
    std::vector<std::pair<double, Vec>> starts;
    starts.reserve(32);
    for (int k = 0; k < 32; ++k) {
      Vec start = x + (epsilon / 4.0) * rng.unit_vector(n);
      double score = std::numeric_limits<double>::infinity();
      try {
        score = std::fabs(s.psi_value(start));
      } catch (const Error&) {
      }
      starts.emplace_back(score, std::move(start));
    }
    std::stable_sort(starts.begin(), starts.end(),
                     [](const auto& a, const auto& b) {
                       return a.first < b.first;
                     });
    for (auto& [score, start] : starts) {
      if (foot) break;
      try {
        foot = try_from(std::move(start));
      } catch (const Error&) {
        foot = std::nullopt;
      }
    }
  }
  if (!foot)
    throw NoConvergenceError("closest-point projection did not converge at " +
                             format_point(x));

  Jet2 j = s.psi_jet(*foot);
  const double gn = j.grad.norm();
  if (std::fabs(j.value) > 1e-10 * (1.0 + gn))
    throw NoConvergenceError("projection landed off the surface at " +
                             format_point(x));
  Vec nu = j.grad / gn;
  Vec d = x - *foot;
  double offset = d.dot(nu) >= 0.0 ? d.norm() : -d.norm();
  if ((d - offset * nu).norm() > 1e-9 * xref)
    throw NoConvergenceError(
        "projection residual too large (non-nearest critical point?) at " +
        format_point(x));
  if (std::fabs(offset) >= epsilon)
    throw OutsideTubeError("point " + format_point(x) + " has |offset| = " +
                           format_double(std::fabs(offset)) +
                           " >= epsilon = " + format_double(epsilon));
  TubularCoord tc;
  tc.foot = std::move(*foot);
  tc.offset = offset;
  tc.nu_at_foot = std::move(nu);
  return tc;
}

}  // namespace detail

/// Check that the tube of half-width epsilon is honestly parameterized by
/// (foot, offset): points placed at x = xhat + t nu(xhat) must project back
/// to foot = xhat and offset = t. Beyond the reach of S this fails loudly.
inline EpsilonValidationReport validate_epsilon(const ImplicitSurface& s,
                                                double epsilon, int samples,
                                                std::uint64_t seed = 42) {
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
  Rng rng(seed);
  EpsilonValidationReport rep;
  rep.epsilon = epsilon;
  rep.samples = samples;
  std::vector<Vec> feet = sample_surface_points(s, samples, rng);
  for (const Vec& xhat : feet) {
    double t = rng.uniform(-epsilon, epsilon);
    try {
      Vec nu = s.normal(xhat);
      TubularCoord tc = detail::project_impl(s, xhat + t * nu, epsilon);
      rep.max_foot_defect =
          std::max(rep.max_foot_defect, (tc.foot - xhat).norm());
      rep.max_offset_defect =
          std::max(rep.max_offset_defect, std::fabs(tc.offset - t));
    } catch (const Error&) {
      ++rep.failures;
    }
  }
  rep.pass = rep.failures == 0 && rep.max_foot_defect <= 1e-6 &&
             rep.max_offset_defect <= 1e-8;
  return rep;
}

/// The tube Omega_S = { xhat + t nu(xhat) : |t| < epsilon } around S.
/// Construction validates epsilon and refuses tubes where the projection is
/// not single-valued on sampled points.
class TubularNeighborhood {
 public:
  TubularNeighborhood(ImplicitSurface surface, double epsilon,
                      int validation_samples = 200,
                      std::uint64_t validation_seed = 42)
      : surface_(std::move(surface)), epsilon_(epsilon) {
    validation_ =
        validate_epsilon(surface_, epsilon, validation_samples, validation_seed);
    if (!validation_.pass)
      throw ValidationError(
          "epsilon validation failed: max_foot_defect = " +
          format_double(validation_.max_foot_defect) + ", max_offset_defect = " +
          format_double(validation_.max_offset_defect) + ", failures = " +
          std::to_string(validation_.failures) + " of " +
          std::to_string(validation_.samples));
  }

  const ImplicitSurface& surface() const { return surface_; }
  double epsilon() const { return epsilon_; }
  const EpsilonValidationReport& validation() const { return validation_; }

  TubularCoord project(const Vec& x) const {
    return detail::project_impl(surface_, x, epsilon_);
  }

  /// Signed distance to S: zero on S, |t| at distance |t|, positive on the
  /// side nu points to.
  double signed_distance(const Vec& x) const { return project(x).offset; }

  /// The unit normal transported along its own normal line: constant in t,
  /// so the value anywhere in the tube is nu at the foot point.
  Vec proper_extension(const Vec& x) const { return project(x).nu_at_foot; }

  VectorFieldSample proper_extension_sample(const Vec& x) const {
    return proper_extension_sample(x, 1e-5 * (1.0 + x.norm()));
  }

  /// Field value plus a central-difference Jacobian with step fd_step. The
  /// stencil must stay inside the tube, hence the margin precondition.
  VectorFieldSample proper_extension_sample(const Vec& x,
                                            double fd_step) const {
    TubularCoord base = project(x);
    if (std::fabs(base.offset) > epsilon_ - 2.0 * fd_step)
      throw OutsideTubeError(
          "insufficient tube margin for finite differences at " +
          format_point(x));
    const int n = surface_.dim();
    Mat jac(n, n);
    for (int j = 0; j < n; ++j) {
      Vec xp = x, xm = x;
      xp[j] += fd_step;
      xm[j] -= fd_step;
      Vec np = proper_extension(xp);
      Vec nm = proper_extension(xm);
      jac.row(j) = ((np - nm) / (2.0 * fd_step)).transpose();
    }
    return VectorFieldSample::from(x, std::move(base.nu_at_foot),
                                   std::move(jac));
  }

  /// Integrate dgamma/dtau = N(gamma) from a surface point with fixed-step
  /// RK4 and report the largest distance from gamma to the straight line
  /// xhat + tau nu(xhat). For a proper extension the curve is that line.
  double integral_curve_straightness(const Vec& xhat, double tau_max,
                                     int steps) const {
    if (!surface_.on_surface(xhat, 1e-9))
      throw NotOnSurfaceError("integral curve start " + format_point(xhat) +
                              " is not on the surface");
    if (!(tau_max > 0.0) || tau_max >= epsilon_)
      throw Error("tau_max must lie in (0, epsilon)");
    if (steps < 1) throw Error("steps must be positive");
    const Vec nu0 = surface_.normal(xhat);
    const double dt = tau_max / steps;
    Vec gamma = xhat;
    double max_dev = 0.0;
    for (int i = 0; i < steps; ++i) {
      Vec k1 = proper_extension(gamma);
      Vec k2 = proper_extension(gamma + 0.5 * dt * k1);
      Vec k3 = proper_extension(gamma + 0.5 * dt * k2);
      Vec k4 = proper_extension(gamma + dt * k3);
      gamma += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      Vec rel = gamma - xhat;
      double dev = (rel - rel.dot(nu0) * nu0).norm();
      max_dev = std::max(max_dev, dev);
    }
    return max_dev;
  }

  /// Tangency defect of nu(xhat) against the offset surface S_t at
  /// xhat + t nu(xhat): finite-difference tangents of curves
  /// s -> foot(xhat + s u) + t nu(foot(xhat + s u)) along probe directions u
  /// in the tangent plane, and the worst |<tangent, nu>| / |tangent|.
  double level_set_orthogonality(const Vec& xhat, double t,
                                 int tangent_probe_count) const {
    if (!surface_.on_surface(xhat, 1e-9))
      throw NotOnSurfaceError("level-set probe base " + format_point(xhat) +
                              " is not on the surface");
    if (std::fabs(t) >= epsilon_)
      throw OutsideTubeError("|t| must be below epsilon");
    if (tangent_probe_count < 1) throw Error("need at least one probe");
    const Vec nu0 = surface_.normal(xhat);
    const int n = surface_.dim();
    const double h = 1e-4 * (1.0 + xhat.norm());
    Rng rng(0x6C657674u);  // fixed probes: this routine is a pure function
    auto offset_curve_point = [&](const Vec& base) {
      TubularCoord tc = project(base);
      return Vec(tc.foot + t * tc.nu_at_foot);
    };
    double max_defect = 0.0;
    for (int p = 0; p < tangent_probe_count; ++p) {
      Vec u;
      double un = 0.0;
      do {
        Vec r = rng.gaussian_vector(n);
        u = r - r.dot(nu0) * nu0;
        un = u.norm();
      } while (un < 1e-8);
      u /= un;
      Vec cp = offset_curve_point(xhat + h * u);
      Vec cm = offset_curve_point(xhat - h * u);
      Vec tangent = (cp - cm) / (2.0 * h);
      double tn = tangent.norm();
      if (tn < 1e-12)
        throw Error("degenerate tangent probe at " + format_point(xhat));
      max_defect = std::max(max_defect, std::fabs(tangent.dot(nu0)) / tn);
    }
    return max_defect;
  }

 private:
  ImplicitSurface surface_;
  double epsilon_;
  EpsilonValidationReport validation_;
};

}  // namespace propnormal
