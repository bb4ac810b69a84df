#pragma once

#include <algorithm>
#include <functional>
#include <utility>
#include <vector>

#include "propnormal/tubular.hpp"

namespace propnormal {

enum class FieldTag { Naive, Proper, Custom };

/// Tangential (Gunter) derivatives of a vector field's own components:
/// d(k, j) = D_k N_j where D_k = d_k - N_k d_N.
struct GunterMatrix {
  Vec point;
  Mat d;
  FieldTag field_tag = FieldTag::Custom;

  double max_asym() const {
    return (d - d.transpose()).cwiseAbs().maxCoeff();
  }
};

inline GunterMatrix gunter_matrix(const VectorFieldSample& sample,
                                  FieldTag tag = FieldTag::Custom) {
  GunterMatrix g;
  g.point = sample.point;
  g.field_tag = tag;
  // D_k N_j = jacobian(k, j) - value_k * (d_N N)_j
  g.d = sample.jacobian - sample.value * sample.autoparallel.transpose();
  return g;
}

using FieldSampler = std::function<VectorFieldSample(const Vec&)>;

inline FieldSampler naive_field(const ImplicitSurface& s) {
  return [&s](const Vec& x) { return s.naive_extension_sample(x); };
}

inline FieldSampler proper_field(const TubularNeighborhood& tn) {
  return [&tn](const Vec& x) { return tn.proper_extension_sample(x); };
}

/// Max over points and index pairs of |D_k nu_j - D_j nu_k| for the
/// normalized-gradient field restricted to S. The tangential derivatives of
/// the unit normal commute on the surface, so this must vanish to rounding.
inline double check_gunter_symmetry_on_surface(const ImplicitSurface& s,
                                               const std::vector<Vec>& points) {
  double max_defect = 0.0;
  for (const Vec& x : points) {
    if (!s.on_surface(x, 1e-9))
      throw NotOnSurfaceError("point " + format_point(x) +
                              " is not on the surface");
    GunterMatrix g = gunter_matrix(s.naive_extension_sample(x), FieldTag::Naive);
    max_defect = std::max(max_defect, g.max_asym());
  }
  return max_defect;
}

/// Per-point evidence for the equivalence of the two properness conditions
/// of a unitary extension on S: (i) vanishing self-derivative d_N N and
/// (ii) symmetric Jacobian.
struct EquivalenceReport {
  int points_checked = 0;
  int dim = 0;
  double tol = 0.0;
  double max_autoparallel = 0.0;  // worst condition (i) defect
  double max_asym = 0.0;          // worst condition (ii) defect
  double max_identity_defect = 0.0;
  bool equivalence_held = false;  // (a <= tol) <=> (b <= n tol) at all points
  bool both_conditions_hold = false;
  bool identity_ok = false;
};

inline EquivalenceReport check_properness_equivalence(
    const ImplicitSurface& s, const FieldSampler& extension,
    const std::vector<Vec>& points, double tol) {
  EquivalenceReport rep;
  rep.dim = s.dim();
  rep.tol = tol;
  rep.equivalence_held = true;
  rep.both_conditions_hold = true;
  rep.identity_ok = true;
  for (const Vec& x : points) {
    if (!s.on_surface(x, 1e-9))
      throw NotOnSurfaceError("point " + format_point(x) +
                              " is not on the surface");
    VectorFieldSample sample = extension(x);
    if (std::fabs(sample.unit_norm_defect) > 1e-10)
      throw Error("extension is not unitary at " + format_point(x) +
                  ": | |N| - 1 | = " +
                  format_double(std::fabs(sample.unit_norm_defect)));
    const double a = sample.max_autoparallel();
    const double b = sample.max_asym();
    rep.max_autoparallel = std::max(rep.max_autoparallel, a);
    rep.max_asym = std::max(rep.max_asym, b);
    if ((a <= tol) != (b <= rep.dim * tol)) rep.equivalence_held = false;
    if (!(a <= tol && b <= rep.dim * tol)) rep.both_conditions_hold = false;
    double iddef = sample.identity_defect();
    rep.max_identity_defect = std::max(rep.max_identity_defect, iddef);
    if (iddef > 1e-8 * (1.0 + sample.jacobian.cwiseAbs().maxCoeff()))
      rep.identity_ok = false;
    ++rep.points_checked;
  }
  return rep;
}

/// Once either properness condition holds on S, the Gunter and Cartesian
/// derivatives of the field coincide and are symmetric: all four of
/// D_k N_j, d_k N_j, d_j N_k, D_j N_k agree. Returns the worst pairwise
/// spread over points and index pairs.
inline double check_derivative_agreement(const ImplicitSurface& s,
                                         const FieldSampler& extension,
                                         const std::vector<Vec>& points,
                                         double tol = 1e-6) {
  EquivalenceReport pre =
      check_properness_equivalence(s, extension, points, tol);
  if (!pre.both_conditions_hold)
    throw PreconditionError(
        "derivative agreement check requires both properness conditions on S: "
        "max_autoparallel = " +
        format_double(pre.max_autoparallel) +
        ", max_asym = " + format_double(pre.max_asym) +
        ", tol = " + format_double(tol));
  double max_spread = 0.0;
  for (const Vec& x : points) {
    VectorFieldSample sample = extension(x);
    GunterMatrix g = gunter_matrix(sample);
    const int n = s.dim();
    for (int k = 0; k < n; ++k) {
      for (int j = 0; j < n; ++j) {
        double q[4] = {g.d(k, j), sample.jacobian(k, j), sample.jacobian(j, k),
                       g.d(j, k)};
        double lo = *std::min_element(q, q + 4);
        double hi = *std::max_element(q, q + 4);
        max_spread = std::max(max_spread, hi - lo);
      }
    }
  }
  return max_spread;
}

struct PropernessTolerances {
  double unit = 1e-10;
  double asym = 1e-5;
  double autoparallel = 1e-5;
  double gunter = 1e-5;
};

struct PropernessWitness {
  Vec point;
  double unit_defect = 0.0;
  double asym = 0.0;
  double autoparallel = 0.0;
  double gunter_asym = 0.0;
  double score = 0.0;  // worst defect relative to its tolerance
};

struct PropernessReport {
  int points_checked = 0;
  int failures = 0;
  double max_unit_defect = 0.0;
  double max_asym = 0.0;
  double max_autoparallel = 0.0;
  double max_gunter_asym = 0.0;
  bool proper = false;
  PropernessTolerances tolerances;
  std::vector<PropernessWitness> witnesses;  // up to 5, worst first
};

/// Sample the tube in tubular coordinates (foot uniform on S by rejection
/// from the box, offset uniform with a 5% margin) and aggregate the four
/// properness defects of the given field. Verdict: proper iff all four
/// maxima stay below their tolerances.
inline PropernessReport verify_properness(const TubularNeighborhood& tn,
                                          const FieldSampler& field,
                                          int sample_count,
                                          PropernessTolerances tol = {},
                                          std::uint64_t seed = 42) {
  const ImplicitSurface& s = tn.surface();
  Rng rng(seed);
  std::vector<Vec> feet = sample_surface_points(s, sample_count, rng);
  const double margin = 0.05 * tn.epsilon();

  PropernessReport rep;
  rep.tolerances = tol;
  std::vector<PropernessWitness> all;
  all.reserve(sample_count);
  const int max_failures = std::max(1, sample_count / 100);
  for (const Vec& xhat : feet) {
    double t = rng.uniform(-tn.epsilon() + margin, tn.epsilon() - margin);
    try {
      Vec nu = s.normal(xhat);
      Vec x = xhat + t * nu;
      VectorFieldSample sample = field(x);
      GunterMatrix g = gunter_matrix(sample);
      PropernessWitness w;
      w.point = x;
      w.unit_defect = std::fabs(sample.unit_norm_defect);
      w.asym = sample.max_asym();
      w.autoparallel = sample.max_autoparallel();
      w.gunter_asym = g.max_asym();
      w.score = std::max({w.unit_defect / tol.unit, w.asym / tol.asym,
                          w.autoparallel / tol.autoparallel,
                          w.gunter_asym / tol.gunter});
      rep.max_unit_defect = std::max(rep.max_unit_defect, w.unit_defect);
      rep.max_asym = std::max(rep.max_asym, w.asym);
      rep.max_autoparallel = std::max(rep.max_autoparallel, w.autoparallel);
      rep.max_gunter_asym = std::max(rep.max_gunter_asym, w.gunter_asym);
      all.push_back(std::move(w));
      ++rep.points_checked;
    } catch (const Error&) {
      ++rep.failures;
      if (rep.failures > max_failures)
        throw Error("properness sampling aborted: more than 1% of samples "
                    "failed to project");
    }
  }
  std::sort(all.begin(), all.end(),
            [](const PropernessWitness& a, const PropernessWitness& b) {
              if (a.score != b.score) return a.score > b.score;
              return lex_less(a.point, b.point);
            });
  if (all.size() > 5) all.resize(5);
  rep.witnesses = std::move(all);
  rep.proper = rep.max_unit_defect <= tol.unit && rep.max_asym <= tol.asym &&
               rep.max_autoparallel <= tol.autoparallel &&
               rep.max_gunter_asym <= tol.gunter;
  return rep;
}

/// Default assessment: the tube's own extension of nu.
inline PropernessReport verify_properness(const TubularNeighborhood& tn,
                                          int sample_count,
                                          PropernessTolerances tol = {},
                                          std::uint64_t seed = 42) {
  return verify_properness(tn, proper_field(tn), sample_count, tol, seed);
}

}  // namespace propnormal
