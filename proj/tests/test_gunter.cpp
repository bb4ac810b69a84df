#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using namespace propnormal;
using Catch::Approx;

namespace {

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

struct Fixture {
  BuiltinSurface ellipse = make_builtin_surface("ellipse");
  BuiltinSurface circle = make_builtin_surface("circle");
  TubularNeighborhood ellipse_tn{ellipse.surface, ellipse.default_epsilon};
  TubularNeighborhood circle_tn{circle.surface, circle.default_epsilon};
};

Fixture& fix() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_CASE("gunter matrix of a constant field vanishes") {
  Vec value(3);
  value << 1, 0, 0;
  Vec point(3);
  point << 0.3, 0.2, 0.1;
  auto sample = VectorFieldSample::from(point, value, Mat::Zero(3, 3));
  auto g = gunter_matrix(sample);
  CHECK(g.d.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gunter matrix equals the Jacobian when the field is proper") {
  auto& f = fix();
  Vec x = vec2(1.05, 0.02);
  auto sample = f.ellipse_tn.proper_extension_sample(x);
  auto g = gunter_matrix(sample, FieldTag::Proper);
  CHECK((g.d - sample.jacobian).cwiseAbs().maxCoeff() <= 1e-5);
}

TEST_CASE("gunter matrix symmetrizes the naive field on S") {
  auto& f = fix();
  Vec xh = vec2(1.0 / std::sqrt(2.0), 0.5);
  REQUIRE(f.ellipse.surface.on_surface(xh, 1e-12));
  auto sample = f.ellipse.surface.naive_extension_sample(xh);
  // the raw Jacobian is visibly asymmetric here
  CHECK(sample.max_asym() > 0.1);
  auto g = gunter_matrix(sample, FieldTag::Naive);
  CHECK(std::fabs(g.d(0, 1) - g.d(1, 0)) <= 1e-8);

  // and the same tangential derivative falls out of finite differences
  auto field = [&](const Vec& p) {
    return Vec(f.ellipse.surface.naive_extension_sample(p).value);
  };
  Mat J_fd = testsupport::fd_jacobian(field, xh, 1e-6);
  auto fd_sample = VectorFieldSample::from(xh, field(xh), J_fd);
  auto g_fd = gunter_matrix(fd_sample);
  CHECK((g.d - g_fd.d).cwiseAbs().maxCoeff() <= 1e-5);
}

TEST_CASE("tangential symmetry of nu holds on every suite surface") {
  for (const char* name : {"ellipse", "sphere", "ellipsoid", "torus"}) {
    auto b = make_builtin_surface(name);
    Rng rng(4242);
    auto pts = sample_surface_points(b.surface, 100, rng);
    double defect = check_gunter_symmetry_on_surface(b.surface, pts);
    INFO("surface " << name);
    CHECK(defect <= 1e-8);
  }
}

TEST_CASE("hyperplane tangential asymmetry is exactly zero") {
  auto hp = make_builtin_surface("hyperplane");
  std::vector<Vec> pts = {vec2(0, 0), vec2(1, 0), vec2(-1.5, 0)};
  CHECK(check_gunter_symmetry_on_surface(hp.surface, pts) == 0.0);
}

TEST_CASE("symmetry check refuses off-surface points") {
  auto& f = fix();
  std::vector<Vec> pts = {vec2(1.2, 0.3)};
  CHECK_THROWS_AS(check_gunter_symmetry_on_surface(f.ellipse.surface, pts),
                  NotOnSurfaceError);
}

TEST_CASE("sphere tangential derivative is the scaled tangent projector") {
  auto sphere = make_builtin_surface("sphere");
  Rng rng(10);
  for (const Vec& x : sample_surface_points(sphere.surface, 10, rng)) {
    auto g = gunter_matrix(sphere.surface.naive_extension_sample(x));
    Mat projector = Mat::Identity(3, 3) - x * x.transpose();
    CHECK((g.d - projector).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("equivalence of the properness conditions on S") {
  auto& f = fix();
  Rng rng(21);
  auto pts = sample_surface_points(f.ellipse.surface, 60, rng);

  SECTION("proper field: both conditions hold everywhere") {
    auto rep = check_properness_equivalence(
        f.ellipse.surface, proper_field(f.ellipse_tn), pts, 1e-5);
    CHECK(rep.equivalence_held);
    CHECK(rep.both_conditions_hold);
    CHECK(rep.identity_ok);
    CHECK(rep.max_autoparallel <= 1e-5);
    CHECK(rep.max_asym <= 1e-5);
  }

  SECTION("naive ellipse field: conditions fail jointly off the axes") {
    std::vector<Vec> off_axis;
    for (const Vec& p : pts)
      if (std::fabs(p[0] * p[1]) > 0.05) off_axis.push_back(p);
    REQUIRE(off_axis.size() > 10);
    auto rep = check_properness_equivalence(
        f.ellipse.surface, naive_field(f.ellipse.surface), off_axis, 1e-6);
    CHECK(rep.equivalence_held);  // both sides false at every point
    CHECK_FALSE(rep.both_conditions_hold);
    CHECK(rep.max_asym > 1e-2);
    CHECK(rep.max_autoparallel > 1e-2);
    CHECK(rep.identity_ok);

    // spot check at the reference point
    Vec xh = vec2(1.0 / std::sqrt(2.0), 0.5);
    auto sample = f.ellipse.surface.naive_extension_sample(xh);
    CHECK(sample.max_asym() > 1e-6 * 2);
    CHECK(sample.max_autoparallel() > 1e-6);
  }

  SECTION("naive circle field: both conditions hold") {
    Rng crng(22);
    auto cpts = sample_surface_points(f.circle.surface, 60, crng);
    auto rep = check_properness_equivalence(
        f.circle.surface, naive_field(f.circle.surface), cpts, 1e-10);
    CHECK(rep.equivalence_held);
    CHECK(rep.both_conditions_hold);
    CHECK(rep.max_autoparallel <= 1e-10);
    CHECK(rep.max_asym <= 1e-10);
  }

  SECTION("non-unitary extensions are rejected") {
    FieldSampler doubled = [&](const Vec& x) {
      auto s = f.ellipse.surface.naive_extension_sample(x);
      return VectorFieldSample::from(s.point, 2.0 * s.value, s.jacobian);
    };
    CHECK_THROWS_AS(
        check_properness_equivalence(f.ellipse.surface, doubled, pts, 1e-6),
        Error);
  }
}

TEST_CASE("all four derivative quantities agree on S") {
  auto& f = fix();
  Rng rng(23);
  auto pts = sample_surface_points(f.ellipse.surface, 50, rng);
  double spread = check_derivative_agreement(
      f.ellipse.surface, proper_field(f.ellipse_tn), pts, 1e-5);
  CHECK(spread <= 1e-5);

  Rng crng(24);
  auto cpts = sample_surface_points(f.circle.surface, 50, crng);
  double cspread = check_derivative_agreement(
      f.circle.surface, naive_field(f.circle.surface), cpts, 1e-6);
  CHECK(cspread <= 1e-8);

  auto hp = make_builtin_surface("hyperplane");
  std::vector<Vec> hpts = {vec2(0, 0), vec2(0.7, 0)};
  FieldSampler hp_naive = naive_field(hp.surface);
  CHECK(check_derivative_agreement(hp.surface, hp_naive, hpts, 1e-12) == 0.0);

  // the precondition is enforced, not silently skipped
  CHECK_THROWS_AS(
      check_derivative_agreement(f.ellipse.surface,
                                 naive_field(f.ellipse.surface), pts, 1e-8),
      PreconditionError);
}

TEST_CASE("restriction consistency: both fields give one tangential matrix") {
  auto& f = fix();
  Rng rng(25);
  for (const Vec& xh : sample_surface_points(f.ellipse.surface, 30, rng)) {
    auto g_naive =
        gunter_matrix(f.ellipse.surface.naive_extension_sample(xh));
    auto g_proper = gunter_matrix(f.ellipse_tn.proper_extension_sample(xh));
    CHECK((g_naive.d - g_proper.d).cwiseAbs().maxCoeff() <= 1e-5);
  }
}

TEST_CASE("properness verdicts") {
  auto& f = fix();

  SECTION("tubular extension is proper on the ellipse") {
    auto rep = verify_properness(f.ellipse_tn, 150);
    CHECK(rep.proper);
    CHECK(rep.points_checked == 150);
    CHECK(rep.max_unit_defect <= 1e-10);
    CHECK(rep.max_asym <= 1e-5);
    CHECK(rep.max_autoparallel <= 1e-5);
    CHECK(rep.max_gunter_asym <= 1e-5);
  }

  SECTION("naive ellipse field is not proper, witnesses off the axes") {
    auto rep = verify_properness(f.ellipse_tn,
                                 naive_field(f.ellipse.surface), 150);
    CHECK_FALSE(rep.proper);
    CHECK(rep.max_asym > 1e-3);
    REQUIRE(!rep.witnesses.empty());
    for (const auto& w : rep.witnesses) {
      CHECK(std::fabs(w.point[0] * w.point[1]) > 0.0);
      CHECK(w.score >= 1.0);
    }
  }

  SECTION("naive circle field is proper") {
    auto rep =
        verify_properness(f.circle_tn, naive_field(f.circle.surface), 150);
    CHECK(rep.proper);
  }

  SECTION("a sampler that keeps failing aborts past the 1% budget") {
    FieldSampler broken = [](const Vec&) -> VectorFieldSample {
      throw NoConvergenceError("unreachable field");
    };
    CHECK_THROWS_AS(verify_properness(f.ellipse_tn, broken, 100), Error);
  }

  SECTION("reports are deterministic for a fixed seed") {
    auto a = verify_properness(f.ellipse_tn, 40, {}, 7);
    auto b = verify_properness(f.ellipse_tn, 40, {}, 7);
    CHECK(a.max_asym == b.max_asym);
    CHECK(a.max_gunter_asym == b.max_gunter_asym);
    REQUIRE(a.witnesses.size() == b.witnesses.size());
    for (std::size_t i = 0; i < a.witnesses.size(); ++i)
      CHECK((a.witnesses[i].point - b.witnesses[i].point)
                .cwiseAbs()
                .maxCoeff() == 0.0);
  }
}

TEST_CASE("unit-field identity across field types", "[property]") {
  auto& f = fix();
  Rng rng(26);
  auto feet = sample_surface_points(f.ellipse.surface, 40, rng);
  for (const Vec& xh : feet) {
    double t = rng.uniform(-0.15, 0.15);
    Vec x = xh + t * f.ellipse.surface.normal(xh);
    for (auto sample : {f.ellipse.surface.naive_extension_sample(x),
                        f.ellipse_tn.proper_extension_sample(x)}) {
      double scale = 1.0 + sample.jacobian.cwiseAbs().maxCoeff();
      CHECK(sample.identity_defect() <= 1e-8 * scale);
    }
  }
}
