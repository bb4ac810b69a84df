// propnormal: batch front end for the proper-normal-extension library.
//
// Subcommands: normal, counterexample, verify, sdf, eikonal, suite.
// Exit codes: 0 pass, 1 verification failure, 2 usage/parse error,
// 3 numerical failure.

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "propnormal/propnormal.hpp"

namespace pn = propnormal;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitVerificationFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

struct Options {
  std::string surface = "ellipse";
  bool surface_given = false;
  double eps = 0.0;  // 0: builtin default (files must pass --eps)
  double h = 0.02;
  std::vector<double> box;
  double band = 0.0;  // 0: min(3h, eps/2)
  int samples = 500;
  std::uint64_t seed = 42;
  double tol_unit = 1e-10;
  double tol_asym = 1e-5;
  double tol_autoparallel = 1e-5;
  double tol_gunter = 1e-5;
  std::string field = "proper";
  std::string points_file;
  std::string out;
};

void add_common_options(CLI::App* cmd, Options& opt) {
  // free the short -h for the grid-spacing option --h
  cmd->set_help_flag("--help", "print help and exit");
  auto* s = cmd->add_option("--surface", opt.surface,
                            "builtin surface name or surface spec file");
  s->each([&opt](const std::string&) { opt.surface_given = true; });
  cmd->add_option("--eps", opt.eps, "tube half-width (validated)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--samples", opt.samples, "sample count for verifications")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--seed", opt.seed, "RNG seed");
  cmd->add_option("--tol-unit", opt.tol_unit, "unit-norm defect tolerance")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--tol-asym", opt.tol_asym, "Jacobian asymmetry tolerance")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--tol-autoparallel", opt.tol_autoparallel,
                  "self-derivative tolerance")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--tol-gunter", opt.tol_gunter,
                  "tangential-derivative asymmetry tolerance")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--out", opt.out, "output file path");
}

bool is_builtin(const std::string& name) {
  const auto& names = pn::builtin_surface_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

struct ResolvedSurface {
  std::string name;
  pn::ImplicitSurface surface;
  double epsilon;
};

ResolvedSurface resolve_surface(const Options& opt) {
  if (is_builtin(opt.surface)) {
    pn::BuiltinSurface b = pn::make_builtin_surface(opt.surface);
    double eps = opt.eps > 0.0 ? opt.eps : b.default_epsilon;
    return {b.name, std::move(b.surface), eps};
  }
  pn::ImplicitSurface s = pn::load_surface_file(opt.surface);
  if (!(opt.eps > 0.0))
    throw pn::Error("surface files require an explicit --eps");
  return {opt.surface, std::move(s), opt.eps};
}

pn::PropernessTolerances tolerances(const Options& opt) {
  pn::PropernessTolerances t;
  t.unit = opt.tol_unit;
  t.asym = opt.tol_asym;
  t.autoparallel = opt.tol_autoparallel;
  t.gunter = opt.tol_gunter;
  return t;
}

std::vector<pn::Vec> read_points_csv(const std::string& path, int dim) {
  std::ifstream in(path);
  if (!in) throw pn::Error("cannot open points file: " + path);
  std::vector<pn::Vec> points;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    for (char& c : line)
      if (c == ',') c = ' ';
    std::istringstream row(line);
    pn::Vec x(dim);
    for (int i = 0; i < dim; ++i)
      if (!(row >> x[i]))
        throw pn::Error("points file " + path + " line " +
                        std::to_string(lineno) + ": expected " +
                        std::to_string(dim) + " coordinates");
    points.push_back(std::move(x));
  }
  return points;
}

std::ostream& open_output(std::ofstream& file, const std::string& path) {
  if (path.empty()) return std::cout;
  file.open(path);
  if (!file) throw pn::Error("cannot open output file: " + path);
  return file;
}

// ---- normal -----------------------------------------------------------

int cmd_normal(const Options& opt) {
  ResolvedSurface rs = resolve_surface(opt);
  if (opt.points_file.empty())
    throw pn::Error("normal requires --points FILE.csv");
  auto points = read_points_csv(opt.points_file, rs.surface.dim());
  std::ofstream file;
  std::ostream& os = open_output(file, opt.out);
  int failed = 0;
  for (const pn::Vec& x : points) {
    std::string row;
    for (Eigen::Index i = 0; i < x.size(); ++i)
      row += (i ? "," : "") + pn::format_double(x[i]);
    try {
      pn::Vec nu = rs.surface.normal(x);
      for (Eigen::Index i = 0; i < nu.size(); ++i)
        row += "," + pn::format_double(nu[i]);
    } catch (const pn::Error& e) {
      ++failed;
      row += std::string(",error: ") + e.what();
    }
    os << row << "\n";
  }
  return failed == 0 ? kExitPass : kExitVerificationFailure;
}

// ---- counterexample ---------------------------------------------------

int cmd_counterexample(const Options& opt) {
  // Hardwired to the ellipse x1^2 + 2 x2^2 = 1, whose normalized gradient
  // field has the closed-form mixed derivatives
  //   d1 N2 = -2 x2 x1 / (x1^2 + 4 x2^2)^(3/2)
  //   d2 N1 = -4 x1 x2 / (x1^2 + 4 x2^2)^(3/2)
  // These differ wherever x1 x2 != 0, so the field is not a gradient there.
  pn::BuiltinSurface b = pn::make_builtin_surface("ellipse");
  std::vector<pn::Vec> points;
  auto add = [&points](double x1, double x2) {
    pn::Vec p(2);
    p << x1, x2;
    points.push_back(std::move(p));
  };
  add(1.0, 1.0);
  add(1.0, 0.0);
  add(0.0, 1.0);
  if (!opt.points_file.empty())
    for (auto& p : read_points_csv(opt.points_file, 2)) points.push_back(p);

  std::cout << "field: N = grad Psi / |grad Psi|, Psi = x1^2 + 2*x2^2 - 1\n";
  double max_defect = 0.0;
  bool axis_ok = true;
  for (const pn::Vec& p : points) {
    auto sample = b.surface.naive_extension_sample(p);
    double denom = std::pow(p[0] * p[0] + 4.0 * p[1] * p[1], 1.5);
    double closed12 = -2.0 * p[1] * p[0] / denom;
    double closed21 = -4.0 * p[0] * p[1] / denom;
    double d12 = sample.jacobian(0, 1);
    double d21 = sample.jacobian(1, 0);
    double defect =
        std::max(std::fabs(d12 - closed12), std::fabs(d21 - closed21));
    max_defect = std::max(max_defect, defect);
    if (p[0] * p[1] == 0.0 && std::fabs(d12 - d21) > 1e-12) axis_ok = false;
    std::cout << "point=" << pn::format_point(p)
              << " d1N2=" << pn::format_double(d12)
              << " closed=" << pn::format_double(closed12)
              << " d2N1=" << pn::format_double(d21)
              << " closed=" << pn::format_double(closed21)
              << " defect=" << pn::format_double(defect)
              << " asym=" << pn::format_double(d12 - d21) << "\n";
  }
  bool pass = max_defect <= 1e-10 && axis_ok;
  std::cout << "max_defect=" << pn::format_double(max_defect)
            << " status=" << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? kExitPass : kExitVerificationFailure;
}

// ---- verify -----------------------------------------------------------

void print_properness(std::ostream& os, const pn::PropernessReport& rep) {
  os << "points_checked=" << rep.points_checked
     << " failures=" << rep.failures << "\n";
  os << "max_unit_defect=" << pn::format_double(rep.max_unit_defect) << "\n";
  os << "max_asym=" << pn::format_double(rep.max_asym) << "\n";
  os << "max_autoparallel=" << pn::format_double(rep.max_autoparallel) << "\n";
  os << "max_gunter_asym=" << pn::format_double(rep.max_gunter_asym) << "\n";
  os << "tol_unit=" << pn::format_double(rep.tolerances.unit)
     << " tol_asym=" << pn::format_double(rep.tolerances.asym)
     << " tol_autoparallel=" << pn::format_double(rep.tolerances.autoparallel)
     << " tol_gunter=" << pn::format_double(rep.tolerances.gunter) << "\n";
  int k = 0;
  for (const auto& w : rep.witnesses) {
    os << "witness_" << ++k << "=" << pn::format_point(w.point)
       << " unit=" << pn::format_double(w.unit_defect)
       << " asym=" << pn::format_double(w.asym)
       << " autoparallel=" << pn::format_double(w.autoparallel)
       << " gunter=" << pn::format_double(w.gunter_asym) << "\n";
  }
  os << "verdict=" << (rep.proper ? "proper" : "not_proper") << "\n";
}

int cmd_verify(const Options& opt) {
  ResolvedSurface rs = resolve_surface(opt);
  pn::TubularNeighborhood tn(rs.surface, rs.epsilon);
  pn::FieldSampler field;
  if (opt.field == "proper")
    field = pn::proper_field(tn);
  else if (opt.field == "naive")
    field = pn::naive_field(tn.surface());
  else
    throw pn::Error("--field must be 'naive' or 'proper'");
  std::cout << "surface=" << rs.name << " field=" << opt.field
            << " epsilon=" << pn::format_double(rs.epsilon)
            << " samples=" << opt.samples << " seed=" << opt.seed << "\n";
  pn::PropernessReport rep =
      pn::verify_properness(tn, field, opt.samples, tolerances(opt), opt.seed);
  print_properness(std::cout, rep);
  return rep.proper ? kExitPass : kExitVerificationFailure;
}

// ---- sdf / eikonal ----------------------------------------------------

pn::Grid make_grid(const Options& opt, const pn::ImplicitSurface& s) {
  pn::Box box = s.box();
  if (!opt.box.empty()) {
    if (static_cast<int>(opt.box.size()) != 2 * s.dim())
      throw pn::Error("--box needs " + std::to_string(2 * s.dim()) +
                      " numbers (lo hi per axis)");
    for (int i = 0; i < s.dim(); ++i) {
      box.lo[i] = opt.box[2 * i];
      box.hi[i] = opt.box[2 * i + 1];
    }
  }
  return pn::Grid::cover(box, opt.h);
}

int cmd_sdf(const Options& opt) {
  ResolvedSurface rs = resolve_surface(opt);
  pn::TubularNeighborhood tn(rs.surface, rs.epsilon);
  pn::Grid g = make_grid(opt, tn.surface());
  const pn::ImplicitSurface& s = tn.surface();
  std::atomic<long> finite{0};
  pn::detail::parallel_for(
      g.size(), pn::detail::resolve_thread_count(0), [&](std::size_t i) {
        pn::Vec x = g.point(i);
        try {
          pn::Jet2 j = s.psi().eval_jet2(x);
          double gn = j.grad.norm();
          if (gn < s.regularity_floor()) return;
          if (std::fabs(j.value) / gn > 3.0 * tn.epsilon()) return;
          g.values[i] = pn::detail::project_impl(s, x, tn.epsilon()).offset;
          g.state[i] = pn::NodeState::Accepted;
          finite.fetch_add(1, std::memory_order_relaxed);
        } catch (const pn::Error&) {
          // outside the tube: leave the inf sentinel
        }
      });
  if (finite.load() == 0)
    throw pn::GridError("tube does not intersect the grid box");
  std::string path = opt.out.empty() ? "sdf.txt" : opt.out;
  std::ofstream file(path);
  if (!file) throw pn::Error("cannot open output file: " + path);
  pn::write_grid(g, file);
  std::cout << "wrote=" << path << " nodes=" << g.size()
            << " finite=" << finite.load() << "\n";
  return kExitPass;
}

int cmd_eikonal(const Options& opt) {
  ResolvedSurface rs = resolve_surface(opt);
  pn::TubularNeighborhood tn(rs.surface, rs.epsilon);
  pn::Grid g = make_grid(opt, tn.surface());
  double band =
      opt.band > 0.0 ? opt.band : std::min(3.0 * opt.h, tn.epsilon() / 2.0);
  int seeds = pn::initialize_band(g, tn, band);
  pn::SolveStats stats = pn::solve(g);
  std::string path = opt.out.empty() ? "eikonal.txt" : opt.out;
  std::ofstream file(path);
  if (!file) throw pn::Error("cannot open output file: " + path);
  pn::write_grid(g, file);

  // cross-check against the tubular signed distance inside the tube
  double linf = 0.0;
  long checked = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.state[i] != pn::NodeState::Accepted) continue;
    if (std::fabs(g.values[i]) > 0.9 * tn.epsilon()) continue;
    try {
      double sd = tn.signed_distance(g.point(i));
      linf = std::max(linf, std::fabs(g.values[i] - sd));
      ++checked;
    } catch (const pn::Error&) {
    }
  }
  std::cout << "wrote=" << path << " seeds=" << seeds
            << " accepted=" << stats.accepted
            << " unreached=" << stats.unreached << "\n";
  std::cout << "crosscheck_nodes=" << checked
            << " crosscheck_linf=" << pn::format_double(linf)
            << " bound_2h=" << pn::format_double(2.0 * opt.h) << "\n";
  return kExitPass;
}

// ---- suite ------------------------------------------------------------

struct SuiteState {
  int checks = 0;
  int failed = 0;
};

void suite_line(SuiteState& st, const std::string& surface,
                const std::string& check, bool pass,
                const std::string& detail) {
  ++st.checks;
  if (!pass) ++st.failed;
  std::cout << "check=" << check << " surface=" << surface << " " << detail
            << " status=" << (pass ? "PASS" : "FAIL") << "\n";
}

void suite_for_surface(const std::string& name, const Options& opt,
                       SuiteState& st) {
  pn::BuiltinSurface b = pn::make_builtin_surface(name);
  const double eps = opt.eps > 0.0 ? opt.eps : b.default_epsilon;
  pn::TubularNeighborhood tn(b.surface, eps);
  const pn::ImplicitSurface& s = tn.surface();
  const int n = s.dim();
  const std::uint64_t seed = opt.seed;

  {  // tangential-derivative symmetry of nu on S
    pn::Rng rng(seed + 1);
    auto pts = pn::sample_surface_points(s, 200, rng);
    double defect = pn::check_gunter_symmetry_on_surface(s, pts);
    suite_line(st, name, "gunter_symmetry", defect <= 1e-8,
               "points=200 max_defect=" + pn::format_double(defect) +
                   " tol=1e-08");
  }

  {  // properness of the tubular extension throughout the tube
    auto rep =
        pn::verify_properness(tn, opt.samples, tolerances(opt), seed + 2);
    suite_line(
        st, name, "properness_proper", rep.proper,
        "samples=" + std::to_string(rep.points_checked) +
            " max_unit=" + pn::format_double(rep.max_unit_defect) +
            " max_asym=" + pn::format_double(rep.max_asym) +
            " max_autoparallel=" + pn::format_double(rep.max_autoparallel) +
            " max_gunter=" + pn::format_double(rep.max_gunter_asym));
  }

  {  // offset round trip, |grad Phi| = 1, grad Phi = N
    pn::Rng rng(seed + 3);
    auto feet = pn::sample_surface_points(s, opt.samples, rng);
    double worst_rt = 0.0, worst_eik = 0.0, worst_grad = 0.0;
    for (const pn::Vec& xh : feet) {
      pn::Vec nu = s.normal(xh);
      double t = rng.uniform(-0.9 * eps, 0.9 * eps);
      pn::Vec x = xh + t * nu;
      worst_rt = std::max(worst_rt, std::fabs(tn.project(x).offset - t));
      const double fd = 1e-5;
      pn::Vec grad(n);
      for (int d = 0; d < n; ++d) {
        pn::Vec xp = x, xm = x;
        xp[d] += fd;
        xm[d] -= fd;
        grad[d] = (tn.signed_distance(xp) - tn.signed_distance(xm)) / (2 * fd);
      }
      worst_eik = std::max(worst_eik, std::fabs(grad.norm() - 1.0));
      worst_grad = std::max(
          worst_grad, (grad - tn.proper_extension(x)).cwiseAbs().maxCoeff());
    }
    suite_line(st, name, "offset_round_trip", worst_rt <= 1e-8,
               "samples=" + std::to_string(opt.samples) +
                   " max_defect=" + pn::format_double(worst_rt) +
                   " tol=1e-08");
    suite_line(st, name, "eikonal_gradient_norm", worst_eik <= 1e-5,
               "max_defect=" + pn::format_double(worst_eik) + " tol=1e-05");
    suite_line(st, name, "gradient_matches_extension", worst_grad <= 1e-5,
               "max_defect=" + pn::format_double(worst_grad) + " tol=1e-05");
  }

  {  // integral curves of the extension are straight lines
    pn::Rng rng(seed + 4);
    auto feet = pn::sample_surface_points(s, 50, rng);
    double worst = 0.0;
    for (const pn::Vec& xh : feet)
      worst = std::max(worst,
                       tn.integral_curve_straightness(xh, 0.75 * eps, 100));
    suite_line(st, name, "integral_curve_straightness", worst <= 1e-8,
               "curves=50 max_deviation=" + pn::format_double(worst) +
                   " tol=1e-08");
  }

  {  // the extension is constant along each normal segment
    pn::Rng rng(seed + 5);
    auto feet = pn::sample_surface_points(s, 50, rng);
    double worst = 0.0;
    for (const pn::Vec& xh : feet) {
      pn::Vec nu = s.normal(xh);
      for (double f : {-0.9, -0.6, -0.3, 0.3, 0.6, 0.9})
        worst = std::max(worst, (tn.proper_extension(xh + f * eps * nu) - nu)
                                    .cwiseAbs()
                                    .maxCoeff());
    }
    suite_line(st, name, "extension_constant_along_normals", worst <= 1e-10,
               "feet=50 max_defect=" + pn::format_double(worst) +
                   " tol=1e-10");
  }

  {  // nu stays orthogonal to every offset level set
    pn::Rng rng(seed + 6);
    auto feet = pn::sample_surface_points(s, 100, rng);
    double worst = 0.0;
    for (const pn::Vec& xh : feet) {
      double t = rng.uniform(-0.8 * eps, 0.8 * eps);
      worst = std::max(worst, tn.level_set_orthogonality(xh, t, 4));
    }
    suite_line(st, name, "level_set_orthogonality", worst <= 1e-5,
               "pairs=100 max_defect=" + pn::format_double(worst) +
                   " tol=1e-05");
  }

  {  // equivalence of the two properness conditions on S (proper field)
    pn::Rng rng(seed + 7);
    auto pts = pn::sample_surface_points(s, 100, rng);
    auto rep =
        pn::check_properness_equivalence(s, pn::proper_field(tn), pts, 1e-5);
    bool pass =
        rep.equivalence_held && rep.both_conditions_hold && rep.identity_ok;
    suite_line(st, name, "properness_equivalence_proper", pass,
               "points=100 max_autoparallel=" +
                   pn::format_double(rep.max_autoparallel) +
                   " max_asym=" + pn::format_double(rep.max_asym) +
                   " identity=" + pn::format_double(rep.max_identity_defect));
  }

  {  // all four derivative quantities agree on S (proper field)
    pn::Rng rng(seed + 8);
    auto pts = pn::sample_surface_points(s, 100, rng);
    double spread =
        pn::check_derivative_agreement(s, pn::proper_field(tn), pts, 1e-5);
    suite_line(st, name, "derivative_agreement", spread <= 1e-5,
               "points=100 max_spread=" + pn::format_double(spread) +
                   " tol=1e-05");
  }

  {  // unit-field identity for both fields at tube points
    pn::Rng rng(seed + 9);
    auto feet = pn::sample_surface_points(s, 100, rng);
    double worst = 0.0;
    for (const pn::Vec& xh : feet) {
      double t = rng.uniform(-0.8 * eps, 0.8 * eps);
      pn::Vec x = xh + t * s.normal(xh);
      for (auto sample :
           {tn.proper_extension_sample(x), s.naive_extension_sample(x)}) {
        double scale = 1.0 + sample.jacobian.cwiseAbs().maxCoeff();
        worst = std::max(worst, sample.identity_defect() / scale);
      }
    }
    suite_line(st, name, "unit_field_identity", worst <= 1e-8,
               "points=100 max_defect=" + pn::format_double(worst) +
                   " tol=1e-08");
  }

  if (name == "ellipse") {
    {  // closed-form mixed derivatives of the naive field
      pn::Rng rng(seed + 10);
      double worst = 0.0, min_asym = 1e300;
      int kept = 0;
      while (kept < 100) {
        pn::Vec p = kept % 2 == 0
                        ? s.box().sample(rng)
                        : pn::sample_surface_points(s, 1, rng).front();
        if (std::fabs(p[0] * p[1]) < 1e-3) continue;
        ++kept;
        auto sample = s.naive_extension_sample(p);
        double denom = std::pow(p[0] * p[0] + 4.0 * p[1] * p[1], 1.5);
        worst = std::max(
            worst,
            std::fabs(sample.jacobian(0, 1) + 2.0 * p[1] * p[0] / denom));
        worst = std::max(
            worst,
            std::fabs(sample.jacobian(1, 0) + 4.0 * p[0] * p[1] / denom));
        min_asym = std::min(
            min_asym, std::fabs(sample.jacobian(0, 1) - sample.jacobian(1, 0)));
      }
      double axis_worst = 0.0;
      for (double x1 : {1.0, -1.0, 0.5}) {
        pn::Vec p(2);
        p << x1, 0.0;
        auto sample = s.naive_extension_sample(p);
        axis_worst = std::max(axis_worst, sample.max_asym());
        p << 0.0, x1;
        sample = s.naive_extension_sample(p);
        axis_worst = std::max(axis_worst, sample.max_asym());
      }
      bool pass = worst <= 1e-10 && min_asym > 0.0 && axis_worst <= 1e-12;
      suite_line(st, name, "counterexample_closed_form", pass,
                 "points=100 max_defect=" + pn::format_double(worst) +
                     " min_asym=" + pn::format_double(min_asym) +
                     " axis_asym=" + pn::format_double(axis_worst));
    }

    {  // the naive field must be rejected by the properness verifier
      auto rep = pn::verify_properness(tn, pn::naive_field(s), opt.samples,
                                       tolerances(opt), seed + 11);
      bool witnesses_off_axis = !rep.witnesses.empty();
      for (const auto& w : rep.witnesses)
        if (std::fabs(w.point[0] * w.point[1]) == 0.0)
          witnesses_off_axis = false;
      suite_line(st, name, "properness_naive_not_proper",
                 !rep.proper && witnesses_off_axis,
                 "samples=" + std::to_string(rep.points_checked) +
                     " max_asym=" + pn::format_double(rep.max_asym));
    }

    {  // conditions (i) and (ii) fail jointly off the axes
      pn::Rng rng(seed + 12);
      auto pts = pn::sample_surface_points(s, 300, rng);
      double min_a = 1e300, min_b = 1e300;
      int used = 0;
      const double tol = 1e-6;
      for (const pn::Vec& p : pts) {
        if (std::fabs(p[0] * p[1]) < 0.05) continue;
        ++used;
        auto sample = s.naive_extension_sample(p);
        min_a = std::min(min_a, sample.max_autoparallel());
        min_b = std::min(min_b, sample.max_asym());
      }
      bool pass = used > 0 && min_a > tol && min_b > n * tol;
      suite_line(st, name, "properness_equivalence_naive_joint_failure", pass,
                 "points=" + std::to_string(used) +
                     " min_autoparallel=" + pn::format_double(min_a) +
                     " min_asym=" + pn::format_double(min_b) +
                     " tol=" + pn::format_double(tol));
    }
  }

  if (name == "circle") {
    {  // x/|x| is proper: the verifier must accept the naive field
      auto rep = pn::verify_properness(tn, pn::naive_field(s), opt.samples,
                                       tolerances(opt), seed + 13);
      suite_line(st, name, "properness_naive_circle", rep.proper,
                 "samples=" + std::to_string(rep.points_checked) +
                     " max_asym=" + pn::format_double(rep.max_asym));
    }
    {  // both conditions hold for the naive circle field
      pn::Rng rng(seed + 14);
      auto pts = pn::sample_surface_points(s, 100, rng);
      auto rep =
          pn::check_properness_equivalence(s, pn::naive_field(s), pts, 1e-6);
      bool pass =
          rep.equivalence_held && rep.both_conditions_hold && rep.identity_ok;
      suite_line(st, name, "properness_equivalence_naive_circle", pass,
                 "points=100 max_autoparallel=" +
                     pn::format_double(rep.max_autoparallel) +
                     " max_asym=" + pn::format_double(rep.max_asym));
      double spread =
          pn::check_derivative_agreement(s, pn::naive_field(s), pts, 1e-6);
      suite_line(st, name, "derivative_agreement_naive_circle", spread <= 1e-8,
                 "points=100 max_spread=" + pn::format_double(spread) +
                     " tol=1e-08");
    }
    {  // fast marching against the exact distance |x| - 1
      const double h = 0.02;
      pn::Grid g = pn::Grid::cover(s.box(), h);
      pn::initialize_band(g, tn, 3.0 * h);
      pn::SolveStats stats = pn::solve(g);
      double linf = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (g.state[i] != pn::NodeState::Accepted) continue;
        pn::Vec p = g.point(i);
        linf = std::max(linf, std::fabs(g.values[i] - (p.norm() - 1.0)));
      }
      double resid = pn::max_upwind_residual(g);
      bool pass = stats.unreached == 0 && linf <= 2.0 * h && resid <= 1e-10;
      suite_line(st, name, "fmm_circle", pass,
                 "h=" + pn::format_double(h) +
                     " linf=" + pn::format_double(linf) +
                     " residual=" + pn::format_double(resid));
    }
  }

  if (name == "hyperplane") {
    const double h = 0.02;
    pn::Grid g = pn::Grid::cover(s.box(), h);
    pn::initialize_band(g, tn, 3.0 * h);
    pn::solve(g);
    double linf = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      pn::Vec p = g.point(i);
      linf = std::max(linf, std::fabs(g.values[i] - p[1]));
    }
    suite_line(st, name, "fmm_hyperplane", linf <= 1e-9,
               "h=" + pn::format_double(h) + " linf=" + pn::format_double(linf) +
                   " tol=1e-09");
  }
}

int cmd_suite(const Options& opt) {
  std::vector<std::string> set;
  if (opt.surface_given) {
    if (!is_builtin(opt.surface))
      throw pn::Error("suite runs on builtin surfaces only, got '" +
                      opt.surface + "'");
    set.push_back(opt.surface);
  } else {
    set = pn::builtin_surface_names();
  }
  std::cout << "suite surfaces=" << set.size() << " samples=" << opt.samples
            << " seed=" << opt.seed << "\n";
  SuiteState st;
  for (const auto& nm : set) suite_for_surface(nm, opt, st);
  std::cout << "suite=" << (st.failed == 0 ? "PASS" : "FAIL")
            << " checks=" << st.checks << " failed=" << st.failed << "\n";
  return st.failed == 0 ? kExitPass : kExitVerificationFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"proper extensions of unit normal fields: verification tools"};
  app.set_help_flag("--help", "print help and exit");
  app.require_subcommand(1);

  Options o_normal, o_counter, o_verify, o_sdf, o_eikonal, o_suite;
  int code = kExitPass;

  auto* c_normal = app.add_subcommand(
      "normal", "unit normals at surface points read from a CSV");
  add_common_options(c_normal, o_normal);
  c_normal->add_option("--points", o_normal.points_file, "input points CSV");
  c_normal->callback([&] { code = cmd_normal(o_normal); });

  auto* c_counter = app.add_subcommand(
      "counterexample",
      "mixed derivatives of the normalized-gradient field on the ellipse");
  add_common_options(c_counter, o_counter);
  c_counter->add_option("--points", o_counter.points_file,
                        "extra evaluation points CSV");
  c_counter->callback([&] { code = cmd_counterexample(o_counter); });

  auto* c_verify =
      app.add_subcommand("verify", "properness verdict for a field in a tube");
  add_common_options(c_verify, o_verify);
  c_verify->add_option("--field", o_verify.field, "naive or proper");
  c_verify->callback([&] { code = cmd_verify(o_verify); });

  auto* c_sdf = app.add_subcommand(
      "sdf", "signed-distance grid from closest-point projection (tube only)");
  add_common_options(c_sdf, o_sdf);
  c_sdf->add_option("--h", o_sdf.h, "grid spacing");
  c_sdf->add_option("--box", o_sdf.box, "grid box: lo1 hi1 lo2 hi2 ...")
      ->expected(-1);
  c_sdf->callback([&] { code = cmd_sdf(o_sdf); });

  auto* c_eik = app.add_subcommand(
      "eikonal", "fast-marching signed-distance grid over the full box");
  add_common_options(c_eik, o_eikonal);
  c_eik->add_option("--h", o_eikonal.h, "grid spacing");
  c_eik->add_option("--box", o_eikonal.box, "grid box: lo1 hi1 lo2 hi2 ...")
      ->expected(-1);
  c_eik->add_option("--band", o_eikonal.band, "seed band width");
  c_eik->callback([&] { code = cmd_eikonal(o_eikonal); });

  auto* c_suite = app.add_subcommand(
      "suite", "full verification suite over the builtin surfaces");
  add_common_options(c_suite, o_suite);
  c_suite->callback([&] { code = cmd_suite(o_suite); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int cli_code = app.exit(e);
    return cli_code == 0 ? kExitPass : kExitUsage;
  } catch (const pn::NoConvergenceError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const pn::OutsideTubeError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const pn::NotOnSurfaceError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const pn::OutsideDomainError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const pn::EvalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const pn::RegularityError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const pn::PreconditionError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const pn::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return code;
}
