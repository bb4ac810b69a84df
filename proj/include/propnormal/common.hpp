#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace propnormal {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Syntax or semantic error while parsing text input; `offset` is the byte
/// position in the input where the problem was detected.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Expression evaluated outside its domain, or the result overflowed to a
/// non-finite value.
class EvalError : public Error {
 public:
  using Error::Error;
};

/// |grad Psi| fell below the surface's regularity floor.
class RegularityError : public Error {
 public:
  using Error::Error;
};

class NotOnSurfaceError : public Error {
 public:
  using Error::Error;
};

class OutsideDomainError : public Error {
 public:
  using Error::Error;
};

/// Closest-point Newton iteration did not converge from any start.
class NoConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Query point's offset is not strictly inside the tube half-width.
class OutsideTubeError : public Error {
 public:
  using Error::Error;
};

class GridError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A construction-time or epsilon-validation check failed.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Shortest round-trippable decimal rendering used for all file and report
/// output: 17 significant digits reproduce the exact double on re-parse.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_point(const Vec& x) {
  std::string out = "(";
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (i > 0) out += ", ";
    out += format_double(x[i]);
  }
  out += ")";
  return out;
}

/// Deterministic RNG with explicitly coded distributions. std::* distributions
/// are implementation-defined, which would make frozen test values and
/// byte-identical reports fragile across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    // splitmix64 expansion of the seed into a healthy state
    state_ = seed;
    for (int i = 0; i < 4; ++i) next();
  }

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  /// Standard normal via Box-Muller; pairs are cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 == 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  Vec gaussian_vector(int n) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  /// Uniformly distributed direction on the unit sphere in R^n.
  Vec unit_vector(int n) {
    while (true) {
      Vec v = gaussian_vector(n);
      double nrm = v.norm();
      if (nrm > 1e-12) return v / nrm;
    }
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Lexicographic comparison used whenever reports need a deterministic
/// ordering of points.
inline bool lex_less(const Vec& a, const Vec& b) {
  for (Eigen::Index i = 0; i < a.size() && i < b.size(); ++i) {
    if (a[i] < b[i]) return true;
    if (a[i] > b[i]) return false;
  }
  return a.size() < b.size();
}

}  // namespace propnormal
