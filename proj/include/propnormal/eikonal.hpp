#pragma once

#include <atomic>
#include <cstdlib>
#include <istream>
#include <limits>
#include <mutex>
#include <ostream>
#include <queue>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "propnormal/tubular.hpp"

namespace propnormal {

enum class NodeState : std::uint8_t { Far, Band, Accepted };

/// Uniform n-dimensional Cartesian grid of scalar values, row-major with the
/// last axis fastest. Unreached nodes keep the +inf sentinel.
class Grid {
 public:
  Grid(Vec origin, double spacing, std::vector<int> counts)
      : origin_(std::move(origin)), spacing_(spacing), counts_(std::move(counts)) {
    if (static_cast<int>(origin_.size()) != static_cast<int>(counts_.size()))
      throw GridError("origin and counts dimension mismatch");
    if (!(spacing_ > 0.0)) throw GridError("spacing must be positive");
    std::size_t total = 1;
    for (int c : counts_) {
      if (c < 2) throw GridError("need at least 2 nodes per axis");
      total *= static_cast<std::size_t>(c);
    }
    values.assign(total, std::numeric_limits<double>::infinity());
    state.assign(total, NodeState::Far);
    side.assign(total, 0);
    seed.assign(total, false);
    strides_.assign(counts_.size(), 1);
    for (int i = static_cast<int>(counts_.size()) - 2; i >= 0; --i)
      strides_[i] = strides_[i + 1] * counts_[i + 1];
  }

  /// Grid covering `box` with the given spacing; node 0 sits at box.lo and
  /// the last node within spacing of box.hi.
  static Grid cover(const Box& box, double spacing) {
    std::vector<int> counts(box.dim());
    for (int i = 0; i < box.dim(); ++i)
      counts[i] =
          static_cast<int>(std::floor((box.hi[i] - box.lo[i]) / spacing + 0.5)) +
          1;
    return Grid(box.lo, spacing, std::move(counts));
  }

  int dim() const { return static_cast<int>(counts_.size()); }
  double spacing() const { return spacing_; }
  const Vec& origin() const { return origin_; }
  const std::vector<int>& counts() const { return counts_; }
  std::size_t size() const { return values.size(); }
  std::size_t stride(int axis) const { return strides_[axis]; }

  int coord(std::size_t flat, int axis) const {
    return static_cast<int>(flat / strides_[axis]) % counts_[axis];
  }

  Vec point(std::size_t flat) const {
    Vec x(dim());
    for (int i = 0; i < dim(); ++i)
      x[i] = origin_[i] + spacing_ * coord(flat, i);
    return x;
  }

  std::vector<double> values;
  std::vector<NodeState> state;
  std::vector<std::int8_t> side;
  std::vector<char> seed;  // exact-distance nodes placed by initialize_band

 private:
  Vec origin_;
  double spacing_;
  std::vector<int> counts_;
  std::vector<std::size_t> strides_;
};

struct LevelSetSlice {
  double level = 0.0;
  std::vector<Vec> points;
};

struct SolveStats {
  std::size_t accepted = 0;
  std::size_t unreached = 0;
};

namespace detail {

inline int resolve_thread_count(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("PROPNORMAL_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Node-independent loop; output is identical to the sequential run for any
/// partitioning.
template <typename F>
inline void parallel_for(std::size_t count, int threads, F&& body) {
  threads = std::min<std::size_t>(threads, count == 0 ? 1 : count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  std::size_t chunk = (count + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    std::size_t begin = t * chunk;
    std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([begin, end, &body] {
      for (std::size_t i = begin; i < end; ++i) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail

/// Seed every node within band_width of S with its exact signed distance
/// from the closest-point projection and mark it accepted. A cheap
/// |Psi|/|grad Psi| bound filters the nodes that could possibly be in the
/// band before the projection runs.
///
/// Returns the number of seeded nodes.
inline int initialize_band(Grid& g, const TubularNeighborhood& tn,
                           double band_width, int max_threads = 0) {
  const double h = g.spacing();
  if (band_width < 2.0 * h)
    throw GridError("band width " + format_double(band_width) +
                    " too thin for the upwind stencil (need >= 2h = " +
                    format_double(2.0 * h) + ")");
  if (band_width > tn.epsilon() / 2.0)
    throw GridError("band width must not exceed epsilon/2");
  const ImplicitSurface& s = tn.surface();
  std::string failure;
  std::atomic<int> seeded{0};
  std::mutex failure_mutex;
  detail::parallel_for(
      g.size(), detail::resolve_thread_count(max_threads),
      [&](std::size_t i) {
        Vec x = g.point(i);
        double estimate;
        try {
          Jet2 j = s.psi().eval_jet2(x);
          double gn = j.grad.norm();
          if (gn < s.regularity_floor()) return;  // no surface nearby
          estimate = std::fabs(j.value) / gn;
        } catch (const Error&) {
          return;  // Psi undefined here; the band never reaches such points
        }
        if (estimate > 3.0 * band_width) return;
        try {
          TubularCoord tc = detail::project_impl(s, x, tn.epsilon());
          if (std::fabs(tc.offset) > band_width) return;
          g.values[i] = tc.offset;
          g.state[i] = NodeState::Accepted;
          g.side[i] = tc.offset < 0.0 ? -1 : 1;
          g.seed[i] = true;
          seeded.fetch_add(1, std::memory_order_relaxed);
        } catch (const OutsideTubeError&) {
          // between band and tube boundary: a far node
        } catch (const Error& e) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (failure.empty()) failure = e.what();
        }
      });
  if (!failure.empty())
    throw GridError("projection failed at a candidate seed node: " + failure);
  if (seeded.load() == 0)
    throw GridError("surface does not intersect the grid: no seed nodes");
  return seeded.load();
}

namespace detail {

/// Godunov upwind update from the per-axis minima `a` (magnitudes of
/// accepted neighbors): the largest root of sum max(u - a_d, 0)^2 = h^2,
/// dropping dimensions when the discriminant goes negative.
/// Returns the value and the index into `a` of the smallest magnitude used.
inline std::pair<double, int> godunov_update(std::vector<double>& a,
                                             std::vector<int>& who, double h) {
  // insertion sort keyed by magnitude, carrying the source tag along
  const int m = static_cast<int>(a.size());
  for (int i = 1; i < m; ++i) {
    double av = a[i];
    int wv = who[i];
    int j = i - 1;
    while (j >= 0 && a[j] > av) {
      a[j + 1] = a[j];
      who[j + 1] = who[j];
      --j;
    }
    a[j + 1] = av;
    who[j + 1] = wv;
  }
  double u = a[0] + h;
  double sum = a[0];
  double sumsq = a[0] * a[0];
  for (int k = 2; k <= m; ++k) {
    double ak = a[k - 1];
    if (ak >= u) break;
    sum += ak;
    sumsq += ak * ak;
    double disc = sum * sum - k * (sumsq - h * h);
    if (disc < 0.0) break;
    u = (sum + std::sqrt(disc)) / k;
  }
  return {u, who[0]};
}

}  // namespace detail

/// Fast marching over magnitudes from the accepted band, heap ties broken by
/// node index. Signs are restored from the seed side carried along the
/// acceptance order. Throws if the monotone-causality invariant is violated.
inline SolveStats solve(Grid& g) {
  const double h = g.spacing();
  const int n = g.dim();
  const std::size_t total = g.size();
  std::vector<double> mag(total, std::numeric_limits<double>::infinity());
  std::vector<std::int8_t> tent_side(total, 0);
  std::size_t seed_count = 0;
  for (std::size_t i = 0; i < total; ++i) {
    if (g.state[i] == NodeState::Accepted) {
      mag[i] = std::fabs(g.values[i]);
      tent_side[i] = g.side[i];
      ++seed_count;
    } else {
      g.state[i] = NodeState::Far;
    }
  }
  if (seed_count == 0) throw GridError("solve requires an initialized band");

  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap;

  std::vector<double> a;
  std::vector<int> who;
  a.reserve(n);
  who.reserve(n);
  std::vector<std::size_t> used_nb;
  used_nb.reserve(2 * n);

  auto update_node = [&](std::size_t i) {
    a.clear();
    who.clear();
    used_nb.clear();
    for (int d = 0; d < n; ++d) {
      const std::size_t stride = g.stride(d);
      const int c = g.coord(i, d);
      double best = std::numeric_limits<double>::infinity();
      std::size_t best_nb = 0;
      if (c > 0 && g.state[i - stride] == NodeState::Accepted) {
        best = mag[i - stride];
        best_nb = i - stride;
      }
      if (c + 1 < g.counts()[d] && g.state[i + stride] == NodeState::Accepted &&
          mag[i + stride] < best) {
        best = mag[i + stride];
        best_nb = i + stride;
      }
      if (std::isfinite(best)) {
        a.push_back(best);
        who.push_back(static_cast<int>(used_nb.size()));
        used_nb.push_back(best_nb);
      }
    }
    if (a.empty()) return;
    auto [u, src] = detail::godunov_update(a, who, h);
    if (u < mag[i]) {
      mag[i] = u;
      tent_side[i] = g.side[used_nb[src]];
      if (g.state[i] == NodeState::Far) g.state[i] = NodeState::Band;
      heap.emplace(u, i);
    }
  };

  auto for_each_neighbor = [&](std::size_t i, auto&& fn) {
    for (int d = 0; d < n; ++d) {
      const std::size_t stride = g.stride(d);
      const int c = g.coord(i, d);
      if (c > 0) fn(i - stride);
      if (c + 1 < g.counts()[d]) fn(i + stride);
    }
  };

  for (std::size_t i = 0; i < total; ++i)
    if (g.state[i] == NodeState::Accepted)
      for_each_neighbor(i, [&](std::size_t nb) {
        if (g.state[nb] != NodeState::Accepted) update_node(nb);
      });

  SolveStats stats;
  stats.accepted = seed_count;
  double last_pop = 0.0;
  while (!heap.empty()) {
    auto [m, i] = heap.top();
    heap.pop();
    if (g.state[i] == NodeState::Accepted || m > mag[i]) continue;  // stale
    if (m < last_pop)
      throw Error("fast marching monotonicity violated: popped " +
                  format_double(m) + " after " + format_double(last_pop));
    last_pop = m;
    g.state[i] = NodeState::Accepted;
    g.side[i] = tent_side[i];
    g.values[i] = tent_side[i] < 0 ? -m : m;
    ++stats.accepted;
    for_each_neighbor(i, [&](std::size_t nb) {
      if (g.state[nb] != NodeState::Accepted) update_node(nb);
    });
  }
  for (std::size_t i = 0; i < total; ++i) {
    if (g.state[i] != NodeState::Accepted) {
      g.state[i] = NodeState::Far;
      g.values[i] = std::numeric_limits<double>::infinity();
      ++stats.unreached;
    }
  }
  return stats;
}

/// Residual of the discrete upwind equation at every accepted non-seed node;
/// the solver's acceptance values must reproduce it to rounding.
inline double max_upwind_residual(const Grid& g) {
  const double h = g.spacing();
  const int n = g.dim();
  double worst = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.state[i] != NodeState::Accepted || g.seed[i]) continue;
    const double u = std::fabs(g.values[i]);
    double sum = 0.0;
    for (int d = 0; d < n; ++d) {
      const std::size_t stride = g.stride(d);
      const int c = g.coord(i, d);
      double best = std::numeric_limits<double>::infinity();
      if (c > 0 && g.state[i - stride] == NodeState::Accepted)
        best = std::fabs(g.values[i - stride]);
      if (c + 1 < g.counts()[d] && g.state[i + stride] == NodeState::Accepted)
        best = std::min(best, std::fabs(g.values[i + stride]));
      if (std::isfinite(best) && u > best) {
        double q = (u - best) / h;
        sum += q * q;
      }
    }
    worst = std::max(worst, std::fabs(sum - 1.0));
  }
  return worst;
}

struct GradientField {
  std::vector<Vec> gradient;  // aligned with node indexing
  std::vector<char> valid;    // interior nodes whose full stencil is accepted
};

/// Central-difference gradient of the solved grid at interior nodes.
inline GradientField gradient_field(const Grid& g) {
  const int n = g.dim();
  const double h = g.spacing();
  GradientField out;
  out.gradient.assign(g.size(), Vec::Zero(n));
  out.valid.assign(g.size(), 0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.state[i] != NodeState::Accepted) continue;
    bool ok = true;
    Vec grad(n);
    for (int d = 0; d < n && ok; ++d) {
      const std::size_t stride = g.stride(d);
      const int c = g.coord(i, d);
      if (c == 0 || c + 1 >= g.counts()[d] ||
          g.state[i - stride] != NodeState::Accepted ||
          g.state[i + stride] != NodeState::Accepted) {
        ok = false;
        break;
      }
      grad[d] = (g.values[i + stride] - g.values[i - stride]) / (2.0 * h);
    }
    if (!ok) continue;
    out.gradient[i] = std::move(grad);
    out.valid[i] = 1;
  }
  return out;
}

/// Linear interpolation of sign changes of (value - t) along grid edges.
inline LevelSetSlice extract_level_set(const Grid& g, double t) {
  LevelSetSlice slice;
  slice.level = t;
  const int n = g.dim();
  const double h = g.spacing();
  for (int d = 0; d < n; ++d) {
    const std::size_t stride = g.stride(d);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (g.coord(i, d) + 1 >= g.counts()[d]) continue;
      const std::size_t j = i + stride;
      if (g.state[i] != NodeState::Accepted ||
          g.state[j] != NodeState::Accepted)
        continue;
      const double f0 = g.values[i] - t;
      const double f1 = g.values[j] - t;
      if (f0 == 0.0 && d == 0) {
        slice.points.push_back(g.point(i));
        continue;
      }
      if ((f0 < 0.0 && f1 > 0.0) || (f0 > 0.0 && f1 < 0.0)) {
        double theta = f0 / (f0 - f1);
        Vec p = g.point(i);
        p[d] += theta * h;
        slice.points.push_back(std::move(p));
      }
    }
  }
  return slice;
}

/// Plain-text grid format: header lines dim/origin/spacing/counts, then one
/// value per line in row-major order; `inf` marks unreached nodes. All
/// decimals carry 17 significant digits so rewrites are byte-identical.
inline void write_grid(const Grid& g, std::ostream& os) {
  os << "dim " << g.dim() << "\n";
  os << "origin";
  for (int i = 0; i < g.dim(); ++i) os << " " << format_double(g.origin()[i]);
  os << "\n";
  os << "spacing " << format_double(g.spacing()) << "\n";
  os << "counts";
  for (int c : g.counts()) os << " " << c;
  os << "\n";
  for (double v : g.values) os << format_double(v) << "\n";
}

inline Grid read_grid(std::istream& is) {
  std::string key;
  int dim = 0;
  if (!(is >> key >> dim) || key != "dim")
    throw GridError("grid file: expected 'dim <n>'");
  Vec origin(dim);
  if (!(is >> key) || key != "origin")
    throw GridError("grid file: expected 'origin'");
  for (int i = 0; i < dim; ++i)
    if (!(is >> origin[i])) throw GridError("grid file: bad origin");
  double spacing = 0.0;
  if (!(is >> key >> spacing) || key != "spacing")
    throw GridError("grid file: expected 'spacing <h>'");
  std::vector<int> counts(dim);
  if (!(is >> key) || key != "counts")
    throw GridError("grid file: expected 'counts'");
  for (int i = 0; i < dim; ++i)
    if (!(is >> counts[i])) throw GridError("grid file: bad counts");
  Grid g(std::move(origin), spacing, std::move(counts));
  for (std::size_t i = 0; i < g.size(); ++i) {
    std::string tok;
    if (!(is >> tok)) throw GridError("grid file: truncated values");
    if (tok == "inf" || tok == "+inf") {
      g.values[i] = std::numeric_limits<double>::infinity();
      g.state[i] = NodeState::Far;
    } else if (tok == "-inf") {
      g.values[i] = -std::numeric_limits<double>::infinity();
      g.state[i] = NodeState::Far;
    } else {
      g.values[i] = std::strtod(tok.c_str(), nullptr);
      g.state[i] = NodeState::Accepted;
    }
  }
  return g;
}

}  // namespace propnormal
