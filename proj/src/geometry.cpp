#include "subfinsler/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <queue>
#include <sstream>
#include <string>
#include <unordered_map>

#include "subfinsler/finite_difference.hpp"

namespace subfinsler {

Vec Curve::velocity(std::size_t i) const {
  return (points.at(i + 1) - points.at(i)) / (times.at(i + 1) - times.at(i));
}

Vec Curve::midpoint(std::size_t i) const { return 0.5 * (points.at(i) + points.at(i + 1)); }

Vec Curve::at(double t) const {
  if (times.empty()) throw PreconditionError("Curve::at: empty curve");
  if (t <= times.front()) return points.front();
  if (t >= times.back()) return points.back();
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - times.begin()) - 1;
  const double w = (t - times[i]) / (times[i + 1] - times[i]);
  return (1.0 - w) * points[i] + w * points[i + 1];
}

void validate_curve(const Curve& curve, const Grid& grid) {
  if (curve.times.size() < 2 || curve.times.size() != curve.points.size())
    throw PreconditionError("curve: need at least two samples with one point per time");
  for (std::size_t i = 0; i + 1 < curve.times.size(); ++i) {
    if (!(curve.times[i + 1] > curve.times[i])) throw PreconditionError("curve: times must increase strictly");
  }
  for (const auto& p : curve.points) {
    if (static_cast<std::size_t>(p.size()) != grid.ndim())
      throw PreconditionError("curve: point dimension differs from the grid dimension");
    grid.require_contains(p, "curve");
  }
}

ExtReal curve_length(const SymbolField& sym, const Curve& curve, const DualNormOptions& opts) {
  validate_curve(curve, sym.grid());
  ExtReal total = ExtReal::finite(0.0);
  for (std::size_t i = 0; i < curve.segments(); ++i) {
    // P* is positively homogeneous, so P*(gamma') dt = P*(p_{i+1} - p_i).
    total += dual_norm(sym, curve.midpoint(i), curve.points[i + 1] - curve.points[i], opts);
    if (total.is_infinite()) break;
  }
  return total;
}

bool is_subunit(const SymbolField& sym, const Curve& curve, double tol, const DualNormOptions& opts) {
  validate_curve(curve, sym.grid());
  for (std::size_t i = 0; i < curve.segments(); ++i) {
    if (dual_norm(sym, curve.midpoint(i), curve.velocity(i), opts) > ExtReal::finite(1.0 + tol)) return false;
  }
  return true;
}

Curve arclength_reparam(const SymbolField& sym, const Curve& curve, const DualNormOptions& opts) {
  validate_curve(curve, sym.grid());
  Curve out;
  out.times.push_back(0.0);
  out.points.push_back(curve.points.front());
  double acc = 0.0;
  for (std::size_t i = 0; i < curve.segments(); ++i) {
    const ExtReal seg = dual_norm(sym, curve.midpoint(i), curve.points[i + 1] - curve.points[i], opts);
    if (seg.is_infinite()) throw PreconditionError("arclength_reparam: curve has infinite length");
    if (seg.value() == 0.0) continue;
    acc += seg.value();
    out.times.push_back(acc);
    out.points.push_back(curve.points[i + 1]);
  }
  if (acc == 0.0) throw PreconditionError("arclength_reparam: curve has zero length");
  return out;
}

// ------------------------------------------------------- distance fields

std::vector<std::vector<long>> stencil_offsets(std::size_t ndim, int radius) {
  if (radius < 1) throw PreconditionError("stencil_offsets: radius must be at least 1");
  std::vector<std::vector<long>> out;
  std::vector<long> o(ndim, -radius);
  while (true) {
    long g = 0;
    for (long c : o) g = std::gcd(g, std::abs(c));
    if (g == 1) out.push_back(o);
    std::size_t k = 0;
    while (k < ndim && o[k] == radius) o[k++] = -radius;
    if (k == ndim) break;
    ++o[k];
  }
  return out;
}

ScalarField DistanceField::to_field() const {
  ScalarField f(grid);
  for (std::size_t i = 0; i < values.size(); ++i) f.set(i, values[i].to_double());
  return f;
}

std::size_t DistanceField::infinite_count() const {
  return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](const ExtReal& v) { return v.is_infinite(); }));
}

double DistanceField::max_finite() const {
  double m = 0.0;
  for (const auto& v : values)
    if (v.is_finite()) m = std::max(m, v.value());
  return m;
}

namespace {

// Offsets whose first nonzero entry is positive; each undirected edge is
// stored once at its lower endpoint.
bool is_forward(const std::vector<long>& o) {
  for (long c : o) {
    if (c != 0) return c > 0;
  }
  return false;
}

}  // namespace

DistanceField graph_distance(const Grid& grid, const std::vector<std::size_t>& sources, int stencil_radius,
                             const EdgeCost& cost) {
  if (sources.empty()) throw PreconditionError("distance_field: empty source set");
  for (auto s : sources) {
    if (s >= grid.size()) throw DomainError("distance_field: source node outside the grid");
  }
  const std::size_t n = grid.ndim();
  std::vector<std::vector<long>> forward;
  for (auto& o : stencil_offsets(n, stencil_radius))
    if (is_forward(o)) forward.push_back(o);

  const std::size_t nodes = grid.size();
  const std::size_t m = forward.size();
  // edge[node * m + k]: cost of node -> node + forward[k]; +inf if pruned or
  // off grid. Evaluated lazily.
  constexpr double kUnset = -1.0;
  std::vector<double> edge(nodes * m, kUnset);
  const auto& dims = grid.dims();
  const auto& h = grid.spacing();

  auto neighbour = [&](const std::vector<std::size_t>& idx, const std::vector<long>& o, long sign,
                       std::vector<std::size_t>& out) {
    for (std::size_t k = 0; k < n; ++k) {
      const long c = static_cast<long>(idx[k]) + sign * o[k];
      if (c < 0 || c >= static_cast<long>(dims[k])) return false;
      out[k] = static_cast<std::size_t>(c);
    }
    return true;
  };
  auto edge_cost = [&](std::size_t lower_node, std::size_t k, std::size_t upper_node) {
    double& slot = edge[lower_node * m + k];
    if (slot == kUnset) {
      Vec v(static_cast<Eigen::Index>(n));
      for (std::size_t a = 0; a < n; ++a) v(static_cast<Eigen::Index>(a)) = static_cast<double>(forward[k][a]) * h[a];
      const Vec mid = 0.5 * (grid.node(lower_node) + grid.node(upper_node));
      slot = cost(mid, v).to_double();
    }
    return slot;
  };

  DistanceField df;
  df.grid = grid;
  df.stencil_radius = stencil_radius;
  df.sources = sources;
  std::sort(df.sources.begin(), df.sources.end());
  df.sources.erase(std::unique(df.sources.begin(), df.sources.end()), df.sources.end());

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(nodes, inf);
  std::vector<char> done(nodes, 0);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  for (auto s : df.sources) {
    dist[s] = 0.0;
    queue.push({0.0, s});
  }
  std::vector<std::size_t> nb(n);
  while (!queue.empty()) {
    const auto [d, node] = queue.top();
    queue.pop();
    if (done[node]) continue;
    done[node] = 1;
    const auto idx = grid.multi_index(node);
    for (std::size_t k = 0; k < m; ++k) {
      for (long sign : {1L, -1L}) {
        if (!neighbour(idx, forward[k], sign, nb)) continue;
        const std::size_t other = grid.linear(nb);
        if (done[other]) continue;
        const double c = sign > 0 ? edge_cost(node, k, other) : edge_cost(other, k, node);
        if (!std::isfinite(c)) continue;
        const double cand = d + c;
        if (cand < dist[other]) {
          dist[other] = cand;
          queue.push({cand, other});
        }
      }
    }
  }
  df.values.reserve(nodes);
  for (double d : dist) df.values.push_back(ExtReal::from_double(d));
  return df;
}

DistanceField distance_field(const SymbolField& sym, const std::vector<std::size_t>& sources, int stencil_radius,
                             const DualNormOptions& opts) {
  // Edges whose midpoints see identical coefficients (all of them, for a
  // constant symbol) share one dual-norm evaluation.
  std::unordered_map<std::string, ExtReal> memo;
  std::string key;
  EdgeCost cost = [&](const Vec& x, const Vec& v) {
    key.clear();
    auto put = [&](const void* p, std::size_t bytes) { key.append(static_cast<const char*>(p), bytes); };
    put(v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
    for (std::size_t j = 0; j < sym.n(); ++j) {
      const CMat a = sym.a_at(j, x);
      put(a.data(), sizeof(cplx) * static_cast<std::size_t>(a.size()));
    }
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    const ExtReal c = dual_norm(sym, x, v, opts);
    memo.emplace(key, c);
    return c;
  };
  return graph_distance(sym.grid(), sources, stencil_radius, cost);
}

DistanceField approximant_distance_field(const SymbolField& sym, const Vec& omega, int k,
                                         const std::vector<std::size_t>& sources, int stencil_radius) {
  EdgeCost cost = [&](const Vec& x, const Vec& v) {
    const Mat g = approximant_metric(sym, x, omega, k);
    return ExtReal::finite(std::sqrt(std::max(0.0, v.dot(g.ldlt().solve(v)))));
  };
  return graph_distance(sym.grid(), sources, stencil_radius, cost);
}

std::vector<std::size_t> ball(const DistanceField& df, double r) {
  std::vector<std::size_t> out;
  const ExtReal bound = ExtReal::from_double(r);
  for (std::size_t i = 0; i < df.values.size(); ++i)
    if (df.values[i] <= bound) out.push_back(i);
  return out;
}

LipschitzReport lipschitz_lower_bound(const SymbolField& sym, const DistanceField& df, const ScalarField& f,
                                      double tol) {
  if (!(f.grid() == df.grid) || !(sym.grid() == df.grid))
    throw PreconditionError("lipschitz_lower_bound: symbol, distance field and test function need one grid");
  const Grid& grid = df.grid;
  const std::size_t n = grid.ndim();
  std::vector<double> values(f.data().begin(), f.data().end());
  std::vector<std::vector<double>> grad;
  for (std::size_t j = 0; j < n; ++j) grad.push_back(node_derivative(grid, values, j));

  LipschitzReport rep;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    Vec xi(static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j) xi(static_cast<Eigen::Index>(j)) = grad[j][i];
    rep.max_gradient_seminorm = std::max(rep.max_gradient_seminorm, seminorm(sym, grid.node(i), xi));
  }
  if (rep.max_gradient_seminorm > 1.0 + tol) {
    std::ostringstream os;
    os << "lipschitz_lower_bound: test function has symbol gradient norm " << rep.max_gradient_seminorm
       << " > 1 + tol";
    throw PreconditionError(os.str());
  }
  // d(y) is the distance to the nearest source, which dominates the smallest
  // increment of f from any source.
  for (std::size_t y = 0; y < grid.size(); ++y) {
    const ExtReal& d = df.values[y];
    double diff = std::numeric_limits<double>::infinity();
    for (auto x : df.sources) diff = std::min(diff, std::abs(values[y] - values[x]));
    ++rep.nodes_checked;
    if (d.is_infinite()) continue;
    if (d.value() == 0.0) {
      if (diff > tol) rep.within_tolerance = false;
      continue;
    }
    const double ratio = diff / d.value();
    if (ratio > rep.max_ratio) {
      rep.max_ratio = ratio;
      rep.argmax_node = y;
    }
  }
  if (rep.max_ratio > 1.0 + tol) rep.within_tolerance = false;
  return rep;
}

}  // namespace subfinsler
