#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "subfinsler/symbol.hpp"

namespace subfinsler {

// Polyline through points[i] at times[i].
struct Curve {
  std::vector<double> times;
  std::vector<Vec> points;

  std::size_t segments() const { return times.empty() ? 0 : times.size() - 1; }
  Vec velocity(std::size_t segment) const;
  Vec midpoint(std::size_t segment) const;
  // Linear interpolation in time, clamped to [times.front(), times.back()].
  Vec at(double t) const;
};

// Throws PreconditionError unless times increase strictly, there are at least
// two samples and all points share one dimension; DomainError for points
// outside the grid.
void validate_curve(const Curve& curve, const Grid& grid);

// Integral of P*(gamma') by the midpoint rule on every segment.
ExtReal curve_length(const SymbolField& sym, const Curve& curve, const DualNormOptions& opts = {});

// Every segment's midpoint dual norm of its velocity is at most 1 + tol.
bool is_subunit(const SymbolField& sym, const Curve& curve, double tol,
                const DualNormOptions& opts = {});

// Same points, new times t_i = length of the first i segments. Segments of zero
// length are dropped.
Curve arclength_reparam(const SymbolField& sym, const Curve& curve, const DualNormOptions& opts = {});

// ------------------------------------------------------- distance fields

// Stencil offsets o with max |o_k| <= radius and gcd(o) = 1 (radius 1 in 2-D
// gives the 8 neighbours, radius 2 adds the 8 knight moves).
std::vector<std::vector<long>> stencil_offsets(std::size_t ndim, int radius);

struct DistanceField {
  Grid grid;
  std::vector<std::size_t> sources;
  std::vector<ExtReal> values;
  int stencil_radius = 0;

  const ExtReal& at(std::size_t node) const { return values.at(node); }
  // +inf for unreachable nodes.
  ScalarField to_field() const;
  std::size_t infinite_count() const;
  // Largest finite value (0 if none).
  double max_finite() const;
};

// Edge cost for the displacement v between two nodes whose midpoint is x.
using EdgeCost = std::function<ExtReal(const Vec& x, const Vec& v)>;

// Dijkstra on the stencil graph; infinite edges are dropped.
DistanceField graph_distance(const Grid& grid, const std::vector<std::size_t>& sources, int stencil_radius,
                             const EdgeCost& cost);

// Control distance from `sources` with edge cost P* at the edge midpoint.
DistanceField distance_field(const SymbolField& sym, const std::vector<std::size_t>& sources,
                             int stencil_radius = 2, const DualNormOptions& opts = {});

// Same graph with the dual metric of one Riemannian approximant, so that every
// edge is no more expensive than under P*.
DistanceField approximant_distance_field(const SymbolField& sym, const Vec& omega, int k,
                                         const std::vector<std::size_t>& sources, int stencil_radius = 2);

// Nodes with d <= r, in increasing node order.
std::vector<std::size_t> ball(const DistanceField& df, double r);

struct LipschitzReport {
  double max_gradient_seminorm = 0.0;  // max over nodes of P(grad f)
  double max_ratio = 0.0;              // max over y of min_x |f(y) - f(x)| / d(y)
  std::size_t argmax_node = 0;
  std::size_t nodes_checked = 0;
  bool within_tolerance = true;        // max_ratio <= 1 + tol
};

// Certifies d(y) >= |f(y) - f(x)| for P-subunit-gradient f. Throws
// PreconditionError when the symbol gradient norm of f exceeds 1 + tol.
LipschitzReport lipschitz_lower_bound(const SymbolField& sym, const DistanceField& df,
                                      const ScalarField& f, double tol);

}  // namespace subfinsler
