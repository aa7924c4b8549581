#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "subfinsler/gallery.hpp"
#include "subfinsler/geometry.hpp"

namespace subfinsler {

struct VectorFieldSet {
  std::vector<VectorFn> fields;
  // Largest finite-difference Jacobian norm over the grid nodes.
  double lipschitz = 0.0;
  // dual_norm(X_k(node)) <= 1 + tol at every node.
  std::vector<bool> subunit;

  bool all_subunit() const;
};

// Measures L and the subunit flags on the nodes of sym's grid. Jacobians use
// central differences at the grid spacing (one-sided on the boundary).
VectorFieldSet make_field_set(const SymbolField& sym, std::vector<VectorFn> fields, double tol = 1e-9);

// Classical RK4 from x0 over [0, T] in equal steps of at most `step`.
// Throws BoxExitError when a stage leaves `box`.
Curve flow(const VectorFn& X, const Vec& x0, double T, double step, const Grid& box);

struct PiecewiseFlowCurve {
  std::vector<double> breakpoints;   // piece k covers [breakpoints[k], breakpoints[k+1]]
  std::vector<std::size_t> active;   // field index of piece k
  Curve curve;                       // integrator samples
  std::vector<std::size_t> sample_field;  // field driving the step ending at each sample
};

// Columns t, x_1..x_n, field.
void write_flow_csv(const PiecewiseFlowCurve& curve, const std::filesystem::path& path);

struct FlowApproxOptions {
  double step = 1e-3;          // largest integrator step
  int kappa_directions = 72;   // direction sweep for the Euclidean/P* constant
  double integrator_tol = 1e-6;
  DualNormOptions dual = {};
};

struct FlowApproximation {
  PiecewiseFlowCurve delta;
  double bound = 0.0;
  double endpoint_error = 0.0;  // |delta(T) - gamma(T)|
  double kappa = 0.0;
  double lipschitz = 0.0;
  bool within_bound = false;    // endpoint_error <= bound + integrator_tol
  // [block][field] time spent on each field before and after rearranging.
  std::vector<std::vector<double>> occupancy_before;
  std::vector<std::vector<double>> occupancy_after;
};

// Flow-concatenation approximation of the subunit curve gamma started at x.
// On every block of length d = T/N the field chosen to match gamma' (first
// eps-close field nu0, then first field eps-close to it at the block anchor,
// nu1) is rearranged into increasing index order (nu2) and integrated.
// The returned bound is
//   e^{LT} |x - gamma(0)| + 2 (kappa T/N + eps/L) (e^{LT} - 1),
// read as its limit e^{0}|x - gamma(0)| + 2 eps T when L = 0.
// Throws NoMatchingFieldError when no field is eps-close to gamma'.
FlowApproximation approx_by_flows(const SymbolField& sym, const Curve& gamma, const VectorFieldSet& set,
                                  std::size_t N, double eps, const Vec& x, const FlowApproxOptions& opts = {});

// Largest |v| / P*(v) over finite-dual directions of a sweep at the given
// nodes (2-D: `directions` angles; other n: axes, diagonals and a seeded
// random set of that size).
double measure_kappa(const SymbolField& sym, const std::vector<std::size_t>& nodes, int directions,
                     const DualNormOptions& opts = {});

// Central-difference Jacobian of X at x with spacing h.
Mat jacobian(const VectorFn& X, const Vec& x, double h);

// [X, Y] = (DY) X - (DX) Y at x with central differences at spacing h.
// Throws DomainError unless x is at least 2h inside `domain`.
Vec lie_bracket(const VectorFn& X, const VectorFn& Y, const Vec& x, double h, const Grid& domain);

// The bracket as a field (no domain check).
VectorFn bracket_field(VectorFn X, VectorFn Y, double h);

// Numerical rank of all right-nested brackets of length <= depth at x;
// singular values below tol_rank * (largest) count as zero.
int hoermander_rank(const std::vector<VectorFn>& fields, const Vec& x, int depth, double h, double tol_rank,
                    const Grid& domain);

}  // namespace subfinsler
