#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "subfinsler/symbol.hpp"

namespace subfinsler {

// Closed axis-aligned box.
struct Box {
  Vec lower;
  Vec upper;

  bool contains(const Vec& x) const;
  // Box grown by r on every side.
  Box expanded(double r) const;
  // True when `inner` lies inside this box with at least `margin` to spare.
  bool contains_box(const Box& inner, double margin = 0.0) const;
};

Box grid_box(const Grid& grid);

// Flat bump phi(x) = exp(-1 / (1 - |x|^2)) on the open unit ball, sampled at
// scale eps on the grid offsets and divided by the discrete sum, so the
// weights add up to exactly one (up to rounding) at every eps.
struct MollifierKernel {
  double eps = 0.0;
  std::vector<std::vector<long>> offsets;  // node offsets with nonzero weight
  std::vector<double> weights;
  std::vector<long> half_width;            // per axis: largest m with m h < eps
  bool under_resolved = false;             // eps < 2 h on some axis

  double mass() const;
};

// Throws PreconditionError for eps <= 0, and for under-resolved eps when
// `strict` is set.
MollifierKernel make_kernel(const Grid& grid, double eps, bool strict = false);

// Discrete convolution J_eps f(x_i) = sum_o w_o f(x_{i - o}); nodes outside
// the grid contribute zero.
ScalarField mollify(const MollifierKernel& kernel, const ScalarField& f);
VectorField mollify(const MollifierKernel& kernel, const VectorField& f);

// Df = sum_j a_j d_j f + b f at the nodes, with second-order central
// differences (one-sided at the boundary).
VectorField apply_operator(const SymbolField& sym, const VectorField& f);

// [D, J_eps] f = D J_eps f - J_eps D f.
VectorField commutator_apply(const SymbolField& sym, const MollifierKernel& kernel, const VectorField& f);

// Discrete L^p norm over the nodes inside K (p = 1, 2, or infinity).
double lp_norm(const ScalarField& f, const Box& K, double p);
double lp_norm(const VectorField& f, const Box& K, double p);

// Fibre seminorm evaluated on a field value at x.
using FibreSeminorm = std::function<double(const Vec& x, const CVec& value)>;

// P_D on covector fields: (x, v) -> seminorm(sym, x, Re v).
FibreSeminorm covector_seminorm(const SymbolField& sym);

struct UpperBoundRow {
  double eps = 0.0;
  double sup_K = 0.0;      // sup over K of P(J_eps f)
  double esssup_W = 0.0;   // max over W of P(f)
  double gap = 0.0;        // sup_K - esssup_W
};

struct UpperBoundReport {
  std::vector<UpperBoundRow> rows;
  bool slack_nonincreasing = true;  // max(gap, 0) never grows along the sequence
  bool bounded_by_W = true;         // every gap <= tol
};

// Compares sup_K P(J_eps f) with the sup of P(f) over W along eps_sequence.
// Throws PreconditionError unless K + max eps lies in W and W in the grid box.
UpperBoundReport seminorm_upper_bound_check(const FibreSeminorm& P, const VectorField& f,
                                            const std::vector<double>& eps_sequence, const Box& K,
                                            const Box& W, double tol = 1e-9);

}  // namespace subfinsler
