#pragma once

#include <cstddef>
#include <vector>

#include "subfinsler/geometry.hpp"

namespace subfinsler {

enum class Boundary {
  Periodic,  // the grid is one period; no duplicated end node
  Compact,   // values outside the grid are zero
};

// Discretisation of a formally self-adjoint D in split form
//   D_h = 1/2 sum_j (A_j d_j + d_j A_j) + 1/2 (B + B^*),
// with fourth-order central differences. Since every A_j is skew-Hermitian
// and d_j is a real antisymmetric matrix in both boundary modes, D_h is
// Hermitian for the discrete L^2 product and i D_h is skew-Hermitian.
class SkewOperator {
 public:
  SkewOperator() = default;

  const Grid& grid() const { return grid_; }
  Boundary boundary() const { return boundary_; }
  std::size_t fibre() const { return m_; }
  // max over nodes and unit covectors of P_D (sampled on a direction sweep).
  double max_speed() const { return max_speed_; }
  // Largest stable RK4 step for this operator.
  double cfl_limit() const { return cfl_limit_; }

  // out = D_h u on flat node-major data (m values per node).
  void apply(const std::vector<cplx>& u, std::vector<cplx>& out) const;
  // out = i D_h u.
  void apply_generator(const std::vector<cplx>& u, std::vector<cplx>& out) const;

  VectorField apply(const VectorField& u) const;
  VectorField apply_generator(const VectorField& u) const;

  friend SkewOperator discretise_skew(const SymbolField& sym, Boundary boundary, double tol);

 private:
  void derivative(std::size_t axis, const std::vector<cplx>& in, std::vector<cplx>& out) const;

  Grid grid_;
  Boundary boundary_ = Boundary::Periodic;
  std::size_t m_ = 0;
  std::vector<std::vector<cplx>> a_;  // [axis][node * m * m + row * m + col]
  std::vector<bool> a_zero_;
  std::vector<cplx> b_;               // Hermitian part of B, same layout
  bool b_zero_ = true;
  double max_speed_ = 0.0;
  double cfl_limit_ = 0.0;
  mutable std::vector<cplx> tmp1_, tmp2_, tmp3_;
};

// Throws NotSelfAdjointError unless r == s, every a_j is skew-Hermitian and
// b - b^* matches sum_j d_j a_j (second-order differences) within tol
// relative to the coefficient scale; pass doubled(sym) for other symbols.
SkewOperator discretise_skew(const SymbolField& sym, Boundary boundary = Boundary::Periodic, double tol = 1e-6);

// Discrete L^2 energy sum |u|^2 * cell volume.
double energy(const VectorField& u);

struct WaveState {
  double t = 0.0;
  VectorField u;
  double energy = 0.0;
};

struct Trajectory {
  std::vector<WaveState> states;
  double dt = 0.0;          // step actually used
  std::size_t steps = 0;
  double max_relative_drift = 0.0;  // max |E(t) - E(0)| / E(0)
};

struct EvolveOptions {
  std::size_t save_every = 1;   // keep every k-th state (the last is always kept)
  bool reverse = false;         // integrate du/dt = -i D u
  double growth_limit = 0.01;   // relative energy growth that aborts the run
  double support_threshold = 1e-6;  // for the compact-mode margin check
};

// Fraction of cfl_limit() used when no step is given.
inline constexpr double kDefaultCflFraction = 0.1;

// Classical RK4 for du/dt = i D_h u over [0, T] in equal steps of at most dt.
// Throws CflError when dt > cfl_limit(), InstabilityError when the energy
// grows by more than growth_limit, and PreconditionError in compact mode when
// the initial support is closer than max_speed * T to the boundary.
Trajectory evolve(const SkewOperator& op, const VectorField& u0, double T, double dt,
                  const EvolveOptions& opts = {});

struct RadiusSample {
  double t = 0.0;
  ExtReal radius;           // max of df over nodes with |u| > theta * max |u|
  double max_amplitude = 0.0;
};

// Nodes with |u0| > theta * max |u0|.
std::vector<std::size_t> threshold_support(const VectorField& u, double theta);

// Throws PreconditionError when df was not computed from K0 or grids differ.
std::vector<RadiusSample> support_radius(const Trajectory& traj, const std::vector<std::size_t>& K0,
                                         const DistanceField& df, double theta_rel = 1e-6);

// Largest radius(t) - |t| over the series (-inf for an empty series).
double cone_excess(const std::vector<RadiusSample>& series);

struct SecondOrderTrajectory {
  std::vector<double> times;
  std::vector<VectorField> u;
  std::vector<VectorField> u_dot;
  std::vector<double> energy;  // |u_dot|^2 + |D u|^2 through the doubled state
  double dt = 0.0;
  double max_relative_drift = 0.0;
};

// u'' = -D^+ D u with u(0) = f, u'(0) = g. The doubled state
// v = (u', i D u) evolves under i DD_h (DD = doubled(sym)) from
// v0 = (g, i [DD_h (f, 0)]_lower), and u is carried along with du/dt = v_1
// inside the same RK4 stages.
SecondOrderTrajectory wave_second_order(const SymbolField& sym, const VectorField& f, const VectorField& g,
                                        double T, double dt, Boundary boundary = Boundary::Periodic,
                                        std::size_t save_every = 1);

}  // namespace subfinsler
