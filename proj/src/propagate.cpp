#include "subfinsler/propagate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "subfinsler/finite_difference.hpp"

namespace subfinsler {

namespace {

// Largest modified wavenumber (times h) of the fourth-order central
// difference, max over theta of (8 sin theta - sin 2 theta) / 6.
constexpr double kCentral4Wavenumber = 1.3722;
// RK4 is stable on the imaginary axis up to |lambda dt| = 2 sqrt 2.
constexpr double kRk4ImaginaryReach = 2.8;

void mul_block(const std::vector<cplx>& mats, const std::vector<cplx>& u, std::vector<cplx>& out, std::size_t m,
               std::size_t nodes) {
  out.assign(nodes * m, cplx(0.0, 0.0));
  for (std::size_t i = 0; i < nodes; ++i) {
    const cplx* a = &mats[i * m * m];
    const cplx* x = &u[i * m];
    cplx* y = &out[i * m];
    for (std::size_t r = 0; r < m; ++r) {
      cplx acc(0.0, 0.0);
      for (std::size_t c = 0; c < m; ++c) acc += a[r * m + c] * x[c];
      y[r] = acc;
    }
  }
}

void put_block(std::vector<cplx>& dst, std::size_t node, const CMat& mat) {
  const auto m = static_cast<std::size_t>(mat.rows());
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < m; ++c)
      dst[node * m * m + r * m + c] = mat(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

double cell_volume(const Grid& grid) {
  double v = 1.0;
  for (double h : grid.spacing()) v *= h;
  return v;
}

double flat_energy(const std::vector<cplx>& u, double cell) {
  double e = 0.0;
  for (const auto& z : u) e += std::norm(z);
  return e * cell;
}

std::vector<cplx> to_flat(const VectorField& f) { return {f.data().begin(), f.data().end()}; }

VectorField from_flat(const Grid& grid, std::size_t m, const std::vector<cplx>& data) {
  VectorField f(grid, m);
  std::copy(data.begin(), data.end(), f.data().begin());
  return f;
}

std::vector<Vec> unit_sweep(std::size_t n) {
  std::vector<Vec> dirs;
  const auto ni = static_cast<Eigen::Index>(n);
  if (n == 1) {
    dirs.push_back(Vec::Ones(1));
  } else if (n == 2) {
    for (int i = 0; i < 64; ++i) {
      const double th = std::numbers::pi * i / 64.0;
      Vec v(2);
      v << std::cos(th), std::sin(th);
      dirs.push_back(v);
    }
  } else {
    for (Eigen::Index k = 0; k < ni; ++k) dirs.push_back(Vec::Unit(ni, k));
    std::mt19937_64 rng(0);
    std::normal_distribution<double> normal;
    for (int i = 0; i < 64; ++i) {
      Vec v(ni);
      for (Eigen::Index k = 0; k < ni; ++k) v(k) = normal(rng);
      dirs.push_back(v.normalized());
    }
  }
  return dirs;
}

}  // namespace

SkewOperator discretise_skew(const SymbolField& sym, Boundary boundary, double tol) {
  if (sym.r() != sym.s()) {
    throw NotSelfAdjointError("discretise_skew: symbol maps C^" + std::to_string(sym.r()) + " to C^" +
                              std::to_string(sym.s()) + "; pass doubled(sym)");
  }
  const Grid& grid = sym.grid();
  const std::size_t n = sym.n(), m = sym.r(), nodes = grid.size();
  const auto mi = static_cast<Eigen::Index>(m);

  bool constant = sym.b().is_constant();
  for (std::size_t j = 0; j < n; ++j) constant = constant && sym.a(j).is_constant();

  std::vector<std::vector<CMat>> a(n, std::vector<CMat>(nodes));
  std::vector<CMat> b(nodes);
  for (std::size_t i = 0; i < nodes; ++i) {
    const Vec x = grid.node(i);
    for (std::size_t j = 0; j < n; ++j) a[j][i] = sym.a(j)(x);
    b[i] = sym.b()(x);
  }

  // Formal self-adjointness: a_j^* = -a_j and b - b^* = sum_j d_j a_j.
  double scale = 1.0, skew_defect = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < nodes; ++i) {
      scale = std::max(scale, a[j][i].cwiseAbs().maxCoeff());
      skew_defect = std::max(skew_defect, (a[j][i] + a[j][i].adjoint()).cwiseAbs().maxCoeff());
    }
  }
  if (skew_defect > tol * scale) {
    std::ostringstream os;
    os << "discretise_skew: first-order coefficients are not skew-Hermitian (defect " << skew_defect
       << "); pass doubled(sym)";
    throw NotSelfAdjointError(os.str());
  }
  if (!constant) {
    std::vector<CMat> div(nodes, CMat::Zero(mi, mi));
    for (std::size_t j = 0; j < n; ++j) {
      const auto d = node_derivative(grid, a[j], j);
      for (std::size_t i = 0; i < nodes; ++i) div[i] += d[i];
    }
    double defect = 0.0, bscale = scale;
    for (std::size_t i = 0; i < nodes; ++i) {
      bscale = std::max({bscale, b[i].cwiseAbs().maxCoeff(), div[i].cwiseAbs().maxCoeff()});
      defect = std::max(defect, (b[i] - b[i].adjoint() - div[i]).cwiseAbs().maxCoeff());
    }
    if (defect > tol * bscale) {
      std::ostringstream os;
      os << "discretise_skew: b - b^* differs from sum_j d_j a_j by " << defect << "; pass doubled(sym)";
      throw NotSelfAdjointError(os.str());
    }
  } else {
    const double defect = (b[0] - b[0].adjoint()).cwiseAbs().maxCoeff();
    if (defect > tol * std::max(scale, b[0].cwiseAbs().maxCoeff())) {
      throw NotSelfAdjointError("discretise_skew: constant b is not Hermitian; pass doubled(sym)");
    }
  }

  SkewOperator op;
  op.grid_ = grid;
  op.boundary_ = boundary;
  op.m_ = m;
  op.a_.assign(n, std::vector<cplx>(nodes * m * m));
  op.a_zero_.assign(n, true);
  op.b_.assign(nodes * m * m, cplx(0.0, 0.0));
  for (std::size_t i = 0; i < nodes; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      put_block(op.a_[j], i, a[j][i]);
      if (a[j][i].cwiseAbs().maxCoeff() != 0.0) op.a_zero_[j] = false;
    }
    const CMat bh = 0.5 * (b[i] + b[i].adjoint());
    put_block(op.b_, i, bh);
    if (bh.cwiseAbs().maxCoeff() != 0.0) op.b_zero_ = false;
  }

  // Speeds: P over a unit sweep, and the symbol at the grid's corner
  // frequencies (+-1/h_j) which bounds the spectrum of the difference operator.
  const auto dirs = unit_sweep(n);
  double corner = 0.0, bnorm = 0.0;
  const std::size_t probe = constant ? 1 : nodes;
  for (std::size_t i = 0; i < probe; ++i) {
    for (const auto& xi : dirs) {
      CMat s = CMat::Zero(mi, mi);
      for (std::size_t j = 0; j < n; ++j) s += xi(static_cast<Eigen::Index>(j)) * a[j][i];
      op.max_speed_ = std::max(op.max_speed_, op_norm(s));
    }
    for (std::size_t mask = 0; mask < (std::size_t{1} << (n - 1)); ++mask) {
      CMat s = CMat::Zero(mi, mi);
      for (std::size_t j = 0; j < n; ++j) {
        const double sign = (j > 0 && ((mask >> (j - 1)) & 1U)) ? -1.0 : 1.0;
        s += (sign / grid.spacing()[j]) * a[j][i];
      }
      corner = std::max(corner, op_norm(s));
    }
    bnorm = std::max(bnorm, op_norm(0.5 * (b[i] + b[i].adjoint())));
  }
  const double lambda = kCentral4Wavenumber * corner + bnorm;
  op.cfl_limit_ = lambda > 0.0 ? kRk4ImaginaryReach / lambda : std::numeric_limits<double>::infinity();
  return op;
}

void SkewOperator::derivative(std::size_t axis, const std::vector<cplx>& in, std::vector<cplx>& out) const {
  const auto& dims = grid_.dims();
  std::size_t node_stride = 1;
  for (std::size_t k = 0; k < axis; ++k) node_stride *= dims[k];
  const std::size_t len = dims[axis];
  const std::size_t nodes = grid_.size();
  const double c = 1.0 / (12.0 * grid_.spacing()[axis]);
  const bool periodic = boundary_ == Boundary::Periodic;
  out.assign(nodes * m_, cplx(0.0, 0.0));
  const long L = static_cast<long>(len);
  for (std::size_t node = 0; node < nodes; ++node) {
    const long i = static_cast<long>((node / node_stride) % len);
    const std::size_t base = node - static_cast<std::size_t>(i) * node_stride;
    auto at = [&](long k, std::size_t comp) -> cplx {
      long p = i + k;
      if (periodic) {
        p = ((p % L) + L) % L;
      } else if (p < 0 || p >= L) {
        return cplx(0.0, 0.0);
      }
      return in[(base + static_cast<std::size_t>(p) * node_stride) * m_ + comp];
    };
    for (std::size_t comp = 0; comp < m_; ++comp) {
      out[node * m_ + comp] = c * (-at(2, comp) + 8.0 * at(1, comp) - 8.0 * at(-1, comp) + at(-2, comp));
    }
  }
}

void SkewOperator::apply(const std::vector<cplx>& u, std::vector<cplx>& out) const {
  const std::size_t nodes = grid_.size();
  if (u.size() != nodes * m_) throw PreconditionError("SkewOperator::apply: state has the wrong size");
  out.assign(nodes * m_, cplx(0.0, 0.0));
  for (std::size_t j = 0; j < a_.size(); ++j) {
    if (a_zero_[j]) continue;
    mul_block(a_[j], u, tmp1_, m_, nodes);  // A u
    derivative(j, u, tmp2_);                // d u
    derivative(j, tmp1_, tmp3_);            // d (A u)
    mul_block(a_[j], tmp2_, tmp1_, m_, nodes);  // A d u
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += 0.5 * (tmp1_[k] + tmp3_[k]);
  }
  if (!b_zero_) {
    mul_block(b_, u, tmp1_, m_, nodes);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += tmp1_[k];
  }
}

void SkewOperator::apply_generator(const std::vector<cplx>& u, std::vector<cplx>& out) const {
  apply(u, out);
  for (auto& z : out) z = cplx(-z.imag(), z.real());
}

VectorField SkewOperator::apply(const VectorField& u) const {
  std::vector<cplx> out;
  apply(to_flat(u), out);
  return from_flat(grid_, m_, out);
}

VectorField SkewOperator::apply_generator(const VectorField& u) const {
  std::vector<cplx> out;
  apply_generator(to_flat(u), out);
  return from_flat(grid_, m_, out);
}

double energy(const VectorField& u) {
  return flat_energy(to_flat(u), cell_volume(u.grid()));
}

std::vector<std::size_t> threshold_support(const VectorField& u, double theta) {
  double peak = 0.0;
  for (std::size_t i = 0; i < u.grid().size(); ++i) peak = std::max(peak, u.at(i).norm());
  std::vector<std::size_t> out;
  if (peak == 0.0) return out;
  for (std::size_t i = 0; i < u.grid().size(); ++i)
    if (u.at(i).norm() > theta * peak) out.push_back(i);
  return out;
}

namespace {

void check_step(const SkewOperator& op, double dt) {
  if (!(dt > 0.0)) throw PreconditionError("evolve: dt must be positive");
  if (dt > op.cfl_limit() * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "evolve: dt = " << dt << " exceeds the CFL bound " << op.cfl_limit()
       << " (c h / maxspeed with maxspeed = " << op.max_speed() << ")";
    throw CflError(os.str(), op.cfl_limit());
  }
}

void check_compact_margin(const SkewOperator& op, const VectorField& u0, double T, double theta) {
  if (op.boundary() != Boundary::Compact) return;
  const Grid& grid = op.grid();
  const Vec lo = grid.lower(), hi = grid.upper();
  const double reach = op.max_speed() * T;
  for (auto node : threshold_support(u0, theta)) {
    const Vec x = grid.node(node);
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      if (x(k) - lo(k) < reach || hi(k) - x(k) < reach) {
        std::ostringstream os;
        os << "evolve: compact mode needs the initial support at least max_speed * T = " << reach
           << " from the boundary";
        throw PreconditionError(os.str());
      }
    }
  }
}

}  // namespace

Trajectory evolve(const SkewOperator& op, const VectorField& u0, double T, double dt, const EvolveOptions& opts) {
  if (!(u0.grid() == op.grid()) || u0.rows() != op.fibre())
    throw PreconditionError("evolve: initial state does not match the operator's grid and fibre");
  if (!(T >= 0.0)) throw PreconditionError("evolve: T must be nonnegative");
  check_step(op, dt);
  check_compact_margin(op, u0, T, opts.support_threshold);
  const std::size_t steps = T == 0.0 ? 0 : static_cast<std::size_t>(std::ceil(T / dt - 1e-12));
  const double h = steps ? T / static_cast<double>(steps) : 0.0;
  const double cell = cell_volume(op.grid());
  const std::size_t every = std::max<std::size_t>(1, opts.save_every);

  Trajectory traj;
  traj.dt = h;
  traj.steps = steps;
  std::vector<cplx> u = to_flat(u0);
  const double e0 = flat_energy(u, cell);
  traj.states.push_back({0.0, u0, e0});

  std::vector<cplx> k1, k2, k3, k4, w(u.size());
  auto rhs = [&](const std::vector<cplx>& x, std::vector<cplx>& out) {
    op.apply_generator(x, out);
    if (opts.reverse)
      for (auto& z : out) z = -z;
  };
  for (std::size_t s = 0; s < steps; ++s) {
    rhs(u, k1);
    for (std::size_t q = 0; q < u.size(); ++q) w[q] = u[q] + 0.5 * h * k1[q];
    rhs(w, k2);
    for (std::size_t q = 0; q < u.size(); ++q) w[q] = u[q] + 0.5 * h * k2[q];
    rhs(w, k3);
    for (std::size_t q = 0; q < u.size(); ++q) w[q] = u[q] + h * k3[q];
    rhs(w, k4);
    for (std::size_t q = 0; q < u.size(); ++q) u[q] += h / 6.0 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q]);

    const double e = flat_energy(u, cell);
    const double t = s + 1 == steps ? T : h * static_cast<double>(s + 1);
    if (e0 > 0.0) {
      traj.max_relative_drift = std::max(traj.max_relative_drift, std::abs(e - e0) / e0);
      if (e > e0 * (1.0 + opts.growth_limit) || !std::isfinite(e)) {
        std::ostringstream os;
        os << "evolve: energy grew by a factor " << e / e0 << " at t = " << t;
        throw InstabilityError(os.str());
      }
    }
    if ((s + 1) % every == 0 || s + 1 == steps) traj.states.push_back({t, from_flat(op.grid(), op.fibre(), u), e});
  }
  return traj;
}

std::vector<RadiusSample> support_radius(const Trajectory& traj, const std::vector<std::size_t>& K0,
                                         const DistanceField& df, double theta_rel) {
  std::vector<std::size_t> k0 = K0;
  std::sort(k0.begin(), k0.end());
  k0.erase(std::unique(k0.begin(), k0.end()), k0.end());
  if (k0 != df.sources) throw PreconditionError("support_radius: distance field was not computed from K0");
  std::vector<RadiusSample> out;
  for (const auto& st : traj.states) {
    if (!(st.u.grid() == df.grid)) throw PreconditionError("support_radius: trajectory and distance field grids differ");
    RadiusSample r;
    r.t = st.t;
    r.radius = ExtReal::finite(0.0);
    for (std::size_t i = 0; i < st.u.grid().size(); ++i) r.max_amplitude = std::max(r.max_amplitude, st.u.at(i).norm());
    for (auto node : threshold_support(st.u, theta_rel)) r.radius = std::max(r.radius, df.values[node]);
    out.push_back(r);
  }
  return out;
}

double cone_excess(const std::vector<RadiusSample>& series) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& s : series) {
    if (s.radius.is_infinite()) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, s.radius.value() - std::abs(s.t));
  }
  return worst;
}

SecondOrderTrajectory wave_second_order(const SymbolField& sym, const VectorField& f, const VectorField& g,
                                        double T, double dt, Boundary boundary, std::size_t save_every) {
  if (f.rows() != sym.r() || g.rows() != sym.r() || !(f.grid() == sym.grid()) || !(g.grid() == sym.grid()))
    throw PreconditionError("wave_second_order: initial data must be C^r-valued on the symbol's grid");
  if (!(T >= 0.0)) throw PreconditionError("wave_second_order: T must be nonnegative");
  const SkewOperator op = discretise_skew(doubled(sym), boundary);
  check_step(op, dt);
  const std::size_t r = sym.r(), m = op.fibre(), nodes = sym.grid().size();
  const double cell = cell_volume(sym.grid());

  std::vector<cplx> u = to_flat(f);
  std::vector<cplx> v(nodes * m, cplx(0.0, 0.0));
  {
    std::vector<cplx> lifted(nodes * m, cplx(0.0, 0.0)), dd;
    for (std::size_t i = 0; i < nodes; ++i)
      for (std::size_t c = 0; c < r; ++c) lifted[i * m + c] = u[i * r + c];
    op.apply(lifted, dd);
    for (std::size_t i = 0; i < nodes; ++i) {
      for (std::size_t c = 0; c < r; ++c) v[i * m + c] = g.data()[i * r + c];
      for (std::size_t c = r; c < m; ++c) v[i * m + c] = cplx(0.0, 1.0) * dd[i * m + c];
    }
  }
  auto upper = [&](const std::vector<cplx>& vv) {
    std::vector<cplx> out(nodes * r);
    for (std::size_t i = 0; i < nodes; ++i)
      for (std::size_t c = 0; c < r; ++c) out[i * r + c] = vv[i * m + c];
    return out;
  };

  SecondOrderTrajectory out;
  const std::size_t steps = T == 0.0 ? 0 : static_cast<std::size_t>(std::ceil(T / dt - 1e-12));
  const double h = steps ? T / static_cast<double>(steps) : 0.0;
  out.dt = h;
  const double e0 = flat_energy(v, cell);
  auto record = [&](double t, double e) {
    out.times.push_back(t);
    out.u.push_back(from_flat(sym.grid(), r, u));
    out.u_dot.push_back(from_flat(sym.grid(), r, upper(v)));
    out.energy.push_back(e);
  };
  record(0.0, e0);
  const std::size_t every = std::max<std::size_t>(1, save_every);

  std::vector<cplx> kv1, kv2, kv3, kv4, wv(v.size());
  std::vector<cplx> ku1, ku2, ku3, ku4;
  for (std::size_t s = 0; s < steps; ++s) {
    op.apply_generator(v, kv1);
    ku1 = upper(v);
    for (std::size_t q = 0; q < v.size(); ++q) wv[q] = v[q] + 0.5 * h * kv1[q];
    op.apply_generator(wv, kv2);
    ku2 = upper(wv);
    for (std::size_t q = 0; q < v.size(); ++q) wv[q] = v[q] + 0.5 * h * kv2[q];
    op.apply_generator(wv, kv3);
    ku3 = upper(wv);
    for (std::size_t q = 0; q < v.size(); ++q) wv[q] = v[q] + h * kv3[q];
    op.apply_generator(wv, kv4);
    ku4 = upper(wv);
    for (std::size_t q = 0; q < v.size(); ++q) v[q] += h / 6.0 * (kv1[q] + 2.0 * kv2[q] + 2.0 * kv3[q] + kv4[q]);
    for (std::size_t q = 0; q < u.size(); ++q) u[q] += h / 6.0 * (ku1[q] + 2.0 * ku2[q] + 2.0 * ku3[q] + ku4[q]);
    const double e = flat_energy(v, cell);
    if (e0 > 0.0) {
      out.max_relative_drift = std::max(out.max_relative_drift, std::abs(e - e0) / e0);
      if (e > 1.01 * e0 || !std::isfinite(e)) throw InstabilityError("wave_second_order: energy growth detected");
    }
    const double t = s + 1 == steps ? T : h * static_cast<double>(s + 1);
    if ((s + 1) % every == 0 || s + 1 == steps) record(t, e);
  }
  return out;
}

}  // namespace subfinsler
