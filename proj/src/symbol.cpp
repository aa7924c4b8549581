#include "subfinsler/symbol.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "subfinsler/finite_difference.hpp"

namespace subfinsler {

// ------------------------------------------------------------ Coefficient

Coefficient Coefficient::constant(CMat value) {
  Coefficient c;
  c.rows_ = static_cast<std::size_t>(value.rows());
  c.cols_ = static_cast<std::size_t>(value.cols());
  c.constant_ = true;
  c.fn_ = [value = std::move(value)](const Vec&) { return value; };
  return c;
}

Coefficient Coefficient::analytic(std::size_t rows, std::size_t cols, Fn fn) {
  Coefficient c;
  c.rows_ = rows;
  c.cols_ = cols;
  c.fn_ = std::move(fn);
  return c;
}

Coefficient Coefficient::gridded(MatrixField field) {
  Coefficient c;
  c.rows_ = field.rows();
  c.cols_ = field.cols();
  c.field_ = std::make_shared<const MatrixField>(std::move(field));
  return c;
}

CMat Coefficient::operator()(const Vec& x) const {
  if (field_) return field_->sample(x);
  if (!fn_) throw PreconditionError("Coefficient: empty coefficient evaluated");
  return fn_(x);
}

Coefficient Coefficient::negated_adjoint() const {
  if (field_) {
    MatrixField out(field_->grid(), cols_, rows_);
    for (std::size_t i = 0; i < out.grid().size(); ++i) out.set(i, -field_->at(i).adjoint());
    return gridded(std::move(out));
  }
  if (constant_) return constant(-fn_(Vec()).adjoint());
  return analytic(cols_, rows_, [fn = fn_](const Vec& x) -> CMat { return -fn(x).adjoint(); });
}

// ------------------------------------------------------------ SymbolField

SymbolField::SymbolField(Grid grid, std::size_t r, std::size_t s, std::vector<Coefficient> a,
                         Coefficient b, std::string name)
    : grid_(std::move(grid)), r_(r), s_(s), a_(std::move(a)), b_(std::move(b)),
      name_(std::move(name)) {
  if (r_ == 0 || s_ == 0) throw PreconditionError("SymbolField: fibre dimensions must be positive");
  if (a_.size() != grid_.ndim())
    throw PreconditionError("SymbolField: need one first-order coefficient per axis");
  auto check = [&](const Coefficient& c, const char* what) {
    if (c.rows() != s_ || c.cols() != r_) {
      std::ostringstream os;
      os << "SymbolField: " << what << " has shape " << c.rows() << "x" << c.cols()
         << ", expected " << s_ << "x" << r_;
      throw PreconditionError(os.str());
    }
  };
  for (const auto& c : a_) check(c, "first-order coefficient");
  check(b_, "zeroth-order coefficient");
}

CMat SymbolField::a_at(std::size_t j, const Vec& x) const {
  grid_.require_contains(x, "SymbolField::a_at");
  return a_.at(j)(x);
}

CMat SymbolField::b_at(const Vec& x) const {
  grid_.require_contains(x, "SymbolField::b_at");
  return b_(x);
}

CMat SymbolField::principal(const Vec& x, const Vec& xi) const {
  grid_.require_contains(x, "SymbolField::principal");
  CMat out = CMat::Zero(static_cast<Eigen::Index>(s_), static_cast<Eigen::Index>(r_));
  for (std::size_t j = 0; j < n(); ++j) {
    if (xi[static_cast<Eigen::Index>(j)] != 0.0) out += xi[static_cast<Eigen::Index>(j)] * a_[j](x);
  }
  return out;
}

Mat SymbolField::stacked(const Vec& x) const {
  grid_.require_contains(x, "SymbolField::stacked");
  const auto entries = static_cast<Eigen::Index>(r_ * s_);
  Mat out(2 * entries, static_cast<Eigen::Index>(n()));
  for (std::size_t j = 0; j < n(); ++j) {
    const CMat aj = a_[j](x);
    Eigen::Index e = 0;
    for (Eigen::Index row = 0; row < aj.rows(); ++row) {
      for (Eigen::Index col = 0; col < aj.cols(); ++col, ++e) {
        out(e, static_cast<Eigen::Index>(j)) = aj(row, col).real();
        out(entries + e, static_cast<Eigen::Index>(j)) = aj(row, col).imag();
      }
    }
  }
  return out;
}

// --------------------------------------------------------------- seminorm

double op_norm(const CMat& m) {
  if (m.size() == 0) return 0.0;
  if (m.rows() == 1 || m.cols() == 1) return m.norm();
  if (m.rows() == 2 && m.cols() == 2) {
    // Largest eigenvalue of the Hermitian 2x2 matrix M^* M, written without
    // cancellation under the square root.
    const double p = std::norm(m(0, 0)) + std::norm(m(1, 0));
    const double r = std::norm(m(0, 1)) + std::norm(m(1, 1));
    const cplx q = std::conj(m(0, 0)) * m(0, 1) + std::conj(m(1, 0)) * m(1, 1);
    const double half_gap = 0.5 * (p - r);
    const double lambda = 0.5 * (p + r) + std::sqrt(half_gap * half_gap + std::norm(q));
    return std::sqrt(lambda);
  }
  Eigen::JacobiSVD<CMat> svd(m);
  return svd.singularValues()(0);
}

double seminorm(const SymbolField& sym, const Vec& x, const Vec& xi) {
  if (static_cast<std::size_t>(xi.size()) != sym.n())
    throw PreconditionError("seminorm: covector length differs from the space dimension");
  return op_norm(sym.principal(x, xi));
}

// ------------------------------------------------------- kernel & duality

namespace {

struct StackedSvd {
  Vec singular;  // length min(rows, n), descending
  Mat v;         // n x n
  std::size_t rank = 0;
  double threshold = 0.0;
};

StackedSvd stacked_svd(const SymbolField& sym, const Vec& x, double rel_tol) {
  const Mat s = sym.stacked(x);
  Eigen::JacobiSVD<Mat> svd(s, Eigen::ComputeFullV);
  StackedSvd out;
  out.singular = svd.singularValues();
  out.v = svd.matrixV();
  const double smax = out.singular.size() ? out.singular(0) : 0.0;
  out.threshold = rel_tol * smax;
  if (smax > 0.0) {
    for (Eigen::Index k = 0; k < out.singular.size(); ++k) {
      if (out.singular(k) > out.threshold) ++out.rank;
    }
  }
  return out;
}

// Evaluates P restricted to span(basis) for a fixed point x.
class RestrictedSeminorm {
 public:
  RestrictedSeminorm(const SymbolField& sym, const Vec& x, const Mat& basis) {
    const std::size_t n = sym.n();
    for (Eigen::Index c = 0; c < basis.cols(); ++c) {
      CMat acc = CMat::Zero(static_cast<Eigen::Index>(sym.s()), static_cast<Eigen::Index>(sym.r()));
      for (std::size_t j = 0; j < n; ++j) {
        const double w = basis(static_cast<Eigen::Index>(j), c);
        if (w != 0.0) acc += w * sym.a_at(j, x);
      }
      blocks_.push_back(std::move(acc));
    }
  }

  double operator()(const Vec& zeta) const {
    CMat m = zeta(0) * blocks_[0];
    for (std::size_t c = 1; c < blocks_.size(); ++c) {
      const double w = zeta(static_cast<Eigen::Index>(c));
      if (w != 0.0) m += w * blocks_[c];
    }
    return op_norm(m);
  }

 private:
  std::vector<CMat> blocks_;
};

// Golden-section search for the maximum of a unimodal function on [lo, hi].
template <class F>
void golden_maximise(F&& f, double lo, double hi, int iterations) {
  constexpr double invphi = 0.6180339887498948482;
  double a = lo, b = hi;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < iterations && b - a > 1e-16; ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
}

// Minimises the convex function g(t) = phi(w + t * dir); returns the best t.
template <class F>
double line_minimise(F&& g, double g0, double step) {
  double fp = g(step), fm = g(-step);
  double lo, hi;
  if (fp >= g0 && fm >= g0) {
    lo = -step;
    hi = step;
  } else {
    const double sign = fp < fm ? 1.0 : -1.0;
    double prev = 0.0, cur = step, fcur = std::min(fp, fm);
    double fprev = g0;
    for (int it = 0; it < 60; ++it) {
      const double next = 2.0 * cur;
      const double fnext = g(sign * next);
      if (fnext >= fcur) {
        lo = sign > 0 ? prev : -next;
        hi = sign > 0 ? next : -prev;
        goto bracketed;
      }
      prev = cur;
      fprev = fcur;
      cur = next;
      fcur = fnext;
    }
    (void)fprev;
    return sign * cur;
  }
bracketed:
  constexpr double invphi = 0.6180339887498948482;
  double a = lo, b = hi;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = g(c), fd = g(d);
  for (int it = 0; it < 120 && b - a > 1e-15 * (1.0 + std::abs(a) + std::abs(b)); ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = g(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = g(d);
    }
  }
  const double t = fc <= fd ? c : d;
  return std::min(fc, fd) <= g0 ? t : 0.0;
}

constexpr double kCandidateSlack = 64.0 * std::numeric_limits<double>::epsilon();

ExtReal dual_norm_plane(const RestrictedSeminorm& p, const Vec& vf,
                        const std::vector<Vec>& candidates, int sweep) {
  const double vnorm = vf.norm();
  const Vec e = vf / vnorm;
  Vec eperp(2);
  eperp << -e(1), e(0);
  double best = 0.0;
  bool unbounded = false;
  auto ratio = [&](const Vec& eta) {
    const double num = std::abs(eta.dot(vf));
    const double den = p(eta);
    if (den == 0.0) {
      if (num > 0.0) unbounded = true;
      return 0.0;
    }
    const double r = num / den;
    best = std::max(best, r);
    return r;
  };
  for (const auto& c : candidates) ratio(c);
  const double candidate_best = best;
  const double pi = std::numbers::pi;
  double best_theta = 0.0, best_sweep = -1.0;
  for (int i = 0; i < sweep; ++i) {
    const double theta = -0.5 * pi + pi * static_cast<double>(i) / sweep;
    const double r = ratio(std::cos(theta) * e + std::sin(theta) * eperp);
    if (r > best_sweep) {
      best_sweep = r;
      best_theta = theta;
    }
  }
  if (unbounded) return ExtReal::infinity();
  // The ratio is unimodal in theta on the half circle: the maximiser lies
  // within one sweep step of the best sample.
  const double step = pi / sweep;
  golden_maximise([&](double theta) { return ratio(std::cos(theta) * e + std::sin(theta) * eperp); },
                  best_theta - step, best_theta + step, 200);
  if (unbounded) return ExtReal::infinity();
  // Gains within rounding of an exact candidate are noise from cos/sin.
  if (best <= candidate_best * (1.0 + kCandidateSlack)) return ExtReal::finite(candidate_best);
  return ExtReal::finite(best);
}

ExtReal dual_norm_multistart(const RestrictedSeminorm& p, const Vec& vf,
                             const std::vector<Vec>& candidates, const DualNormOptions& opts) {
  const Eigen::Index k = vf.size();
  const double vnorm = vf.norm();
  const Vec e = vf / vnorm;
  // Orthonormal basis W of e^perp: P*(v) = |v| / min_w P(e + W w), a convex
  // problem in w.
  Mat full = Mat::Identity(k, k);
  full.col(0) = e;
  Eigen::HouseholderQR<Mat> qr(full);
  const Mat q = qr.householderQ();
  const Mat w_basis = q.rightCols(k - 1);
  auto phi = [&](const Vec& w) { return p(e + w_basis * w); };

  std::vector<Vec> starts;
  starts.push_back(Vec::Zero(k - 1));
  for (const auto& c : candidates) {
    const double along = c.dot(e);
    if (along > 1e-12) starts.push_back(w_basis.transpose() * (c / along));
  }
  std::mt19937_64 rng(0);
  std::normal_distribution<double> normal;
  for (int i = 0; i < opts.multistart; ++i) {
    Vec w(k - 1);
    for (Eigen::Index j = 0; j < w.size(); ++j) w(j) = normal(rng);
    starts.push_back(w);
  }

  double candidate_min = std::numeric_limits<double>::infinity();
  for (const auto& c : candidates) {
    const double along = c.dot(e);
    if (along > 1e-12) candidate_min = std::min(candidate_min, p(c / along));
  }
  double best = std::numeric_limits<double>::infinity();
  bool converged_any = false;
  for (const auto& start : starts) {
    Vec w = start;
    double fw = phi(w);
    double step = 0.5;
    bool converged = false;
    for (int it = 0; it < opts.max_iterations; ++it) {
      const double before = fw;
      std::vector<Vec> dirs;
      for (Eigen::Index j = 0; j < w.size(); ++j) dirs.push_back(Vec::Unit(w.size(), j));
      for (int r = 0; r < 2 * static_cast<int>(w.size()); ++r) {
        Vec d(w.size());
        for (Eigen::Index j = 0; j < d.size(); ++j) d(j) = normal(rng);
        dirs.push_back(d.normalized());
      }
      for (const auto& d : dirs) {
        auto g = [&](double t) { return phi(w + t * d); };
        const double t = line_minimise(g, fw, step);
        if (t != 0.0) {
          const double ft = g(t);
          if (ft < fw) {
            w += t * d;
            fw = ft;
          }
        }
      }
      step = std::max(1e-6, std::min(1.0, 0.5 * step + 1e-3));
      if (before - fw <= 1e-14 * fw) {
        converged = true;
        break;
      }
    }
    converged_any = converged_any || converged;
    best = std::min(best, fw);
  }
  if (best == 0.0) return ExtReal::infinity();
  if (best >= candidate_min * (1.0 - kCandidateSlack)) best = std::min(best, candidate_min);
  if (!converged_any) {
    throw NonConvergenceError("dual_norm: multi-start refinement did not converge", vnorm / best);
  }
  return ExtReal::finite(vnorm / best);
}

}  // namespace

KernelDecomposition kernel_decomposition(const SymbolField& sym, const Vec& x, double rel_tol) {
  const StackedSvd svd = stacked_svd(sym, x, rel_tol);
  KernelDecomposition out;
  out.x = x;
  out.singular_values = svd.singular;
  out.tol_zero = svd.threshold;
  const auto n = static_cast<Eigen::Index>(sym.n());
  const auto rank = static_cast<Eigen::Index>(svd.rank);
  out.f_basis = svd.v.leftCols(rank);
  out.z_basis = svd.v.rightCols(n - rank);
  return out;
}

ExtReal dual_norm(const SymbolField& sym, const Vec& x, const Vec& v, const DualNormOptions& opts) {
  const std::size_t n = sym.n();
  if (static_cast<std::size_t>(v.size()) != n)
    throw PreconditionError("dual_norm: vector length differs from the space dimension");
  sym.grid().require_contains(x, "dual_norm");
  const double vnorm = v.norm();
  if (vnorm == 0.0) return ExtReal::finite(0.0);

  const StackedSvd svd = stacked_svd(sym, x, opts.kernel_rel_tol);
  const auto rank = static_cast<Eigen::Index>(svd.rank);
  if (rank == 0) return ExtReal::infinity();
  const Mat f_basis = svd.v.leftCols(rank);
  const Vec coords = f_basis.transpose() * v;
  if ((v - f_basis * coords).norm() > opts.tol * vnorm) return ExtReal::infinity();

  if (sym.hilbertian()) {
    // P(xi) = |S xi| with S = U Sigma V^T, so P*(v) = |Sigma^-1 V^T v|.
    double acc = 0.0;
    for (Eigen::Index k = 0; k < rank; ++k) {
      const double c = coords(k) / svd.singular(k);
      acc += c * c;
    }
    return ExtReal::finite(std::sqrt(acc));
  }

  // Work in ambient coordinates when there is no kernel, so that exact
  // candidates (axes, sign patterns) are evaluated without rounding.
  const bool ambient = rank == static_cast<Eigen::Index>(n);
  const Mat basis = ambient ? Mat::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) : f_basis;
  const Vec vf = ambient ? v : coords;
  const RestrictedSeminorm p(sym, x, basis);

  if (vf.size() == 1) {
    const double den = p(Vec::Ones(1));
    if (den == 0.0) return ExtReal::infinity();
    return ExtReal::finite(std::abs(vf(0)) / den);
  }

  std::vector<Vec> candidates;
  candidates.push_back(vf);
  if (ambient) {
    Vec sign(vf.size());
    for (Eigen::Index j = 0; j < vf.size(); ++j) {
      sign(j) = vf(j) > 0 ? 1.0 : (vf(j) < 0 ? -1.0 : 0.0);
      candidates.push_back(Vec::Unit(vf.size(), j));
    }
    candidates.push_back(sign);
  }
  if (vf.size() == 2) return dual_norm_plane(p, vf, candidates, opts.sweep_directions);
  return dual_norm_multistart(p, vf, candidates, opts);
}

// ---------------------------------------------------- adjoint & doubling

SymbolField formal_adjoint(const SymbolField& sym) {
  const Grid& grid = sym.grid();
  for (auto d : grid.dims()) {
    if (d < 3) throw PreconditionError("formal_adjoint: grid too coarse to difference (need >= 3 nodes per axis)");
  }
  const std::size_t nodes = grid.size();
  std::vector<CMat> divergence(nodes, CMat::Zero(static_cast<Eigen::Index>(sym.r()), static_cast<Eigen::Index>(sym.s())));
  for (std::size_t j = 0; j < sym.n(); ++j) {
    std::vector<CMat> vals(nodes);
    for (std::size_t i = 0; i < nodes; ++i) vals[i] = sym.a(j)(grid.node(i)).adjoint();
    const auto deriv = node_derivative(grid, vals, j);
    for (std::size_t i = 0; i < nodes; ++i) divergence[i] += deriv[i];
  }
  MatrixField b_plus(grid, sym.r(), sym.s());
  for (std::size_t i = 0; i < nodes; ++i) b_plus.set(i, sym.b()(grid.node(i)).adjoint() - divergence[i]);

  std::vector<Coefficient> a_plus;
  for (std::size_t j = 0; j < sym.n(); ++j) a_plus.push_back(sym.a(j).negated_adjoint());
  return SymbolField(grid, sym.s(), sym.r(), std::move(a_plus), Coefficient::gridded(std::move(b_plus)),
                     sym.name().empty() ? std::string() : sym.name() + "+");
}

namespace {

Coefficient block_antidiagonal(const Coefficient& upper_right, const Coefficient& lower_left) {
  const std::size_t r = upper_right.rows();
  const std::size_t s = lower_left.rows();
  const auto m = static_cast<Eigen::Index>(r + s);
  auto assemble = [r, s, m](const CMat& ur, const CMat& ll) {
    CMat out = CMat::Zero(m, m);
    out.block(0, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s)) = ur;
    out.block(static_cast<Eigen::Index>(r), 0, static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(r)) = ll;
    return out;
  };
  if (upper_right.is_constant() && lower_left.is_constant()) {
    return Coefficient::constant(assemble(upper_right(Vec()), lower_left(Vec())));
  }
  return Coefficient::analytic(r + s, r + s, [=](const Vec& x) { return assemble(upper_right(x), lower_left(x)); });
}

}  // namespace

SymbolField doubled(const SymbolField& sym) {
  const SymbolField adj = formal_adjoint(sym);
  std::vector<Coefficient> a;
  for (std::size_t j = 0; j < sym.n(); ++j) a.push_back(block_antidiagonal(adj.a(j), sym.a(j)));
  Coefficient b = block_antidiagonal(adj.b(), sym.b());
  const std::size_t m = sym.r() + sym.s();
  return SymbolField(sym.grid(), m, m, std::move(a), std::move(b),
                     sym.name().empty() ? std::string() : "doubled-" + sym.name());
}

// ------------------------------------------------ Riemannian approximants

Mat approximant_metric(const SymbolField& sym, const Vec& x, const Vec& omega, int k, double* psi_out) {
  if (k < 0) throw PreconditionError("riemannian_approximant: k must be nonnegative");
  const auto n = static_cast<Eigen::Index>(sym.n());
  if (omega.size() != n) throw PreconditionError("riemannian_approximant: omega has the wrong length");
  const double on = omega.norm();
  if (std::abs(on - 1.0) > 1e-12) throw PreconditionError("riemannian_approximant: omega must be a unit covector");
  Eigen::JacobiSVD<Mat> svd(sym.stacked(x));
  double c = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  if (c == 0.0) c = 1.0;
  const double scale = std::ldexp(1.0, -k);
  const double psi = seminorm(sym, x, omega) + 1.5 * c * scale;
  if (psi_out) *psi_out = psi;
  const Mat proj = omega * omega.transpose();
  const double wide = std::ldexp(1.0, 2 * k);
  return psi * psi * (proj + wide * (Mat::Identity(n, n) - proj));
}

double RiemannianApproximant::norm_at(std::size_t node, const Vec& xi) const {
  return std::sqrt(std::max(0.0, xi.dot(metric.at(node) * xi)));
}

RiemannianApproximant riemannian_approximant(const SymbolField& sym, const Vec& omega, int k) {
  RiemannianApproximant out;
  out.grid = sym.grid();
  out.omega = omega;
  out.k = k;
  out.psi = ScalarField(sym.grid());
  out.metric.resize(sym.grid().size());
  for (std::size_t i = 0; i < sym.grid().size(); ++i) {
    double psi = 0.0;
    out.metric[i] = approximant_metric(sym, sym.grid().node(i), omega, k, &psi);
    out.psi.set(i, psi);
  }
  return out;
}

}  // namespace subfinsler
