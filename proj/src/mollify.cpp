#include "subfinsler/mollify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "subfinsler/finite_difference.hpp"

namespace subfinsler {

bool Box::contains(const Vec& x) const {
  for (Eigen::Index k = 0; k < x.size(); ++k)
    if (x(k) < lower(k) || x(k) > upper(k)) return false;
  return true;
}

Box Box::expanded(double r) const {
  return {lower.array() - r, upper.array() + r};
}

bool Box::contains_box(const Box& inner, double margin) const {
  const double slack = 1e-12 * (1.0 + margin);
  for (Eigen::Index k = 0; k < lower.size(); ++k) {
    if (inner.lower(k) - margin < lower(k) - slack || inner.upper(k) + margin > upper(k) + slack) return false;
  }
  return true;
}

Box grid_box(const Grid& grid) { return {grid.lower(), grid.upper()}; }

double MollifierKernel::mass() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

MollifierKernel make_kernel(const Grid& grid, double eps, bool strict) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw PreconditionError("make_kernel: eps must be positive");
  const std::size_t n = grid.ndim();
  MollifierKernel k;
  k.eps = eps;
  for (std::size_t a = 0; a < n; ++a) {
    const double h = grid.spacing()[a];
    if (eps < 2.0 * h) k.under_resolved = true;
    long m = static_cast<long>(std::ceil(eps / h)) - 1;
    while (m > 0 && static_cast<double>(m) * h >= eps) --m;
    while (static_cast<double>(m + 1) * h < eps) ++m;
    k.half_width.push_back(m);
  }
  if (k.under_resolved && strict) {
    std::ostringstream os;
    os << "make_kernel: eps = " << eps << " is below two grid cells";
    throw PreconditionError(os.str());
  }
  std::vector<long> o(n);
  for (std::size_t a = 0; a < n; ++a) o[a] = -k.half_width[a];
  double total = 0.0;
  while (true) {
    double r2 = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      const double c = static_cast<double>(o[a]) * grid.spacing()[a] / eps;
      r2 += c * c;
    }
    if (r2 < 1.0) {
      const double w = std::exp(-1.0 / (1.0 - r2));
      if (w > 0.0) {
        k.offsets.push_back(o);
        k.weights.push_back(w);
        total += w;
      }
    }
    std::size_t a = 0;
    while (a < n && o[a] == k.half_width[a]) {
      o[a] = -k.half_width[a];
      ++a;
    }
    if (a == n) break;
    ++o[a];
  }
  for (double& w : k.weights) w /= total;
  return k;
}

namespace {

template <ElementKind K>
Field<K> convolve(const MollifierKernel& kernel, const Field<K>& f) {
  const Grid& grid = f.grid();
  if (!kernel.offsets.empty() && kernel.offsets[0].size() != grid.ndim())
    throw PreconditionError("mollify: kernel and field dimensions differ");
  Field<K> out(grid, f.rows(), f.cols());
  const std::size_t block = f.block();
  const auto& dims = grid.dims();
  const std::size_t n = grid.ndim();
  auto src = f.data();
  auto dst = out.data();
  std::vector<std::size_t> idx(n);
  // Accumulate f(x) + sum_o w_o (f(x - o) - f(x)): equal to the plain sum
  // for unit mass, and exact on constants whatever the rounding of the weights.
  // Nodes outside the grid hold zero.
  for (std::size_t node = 0; node < grid.size(); ++node) {
    idx = grid.multi_index(node);
    for (std::size_t e = 0; e < block; ++e) dst[node * block + e] = src[node * block + e];
    for (std::size_t q = 0; q < kernel.offsets.size(); ++q) {
      const auto& o = kernel.offsets[q];
      std::size_t lin = 0, stride = 1;
      bool inside = true;
      for (std::size_t a = 0; a < n; ++a) {
        const long c = static_cast<long>(idx[a]) - o[a];
        if (c < 0 || c >= static_cast<long>(dims[a])) {
          inside = false;
          break;
        }
        lin += static_cast<std::size_t>(c) * stride;
        stride *= dims[a];
      }
      const double w = kernel.weights[q];
      if (!inside) {
        for (std::size_t e = 0; e < block; ++e) dst[node * block + e] -= w * src[node * block + e];
        continue;
      }
      for (std::size_t e = 0; e < block; ++e) dst[node * block + e] += w * (src[lin * block + e] - src[node * block + e]);
    }
  }
  return out;
}

}  // namespace

ScalarField mollify(const MollifierKernel& kernel, const ScalarField& f) { return convolve(kernel, f); }
VectorField mollify(const MollifierKernel& kernel, const VectorField& f) { return convolve(kernel, f); }

VectorField apply_operator(const SymbolField& sym, const VectorField& f) {
  if (!(f.grid() == sym.grid())) throw PreconditionError("apply_operator: field and symbol grids differ");
  if (f.rows() != sym.r()) throw PreconditionError("apply_operator: field length differs from the symbol's r");
  const Grid& grid = sym.grid();
  std::vector<CVec> values(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) values[i] = f.at(i);
  VectorField out(grid, sym.s());
  std::vector<CVec> acc(grid.size(), CVec::Zero(static_cast<Eigen::Index>(sym.s())));
  for (std::size_t j = 0; j < sym.n(); ++j) {
    const auto deriv = node_derivative(grid, values, j);
    for (std::size_t i = 0; i < grid.size(); ++i) acc[i] += sym.a(j)(grid.node(i)) * deriv[i];
  }
  for (std::size_t i = 0; i < grid.size(); ++i) out.set(i, acc[i] + sym.b()(grid.node(i)) * values[i]);
  return out;
}

VectorField commutator_apply(const SymbolField& sym, const MollifierKernel& kernel, const VectorField& f) {
  VectorField lhs = apply_operator(sym, mollify(kernel, f));
  const VectorField rhs = mollify(kernel, apply_operator(sym, f));
  lhs += -1.0 * rhs;
  return lhs;
}

namespace {

template <class ValueNorm>
double lp_generic(const Grid& grid, const Box& K, double p, ValueNorm&& norm_at) {
  if (!(p >= 1.0)) throw PreconditionError("lp_norm: p must be at least 1");
  double cell = 1.0;
  for (double h : grid.spacing()) cell *= h;
  double acc = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!K.contains(grid.node(i))) continue;
    const double v = norm_at(i);
    if (std::isinf(p)) {
      acc = std::max(acc, v);
    } else {
      acc += std::pow(v, p) * cell;
    }
  }
  return std::isinf(p) ? acc : std::pow(acc, 1.0 / p);
}

}  // namespace

double lp_norm(const ScalarField& f, const Box& K, double p) {
  return lp_generic(f.grid(), K, p, [&](std::size_t i) { return std::abs(f.at(i)); });
}

double lp_norm(const VectorField& f, const Box& K, double p) {
  return lp_generic(f.grid(), K, p, [&](std::size_t i) { return f.at(i).norm(); });
}

FibreSeminorm covector_seminorm(const SymbolField& sym) {
  return [sym](const Vec& x, const CVec& v) { return seminorm(sym, x, v.real()); };
}

UpperBoundReport seminorm_upper_bound_check(const FibreSeminorm& P, const VectorField& f,
                                            const std::vector<double>& eps_sequence, const Box& K,
                                            const Box& W, double tol) {
  if (eps_sequence.empty()) throw PreconditionError("seminorm_upper_bound_check: empty eps sequence");
  const Grid& grid = f.grid();
  const double max_eps = *std::max_element(eps_sequence.begin(), eps_sequence.end());
  if (!grid_box(grid).contains_box(W)) throw PreconditionError("seminorm_upper_bound_check: W is not inside the grid box");
  if (!W.contains_box(K, max_eps)) {
    std::ostringstream os;
    os << "seminorm_upper_bound_check: K needs a margin of " << max_eps << " inside W";
    throw PreconditionError(os.str());
  }
  double esssup = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Vec x = grid.node(i);
    if (W.contains(x)) esssup = std::max(esssup, P(x, f.at(i)));
  }
  UpperBoundReport rep;
  double prev_slack = std::numeric_limits<double>::infinity();
  for (double eps : eps_sequence) {
    const VectorField g = mollify(make_kernel(grid, eps), f);
    UpperBoundRow row;
    row.eps = eps;
    row.esssup_W = esssup;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const Vec x = grid.node(i);
      if (K.contains(x)) row.sup_K = std::max(row.sup_K, P(x, g.at(i)));
    }
    row.gap = row.sup_K - esssup;
    const double slack = std::max(row.gap, 0.0);
    if (slack > prev_slack + tol) rep.slack_nonincreasing = false;
    if (row.gap > tol) rep.bounded_by_W = false;
    prev_slack = slack;
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace subfinsler
