#include "subfinsler/gallery.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

namespace subfinsler {

double union_measure(std::vector<Interval> intervals, double lo, double hi) {
  if (!(hi > lo)) return 0.0;
  std::vector<Interval> clipped;
  for (const auto& iv : intervals) {
    const double a = std::max(iv.lo, lo);
    const double b = std::min(iv.hi, hi);
    if (b > a) clipped.push_back({a, b});
  }
  std::sort(clipped.begin(), clipped.end(), [](const Interval& x, const Interval& y) { return x.lo < y.lo; });
  double total = 0.0;
  double cur_lo = 0.0, cur_hi = 0.0;
  bool open = false;
  for (const auto& iv : clipped) {
    if (!open) {
      cur_lo = iv.lo;
      cur_hi = iv.hi;
      open = true;
    } else if (iv.lo <= cur_hi) {
      cur_hi = std::max(cur_hi, iv.hi);
    } else {
      total += cur_hi - cur_lo;
      cur_lo = iv.lo;
      cur_hi = iv.hi;
    }
  }
  if (open) total += cur_hi - cur_lo;
  return total;
}

std::vector<std::pair<long, long>> stern_brocot_window(std::size_t count) {
  std::vector<std::pair<long, long>> out;
  if (count == 0) return out;
  out.emplace_back(0, 1);
  if (count == 1) return out;
  out.emplace_back(1, 1);
  struct Node {
    long lp, lq, rp, rq;
  };
  std::deque<Node> queue{{0, 1, 1, 1}};
  while (out.size() < count) {
    const Node nd = queue.front();
    queue.pop_front();
    const long p = nd.lp + nd.rp, q = nd.lq + nd.rq;
    out.emplace_back(p, q);
    queue.push_back({nd.lp, nd.lq, p, q});
    queue.push_back({p, q, nd.rp, nd.rq});
  }
  return out;
}

SymbolField diagonal_shift(std::size_t n, const Grid& grid) {
  if (n < 1) throw PreconditionError("diagonal_shift: n must be at least 1");
  if (grid.ndim() != n) throw PreconditionError("diagonal_shift: grid dimension differs from n");
  std::vector<Coefficient> a;
  const auto ni = static_cast<Eigen::Index>(n);
  for (std::size_t j = 0; j < n; ++j) {
    CMat aj = CMat::Zero(ni, ni);
    aj(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) = cplx(0.0, 1.0);
    a.push_back(Coefficient::constant(aj));
  }
  return SymbolField(grid, n, n, std::move(a), Coefficient::constant(CMat::Zero(ni, ni)), "diagonal_shift");
}

namespace {

Mat cholesky_upper(const Mat& g, const Vec& x) {
  Eigen::LLT<Mat> llt(g);
  if (llt.info() != Eigen::Success || !g.isApprox(g.transpose(), 1e-12)) {
    std::ostringstream os;
    os << "riemannian: metric is not symmetric positive definite at x = " << x.transpose();
    throw PreconditionError(os.str());
  }
  return llt.matrixU();  // G = U^T U
}

}  // namespace

SymbolField riemannian(const Grid& grid, const std::function<Mat(const Vec&)>& metric) {
  const std::size_t n = grid.ndim();
  const auto ni = static_cast<Eigen::Index>(n);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Vec x = grid.node(i);
    const Mat g = metric(x);
    if (g.rows() != ni || g.cols() != ni) throw PreconditionError("riemannian: metric has the wrong shape");
    cholesky_upper(g, x);
  }
  // Sum_j xi_j U(:, j) = U xi and |U xi|^2 = xi^T G xi.
  std::vector<Coefficient> a;
  for (std::size_t j = 0; j < n; ++j) {
    a.push_back(Coefficient::analytic(n, 1, [metric, j](const Vec& x) -> CMat {
      const Mat u = cholesky_upper(metric(x), x);
      return u.col(static_cast<Eigen::Index>(j)).cast<cplx>();
    }));
  }
  return SymbolField(grid, 1, n, std::move(a), Coefficient::constant(CMat::Zero(ni, 1)), "riemannian");
}

SymbolField riemannian(const Grid& grid, const Mat& metric) {
  const std::size_t n = grid.ndim();
  const auto ni = static_cast<Eigen::Index>(n);
  if (metric.rows() != ni || metric.cols() != ni) throw PreconditionError("riemannian: metric has the wrong shape");
  const Mat u = cholesky_upper(metric, grid.lower());
  std::vector<Coefficient> a;
  for (Eigen::Index j = 0; j < ni; ++j) a.push_back(Coefficient::constant(u.col(j).cast<cplx>()));
  return SymbolField(grid, 1, n, std::move(a), Coefficient::constant(CMat::Zero(ni, 1)), "riemannian");
}

SymbolField subriemannian(const Grid& grid, std::vector<VectorFn> fields) {
  if (fields.empty()) throw PreconditionError("subriemannian: need at least one field");
  const std::size_t n = grid.ndim();
  const std::size_t m = fields.size();
  for (const auto& f : fields) {
    if (static_cast<std::size_t>(f(grid.lower()).size()) != n)
      throw PreconditionError("subriemannian: field dimension differs from the grid dimension");
  }
  auto shared = std::make_shared<const std::vector<VectorFn>>(std::move(fields));
  std::vector<Coefficient> a;
  for (std::size_t j = 0; j < n; ++j) {
    a.push_back(Coefficient::analytic(m, 1, [shared, j](const Vec& x) -> CMat {
      CMat col(static_cast<Eigen::Index>(shared->size()), 1);
      for (std::size_t k = 0; k < shared->size(); ++k)
        col(static_cast<Eigen::Index>(k), 0) = (*shared)[k](x)(static_cast<Eigen::Index>(j));
      return col;
    }));
  }
  return SymbolField(grid, 1, m, std::move(a),
                     Coefficient::constant(CMat::Zero(static_cast<Eigen::Index>(m), 1)), "subriemannian");
}

SymbolField transport_1d(const Grid& grid, std::function<double(double)> c) {
  if (grid.ndim() != 1) throw PreconditionError("transport_1d: grid must be one-dimensional");
  std::vector<Coefficient> a;
  a.push_back(Coefficient::analytic(1, 1, [c = std::move(c)](const Vec& x) -> CMat {
    return CMat::Constant(1, 1, cplx(c(x(0)), 0.0));
  }));
  return SymbolField(grid, 1, 1, std::move(a), Coefficient::constant(CMat::Zero(1, 1)), "transport");
}

Vec grushin_X(double u) {
  const double c = 2.0 / std::sqrt(4.0 + 3.0 * u * u);
  Vec x(2);
  x << c, c * u * std::sqrt(3.0) / 2.0;
  return x;
}

Vec grushin_Y(double u) {
  const double c = u / (2.0 * std::sqrt(1.0 + u * u)) * 2.0 / std::sqrt(4.0 + 3.0 * u * u);
  Vec y(2);
  y << -c * u * std::sqrt(3.0) / 2.0, c;
  return y;
}

Mat grushin_H(double u) {
  Mat h(2, 2);
  h << 4.0 + u * u, 2.0 * std::sqrt(3.0) * u, 2.0 * std::sqrt(3.0) * u, 4.0 * u * u;
  return h / (4.0 * (1.0 + u * u));
}

GrushinRational grushin_rational(std::size_t m, const Grid& grid, double flatness) {
  if (m < 1) throw PreconditionError("grushin_rational: m must be at least 1");
  if (grid.ndim() != 2) throw PreconditionError("grushin_rational: grid must be two-dimensional");
  if (!(flatness > 0.0)) throw PreconditionError("grushin_rational: flatness must be positive");
  GrushinRational out;
  out.flatness = flatness;
  out.rationals = stern_brocot_window(m);
  std::vector<double> centers, radii;
  for (std::size_t i = 0; i < m; ++i) {
    const double q = static_cast<double>(out.rationals[i].first) / static_cast<double>(out.rationals[i].second);
    const double r = std::ldexp(1.0, -static_cast<int>(i) - 3);
    centers.push_back(q);
    radii.push_back(r);
    out.intervals.push_back({q - r, q + r});
  }
  auto v = [centers, radii, flatness](double x) {
    double keep = 1.0;
    for (std::size_t i = 0; i < centers.size(); ++i) {
      const double s = (x - centers[i]) / radii[i];
      if (std::abs(s) >= 1.0) continue;
      const double s2 = s * s;
      keep *= 1.0 - std::exp(-flatness * s2 / (1.0 - s2));
    }
    return 1.0 - keep;
  };
  out.u = [v](const Vec& p) { return v(p(0)); };

  std::vector<Coefficient> a;
  for (Eigen::Index j = 0; j < 2; ++j) {
    a.push_back(Coefficient::analytic(2, 1, [v, j](const Vec& p) -> CMat {
      const double u = v(p(0));
      CMat col(2, 1);
      col(0, 0) = grushin_X(u)(j);
      col(1, 0) = grushin_Y(u)(j);
      return col;
    }));
  }
  std::ostringstream name;
  name << "grushin_rational(m=" << m << ")";
  out.symbol = SymbolField(grid, 1, 2, std::move(a), Coefficient::constant(CMat::Zero(2, 1)), name.str());
  return out;
}

// -------------------------------------------------------------- registry

const std::vector<GalleryEntry>& gallery_entries() {
  static const std::vector<GalleryEntry> entries = {
      {"diagonal_shift", "D(f_1..f_n) = (i d_1 f_1, ..., i d_n f_n)",
       "P(xi) = |xi|_inf; P*(v) = |v|_1; distance |x - y|_1"},
      {"riemannian", "first-order system with P(xi) = |xi|_G (G = diag(metric_diag), default identity)",
       "P(xi) = sqrt(xi^T G xi); P*(v) = sqrt(v^T G^-1 v)"},
      {"grushin_pair", "Df = (d_x f, x d_y f)", "P(xi)^2 = xi_1^2 + x^2 xi_2^2; bracket rank 2 at the origin"},
      {"grushin_rational", "Df = (Xf, Yf) with u(x, y) vanishing exactly off m intervals around rationals",
       "P*(d_x) = 2 where u != 0, 1 where u = 0; P*(d_y) = inf where u = 0; "
       "length of (t, 0) on [0, 1] = 1 + |[0, 1] ∩ A_m|"},
      {"transport", "1-D scalar D = d_1", "P(xi) = |xi|; D+ = -d_1"},
      {"variable_transport", "1-D scalar D = x d_1", "P(xi) = |x xi|; D+ = -x d_1 - 1"},
  };
  return entries;
}

namespace {

struct DefaultBox {
  double lo, hi;
  std::size_t nodes;
};

Grid box_grid(const GalleryParams& p, std::size_t n, std::vector<DefaultBox> defaults) {
  std::vector<double> lower = p.lower, upper = p.upper;
  std::vector<std::size_t> dims = p.dims;
  if (lower.empty())
    for (std::size_t k = 0; k < n; ++k) lower.push_back(defaults[std::min(k, defaults.size() - 1)].lo);
  if (upper.empty())
    for (std::size_t k = 0; k < n; ++k) upper.push_back(defaults[std::min(k, defaults.size() - 1)].hi);
  if (dims.empty())
    for (std::size_t k = 0; k < n; ++k) dims.push_back(defaults[std::min(k, defaults.size() - 1)].nodes);
  if (lower.size() != n || upper.size() != n || dims.size() != n)
    throw PreconditionError("gallery: grid lower/upper/dims must have one entry per axis");
  return Grid::spanning(lower, upper, dims);
}

}  // namespace

Grid gallery_grid(const std::string& name, const GalleryParams& p) {
  if (name == "diagonal_shift" || name == "riemannian") return box_grid(p, p.n, {{-2.0, 2.0, 33}});
  if (name == "grushin_pair") return box_grid(p, 2, {{-1.0, 1.0, 33}});
  if (name == "grushin_rational") return box_grid(p, 2, {{-0.25, 1.25, 97}, {-0.5, 0.5, 33}});
  if (name == "transport" || name == "variable_transport") return box_grid(p, 1, {{0.0, 2.0, 65}});
  throw PreconditionError("gallery: unknown symbol '" + name + "'");
}

SymbolField make_gallery_symbol(const std::string& name, const GalleryParams& p) {
  const Grid grid = gallery_grid(name, p);
  if (name == "diagonal_shift") return diagonal_shift(p.n, grid);
  if (name == "riemannian") {
    Mat g = Mat::Identity(static_cast<Eigen::Index>(p.n), static_cast<Eigen::Index>(p.n));
    if (!p.metric_diag.empty()) {
      if (p.metric_diag.size() != p.n) throw PreconditionError("gallery: metric_diag needs one entry per axis");
      for (std::size_t k = 0; k < p.n; ++k) g(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) = p.metric_diag[k];
    }
    return riemannian(grid, g);
  }
  if (name == "grushin_pair") {
    SymbolField s = subriemannian(grid, {[](const Vec&) { return Vec::Unit(2, 0); },
                                         [](const Vec& x) { return Vec(x(0) * Vec::Unit(2, 1)); }});
    s.set_name("grushin_pair");
    return s;
  }
  if (name == "grushin_rational") return grushin_rational(p.m, grid, p.flatness).symbol;
  if (name == "transport") return transport_1d(grid, [](double) { return 1.0; });
  if (name == "variable_transport") {
    SymbolField s = transport_1d(grid, [](double x) { return x; });
    s.set_name("variable_transport");
    return s;
  }
  throw PreconditionError("gallery: unknown symbol '" + name + "'");
}

}  // namespace subfinsler
