#include "subfinsler/flows.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace subfinsler {

bool VectorFieldSet::all_subunit() const {
  return std::all_of(subunit.begin(), subunit.end(), [](bool b) { return b; });
}

namespace {

// One-sided near the box boundary so grid-backed fields are never sampled
// outside their grid.
Mat node_jacobian(const VectorFn& X, const Vec& x, const Grid& grid) {
  const auto n = x.size();
  Mat jac(n, n);
  const Vec lo = grid.lower(), hi = grid.upper();
  for (Eigen::Index k = 0; k < n; ++k) {
    const double h = grid.spacing()[static_cast<std::size_t>(k)];
    Vec xp = x, xm = x;
    double width = 0.0;
    if (x(k) + h <= hi(k) + 1e-12 * h) {
      xp(k) += h;
      width += h;
    }
    if (x(k) - h >= lo(k) - 1e-12 * h) {
      xm(k) -= h;
      width += h;
    }
    jac.col(k) = (X(xp) - X(xm)) / width;
  }
  return jac;
}

}  // namespace

VectorFieldSet make_field_set(const SymbolField& sym, std::vector<VectorFn> fields, double tol) {
  if (fields.empty()) throw PreconditionError("make_field_set: need at least one field");
  const Grid& grid = sym.grid();
  VectorFieldSet set;
  set.fields = std::move(fields);
  set.subunit.assign(set.fields.size(), true);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Vec x = grid.node(i);
    for (std::size_t k = 0; k < set.fields.size(); ++k) {
      const Vec v = set.fields[k](x);
      if (static_cast<std::size_t>(v.size()) != grid.ndim())
        throw PreconditionError("make_field_set: field dimension differs from the grid dimension");
      if (dual_norm(sym, x, v) > ExtReal::finite(1.0 + tol)) set.subunit[k] = false;
      const Mat jac = node_jacobian(set.fields[k], x, grid);
      Eigen::JacobiSVD<Mat> svd(jac);
      set.lipschitz = std::max(set.lipschitz, svd.singularValues()(0));
    }
  }
  if (!std::isfinite(set.lipschitz)) throw PreconditionError("make_field_set: Lipschitz constant is not finite");
  return set;
}

Curve flow(const VectorFn& X, const Vec& x0, double T, double step, const Grid& box) {
  if (!(T >= 0.0)) throw PreconditionError("flow: T must be nonnegative");
  if (!(step > 0.0)) throw PreconditionError("flow: step must be positive");
  box.require_contains(x0, "flow");
  Curve c;
  c.times.push_back(0.0);
  c.points.push_back(x0);
  if (T == 0.0) return c;
  const auto steps = static_cast<std::size_t>(std::ceil(T / step - 1e-12));
  const double h = T / static_cast<double>(steps);
  Vec x = x0;
  auto eval = [&](const Vec& p, double t) {
    if (!box.contains(p)) {
      std::ostringstream os;
      os << "flow: trajectory left the grid box near t = " << t;
      throw BoxExitError(os.str(), t);
    }
    return X(p);
  };
  for (std::size_t s = 0; s < steps; ++s) {
    const double t = h * static_cast<double>(s);
    const Vec k1 = eval(x, t);
    const Vec k2 = eval(x + 0.5 * h * k1, t + 0.5 * h);
    const Vec k3 = eval(x + 0.5 * h * k2, t + 0.5 * h);
    const Vec k4 = eval(x + h * k3, t + h);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const double tn = s + 1 == steps ? T : h * static_cast<double>(s + 1);
    if (!box.contains(x)) {
      std::ostringstream os;
      os << "flow: trajectory left the grid box near t = " << tn;
      throw BoxExitError(os.str(), tn);
    }
    c.times.push_back(tn);
    c.points.push_back(x);
  }
  return c;
}

void write_flow_csv(const PiecewiseFlowCurve& curve, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw PreconditionError("write_flow_csv: cannot open " + path.string());
  const std::size_t n = curve.curve.points.empty() ? 0 : static_cast<std::size_t>(curve.curve.points[0].size());
  out << "t";
  for (std::size_t k = 0; k < n; ++k) out << ",x" << (k + 1);
  out << ",field\n" << std::setprecision(17);
  for (std::size_t i = 0; i < curve.curve.times.size(); ++i) {
    out << curve.curve.times[i];
    for (std::size_t k = 0; k < n; ++k) out << ',' << curve.curve.points[i](static_cast<Eigen::Index>(k));
    out << ',' << curve.sample_field[i] << '\n';
  }
}

double measure_kappa(const SymbolField& sym, const std::vector<std::size_t>& nodes, int directions,
                     const DualNormOptions& opts) {
  const auto n = static_cast<Eigen::Index>(sym.n());
  std::vector<Vec> dirs;
  if (n == 1) {
    dirs.push_back(Vec::Ones(1));
  } else if (n == 2) {
    for (int i = 0; i < directions; ++i) {
      const double th = 2.0 * std::numbers::pi * i / directions;
      Vec v(2);
      v << std::cos(th), std::sin(th);
      dirs.push_back(v);
    }
  } else {
    for (Eigen::Index k = 0; k < n; ++k) dirs.push_back(Vec::Unit(n, k));
    dirs.push_back(Vec::Ones(n).normalized());
    std::mt19937_64 rng(0);
    std::normal_distribution<double> normal;
    for (int i = 0; i < directions; ++i) {
      Vec v(n);
      for (Eigen::Index k = 0; k < n; ++k) v(k) = normal(rng);
      dirs.push_back(v.normalized());
    }
  }
  double kappa = 0.0;
  for (auto node : nodes) {
    const Vec x = sym.grid().node(node);
    for (const auto& v : dirs) {
      const ExtReal p = dual_norm(sym, x, v, opts);
      if (p.is_finite() && p.value() > 0.0) kappa = std::max(kappa, 1.0 / p.value());
    }
  }
  return kappa;
}

FlowApproximation approx_by_flows(const SymbolField& sym, const Curve& gamma, const VectorFieldSet& set,
                                  std::size_t N, double eps, const Vec& x, const FlowApproxOptions& opts) {
  const Grid& grid = sym.grid();
  validate_curve(gamma, grid);
  if (N < 1) throw PreconditionError("approx_by_flows: N must be at least 1");
  if (!(eps > 0.0)) throw PreconditionError("approx_by_flows: eps must be positive");
  if (set.fields.empty()) throw PreconditionError("approx_by_flows: empty field set");
  grid.require_contains(x, "approx_by_flows");
  const std::size_t m = set.fields.size();
  const double t0 = gamma.times.front();
  const double T = gamma.times.back() - t0;
  const double d = T / static_cast<double>(N);

  // Sub-intervals on which both gamma' and the block index are constant.
  std::vector<double> cuts(gamma.times.begin(), gamma.times.end());
  for (std::size_t j = 1; j < N; ++j) cuts.push_back(t0 + d * static_cast<double>(j));
  std::sort(cuts.begin(), cuts.end());
  std::vector<double> fine;
  for (double c : cuts) {
    if (fine.empty() || c - fine.back() > 1e-12 * T) fine.push_back(c);
  }
  fine.back() = gamma.times.back();

  std::vector<Vec> anchors;
  for (std::size_t j = 0; j < N; ++j) anchors.push_back(gamma.at(t0 + d * static_cast<double>(j)));

  FlowApproximation out;
  out.occupancy_before.assign(N, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i + 1 < fine.size(); ++i) {
    const double a = fine[i], b = fine[i + 1];
    const double tm = 0.5 * (a + b);
    const auto seg_it = std::upper_bound(gamma.times.begin(), gamma.times.end(), tm);
    const std::size_t seg = std::min(static_cast<std::size_t>(seg_it - gamma.times.begin()) - 1, gamma.segments() - 1);
    const Vec vel = gamma.velocity(seg);
    const Vec pos = gamma.at(tm);
    std::size_t nu0 = m;
    for (std::size_t k = 0; k < m; ++k) {
      if ((set.fields[k](pos) - vel).norm() <= eps) {
        nu0 = k;
        break;
      }
    }
    if (nu0 == m) {
      std::ostringstream os;
      os << "approx_by_flows: no field is within eps = " << eps << " of the curve velocity at t = " << tm;
      throw NoMatchingFieldError(os.str(), tm);
    }
    const std::size_t j = std::min(N - 1, static_cast<std::size_t>(std::floor((tm - t0) / d)));
    const Vec target = set.fields[nu0](anchors[j]);
    std::size_t nu1 = nu0;
    for (std::size_t k = 0; k < nu0; ++k) {
      if ((set.fields[k](anchors[j]) - target).norm() <= eps) {
        nu1 = k;
        break;
      }
    }
    out.occupancy_before[j][nu1] += b - a;
  }

  // nu2: on each block, fields in increasing index order for the time nu1
  // spends on them.
  PiecewiseFlowCurve& delta = out.delta;
  delta.curve.times.push_back(t0);
  delta.curve.points.push_back(x);
  delta.breakpoints.push_back(t0);
  out.occupancy_after.assign(N, std::vector<double>(m, 0.0));
  Vec cur = x;
  double t = t0;
  for (std::size_t j = 0; j < N; ++j) {
    for (std::size_t k = 0; k < m; ++k) {
      const double dur = out.occupancy_before[j][k];
      if (dur <= 0.0) continue;
      Curve piece;
      try {
        piece = flow(set.fields[k], cur, dur, opts.step, grid);
      } catch (const BoxExitError& e) {
        throw BoxExitError(e.what(), t + e.exit_time());
      }
      for (std::size_t s = 1; s < piece.times.size(); ++s) {
        delta.curve.times.push_back(t + piece.times[s]);
        delta.curve.points.push_back(piece.points[s]);
        delta.sample_field.push_back(k);
      }
      cur = piece.points.back();
      t += dur;
      delta.active.push_back(k);
      delta.breakpoints.push_back(t);
      out.occupancy_after[j][k] += dur;
    }
  }
  delta.sample_field.insert(delta.sample_field.begin(), delta.active.empty() ? 0 : delta.active.front());

  // kappa over the region traversed by gamma, the anchors and delta.
  std::set<std::size_t> nodes;
  for (const auto& p : gamma.points) nodes.insert(grid.nearest_node(p));
  for (const auto& p : anchors) nodes.insert(grid.nearest_node(p));
  for (const auto& p : delta.curve.points) nodes.insert(grid.nearest_node(p));
  out.kappa = measure_kappa(sym, {nodes.begin(), nodes.end()}, opts.kappa_directions, opts.dual);
  out.lipschitz = set.lipschitz;

  const double L = set.lipschitz;
  const double start_gap = (x - gamma.points.front()).norm();
  if (L > 0.0) {
    const double growth = std::expm1(L * T);
    out.bound = std::exp(L * T) * start_gap + 2.0 * (out.kappa * T / static_cast<double>(N)) * growth +
                2.0 * eps * growth / L;
  } else {
    out.bound = start_gap + 2.0 * eps * T;
  }
  out.endpoint_error = (cur - gamma.points.back()).norm();
  out.within_bound = out.endpoint_error <= out.bound + opts.integrator_tol;
  return out;
}

Mat jacobian(const VectorFn& X, const Vec& x, double h) {
  const auto n = x.size();
  Mat jac(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    Vec xp = x, xm = x;
    xp(k) += h;
    xm(k) -= h;
    jac.col(k) = (X(xp) - X(xm)) / (2.0 * h);
  }
  return jac;
}

VectorFn bracket_field(VectorFn X, VectorFn Y, double h) {
  return [X = std::move(X), Y = std::move(Y), h](const Vec& x) -> Vec {
    return jacobian(Y, x, h) * X(x) - jacobian(X, x, h) * Y(x);
  };
}

namespace {

void require_interior(const Vec& x, double margin, const Grid& domain, const char* what) {
  const Vec lo = domain.lower(), hi = domain.upper();
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (x(k) - margin < lo(k) - 1e-12 * margin || x(k) + margin > hi(k) + 1e-12 * margin) {
      std::ostringstream os;
      os << what << ": point " << x.transpose() << " is closer than " << margin << " to the boundary";
      throw DomainError(os.str());
    }
  }
}

}  // namespace

Vec lie_bracket(const VectorFn& X, const VectorFn& Y, const Vec& x, double h, const Grid& domain) {
  if (!(h > 0.0)) throw PreconditionError("lie_bracket: h must be positive");
  require_interior(x, 2.0 * h, domain, "lie_bracket");
  return bracket_field(X, Y, h)(x);
}

int hoermander_rank(const std::vector<VectorFn>& fields, const Vec& x, int depth, double h, double tol_rank,
                    const Grid& domain) {
  if (depth < 1) throw PreconditionError("hoermander_rank: depth must be at least 1");
  if (fields.empty()) throw PreconditionError("hoermander_rank: empty field set");
  if (!(h > 0.0)) throw PreconditionError("hoermander_rank: h must be positive");
  require_interior(x, std::max(2, depth) * h, domain, "hoermander_rank");
  std::vector<VectorFn> level = fields;
  std::vector<Vec> values;
  for (int len = 1; len <= depth; ++len) {
    for (const auto& f : level) values.push_back(f(x));
    if (len == depth) break;
    std::vector<VectorFn> next;
    for (const auto& X : fields)
      for (const auto& B : level) next.push_back(bracket_field(X, B, h));
    level = std::move(next);
  }
  Mat span(x.size(), static_cast<Eigen::Index>(values.size()));
  for (std::size_t c = 0; c < values.size(); ++c) span.col(static_cast<Eigen::Index>(c)) = values[c];
  Eigen::JacobiSVD<Mat> svd(span);
  const Vec sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  int rank = 0;
  for (Eigen::Index k = 0; k < sv.size(); ++k)
    if (sv(k) > tol_rank * sv(0)) ++rank;
  return rank;
}

}  // namespace subfinsler
