#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>

#include "subfinsler/flows.hpp"
#include "subfinsler/gallery.hpp"
#include "subfinsler/geometry.hpp"
#include "subfinsler/io.hpp"
#include "subfinsler/mollify.hpp"
#include "subfinsler/propagate.hpp"

namespace subfinsler::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> kSymbolKeys = {"symbol", "manifest", "n", "lower", "upper", "dims",
                                           "m", "flatness", "metric_diag", "seed", "out"};

std::set<std::string> keys(std::initializer_list<std::string> extra) {
  std::set<std::string> k = kSymbolKeys;
  k.insert(extra.begin(), extra.end());
  return k;
}

double json_number(double v) { return std::isfinite(v) ? v : std::numeric_limits<double>::max(); }

json ext_json(const ExtReal& x) { return x.is_finite() ? json(x.value()) : json("inf"); }

void write_report(RunContext& ctx, const std::string& command, const json& results, const std::string& verdict,
                  int code) {
  fs::create_directories(ctx.out);
  json r;
  r["command"] = command;
  r["config"] = ctx.config.resolved();
  r["seed"] = ctx.config.resolved().value("seed", 0L);
  r["results"] = results;
  r["verdict"] = verdict;
  r["exit_code"] = code;
  std::ofstream(ctx.out / "report.json") << std::setw(2) << r << '\n';
  std::cout << command << ": " << verdict << " (report " << (ctx.out / "report.json").string() << ")\n";
}

GalleryParams gallery_params(Config& c) {
  GalleryParams p;
  p.n = static_cast<std::size_t>(c.get_int("n", static_cast<long>(p.n)));
  p.lower = c.get_doubles("lower", {});
  p.upper = c.get_doubles("upper", {});
  p.dims = c.get_sizes("dims", {});
  p.m = static_cast<std::size_t>(c.get_int("m", static_cast<long>(p.m)));
  p.flatness = c.get_double("flatness", p.flatness);
  p.metric_diag = c.get_doubles("metric_diag", {});
  return p;
}

// Symbol from a manifest or the gallery. With `periodic`, the gallery box
// loses its last node per axis so that the periodic grid covers [lower, upper),
// and `refine` divides the spacing.
SymbolField load_symbol_source(Config& c, const std::string& default_name, bool periodic = false) {
  c.get_int("seed", 0);
  if (c.has("manifest")) {
    const fs::path path = c.require_string("manifest");
    if (!fs::exists(path)) throw ConfigError("key 'manifest': no such file " + path.string());
    return load_symbol(path);
  }
  const std::string name = c.get_string("symbol", default_name);
  bool known = false;
  for (const auto& e : gallery_entries()) known = known || e.name == name;
  if (!known) throw ConfigError("key 'symbol': unknown gallery symbol '" + name + "'");
  GalleryParams p = gallery_params(c);
  if (periodic) {
    const long refine = c.get_int("refine", 1);
    if (refine < 1) throw ConfigError("key 'refine': must be at least 1");
    const Grid g = gallery_grid(name, p);
    p.lower.assign(g.origin().begin(), g.origin().end());
    p.upper.clear();
    p.dims.clear();
    for (std::size_t k = 0; k < g.ndim(); ++k) {
      const std::size_t cells = (g.dims()[k] - 1) * static_cast<std::size_t>(refine);
      const double h = g.spacing()[k] / static_cast<double>(refine);
      p.upper.push_back(g.origin()[k] + h * static_cast<double>(cells - 1));
      p.dims.push_back(cells);
    }
  }
  return make_gallery_symbol(name, p);
}

Vec box_centre(const Grid& g) { return 0.5 * (g.lower() + g.upper()); }

Vec point_or(Config& c, const std::string& key, const Vec& fallback) {
  const auto pts = c.get_points(key);
  if (pts.empty()) {
    c.get_doubles(key, std::vector<double>(fallback.data(), fallback.data() + fallback.size()));
    return fallback;
  }
  if (pts.size() != 1 || pts[0].size() != static_cast<std::size_t>(fallback.size()))
    throw ConfigError("key '" + key + "': expected one point with " + std::to_string(fallback.size()) + " coordinates");
  return Eigen::Map<const Vec>(pts[0].data(), fallback.size());
}

double gaussian(const Vec& x, const Vec& c, double sigma) { return std::exp(-0.5 * (x - c).squaredNorm() / (sigma * sigma)); }

Boundary parse_boundary(Config& c) {
  const std::string b = c.get_string("boundary", "periodic");
  if (b == "periodic") return Boundary::Periodic;
  if (b == "compact") return Boundary::Compact;
  throw ConfigError("key 'boundary': expected periodic or compact, got '" + b + "'");
}

void write_node_csv(const DistanceField& df, const fs::path& path) {
  std::ofstream out(path);
  for (std::size_t k = 0; k < df.grid.ndim(); ++k) out << 'x' << k + 1 << ',';
  out << "distance\n" << std::setprecision(17);
  for (std::size_t i = 0; i < df.grid.size(); ++i) {
    const Vec x = df.grid.node(i);
    for (Eigen::Index k = 0; k < x.size(); ++k) out << x(k) << ',';
    out << df.at(i) << '\n';
  }
}

}  // namespace

int cmd_dist(RunContext& ctx) {
  Config& c = ctx.config;
  c.check_known(keys({"sources", "stencil", "kernel_rel_tol"}));
  const SymbolField sym = load_symbol_source(c, "diagonal_shift");
  const Grid& g = sym.grid();
  const int stencil = static_cast<int>(c.get_int("stencil", 2));
  DualNormOptions opts;
  opts.kernel_rel_tol = c.get_double("kernel_rel_tol", opts.kernel_rel_tol);

  std::vector<std::size_t> sources;
  if (c.get_string("sources", "center") == "center") {
    sources.push_back(g.nearest_node(box_centre(g)));
  } else {
    for (const auto& p : c.get_points("sources")) {
      if (p.size() != g.ndim()) throw ConfigError("key 'sources': point has the wrong dimension");
      const Vec x = Eigen::Map<const Vec>(p.data(), static_cast<Eigen::Index>(p.size()));
      if (!g.contains(x)) throw ConfigError("key 'sources': point outside the grid box");
      sources.push_back(g.nearest_node(x));
    }
    if (sources.empty()) throw ConfigError("key 'sources': empty source set");
  }
  std::sort(sources.begin(), sources.end());
  sources.erase(std::unique(sources.begin(), sources.end()), sources.end());

  const DistanceField df = distance_field(sym, sources, stencil, opts);
  fs::create_directories(ctx.out);
  save_field(df.to_field(), ctx.out / "distance.sfpf");
  write_node_csv(df, ctx.out / "distance.csv");

  json results;
  results["symbol"] = sym.name();
  results["sources"] = json::array();
  for (std::size_t s : sources) {
    const Vec x = g.node(s);
    results["sources"].push_back({{"node", s}, {"x", std::vector<double>(x.data(), x.data() + x.size())}});
  }
  results["stencil_radius"] = stencil;
  results["max_finite_distance"] = df.max_finite();
  results["infinite_nodes"] = df.infinite_count();
  results["nodes"] = g.size();
  results["files"] = {"distance.sfpf", "distance.csv"};
  write_report(ctx, "dist", results, "n/a", kExitPass);
  return kExitPass;
}

int cmd_propagate(RunContext& ctx) {
  Config& c = ctx.config;
  c.check_known(keys({"boundary", "doubled", "T", "dt", "cfl_fraction", "center", "sigma", "amplitude", "component",
                      "theta", "stencil", "cone_slack", "frames", "refine"}));
  const Boundary boundary = parse_boundary(c);
  if (!c.has("refine") && !c.has("manifest")) c.set_override("refine=2");
  const SymbolField base = load_symbol_source(c, "diagonal_shift", boundary == Boundary::Periodic);
  const Grid& g = base.grid();
  const std::string doubling = c.get_string("doubled", "auto");
  if (doubling != "auto" && doubling != "true" && doubling != "false")
    throw ConfigError("key 'doubled': expected auto, true or false");
  SymbolField sym = base;
  if (doubling == "true") {
    sym = doubled(base);
  } else if (doubling == "auto") {
    try {
      (void)discretise_skew(base, boundary);
    } catch (const NotSelfAdjointError&) {
      sym = doubled(base);
    }
  }
  const SkewOperator op = discretise_skew(sym, boundary);

  const double T = c.get_double("T", 1.0);
  const double fraction = c.get_double("cfl_fraction", kDefaultCflFraction);
  double dt = c.get_double("dt", 0.0);
  if (dt == 0.0) dt = std::isfinite(op.cfl_limit()) ? fraction * op.cfl_limit() : T / 100.0;
  if (!(T > 0.0)) throw ConfigError("key 'T': must be positive");

  const double h = *std::max_element(g.spacing().begin(), g.spacing().end());
  // Off-centre by default so that support moving in +x1 stays clear of the seam.
  const Vec centre = point_or(c, "center", g.lower() + 0.375 * (g.upper() - g.lower()));
  const double sigma = c.get_double("sigma", 4.0 * h);
  const double amplitude = c.get_double("amplitude", 1.0);
  const long component = c.get_int("component", 0);
  if (component < 0 || static_cast<std::size_t>(component) >= op.fibre())
    throw ConfigError("key 'component': outside the fibre of size " + std::to_string(op.fibre()));
  const double theta = c.get_double("theta", 1e-6);
  const int stencil = static_cast<int>(c.get_int("stencil", 1));
  const double slack = c.get_double("cone_slack", h);
  const long frames = std::max(1L, c.get_int("frames", 50));

  const VectorField u0 = VectorField::from_function(g, op.fibre(), 1, [&](const Vec& x) {
    CVec v = CVec::Zero(static_cast<Eigen::Index>(op.fibre()));
    v(component) = amplitude * gaussian(x, centre, sigma);
    return v;
  });
  const auto steps = static_cast<std::size_t>(std::ceil(T / dt - 1e-12));
  EvolveOptions opts;
  opts.save_every = std::max<std::size_t>(1, steps / static_cast<std::size_t>(frames));
  opts.support_threshold = theta;
  const Trajectory tr = evolve(op, u0, T, dt, opts);

  std::vector<RadiusSample> radii;
  const auto K0 = threshold_support(u0, theta);
  if (K0.empty()) {
    for (const auto& st : tr.states) radii.push_back({st.t, ExtReal::finite(0.0), 0.0});
  } else {
    const DistanceField df = distance_field(base, K0, stencil);
    radii = support_radius(tr, K0, df, theta);
  }
  const double excess = K0.empty() ? 0.0 : cone_excess(radii);
  // The distance field does not wrap, so support touching the periodic seam
  // voids the cone check.
  bool seam = false;
  if (boundary == Boundary::Periodic) {
    for (const auto& st : tr.states) {
      double peak = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) peak = std::max(peak, st.u.at(i).norm());
      for (std::size_t i = 0; i < g.size() && !seam && peak > 0.0; ++i) {
        const auto idx = g.multi_index(i);
        bool edge = false;
        for (std::size_t k = 0; k < idx.size(); ++k) edge = edge || idx[k] == 0 || idx[k] + 1 == g.dims()[k];
        seam = edge && st.u.at(i).norm() > theta * peak;
      }
    }
  }
  const bool pass = excess <= slack && !seam;
  const TrajectoryExport files = save_trajectory(tr, radii, ctx.out, "trajectory");

  json results;
  results["symbol"] = sym.name();
  results["boundary"] = boundary == Boundary::Periodic ? "periodic" : "compact";
  results["dt"] = tr.dt;
  results["cfl_limit"] = json_number(op.cfl_limit());
  results["steps"] = tr.steps;
  results["max_relative_energy_drift"] = tr.max_relative_drift;
  results["support_nodes_at_t0"] = K0.size();
  results["cone_excess"] = json_number(excess);
  results["cone_slack"] = slack;
  results["support_reached_seam"] = seam;
  results["radius"] = json::array();
  for (const auto& r : radii) results["radius"].push_back({{"t", r.t}, {"radius", ext_json(r.radius)}});
  results["files"] = {files.manifest.filename().string(), files.diagnostics.filename().string()};
  const int code = pass ? kExitPass : kExitVerificationFail;
  write_report(ctx, "propagate", results, pass ? "pass" : "fail", code);
  return code;
}

int cmd_wave2(RunContext& ctx) {
  Config& c = ctx.config;
  c.check_known(keys({"T", "dt", "cfl_fraction", "center", "sigma", "velocity", "drift_tol", "frames", "refine"}));
  const SymbolField sym = load_symbol_source(c, "transport", true);
  const Grid& g = sym.grid();
  const SkewOperator op = discretise_skew(doubled(sym));
  const double T = c.get_double("T", 1.0);
  if (!(T > 0.0)) throw ConfigError("key 'T': must be positive");
  double dt = c.get_double("dt", 0.0);
  if (dt == 0.0) dt = c.get_double("cfl_fraction", kDefaultCflFraction) * op.cfl_limit();
  const double h = *std::max_element(g.spacing().begin(), g.spacing().end());
  const Vec centre = point_or(c, "center", box_centre(g));
  const double sigma = c.get_double("sigma", 6.0 * h);
  const double velocity = c.get_double("velocity", 0.0);
  const double tol = c.get_double("drift_tol", 1e-6);
  const long frames = std::max(1L, c.get_int("frames", 50));

  const auto bump = [&](double scale) {
    return VectorField::from_function(g, sym.r(), 1, [&, scale](const Vec& x) {
      return CVec::Constant(static_cast<Eigen::Index>(sym.r()), scale * gaussian(x, centre, sigma));
    });
  };
  const auto steps = static_cast<std::size_t>(std::ceil(T / dt - 1e-12));
  const SecondOrderTrajectory tr = wave_second_order(sym, bump(1.0), bump(velocity), T, dt, Boundary::Periodic,
                                                     std::max<std::size_t>(1, steps / static_cast<std::size_t>(frames)));
  fs::create_directories(ctx.out);
  {
    std::ofstream csv(ctx.out / "wave2.csv");
    csv << "t,energy,u_norm\n" << std::setprecision(17);
    for (std::size_t k = 0; k < tr.times.size(); ++k)
      csv << tr.times[k] << ',' << tr.energy[k] << ',' << std::sqrt(energy(tr.u[k])) << '\n';
  }
  save_field(tr.u.back(), ctx.out / "u_final.sfpf");
  const bool pass = tr.max_relative_drift <= tol;
  json results;
  results["symbol"] = sym.name();
  results["dt"] = tr.dt;
  results["cfl_limit"] = op.cfl_limit();
  results["max_relative_energy_drift"] = tr.max_relative_drift;
  results["drift_tol"] = tol;
  results["files"] = {"wave2.csv", "u_final.sfpf"};
  const int code = pass ? kExitPass : kExitVerificationFail;
  write_report(ctx, "wave2", results, pass ? "pass" : "fail", code);
  return code;
}

int cmd_flowapprox(RunContext& ctx) {
  Config& c = ctx.config;
  c.check_known(keys({"N", "eps", "pieces", "start", "weight", "step"}));
  c.get_int("seed", 0);
  // Axis-field instance under the diagonal shift; `symbol` is fixed.
  GalleryParams p = gallery_params(c);
  p.n = 2;
  const SymbolField d = make_gallery_symbol("diagonal_shift", p);
  const std::vector<std::size_t> Ns = c.get_sizes("N", {25, 50, 100, 200});
  const double eps = c.get_double("eps", 0.01);
  const long pieces = c.get_int("pieces", 3200);
  if (pieces < 1) throw ConfigError("key 'pieces': must be positive");
  const Vec start = point_or(c, "start", Vec::Constant(2, -0.5));
  const std::string weight = c.get_string("weight", "cos");
  if (weight != "cos" && weight != "one") throw ConfigError("key 'weight': expected cos or one");
  FlowApproxOptions opts;
  opts.step = c.get_double("step", opts.step);

  const auto w = [weight](const Vec& x) { return weight == "one" ? 1.0 : (3.0 + std::cos(x(0)) * std::cos(x(1))) / 4.0; };
  std::vector<VectorFn> fields;
  for (int axis = 0; axis < 2; ++axis)
    for (double sign : {1.0, -1.0})
      fields.push_back([=](const Vec& x) {
        Vec v = Vec::Zero(2);
        v(axis) = sign * w(x);
        return v;
      });
  const VectorFieldSet set = make_field_set(d, fields);

  // gamma: RK4 staircase alternating fields 0 and 2 on pieces of length 1/pieces.
  Curve gamma;
  Vec x = start;
  gamma.times.push_back(0.0);
  gamma.points.push_back(x);
  const int sub = 4;
  const double hs = 1.0 / static_cast<double>(pieces * sub);
  for (long k = 0; k < pieces; ++k) {
    const VectorFn& X = fields[k % 2 ? 2 : 0];
    for (int s = 0; s < sub; ++s) {
      const Vec k1 = X(x), k2 = X(x + 0.5 * hs * k1), k3 = X(x + 0.5 * hs * k2), k4 = X(x + hs * k3);
      x += hs / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      d.grid().require_contains(x, "flowapprox: staircase");
      gamma.times.push_back(static_cast<double>(k * sub + s + 1) * hs);
      gamma.points.push_back(x);
    }
  }

  fs::create_directories(ctx.out);
  std::ofstream table(ctx.out / "flowapprox.csv");
  table << "N,endpoint_error,bound,kappa,lipschitz,within_bound\n" << std::setprecision(17);
  bool pass = set.all_subunit();
  double previous = std::numeric_limits<double>::infinity();
  json rows = json::array();
  for (std::size_t N : Ns) {
    const FlowApproximation fa = approx_by_flows(d, gamma, set, N, eps, start, opts);
    table << N << ',' << fa.endpoint_error << ',' << fa.bound << ',' << fa.kappa << ',' << fa.lipschitz << ','
          << (fa.within_bound ? 1 : 0) << '\n';
    write_flow_csv(fa.delta, ctx.out / ("flow_N" + std::to_string(N) + ".csv"));
    pass = pass && fa.within_bound && fa.endpoint_error <= previous;
    previous = fa.endpoint_error;
    rows.push_back({{"N", N}, {"endpoint_error", fa.endpoint_error}, {"bound", fa.bound}, {"within_bound", fa.within_bound}});
  }
  json results;
  results["fields_subunit"] = set.all_subunit();
  results["lipschitz"] = set.lipschitz;
  results["sweep"] = rows;
  results["files"] = {"flowapprox.csv"};
  const int code = pass ? kExitPass : kExitVerificationFail;
  write_report(ctx, "flowapprox", results, pass ? "pass" : "fail", code);
  return code;
}

int cmd_mollify(RunContext& ctx) {
  Config& c = ctx.config;
  c.check_known(keys({"eps", "k_lower", "k_upper", "center", "radius"}));
  const SymbolField sym = load_symbol_source(c, "variable_transport");
  const Grid& g = sym.grid();
  const auto n = static_cast<Eigen::Index>(g.ndim());
  const std::vector<double> eps_list = c.get_doubles("eps", {0.4, 0.2, 0.1, 0.05});
  const Vec lo = g.lower(), hi = g.upper();
  const Vec kl = point_or(c, "k_lower", lo + 0.25 * (hi - lo));
  const Vec ku = point_or(c, "k_upper", lo + 0.75 * (hi - lo));
  const Box K{kl, ku};
  const Vec centre = point_or(c, "center", box_centre(g));
  const double radius = c.get_double("radius", 0.2 * (hi - lo).minCoeff());

  // Smooth compactly supported test function and the indicator of K.
  const VectorField f = VectorField::from_function(g, sym.r(), 1, [&](const Vec& x) {
    const double t = (x - centre).norm() / radius;
    return CVec::Constant(static_cast<Eigen::Index>(sym.r()), t < 1.0 ? std::exp(-1.0 / (1.0 - t * t)) : 0.0);
  });
  const auto dist_to_K = [&](const Vec& x) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      const double e = std::max({K.lower(k) - x(k), x(k) - K.upper(k), 0.0});
      s += e * e;
    }
    return std::sqrt(s);
  };
  const ScalarField ind = ScalarField::from_function(g, 1, 1, [&](const Vec& x) { return K.contains(x) ? 1.0 : 0.0; });

  fs::create_directories(ctx.out);
  std::ofstream table(ctx.out / "mollify.csv");
  table << "eps,half_width_cells,support_growth,commutator_l2\n" << std::setprecision(17);
  bool growth_ok = true, monotone = true;
  double previous = std::numeric_limits<double>::infinity();
  json rows = json::array();
  for (double eps : eps_list) {
    const MollifierKernel kernel = make_kernel(g, eps);
    const ScalarField m = mollify(kernel, ind);
    double growth = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (m.at(i) != 0.0) growth = std::max(growth, dist_to_K(g.node(i)));
    const double comm = lp_norm(commutator_apply(sym, kernel, f), K, 2.0);
    growth_ok = growth_ok && growth <= eps;
    monotone = monotone && comm < previous;
    previous = comm;
    table << eps << ',' << kernel.half_width[0] << ',' << growth << ',' << comm << '\n';
    rows.push_back({{"eps", eps}, {"support_growth", growth}, {"commutator_l2", comm}, {"under_resolved", kernel.under_resolved}});
  }
  const bool pass = growth_ok && monotone;
  json results;
  results["symbol"] = sym.name();
  results["sweep"] = rows;
  results["support_growth_within_eps"] = growth_ok;
  results["commutator_strictly_decreasing"] = monotone;
  results["files"] = {"mollify.csv"};
  const int code = pass ? kExitPass : kExitVerificationFail;
  write_report(ctx, "mollify", results, pass ? "pass" : "fail", code);
  return code;
}

int cmd_gallery_list(RunContext& ctx) {
  ctx.config.check_known({"seed", "out"});
  ctx.config.get_int("seed", 0);
  json results = json::array();
  for (const auto& e : gallery_entries()) {
    std::cout << std::left << std::setw(20) << e.name << e.summary << '\n';
    results.push_back({{"name", e.name}, {"summary", e.summary}, {"ground_truth", e.ground_truth}});
  }
  write_report(ctx, "gallery list", results, "n/a", kExitPass);
  return kExitPass;
}

int cmd_gallery_export(RunContext& ctx, const std::string& name) {
  Config& c = ctx.config;
  c.check_known(kSymbolKeys);
  c.set_override("symbol=" + name);
  const SymbolField sym = load_symbol_source(c, name);
  const fs::path manifest = save_symbol(sym, ctx.out, name);
  json results;
  results["symbol"] = sym.name();
  results["manifest"] = manifest.filename().string();
  results["nodes"] = sym.grid().size();
  write_report(ctx, "gallery export", results, "n/a", kExitPass);
  return kExitPass;
}

}  // namespace subfinsler::cli
