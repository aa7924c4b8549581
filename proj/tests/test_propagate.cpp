#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "subfinsler/gallery.hpp"
#include "subfinsler/propagate.hpp"

using namespace subfinsler;

namespace {

// Periodic grid: `cells` nodes per axis covering [lo, hi) with no duplicated end.
Grid periodic(const std::vector<double>& lo, const std::vector<double>& hi, const std::vector<std::size_t>& cells) {
  std::vector<double> h;
  for (std::size_t k = 0; k < lo.size(); ++k) h.push_back((hi[k] - lo[k]) / static_cast<double>(cells[k]));
  return Grid(lo, h, cells);
}

// Distance on the circle of length L.
double wrap(double d, double L) {
  d = std::fmod(d, L);
  if (d < -0.5 * L) d += L;
  if (d > 0.5 * L) d -= L;
  return d;
}

double bump(double x, double c, double s) { return std::exp(-0.5 * (x - c) * (x - c) / (s * s)); }

VectorField random_field(const Grid& g, std::size_t m, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  VectorField u(g, m);
  for (auto& z : u.data()) z = cplx(nd(rng), nd(rng));
  return u;
}

cplx inner(const VectorField& a, const VectorField& b) {
  cplx s = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) s += std::conj(a.data()[i]) * b.data()[i];
  return s;
}

double l2_diff(const VectorField& a, const VectorField& b) {
  VectorField d = a;
  d += -1.0 * b;
  return std::sqrt(energy(d));
}

double dt_for(const SkewOperator& op) { return kDefaultCflFraction * op.cfl_limit(); }

SymbolField d_dx(const Grid& g) { return transport_1d(g, [](double) { return 1.0; }); }

}  // namespace

TEST_CASE("discrete generators are skew-Hermitian") {
  std::mt19937_64 rng(1);
  SUBCASE("diagonal shift, periodic and compact") {
    const Grid g = periodic({0.0, 0.0}, {1.0, 1.0}, {24, 20});
    for (Boundary b : {Boundary::Periodic, Boundary::Compact}) {
      const SkewOperator op = discretise_skew(diagonal_shift(2, g), b);
      const VectorField u = random_field(g, 2, rng), v = random_field(g, 2, rng);
      const cplx s = inner(op.apply_generator(u), v) + inner(u, op.apply_generator(v));
      CHECK(std::abs(s) < 1e-12 * std::sqrt(std::abs(inner(u, u) * inner(v, v))) * 1e3);
    }
  }
  SUBCASE("doubled grushin with a variable coefficient") {
    const Grid g = periodic({-0.25, -0.5}, {1.25, 0.5}, {48, 16});
    const SymbolField s = doubled(grushin_rational(3, g, 1.0).symbol);
    const SkewOperator op = discretise_skew(s, Boundary::Periodic);
    CHECK(op.fibre() == 3);
    const VectorField u = random_field(g, 3, rng), v = random_field(g, 3, rng);
    const cplx pair = inner(op.apply_generator(u), v) + inner(u, op.apply_generator(v));
    CHECK(std::abs(pair) < 1e-9 * std::sqrt(std::abs(inner(u, u) * inner(v, v))));
  }
  SUBCASE("zero symbol gives the zero operator") {
    const Grid g = periodic({0.0}, {1.0}, {16});
    const SymbolField z = doubled(transport_1d(g, [](double) { return 0.0; }));
    const SkewOperator op = discretise_skew(z);
    const VectorField u = random_field(g, 2, rng);
    CHECK(energy(op.apply(u)) == 0.0);
    CHECK(op.max_speed() == 0.0);
  }
}

TEST_CASE("doubled d/dx differentiates to fourth order") {
  std::vector<double> errors;
  for (std::size_t n : {32u, 64u}) {
    const Grid g = periodic({0.0}, {2.0 * std::numbers::pi}, {n});
    const SkewOperator op = discretise_skew(doubled(d_dx(g)));
    const VectorField f = VectorField::from_function(g, 2, 1, [](const Vec& x) {
      CVec v(2);
      v << std::sin(x(0)), 0.0;
      return v;
    });
    // (f, 0) -> (D+ 0, D f) = (0, cos).
    const VectorField out = op.apply(f);
    double err = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      err = std::max(err, std::abs(out.at(i)(0)));
      err = std::max(err, std::abs(out.at(i)(1) - std::cos(g.node(i)(0))));
    }
    errors.push_back(err);
  }
  CHECK(errors[0] / errors[1] > 14.0);
}

TEST_CASE("non-self-adjoint symbols are rejected") {
  const Grid g = periodic({0.0}, {1.0}, {16});
  CHECK_THROWS_AS(discretise_skew(d_dx(g)), NotSelfAdjointError);
  const Grid g2 = periodic({0.0, 0.0}, {1.0, 1.0}, {8, 8});
  CHECK_THROWS_AS(discretise_skew(riemannian(g2, Mat(Mat::Identity(2, 2)))), NotSelfAdjointError);
  // A skew principal part with an inconsistent zeroth-order term.
  const SymbolField bad(g, 1, 1, {Coefficient::analytic(1, 1, [](const Vec& x) { return CMat::Constant(1, 1, cplx(0.0, x(0))); })},
                        Coefficient::constant(CMat::Zero(1, 1)));
  CHECK_THROWS_AS(discretise_skew(bad), NotSelfAdjointError);
}

TEST_CASE("evolution basics") {
  const Grid g = periodic({0.0, 0.0}, {2.0, 2.0}, {32, 32});
  const SkewOperator op = discretise_skew(diagonal_shift(2, g));
  const double dt = dt_for(op);
  SUBCASE("zero stays zero") {
    const Trajectory tr = evolve(op, VectorField(g, 2), 0.5, dt);
    for (const auto& st : tr.states) CHECK(st.energy == 0.0);
  }
  SUBCASE("CFL violation") {
    try {
      evolve(op, VectorField(g, 2), 0.5, 2.0 * op.cfl_limit());
      FAIL("expected CflError");
    } catch (const CflError& e) {
      CHECK(e.max_dt() == op.cfl_limit());
    }
  }
  SUBCASE("states are saved with strictly increasing times") {
    EvolveOptions opts;
    opts.save_every = 3;
    const Trajectory tr = evolve(op, VectorField(g, 2), 0.5, dt, opts);
    CHECK(tr.states.back().t == 0.5);
    for (std::size_t i = 1; i < tr.states.size(); ++i) CHECK(tr.states[i].t > tr.states[i - 1].t);
    CHECK(tr.states.size() == (tr.steps + 2) / 3 + (tr.steps % 3 ? 1 : 0));
  }
  SUBCASE("shape mismatch") { CHECK_THROWS_AS(evolve(op, VectorField(g, 3), 0.5, dt), PreconditionError); }
}

TEST_CASE("diagonal shift translates the first component") {
  const double L = 4.0;
  const Grid g = periodic({0.0, 0.0}, {L, L}, {128, 128});
  const SkewOperator op = discretise_skew(diagonal_shift(2, g));
  const auto init = [&](double t) {
    return VectorField::from_function(g, 2, 1, [&](const Vec& x) {
      CVec v(2);
      v << bump(wrap(x(0) - 1.5 - t, L), 0.0, 0.25) * bump(x(1), 2.0, 0.3), 0.0;
      return v;
    });
  };
  const VectorField u0 = init(0.0);
  const Trajectory tr = evolve(op, u0, 1.0, dt_for(op), {.save_every = 1000});
  CHECK(l2_diff(tr.states.back().u, init(1.0)) <= 0.01 * std::sqrt(energy(u0)));
  CHECK(tr.max_relative_drift <= 1e-6);
}

TEST_CASE("doubled d/dx splits into d'Alembert movers") {
  const double L = 8.0;
  const Grid g = periodic({0.0}, {L}, {512});
  const SkewOperator op = discretise_skew(doubled(d_dx(g)));
  const auto f = [&](double x) { return bump(wrap(x - 4.0, L), 0.0, 0.3); };
  const VectorField u0 = VectorField::from_function(g, 2, 1, [&](const Vec& x) {
    CVec v(2);
    v << f(x(0)), 0.0;
    return v;
  });
  const double T = 1.5;
  const Trajectory tr = evolve(op, u0, T, dt_for(op), {.save_every = 100000});
  const VectorField exact = VectorField::from_function(g, 2, 1, [&](const Vec& x) {
    CVec v(2);
    v << 0.5 * (f(x(0) - T) + f(x(0) + T)), cplx(0.0, 0.5 * (f(x(0) + T) - f(x(0) - T)));
    return v;
  });
  CHECK(l2_diff(tr.states.back().u, exact) <= 1e-3 * std::sqrt(energy(u0)));
}

TEST_CASE("energy is preserved on periodic grids") {
  SUBCASE("diagonal shift") {
    const Grid g = periodic({0.0, 0.0}, {4.0, 4.0}, {64, 64});
    const SkewOperator op = discretise_skew(diagonal_shift(2, g));
    const VectorField u0 = VectorField::from_function(g, 2, 1, [](const Vec& x) {
      CVec v(2);
      v << bump(x(0), 2.0, 0.3) * bump(x(1), 2.0, 0.3), cplx(0.0, bump(x(0), 1.5, 0.4) * bump(x(1), 2.5, 0.3));
      return v;
    });
    CHECK(evolve(op, u0, 1.0, dt_for(op)).max_relative_drift <= 1e-6);
  }
  SUBCASE("doubled riemannian identity") {
    const Grid g = periodic({0.0, 0.0}, {4.0, 4.0}, {64, 64});
    const SkewOperator op = discretise_skew(doubled(riemannian(g, Mat(Mat::Identity(2, 2)))));
    CHECK(op.fibre() == 3);
    const VectorField u0 = VectorField::from_function(g, 3, 1, [](const Vec& x) {
      CVec v = CVec::Zero(3);
      v(0) = bump(x(0), 2.0, 0.3) * bump(x(1), 2.0, 0.3);
      return v;
    });
    CHECK(evolve(op, u0, 1.0, dt_for(op)).max_relative_drift <= 1e-6);
  }
  SUBCASE("doubled grushin") {
    const Grid g = periodic({-0.25, -0.5}, {1.25, 0.5}, {96, 64});
    const SkewOperator op = discretise_skew(doubled(grushin_rational(3, g, 1.0).symbol));
    const VectorField u0 = VectorField::from_function(g, 3, 1, [](const Vec& x) {
      CVec v = CVec::Zero(3);
      v(0) = bump(x(0), 0.5, 0.08) * bump(x(1), 0.0, 0.08);
      return v;
    });
    CHECK(evolve(op, u0, 1.0, dt_for(op)).max_relative_drift <= 1e-6);
  }
}

TEST_CASE("time reversal and linearity") {
  std::mt19937_64 rng(2);
  const Grid g = periodic({-0.25, -0.5}, {1.25, 0.5}, {48, 32});
  const SkewOperator op = discretise_skew(doubled(grushin_rational(2, g, 1.0).symbol));
  const auto smooth = [&](double cx, double cy) {
    return VectorField::from_function(g, 3, 1, [=](const Vec& x) {
      CVec v(3);
      v << bump(x(0), cx, 0.1) * bump(x(1), cy, 0.1), 0.0, cplx(0.0, 0.5 * bump(x(0), cx, 0.15) * bump(x(1), cy, 0.1));
      return v;
    });
  };
  const VectorField u0 = smooth(0.5, 0.0), v0 = smooth(0.3, 0.1);
  const double dt = dt_for(op);
  // RK4 is not exactly reversible; the round trip defect shrinks like dt^4.
  const auto round_trip = [&](double step) {
    const Trajectory fwd = evolve(op, u0, 0.6, step, {.save_every = 100000});
    EvolveOptions back;
    back.reverse = true;
    back.save_every = 100000;
    return l2_diff(evolve(op, fwd.states.back().u, 0.6, step, back).states.back().u, u0) / std::sqrt(energy(u0));
  };
  const double coarse = round_trip(2.0 * dt), fine = round_trip(dt);
  CHECK(fine <= 1e-6);
  CHECK(coarse / fine > 12.0);

  VectorField sum = u0;
  sum += v0;
  const VectorField a = evolve(op, u0, 0.4, dt, {.save_every = 100000}).states.back().u;
  const VectorField b = evolve(op, v0, 0.4, dt, {.save_every = 100000}).states.back().u;
  VectorField ab = a;
  ab += b;
  CHECK(l2_diff(evolve(op, sum, 0.4, dt, {.save_every = 100000}).states.back().u, ab) <= 1e-12 * std::sqrt(energy(sum)));
}

TEST_CASE("doubling is consistent with direct evolution on symmetric data") {
  // For self-adjoint D the doubled generator maps (f, f) to (Df, Df), so both
  // components follow e^{itD} f.
  const Grid g = periodic({0.0, 0.0}, {2.0, 2.0}, {32, 32});
  const SymbolField d = diagonal_shift(2, g);
  const SkewOperator direct = discretise_skew(d);
  const SkewOperator dbl = discretise_skew(doubled(d));
  const VectorField f = VectorField::from_function(g, 2, 1, [](const Vec& x) {
    CVec v(2);
    v << bump(x(0), 1.0, 0.2) * bump(x(1), 1.0, 0.2), cplx(0.0, bump(x(0), 0.8, 0.2) * bump(x(1), 1.2, 0.25));
    return v;
  });
  VectorField ff(g, 4);
  for (std::size_t i = 0; i < g.size(); ++i) {
    CVec v(4);
    v << f.at(i), f.at(i);
    ff.set(i, v);
  }
  const double dt = std::min(dt_for(direct), dt_for(dbl));
  const VectorField a = evolve(direct, f, 0.5, dt, {.save_every = 100000}).states.back().u;
  const VectorField b = evolve(dbl, ff, 0.5, dt, {.save_every = 100000}).states.back().u;
  double err = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    err = std::max(err, (b.at(i).head(2) - a.at(i)).norm());
    err = std::max(err, (b.at(i).tail(2) - a.at(i)).norm());
  }
  CHECK(err < 1e-10);
}

TEST_CASE("support radius follows the l1 cone") {
  const Grid g = periodic({-2.0, -2.0}, {2.0, 2.0}, {64, 64});
  const double h = g.spacing()[0];
  const SymbolField d = diagonal_shift(2, g);
  const SkewOperator op = discretise_skew(d);
  const double sigma = 4.0 * h;
  const VectorField u0 = VectorField::from_function(g, 2, 1, [&](const Vec& x) {
    CVec v(2);
    v << bump(x(0), -0.5, sigma) * bump(x(1), 0.0, sigma), 0.0;
    return v;
  });
  const auto K0 = threshold_support(u0, 1e-6);
  REQUIRE_FALSE(K0.empty());
  const DistanceField df = distance_field(d, K0, 1);
  const Trajectory tr = evolve(op, u0, 1.0, dt_for(op), {.save_every = 4});
  const auto radii = support_radius(tr, K0, df, 1e-6);
  CHECK(radii.front().radius.value() == 0.0);
  for (const auto& r : radii) {
    CAPTURE(r.t);
    CHECK(r.radius.value() <= r.t + h);
    CHECK(r.radius.value() >= r.t - h);
  }
  CHECK(cone_excess(radii) <= h);
  CHECK_THROWS_AS(support_radius(tr, {0}, df, 1e-6), PreconditionError);
}

TEST_CASE("compact mode refuses data near the boundary") {
  const Grid g = Grid::spanning({0.0}, {2.0}, {81});
  const SkewOperator op = discretise_skew(doubled(d_dx(g)), Boundary::Compact);
  const VectorField near = VectorField::from_function(g, 2, 1, [](const Vec& x) {
    CVec v(2);
    v << bump(x(0), 0.3, 0.05), 0.0;
    return v;
  });
  CHECK_THROWS_AS(evolve(op, near, 1.0, dt_for(op)), PreconditionError);
  const VectorField mid = VectorField::from_function(g, 2, 1, [](const Vec& x) {
    CVec v(2);
    v << (std::abs(x(0) - 1.0) < 0.3 ? std::exp(-1.0 / (1.0 - std::pow((x(0) - 1.0) / 0.3, 2))) : 0.0), 0.0;
    return v;
  });
  CHECK_NOTHROW(evolve(op, mid, 0.5, dt_for(op)));
}

TEST_CASE("second-order wave") {
  const double L = 8.0;
  const Grid g = periodic({0.0}, {L}, {512});
  const SymbolField D = d_dx(g);
  const double dt = dt_for(discretise_skew(doubled(D)));
  SUBCASE("zero data") {
    const auto tr = wave_second_order(D, VectorField(g, 1), VectorField(g, 1), 0.5, dt);
    for (const auto& u : tr.u) CHECK(energy(u) == 0.0);
  }
  SUBCASE("d'Alembert with zero velocity") {
    const auto f = [&](double x) { return bump(wrap(x - 4.0, L), 0.0, 0.3); };
    const VectorField f0 = VectorField::from_function(g, 1, 1, [&](const Vec& x) { return CVec::Constant(1, f(x(0))); });
    const double T = 1.0;
    const auto tr = wave_second_order(D, f0, VectorField(g, 1), T, dt, Boundary::Periodic, 100000);
    const VectorField exact = VectorField::from_function(g, 1, 1, [&](const Vec& x) {
      return CVec::Constant(1, 0.5 * (f(x(0) - T) + f(x(0) + T)));
    });
    CHECK(tr.times.back() == T);
    CHECK(l2_diff(tr.u.back(), exact) <= 1e-3 * std::sqrt(energy(f0)));
    CHECK(tr.max_relative_drift <= 1e-6);
  }
  SUBCASE("nonzero initial velocity") {
    // u0 = 0, u'(0) = g: u(t) = 1/2 (G(x+t) - G(x-t)) with G' = g.
    const auto G = [&](double x) { return std::erf((x - 4.0) / 0.4); };
    const auto gfun = [&](double x) { return 2.0 / (0.4 * std::sqrt(std::numbers::pi)) * std::exp(-std::pow(wrap(x - 4.0, L) / 0.4, 2)); };
    const VectorField g0 = VectorField::from_function(g, 1, 1, [&](const Vec& x) { return CVec::Constant(1, gfun(x(0))); });
    const double T = 0.8;
    const auto tr = wave_second_order(D, VectorField(g, 1), g0, T, dt, Boundary::Periodic, 100000);
    const VectorField exact = VectorField::from_function(g, 1, 1, [&](const Vec& x) {
      return CVec::Constant(1, 0.5 * (G(x(0) + T) - G(x(0) - T)));
    });
    CHECK(l2_diff(tr.u.back(), exact) <= 1e-3 * std::sqrt(energy(exact)));
  }
}
