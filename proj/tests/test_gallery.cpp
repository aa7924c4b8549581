#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "subfinsler/gallery.hpp"

using namespace subfinsler;

namespace {

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

std::vector<Vec> sweep2(int count) {
  std::vector<Vec> out;
  for (int k = 0; k < count; ++k) {
    const double t = 2.0 * std::numbers::pi * k / count;
    out.push_back(vec2(std::cos(t), std::sin(t)));
  }
  return out;
}

}  // namespace

TEST_CASE("diagonal shift") {
  const Grid g2 = Grid::spanning({-1.0, -1.0}, {1.0, 1.0}, {3, 3});
  CHECK(seminorm(diagonal_shift(2, g2), Vec::Zero(2), vec2(1.0, 0.0)) == 1.0);
  const Grid g1 = Grid::spanning({-1.0}, {1.0}, {3});
  const SymbolField d1 = diagonal_shift(1, g1);
  for (double xi : {-3.0, 0.5, 2.0}) CHECK(seminorm(d1, Vec::Zero(1), Vec::Constant(1, xi)) == doctest::Approx(std::abs(xi)));
  CHECK(std::abs(d1.a_at(0, Vec::Zero(1))(0, 0) - cplx(0.0, 1.0)) == 0.0);
  CHECK_THROWS_AS(diagonal_shift(0, g1), PreconditionError);
  CHECK_THROWS_AS(diagonal_shift(2, g1), PreconditionError);
}

TEST_CASE("riemannian symbols realise the metric norm") {
  const Grid g = Grid::spanning({-1.0, -1.0}, {1.0, 1.0}, {3, 3});
  for (const Vec& xi : sweep2(36)) {
    CHECK(seminorm(riemannian(g, Mat(Mat::Identity(2, 2))), Vec::Zero(2), xi) == doctest::Approx(1.0));
    CHECK(seminorm(riemannian(g, Mat(4.0 * Mat::Identity(2, 2))), Vec::Zero(2), xi) == doctest::Approx(2.0));
  }
  Mat an = Mat::Zero(2, 2);
  an.diagonal() << 1.0, 4.0;
  CHECK(seminorm(riemannian(g, an), Vec::Zero(2), vec2(0.0, 1.0)) == doctest::Approx(2.0));

  // A position-dependent metric, checked node by node against sqrt(xi^T G xi).
  const auto metric = [](const Vec& x) {
    Mat m(2, 2);
    m << 2.0 + x(0), 0.5 * x(1), 0.5 * x(1), 1.5;
    return m;
  };
  const SymbolField s = riemannian(g, metric);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Vec x = g.node(i);
    for (const Vec& xi : sweep2(12))
      CHECK(seminorm(s, x, xi) == doctest::Approx(std::sqrt(xi.dot(metric(x) * xi))).epsilon(1e-12));
  }
  Mat bad = Mat::Identity(2, 2);
  bad(1, 1) = -1.0;
  CHECK_THROWS_AS(riemannian(g, bad), PreconditionError);
}

TEST_CASE("subriemannian symbols") {
  const Grid g = Grid::spanning({-1.0, -1.0}, {1.0, 1.0}, {5, 5});
  const SymbolField dx = subriemannian(g, {[](const Vec&) { return Vec(Vec::Unit(2, 0)); }});
  CHECK(seminorm(dx, Vec::Zero(2), vec2(-0.7, 5.0)) == doctest::Approx(0.7));

  GalleryParams p;
  p.dims = {5, 5};
  const SymbolField gp = make_gallery_symbol("grushin_pair", p);
  for (std::size_t i = 0; i < gp.grid().size(); ++i) {
    const Vec x = gp.grid().node(i);
    CHECK(seminorm(gp, x, vec2(0.0, 1.0)) == doctest::Approx(std::abs(x(0))));
  }
  const SymbolField frame = subriemannian(g, {[](const Vec&) { return Vec(Vec::Unit(2, 0)); },
                                              [](const Vec&) { return Vec(Vec::Unit(2, 1)); }});
  for (const Vec& xi : sweep2(24)) CHECK(seminorm(frame, vec2(0.3, 0.2), 3.0 * xi) == doctest::Approx(3.0));
  CHECK_THROWS_AS(subriemannian(g, {[](const Vec&) { return Vec(Vec::Unit(3, 0)); }}), PreconditionError);
  CHECK_THROWS_AS(subriemannian(g, {}), PreconditionError);
}

TEST_CASE("stern-brocot enumeration of the window") {
  const auto q = stern_brocot_window(9);
  const std::vector<std::pair<long, long>> expected = {{0, 1}, {1, 1}, {1, 2}, {1, 3}, {2, 3},
                                                       {1, 4}, {2, 5}, {3, 5}, {3, 4}};
  CHECK(q == expected);
  const auto many = stern_brocot_window(200);
  for (std::size_t i = 0; i < many.size(); ++i) {
    CHECK(std::gcd(many[i].first, many[i].second) == 1);
    for (std::size_t j = 0; j < i; ++j) CHECK(many[i] != many[j]);
  }
}

TEST_CASE("union measure") {
  CHECK(union_measure({{0.0, 0.5}, {0.25, 0.75}}, 0.0, 1.0) == doctest::Approx(0.75));
  CHECK(union_measure({{-1.0, 0.25}, {0.9, 3.0}}, 0.0, 1.0) == doctest::Approx(0.35));
  CHECK(union_measure({{0.2, 0.3}, {0.5, 0.6}}, 0.0, 1.0) == doctest::Approx(0.2));
  CHECK(union_measure({}, 0.0, 1.0) == 0.0);
  CHECK(union_measure({{0.0, 1.0}}, 1.0, 0.0) == 0.0);
}

TEST_CASE("grushin rational intervals and measure") {
  const Grid g = gallery_grid("grushin_rational", {});
  double previous = 0.0;
  for (std::size_t m : {1u, 2u, 5u, 12u, 30u}) {
    const GrushinRational gr = grushin_rational(m, g);
    REQUIRE(gr.intervals.size() == m);
    for (std::size_t i = 0; i < m; ++i) {
      const double qv = static_cast<double>(gr.rationals[i].first) / static_cast<double>(gr.rationals[i].second);
      CHECK(gr.intervals[i].lo == doctest::Approx(qv - std::ldexp(1.0, -static_cast<int>(i) - 3)));
      CHECK(gr.intervals[i].hi == doctest::Approx(qv + std::ldexp(1.0, -static_cast<int>(i) - 3)));
    }
    const double meas = union_measure(gr.intervals, 0.0, 1.0);
    CHECK(meas <= 0.5);
    CHECK(meas >= previous);
    previous = meas;
    // Independent oracle: midpoint counting on a fine partition.
    const int samples = 400000;
    int inside = 0;
    for (int k = 0; k < samples; ++k) {
      const double x = (k + 0.5) / samples;
      for (const auto& iv : gr.intervals)
        if (x > iv.lo && x < iv.hi) {
          ++inside;
          break;
        }
    }
    CHECK(meas == doctest::Approx(static_cast<double>(inside) / samples).epsilon(1e-4));
  }
  CHECK_THROWS_AS(grushin_rational(0, g), PreconditionError);
}

TEST_CASE("grushin rational u vanishes exactly off A_m and the frame is orthogonal") {
  const GrushinRational gr = grushin_rational(6, gallery_grid("grushin_rational", {}));
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> ux(-0.25, 1.25);
  for (int k = 0; k < 2000; ++k) {
    const double x = ux(rng);
    bool in_a = false;
    for (const auto& iv : gr.intervals) in_a = in_a || (x > iv.lo && x < iv.hi);
    const double u = gr.u(vec2(x, 0.0));
    if (!in_a) CHECK(u == 0.0);
    if (in_a) CHECK(u > 0.0);
    CHECK(u <= 1.0);
  }
  for (double u : {0.0, 0.1, 0.5, 1.0}) {
    const Vec X = grushin_X(u), Y = grushin_Y(u);
    CHECK(std::abs(X.dot(Y)) < 1e-15);
    CHECK(X.norm() == doctest::Approx(1.0));
    CHECK(Y.norm() == doctest::Approx(u / (2.0 * std::sqrt(1.0 + u * u))));
  }
  // seminorm^2 = <xi, H xi>
  const Grid& g = gr.symbol.grid();
  for (std::size_t i = 0; i < g.size(); i += 7) {
    const Vec p = g.node(i);
    const double u = gr.u(p);
    for (const Vec& xi : sweep2(10)) {
      const double p2 = std::pow(seminorm(gr.symbol, p, xi), 2);
      CHECK(p2 == doctest::Approx(xi.dot(grushin_H(u) * xi)).epsilon(1e-12));
    }
  }
}

TEST_CASE("grushin rational dual norms") {
  const GrushinRational gr = grushin_rational(4, gallery_grid("grushin_rational", {}));
  const Vec off = vec2(1.2, 0.0);  // outside every interval
  const Vec on = vec2(0.5, 0.0);   // centre of the third interval
  REQUIRE(gr.u(off) == 0.0);
  REQUIRE(gr.u(on) == doctest::Approx(1.0));
  CHECK(seminorm(gr.symbol, off, vec2(0.6, 0.8)) == doctest::Approx(0.6));
  CHECK(dual_norm(gr.symbol, off, vec2(0.0, 1.0)).is_infinite());
  CHECK(dual_norm(gr.symbol, off, vec2(1.0, 0.0)).value() == doctest::Approx(1.0));
  CHECK(dual_norm(gr.symbol, on, vec2(1.0, 0.0)).value() == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("every gallery symbol is adjoint-symmetric, homogeneous and subadditive") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd;
  for (const auto& entry : gallery_entries()) {
    CAPTURE(entry.name);
    GalleryParams p;
    const SymbolField s = make_gallery_symbol(entry.name, p);
    const SymbolField adj = formal_adjoint(s);
    const Grid& g = s.grid();
    const std::size_t n = g.ndim();
    for (std::size_t i = 0; i < g.size(); i += 97) {
      const Vec x = g.node(i);
      for (int t = 0; t < 4; ++t) {
        Vec xi(n), eta(n);
        for (std::size_t k = 0; k < n; ++k) {
          xi(static_cast<Eigen::Index>(k)) = nd(rng);
          eta(static_cast<Eigen::Index>(k)) = nd(rng);
        }
        const double pxi = seminorm(s, x, xi);
        CHECK(seminorm(adj, x, xi) == doctest::Approx(pxi).epsilon(1e-12));
        for (double c : {-2.0, -1.0, 0.5, 3.0}) CHECK(seminorm(s, x, c * xi) == doctest::Approx(std::abs(c) * pxi));
        CHECK(seminorm(s, x, xi + eta) <= pxi + seminorm(s, x, eta) + 1e-12);
      }
    }
  }
  CHECK_THROWS_AS(make_gallery_symbol("nope", {}), PreconditionError);
}

TEST_CASE("gallery parameters override the default box") {
  GalleryParams p;
  p.n = 3;
  p.lower = {0.0, 0.0, 0.0};
  p.upper = {1.0, 2.0, 3.0};
  p.dims = {3, 5, 7};
  const Grid g = gallery_grid("diagonal_shift", p);
  CHECK(g.ndim() == 3);
  CHECK(g.dims() == std::vector<std::size_t>{3, 5, 7});
  CHECK(g.upper()(2) == doctest::Approx(3.0));
  p.metric_diag = {1.0, 4.0, 9.0};
  const SymbolField r = make_gallery_symbol("riemannian", p);
  Vec xi = Vec::Unit(3, 2);
  CHECK(seminorm(r, g.node(0), xi) == doctest::Approx(3.0));
}
