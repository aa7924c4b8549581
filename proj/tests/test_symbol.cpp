#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "subfinsler/gallery.hpp"
#include "subfinsler/symbol.hpp"

using namespace subfinsler;

namespace {

constexpr double kPi = std::numbers::pi;

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Vec vec3(double a, double b, double c) {
  Vec v(3);
  v << a, b, c;
  return v;
}

// Grushin-type pair built from (X, Y) with u(x, y) = x.
SymbolField grushin_line(const Grid& g) {
  return subriemannian(g, {[](const Vec& x) { return grushin_X(x(0)); },
                           [](const Vec& x) { return grushin_Y(x(0)); }});
}

SymbolField constant_symbol(const Grid& g, std::size_t r, std::size_t s, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  std::vector<Coefficient> a;
  for (std::size_t j = 0; j < g.ndim(); ++j) {
    CMat m(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(r));
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = cplx(nd(rng), nd(rng));
    a.push_back(Coefficient::constant(m));
  }
  return SymbolField(g, r, s, std::move(a),
                     Coefficient::constant(CMat::Zero(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(r))));
}

// sup over a dense sweep of |<eta, v>| / P(eta); exact up to sweep resolution.
double brute_dual_2d(const SymbolField& sym, const Vec& x, const Vec& v, int count) {
  double best = 0.0;
  for (int k = 0; k < count; ++k) {
    const double t = kPi * k / count;
    const Vec eta = vec2(std::cos(t), std::sin(t));
    const double p = seminorm(sym, x, eta);
    best = std::max(best, std::abs(eta.dot(v)) / p);
  }
  return best;
}

const Grid kSquare = Grid::spanning({-1.0, -1.0}, {1.0, 1.0}, {5, 5});

}  // namespace

TEST_CASE("op_norm agrees with a full SVD") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  for (auto [r, c] : {std::pair{1, 1}, {1, 4}, {4, 1}, {2, 2}, {3, 2}, {4, 5}}) {
    CMat m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = cplx(nd(rng), nd(rng));
    Eigen::JacobiSVD<CMat> svd(m);
    CHECK(op_norm(m) == doctest::Approx(svd.singularValues()(0)).epsilon(1e-12));
  }
  CHECK(op_norm(CMat::Zero(2, 2)) == 0.0);
}

TEST_CASE("coefficient kinds evaluate consistently") {
  const Grid g = Grid::spanning({0.0}, {1.0}, {5});
  const auto fn = [](const Vec& x) { return CMat::Constant(1, 2, cplx(x(0), -2.0 * x(0))); };
  const Coefficient an = Coefficient::analytic(1, 2, fn);
  const Coefficient gr = Coefficient::gridded(MatrixField::from_function(g, 1, 2, fn));
  Vec x(1);
  x << 0.37;
  CHECK((an(x) - gr(x)).norm() < 1e-14);  // affine data is reproduced by interpolation
  const CMat na = an.negated_adjoint()(x);
  CHECK(na.rows() == 2);
  CHECK((na + fn(x).adjoint()).norm() == 0.0);
  CHECK_THROWS_AS(Coefficient::gridded(MatrixField(g, 1, 2))(Vec::Constant(1, 2.0)), DomainError);
}

TEST_CASE("symbol construction checks shapes") {
  const Grid g = Grid::spanning({0.0}, {1.0}, {3});
  CHECK_THROWS_AS(SymbolField(g, 1, 1, {}, Coefficient::constant(CMat::Zero(1, 1))), PreconditionError);
  CHECK_THROWS_AS(SymbolField(g, 2, 1, {Coefficient::constant(CMat::Zero(1, 1))}, Coefficient::constant(CMat::Zero(1, 2))),
                  PreconditionError);
}

TEST_CASE("diagonal shift seminorm is the max norm") {
  const SymbolField d = diagonal_shift(2, kSquare);
  const Vec x = Vec::Zero(2);
  CHECK(seminorm(d, x, vec2(3.0, -4.0)) == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(seminorm(d, x, Vec::Zero(2)) == 0.0);
  const Grid g3 = Grid::spanning({-1.0, -1.0, -1.0}, {1.0, 1.0, 1.0}, {3, 3, 3});
  CHECK(seminorm(diagonal_shift(3, g3), Vec::Zero(3), vec3(0.5, -2.5, 1.0)) == doctest::Approx(2.5));
}

TEST_CASE("diagonal shift dual norm is the l1 norm") {
  const SymbolField d = diagonal_shift(2, kSquare);
  const Vec x = Vec::Zero(2);
  CHECK(dual_norm(d, x, vec2(1.0, 1.0)).value() == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(dual_norm(d, x, vec2(0.3, -0.7)).value() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(dual_norm(d, x, Vec::Zero(2)).value() == 0.0);

  const Grid g3 = Grid::spanning({-1.0, -1.0, -1.0}, {1.0, 1.0, 1.0}, {3, 3, 3});
  const SymbolField d3 = diagonal_shift(3, g3);
  CHECK(dual_norm(d3, Vec::Zero(3), vec3(1.0, 1.0, 1.0)).value() == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(dual_norm(d3, Vec::Zero(3), vec3(0.2, -1.0, 0.5)).value() == doctest::Approx(1.7).epsilon(1e-6));
}

TEST_CASE("grushin dual norms depend on whether u vanishes") {
  const SymbolField s = grushin_line(kSquare);
  const Vec p0 = vec2(0.0, 0.3);
  const Vec p1 = vec2(0.6, 0.3);
  CHECK(dual_norm(s, p0, vec2(0.0, 1.0)).is_infinite());
  CHECK(dual_norm(s, p0, vec2(1.0, 0.0)).value() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(dual_norm(s, p1, vec2(1.0, 0.0)).value() == doctest::Approx(2.0).epsilon(1e-9));
  // The Gram matrix of (X, Y) is H.
  for (double u : {0.0, 0.4, -1.3}) {
    const Vec X = grushin_X(u), Y = grushin_Y(u);
    const Mat gram = X * X.transpose() + Y * Y.transpose();
    CHECK((gram - grushin_H(u)).norm() < 1e-14);
  }
}

TEST_CASE("kernel decomposition") {
  SUBCASE("elliptic symbol has trivial kernel") {
    const auto k = kernel_decomposition(riemannian(kSquare, Mat(Mat::Identity(2, 2))), Vec::Zero(2));
    CHECK(k.z_basis.cols() == 0);
    CHECK(k.f_basis.cols() == 2);
  }
  SUBCASE("grushin at u = 0 has Z = span{dy}") {
    const auto k = kernel_decomposition(grushin_line(kSquare), vec2(0.0, 0.5));
    REQUIRE(k.z_basis.cols() == 1);
    CHECK(std::abs(std::abs(k.z_basis(1, 0)) - 1.0) < 1e-12);
    REQUIRE(k.f_basis.cols() == 1);
    CHECK(std::abs(std::abs(k.f_basis(0, 0)) - 1.0) < 1e-12);
  }
  SUBCASE("zero symbol has full kernel") {
    const SymbolField z(kSquare, 1, 1, {Coefficient::constant(CMat::Zero(1, 1)), Coefficient::constant(CMat::Zero(1, 1))},
                        Coefficient::constant(CMat::Zero(1, 1)));
    const auto k = kernel_decomposition(z, Vec::Zero(2));
    CHECK(k.z_basis.cols() == 2);
    CHECK(k.f_basis.cols() == 0);
    CHECK(dual_norm(z, Vec::Zero(2), Vec::Zero(2)).value() == 0.0);
    CHECK(dual_norm(z, Vec::Zero(2), vec2(1e-3, 0.0)).is_infinite());
  }
}

TEST_CASE("dual norm matches a dense sweep for random non-hilbertian symbols") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 6; ++trial) {
    const SymbolField s = constant_symbol(kSquare, 2, 3, rng);
    CHECK_FALSE(s.hilbertian());
    const Vec v = vec2(nd(rng), nd(rng));
    const double oracle = brute_dual_2d(s, Vec::Zero(2), v, 200000);
    CHECK(dual_norm(s, Vec::Zero(2), v).value() == doctest::Approx(oracle).epsilon(1e-6));
  }
}

TEST_CASE("seminorm and dual norm properties") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  const Grid g3 = Grid::spanning({-1.0, -1.0, -1.0}, {1.0, 1.0, 1.0}, {3, 3, 3});
  for (int trial = 0; trial < 4; ++trial) {
    const SymbolField s = constant_symbol(g3, 2, 2, rng);
    const Vec x = Vec::Zero(3);
    const Vec xi = vec3(nd(rng), nd(rng), nd(rng));
    const Vec eta = vec3(nd(rng), nd(rng), nd(rng));
    const Vec v = vec3(nd(rng), nd(rng), nd(rng));
    const Vec w = vec3(nd(rng), nd(rng), nd(rng));
    const double lambda = -2.5;
    CHECK(seminorm(s, x, lambda * xi) == doctest::Approx(std::abs(lambda) * seminorm(s, x, xi)));
    CHECK(seminorm(s, x, xi + eta) <= seminorm(s, x, xi) + seminorm(s, x, eta) + 1e-12);
    const double pv = dual_norm(s, x, v).value();
    const double pw = dual_norm(s, x, w).value();
    CHECK(dual_norm(s, x, lambda * v).value() == doctest::Approx(std::abs(lambda) * pv).epsilon(1e-6));
    CHECK(dual_norm(s, x, v + w).value() <= (pv + pw) * (1.0 + 1e-6));
    CHECK(std::abs(xi.dot(v)) <= seminorm(s, x, xi) * pv * (1.0 + 1e-6));
  }
}

TEST_CASE("formal adjoint") {
  SUBCASE("d/dx maps to -d/dx") {
    const Grid g = Grid::spanning({0.0}, {2.0}, {9});
    const SymbolField d = transport_1d(g, [](double) { return 1.0; });
    const SymbolField a = formal_adjoint(d);
    for (std::size_t i = 0; i < g.size(); ++i) {
      CHECK(std::abs(a.a_at(0, g.node(i))(0, 0) + 1.0) < 1e-14);
      CHECK(std::abs(a.b_at(g.node(i))(0, 0)) < 1e-12);
    }
  }
  SUBCASE("diagonal shift is formally self-adjoint") {
    const SymbolField d = diagonal_shift(2, kSquare);
    const SymbolField a = formal_adjoint(d);
    for (double px : {-0.5, 0.25}) {
      const Vec x = vec2(px, 0.1);
      for (std::size_t j = 0; j < 2; ++j) CHECK((a.a_at(j, x) - d.a_at(j, x)).norm() < 1e-14);
      CHECK(a.b_at(x).norm() < 1e-12);
    }
  }
  SUBCASE("x d/dx maps to -x d/dx - 1 and passes a quadrature check") {
    const std::size_t nodes = 401;
    const Grid g = Grid::spanning({0.0}, {2.0}, {nodes});
    const SymbolField d = transport_1d(g, [](double x) { return x; });
    const SymbolField a = formal_adjoint(d);
    for (std::size_t i = 0; i < g.size(); i += 37) {
      const Vec x = g.node(i);
      CHECK(std::abs(a.a_at(0, x)(0, 0) + x(0)) < 1e-12);
      CHECK(std::abs(a.b_at(x)(0, 0) + 1.0) < 1e-9);
    }
    // Bumps supported inside ]0, 2[; <<Df, g>> = <<f, D+ g>> by the trapezoid rule.
    const auto bump = [](double x, double c, double w) {
      const double s = (x - c) / w;
      return std::abs(s) < 1.0 ? std::exp(-1.0 / (1.0 - s * s)) : 0.0;
    };
    const auto dbump = [&](double x, double c, double w) {
      const double s = (x - c) / w;
      return std::abs(s) < 1.0 ? bump(x, c, w) * (-2.0 * s / ((1.0 - s * s) * (1.0 - s * s))) / w : 0.0;
    };
    const double h = g.spacing()[0];
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const Vec xv = g.node(i);
      const double x = xv(0);
      const double f = bump(x, 0.9, 0.6), df = dbump(x, 0.9, 0.6);
      const double gg = bump(x, 1.1, 0.7), dg = dbump(x, 1.1, 0.7);
      const cplx Df = d.a_at(0, xv)(0, 0) * df + d.b_at(xv)(0, 0) * f;
      const cplx Dag = a.a_at(0, xv)(0, 0) * dg + a.b_at(xv)(0, 0) * gg;
      lhs += h * (Df * gg).real();
      rhs += h * (f * Dag).real();
    }
    CHECK(std::abs(lhs) > 1e-3);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-6));
  }
}

TEST_CASE("doubled symbols") {
  SUBCASE("zero symbol doubles to zero") {
    const Grid g = Grid::spanning({0.0}, {1.0}, {5});
    const SymbolField z = transport_1d(g, [](double) { return 0.0; });
    const SymbolField dd = doubled(z);
    CHECK(dd.r() == 2);
    CHECK(dd.s() == 2);
    CHECK(dd.principal(g.node(2), Vec::Ones(1)).norm() == 0.0);
    CHECK(dd.b_at(g.node(2)).norm() < 1e-12);
  }
  SUBCASE("d/dx doubles to a rotation generator") {
    const Grid g = Grid::spanning({0.0}, {1.0}, {5});
    const SymbolField dd = doubled(transport_1d(g, [](double) { return 1.0; }));
    Vec xi(1);
    xi << -1.75;
    CMat expected(2, 2);
    expected << 0.0, -xi(0), xi(0), 0.0;
    CHECK((dd.principal(g.node(1), xi) - expected).norm() < 1e-14);
    CHECK(seminorm(dd, g.node(1), xi) == doctest::Approx(1.75));
  }
}

TEST_CASE("riemannian approximants") {
  SUBCASE("euclidean norm is majorised for every omega and k") {
    const SymbolField e = riemannian(kSquare, Mat(Mat::Identity(2, 2)));
    std::mt19937_64 rng(2);
    std::normal_distribution<double> nd;
    for (int k : {0, 1, 4, 8}) {
      for (int t = 0; t < 8; ++t) {
        const double th = 2.0 * kPi * t / 8.0 + 0.1;
        const Mat G = approximant_metric(e, Vec::Zero(2), vec2(std::cos(th), std::sin(th)), k);
        for (int q = 0; q < 10; ++q) {
          const Vec xi = vec2(nd(rng), nd(rng));
          CHECK(std::sqrt(xi.dot(G * xi)) >= xi.norm() * (1.0 - 1e-12));
        }
      }
    }
  }
  SUBCASE("psi for the diagonal shift at (1,1)/sqrt2 and k=8") {
    const SymbolField d = diagonal_shift(2, kSquare);
    const Vec omega = vec2(1.0, 1.0) / std::sqrt(2.0);
    double psi = 0.0;
    const Mat G = approximant_metric(d, Vec::Zero(2), omega, 8, &psi);
    CHECK(psi == doctest::Approx(1.0 / std::sqrt(2.0) + 1.5 / 256.0).epsilon(1e-12));
    const Vec xi = vec2(1.0, 1.0);
    const double norm = std::sqrt(xi.dot(G * xi));
    CHECK(norm >= seminorm(d, Vec::Zero(2), xi));
    CHECK(norm <= 1.05);
  }
  SUBCASE("kernel-aligned omega at k=0 gives psi = 3/2") {
    const SymbolField s = grushin_line(kSquare);
    double psi = 0.0;
    const Mat G = approximant_metric(s, vec2(0.0, 0.2), vec2(0.0, 1.0), 0, &psi);
    CHECK(psi == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(G(1, 1) == doctest::Approx(9.0 / 4.0).epsilon(1e-12));
    CHECK(std::abs(G(0, 1)) < 1e-14);
  }
  SUBCASE("field form agrees with the pointwise metric") {
    const SymbolField s = grushin_line(kSquare);
    const Vec omega = vec2(0.6, 0.8);
    const RiemannianApproximant ra = riemannian_approximant(s, omega, 3);
    for (std::size_t i = 0; i < kSquare.size(); i += 3) {
      const Mat G = approximant_metric(s, kSquare.node(i), omega, 3);
      const Vec xi = vec2(0.3, -1.1);
      CHECK(ra.norm_at(i, xi) == doctest::Approx(std::sqrt(xi.dot(G * xi))));
      CHECK(ra.norm_at(i, xi) >= seminorm(s, kSquare.node(i), xi));
    }
  }
  SUBCASE("the infimum over a growing family approaches the max norm") {
    const SymbolField d = diagonal_shift(2, kSquare);
    // Worst relative excess of min_G |xi|_G over P(xi) on a 720-direction sweep.
    const auto excess = [&](int directions, int kmax) {
      std::vector<Mat> family;
      for (int k = 0; k <= kmax; ++k)
        for (int j = 0; j < directions; ++j) {
          const double a = 2.0 * kPi * j / directions;
          family.push_back(approximant_metric(d, Vec::Zero(2), vec2(std::cos(a), std::sin(a)), k));
        }
      double worst = 0.0;
      for (int i = 0; i < 720; ++i) {
        const Vec xi = vec2(std::cos(2.0 * kPi * i / 720.0), std::sin(2.0 * kPi * i / 720.0));
        double best = 1e300;
        for (const Mat& G : family) best = std::min(best, std::sqrt(xi.dot(G * xi)));
        const double P = seminorm(d, Vec::Zero(2), xi);
        CHECK(best >= P * (1.0 - 1e-12));
        worst = std::max(worst, best / P - 1.0);
      }
      return worst;
    };
    const double coarse = excess(64, 8), middle = excess(256, 10), fine = excess(1024, 12);
    CHECK(coarse > 0.2);  // 64 directions leave a gap of about a third
    CHECK(middle < coarse);
    CHECK(fine < middle);
    CHECK(fine < 0.1);
  }
  SUBCASE("invalid arguments") {
    const SymbolField d = diagonal_shift(2, kSquare);
    CHECK_THROWS_AS(approximant_metric(d, Vec::Zero(2), vec2(1.0, 1.0), 2), PreconditionError);
    CHECK_THROWS_AS(approximant_metric(d, Vec::Zero(2), vec2(1.0, 0.0), -1), PreconditionError);
  }
}

TEST_CASE("evaluation outside the box is a domain error") {
  const SymbolField d = diagonal_shift(2, kSquare);
  CHECK_THROWS_AS(seminorm(d, vec2(3.0, 0.0), vec2(1.0, 0.0)), DomainError);
  CHECK_THROWS_AS(dual_norm(d, vec2(3.0, 0.0), vec2(1.0, 0.0)), DomainError);
}
