#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "subfinsler/symbol.hpp"

namespace subfinsler {

using VectorFn = std::function<Vec(const Vec&)>;
using ScalarFn = std::function<double(const Vec&)>;

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Lebesgue measure of (union of intervals) ∩ [lo, hi].
double union_measure(std::vector<Interval> intervals, double lo, double hi);

// First `count` rationals of [0, 1] in Stern–Brocot order: 0/1, 1/1, then the
// tree below them breadth first (1/2, 1/3, 2/3, 1/4, 2/5, 3/5, 3/4, ...).
std::vector<std::pair<long, long>> stern_brocot_window(std::size_t count);

// D(f_1..f_n) = (i d_1 f_1, ..., i d_n f_n). P = |xi|_inf, P* = |v|_1.
SymbolField diagonal_shift(std::size_t n, const Grid& grid);

// First-order system with P(xi) = sqrt(xi^T G(x) xi): r = 1, s = n, the
// coefficients being the rows of a Cholesky factor of G.
SymbolField riemannian(const Grid& grid, const std::function<Mat(const Vec&)>& metric);
SymbolField riemannian(const Grid& grid, const Mat& metric);

// Df = (X_1 f, ..., X_m f): P(xi)^2 = sum_k xi(X_k)^2.
SymbolField subriemannian(const Grid& grid, std::vector<VectorFn> fields);

// Scalar 1-D operator D = c(x) d_1.
SymbolField transport_1d(const Grid& grid, std::function<double(double)> c);

// Orthogonal frame of the Grushin-type structure at control value u:
// |X| = 1, <X, Y> = 0, |Y| = |u| / (2 sqrt(1 + u^2)).
Vec grushin_X(double u);
Vec grushin_Y(double u);
// P(xi)^2 = <xi, H xi>.
Mat grushin_H(double u);

// Default flatness of the bumps in grushin_rational. Small values keep u well
// above float noise until very close to the interval ends.
inline constexpr double kDefaultGrushinFlatness = 1.0 / 64.0;

struct GrushinRational {
  SymbolField symbol;
  std::vector<Interval> intervals;  // ]q_i - 2^-i-3, q_i + 2^-i-3[
  std::vector<std::pair<long, long>> rationals;
  double flatness = kDefaultGrushinFlatness;
  ScalarFn u;  // u(x, y) = v(x)
};

// Grushin-type structure Df = (Xf, Yf) with u(x, y) = v(x) and
//   v = 1 - prod_i (1 - b_i),  b_i(x) = exp(-beta s^2 / (1 - s^2)) for |s| < 1,
// s = (x - q_i) / 2^-i-3, over the first m Stern–Brocot rationals of [0, 1].
// v is smooth, takes values in [0, 1], equals 1 at every q_i and vanishes
// to infinite order exactly off the union of the intervals.
GrushinRational grushin_rational(std::size_t m, const Grid& grid,
                                 double flatness = kDefaultGrushinFlatness);

// -------------------------------------------------------------- registry

struct GalleryEntry {
  std::string name;
  std::string summary;
  std::string ground_truth;
};

const std::vector<GalleryEntry>& gallery_entries();

struct GalleryParams {
  std::size_t n = 2;
  std::vector<double> lower;  // empty: the entry's default box
  std::vector<double> upper;
  std::vector<std::size_t> dims;
  std::size_t m = 8;  // grushin_rational truncation
  double flatness = kDefaultGrushinFlatness;
  std::vector<double> metric_diag;  // riemannian; empty: identity
};

// Throws PreconditionError for an unknown name.
SymbolField make_gallery_symbol(const std::string& name, const GalleryParams& params);
Grid gallery_grid(const std::string& name, const GalleryParams& params);

}  // namespace subfinsler
