#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "subfinsler/errors.hpp"

namespace subfinsler {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

// Nonnegative extended real: a finite value >= 0, or +infinity.
class ExtReal {
 public:
  constexpr ExtReal() = default;

  static ExtReal finite(double value);
  static constexpr ExtReal infinity() { return ExtReal(0.0, true); }
  // Maps IEEE +inf to infinity(), anything else through finite().
  static ExtReal from_double(double value);

  bool is_finite() const { return !infinite_; }
  bool is_infinite() const { return infinite_; }
  // Throws PreconditionError when infinite.
  double value() const;
  // IEEE encoding: +inf for infinity.
  double to_double() const;

  ExtReal operator+(const ExtReal& other) const;
  ExtReal& operator+=(const ExtReal& other) { return *this = *this + other; }

  friend bool operator==(const ExtReal& a, const ExtReal& b) {
    return a.infinite_ == b.infinite_ && (a.infinite_ || a.value_ == b.value_);
  }
  friend bool operator<(const ExtReal& a, const ExtReal& b) {
    if (a.infinite_) return false;
    return b.infinite_ || a.value_ < b.value_;
  }
  friend bool operator<=(const ExtReal& a, const ExtReal& b) { return !(b < a); }
  friend bool operator>(const ExtReal& a, const ExtReal& b) { return b < a; }
  friend bool operator>=(const ExtReal& a, const ExtReal& b) { return !(a < b); }

 private:
  constexpr ExtReal(double v, bool inf) : value_(v), infinite_(inf) {}
  double value_ = 0.0;
  bool infinite_ = false;
};

std::ostream& operator<<(std::ostream& os, const ExtReal& x);

// Rectangular node grid over one chart of R^n. Node multi-index i maps to
// origin + i * spacing; linear order has axis 0 varying fastest.
class Grid {
 public:
  Grid() = default;
  Grid(std::vector<double> origin, std::vector<double> spacing,
       std::vector<std::size_t> dims);

  // Grid with `dims[k]` nodes spanning [lower[k], upper[k]] on every axis.
  static Grid spanning(const std::vector<double>& lower,
                       const std::vector<double>& upper,
                       const std::vector<std::size_t>& dims);

  std::size_t ndim() const { return dims_.size(); }
  std::size_t size() const { return size_; }
  const std::vector<std::size_t>& dims() const { return dims_; }
  const std::vector<double>& spacing() const { return spacing_; }
  const std::vector<double>& origin() const { return origin_; }
  double min_spacing() const;

  Vec lower() const;
  Vec upper() const;
  Vec node(std::size_t linear) const;
  Vec node(std::span<const std::size_t> index) const;
  std::size_t linear(std::span<const std::size_t> index) const;
  std::vector<std::size_t> multi_index(std::size_t linear) const;

  // Inside the closed bounding box, up to a rounding slack of 1e-12 cells.
  bool contains(const Vec& x) const;
  // Throws DomainError naming `what` when x is outside the box.
  void require_contains(const Vec& x, const char* what) const;
  // Nearest node to x (x is clamped into the box first).
  std::size_t nearest_node(const Vec& x) const;

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.origin_ == b.origin_ && a.spacing_ == b.spacing_ &&
           a.dims_ == b.dims_;
  }

 private:
  std::vector<double> origin_;
  std::vector<double> spacing_;
  std::vector<std::size_t> dims_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
};

enum class ElementKind : std::uint8_t {
  RealScalar = 0,
  ComplexVector = 1,
  ComplexMatrix = 2,
};

template <ElementKind K>
struct ElementTraits;

template <>
struct ElementTraits<ElementKind::RealScalar> {
  using scalar_type = double;
  using value_type = double;
};
template <>
struct ElementTraits<ElementKind::ComplexVector> {
  using scalar_type = cplx;
  using value_type = CVec;
};
template <>
struct ElementTraits<ElementKind::ComplexMatrix> {
  using scalar_type = cplx;
  using value_type = CMat;
};

// One value per grid node: a real scalar, a complex vector of length
// `rows`, or a complex `rows` x `cols` matrix (stored row-major per node).
template <ElementKind K>
class Field {
 public:
  using scalar_type = typename ElementTraits<K>::scalar_type;
  using value_type = typename ElementTraits<K>::value_type;
  static constexpr ElementKind kind = K;

  Field() = default;
  explicit Field(Grid grid, std::size_t rows = 1, std::size_t cols = 1);

  template <class Fn>
  static Field from_function(const Grid& grid, std::size_t rows,
                             std::size_t cols, Fn&& fn) {
    Field f(grid, rows, cols);
    for (std::size_t i = 0; i < grid.size(); ++i) f.set(i, fn(grid.node(i)));
    return f;
  }

  const Grid& grid() const { return grid_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t block() const { return rows_ * cols_; }

  value_type at(std::size_t node) const;
  void set(std::size_t node, const value_type& v);

  std::span<const scalar_type> data() const { return data_; }
  std::span<scalar_type> data() { return data_; }

  // Multilinear interpolation; exact at nodes and on affine data.
  value_type sample(const Vec& x) const;

  Field& operator+=(const Field& other);
  Field& operator*=(double c);
  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator*(double c, Field a) { return a *= c; }

  // True when every entry is finite.
  bool all_finite() const;

 private:
  Grid grid_;
  std::size_t rows_ = 1;
  std::size_t cols_ = 1;
  std::vector<scalar_type> data_;
};

using ScalarField = Field<ElementKind::RealScalar>;
using VectorField = Field<ElementKind::ComplexVector>;
using MatrixField = Field<ElementKind::ComplexMatrix>;
using AnyField = std::variant<ScalarField, VectorField, MatrixField>;

extern template class Field<ElementKind::RealScalar>;
extern template class Field<ElementKind::ComplexVector>;
extern template class Field<ElementKind::ComplexMatrix>;

// Binary "SFPF" field files. Layout (little-endian):
//   "SFPF" | version u32 | kind u8 | n u32 | dims n*u32 | spacing n*f64 |
//   origin n*f64 | r u32 | s u32 | payload f64...
// Scalars have (r, s) = (1, 1); vectors (length, 1); matrices s x r store
// (r = cols, s = rows). Complex entries are (re, im) pairs; per-node blocks
// are row-major; nodes run with axis 0 fastest.
inline constexpr std::uint32_t kFieldFormatVersion = 1;
std::size_t field_header_size(std::size_t ndim);

template <ElementKind K>
void save_field(const Field<K>& field, const std::filesystem::path& path);
template <ElementKind K>
Field<K> load_field(const std::filesystem::path& path);
AnyField load_any_field(const std::filesystem::path& path);

// In-memory variants of the file format, used by the file functions.
template <ElementKind K>
std::string encode_field(const Field<K>& field);
AnyField decode_field(std::string_view bytes);

// 2-D scalar CSV: one line per y index, x varying along the line; +inf is
// written as "inf".
void write_csv(const ScalarField& field, const std::filesystem::path& path);

}  // namespace subfinsler
