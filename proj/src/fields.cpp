#include "subfinsler/fields.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace subfinsler {

// ---------------------------------------------------------------- ExtReal

ExtReal ExtReal::finite(double value) {
  if (!std::isfinite(value) || value < 0.0) {
    std::ostringstream os;
    os << "ExtReal::finite: value must be finite and nonnegative, got " << value;
    throw PreconditionError(os.str());
  }
  return ExtReal(value, false);
}

ExtReal ExtReal::from_double(double value) {
  if (value == std::numeric_limits<double>::infinity()) return infinity();
  return finite(value);
}

double ExtReal::value() const {
  if (infinite_) throw PreconditionError("ExtReal::value: value is infinite");
  return value_;
}

double ExtReal::to_double() const {
  return infinite_ ? std::numeric_limits<double>::infinity() : value_;
}

ExtReal ExtReal::operator+(const ExtReal& other) const {
  if (infinite_ || other.infinite_) return infinity();
  return ExtReal(value_ + other.value_, false);
}

std::ostream& operator<<(std::ostream& os, const ExtReal& x) {
  if (x.is_infinite()) return os << "inf";
  return os << x.value();
}

// ------------------------------------------------------------------- Grid

Grid::Grid(std::vector<double> origin, std::vector<double> spacing,
           std::vector<std::size_t> dims)
    : origin_(std::move(origin)), spacing_(std::move(spacing)), dims_(std::move(dims)) {
  if (dims_.empty()) throw PreconditionError("Grid: need at least one axis");
  if (origin_.size() != dims_.size() || spacing_.size() != dims_.size())
    throw PreconditionError("Grid: origin, spacing and dims lengths differ");
  strides_.resize(dims_.size());
  size_ = 1;
  for (std::size_t k = 0; k < dims_.size(); ++k) {
    if (!(spacing_[k] > 0.0) || !std::isfinite(spacing_[k]))
      throw PreconditionError("Grid: spacing must be positive and finite");
    if (!std::isfinite(origin_[k]))
      throw PreconditionError("Grid: origin must be finite");
    if (dims_[k] < 2) throw PreconditionError("Grid: need at least 2 nodes per axis");
    strides_[k] = size_;
    if (size_ > std::numeric_limits<std::size_t>::max() / dims_[k])
      throw PreconditionError("Grid: node count overflows");
    size_ *= dims_[k];
  }
}

Grid Grid::spanning(const std::vector<double>& lower, const std::vector<double>& upper,
                    const std::vector<std::size_t>& dims) {
  if (lower.size() != dims.size() || upper.size() != dims.size())
    throw PreconditionError("Grid::spanning: lengths differ");
  std::vector<double> spacing(dims.size());
  for (std::size_t k = 0; k < dims.size(); ++k) {
    if (dims[k] < 2) throw PreconditionError("Grid: need at least 2 nodes per axis");
    spacing[k] = (upper[k] - lower[k]) / static_cast<double>(dims[k] - 1);
  }
  return Grid(lower, spacing, dims);
}

double Grid::min_spacing() const {
  return *std::min_element(spacing_.begin(), spacing_.end());
}

Vec Grid::lower() const { return Eigen::Map<const Vec>(origin_.data(), ndim()); }

Vec Grid::upper() const {
  Vec u(ndim());
  for (std::size_t k = 0; k < ndim(); ++k)
    u[k] = origin_[k] + spacing_[k] * static_cast<double>(dims_[k] - 1);
  return u;
}

Vec Grid::node(std::size_t linear) const {
  Vec x(ndim());
  for (std::size_t k = 0; k < ndim(); ++k) {
    const std::size_t i = (linear / strides_[k]) % dims_[k];
    x[k] = origin_[k] + spacing_[k] * static_cast<double>(i);
  }
  return x;
}

Vec Grid::node(std::span<const std::size_t> index) const {
  Vec x(ndim());
  for (std::size_t k = 0; k < ndim(); ++k)
    x[k] = origin_[k] + spacing_[k] * static_cast<double>(index[k]);
  return x;
}

std::size_t Grid::linear(std::span<const std::size_t> index) const {
  std::size_t out = 0;
  for (std::size_t k = 0; k < ndim(); ++k) {
    if (index[k] >= dims_[k]) throw DomainError("Grid::linear: index out of range");
    out += index[k] * strides_[k];
  }
  return out;
}

std::vector<std::size_t> Grid::multi_index(std::size_t linear) const {
  std::vector<std::size_t> idx(ndim());
  for (std::size_t k = 0; k < ndim(); ++k) idx[k] = (linear / strides_[k]) % dims_[k];
  return idx;
}

bool Grid::contains(const Vec& x) const {
  if (static_cast<std::size_t>(x.size()) != ndim()) return false;
  for (std::size_t k = 0; k < ndim(); ++k) {
    const double t = (x[k] - origin_[k]) / spacing_[k];
    const double top = static_cast<double>(dims_[k] - 1);
    if (!(t >= -1e-12 && t <= top + 1e-12)) return false;
  }
  return true;
}

void Grid::require_contains(const Vec& x, const char* what) const {
  if (!contains(x)) {
    std::ostringstream os;
    os << what << ": point (" << x.transpose() << ") is outside the grid box";
    throw DomainError(os.str());
  }
}

std::size_t Grid::nearest_node(const Vec& x) const {
  std::size_t out = 0;
  for (std::size_t k = 0; k < ndim(); ++k) {
    double t = std::round((x[k] - origin_[k]) / spacing_[k]);
    t = std::clamp(t, 0.0, static_cast<double>(dims_[k] - 1));
    out += static_cast<std::size_t>(t) * strides_[k];
  }
  return out;
}

// ------------------------------------------------------------------ Field

template <ElementKind K>
Field<K>::Field(Grid grid, std::size_t rows, std::size_t cols)
    : grid_(std::move(grid)), rows_(rows), cols_(cols) {
  if constexpr (K == ElementKind::RealScalar) {
    if (rows != 1 || cols != 1) throw PreconditionError("ScalarField: shape must be 1x1");
  } else if constexpr (K == ElementKind::ComplexVector) {
    if (cols != 1 || rows == 0) throw PreconditionError("VectorField: shape must be r x 1");
  } else {
    if (rows == 0 || cols == 0) throw PreconditionError("MatrixField: empty shape");
  }
  data_.assign(grid_.size() * rows_ * cols_, scalar_type{});
}

template <ElementKind K>
auto Field<K>::at(std::size_t node) const -> value_type {
  const std::size_t b = block();
  if constexpr (K == ElementKind::RealScalar) {
    return data_[node];
  } else if constexpr (K == ElementKind::ComplexVector) {
    return Eigen::Map<const CVec>(data_.data() + node * b, rows_);
  } else {
    using RowMajor = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    return Eigen::Map<const RowMajor>(data_.data() + node * b, rows_, cols_);
  }
}

template <ElementKind K>
void Field<K>::set(std::size_t node, const value_type& v) {
  const std::size_t b = block();
  if constexpr (K == ElementKind::RealScalar) {
    data_[node] = v;
  } else if constexpr (K == ElementKind::ComplexVector) {
    if (static_cast<std::size_t>(v.size()) != rows_)
      throw PreconditionError("VectorField::set: length mismatch");
    Eigen::Map<CVec>(data_.data() + node * b, rows_) = v;
  } else {
    if (static_cast<std::size_t>(v.rows()) != rows_ || static_cast<std::size_t>(v.cols()) != cols_)
      throw PreconditionError("MatrixField::set: shape mismatch");
    using RowMajor = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<RowMajor>(data_.data() + node * b, rows_, cols_) = v;
  }
}

template <ElementKind K>
auto Field<K>::sample(const Vec& x) const -> value_type {
  grid_.require_contains(x, "sample");
  const std::size_t n = grid_.ndim();
  const std::size_t b = block();
  std::vector<std::size_t> base(n);
  std::vector<double> frac(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = (x[k] - grid_.origin()[k]) / grid_.spacing()[k];
    const double top = static_cast<double>(grid_.dims()[k] - 2);
    const double cell = std::clamp(std::floor(t), 0.0, top);
    base[k] = static_cast<std::size_t>(cell);
    frac[k] = std::clamp(t - cell, 0.0, 1.0);
  }
  // Gather the 2^n corners, then contract one axis at a time with
  // v0 + t (v1 - v0), which reproduces constants exactly.
  const std::size_t corners = std::size_t{1} << n;
  std::vector<scalar_type> vals(corners * b);
  std::vector<std::size_t> corner(n);
  for (std::size_t mask = 0; mask < corners; ++mask) {
    for (std::size_t k = 0; k < n; ++k) corner[k] = base[k] + ((mask >> k) & 1U);
    const std::size_t node = grid_.linear(corner);
    for (std::size_t e = 0; e < b; ++e) vals[mask * b + e] = data_[node * b + e];
  }
  std::size_t count = corners;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = frac[k];
    count /= 2;
    for (std::size_t m = 0; m < count; ++m) {
      for (std::size_t e = 0; e < b; ++e) {
        const scalar_type v0 = vals[(2 * m) * b + e];
        const scalar_type v1 = vals[(2 * m + 1) * b + e];
        vals[m * b + e] = t == 0.0 ? v0 : t == 1.0 ? v1 : v0 + t * (v1 - v0);
      }
    }
  }
  std::vector<scalar_type> acc(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(b));
  if constexpr (K == ElementKind::RealScalar) {
    return acc[0];
  } else if constexpr (K == ElementKind::ComplexVector) {
    return Eigen::Map<const CVec>(acc.data(), rows_);
  } else {
    using RowMajor = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    return Eigen::Map<const RowMajor>(acc.data(), rows_, cols_);
  }
}

template <ElementKind K>
Field<K>& Field<K>::operator+=(const Field& other) {
  if (!(grid_ == other.grid_) || rows_ != other.rows_ || cols_ != other.cols_)
    throw PreconditionError("Field::operator+=: grid or shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

template <ElementKind K>
Field<K>& Field<K>::operator*=(double c) {
  for (auto& v : data_) v *= c;
  return *this;
}

template <ElementKind K>
bool Field<K>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](const scalar_type& v) {
    if constexpr (K == ElementKind::RealScalar) {
      return std::isfinite(v);
    } else {
      return std::isfinite(v.real()) && std::isfinite(v.imag());
    }
  });
}

template class Field<ElementKind::RealScalar>;
template class Field<ElementKind::ComplexVector>;
template class Field<ElementKind::ComplexMatrix>;

// ------------------------------------------------------------- binary I/O

namespace {

constexpr char kMagic[4] = {'S', 'F', 'P', 'F'};
constexpr std::uint64_t kMaxNodes = std::uint64_t{1} << 40;
constexpr std::uint32_t kMaxAxes = 16;

template <class T>
void put_le(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <class T>
  T get(const char* what) {
    if (bytes_.size() - pos_ < sizeof(T)) {
      throw FormatError(std::string("field file truncated while reading ") + what);
    }
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

template <ElementKind K>
std::pair<std::uint32_t, std::uint32_t> file_shape(const Field<K>& f) {
  if constexpr (K == ElementKind::ComplexMatrix) {
    return {static_cast<std::uint32_t>(f.cols()), static_cast<std::uint32_t>(f.rows())};
  } else {
    return {static_cast<std::uint32_t>(f.rows()), 1U};
  }
}

template <ElementKind K>
AnyField decode_payload(Grid grid, std::uint32_t r, std::uint32_t s, Reader& in) {
  std::size_t rows = 1, cols = 1;
  if constexpr (K == ElementKind::RealScalar) {
    if (r != 1 || s != 1) throw FormatError("scalar field with payload shape other than (1,1)");
  } else if constexpr (K == ElementKind::ComplexVector) {
    if (r == 0 || s != 1) throw FormatError("vector field with invalid payload shape");
    rows = r;
  } else {
    if (r == 0 || s == 0) throw FormatError("matrix field with empty payload shape");
    rows = s;
    cols = r;
  }
  constexpr std::size_t per_scalar = K == ElementKind::RealScalar ? 1 : 2;
  const std::uint64_t count = static_cast<std::uint64_t>(grid.size()) * rows * cols;
  if (count > kMaxNodes * 64) throw FormatError("field payload too large");
  const std::uint64_t expected = count * per_scalar * sizeof(double);
  if (in.remaining() != expected) {
    std::ostringstream os;
    os << "field payload has " << in.remaining() << " bytes, header implies " << expected;
    throw FormatError(os.str());
  }
  Field<K> field(std::move(grid), rows, cols);
  auto data = field.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    if constexpr (K == ElementKind::RealScalar) {
      data[i] = in.get<double>("payload");
    } else {
      const double re = in.get<double>("payload");
      const double im = in.get<double>("payload");
      data[i] = cplx(re, im);
    }
  }
  return field;
}

}  // namespace

std::size_t field_header_size(std::size_t ndim) {
  return 4 + 4 + 1 + 4 + ndim * (4 + 8 + 8) + 4 + 4;
}

template <ElementKind K>
std::string encode_field(const Field<K>& field) {
  const Grid& g = field.grid();
  std::string out;
  constexpr std::size_t per_scalar = K == ElementKind::RealScalar ? 1 : 2;
  out.reserve(field_header_size(g.ndim()) + field.data().size() * per_scalar * 8);
  out.append(kMagic, 4);
  put_le<std::uint32_t>(out, kFieldFormatVersion);
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(K));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(g.ndim()));
  for (auto d : g.dims()) {
    if (d > std::numeric_limits<std::uint32_t>::max())
      throw FormatError("grid dimension does not fit in u32");
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  }
  for (auto h : g.spacing()) put_le<double>(out, h);
  for (auto o : g.origin()) put_le<double>(out, o);
  const auto [r, s] = file_shape(field);
  put_le<std::uint32_t>(out, r);
  put_le<std::uint32_t>(out, s);
  for (const auto& v : field.data()) {
    if constexpr (K == ElementKind::RealScalar) {
      put_le<double>(out, v);
    } else {
      put_le<double>(out, v.real());
      put_le<double>(out, v.imag());
    }
  }
  return out;
}

AnyField decode_field(std::string_view bytes) {
  Reader in(bytes);
  char magic[4];
  for (char& c : magic) c = static_cast<char>(in.get<std::uint8_t>("magic"));
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad magic: not an SFPF field file");
  const auto version = in.get<std::uint32_t>("version");
  if (version != kFieldFormatVersion) {
    throw FormatError("unsupported field format version " + std::to_string(version));
  }
  const auto kind = in.get<std::uint8_t>("element kind");
  if (kind > 2) throw FormatError("unknown element kind " + std::to_string(kind));
  const auto n = in.get<std::uint32_t>("n");
  if (n == 0 || n > kMaxAxes) throw FormatError("invalid axis count " + std::to_string(n));
  std::vector<std::size_t> dims(n);
  std::uint64_t nodes = 1;
  for (auto& d : dims) {
    d = in.get<std::uint32_t>("dims");
    if (d < 2) throw FormatError("grid axis with fewer than 2 nodes");
    if (nodes > kMaxNodes / d) throw FormatError("grid dimensions overflow the node limit");
    nodes *= d;
  }
  std::vector<double> spacing(n), origin(n);
  for (auto& h : spacing) h = in.get<double>("spacing");
  for (auto& o : origin) o = in.get<double>("origin");
  const auto r = in.get<std::uint32_t>("payload shape r");
  const auto s = in.get<std::uint32_t>("payload shape s");
  Grid grid;
  try {
    grid = Grid(origin, spacing, dims);
  } catch (const PreconditionError& e) {
    throw FormatError(std::string("invalid grid in header: ") + e.what());
  }
  switch (static_cast<ElementKind>(kind)) {
    case ElementKind::RealScalar:
      return decode_payload<ElementKind::RealScalar>(std::move(grid), r, s, in);
    case ElementKind::ComplexVector:
      return decode_payload<ElementKind::ComplexVector>(std::move(grid), r, s, in);
    case ElementKind::ComplexMatrix:
      return decode_payload<ElementKind::ComplexMatrix>(std::move(grid), r, s, in);
  }
  throw FormatError("unreachable element kind");
}

template <ElementKind K>
void save_field(const Field<K>& field, const std::filesystem::path& path) {
  const std::string bytes = encode_field(field);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path.string());
}

AnyField load_any_field(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string() + " for reading");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_field(bytes);
}

template <ElementKind K>
Field<K> load_field(const std::filesystem::path& path) {
  AnyField any = load_any_field(path);
  if (auto* f = std::get_if<Field<K>>(&any)) return std::move(*f);
  throw FormatError(path.string() + ": element kind does not match the requested field type");
}

template std::string encode_field(const ScalarField&);
template std::string encode_field(const VectorField&);
template std::string encode_field(const MatrixField&);
template void save_field(const ScalarField&, const std::filesystem::path&);
template void save_field(const VectorField&, const std::filesystem::path&);
template void save_field(const MatrixField&, const std::filesystem::path&);
template ScalarField load_field<ElementKind::RealScalar>(const std::filesystem::path&);
template VectorField load_field<ElementKind::ComplexVector>(const std::filesystem::path&);
template MatrixField load_field<ElementKind::ComplexMatrix>(const std::filesystem::path&);

void write_csv(const ScalarField& field, const std::filesystem::path& path) {
  const Grid& g = field.grid();
  if (g.ndim() != 2) throw PreconditionError("write_csv: only 2-D scalar fields");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << std::setprecision(17);
  const auto nx = g.dims()[0];
  const auto ny = g.dims()[1];
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      const double v = field.data()[i + nx * j];
      if (i) out << ',';
      if (std::isinf(v)) {
        out << (v > 0 ? "inf" : "-inf");
      } else {
        out << v;
      }
    }
    out << '\n';
  }
}

}  // namespace subfinsler
