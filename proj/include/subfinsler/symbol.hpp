#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "subfinsler/fields.hpp"

namespace subfinsler {

// A matrix-valued coefficient x -> C^{rows x cols}: either backed by a grid
// field (multilinear between nodes) or by a closed-form function.
class Coefficient {
 public:
  using Fn = std::function<CMat(const Vec&)>;

  Coefficient() = default;
  static Coefficient constant(CMat value);
  static Coefficient analytic(std::size_t rows, std::size_t cols, Fn fn);
  static Coefficient gridded(MatrixField field);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool is_gridded() const { return static_cast<bool>(field_); }
  bool is_constant() const { return constant_; }

  CMat operator()(const Vec& x) const;

  // x -> -a(x)^*
  Coefficient negated_adjoint() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  bool constant_ = false;
  Fn fn_;
  std::shared_ptr<const MatrixField> field_;
};

// First-order operator D f = sum_j a_j d_j f + b f acting on C^r-valued
// functions with C^s-valued output, on the box of `grid`.
class SymbolField {
 public:
  SymbolField() = default;
  SymbolField(Grid grid, std::size_t r, std::size_t s, std::vector<Coefficient> a,
              Coefficient b, std::string name = {});

  std::size_t n() const { return grid_.ndim(); }
  std::size_t r() const { return r_; }
  std::size_t s() const { return s_; }
  const Grid& grid() const { return grid_; }
  const std::string& name() const { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }

  const Coefficient& a(std::size_t j) const { return a_.at(j); }
  const Coefficient& b() const { return b_; }

  CMat a_at(std::size_t j, const Vec& x) const;
  CMat b_at(const Vec& x) const;
  // sigma_1(D)(x)(xi) = sum_j xi_j a_j(x)
  CMat principal(const Vec& x, const Vec& xi) const;
  // Real (2 s r) x n matrix whose column j is vec(a_j(x)) split into real and
  // imaginary parts; |stacked * xi| is the Frobenius norm of the symbol.
  Mat stacked(const Vec& x) const;
  // The seminorm is Euclidean (|stacked * xi|) when r == 1 or s == 1.
  bool hilbertian() const { return r_ == 1 || s_ == 1; }

 private:
  Grid grid_;
  std::size_t r_ = 0;
  std::size_t s_ = 0;
  std::vector<Coefficient> a_;
  Coefficient b_;
  std::string name_;
};

// Largest singular value.
double op_norm(const CMat& m);

// P_D(xi) at x: operator norm of the principal symbol.
double seminorm(const SymbolField& sym, const Vec& x, const Vec& xi);

struct KernelDecomposition {
  Vec x;
  Mat z_basis;  // n x dim Z, orthonormal columns spanning Z(P_x)
  Mat f_basis;  // n x dim F, orthonormal columns spanning its annihilator
  Vec singular_values;
  double tol_zero = 0.0;  // absolute threshold actually used
};

inline constexpr double kDefaultKernelRelTol = 1e-10;

// Null space of xi -> sigma_1(D)(x)(xi), with singular directions below
// rel_tol * (largest singular value) counted as null.
KernelDecomposition kernel_decomposition(const SymbolField& sym, const Vec& x,
                                         double rel_tol = kDefaultKernelRelTol);

struct DualNormOptions {
  double kernel_rel_tol = kDefaultKernelRelTol;
  // v is declared outside F(P*_x) when its component there exceeds tol * |v|.
  double tol = 1e-9;
  int sweep_directions = 720;
  int multistart = 32;
  int max_iterations = 400;
};

// P*_x(v) = sup { |<eta, v>| / P_x(eta) }, possibly infinite.
ExtReal dual_norm(const SymbolField& sym, const Vec& x, const Vec& v,
                  const DualNormOptions& opts = {});

// Formal adjoint under Lebesgue measure and the standard Hermitian fibre
// products: first-order coefficients -a_j^*, zeroth order b^* - sum_j d_j a_j^*
// with the derivatives taken by second-order finite differences on the grid.
SymbolField formal_adjoint(const SymbolField& sym);

// (f, g) -> (D^+ g, D f) acting on C^{r+s}.
SymbolField doubled(const SymbolField& sym);

// One metric of the Riemannian family majorising P: for a constant unit
// covector omega and sharpness k,
//   G(x) = psi(x)^2 (omega omega^T + 4^k (I - omega omega^T)),
//   psi(x) = P_x(omega) + 1.5 * c(x) * 2^-k,
// where c(x) >= sup_{|xi|=1} P_x(xi) is the largest singular value of the
// stacked symbol (1 for the zero symbol).
struct RiemannianApproximant {
  Grid grid;
  Vec omega;
  int k = 0;
  ScalarField psi;
  std::vector<Mat> metric;  // per node, n x n symmetric positive definite

  double norm_at(std::size_t node, const Vec& xi) const;
};

Mat approximant_metric(const SymbolField& sym, const Vec& x, const Vec& omega, int k,
                       double* psi_out = nullptr);
RiemannianApproximant riemannian_approximant(const SymbolField& sym, const Vec& omega, int k);

}  // namespace subfinsler
