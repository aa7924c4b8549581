#pragma once

#include <cstddef>
#include <vector>

#include "subfinsler/fields.hpp"

namespace subfinsler {

// Second-order finite-difference derivative along `axis` of node values
// (axis-0-fastest order): central in the interior, one-sided three-point at
// the two boundary layers. T is any type closed under +, - and scaling.
template <class T>
std::vector<T> node_derivative(const Grid& grid, const std::vector<T>& values,
                               std::size_t axis) {
  const auto& dims = grid.dims();
  if (dims[axis] < 3) throw PreconditionError("node_derivative: axis needs at least 3 nodes");
  std::size_t stride = 1;
  for (std::size_t k = 0; k < axis; ++k) stride *= dims[k];
  const std::size_t len = dims[axis];
  const double inv2h = 1.0 / (2.0 * grid.spacing()[axis]);
  std::vector<T> out(values.size());
  for (std::size_t node = 0; node < values.size(); ++node) {
    const std::size_t i = (node / stride) % len;
    if (i == 0) {
      out[node] = (-3.0 * values[node] + 4.0 * values[node + stride] - values[node + 2 * stride]) * inv2h;
    } else if (i + 1 == len) {
      out[node] = (3.0 * values[node] - 4.0 * values[node - stride] + values[node - 2 * stride]) * inv2h;
    } else {
      out[node] = (values[node + stride] - values[node - stride]) * inv2h;
    }
  }
  return out;
}

}  // namespace subfinsler
