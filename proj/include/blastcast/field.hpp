#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "blastcast/error.hpp"

namespace blastcast {

/// Uniform Cartesian grid over the analysis plane. Cell (i, j) has its
/// center at ((i + 0.5) dx, (j + 0.5) dy); j indexes rows (y).
struct GridSpec {
  int nx = 64;
  int ny = 64;
  double dx = 1.0;
  double dy = 1.0;

  std::size_t cells() const { return static_cast<std::size_t>(nx) * ny; }
  double width() const { return nx * dx; }
  double height() const { return ny * dy; }
  double center_x(int i) const { return (i + 0.5) * dx; }
  double center_y(int j) const { return (j + 0.5) * dy; }

  /// Square grid of n x n cells covering a domain of the given extent.
  static GridSpec square(int n, double extent);

  /// Throws ConfigError unless nx, ny >= 16 and spacings are positive.
  void validate() const;

  bool operator==(const GridSpec&) const = default;
};

/// Row-major 2D field, y index outermost: value(i, j) = values[j * nx + i].
template <typename T>
class Field {
 public:
  Field() = default;
  Field(int nx, int ny, T fill = T{})
      : nx_(nx), ny_(ny), values_(static_cast<std::size_t>(nx) * ny, fill) {}

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  std::size_t size() const { return values_.size(); }

  T& operator()(int i, int j) { return values_[index(i, j)]; }
  const T& operator()(int i, int j) const { return values_[index(i, j)]; }
  T& operator[](std::size_t k) { return values_[k]; }
  const T& operator[](std::size_t k) const { return values_[k]; }

  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j) * nx_ + i;
  }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }
  std::vector<T>& storage() { return values_; }
  const std::vector<T>& storage() const { return values_; }

  bool same_shape(const Field& other) const {
    return nx_ == other.nx_ && ny_ == other.ny_;
  }

  bool operator==(const Field&) const = default;

 private:
  int nx_ = 0;
  int ny_ = 0;
  std::vector<T> values_;
};

using FieldD = Field<double>;
using FieldF = Field<float>;

template <typename A, typename B>
void require_same_shape(const Field<A>& a, const Field<B>& b,
                        const char* what) {
  if (a.nx() != b.nx() || a.ny() != b.ny()) {
    throw ContractError(std::string(what) + ": shape mismatch (" +
                        std::to_string(a.nx()) + "x" + std::to_string(a.ny()) +
                        " vs " + std::to_string(b.nx()) + "x" +
                        std::to_string(b.ny()) + ")");
  }
}

}  // namespace blastcast
