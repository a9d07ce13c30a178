#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgltn {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

// Dense row-major tensor of 64-bit reals. An empty shape is a scalar of one
// element. Only rank 0/1/2 are used in practice.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::optional<std::vector<double>> grad;  // same length as data when present

  Tensor() : data(1, 0.0) {}

  static Tensor scalar(double v) {
    Tensor t;
    t.data[0] = v;
    return t;
  }

  static Tensor zeros(std::vector<int> shp) {
    Tensor t;
    t.shape = std::move(shp);
    t.data.assign(numel_of(t.shape), 0.0);
    return t;
  }

  static Tensor full(std::vector<int> shp, double v) {
    Tensor t = zeros(std::move(shp));
    for (auto& x : t.data) x = v;
    return t;
  }

  static Tensor from(std::vector<int> shp, std::vector<double> values) {
    Tensor t;
    t.shape = std::move(shp);
    t.data = std::move(values);
    check(t.data.size() == numel_of(t.shape),
          "tensor: data length " + std::to_string(t.data.size()) +
              " does not match shape " + shape_str(t.shape));
    return t;
  }

  static Tensor matrix(int r, int c, std::vector<double> values) {
    return from({r, c}, std::move(values));
  }

  // column vector {n, 1}
  static Tensor column(std::vector<double> values) {
    int n = int(values.size());
    return from({n, 1}, std::move(values));
  }

  static std::size_t numel_of(const std::vector<int>& shp) {
    std::size_t n = 1;
    for (int d : shp) {
      if (d < 0) throw Error("tensor: negative dimension in " + shape_str(shp));
      n *= std::size_t(d);
    }
    return n;
  }

  static std::string shape_str(const std::vector<int>& shp) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shp.size(); ++i) os << (i ? "," : "") << shp[i];
    os << "]";
    return os.str();
  }

  std::size_t numel() const { return data.size(); }
  bool is_scalar() const { return data.size() == 1 && shape.empty(); }
  int rank() const { return int(shape.size()); }

  int rows() const {
    if (rank() != 2) throw Error("tensor: rows() on non-matrix " + shape_str(shape));
    return shape[0];
  }
  int cols() const {
    if (rank() != 2) throw Error("tensor: cols() on non-matrix " + shape_str(shape));
    return shape[1];
  }

  double& at(int i, int j) { return data[std::size_t(i) * std::size_t(shape[1]) + std::size_t(j)]; }
  double at(int i, int j) const { return data[std::size_t(i) * std::size_t(shape[1]) + std::size_t(j)]; }

  double item() const {
    if (numel() != 1)
      throw Error("tensor: item() on tensor with " + std::to_string(numel()) + " elements");
    return data[0];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

}  // namespace sgltn
