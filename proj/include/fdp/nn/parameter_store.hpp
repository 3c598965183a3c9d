#pragma once

#include "fdp/common.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

namespace fdp::nn {

template <typename Scalar>
using AlignedVector = std::vector<Scalar, Eigen::aligned_allocator<Scalar>>;

template <typename Scalar>
struct Tensor {
  std::string name;
  std::vector<int> shape;
  AlignedVector<Scalar> data;

  std::size_t size() const { return data.size(); }
};

/// Flat, ordered bank of named tensors. Iteration order is registration
/// order, which the network keeps depth-first and stable across runs.
template <typename Scalar>
class ParameterStore {
 public:
  std::size_t add(std::string name, std::vector<int> shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    tensors_.push_back({std::move(name), std::move(shape), AlignedVector<Scalar>(n, Scalar(0))});
    return tensors_.size() - 1;
  }

  std::size_t size() const { return tensors_.size(); }
  bool empty() const { return tensors_.empty(); }
  Tensor<Scalar>& operator[](std::size_t i) { return tensors_[i]; }
  const Tensor<Scalar>& operator[](std::size_t i) const { return tensors_[i]; }
  auto begin() { return tensors_.begin(); }
  auto end() { return tensors_.end(); }
  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }

  std::size_t num_scalars() const {
    return std::accumulate(tensors_.begin(), tensors_.end(), std::size_t{0},
                           [](std::size_t acc, const Tensor<Scalar>& t) { return acc + t.size(); });
  }

  const Tensor<Scalar>& find(const std::string& name) const {
    for (const auto& t : tensors_) {
      if (t.name == name) return t;
    }
    throw InvalidArgument("no parameter named '" + name + "'");
  }

  /// Same names and shapes, all zeros.
  ParameterStore zeros_like() const {
    ParameterStore out;
    for (const auto& t : tensors_) out.add(t.name, t.shape);
    return out;
  }

  void set_zero() {
    for (auto& t : tensors_) std::fill(t.data.begin(), t.data.end(), Scalar(0));
  }

  bool same_layout(const ParameterStore& other) const {
    if (other.size() != size()) return false;
    for (std::size_t i = 0; i < size(); ++i) {
      if (tensors_[i].name != other[i].name || tensors_[i].shape != other[i].shape) return false;
    }
    return true;
  }

  template <typename To>
  ParameterStore<To> cast() const {
    ParameterStore<To> out;
    for (const auto& t : tensors_) {
      const std::size_t i = out.add(t.name, t.shape);
      for (std::size_t j = 0; j < t.size(); ++j) out[i].data[j] = static_cast<To>(t.data[j]);
    }
    return out;
  }

 private:
  std::vector<Tensor<Scalar>> tensors_;
};

}  // namespace fdp::nn
