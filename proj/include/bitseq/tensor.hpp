#pragma once

#include <cassert>
#include <cstdint>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

namespace bitseq {

/// Dense row-major float tensor. Copies are shallow (storage is shared);
/// use clone() for an independent buffer.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape)
      : shape_(std::move(shape)),
        data_(std::make_shared<std::vector<float>>(count(shape_), 0.0f)) {}

  Tensor(std::vector<int> shape, std::vector<float> values)
      : shape_(std::move(shape)),
        data_(std::make_shared<std::vector<float>>(std::move(values))) {
    assert(count(shape_) == static_cast<std::int64_t>(data_->size()) &&
           "shape does not match value count");
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<int> shape, float v) {
    Tensor t(std::move(shape));
    std::fill(t.data_->begin(), t.data_->end(), v);
    return t;
  }

  static Tensor scalar(float v) { return Tensor({1}, {v}); }

  const std::vector<int>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  std::int64_t numel() const { return count(shape_); }

  // 2-D conveniences; valid only for matrices.
  int rows() const { return shape_[0]; }
  int cols() const { return shape_[1]; }

  float* data() { return data_->data(); }
  const float* data() const { return data_->data(); }
  std::vector<float>& vec() { return *data_; }
  const std::vector<float>& vec() const { return *data_; }

  float& at(int i) { return (*data_)[static_cast<size_t>(i)]; }
  float at(int i) const { return (*data_)[static_cast<size_t>(i)]; }
  float& at(int r, int c) { return (*data_)[static_cast<size_t>(r) * cols() + c]; }
  float at(int r, int c) const { return (*data_)[static_cast<size_t>(r) * cols() + c]; }

  Tensor clone() const {
    Tensor t;
    t.shape_ = shape_;
    t.data_ = std::make_shared<std::vector<float>>(*data_);
    return t;
  }

  bool defined() const { return data_ != nullptr; }
  bool tracked() const { return node >= 0; }
  bool same_storage(const Tensor& other) const { return data_ == other.data_; }

  /// Tape node handle; -1 marks a constant (not on any tape).
  int node = -1;

 private:
  static std::int64_t count(const std::vector<int>& s) {
    std::int64_t n = 1;
    for (int d : s) n *= d;
    return n;
  }

  std::vector<int> shape_;
  std::shared_ptr<std::vector<float>> data_;
};

/// Trainable tensor with a persistent gradient buffer. Layers hold parameters
/// through shared_ptr so weight tying is plain handle sharing.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool no_decay = false;  // LayerNorm gains and biases skip weight decay

  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros(value.shape())) {}

  void zero_grad() { std::fill(grad.vec().begin(), grad.vec().end(), 0.0f); }
};

using ParamPtr = std::shared_ptr<Parameter>;

inline ParamPtr make_param(std::string name, Tensor v, bool no_decay = false) {
  auto p = std::make_shared<Parameter>(std::move(name), std::move(v));
  p->no_decay = no_decay;
  return p;
}

}  // namespace bitseq
