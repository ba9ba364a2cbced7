#pragma once

#include <functional>
#include <memory>
#include <span>

#include "watt/common.hpp"

namespace watt {

// Dense row-major tensor with optional gradient buffer. Tensor is a cheap
// shared handle; clone() deep-copies. Differentiable ops record their
// adjoints on the active Tape (see TapeScope); with no tape active the same
// ops run forward-only.
template <typename T>
class Tensor {
 public:
  struct Impl {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;  // empty until materialized
    bool requires_grad = false;
  };

  Tensor() = default;

  static Tensor zeros(Shape shape) {
    Tensor t;
    t.impl_ = std::make_shared<Impl>();
    t.impl_->shape = std::move(shape);
    t.impl_->data.assign(static_cast<size_t>(watt::numel(t.impl_->shape)), T{0});
    return t;
  }

  static Tensor full(Shape shape, T value) {
    Tensor t = zeros(std::move(shape));
    std::fill(t.impl_->data.begin(), t.impl_->data.end(), value);
    return t;
  }

  static Tensor from(Shape shape, std::vector<T> values) {
    if (watt::numel(shape) != static_cast<int64_t>(values.size()))
      throw ConfigError("tensor init: " + shape_str(shape) + " needs " +
                        std::to_string(watt::numel(shape)) + " values, got " +
                        std::to_string(values.size()));
    Tensor t;
    t.impl_ = std::make_shared<Impl>();
    t.impl_->shape = std::move(shape);
    t.impl_->data = std::move(values);
    return t;
  }

  static Tensor scalar(T value) { return from({1}, {value}); }

  static Tensor randn(Shape shape, Rng& rng, T stddev = T{1}) {
    Tensor t = zeros(std::move(shape));
    for (auto& v : t.impl_->data) v = static_cast<T>(rng.normal() * static_cast<double>(stddev));
    return t;
  }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int64_t numel() const { return static_cast<int64_t>(impl_->data.size()); }
  int64_t dim(size_t i) const { return impl_->shape.at(i); }
  size_t rank() const { return impl_->shape.size(); }

  std::span<T> data() { return impl_->data; }
  std::span<const T> data() const { return impl_->data; }

  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  Tensor& set_requires_grad(bool v = true) {
    impl_->requires_grad = v;
    return *this;
  }

  void ensure_grad() {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), T{0});
  }
  bool has_grad() const { return impl_ && !impl_->grad.empty(); }
  std::span<T> grad() {
    ensure_grad();
    return impl_->grad;
  }
  void zero_grad() {
    if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), T{0});
  }

  T item() const {
    if (numel() != 1) throw ConfigError("item(): tensor has " + std::to_string(numel()) + " elements");
    return impl_->data[0];
  }

  T& at(std::initializer_list<int64_t> idx) {
    return impl_->data[static_cast<size_t>(offset_of(idx))];
  }
  T at(std::initializer_list<int64_t> idx) const {
    return impl_->data[static_cast<size_t>(offset_of(idx))];
  }

  Tensor clone() const {
    Tensor t;
    t.impl_ = std::make_shared<Impl>(*impl_);
    return t;
  }

  // Reverse-mode entry point; defined in tensor.cpp (needs Tape).
  void backward();

  std::shared_ptr<Impl> impl_;

 private:
  int64_t offset_of(std::initializer_list<int64_t> idx) const {
    if (idx.size() != rank()) throw ConfigError("index rank mismatch");
    int64_t off = 0;
    size_t i = 0;
    for (int64_t v : idx) {
      off = off * impl_->shape[i] + v;
      ++i;
    }
    return off;
  }
};

// Ordered record of executed differentiable ops. Replaying entries in
// reverse applies each adjoint exactly once; accumulation into .grad is
// additive, so fan-out sums naturally.
template <typename T>
class Tape {
 public:
  void record(std::function<void()> adjoint) { entries_.push_back(std::move(adjoint)); }
  size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

  void backward_from(Tensor<T>& loss) {
    if (loss.numel() != 1)
      throw ConfigError("backward: loss must be scalar, got " + shape_str(loss.shape()));
    loss.ensure_grad();
    loss.grad()[0] = T{1};
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
  }

  static Tape*& active() {
    thread_local Tape* current = nullptr;
    return current;
  }

 private:
  std::vector<std::function<void()>> entries_;
};

// RAII scope that makes a fresh tape active on this thread.
template <typename T>
class TapeScope {
 public:
  TapeScope() : prev_(Tape<T>::active()) { Tape<T>::active() = &tape_; }
  ~TapeScope() { Tape<T>::active() = prev_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;
  Tape<T>& tape() { return tape_; }

 private:
  Tape<T> tape_;
  Tape<T>* prev_;
};

template <typename T>
void Tensor<T>::backward() {
  Tape<T>* tape = Tape<T>::active();
  if (!tape) throw ConfigError("backward: no active tape (wrap the forward pass in a TapeScope)");
  tape->backward_from(*this);
}

enum class Padding { Same, Valid };

// --- elementwise (broadcast over singleton dims) ---
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, T s);
template <typename T> Tensor<T> mul_scalar(const Tensor<T>& a, T s);

// --- activations & pointwise ---
template <typename T> Tensor<T> relu(const Tensor<T>& x);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T> Tensor<T> log_(const Tensor<T>& x);
template <typename T> Tensor<T> sqrt_(const Tensor<T>& x);
template <typename T> Tensor<T> clamp(const Tensor<T>& x, T lo, T hi);
template <typename T> Tensor<T> softmax(const Tensor<T>& x, int axis);

// --- linear algebra & reductions ---
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> mean(const Tensor<T>& x);
template <typename T> Tensor<T> sum_axis(const Tensor<T>& x, int axis);  // keeps dim

// --- shape ops ---
template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <typename T> Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b, int axis);

// --- channel statistics over NCHW (for spatial attention) ---
template <typename T> Tensor<T> channel_mean(const Tensor<T>& x);  // [N,1,H,W]
template <typename T> Tensor<T> channel_max(const Tensor<T>& x);   // [N,1,H,W]

}  // namespace watt
