// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode automatic differentiation over dense row-major tensors of
// 64-bit reals. A thread-local Tape records operations whose inputs require
// gradients; Tape::backward replays the recorded closures in reverse.
// Independent tapes on different threads share no mutable state.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace neutex {

using Shape = std::vector<long>;

long shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tape;

namespace detail {
struct TensorData {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;  // empty until touched by backward
    bool requires_grad = false;
    Tape* tape = nullptr;  // tape this node was recorded on, if any
};
}  // namespace detail

// Value-semantic handle to a shared tensor node. Copies alias the same
// storage; all math goes through the free functions below.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor from_vector(Shape shape, std::vector<double> values,
                              bool requires_grad = false);

    bool defined() const { return p_ != nullptr; }
    const Shape& shape() const { return p_->shape; }
    long numel() const { return static_cast<long>(p_->values.size()); }
    long dim(int i) const { return p_->shape[static_cast<size_t>(i)]; }
    int rank() const { return static_cast<int>(p_->shape.size()); }
    bool requires_grad() const { return p_->requires_grad; }
    void set_requires_grad(bool rg) { p_->requires_grad = rg; }

    std::span<double> data() { return p_->values; }
    std::span<const double> data() const { return p_->values; }
    double value() const;  // scalar tensors only

    bool has_grad() const { return !p_->grad.empty(); }
    std::span<double> grad();        // allocates zeros on first use
    std::span<const double> grad() const;
    void zero_grad();
    void clear_grad() { p_->grad.clear(); }

    // NaN/Inf anywhere in values is an error state; throws naming `what`.
    void check_finite(const std::string& what) const;

    Tape* tape() const { return p_->tape; }

    detail::TensorData* node() const { return p_.get(); }

  private:
    explicit Tensor(std::shared_ptr<detail::TensorData> p) : p_(std::move(p)) {}
    std::shared_ptr<detail::TensorData> p_;

    friend Tensor make_result(Shape shape, std::vector<double> values,
                              bool requires_grad);
};

// Records backward closures for one forward pass. Create a TapeScope to make
// a tape active on the current thread; operations record themselves only
// when at least one input requires a gradient.
class Tape {
  public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    void record(std::function<void()> backward_fn);
    size_t size() const { return ops_.size(); }

    // Seeds d(root)/d(root)=1 and propagates to every leaf. `root` must be a
    // scalar produced on this tape. Calling twice without reset() throws.
    void backward(const Tensor& root);
    void reset();

    static Tape* current();

  private:
    std::vector<std::function<void()>> ops_;
    bool consumed_ = false;
    friend class TapeScope;
};

class TapeScope {
  public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

  private:
    Tape* previous_;
};

// ---- elementwise binary (numpy-style right-aligned broadcasting) ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

// ---- elementwise unary ----
Tensor neg(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sin(const Tensor& a);
Tensor cos(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor square(const Tensor& a);
Tensor scale(const Tensor& a, double factor);
Tensor add_const(const Tensor& a, double constant);
Tensor clamp_max(const Tensor& a, double limit);

// ---- linear algebra / structure ----
Tensor matmul(const Tensor& a, const Tensor& b);  // rank-2 only
Tensor sum(const Tensor& a);                      // all elements -> scalar
Tensor sum(const Tensor& a, int axis, bool keepdim = false);
Tensor mean(const Tensor& a);
Tensor mean(const Tensor& a, int axis, bool keepdim = false);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& a, int axis, long start, long stop);
Tensor reshape(const Tensor& a, Shape shape);
Tensor broadcast_to(const Tensor& a, const Shape& shape);
// Euclidean norm along the last axis, kept as a size-1 axis. Rows with norm
// below `degenerate_eps` throw (degenerate direction).
Tensor l2norm(const Tensor& a, double degenerate_eps = 0.0);
// Gathers rows of a rank-2 tensor; gradient scatters additively.
Tensor index_select(const Tensor& a, const std::vector<long>& rows);
// Exclusive prefix sum along the last axis: out[..., i] = sum_{j<i} a[..., j].
Tensor cumsum_exclusive(const Tensor& a);

// Dispatch by name; kinds: add, sub, mul, matmul, sum, mean, exp, log, sin,
// cos, relu, softplus, sigmoid, tanh, square, concat, slice, broadcast,
// l2norm. Unary/binary kinds take 1 or 2 inputs; concat takes all inputs.
Tensor tensor_op(const std::string& kind, const std::vector<Tensor>& inputs);

Shape broadcast_shapes(const Shape& a, const Shape& b);

}  // namespace neutex
