#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace sarc {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

/// Dense row-major float64 array with an optional gradient buffer.
///
/// A Tensor is a handle: copies share storage, which is what lets the tape
/// write gradients into parameters held elsewhere. Use clone() for a deep copy.
class Tensor {
   public:
    Tensor() = default;
    explicit Tensor(Shape shape, bool requires_grad = false);
    Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor from_matrix(const Eigen::Ref<const RowMatrix>& m, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(s_); }
    const Shape& shape() const { return s_->shape; }
    std::size_t rank() const { return s_->shape.size(); }
    std::size_t dim(std::size_t axis) const { return s_->shape.at(axis); }
    std::size_t size() const { return s_->values.size(); }

    std::span<double> values() { return s_->values; }
    std::span<const double> values() const { return s_->values; }
    double item() const;

    /// Rows = size / last dim; rank-0 and rank-1 tensors are a single row.
    MatrixMap matrix();
    ConstMatrixMap matrix() const;

    bool requires_grad() const { return s_->requires_grad; }
    void set_requires_grad(bool on) { s_->requires_grad = on; }

    bool has_grad() const { return !s_->grad.empty(); }
    std::span<const double> grad() const { return s_->grad; }
    /// Gradient storage, zero-initialised on first access.
    std::span<double> grad_buffer() const;
    ConstMatrixMap grad_matrix() const;
    void zero_grad() { s_->grad.clear(); }

    Tensor clone() const;
    bool shares_storage_with(const Tensor& other) const { return s_ == other.s_; }

   private:
    struct Storage {
        Shape shape;
        std::vector<double> values;
        std::vector<double> grad;
        bool requires_grad = false;
    };
    std::shared_ptr<Storage> s_;
};

/// Execution-ordered record of differentiable operations.
class Tape {
   public:
    using BackwardFn = std::function<void()>;

    void record(std::vector<Tensor> inputs, Tensor output, BackwardFn backward);
    std::size_t size() const { return entries_.size(); }
    void clear() { entries_.clear(); }

   private:
    struct Entry {
        std::vector<Tensor> inputs;
        Tensor output;
        BackwardFn backward;
    };
    std::vector<Entry> entries_;

    friend void backward(Tape& tape, const Tensor& loss);
};

/// Seeds d(loss)/d(loss) = 1 and replays the tape in reverse. Gradients
/// accumulate, so callers zero parameter grads between steps.
void backward(Tape& tape, const Tensor& loss);

// Differentiable primitives. Each records itself on the tape when any input
// requires a gradient.

/// Elementwise a + b; b may also match a trailing suffix of a's shape.
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& a, double factor);
Tensor sum(Tape& tape, const Tensor& a);
Tensor mean(Tape& tape, const Tensor& a);

/// Batched product over the last two axes with numpy-style broadcasting of
/// the leading axes.
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

/// Softmax over the last axis restricted to positions where mask is 1.
/// mask has x's shape, or [x.dim(0), x.dim(-1)] to broadcast over middle axes.
Tensor softmax_masked(Tape& tape, const Tensor& x, const Tensor& mask);

Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

/// tanh approximation with the 0.044715 cubic coefficient.
Tensor gelu(Tape& tape, const Tensor& x);

/// Inverted dropout; identity when p == 0.
Tensor dropout(Tape& tape, const Tensor& x, double p, std::mt19937_64& rng);

Tensor reshape(Tape& tape, const Tensor& x, Shape shape);
Tensor permute(Tape& tape, const Tensor& x, std::span<const std::size_t> order);
/// Swaps the last two axes.
Tensor transpose(Tape& tape, const Tensor& x);

/// Gathers rows of table[V, d]; result shape is index_shape + [d].
Tensor embedding_lookup(Tape& tape, const Tensor& table, std::span<const int> ids, const Shape& index_shape);

/// x[b, L, d] -> x[:, position, :] with shape [b, d].
Tensor take_position(Tape& tape, const Tensor& x, std::size_t position);

/// Mean negative log-likelihood of the gold class over logits[b, C].
Tensor cross_entropy(Tape& tape, const Tensor& logits, std::span<const int> labels);

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t worst_input = 0;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

/// Compares tape gradients of a scalar function against central differences.
/// Relative error per entry is |a - n| / max(|a|, |n|, 1e-8).
GradCheckResult grad_check(const std::function<Tensor(Tape&)>& f, std::span<Tensor> inputs, double eps = 1e-5);

}  // namespace sarc
