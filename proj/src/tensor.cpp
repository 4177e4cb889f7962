#include "sarc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "sarc/error.hpp"

namespace sarc {

std::size_t numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "," : "") << shape[i];
    out << ']';
    return out.str();
}

Tensor::Tensor(Shape shape, bool requires_grad) : s_(std::make_shared<Storage>()) {
    s_->values.assign(numel(shape), 0.0);
    s_->shape = std::move(shape);
    s_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) : s_(std::make_shared<Storage>()) {
    if (values.size() != numel(shape))
        throw Error(ErrorKind::Shape, "value count " + std::to_string(values.size()) + " does not match shape " +
                                          to_string(shape));
    s_->shape = std::move(shape);
    s_->values = std::move(values);
    s_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor({}, {value}, requires_grad); }

Tensor Tensor::from_matrix(const Eigen::Ref<const RowMatrix>& m, bool requires_grad) {
    Tensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())}, requires_grad);
    t.matrix() = m;
    return t;
}

double Tensor::item() const {
    if (size() != 1) throw Error(ErrorKind::Shape, "item() on tensor of shape " + to_string(shape()));
    return s_->values[0];
}

namespace {

std::pair<Eigen::Index, Eigen::Index> matrix_dims(const Shape& shape, std::size_t n) {
    const std::size_t cols = shape.empty() ? 1 : shape.back();
    const std::size_t rows = cols == 0 ? 0 : n / cols;
    return {static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

}  // namespace

MatrixMap Tensor::matrix() {
    auto [r, c] = matrix_dims(shape(), size());
    return MatrixMap(s_->values.data(), r, c);
}

ConstMatrixMap Tensor::matrix() const {
    auto [r, c] = matrix_dims(shape(), size());
    return ConstMatrixMap(s_->values.data(), r, c);
}

std::span<double> Tensor::grad_buffer() const {
    if (s_->grad.empty()) s_->grad.assign(s_->values.size(), 0.0);
    return s_->grad;
}

ConstMatrixMap Tensor::grad_matrix() const {
    if (!has_grad()) throw Error(ErrorKind::InvalidArgument, "tensor has no gradient");
    auto [r, c] = matrix_dims(shape(), size());
    return ConstMatrixMap(s_->grad.data(), r, c);
}

Tensor Tensor::clone() const {
    Tensor t(shape(), std::vector<double>(values().begin(), values().end()), requires_grad());
    return t;
}

void Tape::record(std::vector<Tensor> inputs, Tensor output, BackwardFn backward) {
    entries_.push_back({std::move(inputs), std::move(output), std::move(backward)});
}

void backward(Tape& tape, const Tensor& loss) {
    if (loss.size() != 1) throw Error(ErrorKind::Shape, "backward needs a scalar loss, got " + to_string(loss.shape()));
    if (!loss.requires_grad()) return;
    Tensor seed = loss;
    seed.grad_buffer()[0] += 1.0;
    for (auto it = tape.entries_.rbegin(); it != tape.entries_.rend(); ++it) {
        if (it->output.has_grad()) it->backward();
    }
}

namespace {

bool needs_grad(std::initializer_list<const Tensor*> inputs) {
    return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t->requires_grad(); });
}

Eigen::Map<Eigen::VectorXd> vec(std::span<double> s) {
    return {s.data(), static_cast<Eigen::Index>(s.size())};
}
Eigen::Map<const Eigen::VectorXd> vec(std::span<const double> s) {
    return {s.data(), static_cast<Eigen::Index>(s.size())};
}
MatrixMap mat(std::span<double> s, std::size_t rows, std::size_t cols) {
    return {s.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}
ConstMatrixMap mat(std::span<const double> s, std::size_t rows, std::size_t cols) {
    return {s.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

bool is_suffix(const Shape& whole, const Shape& part) {
    return part.size() <= whole.size() && std::equal(part.rbegin(), part.rend(), whole.rbegin());
}

}  // namespace

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
    if (!is_suffix(a.shape(), b.shape()))
        throw Error(ErrorKind::Shape, "add: cannot broadcast " + to_string(b.shape()) + " onto " + to_string(a.shape()));
    const std::size_t inner = b.size();
    const std::size_t reps = inner == 0 ? 0 : a.size() / inner;

    Tensor out(a.shape(), std::vector<double>(a.values().begin(), a.values().end()));
    mat(out.values(), reps, inner).rowwise() += vec(b.values()).transpose();

    if (needs_grad({&a, &b})) {
        out.set_requires_grad(true);
        tape.record({a, b}, out, [a, b, out, reps, inner]() mutable {
            auto g = vec(out.grad());
            if (a.requires_grad()) vec(a.grad_buffer()) += g;
            if (b.requires_grad()) vec(b.grad_buffer()) += mat(out.grad(), reps, inner).colwise().sum().transpose();
        });
    }
    return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw Error(ErrorKind::Shape, "mul: shapes " + to_string(a.shape()) + " and " + to_string(b.shape()) + " differ");
    Tensor out(a.shape());
    vec(out.values()) = vec(a.values()).cwiseProduct(vec(b.values()));
    if (needs_grad({&a, &b})) {
        out.set_requires_grad(true);
        tape.record({a, b}, out, [a, b, out]() mutable {
            auto g = vec(out.grad());
            if (a.requires_grad()) vec(a.grad_buffer()) += g.cwiseProduct(vec(b.values()));
            if (b.requires_grad()) vec(b.grad_buffer()) += g.cwiseProduct(vec(a.values()));
        });
    }
    return out;
}

Tensor scale(Tape& tape, const Tensor& a, double factor) {
    Tensor out(a.shape());
    vec(out.values()) = vec(a.values()) * factor;
    if (a.requires_grad()) {
        out.set_requires_grad(true);
        tape.record({a}, out, [a, out, factor]() mutable { vec(a.grad_buffer()) += factor * vec(out.grad()); });
    }
    return out;
}

Tensor sum(Tape& tape, const Tensor& a) {
    Tensor out = Tensor::scalar(vec(a.values()).sum());
    if (a.requires_grad()) {
        out.set_requires_grad(true);
        tape.record({a}, out, [a, out]() mutable { vec(a.grad_buffer()).array() += out.grad()[0]; });
    }
    return out;
}

Tensor mean(Tape& tape, const Tensor& a) {
    if (a.size() == 0) throw Error(ErrorKind::Shape, "mean of an empty tensor");
    const double n = static_cast<double>(a.size());
    Tensor out = Tensor::scalar(vec(a.values()).sum() / n);
    if (a.requires_grad()) {
        out.set_requires_grad(true);
        tape.record({a}, out, [a, out, n]() mutable { vec(a.grad_buffer()).array() += out.grad()[0] / n; });
    }
    return out;
}

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
    auto mismatch = [&] {
        return Error(ErrorKind::Shape, "matmul: incompatible shapes " + to_string(a.shape()) + " and " +
                                           to_string(b.shape()));
    };
    if (a.rank() < 2 || b.rank() < 2) throw mismatch();
    const std::size_t p = a.shape()[a.rank() - 2];
    const std::size_t q = a.shape().back();
    const std::size_t r = b.shape().back();
    if (b.shape()[b.rank() - 2] != q) throw mismatch();

    const Shape batch_a(a.shape().begin(), a.shape().end() - 2);
    const Shape batch_b(b.shape().begin(), b.shape().end() - 2);
    const std::size_t rank = std::max(batch_a.size(), batch_b.size());
    Shape batch(rank);
    std::vector<std::size_t> stride_a(rank, 0), stride_b(rank, 0);
    {
        std::size_t sa = 1, sb = 1;
        for (std::size_t k = 0; k < rank; ++k) {
            const std::size_t i = rank - 1 - k;
            const std::size_t da = k < batch_a.size() ? batch_a[batch_a.size() - 1 - k] : 1;
            const std::size_t db = k < batch_b.size() ? batch_b[batch_b.size() - 1 - k] : 1;
            if (da != db && da != 1 && db != 1) throw mismatch();
            batch[i] = std::max(da, db);
            stride_a[i] = da == 1 ? 0 : sa;
            stride_b[i] = db == 1 ? 0 : sb;
            sa *= da;
            sb *= db;
        }
    }
    const std::size_t n_batch = numel(batch);
    Shape out_shape = batch;
    out_shape.push_back(p);
    out_shape.push_back(r);
    Tensor out(out_shape);

    // Offsets (in matrices) of the a/b operands for each output batch entry.
    std::vector<std::size_t> off_a(n_batch), off_b(n_batch);
    for (std::size_t flat = 0; flat < n_batch; ++flat) {
        std::size_t rem = flat, oa = 0, ob = 0;
        for (std::size_t k = rank; k-- > 0;) {
            const std::size_t idx = rem % batch[k];
            rem /= batch[k];
            oa += idx * stride_a[k];
            ob += idx * stride_b[k];
        }
        off_a[flat] = oa;
        off_b[flat] = ob;
    }

    // A plain matrix on the right folds every leading axis of a into rows.
    const bool fold = batch_b.empty();
    const std::size_t a_rows_total = a.size() / q;
    if (fold) {
        mat(out.values(), a_rows_total, r).noalias() = mat(a.values(), a_rows_total, q) * mat(b.values(), q, r);
    } else {
        for (std::size_t i = 0; i < n_batch; ++i) {
            mat(out.values().subspan(i * p * r, p * r), p, r).noalias() =
                mat(a.values().subspan(off_a[i] * p * q, p * q), p, q) *
                mat(b.values().subspan(off_b[i] * q * r, q * r), q, r);
        }
    }

    if (needs_grad({&a, &b})) {
        out.set_requires_grad(true);
        tape.record({a, b}, out,
                    [a, b, out, p, q, r, fold, a_rows_total, n_batch, off_a = std::move(off_a),
                     off_b = std::move(off_b)]() mutable {
                        if (fold) {
                            auto g = mat(out.grad(), a_rows_total, r);
                            if (a.requires_grad())
                                mat(a.grad_buffer(), a_rows_total, q).noalias() += g * mat(b.values(), q, r).transpose();
                            if (b.requires_grad())
                                mat(b.grad_buffer(), q, r).noalias() +=
                                    mat(a.values(), a_rows_total, q).transpose() * g;
                            return;
                        }
                        for (std::size_t i = 0; i < n_batch; ++i) {
                            auto g = mat(out.grad().subspan(i * p * r, p * r), p, r);
                            if (a.requires_grad())
                                mat(a.grad_buffer().subspan(off_a[i] * p * q, p * q), p, q).noalias() +=
                                    g * mat(b.values().subspan(off_b[i] * q * r, q * r), q, r).transpose();
                            if (b.requires_grad())
                                mat(b.grad_buffer().subspan(off_b[i] * q * r, q * r), q, r).noalias() +=
                                    mat(a.values().subspan(off_a[i] * p * q, p * q), p, q).transpose() * g;
                        }
                    });
    }
    return out;
}

Tensor softmax_masked(Tape& tape, const Tensor& x, const Tensor& mask) {
    if (x.rank() < 1 || x.shape().back() == 0) throw Error(ErrorKind::Shape, "softmax_masked: empty last axis");
    const std::size_t len = x.shape().back();
    const std::size_t rows = x.size() / len;
    std::size_t rows_per_mask_row = 1;
    if (mask.shape() != x.shape()) {
        if (!(mask.rank() == 2 && x.rank() >= 2 && mask.dim(0) == x.dim(0) && mask.dim(1) == len))
            throw Error(ErrorKind::Shape, "softmax_masked: mask shape " + to_string(mask.shape()) +
                                              " does not fit " + to_string(x.shape()));
        rows_per_mask_row = rows / x.dim(0);
    }
    for (double m : mask.values()) {
        if (m != 0.0 && m != 1.0) throw Error(ErrorKind::InvalidArgument, "softmax_masked: mask entries must be 0 or 1");
    }

    Tensor out(x.shape());
    auto xv = x.values();
    auto yv = out.values();
    auto mv = mask.values();
    for (std::size_t row = 0; row < rows; ++row) {
        const double* m = mv.data() + (row / rows_per_mask_row) * len;
        const double* xr = xv.data() + row * len;
        double* yr = yv.data() + row * len;
        double hi = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < len; ++j) {
            if (m[j] != 0.0) hi = std::max(hi, xr[j]);
        }
        if (hi == -std::numeric_limits<double>::infinity())
            throw Error(ErrorKind::InvalidArgument, "softmax_masked: row " + std::to_string(row) + " is fully masked");
        double total = 0.0;
        for (std::size_t j = 0; j < len; ++j) {
            yr[j] = m[j] != 0.0 ? std::exp(xr[j] - hi) : 0.0;
            total += yr[j];
        }
        for (std::size_t j = 0; j < len; ++j) yr[j] /= total;
    }

    if (x.requires_grad()) {
        out.set_requires_grad(true);
        tape.record({x}, out, [x, out, rows, len]() mutable {
            auto y = mat(out.values(), rows, len);
            auto g = mat(out.grad(), rows, len);
            Eigen::VectorXd dots = y.cwiseProduct(g).rowwise().sum();
            mat(x.grad_buffer(), rows, len).array() += y.array() * (g.colwise() - dots).array();
        });
    }
    return out;
}

Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    if (x.rank() < 1 || x.shape().back() == 0) throw Error(ErrorKind::Shape, "layer_norm: empty feature axis");
    const std::size_t d = x.shape().back();
    if (gain.size() != d || bias.size() != d)
        throw Error(ErrorKind::Shape, "layer_norm: gain/bias must have " + std::to_string(d) + " entries");
    const std::size_t rows = x.size() / d;

    auto xm = mat(x.values(), rows, d);
    Eigen::VectorXd mu = xm.rowwise().mean();
    RowMatrix centered = xm.colwise() - mu;
    Eigen::VectorXd inv_std =
        ((centered.array().square().rowwise().sum() / static_cast<double>(d)) + eps).rsqrt().matrix();
    RowMatrix xhat = centered.array().colwise() * inv_std.array();

    Tensor out(x.shape());
    mat(out.values(), rows, d) =
        (xhat.array().rowwise() * vec(gain.values()).transpose().array()).rowwise() +
        vec(bias.values()).transpose().array();

    if (needs_grad({&x, &gain, &bias})) {
        out.set_requires_grad(true);
        tape.record({x, gain, bias}, out,
                    [x, gain, bias, out, rows, d, xhat = std::move(xhat), inv_std = std::move(inv_std)]() mutable {
                        auto g = mat(out.grad(), rows, d);
                        if (gain.requires_grad())
                            vec(gain.grad_buffer()) += g.cwiseProduct(xhat).colwise().sum().transpose();
                        if (bias.requires_grad()) vec(bias.grad_buffer()) += g.colwise().sum().transpose();
                        if (x.requires_grad()) {
                            RowMatrix dxhat = g.array().rowwise() * vec(gain.values()).transpose().array();
                            Eigen::VectorXd m1 = dxhat.rowwise().mean();
                            Eigen::VectorXd m2 = dxhat.cwiseProduct(xhat).rowwise().mean();
                            RowMatrix dx = dxhat.colwise() - m1;
                            dx -= (xhat.array().colwise() * m2.array()).matrix();
                            mat(x.grad_buffer(), rows, d) += (dx.array().colwise() * inv_std.array()).matrix();
                        }
                    });
    }
    return out;
}

namespace {

constexpr double kGeluCubic = 0.044715;
const double kSqrt2OverPi = std::sqrt(2.0 / M_PI);

}  // namespace

Tensor gelu(Tape& tape, const Tensor& x) {
    Tensor out(x.shape());
    auto xv = x.values();
    auto yv = out.values();
    for (std::size_t i = 0; i < xv.size(); ++i) {
        const double v = xv[i];
        yv[i] = 0.5 * v * (1.0 + std::tanh(kSqrt2OverPi * (v + kGeluCubic * v * v * v)));
    }
    if (x.requires_grad()) {
        out.set_requires_grad(true);
        tape.record({x}, out, [x, out]() mutable {
            auto xv = x.values();
            auto g = out.grad();
            auto dx = x.grad_buffer();
            for (std::size_t i = 0; i < xv.size(); ++i) {
                const double v = xv[i];
                const double t = std::tanh(kSqrt2OverPi * (v + kGeluCubic * v * v * v));
                const double dt = (1.0 - t * t) * kSqrt2OverPi * (1.0 + 3.0 * kGeluCubic * v * v);
                dx[i] += g[i] * (0.5 * (1.0 + t) + 0.5 * v * dt);
            }
        });
    }
    return out;
}

Tensor dropout(Tape& tape, const Tensor& x, double p, std::mt19937_64& rng) {
    if (!(p >= 0.0 && p < 1.0)) throw Error(ErrorKind::InvalidArgument, "dropout probability must lie in [0, 1)");
    if (p == 0.0) return x;
    std::bernoulli_distribution keep(1.0 - p);
    const double inv = 1.0 / (1.0 - p);
    std::vector<double> factors(x.size());
    for (auto& f : factors) f = keep(rng) ? inv : 0.0;

    Tensor out(x.shape());
    vec(out.values()) = vec(x.values()).cwiseProduct(vec(std::span<const double>(factors)));
    if (x.requires_grad()) {
        out.set_requires_grad(true);
        tape.record({x}, out, [x, out, factors = std::move(factors)]() mutable {
            vec(x.grad_buffer()) += vec(out.grad()).cwiseProduct(vec(std::span<const double>(factors)));
        });
    }
    return out;
}

Tensor reshape(Tape& tape, const Tensor& x, Shape shape) {
    if (numel(shape) != x.size())
        throw Error(ErrorKind::Shape, "reshape: " + to_string(x.shape()) + " -> " + to_string(shape));
    Tensor out(std::move(shape), std::vector<double>(x.values().begin(), x.values().end()));
    if (x.requires_grad()) {
        out.set_requires_grad(true);
        tape.record({x}, out, [x, out]() mutable { vec(x.grad_buffer()) += vec(out.grad()); });
    }
    return out;
}

Tensor permute(Tape& tape, const Tensor& x, std::span<const std::size_t> order) {
    const std::size_t rank = x.rank();
    std::vector<bool> seen(rank, false);
    if (order.size() != rank) throw Error(ErrorKind::Shape, "permute: order length does not match rank");
    for (auto o : order) {
        if (o >= rank || seen[o]) throw Error(ErrorKind::Shape, "permute: order is not a permutation");
        seen[o] = true;
    }

    Shape out_shape(rank);
    std::vector<std::size_t> in_stride(rank, 1), src_stride(rank);
    for (std::size_t k = rank; k-- > 1;) in_stride[k - 1] = in_stride[k] * x.dim(k);
    for (std::size_t k = 0; k < rank; ++k) {
        out_shape[k] = x.dim(order[k]);
        src_stride[k] = in_stride[order[k]];
    }

    // gather[i] = source offset of output element i.
    const std::size_t n = x.size();
    std::vector<std::size_t> gather(n);
    std::vector<std::size_t> idx(rank, 0);
    std::size_t src = 0;
    for (std::size_t i = 0; i < n; ++i) {
        gather[i] = src;
        for (std::size_t k = rank; k-- > 0;) {
            if (++idx[k] < out_shape[k]) {
                src += src_stride[k];
                break;
            }
            src -= src_stride[k] * (out_shape[k] - 1);
            idx[k] = 0;
        }
    }

    Tensor out(out_shape);
    auto xv = x.values();
    auto yv = out.values();
    for (std::size_t i = 0; i < n; ++i) yv[i] = xv[gather[i]];
    if (x.requires_grad()) {
        out.set_requires_grad(true);
        tape.record({x}, out, [x, out, gather = std::move(gather)]() mutable {
            auto g = out.grad();
            auto dx = x.grad_buffer();
            for (std::size_t i = 0; i < gather.size(); ++i) dx[gather[i]] += g[i];
        });
    }
    return out;
}

Tensor transpose(Tape& tape, const Tensor& x) {
    if (x.rank() < 2) throw Error(ErrorKind::Shape, "transpose needs rank >= 2");
    std::vector<std::size_t> order(x.rank());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::swap(order[x.rank() - 1], order[x.rank() - 2]);
    return permute(tape, x, order);
}

Tensor embedding_lookup(Tape& tape, const Tensor& table, std::span<const int> ids, const Shape& index_shape) {
    if (table.rank() != 2) throw Error(ErrorKind::Shape, "embedding table must be rank 2");
    if (numel(index_shape) != ids.size()) throw Error(ErrorKind::Shape, "embedding_lookup: ids do not fill index shape");
    const std::size_t rows = table.dim(0);
    const std::size_t d = table.dim(1);
    for (int id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= rows)
            throw Error(ErrorKind::InvalidArgument,
                        "token id " + std::to_string(id) + " outside embedding table of " + std::to_string(rows));
    }
    Shape out_shape = index_shape;
    out_shape.push_back(d);
    Tensor out(out_shape);
    auto tv = mat(table.values(), rows, d);
    auto ov = mat(out.values(), ids.size(), d);
    for (std::size_t i = 0; i < ids.size(); ++i) ov.row(static_cast<Eigen::Index>(i)) = tv.row(ids[i]);

    if (table.requires_grad()) {
        out.set_requires_grad(true);
        tape.record({table}, out, [table, out, rows, d, ids = std::vector<int>(ids.begin(), ids.end())]() mutable {
            auto g = mat(out.grad(), ids.size(), d);
            auto dt = mat(table.grad_buffer(), rows, d);
            for (std::size_t i = 0; i < ids.size(); ++i) dt.row(ids[i]) += g.row(static_cast<Eigen::Index>(i));
        });
    }
    return out;
}

Tensor take_position(Tape& tape, const Tensor& x, std::size_t position) {
    if (x.rank() != 3 || position >= x.dim(1))
        throw Error(ErrorKind::Shape, "take_position: position " + std::to_string(position) + " invalid for " +
                                          to_string(x.shape()));
    const std::size_t b = x.dim(0), len = x.dim(1), d = x.dim(2);
    Tensor out({b, d});
    for (std::size_t i = 0; i < b; ++i) {
        std::copy_n(x.values().begin() + static_cast<std::ptrdiff_t>((i * len + position) * d), d,
                    out.values().begin() + static_cast<std::ptrdiff_t>(i * d));
    }
    if (x.requires_grad()) {
        out.set_requires_grad(true);
        tape.record({x}, out, [x, out, b, len, d, position]() mutable {
            auto g = out.grad();
            auto dx = x.grad_buffer();
            for (std::size_t i = 0; i < b; ++i) {
                for (std::size_t j = 0; j < d; ++j) dx[(i * len + position) * d + j] += g[i * d + j];
            }
        });
    }
    return out;
}

Tensor cross_entropy(Tape& tape, const Tensor& logits, std::span<const int> labels) {
    if (logits.rank() != 2) throw Error(ErrorKind::Shape, "cross_entropy expects logits[b, C]");
    const std::size_t b = logits.dim(0), classes = logits.dim(1);
    if (b == 0) throw Error(ErrorKind::Shape, "cross_entropy on an empty batch");
    if (labels.size() != b) throw Error(ErrorKind::Shape, "cross_entropy: label count does not match batch");
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= classes)
            throw Error(ErrorKind::InvalidArgument, "label " + std::to_string(y) + " outside [0, " +
                                                        std::to_string(classes) + ")");
    }

    auto z = mat(logits.values(), b, classes);
    RowMatrix probs(b, classes);
    double loss = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        const double hi = z.row(row).maxCoeff();
        auto e = (z.row(row).array() - hi).exp();
        const double total = e.sum();
        probs.row(row) = e / total;
        loss += -(z(row, labels[i]) - hi - std::log(total));
    }
    Tensor out = Tensor::scalar(loss / static_cast<double>(b));

    if (logits.requires_grad()) {
        out.set_requires_grad(true);
        tape.record({logits}, out,
                    [logits, out, b, classes, probs = std::move(probs),
                     labels = std::vector<int>(labels.begin(), labels.end())]() mutable {
                        RowMatrix g = probs;
                        for (std::size_t i = 0; i < b; ++i) g(static_cast<Eigen::Index>(i), labels[i]) -= 1.0;
                        mat(logits.grad_buffer(), b, classes) += (out.grad()[0] / static_cast<double>(b)) * g;
                    });
    }
    return out;
}

GradCheckResult grad_check(const std::function<Tensor(Tape&)>& f, std::span<Tensor> inputs, double eps) {
    for (auto& t : inputs) {
        t.set_requires_grad(true);
        t.zero_grad();
    }
    {
        Tape tape;
        Tensor y = f(tape);
        backward(tape, y);
    }
    std::vector<std::vector<double>> analytic;
    for (auto& t : inputs) {
        auto g = t.grad_buffer();
        analytic.emplace_back(g.begin(), g.end());
    }

    auto eval = [&f] {
        Tape tape;
        return f(tape).item();
    };

    GradCheckResult result;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        auto values = inputs[k].values();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + eps;
            const double up = eval();
            values[i] = saved - eps;
            const double down = eval();
            values[i] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double a = analytic[k][i];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            const double rel = std::abs(a - numeric) / denom;
            if (rel > result.max_relative_error) result = {rel, k, i, a, numeric};
        }
    }
    return result;
}

}  // namespace sarc
