#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "sarc/error.hpp"
#include "sarc/tensor.hpp"

using namespace sarc;
using sarc::testing::central_difference;
using sarc::testing::max_relative_error;
using sarc::testing::random_values;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, bool requires_grad = true, double scale = 1.0) {
    const auto n = numel(shape);
    return Tensor(std::move(shape), random_values(n, rng, scale), requires_grad);
}

// Tape gradient of f w.r.t. x, against the independent central-difference oracle.
double fd_error(const std::function<Tensor(Tape&)>& f, Tensor x) {
    x.zero_grad();
    x.set_requires_grad(true);
    {
        Tape tape;
        backward(tape, f(tape));
    }
    std::vector<double> analytic(x.grad_buffer().begin(), x.grad_buffer().end());
    auto numeric = central_difference(
        [&] {
            Tape tape;
            return f(tape).item();
        },
        x.values());
    return max_relative_error(analytic, numeric);
}

// Contract a tensor to a scalar with fixed random weights so no gradient
// entry is trivially symmetric.
Tensor project(Tape& tape, const Tensor& y, const Tensor& w) { return sum(tape, mul(tape, y, w)); }

}  // namespace

TEST_CASE("matmul: identity and hand product") {
    Tape tape;
    RowMatrix m(3, 2);
    m << 1, 2, 3, 4, 5, 6;
    auto eye = Tensor::from_matrix(RowMatrix::Identity(3, 3));
    CHECK(matmul(tape, eye, Tensor::from_matrix(m)).matrix() == m);

    RowMatrix a(2, 2), b(2, 1);
    a << 1, 2, 3, 4;
    b << 5, 6;
    auto c = matmul(tape, Tensor::from_matrix(a), Tensor::from_matrix(b));
    CHECK(c.shape() == Shape{2, 1});
    CHECK(c.values()[0] == 17.0);
    CHECK(c.values()[1] == 39.0);
}

TEST_CASE("matmul: gradient matches central differences on 3x4 * 4x2") {
    std::mt19937_64 rng(3);
    Tensor a = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({4, 2}, rng);
    Tensor w = random_tensor({3, 2}, rng, false);
    auto f = [&](Tape& t) { return project(t, matmul(t, a, b), w); };
    CHECK(fd_error(f, a) < 1e-6);
    CHECK(fd_error(f, b) < 1e-6);
}

TEST_CASE("matmul: batched operands broadcast over leading axes") {
    std::mt19937_64 rng(4);
    Tensor a = random_tensor({2, 1, 3, 4}, rng);
    Tensor b = random_tensor({3, 4, 2}, rng);
    Tensor w = random_tensor({2, 3, 3, 2}, rng, false);
    auto f = [&](Tape& t) { return project(t, matmul(t, a, b), w); };
    CHECK(fd_error(f, a) < 1e-6);
    CHECK(fd_error(f, b) < 1e-6);

    // Slice (1, 2) of the output is a[1, 0] * b[2].
    Tape tape;
    auto c = matmul(tape, a, b);
    CHECK(c.shape() == Shape{2, 3, 3, 2});
    RowMatrix a10 = ConstMatrixMap(a.values().data() + 12, 3, 4);
    RowMatrix b2 = ConstMatrixMap(b.values().data() + 16, 4, 2);
    RowMatrix c12 = ConstMatrixMap(c.values().data() + (1 * 3 + 2) * 6, 3, 2);
    CHECK((c12 - a10 * b2).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("matmul: shape mismatch names both shapes") {
    Tape tape;
    Tensor a({2, 3});
    Tensor b({4, 2});
    try {
        matmul(tape, a, b);
        FAIL("expected a shape error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Shape);
        CHECK(std::string(e.what()).find("[2,3]") != std::string::npos);
        CHECK(std::string(e.what()).find("[4,2]") != std::string::npos);
    }
}

TEST_CASE("softmax_masked: fixed cases") {
    Tape tape;
    Tensor x({1, 4}, {0.3, 0.3, 0.3, 0.3});
    Tensor full({1, 4}, {1, 1, 1, 1});
    auto uniform = softmax_masked(tape, x, full);
    for (double v : uniform.values()) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));

    Tensor row({1, 2}, {0.0, 0.0});
    Tensor half({1, 2}, {1, 0});
    auto y = softmax_masked(tape, row, half);
    CHECK(y.values()[0] == 1.0);
    CHECK(y.values()[1] == 0.0);

    Tensor none({1, 2}, {0, 0});
    CHECK_THROWS_AS(softmax_masked(tape, row, none), Error);
}

TEST_CASE("softmax_masked: gradient on a 2x5 row pair") {
    std::mt19937_64 rng(5);
    Tensor x = random_tensor({2, 5}, rng);
    Tensor mask({2, 5}, {1, 1, 0, 1, 1, 1, 0, 1, 1, 0});
    Tensor w = random_tensor({2, 5}, rng, false);
    CHECK(fd_error([&](Tape& t) { return project(t, softmax_masked(t, x, mask), w); }, x) < 1e-6);
}

TEST_CASE("softmax_masked: rows sum to one and masked entries are exactly zero") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor x = random_tensor({3, 2, 7}, rng, false, 5.0);
        Tensor mask({3, 7});
        std::bernoulli_distribution on(0.6);
        for (std::size_t r = 0; r < 3; ++r) {
            mask.values()[r * 7] = 1.0;
            for (std::size_t j = 1; j < 7; ++j) mask.values()[r * 7 + j] = on(rng) ? 1.0 : 0.0;
        }
        Tape tape;
        auto y = softmax_masked(tape, x, mask);
        auto ym = y.matrix();
        for (Eigen::Index row = 0; row < ym.rows(); ++row) {
            CHECK(std::abs(ym.row(row).sum() - 1.0) < 1e-12);
            const auto b = static_cast<std::size_t>(row) / 2;
            for (Eigen::Index j = 0; j < 7; ++j) {
                if (mask.values()[b * 7 + static_cast<std::size_t>(j)] == 0.0) CHECK(ym(row, j) == 0.0);
            }
        }
    }
}

TEST_CASE("layer_norm: fixed cases and gradient") {
    Tape tape;
    Tensor gain({2}, {1, 1});
    Tensor bias({2}, {0, 0});
    Tensor constant({1, 2}, {4.0, 4.0});
    auto flat = layer_norm(tape, constant, gain, bias);
    for (double v : flat.values()) CHECK(v == 0.0);

    auto y = layer_norm(tape, Tensor({1, 2}, {1.0, 3.0}), gain, bias);
    const double expected = 1.0 / std::sqrt(1.0 + 1e-5);
    CHECK(y.values()[0] == doctest::Approx(-expected).epsilon(1e-14));
    CHECK(y.values()[1] == doctest::Approx(expected).epsilon(1e-14));

    std::mt19937_64 rng(7);
    Tensor x = random_tensor({3, 6}, rng);
    Tensor g = random_tensor({6}, rng);
    Tensor b = random_tensor({6}, rng);
    Tensor w = random_tensor({3, 6}, rng, false);
    auto f = [&](Tape& t) { return project(t, layer_norm(t, x, g, b), w); };
    CHECK(fd_error(f, x) < 1e-5);
    CHECK(fd_error(f, g) < 1e-5);
    CHECK(fd_error(f, b) < 1e-5);
}

TEST_CASE("cross_entropy: fixed cases and gradient") {
    Tape tape;
    const int zero[] = {0};
    const int one[] = {1};
    CHECK(cross_entropy(tape, Tensor({1, 2}, {0.0, 0.0}), zero).item() == doctest::Approx(std::log(2.0)));
    CHECK(cross_entropy(tape, Tensor({1, 2}, {0.0, 0.0}), one).item() == doctest::Approx(0.693147).epsilon(1e-6));
    CHECK(cross_entropy(tape, Tensor({1, 2}, {100.0, 0.0}), zero).item() < 1e-40);
    const int bad[] = {2};
    CHECK_THROWS_AS(cross_entropy(tape, Tensor({1, 2}, {0.0, 0.0}), bad), Error);

    std::mt19937_64 rng(8);
    Tensor logits = random_tensor({4, 2}, rng);
    const int labels[] = {0, 1, 1, 0};
    CHECK(fd_error([&](Tape& t) { return cross_entropy(t, logits, labels); }, logits) < 1e-6);
}

TEST_CASE("backward: hand-differentiated graphs") {
    SUBCASE("identity chain") {
        Tensor x = Tensor::scalar(2.5, true);
        Tape tape;
        auto y = sum(tape, reshape(tape, x, {1}));
        backward(tape, y);
        CHECK(x.grad()[0] == 1.0);
    }
    SUBCASE("sum of squares") {
        Tensor x({3}, {1, 2, 3}, true);
        Tape tape;
        backward(tape, sum(tape, mul(tape, x, x)));
        CHECK(std::vector<double>(x.grad().begin(), x.grad().end()) == std::vector<double>{2, 4, 6});
    }
    SUBCASE("two branches accumulate") {
        Tensor x({3}, {1, 2, 3}, true);
        Tape tape;
        auto y = add(tape, sum(tape, mul(tape, x, x)), sum(tape, scale(tape, x, 3.0)));
        backward(tape, y);
        CHECK(std::vector<double>(x.grad().begin(), x.grad().end()) == std::vector<double>{5, 7, 9});
    }
    SUBCASE("non-scalar loss is rejected") {
        Tensor x({2}, {1, 2}, true);
        Tape tape;
        auto y = scale(tape, x, 2.0);
        CHECK_THROWS_AS(backward(tape, y), Error);
    }
}

TEST_CASE("backward is linear in the loss") {
    std::mt19937_64 rng(9);
    Tensor x = random_tensor({2, 3}, rng);
    Tensor w = random_tensor({3, 3}, rng, false);
    auto f = [&](Tape& t) { return sum(t, gelu(t, matmul(t, x, w))); };
    auto g = [&](Tape& t) { return mean(t, mul(t, x, x)); };
    auto grad_of = [&](const std::function<Tensor(Tape&)>& fn) {
        x.zero_grad();
        Tape tape;
        backward(tape, fn(tape));
        return std::vector<double>(x.grad().begin(), x.grad().end());
    };
    auto gf = grad_of(f);
    auto gg = grad_of(g);
    auto gsum = grad_of([&](Tape& t) { return add(t, f(t), g(t)); });
    for (std::size_t i = 0; i < gsum.size(); ++i) CHECK(gsum[i] == doctest::Approx(gf[i] + gg[i]).epsilon(1e-12));
}

TEST_CASE("grad_check: linear and constant functions") {
    std::mt19937_64 rng(10);
    Tensor x = random_tensor({3, 4}, rng);
    Tensor w = random_tensor({3, 4}, rng, false);
    Tensor inputs[] = {x};
    CHECK(grad_check([&](Tape& t) { return project(t, x, w); }, inputs).max_relative_error < 1e-8);

    auto constant = grad_check([&](Tape& t) { return sum(t, Tensor({2}, {1.0, 2.0})); }, inputs);
    CHECK(constant.max_relative_error == 0.0);
    CHECK(constant.analytic == 0.0);
    CHECK(constant.numeric == 0.0);
}

TEST_CASE("grad_check catches a wrong derivative") {
    // A deliberately wrong backward rule (factor 2 instead of 3) must be flagged.
    Tensor x({3}, {0.5, -1.0, 2.0}, true);
    auto f = [&](Tape& t) {
        Tensor out = Tensor::scalar(3.0 * (x.values()[0] + x.values()[1] + x.values()[2]));
        out.set_requires_grad(true);
        t.record({x}, out, [x, out]() {
            for (double& g : x.grad_buffer()) g += 2.0 * out.grad()[0];
        });
        return out;
    };
    Tensor inputs[] = {x};
    CHECK(grad_check(f, inputs).max_relative_error > 0.3);
}

TEST_CASE("every primitive passes grad_check on randomized shapes") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        CAPTURE(seed);
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<std::size_t> dim(1, 4), wide(1, 8);
        const std::size_t b = dim(rng), n = wide(rng), d = wide(rng);
        Tensor x = random_tensor({b, n, d}, rng);
        Tensor w = random_tensor({b, n, d}, rng, false);
        Tensor y = random_tensor({b, n, d}, rng);
        Tensor bias = random_tensor({d}, rng);
        Tensor gain = random_tensor({d}, rng);
        Tensor right = random_tensor({d, n}, rng);
        Tensor w_nn = random_tensor({b, n, n}, rng, false);
        Tensor table = random_tensor({6, d}, rng);
        std::uniform_int_distribution<int> tok(0, 5);
        std::vector<int> ids(b * n);
        for (auto& id : ids) id = tok(rng);
        Tensor mask({b, n});
        for (std::size_t i = 0; i < b; ++i) {
            for (std::size_t j = 0; j < n; ++j) mask.values()[i * n + j] = (j == 0 || (rng() & 1)) ? 1.0 : 0.0;
        }
        Tensor to_logits = random_tensor({d, 2}, rng, false, 0.3);
        std::vector<int> labels(b * n);
        for (auto& l : labels) l = static_cast<int>(rng() & 1);

        auto check = [&](std::string name, std::function<Tensor(Tape&)> f, std::vector<Tensor> inputs) {
            CAPTURE(name);
            auto r = grad_check(f, inputs);
            CAPTURE(r.analytic);
            CAPTURE(r.numeric);
            CHECK(r.max_relative_error < 1e-4);
        };
        check("add", [&](Tape& t) { return project(t, add(t, x, y), w); }, {x, y});
        check("add-broadcast", [&](Tape& t) { return project(t, add(t, x, bias), w); }, {x, bias});
        check("mul", [&](Tape& t) { return project(t, mul(t, x, y), w); }, {x, y});
        check("scale", [&](Tape& t) { return project(t, scale(t, x, -1.7), w); }, {x});
        check("matmul", [&](Tape& t) { return project(t, matmul(t, x, right), w_nn); }, {x, right});
        check("softmax", [&](Tape& t) { return project(t, softmax_masked(t, matmul(t, x, right), mask), w_nn); },
              {x, right});
        check("layer_norm", [&](Tape& t) { return project(t, layer_norm(t, x, gain, bias), w); }, {x, gain, bias});
        check("gelu", [&](Tape& t) { return project(t, gelu(t, x), w); }, {x});
        check("dropout",
              [&](Tape& t) {
                  std::mt19937_64 drop_rng(seed);
                  return project(t, dropout(t, x, 0.3, drop_rng), w);
              },
              {x});
        check("reshape", [&](Tape& t) { return project(t, reshape(t, x, {b * n, d}), reshape(t, w, {b * n, d})); },
              {x});
        check("transpose",
              [&](Tape& t) { return project(t, transpose(t, transpose(t, x)), w); }, {x});
        check("permute",
              [&](Tape& t) {
                  static constexpr std::size_t order[] = {2, 0, 1};
                  Tensor pw = Tensor({d, b, n});
                  std::copy(w.values().begin(), w.values().end(), pw.values().begin());
                  return project(t, permute(t, x, order), pw);
              },
              {x});
        check("embedding",
              [&](Tape& t) { return project(t, embedding_lookup(t, table, ids, {b, n}), w); }, {table});
        check("take_position",
              [&](Tape& t) { return sum(t, mul(t, take_position(t, x, n - 1), take_position(t, w, 0))); }, {x});
        check("mean", [&](Tape& t) { return mean(t, mul(t, x, x)); }, {x});
        check("cross_entropy",
              [&](Tape& t) { return cross_entropy(t, reshape(t, matmul(t, x, to_logits), {b * n, 2}), labels); },
              {x});
    }
}

TEST_CASE("embedding_lookup rejects ids outside the table") {
    Tape tape;
    Tensor table({3, 2});
    const int ids[] = {0, 3};
    CHECK_THROWS_AS(embedding_lookup(tape, table, ids, {2}), Error);
}

TEST_CASE("dropout: inverted scaling keeps survivors scaled and is seeded") {
    Tensor x({1000}, std::vector<double>(1000, 1.0));
    Tape tape;
    std::mt19937_64 a(1), b(1);
    auto ya = dropout(tape, x, 0.25, a);
    auto yb = dropout(tape, x, 0.25, b);
    CHECK(std::equal(ya.values().begin(), ya.values().end(), yb.values().begin()));
    std::size_t kept = 0;
    for (double v : ya.values()) {
        CHECK((v == 0.0 || v == doctest::Approx(1.0 / 0.75)));
        kept += v != 0.0;
    }
    CHECK(kept > 700);
    CHECK(kept < 800);
}
