#include "doctest.h"

#include "oracles.hpp"
#include "primitive_suite.hpp"
#include "shotinf/autodiff.hpp"
#include "shotinf/errors.hpp"

#include <cmath>
#include <numbers>

using namespace shotinf;
using namespace shotinf::ad;

TEST_CASE("every primitive matches central differences") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        for (const auto& c : oracle::primitive_gradient_checks(seed)) {
            INFO(c.name << " seed " << seed);
            CHECK(c.result.checked > 0);
            CHECK(c.result.max_rel_error <= 1e-5);
        }
    }
}

TEST_CASE("conv1d_same examples") {
    Graph g(false);
    auto x = Tensor::from({4, 1}, {1, 2, 3, 4});
    auto w = Tensor::from({3, 1, 1}, {1, 1, 1});
    auto y = conv1d_same(g, x, w, Tensor::from({1}, {0}));
    CHECK(std::vector<double>(y.values().begin(), y.values().end()) == std::vector<double>{3, 6, 9, 7});
    CHECK(y.shape() == Shape{4, 1});
    auto one = conv1d_same(g, Tensor::from({1, 1}, {5}), w, Tensor::from({1}, {0}));
    CHECK(one.rows() == 1);
    CHECK_THROWS_AS(conv1d_same(g, x, Tensor::zeros({2, 1, 1}), Tensor::zeros({1})), ShapeMismatch);
    CHECK_THROWS_AS(conv1d_same(g, x, Tensor::zeros({3, 2, 1}), Tensor::zeros({1})), ShapeMismatch);
}

TEST_CASE("gru_cell examples") {
    Graph g(false);
    const std::size_t d = 2, c = 3;
    GruWeights zero{Tensor::zeros({c, 3 * d}), Tensor::zeros({d, 3 * d}), Tensor::zeros({3 * d})};
    auto h = Tensor::from({1, d}, {0.4, -0.8});
    auto x = Tensor::from({1, c}, {1, 2, 3});
    auto out = gru_cell(g, h, x, zero);
    CHECK(out.values()[0] == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(out.values()[1] == doctest::Approx(-0.4).epsilon(1e-15));
    auto from_zero = gru_cell(g, Tensor::zeros({1, d}), x, zero);
    CHECK(from_zero.values()[0] == 0.0);
    CHECK(from_zero.values()[1] == 0.0);

    std::mt19937_64 rng(17);
    GruWeights w{oracle::random_tensor(rng, {c, 3 * d}), oracle::random_tensor(rng, {d, 3 * d}),
                 oracle::random_tensor(rng, {3 * d})};
    auto got = gru_cell(g, h, x, w);
    const auto want = oracle::gru_step({0.4, -0.8}, {1, 2, 3}, {w.input.values().begin(), w.input.values().end()},
                                       {w.hidden.values().begin(), w.hidden.values().end()},
                                       {w.bias.values().begin(), w.bias.values().end()}, d, c);
    for (std::size_t i = 0; i < d; ++i) CHECK(got.values()[i] == doctest::Approx(want[i]).epsilon(1e-14));
    CHECK_THROWS_AS(gru_cell(g, h, Tensor::zeros({1, 2}), w), ShapeMismatch);
}

TEST_CASE("gru_cell stays inside (-1, 1)") {
    std::mt19937_64 rng(23);
    Graph g(false);
    for (double scale : {1.0, 5.0}) {
        for (int i = 0; i < 200; ++i) {
            GruWeights w{oracle::random_tensor(rng, {4, 9}, scale), oracle::random_tensor(rng, {3, 9}, scale),
                         oracle::random_tensor(rng, {9}, scale)};
            auto h = oracle::random_tensor(rng, {1, 3}, 0.999, false);
            auto x = oracle::random_tensor(rng, {1, 4}, 1.0, false);
            for (int step = 0; step < 5; ++step) {
                h = gru_cell(g, h, x, w);
                for (double v : h.values()) {
                    // tanh rounds to exactly +-1 in double once saturated.
                    if (scale == 1.0) CHECK((v > -1.0 && v < 1.0));
                    else CHECK((v >= -1.0 && v <= 1.0));
                }
            }
        }
    }
}

TEST_CASE("dense examples") {
    Graph g(false);
    auto x = Tensor::from({1, 2}, {1, 2});
    auto y = dense(g, x, Tensor::from({2, 1}, {1, -1}), Tensor::from({1}, {0.5}));
    CHECK(y.values()[0] == -0.5);
    auto s = dense(g, x, Tensor::zeros({2, 1}), Tensor::zeros({1}), Activation::Sigmoid);
    CHECK(s.values()[0] == 0.5);
    auto id = dense(g, x, Tensor::from({2, 2}, {1, 0, 0, 1}), Tensor::zeros({2}));
    CHECK(id.values()[0] == 1.0);
    CHECK(id.values()[1] == 2.0);
    CHECK_THROWS_AS(dense(g, x, Tensor::zeros({3, 1}), Tensor::zeros({1})), ShapeMismatch);
}

TEST_CASE("softmax examples and properties") {
    Graph g(false);
    auto four = softmax(g, Tensor::from({4, 1}, {2, 2, 2, 2}));
    for (double v : four.values()) CHECK(v == 0.25);
    auto two = softmax(g, Tensor::from({2, 1}, {0, std::numbers::ln2}));
    CHECK(two.values()[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(two.values()[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(softmax(g, Tensor::from({1, 1}, {-40})).values()[0] == 1.0);

    auto masked = softmax(g, Tensor::from({3, 1}, {1, 100, 1}), std::vector<bool>{false, true, false});
    CHECK(masked.values()[1] == 0.0);
    CHECK(masked.values()[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK_THROWS_AS(softmax(g, Tensor::from({2, 1}, {1, 2}), std::vector<bool>{true, true}), AllMasked);

    std::mt19937_64 rng(9);
    for (int i = 0; i < 100; ++i) {
        auto e = oracle::random_tensor(rng, {7, 1}, 30.0, false);
        auto a = softmax(g, e);
        double sum = 0;
        for (double v : a.values()) sum += v;
        CHECK(std::abs(sum - 1.0) <= 1e-12);
        auto shifted = e.clone();
        for (auto& v : shifted.values()) v += 123.25;
        auto b = softmax(g, shifted);
        for (std::size_t k = 0; k < 7; ++k) CHECK(b.values()[k] == doctest::Approx(a.values()[k]).epsilon(1e-12));
    }
}

TEST_CASE("normalize_sum") {
    Graph g(false);
    auto a = normalize_sum(g, Tensor::from({3, 1}, {1, 1, 2}));
    CHECK(a.values()[2] == 0.5);
    CHECK_THROWS_AS(normalize_sum(g, Tensor::from({2, 1}, {1, -1})), NonFinite);
}

TEST_CASE("binary cross entropy") {
    Graph g(false);
    CHECK(binary_cross_entropy(g, Tensor::scalar(0.5), 1).item() == doctest::Approx(std::numbers::ln2).epsilon(1e-15));
    CHECK(binary_cross_entropy(g, Tensor::scalar(1.0), 1).item() == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(binary_cross_entropy(g, Tensor::scalar(0.0), 1).item() == doctest::Approx(-std::log(1e-7)).epsilon(1e-12));
}

TEST_CASE("backward of sigmoid(w x) at zero") {
    auto w = Tensor::scalar(0.0, true);
    Graph g;
    auto y = sigmoid(g, mul(g, w, Tensor::scalar(1.0)));
    g.backward(y);
    CHECK(w.grad()[0] == 0.25);
    CHECK(g.size() == 0);
}

TEST_CASE("constant graph leaves gradients at zero") {
    auto p = Tensor::from({2}, {1, 2}, true);
    Graph g;
    auto c = add(g, Tensor::from({2}, {3, 4}), Tensor::from({2}, {5, 6}));
    CHECK_FALSE(c.requires_grad());
    g.backward(c, std::vector<double>{1, 1});
    CHECK(p.grad()[0] == 0.0);
    CHECK(p.grad()[1] == 0.0);
}

TEST_CASE("inference graphs record nothing") {
    auto w = Tensor::from({2, 1}, {1, 2}, true);
    Graph g(false);
    auto y = dense(g, Tensor::from({1, 2}, {1, 1}), w, Tensor::zeros({1}));
    CHECK_FALSE(y.requires_grad());
    CHECK(g.size() == 0);
}

TEST_CASE("non-finite gradients are rejected") {
    auto p = Tensor::scalar(1.0, true);
    Graph g;
    auto y = mul(g, p, Tensor::scalar(2.0));
    CHECK_THROWS_AS(g.backward(y, std::numeric_limits<double>::infinity()), NonFinite);
}

TEST_CASE("adam_step") {
    auto p = Tensor::scalar(1.0, true);
    std::vector<Tensor> params{p};
    auto state = make_adam_state(params);
    CHECK(state.hyper.lr == 0.001);
    CHECK(state.hyper.beta1 == 0.9);
    CHECK(state.hyper.beta2 == 0.999);
    CHECK(state.hyper.eps == 1e-8);

    p.grad()[0] = 0.0;
    adam_step(params, state);
    CHECK(p.values()[0] == 1.0);
    CHECK(state.step == 1);

    double prev = p.values()[0];
    for (int i = 0; i < 2; ++i) {
        p.grad()[0] = 1.0;
        adam_step(params, state);
        CHECK(p.values()[0] < prev);
        prev = p.values()[0];
    }

    auto q = Tensor::scalar(3.0, true);
    std::vector<Tensor> qs{q};
    auto fresh = make_adam_state(qs);
    q.grad()[0] = -5.0;
    adam_step(qs, fresh);
    CHECK(q.values()[0] == doctest::Approx(3.001).epsilon(1e-9));

    std::vector<Tensor> other{Tensor::zeros({2}, true)};
    CHECK_THROWS_AS(adam_step(other, state), ShapeMismatch);
}

TEST_CASE("forward and backward are deterministic") {
    std::mt19937_64 a(31), b(31);
    auto run = [](std::mt19937_64& rng) {
        auto x = oracle::random_tensor(rng, {6, 5});
        auto w = oracle::random_tensor(rng, {3, 5, 4});
        auto bias = oracle::random_tensor(rng, {4});
        Graph g;
        auto y = relu(g, conv1d_same(g, x, w, bias));
        auto e = dense(g, y, oracle::random_tensor(rng, {4, 1}), oracle::random_tensor(rng, {1}));
        auto alpha = softmax(g, e);
        auto pooled = weighted_sum(g, alpha, y);
        std::vector<double> seed(pooled.size(), 1.0);
        g.backward(pooled, seed);
        std::vector<double> out(pooled.values().begin(), pooled.values().end());
        out.insert(out.end(), w.grad().begin(), w.grad().end());
        out.insert(out.end(), x.grad().begin(), x.grad().end());
        return out;
    };
    CHECK(run(a) == run(b));
}
