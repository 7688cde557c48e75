#include "ftarga/checkpoint.hpp"
#include "ftarga/error.hpp"
#include "ftarga/neural.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

using namespace ftarga;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

MlpShape one_layer(std::size_t d, std::size_t m, Activation act = Activation::sigmoid) {
    MlpShape s;
    s.input_dim = d;
    s.hidden = {m};
    s.activation = act;
    return s;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Central difference of forward() in every coordinate of theta.
std::vector<double> fd_gradient(MlpParams p, std::span<const double> x, double h) {
    std::vector<double> g(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double keep = p.theta()[i];
        p.theta()[i] = keep + h;
        const double up = forward(p, x);
        p.theta()[i] = keep - h;
        const double down = forward(p, x);
        p.theta()[i] = keep;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

}  // namespace

TEST_CASE("forward with zero output weights is zero") {
    MlpParams p = init_params(5, one_layer(3, 7));
    for (double& a : p.output_weights()) a = 0.0;
    const std::vector<double> x{0.3, -2.0, 7.5};
    CHECK(forward(p, x) == 0.0);
}

TEST_CASE("single sigmoid unit at zero pre-activation gives one half") {
    MlpParams p(one_layer(2, 1));
    p.output_weights()[0] = 1.0;
    const std::vector<double> x{4.0, -1.0};
    CHECK(forward(p, x) == 0.5);
}

TEST_CASE("two-unit network matches high-precision evaluation") {
    MlpParams p(one_layer(1, 2));
    p.output_weights()[0] = 1.0;
    p.output_weights()[1] = -1.0;
    p.weights()[0] = 1.0;
    p.weights()[1] = 2.0;
    // sigma(1) - sigma(2) computed at 30 digits.
    CHECK_THAT(forward(p, std::vector<double>{1.0}), WithinAbs(-0.149738499347877564808569899481, 1e-15));
}

TEST_CASE("forward rejects a dimension mismatch") {
    const MlpParams p = init_params(1, one_layer(2, 4));
    CHECK_THROWS_AS(forward(p, std::vector<double>{1.0}), InvalidInput);
}

TEST_CASE("clipped output stays within the bound") {
    MlpShape s = one_layer(1, 3);
    s.output_clip = 0.25;
    MlpParams p = init_params(9, s);
    for (double& a : p.output_weights()) a = 10.0;
    for (double x = -3.0; x <= 3.0; x += 0.5) {
        const double y = forward(p, std::vector<double>{x});
        CHECK(std::abs(y) <= 0.25);
    }
    const auto g = grad_params(p, std::vector<double>{1.0});
    for (double v : g) CHECK(v == 0.0);
}

TEST_CASE("output-weight gradient is the hidden activation") {
    const MlpParams p = init_params(11, one_layer(2, 5));
    const std::vector<double> x{0.7, -0.2};
    const auto g = grad_params(p, x);
    for (std::size_t j = 0; j < 5; ++j) {
        const double z = p.weights()[2 * j] * x[0] + p.weights()[2 * j + 1] * x[1] + p.biases()[j];
        CHECK_THAT(g[j], WithinAbs(sigmoid(z), 1e-15));
    }
}

TEST_CASE("bias gradient at zero pre-activation is a quarter of the output weight") {
    MlpParams p(one_layer(1, 4));
    for (std::size_t j = 0; j < 4; ++j) p.output_weights()[j] = 0.5 * static_cast<double>(j) - 1.0;
    const auto g = grad_params(p, std::vector<double>{3.0});
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(g[p.layer_offset(0) + 4 + j] == p.output_weights()[j] / 4.0);
    }
}

TEST_CASE("reverse-mode gradient matches central differences") {
    Rng rng(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t d = 1 + trial % 3;
        const std::size_t depth = 1 + trial % 3;
        MlpShape s;
        s.input_dim = d;
        s.hidden.assign(depth, 4 + trial % 5);
        const MlpParams p = init_params(rng.next(), s, InitScale::unit_uniform);
        std::vector<double> x(d);
        for (double& v : x) v = rng.uniform(-2.0, 2.0);
        const auto g = grad_params(p, x);
        const auto fd = fd_gradient(p, x, 1e-5);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double scale = std::max(std::abs(fd[i]), 1e-3);
            worst = std::max(worst, std::abs(g[i] - fd[i]) / scale);
        }
    }
    CHECK(worst <= 1e-6);
}

TEST_CASE("relu derivative at the kink is zero") {
    MlpParams p(one_layer(1, 1, Activation::relu));
    p.output_weights()[0] = 2.0;
    p.weights()[0] = 1.0;
    const auto g = grad_params(p, std::vector<double>{0.0});
    CHECK(g[1] == 0.0);
    CHECK(g[2] == 0.0);
    const auto g2 = grad_params(p, std::vector<double>{1.5});
    CHECK(g2[1] == 2.0 * 1.5);
    CHECK(g2[2] == 2.0);
}

TEST_CASE("value_and_gradient agrees with forward") {
    const MlpParams p = init_params(3, one_layer(2, 6));
    const std::vector<double> x{0.1, 0.9};
    std::vector<double> g(p.size());
    CHECK(value_and_gradient(p, x, g) == forward(p, x));
}

TEST_CASE("pinned wrapper is exactly one at the origin") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const MlpParams p = init_params(seed, one_layer(2, 8), InitScale::unit_uniform);
        CHECK(pinned_forward(p, std::vector<double>{0.0, 0.0}) == 1.0);
    }
}

TEST_CASE("initialization is deterministic and respects the fan-in range") {
    const MlpShape s = one_layer(4, 50);
    const MlpParams a = init_params(42, s);
    CHECK(a == init_params(42, s));
    CHECK_FALSE(a == init_params(43, s));
    for (double w : a.weights()) CHECK(std::abs(w) <= 0.5);
    for (double b : a.biases()) CHECK(std::abs(b) <= 0.5);
    for (double v : a.output_weights()) CHECK(std::abs(v) <= 1.0 / std::sqrt(50.0));
}

TEST_CASE("adam with zero gradient leaves parameters and counts the step") {
    MlpParams p = init_params(1, one_layer(1, 3));
    const MlpParams before = p;
    AdamState st(p.size(), AdamHyper{});
    const std::vector<double> zero(p.size(), 0.0);
    adam_step(st, p, zero);
    CHECK(p == before);
    CHECK(st.t == 1);
}

TEST_CASE("first adam step moves each parameter by about the step size") {
    MlpParams p = init_params(1, one_layer(1, 2));
    const MlpParams before = p;
    AdamState st(p.size(), AdamHyper{0.01});
    std::vector<double> g(p.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = (i % 2 == 0 ? 1.0 : -1.0) * (0.1 + static_cast<double>(i));
    adam_step(st, p, g);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double moved = p.theta()[i] - before.theta()[i];
        CHECK_THAT(moved, WithinRel(g[i] > 0 ? -0.01 : 0.01, 1e-6));
    }
}

TEST_CASE("adam matches a scalar reference implementation") {
    MlpShape s = one_layer(1, 1);
    MlpParams p(s, {0.3, -0.2, 0.1});
    AdamHyper h{0.05, 0.8, 0.99, 1e-8};
    AdamState st(p.size(), h);

    std::vector<double> theta{0.3, -0.2, 0.1}, m(3, 0.0), v(3, 0.0);
    const std::vector<std::vector<double>> grads{{0.5, -1.0, 2.0}, {0.5, -1.0, 2.0}, {-0.1, 0.0, 3.0}};
    for (std::size_t t = 1; t <= grads.size(); ++t) {
        adam_step(st, p, grads[t - 1]);
        for (std::size_t i = 0; i < 3; ++i) {
            const double g = grads[t - 1][i];
            m[i] = 0.8 * m[i] + 0.2 * g;
            v[i] = 0.99 * v[i] + 0.01 * g * g;
            const double mh = m[i] / (1.0 - std::pow(0.8, static_cast<double>(t)));
            const double vh = v[i] / (1.0 - std::pow(0.99, static_cast<double>(t)));
            theta[i] -= 0.05 * mh / (std::sqrt(vh) + 1e-8);
            CHECK_THAT(p.theta()[i], WithinAbs(theta[i], 1e-14));
        }
    }
    CHECK(st.t == 3);
    for (double s2 : st.second_moment) CHECK(s2 >= 0.0);
}

TEST_CASE("non-finite gradient raises a divergence error with the step index") {
    MlpParams p = init_params(1, one_layer(1, 2));
    AdamState st(p.size(), AdamHyper{});
    std::vector<double> g(p.size(), 0.1);
    adam_step(st, p, g);
    const MlpParams before = p;
    g[1] = std::nan("");
    try {
        adam_step(st, p, g);
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        CHECK(e.iteration() == 1);
    }
    CHECK(p == before);
    CHECK(st.t == 1);
    CHECK_THROWS_AS(sgd_step(p, g, 0.1, 17), DivergenceError);
}

TEST_CASE("checkpoint round trip is lossless") {
    MlpShape s;
    s.input_dim = 2;
    s.hidden = {5, 3};
    s.activation = Activation::relu;
    s.output_clip = 4.5;
    const MlpParams p = init_params(77, s, InitScale::unit_uniform);
    CHECK(checkpoint_from_string(checkpoint_to_string(p)) == p);
}

TEST_CASE("checkpoint rejects malformed documents") {
    CHECK_THROWS_AS(checkpoint_from_string("not json"), InvalidInput);
    CHECK_THROWS_AS(checkpoint_from_string(R"({"format":"ftarga-mlp","version":99})"), InvalidInput);
    const MlpParams p = init_params(1, one_layer(1, 2));
    std::string text = checkpoint_to_string(p);
    text.replace(text.find("\"theta\""), 7, "\"thetx\"");
    CHECK_THROWS_AS(checkpoint_from_string(text), InvalidInput);
}
