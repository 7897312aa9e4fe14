#include <cmath>
#include <numeric>

#include <doctest.h>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "vadeers/error.hpp"
#include "vadeers/nn/adam.hpp"
#include "vadeers/nn/mlp.hpp"

using namespace vadeers;
using nn::Matrix;

namespace {

void require_close(const Matrix& a, const Matrix& b, double tol) {
    REQUIRE(a.same_shape(b));
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a.data()[i] - b.data()[i]) <= tol);
}

std::string message_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const std::exception& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_SUITE("nnkernel") {

TEST_CASE("affine on hand-sized inputs") {
    const std::vector<double> zero{0, 0};
    CHECK(nn::affine(Matrix::from_rows({{1, 2}}), Matrix::from_rows({{1, 0}, {0, 1}}), zero) ==
          Matrix::from_rows({{1, 2}}));

    const std::vector<double> one{1};
    CHECK(nn::affine(Matrix::from_rows({{1, 1}}), Matrix::from_rows({{2}, {3}}), one)(0, 0) == 6.0);
}

TEST_CASE("affine and matmul agree with the triple loop") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix x = fixture::random_matrix(3, 4, rng);
        const Matrix w = fixture::random_matrix(4, 2, rng);
        const Matrix b = fixture::random_matrix(1, 2, rng);
        require_close(nn::affine(x, w, b.row(0)), oracle::triple_loop_affine(x, w, b.row(0)), 1e-12);
        require_close(nn::matmul(x, w), oracle::triple_loop_matmul(x, w), 1e-12);
    }
    const Matrix big_a = fixture::random_matrix(37, 53, rng);
    const Matrix big_b = fixture::random_matrix(53, 29, rng);
    require_close(nn::matmul(big_a, big_b), oracle::triple_loop_matmul(big_a, big_b), 1e-11);
}

TEST_CASE("affine shape mismatch names both shapes") {
    const Matrix x(3, 4);
    const Matrix w(5, 2);
    const std::vector<double> b(2);
    CHECK_THROWS_AS(nn::affine(x, w, b), ContractError);
    const auto msg = message_of([&] { nn::affine(x, w, b); });
    CHECK(msg.find("3x4") != std::string::npos);
    CHECK(msg.find("5x2") != std::string::npos);
    CHECK_THROWS_AS(nn::matmul(x, w), ContractError);
}

TEST_CASE("mse") {
    const Matrix a = Matrix::from_rows({{0, 0}});
    CHECK(nn::mse(a, a) == 0.0);
    CHECK(nn::mse(a, Matrix::from_rows({{1, 3}})) == doctest::Approx(5.0).epsilon(1e-15));
    CHECK_THROWS_AS(nn::mse(a, Matrix(2, 1)), ContractError);

    Rng rng(3);
    const Matrix x = fixture::random_matrix(5, 7, rng);
    const Matrix y = fixture::random_matrix(5, 7, rng);
    CHECK(std::abs(nn::mse(x, y) - oracle::scalar_mse(x, y)) < 1e-12);
}

TEST_CASE("gradient of sum of squares") {
    nn::ParamStore store;
    const auto w = store.add("w", Matrix::from_rows({{1, 2}}));
    nn::Tape tape;
    const auto loss = nn::sum(nn::square(tape.parameter(store, w)));
    const auto g = tape.gradients(loss);
    CHECK(g.at(w) == Matrix::from_rows({{2, 4}}));
}

TEST_CASE("loss independent of a parameter gives a zero gradient") {
    nn::ParamStore store;
    const auto w = store.add("w", Matrix::from_rows({{1, 2}}));
    const auto v = store.add("v", Matrix::from_rows({{5}}));
    nn::Tape tape;
    tape.parameter(store, w);
    const auto loss = nn::square(tape.parameter(store, v));
    const auto g = tape.gradients(loss);
    CHECK(g.at(w) == Matrix(1, 2));
    CHECK(g.at(v)(0, 0) == 10.0);

    nn::Tape constant_only;
    constant_only.parameter(store, w);
    const auto c = nn::sum(constant_only.constant(Matrix::from_rows({{3, 4}})));
    CHECK(constant_only.gradients(c).at(w) == Matrix(1, 2));
}

TEST_CASE("gradients reject a loss from another tape or a non-scalar loss") {
    nn::ParamStore store;
    const auto w = store.add("w", Matrix::from_rows({{1, 2}}));
    nn::Tape a;
    nn::Tape b;
    const auto loss_b = nn::sum(b.parameter(store, w));
    CHECK_THROWS_AS(a.gradients(loss_b), ContractError);
    CHECK_THROWS_AS(b.gradients(b.parameter(store, w)), ContractError);
    CHECK_THROWS_AS(nn::add(a.parameter(store, w), b.parameter(store, w)), ContractError);
}

TEST_CASE("every primitive passes a finite-difference check") {
    Rng rng(5);
    nn::ParamStore store;
    const auto a = store.add("a", fixture::random_matrix(4, 3, rng));
    const auto b = store.add("b", fixture::random_matrix(3, 5, rng));
    const auto bias = store.add("bias", fixture::random_matrix(1, 5, rng));
    const auto c = store.add("c", fixture::random_matrix(4, 5, rng));
    const Matrix mask = fixture::random_matrix(4, 5, rng);
    const std::vector<std::size_t> pick{2, 0, 2, 3, 1};
    const std::vector<std::optional<std::size_t>> choice{1, std::nullopt, 4, 0, std::nullopt};

    auto build = [&](nn::Tape& t) {
        auto va = t.parameter(store, a);
        auto vb = t.parameter(store, b);
        auto vc = t.parameter(store, c);
        auto h = nn::affine(va, vb, t.parameter(store, bias));
        auto r = nn::relu(nn::add(h, nn::scale(vc, 0.5)));
        auto e = nn::exp(nn::scale(nn::sub(r, vc), 0.3));
        auto m = nn::mul(nn::mul_constant(e, mask), nn::add_scalar(vc, 1.5));
        auto g = nn::gather_rows(m, pick);
        auto cat = nn::concat_cols(g, nn::add_bias(nn::matmul(nn::gather_rows(va, pick), vb), t.parameter(store, bias)));
        auto lse = nn::logsumexp_rows(cat);
        auto ls = nn::log_softmax_rows(cat);
        auto sel = nn::select_or(ls, lse, choice);
        auto rm = nn::row_mse(g, nn::gather_rows(vc, pick));
        return nn::add(nn::add(nn::mean(sel), nn::sum(nn::sum_rows(rm))), nn::mse(m, vc));
    };

    nn::Tape tape;
    const auto g = tape.gradients(build(tape));
    auto value = [&] {
        nn::Tape t(nn::Tape::Recording::off);
        return build(t).value()(0, 0);
    };
    const auto check = oracle::finite_difference_check(store, g, value, 1000, 1);
    INFO(check.worst);
    CHECK(check.max_rel_error < 1e-4);
    CHECK(check.checked == 12 + 15 + 5 + 20);
}

TEST_CASE("identical inputs give bit-identical values and gradients") {
    auto run = [] {
        Rng init(9);
        nn::ParamStore store;
        auto mlp = nn::Mlp::create(store, "m", nn::make_stack(4, {6, 5}, 2, nn::Activation::identity, 0.3, 1), init);
        Rng data(2);
        const Matrix x = fixture::random_matrix(3, 4, data);
        nn::Tape tape;
        Rng drop(17);
        auto out = mlp.forward(tape, store, tape.constant(x), nn::Mode::train, &drop);
        auto loss = nn::sum(nn::square(out));
        return std::make_pair(loss.value(), tape.gradients(loss));
    };
    const auto first = run();
    const auto second = run();
    CHECK(first.first == second.first);
    CHECK(first.second == second.second);
}

TEST_CASE("logsumexp survives large magnitudes") {
    nn::Tape tape;
    const auto v = nn::logsumexp_rows(tape.constant(Matrix::from_rows({{1000, 1000}, {-1000, -1001}})));
    CHECK(v.value()(0, 0) == doctest::Approx(1000 + std::log(2.0)).epsilon(1e-15));
    CHECK(v.value()(1, 0) == doctest::Approx(-1000 + std::log1p(std::exp(-1.0))).epsilon(1e-15));
}

TEST_CASE("relu layer zeroes negative pre-activations") {
    nn::ParamStore store;
    Rng init(1);
    auto mlp = nn::Mlp::create(store, "m", {{2, 3, nn::Activation::relu, 0.0}}, init);
    store.value(*store.find("m.0.weight")) = Matrix(2, 3, 1.0);
    const Matrix out = mlp.forward(store, Matrix::from_rows({{-1, -2}}), nn::Mode::eval, nullptr);
    CHECK(out == Matrix(1, 3));
}

TEST_CASE("eval mode equals train mode without dropout") {
    Rng init(4);
    nn::ParamStore store;
    auto mlp = nn::Mlp::create(store, "m", nn::make_stack(5, {7, 6}, 3), init);
    Rng data(8);
    const Matrix x = fixture::random_matrix(4, 5, data);
    Rng drop(1);
    CHECK(mlp.forward(store, x, nn::Mode::eval, nullptr) == mlp.forward(store, x, nn::Mode::train, &drop));
}

TEST_CASE("inverted dropout keeps the expectation") {
    Rng init(6);
    nn::ParamStore store;
    auto mlp = nn::Mlp::create(store, "m", {{3, 4, nn::Activation::relu, 0.5}}, init);
    for (auto& w : store.value(*store.find("m.0.weight")).data()) w = std::abs(w) + 0.1;
    const Matrix x = Matrix::from_rows({{1.0, 0.5, 2.0}});
    const Matrix eval_out = mlp.forward(store, x, nn::Mode::eval, nullptr);

    constexpr int draws = 100000;
    std::vector<double> sums(4, 0.0);
    Rng drop(99);
    for (int i = 0; i < draws; ++i) {
        const Matrix y = mlp.forward(store, x, nn::Mode::train, &drop);
        for (std::size_t c = 0; c < 4; ++c) sums[c] += y(0, c);
    }
    for (std::size_t c = 0; c < 4; ++c) {
        const double mean = sums[c] / draws;
        CHECK(std::abs(mean - eval_out(0, c)) / std::abs(eval_out(0, c)) < 0.02);
    }
}

TEST_CASE("dropout masks hold zero or the survivor scale") {
    Rng rng(3);
    const Matrix m = nn::dropout_mask(50, 40, 0.25, rng);
    std::size_t zeros = 0;
    for (double v : m.data()) {
        CHECK((v == 0.0 || v == doctest::Approx(1.0 / 0.75)));
        zeros += v == 0.0;
    }
    CHECK(std::abs(static_cast<double>(zeros) / m.size() - 0.25) < 0.03);
}

TEST_CASE("glorot initialization bounds and zero biases") {
    Rng rng(12);
    nn::ParamStore store;
    nn::Mlp::create(store, "m", nn::make_stack(30, {20}, 10), rng);
    const double bound0 = std::sqrt(6.0 / 50.0);
    const double bound1 = std::sqrt(6.0 / 30.0);
    for (double w : store.value(*store.find("m.0.weight")).data()) CHECK(std::abs(w) <= bound0);
    for (double w : store.value(*store.find("m.1.weight")).data()) CHECK(std::abs(w) <= bound1);
    CHECK(store.value(*store.find("m.0.bias")) == Matrix(1, 20));
    CHECK(store.value(*store.find("m.1.bias")) == Matrix(1, 10));
}

TEST_CASE("mlp layer chains are validated") {
    Rng rng(1);
    nn::ParamStore store;
    CHECK_THROWS_AS(nn::Mlp::create(store, "a", {{3, 4}, {5, 2}}, rng), ContractError);
    CHECK_THROWS_AS(nn::Mlp::create(store, "b", {{3, 4, nn::Activation::relu, 1.0}}, rng), ContractError);
    auto ok = nn::Mlp::create(store, "c", {{3, 4, nn::Activation::relu, 0.5}}, rng);
    CHECK_THROWS_AS(ok.forward(store, Matrix(1, 3), nn::Mode::train, nullptr), ContractError);
    CHECK_THROWS_AS(ok.forward(store, Matrix(1, 2), nn::Mode::eval, nullptr), ContractError);
}

TEST_CASE("adam with zero gradients on fresh state leaves params alone") {
    std::vector<double> p{1.0, -2.0};
    const std::vector<double> g{0.0, 0.0};
    std::vector<double> m{0.0, 0.0};
    std::vector<double> v{0.0, 0.0};
    nn::adam_update(p, g, m, v, {.lr = 0.1}, 1);
    CHECK(p == std::vector<double>{1.0, -2.0});
    CHECK(m == std::vector<double>{0.0, 0.0});

    std::vector<double> m2{0.5, -0.4};
    std::vector<double> v2{0.2, 0.1};
    nn::adam_update(p, g, m2, v2, {.lr = 0.1}, 3);
    CHECK(m2[0] == doctest::Approx(0.45));
    CHECK(m2[1] == doctest::Approx(-0.36));
    CHECK(v2[0] == doctest::Approx(0.1998));
    CHECK(v2[1] == doctest::Approx(0.0999));
}

TEST_CASE("adam first step moves by about the learning rate") {
    std::vector<double> p{0.0};
    const std::vector<double> g{1.0};
    std::vector<double> m{0.0};
    std::vector<double> v{0.0};
    nn::adam_update(p, g, m, v, {.lr = 0.1}, 1);
    // m_hat = 1, v_hat = 1 at t = 1.
    CHECK(p[0] == doctest::Approx(-0.1 / (1.0 + 1e-8)).epsilon(1e-14));
    CHECK_THROWS_AS(nn::adam_update(p, g, m, v, {}, 0), ContractError);
    std::vector<double> wrong(2);
    CHECK_THROWS_AS(nn::adam_update(p, g, wrong, v, {}, 1), ContractError);
}

TEST_CASE("adam converges on a quadratic") {
    nn::ParamStore store;
    const auto id = store.add("p", Matrix(1, 1, 0.0));
    nn::Adam adam(store, {id});
    for (int i = 0; i < 100; ++i) {
        nn::Tape tape;
        auto loss = nn::square(nn::add_scalar(tape.parameter(store, id), -3.0));
        adam.step(store, tape.gradients(loss), 0.1);
    }
    CHECK(adam.steps() == 100);
    CHECK(std::abs(store.value(id)(0, 0) - 3.0) < 0.05);
}

TEST_CASE("adam treats missing gradients as zero") {
    nn::ParamStore store;
    const auto a = store.add("a", Matrix(1, 2, 1.0));
    const auto b = store.add("b", Matrix(1, 1, 1.0));
    nn::Adam adam(store, {a, b});
    adam.step(store, {{a, Matrix(1, 2, 1.0)}}, 0.01);
    CHECK(store.value(b)(0, 0) == 1.0);
    CHECK(store.value(a)(0, 0) < 1.0);
}

TEST_CASE("parameter store and hashing") {
    nn::ParamStore store;
    const auto a = store.add("x.a", Matrix(2, 2, 1.0));
    store.add("y.b", Matrix(1, 1));
    CHECK_THROWS_AS(store.add("x.a", Matrix(1, 1)), ContractError);
    CHECK(store.with_prefix("x.") == std::vector<nn::ParamId>{a});
    CHECK_FALSE(store.find("z").has_value());

    const auto before = nn::hash_params(store, {a});
    store.value(a)(1, 1) = std::nextafter(1.0, 2.0);
    CHECK(nn::hash_params(store, {a}) != before);
}

}  // TEST_SUITE
