#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "clgt/errors.hpp"
#include "clgt/rng.hpp"
#include "clgt/tape.hpp"

using namespace clgt;
using diff::Tape;
using diff::Tensor;
using diff::ValueId;

namespace {

Tensor random_tensor(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(rows, cols);
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

constexpr double kEps = 1e-5;

}  // namespace

TEST_CASE("neighbor_softmax forward: equal scores share mass equally") {
    Tape tape;
    const ValueId scores = tape.input(Tensor(3, 1, {1.0, 1.0, 1.0}));
    const ValueId out = tape.neighbor_softmax(scores, {0, 0, 0});
    for (std::size_t r = 0; r < 3; ++r) CHECK(tape.value(out).at(r, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("neighbor_softmax normalizes per segment and per column") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t rows = 2 + rng.index(30);
        const std::size_t cols = 1 + rng.index(6);
        std::vector<int> segments;
        for (std::size_t r = 0; r < rows; ++r) segments.push_back(static_cast<int>(rng.index(5)));
        Tape tape;
        const ValueId out = tape.neighbor_softmax(tape.input(random_tensor(rows, cols, rng, -30.0, 30.0)), segments);
        const Tensor& y = tape.value(out);
        for (int seg = 0; seg < 5; ++seg) {
            for (std::size_t c = 0; c < cols; ++c) {
                double sum = 0.0;
                bool any = false;
                for (std::size_t r = 0; r < rows; ++r) {
                    if (segments[r] == seg) {
                        CHECK(y.at(r, c) >= 0.0);
                        sum += y.at(r, c);
                        any = true;
                    }
                }
                if (any) CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("cross_entropy of uniform logits is ln 3") {
    Tape tape;
    const ValueId logits = tape.input(Tensor(1, 3, {0.0, 0.0, 0.0}));
    const ValueId loss = tape.cross_entropy(logits, {1});
    CHECK(tape.value(loss).data[0] == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("layer_norm uses population variance") {
    Tape tape;
    const ValueId x = tape.input(Tensor(1, 3, {1.0, 2.0, 3.0}));
    const ValueId gain = tape.input(Tensor(1, 3, 1.0));
    const ValueId bias = tape.input(Tensor(1, 3, 0.0));
    const ValueId out = tape.layer_norm(x, gain, bias);
    // hand value: (x - 2) / sqrt(2/3) = ±1.2247449, 0 (epsilon shifts it below 1e-4)
    CHECK(tape.value(out).at(0, 0) == doctest::Approx(-1.2247449).epsilon(1e-4));
    CHECK(tape.value(out).at(0, 1) == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
    CHECK(tape.value(out).at(0, 2) == doctest::Approx(1.2247449).epsilon(1e-4));
}

TEST_CASE("grad_check: linear layer is exact to roundoff") {
    Rng rng(7);
    const std::vector<Tensor> inputs{random_tensor(4, 3, rng), random_tensor(5, 3, rng), random_tensor(1, 5, rng)};
    const double err = diff::grad_check(
        [](Tape& t, const std::vector<ValueId>& ids) { return t.sum_all(t.linear(ids[0], ids[1], ids[2])); }, inputs,
        kEps);
    CHECK(err < 1e-6);
}

TEST_CASE("grad_check: elementwise and shape ops") {
    Rng rng(11);
    SUBCASE("mul + add") {
        const std::vector<Tensor> inputs{random_tensor(3, 4, rng), random_tensor(3, 4, rng),
                                         random_tensor(3, 4, rng)};
        const double err = diff::grad_check(
            [](Tape& t, const std::vector<ValueId>& ids) {
                return t.sum_all(t.mul(t.add(ids[0], ids[1]), ids[2]));
            },
            inputs, kEps);
        CHECK(err < 1e-4);
    }
    SUBCASE("scale") {
        const double err = diff::grad_check(
            [](Tape& t, const std::vector<ValueId>& ids) { return t.sum_all(t.scale(ids[0], -2.5)); },
            {random_tensor(4, 4, rng)}, kEps);
        CHECK(err < 1e-6);
    }
    SUBCASE("concat_cols") {
        const std::vector<Tensor> inputs{random_tensor(3, 2, rng), random_tensor(3, 5, rng)};
        const double err = diff::grad_check(
            [](Tape& t, const std::vector<ValueId>& ids) {
                const ValueId c = t.concat_cols({ids[0], ids[1]});
                return t.sum_all(t.mul(c, c));
            },
            inputs, kEps);
        CHECK(err < 1e-4);
    }
    SUBCASE("relu away from the kink") {
        Tensor x(3, 3);
        for (std::size_t i = 0; i < x.size(); ++i) x.data[i] = (i % 2 == 0 ? 1.0 : -1.0) * (0.5 + 0.1 * double(i));
        const double err = diff::grad_check(
            [](Tape& t, const std::vector<ValueId>& ids) {
                return t.sum_all(t.mul(t.relu(ids[0]), ids[0]));
            },
            {x}, kEps);
        CHECK(err < 1e-4);
    }
    SUBCASE("rowwise_dot, mean_cols, broadcast_col") {
        const std::vector<Tensor> inputs{random_tensor(4, 3, rng), random_tensor(4, 3, rng)};
        const double err = diff::grad_check(
            [](Tape& t, const std::vector<ValueId>& ids) {
                const ValueId d = t.rowwise_dot(ids[0], ids[1]);
                const ValueId m = t.mean_cols(ids[1]);
                return t.sum_all(t.mul(t.broadcast_col(d, 3), t.broadcast_col(m, 3)));
            },
            inputs, kEps);
        CHECK(err < 1e-4);
    }
}

TEST_CASE("grad_check: layer_norm") {
    Rng rng(13);
    const std::vector<Tensor> inputs{random_tensor(4, 6, rng, -2.0, 2.0), random_tensor(1, 6, rng, 0.5, 1.5),
                                     random_tensor(1, 6, rng)};
    const double err = diff::grad_check(
        [](Tape& t, const std::vector<ValueId>& ids) {
            const ValueId y = t.layer_norm(ids[0], ids[1], ids[2]);
            return t.sum_all(t.mul(y, y));
        },
        inputs, kEps);
    CHECK(err < 1e-4);
}

TEST_CASE("grad_check: gather and segment_sum") {
    Rng rng(17);
    const std::vector<int> rows{2, 0, 1, 0, 2, 2};
    const std::vector<int> segments{0, 1, 1, 0, 2, 0};
    const std::vector<Tensor> inputs{random_tensor(3, 4, rng)};
    const double err = diff::grad_check(
        [&](Tape& t, const std::vector<ValueId>& ids) {
            const ValueId g = t.gather_rows(ids[0], rows);
            const ValueId s = t.segment_sum(g, segments, 3);
            return t.sum_all(t.mul(s, s));
        },
        inputs, kEps);
    CHECK(err < 1e-4);
}

TEST_CASE("grad_check: neighbor_softmax composed with cross_entropy") {
    Rng rng(19);
    const std::vector<int> segments{0, 0, 1, 1, 1, 2};
    const std::vector<Tensor> inputs{random_tensor(6, 3, rng, -2.0, 2.0)};
    const double err = diff::grad_check(
        [&](Tape& t, const std::vector<ValueId>& ids) {
            const ValueId soft = t.neighbor_softmax(ids[0], segments);
            const ValueId pooled = t.segment_sum(soft, segments, 3);
            return t.cross_entropy(pooled, {0, 2, 1});
        },
        inputs, kEps);
    CHECK(err < 1e-5);
}

TEST_CASE("grad_check: masked weighted cross_entropy") {
    Rng rng(23);
    const std::vector<Tensor> inputs{random_tensor(5, 3, rng, -2.0, 2.0)};
    const std::vector<int> labels{0, 1, 2, 1, 0};
    const std::vector<std::uint8_t> mask{1, 0, 1, 1, 0};
    const std::vector<double> weights{1.0, 2.0, 0.5};
    const double err = diff::grad_check(
        [&](Tape& t, const std::vector<ValueId>& ids) { return t.cross_entropy(ids[0], labels, mask, weights); },
        inputs, kEps);
    CHECK(err < 1e-5);
}

TEST_CASE("fan-out gradients accumulate over every path") {
    Rng rng(29);
    Tensor x(2, 3);
    for (std::size_t i = 0; i < x.size(); ++i) x.data[i] = 0.4 + 0.15 * static_cast<double>(i);  // positive: relu smooth
    // diamond: x feeds three paths that rejoin
    const double err = diff::grad_check(
        [](Tape& t, const std::vector<ValueId>& ids) {
            const ValueId a = t.relu(ids[0]);
            const ValueId b = t.scale(ids[0], 2.0);
            const ValueId c = t.mul(a, b);
            const ValueId d = t.add(c, ids[0]);
            return t.sum_all(d);
        },
        {x}, kEps);
    CHECK(err < 1e-4);

    // and the analytic gradient itself: d/dx (2x^2 + x) = 4x + 1 for x > 0
    Tape tape;
    const ValueId in = tape.input(x);
    const ValueId a = tape.relu(in);
    const ValueId b = tape.scale(in, 2.0);
    const ValueId out = tape.sum_all(tape.add(tape.mul(a, b), in));
    tape.backward(out);
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(tape.grad(in).data[i] == doctest::Approx(4.0 * x.data[i] + 1.0).epsilon(1e-12));
}

TEST_CASE("constant function has zero gradient both ways") {
    const double err = diff::grad_check(
        [](Tape& t, const std::vector<ValueId>& ids) {
            (void)ids;
            return t.input(Tensor::scalar(3.5));
        },
        {Tensor(2, 2, 1.0)}, kEps);
    CHECK(err == 0.0);
}

TEST_CASE("forward is bitwise deterministic") {
    Rng rng_a(31), rng_b(31);
    auto run = [](Rng& rng) {
        Tape tape;
        const ValueId x = tape.input(random_tensor(5, 4, rng));
        const ValueId w = tape.input(random_tensor(3, 4, rng));
        const ValueId soft = tape.neighbor_softmax(tape.linear(x, w), {0, 0, 1, 1, 1});
        tape.backward(tape.sum_all(soft));
        return std::make_pair(tape.value(soft), tape.grad(x));
    };
    const auto [va, ga] = run(rng_a);
    const auto [vb, gb] = run(rng_b);
    CHECK(va.data == vb.data);
    CHECK(ga.data == gb.data);
}

TEST_CASE("shape violations raise ShapeMismatch") {
    Tape tape;
    const ValueId a = tape.input(Tensor(2, 3, 1.0));
    const ValueId b = tape.input(Tensor(3, 2, 1.0));
    CHECK_THROWS_WITH_AS(tape.add(a, b), doctest::Contains("ShapeMismatch"), Error);
    CHECK_THROWS_WITH_AS(tape.mul(a, b), doctest::Contains("ShapeMismatch"), Error);
    CHECK_THROWS_WITH_AS(tape.linear(a, tape.input(Tensor(2, 5, 1.0))), doctest::Contains("ShapeMismatch"), Error);
    CHECK_THROWS_WITH_AS(tape.neighbor_softmax(a, {0}), doctest::Contains("ShapeMismatch"), Error);
    CHECK_THROWS_WITH_AS(tape.cross_entropy(a, {0}), doctest::Contains("ShapeMismatch"), Error);
}

TEST_CASE("cross_entropy with nothing masked raises EmptyMask") {
    Tape tape;
    const ValueId logits = tape.input(Tensor(2, 3, 0.0));
    CHECK_THROWS_WITH_AS(tape.cross_entropy(logits, {0, 1}, {0, 0}), doctest::Contains("EmptyMask"), Error);
}
