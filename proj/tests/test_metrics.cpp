#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "clgt/errors.hpp"
#include "clgt/metrics.hpp"
#include "clgt/rng.hpp"

using namespace clgt;
using namespace clgt::train;

namespace {

// independent oracle: all positive/negative pairs, ties worth one half
double auc_by_pairs(const std::vector<double>& scores, const std::vector<std::uint8_t>& positive) {
    double wins = 0.0;
    std::size_t pos = 0, neg = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!positive[i]) continue;
        ++pos;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (positive[j]) continue;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    for (std::uint8_t p : positive) neg += (p == 0);
    return wins / (static_cast<double>(pos) * static_cast<double>(neg));
}

std::vector<double> one_hot_probs(const std::vector<int>& labels, std::size_t classes) {
    std::vector<double> probs(labels.size() * classes, 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) probs[i * classes + static_cast<std::size_t>(labels[i])] = 1.0;
    return probs;
}

}  // namespace

TEST_CASE("binary_auc hand cases") {
    CHECK(binary_auc({0.9, 0.1}, {1, 0}) == 1.0);
    CHECK(binary_auc({0.1, 0.9}, {1, 0}) == 0.0);
    CHECK(binary_auc({0.5, 0.5}, {1, 0}) == 0.5);
    CHECK(binary_auc({0.8, 0.6, 0.4}, {1, 0, 1}) == doctest::Approx(0.5));
    // degenerate: one class missing
    CHECK(binary_auc({0.3, 0.7}, {1, 1}) == -1.0);
    CHECK(binary_auc({0.3, 0.7}, {0, 0}) == -1.0);
}

TEST_CASE("binary_auc equals the pair-counting oracle, ties included") {
    Rng rng(2);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 5 + rng.index(60);
        std::vector<double> scores;
        std::vector<std::uint8_t> positive;
        bool has_pos = false, has_neg = false;
        for (std::size_t i = 0; i < n; ++i) {
            // quantized scores force plenty of ties
            scores.push_back(std::floor(rng.uniform() * 5.0) / 5.0);
            positive.push_back(rng.bernoulli(0.4) ? 1 : 0);
            has_pos |= positive.back() == 1;
            has_neg |= positive.back() == 0;
        }
        if (!has_pos || !has_neg) continue;
        CHECK(binary_auc(scores, positive) == doctest::Approx(auc_by_pairs(scores, positive)).epsilon(1e-12));
    }
}

TEST_CASE("perfect predictor scores ones across the board") {
    const std::vector<int> labels{0, 1, 2, 0, 1, 2, 2, 0};
    const auto metrics = compute_metrics(one_hot_probs(labels, 3), 3, labels);
    CHECK(metrics.acc == 1.0);
    CHECK(metrics.f1_macro == 1.0);
    CHECK(metrics.auc_macro_ovr == 1.0);
    for (const auto& cm : metrics.per_class) {
        CHECK(cm.f1 == 1.0);
        CHECK(cm.auc == 1.0);
        CHECK_FALSE(cm.degenerate);
    }
}

TEST_CASE("label-independent scores give AUC near one half") {
    Rng rng(7);
    const std::size_t n = 10000;
    std::vector<int> labels;
    std::vector<double> probs;
    for (std::size_t i = 0; i < n; ++i) {
        labels.push_back(static_cast<int>(rng.index(3)));
        double total = 0.0;
        double row[3];
        for (double& v : row) {
            v = 0.05 + rng.uniform();
            total += v;
        }
        for (double v : row) probs.push_back(v / total);
    }
    const auto metrics = compute_metrics(probs, 3, labels);
    CHECK(metrics.auc_macro_ovr == doctest::Approx(0.5).epsilon(0.1));
    CHECK(std::abs(metrics.auc_macro_ovr - 0.5) < 0.05);
}

TEST_CASE("AUC is invariant under strictly monotone score transforms") {
    Rng rng(13);
    const std::size_t n = 300;
    std::vector<int> labels;
    std::vector<double> probs;
    for (std::size_t i = 0; i < n; ++i) {
        labels.push_back(static_cast<int>(rng.index(3)));
        for (int c = 0; c < 3; ++c) probs.push_back(rng.uniform());
    }
    const auto base = compute_metrics(probs, 3, labels);

    auto transformed = probs;
    for (double& v : transformed) v = std::exp(3.0 * v) + 1.0;
    const auto warped = compute_metrics(transformed, 3, labels);
    CHECK(warped.auc_macro_ovr == doctest::Approx(base.auc_macro_ovr).epsilon(1e-12));
    CHECK(warped.acc == base.acc);  // same argmax under a shared monotone map
    for (std::size_t c = 0; c < 3; ++c)
        CHECK(warped.per_class[c].auc == doctest::Approx(base.per_class[c].auc).epsilon(1e-12));
}

TEST_CASE("metric bounds hold on arbitrary prediction/label pairs") {
    Rng rng(17);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 3 + rng.index(50);
        std::vector<int> labels;
        std::vector<double> probs;
        for (std::size_t i = 0; i < n; ++i) {
            labels.push_back(static_cast<int>(rng.index(3)));
            for (int c = 0; c < 3; ++c) probs.push_back(rng.uniform());
        }
        const auto metrics = compute_metrics(probs, 3, labels);
        CHECK(metrics.acc >= 0.0);
        CHECK(metrics.acc <= 1.0);
        CHECK(metrics.f1_macro >= 0.0);
        CHECK(metrics.f1_macro <= 1.0);
        CHECK(metrics.auc_macro_ovr >= 0.0);
        CHECK(metrics.auc_macro_ovr <= 1.0);
    }
}

TEST_CASE("a class absent from the mask is excluded and flagged") {
    const std::vector<int> labels{0, 1, 0, 1};  // class 2 never appears
    std::vector<double> probs{0.8, 0.1, 0.1, 0.2, 0.7, 0.1, 0.6, 0.3, 0.1, 0.3, 0.6, 0.1};
    const auto metrics = compute_metrics(probs, 3, labels);
    CHECK(metrics.has_degenerate_class);
    CHECK(metrics.per_class[2].degenerate);
    CHECK(metrics.per_class[2].support == 0);
    CHECK(metrics.acc == 1.0);
    CHECK(metrics.f1_macro == 1.0);  // macro over classes 0 and 1 only
    CHECK(metrics.auc_macro_ovr == 1.0);
}

TEST_CASE("hand-checked confusion matrix") {
    // predictions: argmax of probs; constructed confusion:
    //   class0: 2 right, 1 predicted as 1; class1: 1 right, 1 as 0
    const std::vector<int> labels{0, 0, 0, 1, 1};
    const std::vector<double> probs{
        0.9, 0.05, 0.05,  // 0 -> 0
        0.8, 0.1,  0.1,   // 0 -> 0
        0.2, 0.7,  0.1,   // 0 -> 1
        0.6, 0.3,  0.1,   // 1 -> 0
        0.1, 0.8,  0.1,   // 1 -> 1
    };
    const auto metrics = compute_metrics(probs, 3, labels);
    CHECK(metrics.acc == doctest::Approx(3.0 / 5.0));
    // class0: P=2/3, R=2/3, F1=2/3; class1: P=1/2, R=1/2, F1=1/2
    CHECK(metrics.per_class[0].f1 == doctest::Approx(2.0 / 3.0));
    CHECK(metrics.per_class[1].f1 == doctest::Approx(0.5));
    CHECK(metrics.f1_macro == doctest::Approx((2.0 / 3.0 + 0.5) / 2.0));
}

TEST_CASE("averaging variants: weighted, micro") {
    // perfect predictor scores one under every averaging convention
    const std::vector<int> labels{0, 1, 2, 0, 1, 2};
    std::vector<double> one_hot(labels.size() * 3, 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) one_hot[i * 3 + static_cast<std::size_t>(labels[i])] = 1.0;
    const auto perfect = compute_metrics(one_hot, 3, labels);
    CHECK(perfect.f1_weighted == 1.0);
    CHECK(perfect.f1_micro == 1.0);
    CHECK(perfect.auc_weighted_ovr == 1.0);
    CHECK(perfect.auc_micro_ovr == 1.0);

    // micro F1 equals accuracy; weighted differs from macro on imbalance
    Rng rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<int> rand_labels;
        std::vector<double> probs;
        for (int i = 0; i < 60; ++i) {
            rand_labels.push_back(rng.bernoulli(0.7) ? 0 : static_cast<int>(1 + rng.index(2)));  // imbalanced
            for (int c = 0; c < 3; ++c) probs.push_back(rng.uniform());
        }
        const auto metrics = compute_metrics(probs, 3, rand_labels);
        CHECK(metrics.f1_micro == metrics.acc);
        // weighted mean uses supports; equality with macro would need equal class masses
        CHECK(metrics.f1_weighted >= 0.0);
        CHECK(metrics.f1_weighted <= 1.0);
        CHECK(metrics.auc_micro_ovr >= 0.0);
        CHECK(metrics.auc_micro_ovr <= 1.0);
    }

    // hand case where weighted and macro disagree
    const std::vector<int> skewed{0, 0, 0, 1};
    const std::vector<double> skewed_probs{
        0.9, 0.1, 0.0,  // 0 -> 0
        0.9, 0.1, 0.0,  // 0 -> 0
        0.1, 0.9, 0.0,  // 0 -> 1
        0.1, 0.9, 0.0,  // 1 -> 1
    };
    const auto skewed_metrics = compute_metrics(skewed_probs, 3, skewed);
    // class0: P=1, R=2/3, F1=0.8; class1: P=1/2, R=1, F1=2/3
    CHECK(skewed_metrics.f1_macro == doctest::Approx((0.8 + 2.0 / 3.0) / 2.0));
    CHECK(skewed_metrics.f1_weighted == doctest::Approx((3.0 * 0.8 + 1.0 * 2.0 / 3.0) / 4.0));
}

TEST_CASE("mask restricts evaluation and empty masks are rejected") {
    const std::vector<int> labels{0, 1, 2};
    const auto probs = one_hot_probs({0, 0, 0}, 3);  // only the first row is right
    const auto metrics = compute_metrics(probs, 3, labels, {1, 0, 0});
    CHECK(metrics.acc == 1.0);
    CHECK_THROWS_WITH_AS(compute_metrics(probs, 3, labels, {0, 0, 0}), doctest::Contains("EmptyMask"), Error);
}
