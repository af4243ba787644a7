#include "clgt/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "clgt/errors.hpp"

namespace clgt::train {

double binary_auc(const std::vector<double>& scores, const std::vector<std::uint8_t>& positive) {
    std::size_t pos = 0, neg = 0;
    for (std::uint8_t p : positive) (p ? pos : neg) += 1;
    if (pos == 0 || neg == 0) return -1.0;

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    // walk distinct-score groups; within a group the ROC moves diagonally,
    // which the trapezoid term accounts for
    double auc = 0.0;
    double tp = 0.0, fp = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        double tp_step = 0.0, fp_step = 0.0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            if (positive[order[j]]) tp_step += 1.0;
            else fp_step += 1.0;
            ++j;
        }
        auc += (fp_step / static_cast<double>(neg)) * ((tp + tp_step / 2.0) / static_cast<double>(pos));
        tp += tp_step;
        fp += fp_step;
        i = j;
    }
    return auc;
}

Metrics compute_metrics(const std::vector<double>& probabilities, std::size_t classes,
                        const std::vector<int>& labels, const std::vector<std::uint8_t>& mask) {
    const std::size_t n = labels.size();
    if (probabilities.size() != n * classes) throw Error(errc::shape_mismatch, "probability matrix size mismatch");
    if (!mask.empty() && mask.size() != n) throw Error(errc::shape_mismatch, "mask size mismatch");

    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < n; ++i)
        if (mask.empty() || mask[i]) kept.push_back(i);
    if (kept.empty()) throw Error(errc::empty_mask, "no masked cells to evaluate");

    Metrics metrics;
    metrics.per_class.resize(classes);

    std::size_t correct = 0;
    std::vector<std::size_t> tp(classes, 0), fp(classes, 0), fn(classes, 0);
    for (std::size_t i : kept) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < classes; ++c)
            if (probabilities[i * classes + c] > probabilities[i * classes + best]) best = c;
        const auto truth = static_cast<std::size_t>(labels[i]);
        if (best == truth) {
            ++correct;
            ++tp[truth];
        } else {
            ++fp[best];
            ++fn[truth];
        }
        ++metrics.per_class[truth].support;
    }
    metrics.acc = static_cast<double>(correct) / static_cast<double>(kept.size());

    double f1_sum = 0.0, auc_sum = 0.0;
    double f1_weighted_sum = 0.0, auc_weighted_sum = 0.0;
    std::size_t f1_classes = 0, auc_classes = 0, auc_support = 0;
    std::vector<double> flat_scores;
    std::vector<std::uint8_t> flat_positive;
    flat_scores.reserve(kept.size() * classes);
    flat_positive.reserve(kept.size() * classes);
    for (std::size_t c = 0; c < classes; ++c) {
        ClassMetrics& cm = metrics.per_class[c];
        if (cm.support == 0) {
            cm.degenerate = true;
            metrics.has_degenerate_class = true;
            continue;
        }
        const double p_den = static_cast<double>(tp[c] + fp[c]);
        const double r_den = static_cast<double>(tp[c] + fn[c]);
        cm.precision = p_den > 0.0 ? static_cast<double>(tp[c]) / p_den : 0.0;
        cm.recall = r_den > 0.0 ? static_cast<double>(tp[c]) / r_den : 0.0;
        cm.f1 = (cm.precision + cm.recall) > 0.0 ? 2.0 * cm.precision * cm.recall / (cm.precision + cm.recall) : 0.0;
        f1_sum += cm.f1;
        f1_weighted_sum += cm.f1 * static_cast<double>(cm.support);
        ++f1_classes;

        std::vector<double> scores;
        std::vector<std::uint8_t> positive;
        scores.reserve(kept.size());
        positive.reserve(kept.size());
        for (std::size_t i : kept) {
            scores.push_back(probabilities[i * classes + c]);
            positive.push_back(static_cast<std::size_t>(labels[i]) == c ? 1 : 0);
            flat_scores.push_back(scores.back());
            flat_positive.push_back(positive.back());
        }
        const double auc = binary_auc(scores, positive);
        if (auc >= 0.0) {
            cm.auc = auc;
            auc_sum += auc;
            auc_weighted_sum += auc * static_cast<double>(cm.support);
            auc_support += cm.support;
            ++auc_classes;
        } else {
            cm.degenerate = true;
            metrics.has_degenerate_class = true;
        }
    }
    metrics.f1_macro = f1_classes > 0 ? f1_sum / static_cast<double>(f1_classes) : 0.0;
    metrics.auc_macro_ovr = auc_classes > 0 ? auc_sum / static_cast<double>(auc_classes) : 0.0;
    metrics.f1_weighted = f1_weighted_sum / static_cast<double>(kept.size());
    metrics.f1_micro = metrics.acc;  // single-label: micro P = micro R = accuracy
    metrics.auc_weighted_ovr = auc_support > 0 ? auc_weighted_sum / static_cast<double>(auc_support) : 0.0;
    const double micro = binary_auc(flat_scores, flat_positive);
    metrics.auc_micro_ovr = micro >= 0.0 ? micro : 0.0;
    return metrics;
}

}  // namespace clgt::train
