#pragma once

#include <cstdint>
#include <vector>

namespace clgt::train {

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double auc = 0.0;
    std::size_t support = 0;
    bool degenerate = false;  // absent from the mask, excluded from macro averages
};

struct Metrics {
    double acc = 0.0;
    double f1_macro = 0.0;
    double auc_macro_ovr = 0.0;
    // alternative averaging conventions, reported alongside the macro ones
    double f1_weighted = 0.0;
    double f1_micro = 0.0;  // equals accuracy for single-label problems
    double auc_weighted_ovr = 0.0;
    double auc_micro_ovr = 0.0;  // one flattened (cell, class) binary problem
    std::vector<ClassMetrics> per_class;
    bool has_degenerate_class = false;
};

// One-vs-rest AUC for one class via the exact step ROC with tie grouping
// (trapezoids over groups of equal scores; equals the Mann-Whitney statistic).
// Returns -1 when the class has no positives or no negatives.
double binary_auc(const std::vector<double>& scores, const std::vector<std::uint8_t>& positive);

// probabilities: row-major n×classes; labels in [0, classes); mask optional.
Metrics compute_metrics(const std::vector<double>& probabilities, std::size_t classes,
                        const std::vector<int>& labels, const std::vector<std::uint8_t>& mask = {});

}  // namespace clgt::train
