#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "clgt/metrics.hpp"
#include "clgt/model.hpp"
#include "clgt/records.hpp"

namespace clgt::train {

struct TrainConfig {
    double initial_lr = 1e-3;
    double decay_factor = 0.5;
    int patience = 5;
    double stop_lr = 1e-6;
    int max_epochs = 300;
    std::uint64_t seed = 0;
    double train_ratio = 0.6;
    double val_ratio = 0.2;
    double test_ratio = 0.2;
    bool class_weights = false;
};

// one weekly snapshot: graph inputs plus per-student labels
struct Sample {
    int week = 0;
    model::GraphInputs inputs;
    std::vector<int> labels;         // grade index per vertex, -1 when unlabeled
    std::vector<int> team_of_vertex; // stratification key
};

struct SplitMasks {
    // [sample][vertex], disjoint, covering every labeled cell
    std::vector<std::vector<std::uint8_t>> train;
    std::vector<std::vector<std::uint8_t>> val;
    std::vector<std::vector<std::uint8_t>> test;
};

// Stratified by (grade, team) at student-week granularity. Within each
// stratum cells are shuffled and allocated by largest remainder, so split
// sizes are exact up to rounding.
SplitMasks split_dataset(const std::vector<Sample>& samples, double train_ratio, double val_ratio, double test_ratio,
                         std::uint64_t seed);

// mean cross-entropy over masked vertices on a fresh tape (inference path)
double masked_loss(const model::ClgtModel& m, const Sample& sample, const std::vector<std::uint8_t>& mask,
                   const std::vector<double>& class_weights = {});

// inverse-frequency weights over masked training cells, mean-normalized
std::vector<double> inverse_frequency_weights(const std::vector<Sample>& samples,
                                              const std::vector<std::vector<std::uint8_t>>& mask,
                                              std::size_t classes);

struct AdamState {
    std::vector<diff::Tensor> m;
    std::vector<diff::Tensor> v;
    long t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

void adam_step(std::vector<diff::Tensor*>& params, const std::vector<diff::Tensor>& grads, AdamState& state,
               double lr);

// Reduce-on-plateau with a hard stop: lr decays by `factor` after `patience`
// epochs without strict improvement, training halts once lr <= stop_lr.
class LrSchedule {
public:
    LrSchedule(double initial_lr, double factor, int patience, double stop_lr);

    // feed one epoch's validation loss; returns the lr for the next epoch
    double observe(double val_loss);
    double lr() const { return lr_; }
    bool should_stop() const { return lr_ <= stop_lr_; }
    int decay_count() const { return decays_; }

private:
    double lr_;
    double factor_;
    int patience_;
    double stop_lr_;
    double best_ = 0.0;
    bool has_best_ = false;
    int since_improvement_ = 0;
    int decays_ = 0;
};

struct EpochStats {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
};

struct TrainResult {
    model::ClgtModel model;
    std::vector<EpochStats> history;
    double best_val_loss = 0.0;
    int best_epoch = -1;
};

TrainResult train_loop(model::ClgtModel model, const std::vector<Sample>& samples, const SplitMasks& masks,
                       const TrainConfig& config);

Metrics evaluate(const model::ClgtModel& m, const std::vector<Sample>& samples,
                 const std::vector<std::vector<std::uint8_t>>& mask);

// row-major [sample][vertex*classes] softmax probabilities
std::vector<std::vector<double>> predict_probabilities(const model::ClgtModel& m, const std::vector<Sample>& samples);

// Majority vote over weekly predicted classes, ties broken toward the class
// seen in the later week.
int aggregate_final(const std::vector<std::pair<int, int>>& weekly_predictions);  // (week, class)

std::vector<int> aggregate_final_per_student(const std::vector<Sample>& samples,
                                             const std::vector<std::vector<int>>& weekly_classes, std::size_t n);

}  // namespace clgt::train
