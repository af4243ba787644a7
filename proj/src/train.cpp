#include "clgt/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "clgt/errors.hpp"
#include "clgt/rng.hpp"

namespace clgt::train {

using diff::Tape;
using diff::Tensor;
using diff::ValueId;

SplitMasks split_dataset(const std::vector<Sample>& samples, double train_ratio, double val_ratio, double test_ratio,
                         std::uint64_t seed) {
    const double total = train_ratio + val_ratio + test_ratio;
    if (train_ratio < 0.0 || val_ratio < 0.0 || test_ratio < 0.0 || std::abs(total - 1.0) > 1e-9)
        throw Error(errc::bad_ratios, "split ratios must be nonnegative and sum to 1");

    SplitMasks masks;
    auto blank = [&] {
        std::vector<std::vector<std::uint8_t>> m;
        for (const auto& s : samples) m.emplace_back(s.inputs.n, 0);
        return m;
    };
    masks.train = blank();
    masks.val = blank();
    masks.test = blank();

    // stratum: (grade, team) -> list of (sample index, vertex)
    std::map<std::pair<int, int>, std::vector<std::pair<std::size_t, std::size_t>>> strata;
    for (std::size_t si = 0; si < samples.size(); ++si) {
        const Sample& s = samples[si];
        for (std::size_t vi = 0; vi < s.inputs.n; ++vi) {
            if (s.labels[vi] < 0) continue;
            strata[{s.labels[vi], s.team_of_vertex[vi]}].emplace_back(si, vi);
        }
    }

    Rng rng(seed);
    for (auto& [key, cells] : strata) {
        (void)key;
        rng.shuffle(cells);
        const std::size_t n = cells.size();
        const double ratios[3] = {train_ratio, val_ratio, test_ratio};
        std::size_t counts[3];
        double fractional[3];
        std::size_t assigned = 0;
        for (int k = 0; k < 3; ++k) {
            const double exact = ratios[k] * static_cast<double>(n);
            counts[k] = static_cast<std::size_t>(std::floor(exact));
            fractional[k] = exact - std::floor(exact);
            assigned += counts[k];
        }
        // largest remainder, ties resolved train > val > test
        while (assigned < n) {
            int best = 0;
            for (int k = 1; k < 3; ++k)
                if (fractional[k] > fractional[best]) best = k;
            ++counts[best];
            fractional[best] = -1.0;
            ++assigned;
        }
        std::size_t offset = 0;
        for (int k = 0; k < 3; ++k) {
            auto& target = (k == 0) ? masks.train : (k == 1) ? masks.val : masks.test;
            for (std::size_t i = 0; i < counts[k]; ++i) {
                const auto& [si, vi] = cells[offset + i];
                target[si][vi] = 1;
            }
            offset += counts[k];
        }
    }
    return masks;
}

std::vector<double> inverse_frequency_weights(const std::vector<Sample>& samples,
                                              const std::vector<std::vector<std::uint8_t>>& mask,
                                              std::size_t classes) {
    std::vector<double> counts(classes, 0.0);
    double total = 0.0;
    for (std::size_t si = 0; si < samples.size(); ++si) {
        for (std::size_t vi = 0; vi < samples[si].inputs.n; ++vi) {
            if (!mask[si][vi] || samples[si].labels[vi] < 0) continue;
            counts[static_cast<std::size_t>(samples[si].labels[vi])] += 1.0;
            total += 1.0;
        }
    }
    std::vector<double> weights(classes, 1.0);
    for (std::size_t c = 0; c < classes; ++c)
        weights[c] = counts[c] > 0.0 ? total / (static_cast<double>(classes) * counts[c]) : 0.0;
    return weights;
}

double masked_loss(const model::ClgtModel& m, const Sample& sample, const std::vector<std::uint8_t>& mask,
                   const std::vector<double>& class_weights) {
    Tape tape;
    const auto run = model::forward_on_tape(tape, m, sample.inputs);
    std::vector<int> labels = sample.labels;
    for (int& l : labels)
        if (l < 0) l = 0;  // masked out anyway
    std::vector<std::uint8_t> effective = mask;
    for (std::size_t i = 0; i < effective.size(); ++i)
        if (sample.labels[i] < 0) effective[i] = 0;
    return tape.value(tape.cross_entropy(run.logits, labels, effective, class_weights)).data[0];
}

void adam_step(std::vector<diff::Tensor*>& params, const std::vector<diff::Tensor>& grads, AdamState& state,
               double lr) {
    if (state.m.empty()) {
        for (const auto* p : params) {
            state.m.emplace_back(p->rows, p->cols, 0.0);
            state.v.emplace_back(p->rows, p->cols, 0.0);
        }
    }
    ++state.t;
    const double bias1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bias2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = grads[i];
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        for (std::size_t k = 0; k < p.size(); ++k) {
            m.data[k] = state.beta1 * m.data[k] + (1.0 - state.beta1) * g.data[k];
            v.data[k] = state.beta2 * v.data[k] + (1.0 - state.beta2) * g.data[k] * g.data[k];
            const double m_hat = m.data[k] / bias1;
            const double v_hat = v.data[k] / bias2;
            p.data[k] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
    }
}

LrSchedule::LrSchedule(double initial_lr, double factor, int patience, double stop_lr)
    : lr_(initial_lr), factor_(factor), patience_(patience), stop_lr_(stop_lr) {
    if (patience < 1) throw Error(errc::bad_config, "patience must be >= 1");
    if (!(factor > 0.0 && factor < 1.0)) throw Error(errc::bad_config, "decay factor must lie in (0,1)");
}

double LrSchedule::observe(double val_loss) {
    if (!has_best_ || val_loss < best_) {
        best_ = val_loss;
        has_best_ = true;
        since_improvement_ = 0;
    } else {
        ++since_improvement_;
        if (since_improvement_ >= patience_) {
            lr_ *= factor_;
            ++decays_;
            since_improvement_ = 0;
        }
    }
    return lr_;
}

namespace {

struct EpochEval {
    double loss = 0.0;
    double acc = 0.0;
};

EpochEval eval_masked(const model::ClgtModel& m, const std::vector<Sample>& samples,
                      const std::vector<std::vector<std::uint8_t>>& mask) {
    double loss_sum = 0.0;
    std::size_t count = 0, correct = 0;
    for (std::size_t si = 0; si < samples.size(); ++si) {
        const Sample& sample = samples[si];
        bool any = false;
        for (std::size_t vi = 0; vi < sample.inputs.n; ++vi)
            any |= (mask[si][vi] && sample.labels[vi] >= 0);
        if (!any) continue;

        Tape tape;
        const auto run = model::forward_on_tape(tape, m, sample.inputs);
        const Tensor& logits = tape.value(run.logits);
        for (std::size_t vi = 0; vi < sample.inputs.n; ++vi) {
            if (!mask[si][vi] || sample.labels[vi] < 0) continue;
            double max_logit = logits.at(vi, 0);
            std::size_t best = 0;
            for (std::size_t c = 1; c < logits.cols; ++c) {
                if (logits.at(vi, c) > max_logit) {
                    max_logit = logits.at(vi, c);
                    best = c;
                }
            }
            double denom = 0.0;
            for (std::size_t c = 0; c < logits.cols; ++c) denom += std::exp(logits.at(vi, c) - max_logit);
            const double log_p =
                logits.at(vi, static_cast<std::size_t>(sample.labels[vi])) - max_logit - std::log(denom);
            loss_sum -= log_p;
            ++count;
            if (best == static_cast<std::size_t>(sample.labels[vi])) ++correct;
        }
    }
    EpochEval out;
    if (count > 0) {
        out.loss = loss_sum / static_cast<double>(count);
        out.acc = static_cast<double>(correct) / static_cast<double>(count);
    }
    return out;
}

}  // namespace

TrainResult train_loop(model::ClgtModel model_in, const std::vector<Sample>& samples, const SplitMasks& masks,
                       const TrainConfig& config) {
    if (config.stop_lr >= config.initial_lr && config.max_epochs > 0)
        throw Error(errc::bad_config, "stop_lr must be below initial_lr");

    TrainResult result;
    result.model = std::move(model_in);
    if (config.max_epochs <= 0) return result;

    bool any_train = false;
    for (std::size_t si = 0; si < samples.size(); ++si)
        for (std::size_t vi = 0; vi < samples[si].inputs.n; ++vi)
            any_train |= (masks.train[si][vi] && samples[si].labels[vi] >= 0);
    if (!any_train) throw Error(errc::empty_mask, "training split is empty");

    std::vector<double> class_weights;
    if (config.class_weights)
        class_weights = inverse_frequency_weights(samples, masks.train, result.model.config.classes);

    auto params = result.model.named_params();
    std::vector<Tensor*> param_ptrs;
    param_ptrs.reserve(params.size());
    for (auto& [name, t] : params) {
        (void)name;
        param_ptrs.push_back(t);
    }

    AdamState adam;
    LrSchedule schedule(config.initial_lr, config.decay_factor, config.patience, config.stop_lr);
    std::vector<Tensor> best_params;
    result.best_val_loss = std::numeric_limits<double>::infinity();

    bool has_val = false;
    for (std::size_t si = 0; si < samples.size(); ++si)
        for (std::size_t vi = 0; vi < samples[si].inputs.n; ++vi)
            has_val |= (masks.val[si][vi] && samples[si].labels[vi] >= 0);

    Rng dropout_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const double lr = schedule.lr();
        double train_loss_sum = 0.0;
        std::size_t train_batches = 0;
        for (std::size_t si = 0; si < samples.size(); ++si) {
            const Sample& sample = samples[si];
            std::vector<std::uint8_t> mask = masks.train[si];
            bool any = false;
            for (std::size_t vi = 0; vi < sample.inputs.n; ++vi) {
                if (sample.labels[vi] < 0) mask[vi] = 0;
                any |= (mask[vi] != 0);
            }
            if (!any) continue;

            Tape tape;
            model::ParamIds ids;
            model::ForwardOptions options;
            options.training = true;
            options.dropout_rng = &dropout_rng;
            const auto run = model::forward_on_tape(tape, result.model, sample.inputs, options, &ids);
            std::vector<int> labels = sample.labels;
            for (int& l : labels)
                if (l < 0) l = 0;
            const ValueId loss_id = tape.cross_entropy(run.logits, labels, mask, class_weights);
            tape.backward(loss_id);
            train_loss_sum += tape.value(loss_id).data[0];
            ++train_batches;

            std::vector<Tensor> grads;
            grads.reserve(ids.flat.size());
            for (ValueId id : ids.flat) grads.push_back(tape.grad(id));
            adam_step(param_ptrs, grads, adam, lr);
        }

        const EpochEval val = has_val ? eval_masked(result.model, samples, masks.val)
                                      : eval_masked(result.model, samples, masks.train);
        EpochStats stats;
        stats.epoch = epoch;
        stats.lr = lr;
        stats.train_loss = train_batches > 0 ? train_loss_sum / static_cast<double>(train_batches) : 0.0;
        stats.val_loss = val.loss;
        stats.val_acc = val.acc;
        result.history.push_back(stats);

        if (val.loss < result.best_val_loss) {
            result.best_val_loss = val.loss;
            result.best_epoch = epoch;
            best_params.clear();
            for (const Tensor* p : param_ptrs) best_params.push_back(*p);
        }

        schedule.observe(val.loss);
        if (schedule.should_stop()) break;
    }

    if (!best_params.empty()) {
        for (std::size_t i = 0; i < param_ptrs.size(); ++i) *param_ptrs[i] = best_params[i];
    }
    return result;
}

std::vector<std::vector<double>> predict_probabilities(const model::ClgtModel& m,
                                                       const std::vector<Sample>& samples) {
    std::vector<std::vector<double>> out;
    out.reserve(samples.size());
    for (const Sample& sample : samples) {
        const Tensor logits = model::forward(m, sample.inputs);
        std::vector<double> probs(logits.rows * logits.cols, 0.0);
        for (std::size_t r = 0; r < logits.rows; ++r) {
            double max_logit = logits.at(r, 0);
            for (std::size_t c = 1; c < logits.cols; ++c) max_logit = std::max(max_logit, logits.at(r, c));
            double denom = 0.0;
            for (std::size_t c = 0; c < logits.cols; ++c) denom += std::exp(logits.at(r, c) - max_logit);
            for (std::size_t c = 0; c < logits.cols; ++c)
                probs[r * logits.cols + c] = std::exp(logits.at(r, c) - max_logit) / denom;
        }
        out.push_back(std::move(probs));
    }
    return out;
}

Metrics evaluate(const model::ClgtModel& m, const std::vector<Sample>& samples,
                 const std::vector<std::vector<std::uint8_t>>& mask) {
    const std::size_t classes = m.config.classes;
    std::vector<double> probs;
    std::vector<int> labels;
    const auto per_sample = predict_probabilities(m, samples);
    for (std::size_t si = 0; si < samples.size(); ++si) {
        for (std::size_t vi = 0; vi < samples[si].inputs.n; ++vi) {
            if (!mask[si][vi] || samples[si].labels[vi] < 0) continue;
            for (std::size_t c = 0; c < classes; ++c) probs.push_back(per_sample[si][vi * classes + c]);
            labels.push_back(samples[si].labels[vi]);
        }
    }
    return compute_metrics(probs, classes, labels);
}

int aggregate_final(const std::vector<std::pair<int, int>>& weekly_predictions) {
    std::map<int, std::pair<int, int>> votes;  // class -> (count, latest week)
    for (const auto& [week, cls] : weekly_predictions) {
        auto& v = votes[cls];
        v.first += 1;
        v.second = std::max(v.second, week);
    }
    int best_class = -1;
    std::pair<int, int> best{-1, -1};
    for (const auto& [cls, v] : votes) {
        if (v > best) {
            best = v;
            best_class = cls;
        }
    }
    return best_class;
}

std::vector<int> aggregate_final_per_student(const std::vector<Sample>& samples,
                                             const std::vector<std::vector<int>>& weekly_classes, std::size_t n) {
    std::vector<int> out(n, -1);
    for (std::size_t vi = 0; vi < n; ++vi) {
        std::vector<std::pair<int, int>> votes;
        for (std::size_t si = 0; si < samples.size(); ++si) votes.emplace_back(samples[si].week, weekly_classes[si][vi]);
        out[vi] = aggregate_final(votes);
    }
    return out;
}

}  // namespace clgt::train
