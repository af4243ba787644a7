#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "clgt/tensor.hpp"

namespace clgt::diff {

using ValueId = std::size_t;

// Reverse-mode gradient tape. Operations append nodes in execution order;
// backward() visits them in reverse, which is a valid reverse topological
// order because inputs always precede their consumers. Gradients accumulate
// additively across fan-out. All reductions run left to right so identical
// inputs give bitwise-identical results.
class Tape {
public:
    ValueId input(Tensor t);

    const Tensor& value(ValueId id) const { return nodes_[id].value; }
    const Tensor& grad(ValueId id) const { return nodes_[id].grad; }
    std::size_t size() const { return nodes_.size(); }

    // y = x * W^T (+ b); x is n×in, W is out×in, b is 1×out
    ValueId linear(ValueId x, ValueId w);
    ValueId linear(ValueId x, ValueId w, ValueId b);

    ValueId add(ValueId a, ValueId b);
    ValueId mul(ValueId a, ValueId b);
    ValueId scale(ValueId x, double c);
    ValueId relu(ValueId x);
    ValueId concat_cols(const std::vector<ValueId>& xs);

    // per-row normalization with population variance; gain/bias are 1×cols
    ValueId layer_norm(ValueId x, ValueId gain, ValueId bias, double epsilon = 1e-5);

    // softmax over rows sharing a segment id, independently per column, with
    // max-subtraction stabilization; segment ids need not be contiguous
    ValueId neighbor_softmax(ValueId scores, const std::vector<int>& segment_of_row);

    ValueId gather_rows(ValueId x, const std::vector<int>& rows);
    ValueId segment_sum(ValueId x, const std::vector<int>& segment_of_row, std::size_t segments);

    ValueId sum_all(ValueId x);
    ValueId rowwise_dot(ValueId a, ValueId b);       // m×c, m×c -> m×1
    ValueId mean_cols(ValueId x);                    // m×c -> m×1
    ValueId broadcast_col(ValueId x, std::size_t cols);  // m×1 -> m×c

    // mean cross-entropy over masked rows; empty mask vector means all rows.
    // class_weights, when given, weight each row by its label's entry.
    ValueId cross_entropy(ValueId logits, const std::vector<int>& labels, const std::vector<std::uint8_t>& mask = {},
                          const std::vector<double>& class_weights = {});

    // seeds d(root)/d(root) = 1 and propagates; root must be scalar
    void backward(ValueId root);

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void(Tape&)> backward;
    };

    ValueId push(Tensor value, std::function<void(Tape&)> backward_fn);
    Tensor& grad_ref(ValueId id) { return nodes_[id].grad; }

    std::vector<Node> nodes_;
};

// Compares the tape gradient of a scalar-valued builder against central
// finite differences, componentwise over every input tensor. Returns the
// worst relative error, |analytic - numeric| / max(1, |analytic|, |numeric|).
using ScalarBuilder = std::function<ValueId(Tape&, const std::vector<ValueId>&)>;
double grad_check(const ScalarBuilder& f, const std::vector<Tensor>& inputs, double epsilon);

}  // namespace clgt::diff
