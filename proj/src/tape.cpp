#include "clgt/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "clgt/errors.hpp"

namespace clgt::diff {

namespace {

void require(bool condition, const char* message) {
    if (!condition) throw Error(errc::shape_mismatch, message);
}

}  // namespace

ValueId Tape::push(Tensor value, std::function<void(Tape&)> backward_fn) {
    nodes_.push_back({std::move(value), Tensor{}, std::move(backward_fn)});
    return nodes_.size() - 1;
}

ValueId Tape::input(Tensor t) { return push(std::move(t), nullptr); }

ValueId Tape::linear(ValueId x, ValueId w) {
    const Tensor& xv = value(x);
    const Tensor& wv = value(w);
    require(xv.cols == wv.cols, "linear: x cols must equal W cols (W is out×in)");
    Tensor out(xv.rows, wv.rows);
    for (std::size_t r = 0; r < xv.rows; ++r) {
        for (std::size_t o = 0; o < wv.rows; ++o) {
            double acc = 0.0;
            for (std::size_t i = 0; i < xv.cols; ++i) acc += xv.at(r, i) * wv.at(o, i);
            out.at(r, o) = acc;
        }
    }
    ValueId y = push(std::move(out), nullptr);
    nodes_[y].backward = [x, w, y](Tape& tape) {
        const Tensor& xv = tape.value(x);
        const Tensor& wv = tape.value(w);
        const Tensor& dy = tape.grad(y);
        Tensor& dx = tape.grad_ref(x);
        Tensor& dw = tape.grad_ref(w);
        for (std::size_t r = 0; r < xv.rows; ++r) {
            for (std::size_t o = 0; o < wv.rows; ++o) {
                const double g = dy.at(r, o);
                if (g == 0.0) continue;
                for (std::size_t i = 0; i < xv.cols; ++i) {
                    dx.at(r, i) += g * wv.at(o, i);
                    dw.at(o, i) += g * xv.at(r, i);
                }
            }
        }
    };
    return y;
}

ValueId Tape::linear(ValueId x, ValueId w, ValueId b) {
    const Tensor& xv = value(x);
    const Tensor& wv = value(w);
    const Tensor& bv = value(b);
    require(xv.cols == wv.cols, "linear: x cols must equal W cols (W is out×in)");
    require(bv.rows == 1 && bv.cols == wv.rows, "linear: bias must be 1×out");
    Tensor out(xv.rows, wv.rows);
    for (std::size_t r = 0; r < xv.rows; ++r) {
        for (std::size_t o = 0; o < wv.rows; ++o) {
            double acc = bv.at(0, o);
            for (std::size_t i = 0; i < xv.cols; ++i) acc += xv.at(r, i) * wv.at(o, i);
            out.at(r, o) = acc;
        }
    }
    ValueId y = push(std::move(out), nullptr);
    nodes_[y].backward = [x, w, b, y](Tape& tape) {
        const Tensor& xv = tape.value(x);
        const Tensor& wv = tape.value(w);
        const Tensor& dy = tape.grad(y);
        Tensor& dx = tape.grad_ref(x);
        Tensor& dw = tape.grad_ref(w);
        Tensor& db = tape.grad_ref(b);
        for (std::size_t r = 0; r < xv.rows; ++r) {
            for (std::size_t o = 0; o < wv.rows; ++o) {
                const double g = dy.at(r, o);
                if (g == 0.0) continue;
                db.at(0, o) += g;
                for (std::size_t i = 0; i < xv.cols; ++i) {
                    dx.at(r, i) += g * wv.at(o, i);
                    dw.at(o, i) += g * xv.at(r, i);
                }
            }
        }
    };
    return y;
}

ValueId Tape::add(ValueId a, ValueId b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    require(av.same_shape(bv), "add: shape mismatch");
    Tensor out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += bv.data[i];
    ValueId y = push(std::move(out), nullptr);
    nodes_[y].backward = [a, b, y](Tape& tape) {
        const Tensor& dy = tape.grad(y);
        Tensor& da = tape.grad_ref(a);
        Tensor& db = tape.grad_ref(b);
        for (std::size_t i = 0; i < dy.size(); ++i) {
            da.data[i] += dy.data[i];
            db.data[i] += dy.data[i];
        }
    };
    return y;
}

ValueId Tape::mul(ValueId a, ValueId b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    require(av.same_shape(bv), "mul: shape mismatch");
    Tensor out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= bv.data[i];
    ValueId y = push(std::move(out), nullptr);
    nodes_[y].backward = [a, b, y](Tape& tape) {
        const Tensor& av = tape.value(a);
        const Tensor& bv = tape.value(b);
        const Tensor& dy = tape.grad(y);
        Tensor& da = tape.grad_ref(a);
        Tensor& db = tape.grad_ref(b);
        for (std::size_t i = 0; i < dy.size(); ++i) {
            da.data[i] += dy.data[i] * bv.data[i];
            db.data[i] += dy.data[i] * av.data[i];
        }
    };
    return y;
}

ValueId Tape::scale(ValueId x, double c) {
    Tensor out = value(x);
    for (double& v : out.data) v *= c;
    ValueId y = push(std::move(out), nullptr);
    nodes_[y].backward = [x, y, c](Tape& tape) {
        const Tensor& dy = tape.grad(y);
        Tensor& dx = tape.grad_ref(x);
        for (std::size_t i = 0; i < dy.size(); ++i) dx.data[i] += c * dy.data[i];
    };
    return y;
}

ValueId Tape::relu(ValueId x) {
    Tensor out = value(x);
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    ValueId y = push(std::move(out), nullptr);
    nodes_[y].backward = [x, y](Tape& tape) {
        const Tensor& xv = tape.value(x);
        const Tensor& dy = tape.grad(y);
        Tensor& dx = tape.grad_ref(x);
        for (std::size_t i = 0; i < dy.size(); ++i)
            if (xv.data[i] > 0.0) dx.data[i] += dy.data[i];
    };
    return y;
}

ValueId Tape::concat_cols(const std::vector<ValueId>& xs) {
    require(!xs.empty(), "concat: no inputs");
    const std::size_t rows = value(xs[0]).rows;
    std::size_t cols = 0;
    for (ValueId id : xs) {
        require(value(id).rows == rows, "concat: row mismatch");
        cols += value(id).cols;
    }
    Tensor out(rows, cols);
    std::size_t offset = 0;
    for (ValueId id : xs) {
        const Tensor& v = value(id);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < v.cols; ++c) out.at(r, offset + c) = v.at(r, c);
        offset += v.cols;
    }
    ValueId y = push(std::move(out), nullptr);
    std::vector<ValueId> inputs = xs;
    nodes_[y].backward = [inputs, y](Tape& tape) {
        const Tensor& dy = tape.grad(y);
        std::size_t offset = 0;
        for (ValueId id : inputs) {
            Tensor& dx = tape.grad_ref(id);
            for (std::size_t r = 0; r < dx.rows; ++r)
                for (std::size_t c = 0; c < dx.cols; ++c) dx.at(r, c) += dy.at(r, offset + c);
            offset += dx.cols;
        }
    };
    return y;
}

ValueId Tape::layer_norm(ValueId x, ValueId gain, ValueId bias, double epsilon) {
    const Tensor& xv = value(x);
    const Tensor& gv = value(gain);
    const Tensor& bv = value(bias);
    require(gv.rows == 1 && gv.cols == xv.cols, "layer_norm: gain must be 1×cols");
    require(bv.rows == 1 && bv.cols == xv.cols, "layer_norm: bias must be 1×cols");

    const std::size_t n = xv.rows, d = xv.cols;
    Tensor out(n, d);
    std::vector<double> normalized(n * d);
    std::vector<double> inv_std(n);
    for (std::size_t r = 0; r < n; ++r) {
        double mean = 0.0;
        for (std::size_t c = 0; c < d; ++c) mean += xv.at(r, c);
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            const double diff = xv.at(r, c) - mean;
            var += diff * diff;
        }
        var /= static_cast<double>(d);
        inv_std[r] = 1.0 / std::sqrt(var + epsilon);
        for (std::size_t c = 0; c < d; ++c) {
            const double xhat = (xv.at(r, c) - mean) * inv_std[r];
            normalized[r * d + c] = xhat;
            out.at(r, c) = gv.at(0, c) * xhat + bv.at(0, c);
        }
    }
    ValueId y = push(std::move(out), nullptr);
    nodes_[y].backward = [x, gain, bias, y, normalized, inv_std](Tape& tape) {
        const Tensor& gv = tape.value(gain);
        const Tensor& dy = tape.grad(y);
        Tensor& dx = tape.grad_ref(x);
        Tensor& dg = tape.grad_ref(gain);
        Tensor& db = tape.grad_ref(bias);
        const std::size_t n = dy.rows, d = dy.cols;
        for (std::size_t r = 0; r < n; ++r) {
            double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                const double xhat = normalized[r * d + c];
                const double g = dy.at(r, c);
                db.at(0, c) += g;
                dg.at(0, c) += g * xhat;
                const double dxhat = g * gv.at(0, c);
                mean_dxhat += dxhat;
                mean_dxhat_xhat += dxhat * xhat;
            }
            mean_dxhat /= static_cast<double>(d);
            mean_dxhat_xhat /= static_cast<double>(d);
            for (std::size_t c = 0; c < d; ++c) {
                const double xhat = normalized[r * d + c];
                const double dxhat = dy.at(r, c) * gv.at(0, c);
                dx.at(r, c) += inv_std[r] * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat);
            }
        }
    };
    return y;
}

ValueId Tape::neighbor_softmax(ValueId scores, const std::vector<int>& segment_of_row) {
    const Tensor& sv = value(scores);
    require(segment_of_row.size() == sv.rows, "neighbor_softmax: one segment id per row");

    // rows grouped by segment id, ascending row order within each group
    std::map<int, std::vector<std::size_t>> groups;
    for (std::size_t r = 0; r < sv.rows; ++r) groups[segment_of_row[r]].push_back(r);

    const std::size_t d = sv.cols;
    Tensor out(sv.rows, d);
    for (const auto& [seg, rows] : groups) {
        (void)seg;
        for (std::size_t c = 0; c < d; ++c) {
            double max_score = -std::numeric_limits<double>::infinity();
            for (std::size_t r : rows) max_score = std::max(max_score, sv.at(r, c));
            double denom = 0.0;
            for (std::size_t r : rows) denom += std::exp(sv.at(r, c) - max_score);
            for (std::size_t r : rows) out.at(r, c) = std::exp(sv.at(r, c) - max_score) / denom;
        }
    }
    ValueId y = push(std::move(out), nullptr);
    std::vector<std::vector<std::size_t>> group_list;
    group_list.reserve(groups.size());
    for (auto& [seg, rows] : groups) group_list.push_back(std::move(rows));
    nodes_[y].backward = [scores, y, group_list](Tape& tape) {
        const Tensor& yv = tape.value(y);
        const Tensor& dy = tape.grad(y);
        Tensor& ds = tape.grad_ref(scores);
        const std::size_t d = yv.cols;
        for (const auto& rows : group_list) {
            for (std::size_t c = 0; c < d; ++c) {
                double dot = 0.0;
                for (std::size_t r : rows) dot += dy.at(r, c) * yv.at(r, c);
                for (std::size_t r : rows) ds.at(r, c) += yv.at(r, c) * (dy.at(r, c) - dot);
            }
        }
    };
    return y;
}

ValueId Tape::gather_rows(ValueId x, const std::vector<int>& rows) {
    const Tensor& xv = value(x);
    Tensor out(rows.size(), xv.cols);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        require(rows[r] >= 0 && static_cast<std::size_t>(rows[r]) < xv.rows, "gather_rows: index out of range");
        for (std::size_t c = 0; c < xv.cols; ++c) out.at(r, c) = xv.at(static_cast<std::size_t>(rows[r]), c);
    }
    ValueId y = push(std::move(out), nullptr);
    nodes_[y].backward = [x, y, rows](Tape& tape) {
        const Tensor& dy = tape.grad(y);
        Tensor& dx = tape.grad_ref(x);
        for (std::size_t r = 0; r < rows.size(); ++r)
            for (std::size_t c = 0; c < dy.cols; ++c) dx.at(static_cast<std::size_t>(rows[r]), c) += dy.at(r, c);
    };
    return y;
}

ValueId Tape::segment_sum(ValueId x, const std::vector<int>& segment_of_row, std::size_t segments) {
    const Tensor& xv = value(x);
    require(segment_of_row.size() == xv.rows, "segment_sum: one segment id per row");
    Tensor out(segments, xv.cols);
    for (std::size_t r = 0; r < xv.rows; ++r) {
        const int seg = segment_of_row[r];
        require(seg >= 0 && static_cast<std::size_t>(seg) < segments, "segment_sum: segment out of range");
        for (std::size_t c = 0; c < xv.cols; ++c) out.at(static_cast<std::size_t>(seg), c) += xv.at(r, c);
    }
    ValueId y = push(std::move(out), nullptr);
    nodes_[y].backward = [x, y, segment_of_row](Tape& tape) {
        const Tensor& dy = tape.grad(y);
        Tensor& dx = tape.grad_ref(x);
        for (std::size_t r = 0; r < dx.rows; ++r)
            for (std::size_t c = 0; c < dx.cols; ++c)
                dx.at(r, c) += dy.at(static_cast<std::size_t>(segment_of_row[r]), c);
    };
    return y;
}

ValueId Tape::sum_all(ValueId x) {
    const Tensor& xv = value(x);
    double total = 0.0;
    for (double v : xv.data) total += v;
    ValueId y = push(Tensor::scalar(total), nullptr);
    nodes_[y].backward = [x, y](Tape& tape) {
        const double g = tape.grad(y).data[0];
        Tensor& dx = tape.grad_ref(x);
        for (double& v : dx.data) v += g;
    };
    return y;
}

ValueId Tape::rowwise_dot(ValueId a, ValueId b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    require(av.same_shape(bv), "rowwise_dot: shape mismatch");
    Tensor out(av.rows, 1);
    for (std::size_t r = 0; r < av.rows; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < av.cols; ++c) acc += av.at(r, c) * bv.at(r, c);
        out.at(r, 0) = acc;
    }
    ValueId y = push(std::move(out), nullptr);
    nodes_[y].backward = [a, b, y](Tape& tape) {
        const Tensor& av = tape.value(a);
        const Tensor& bv = tape.value(b);
        const Tensor& dy = tape.grad(y);
        Tensor& da = tape.grad_ref(a);
        Tensor& db = tape.grad_ref(b);
        for (std::size_t r = 0; r < av.rows; ++r) {
            const double g = dy.at(r, 0);
            for (std::size_t c = 0; c < av.cols; ++c) {
                da.at(r, c) += g * bv.at(r, c);
                db.at(r, c) += g * av.at(r, c);
            }
        }
    };
    return y;
}

ValueId Tape::mean_cols(ValueId x) {
    const Tensor& xv = value(x);
    Tensor out(xv.rows, 1);
    for (std::size_t r = 0; r < xv.rows; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < xv.cols; ++c) acc += xv.at(r, c);
        out.at(r, 0) = acc / static_cast<double>(xv.cols);
    }
    ValueId y = push(std::move(out), nullptr);
    nodes_[y].backward = [x, y](Tape& tape) {
        const Tensor& dy = tape.grad(y);
        Tensor& dx = tape.grad_ref(x);
        const double inv = 1.0 / static_cast<double>(dx.cols);
        for (std::size_t r = 0; r < dx.rows; ++r)
            for (std::size_t c = 0; c < dx.cols; ++c) dx.at(r, c) += dy.at(r, 0) * inv;
    };
    return y;
}

ValueId Tape::broadcast_col(ValueId x, std::size_t cols) {
    const Tensor& xv = value(x);
    require(xv.cols == 1, "broadcast_col: input must be m×1");
    Tensor out(xv.rows, cols);
    for (std::size_t r = 0; r < xv.rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out.at(r, c) = xv.at(r, 0);
    ValueId y = push(std::move(out), nullptr);
    nodes_[y].backward = [x, y](Tape& tape) {
        const Tensor& dy = tape.grad(y);
        Tensor& dx = tape.grad_ref(x);
        for (std::size_t r = 0; r < dy.rows; ++r) {
            double acc = 0.0;
            for (std::size_t c = 0; c < dy.cols; ++c) acc += dy.at(r, c);
            dx.at(r, 0) += acc;
        }
    };
    return y;
}

ValueId Tape::cross_entropy(ValueId logits, const std::vector<int>& labels, const std::vector<std::uint8_t>& mask,
                            const std::vector<double>& class_weights) {
    const Tensor& lv = value(logits);
    require(labels.size() == lv.rows, "cross_entropy: one label per row");
    require(mask.empty() || mask.size() == lv.rows, "cross_entropy: mask size mismatch");

    const std::size_t n = lv.rows, classes = lv.cols;
    std::vector<double> probs(n * classes, 0.0);
    std::vector<double> row_weight(n, 0.0);
    double total_weight = 0.0;
    double loss = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        if (!mask.empty() && !mask[r]) continue;
        const int label = labels[r];
        require(label >= 0 && static_cast<std::size_t>(label) < classes, "cross_entropy: label out of range");
        const double w = class_weights.empty() ? 1.0 : class_weights[static_cast<std::size_t>(label)];
        row_weight[r] = w;
        total_weight += w;
    }
    if (total_weight <= 0.0) throw Error(errc::empty_mask, "cross_entropy: no masked rows");
    for (std::size_t r = 0; r < n; ++r) {
        double max_logit = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < classes; ++c) max_logit = std::max(max_logit, lv.at(r, c));
        double denom = 0.0;
        for (std::size_t c = 0; c < classes; ++c) denom += std::exp(lv.at(r, c) - max_logit);
        for (std::size_t c = 0; c < classes; ++c) probs[r * classes + c] = std::exp(lv.at(r, c) - max_logit) / denom;
        if (row_weight[r] > 0.0) {
            const double log_p = (lv.at(r, static_cast<std::size_t>(labels[r])) - max_logit) - std::log(denom);
            loss -= row_weight[r] * log_p;
        }
    }
    loss /= total_weight;

    ValueId y = push(Tensor::scalar(loss), nullptr);
    nodes_[y].backward = [logits, y, labels, probs, row_weight, total_weight](Tape& tape) {
        const double g = tape.grad(y).data[0];
        Tensor& dl = tape.grad_ref(logits);
        const std::size_t classes = dl.cols;
        for (std::size_t r = 0; r < dl.rows; ++r) {
            if (row_weight[r] == 0.0) continue;
            const double scale = g * row_weight[r] / total_weight;
            for (std::size_t c = 0; c < classes; ++c) {
                const double indicator = (static_cast<std::size_t>(labels[r]) == c) ? 1.0 : 0.0;
                dl.at(r, c) += scale * (probs[r * classes + c] - indicator);
            }
        }
    };
    return y;
}

void Tape::backward(ValueId root) {
    require(value(root).size() == 1, "backward: root must be scalar");
    for (auto& node : nodes_) {
        node.grad = Tensor(node.value.rows, node.value.cols, 0.0);
    }
    nodes_[root].grad.data[0] = 1.0;
    for (std::size_t i = root + 1; i-- > 0;) {
        if (nodes_[i].backward) nodes_[i].backward(*this);
    }
}

double grad_check(const ScalarBuilder& f, const std::vector<Tensor>& inputs, double epsilon) {
    Tape tape;
    std::vector<ValueId> ids;
    ids.reserve(inputs.size());
    for (const Tensor& t : inputs) ids.push_back(tape.input(t));
    const ValueId root = f(tape, ids);
    if (tape.value(root).size() != 1) throw Error(errc::shape_mismatch, "grad_check: builder must return a scalar");
    tape.backward(root);

    auto evaluate = [&](const std::vector<Tensor>& perturbed) {
        Tape fresh;
        std::vector<ValueId> fresh_ids;
        fresh_ids.reserve(perturbed.size());
        for (const Tensor& t : perturbed) fresh_ids.push_back(fresh.input(t));
        return fresh.value(f(fresh, fresh_ids)).data[0];
    };

    double worst = 0.0;
    std::vector<Tensor> work = inputs;
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        for (std::size_t k = 0; k < inputs[t].size(); ++k) {
            const double original = work[t].data[k];
            work[t].data[k] = original + epsilon;
            const double f_plus = evaluate(work);
            work[t].data[k] = original - epsilon;
            const double f_minus = evaluate(work);
            work[t].data[k] = original;
            const double numeric = (f_plus - f_minus) / (2.0 * epsilon);
            const double analytic = tape.grad(ids[t]).data[k];
            const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
            worst = std::max(worst, std::abs(analytic - numeric) / denom);
        }
    }
    return worst;
}

}  // namespace clgt::diff
