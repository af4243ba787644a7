#include "clgt/model.hpp"

#include <algorithm>
#include <cmath>

#include "clgt/errors.hpp"

namespace clgt::model {

using diff::Tape;
using diff::Tensor;
using diff::ValueId;

void ClgtConfig::validate() const {
    if (hidden_dim == 0 || heads == 0 || layers == 0 || classes < 2)
        throw Error(errc::bad_config, "hidden_dim, heads, layers must be positive and classes >= 2");
    if (hidden_dim % heads != 0)
        throw Error(errc::bad_config, "hidden_dim " + std::to_string(hidden_dim) + " not divisible by heads " +
                        std::to_string(heads));
    if (node_in_dim == 0 || edge_in_dim == 0 || weight_in_dim == 0)
        throw Error(errc::bad_config, "input dims must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(errc::bad_config, "dropout must lie in [0,1)");
}

namespace {

Tensor glorot(std::size_t rows, std::size_t cols, Rng& rng) {
    // fan_out = rows, fan_in = cols for W acting as y = W x
    const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Tensor t(rows, cols);
    for (double& v : t.data) v = rng.uniform(-a, a);
    return t;
}

}  // namespace

ClgtModel init_model(const ClgtConfig& config, std::uint64_t seed) {
    config.validate();
    const std::size_t d = config.hidden_dim;
    const std::size_t dk = config.head_dim();

    ClgtModel m;
    m.config = config;
    m.seed = seed;
    Rng rng(seed);

    m.p_v_w = glorot(d, config.node_in_dim, rng);
    m.p_v_b = Tensor(1, d);
    m.p_e_w = glorot(d, config.edge_in_dim, rng);
    m.p_e_b = Tensor(1, d);
    m.p_w_w = glorot(d, config.weight_in_dim, rng);
    m.p_w_b = Tensor(1, d);
    if (config.laplacian_pe) {
        m.pe_w = glorot(d, config.laplacian_pe_dim, rng);
        m.pe_b = Tensor(1, d);
    }

    m.layer_params.resize(config.layers);
    for (auto& layer : m.layer_params) {
        for (std::size_t h = 0; h < config.heads; ++h) {
            layer.q.push_back(glorot(dk, d, rng));
            layer.k.push_back(glorot(dk, d, rng));
            layer.v.push_back(glorot(dk, d, rng));
            layer.e.push_back(glorot(dk, d, rng));
            layer.ew.push_back(glorot(dk, d, rng));
        }
        layer.o_v_w = glorot(d, d, rng);
        layer.o_v_b = Tensor(1, d);
        layer.o_e_w = glorot(d, d, rng);
        layer.o_e_b = Tensor(1, d);
        layer.o_w_w = glorot(d, d, rng);
        layer.o_w_b = Tensor(1, d);
        layer.ln_v_g = Tensor(1, d, 1.0);
        layer.ln_v_b = Tensor(1, d);
        layer.ln_e_g = Tensor(1, d, 1.0);
        layer.ln_e_b = Tensor(1, d);
        layer.ln_w_g = Tensor(1, d, 1.0);
        layer.ln_w_b = Tensor(1, d);
    }
    m.cls_w = glorot(config.classes, d, rng);
    m.cls_b = Tensor(1, config.classes);
    return m;
}

std::vector<std::pair<std::string, Tensor*>> ClgtModel::named_params() {
    std::vector<std::pair<std::string, Tensor*>> out;
    out.emplace_back("p_v_w", &p_v_w);
    out.emplace_back("p_v_b", &p_v_b);
    out.emplace_back("p_e_w", &p_e_w);
    out.emplace_back("p_e_b", &p_e_b);
    out.emplace_back("p_w_w", &p_w_w);
    out.emplace_back("p_w_b", &p_w_b);
    if (config.laplacian_pe) {
        out.emplace_back("pe_w", &pe_w);
        out.emplace_back("pe_b", &pe_b);
    }
    for (std::size_t l = 0; l < layer_params.size(); ++l) {
        auto& layer = layer_params[l];
        const std::string prefix = "layer" + std::to_string(l) + ".";
        for (std::size_t h = 0; h < layer.q.size(); ++h) {
            const std::string hp = prefix + "h" + std::to_string(h) + ".";
            out.emplace_back(hp + "q", &layer.q[h]);
            out.emplace_back(hp + "k", &layer.k[h]);
            out.emplace_back(hp + "v", &layer.v[h]);
            out.emplace_back(hp + "e", &layer.e[h]);
            out.emplace_back(hp + "ew", &layer.ew[h]);
        }
        out.emplace_back(prefix + "o_v_w", &layer.o_v_w);
        out.emplace_back(prefix + "o_v_b", &layer.o_v_b);
        out.emplace_back(prefix + "o_e_w", &layer.o_e_w);
        out.emplace_back(prefix + "o_e_b", &layer.o_e_b);
        out.emplace_back(prefix + "o_w_w", &layer.o_w_w);
        out.emplace_back(prefix + "o_w_b", &layer.o_w_b);
        out.emplace_back(prefix + "ln_v_g", &layer.ln_v_g);
        out.emplace_back(prefix + "ln_v_b", &layer.ln_v_b);
        out.emplace_back(prefix + "ln_e_g", &layer.ln_e_g);
        out.emplace_back(prefix + "ln_e_b", &layer.ln_e_b);
        out.emplace_back(prefix + "ln_w_g", &layer.ln_w_g);
        out.emplace_back(prefix + "ln_w_b", &layer.ln_w_b);
    }
    out.emplace_back("cls_w", &cls_w);
    out.emplace_back("cls_b", &cls_b);
    return out;
}

std::vector<std::pair<std::string, const Tensor*>> ClgtModel::named_params() const {
    auto mutable_view = const_cast<ClgtModel*>(this)->named_params();
    std::vector<std::pair<std::string, const Tensor*>> out;
    out.reserve(mutable_view.size());
    for (auto& [name, ptr] : mutable_view) out.emplace_back(name, ptr);
    return out;
}

std::size_t ClgtModel::param_count() const {
    std::size_t total = 0;
    for (const auto& [name, tensor] : named_params()) {
        (void)name;
        total += tensor->size();
    }
    return total;
}

GraphInputs make_inputs(const graphgen::WeeklyInteractionGraph& graph, const graphgen::NodeFeatureTable& features,
                        bool with_laplacian_pe, std::size_t pe_dim) {
    if (features.rows != graph.vertex_count())
        throw Error(errc::shape_mismatch, "feature table rows do not match graph vertices");
    GraphInputs inputs;
    inputs.n = graph.vertex_count();
    const std::size_t m = graph.edges.size();
    inputs.node_features = Tensor(features.rows, features.cols, features.features);
    inputs.edge_features = Tensor(m, 6);
    inputs.edge_weights = Tensor(m, 1);
    inputs.edge_src.reserve(m);
    inputs.edge_dst.reserve(m);
    for (std::size_t idx = 0; idx < m; ++idx) {
        const auto& edge = graph.edges[idx];
        inputs.edge_src.push_back(edge.src);
        inputs.edge_dst.push_back(edge.dst);
        inputs.edge_features.at(idx, static_cast<std::size_t>(edge.kind)) = 1.0;
        inputs.edge_features.at(idx, 3 + static_cast<std::size_t>(edge.level) - 1) = 1.0;
        inputs.edge_weights.at(idx, 0) = edge.influence;
    }
    if (with_laplacian_pe) inputs.positional = laplacian_positional_encoding(graph, pe_dim);
    return inputs;
}

namespace {

// Jacobi eigenvalue iteration for a symmetric matrix; returns ascending
// eigenvalues with matching eigenvector columns.
void jacobi_eigen(std::vector<double>& a, std::size_t n, std::vector<double>& eigenvalues,
                  std::vector<double>& eigenvectors) {
    eigenvectors.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) eigenvectors[i * n + i] = 1.0;

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
        if (off < 1e-22) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (std::abs(apq) < 1e-18) continue;
                const double app = a[p * n + p];
                const double aqq = a[q * n + q];
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t i = 0; i < n; ++i) {
                    const double aip = a[i * n + p];
                    const double aiq = a[i * n + q];
                    a[i * n + p] = c * aip - s * aiq;
                    a[i * n + q] = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double api = a[p * n + i];
                    const double aqi = a[q * n + i];
                    a[p * n + i] = c * api - s * aqi;
                    a[q * n + i] = s * api + c * aqi;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = eigenvectors[i * n + p];
                    const double viq = eigenvectors[i * n + q];
                    eigenvectors[i * n + p] = c * vip - s * viq;
                    eigenvectors[i * n + q] = s * vip + c * viq;
                }
            }
        }
    }
    eigenvalues.resize(n);
    for (std::size_t i = 0; i < n; ++i) eigenvalues[i] = a[i * n + i];
}

}  // namespace

Tensor laplacian_positional_encoding(const graphgen::WeeklyInteractionGraph& graph, std::size_t dim) {
    const std::size_t n = graph.vertex_count();
    std::vector<double> adjacency(n * n, 0.0);
    for (const auto& edge : graph.edges) {
        const auto s = static_cast<std::size_t>(edge.src);
        const auto t = static_cast<std::size_t>(edge.dst);
        adjacency[s * n + t] += edge.influence;
        adjacency[t * n + s] += edge.influence;
    }
    std::vector<double> degree(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) degree[i] += adjacency[i * n + j];

    std::vector<double> laplacian(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        laplacian[i * n + i] = 1.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (degree[i] > 0.0 && degree[j] > 0.0)
                laplacian[i * n + j] -= adjacency[i * n + j] / std::sqrt(degree[i] * degree[j]);
        }
    }

    std::vector<double> eigenvalues, eigenvectors;
    jacobi_eigen(laplacian, n, eigenvalues, eigenvectors);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return eigenvalues[a] < eigenvalues[b]; });

    Tensor pe(n, dim);
    for (std::size_t k = 0; k < dim && k + 1 < n; ++k) {
        const std::size_t col = order[k + 1];  // skip the trivial eigenvector
        // sign convention: largest-magnitude component positive
        std::size_t arg = 0;
        for (std::size_t i = 1; i < n; ++i)
            if (std::abs(eigenvectors[i * n + col]) > std::abs(eigenvectors[arg * n + col])) arg = i;
        const double sign = eigenvectors[arg * n + col] >= 0.0 ? 1.0 : -1.0;
        for (std::size_t i = 0; i < n; ++i) pe.at(i, k) = sign * eigenvectors[i * n + col];
    }
    return pe;
}

ParamIds param_ids_from_flat(const ClgtConfig& config, const std::vector<ValueId>& flat) {
    ParamIds ids;
    ids.flat = flat;
    std::size_t cursor = 0;
    auto next = [&] { return flat.at(cursor++); };
    ids.p_v_w = next();
    ids.p_v_b = next();
    ids.p_e_w = next();
    ids.p_e_b = next();
    ids.p_w_w = next();
    ids.p_w_b = next();
    if (config.laplacian_pe) {
        ids.pe_w = next();
        ids.pe_b = next();
    }
    ids.layers.resize(config.layers);
    for (auto& layer : ids.layers) {
        for (std::size_t h = 0; h < config.heads; ++h) {
            layer.q.push_back(next());
            layer.k.push_back(next());
            layer.v.push_back(next());
            layer.e.push_back(next());
            layer.ew.push_back(next());
        }
        layer.o_v_w = next();
        layer.o_v_b = next();
        layer.o_e_w = next();
        layer.o_e_b = next();
        layer.o_w_w = next();
        layer.o_w_b = next();
        layer.ln_v_g = next();
        layer.ln_v_b = next();
        layer.ln_e_g = next();
        layer.ln_e_b = next();
        layer.ln_w_g = next();
        layer.ln_w_b = next();
    }
    ids.cls_w = next();
    ids.cls_b = next();
    return ids;
}

ParamIds register_params(Tape& tape, const ClgtModel& model) {
    std::vector<ValueId> flat;
    for (const auto& [name, tensor] : model.named_params()) {
        (void)name;
        flat.push_back(tape.input(*tensor));
    }
    return param_ids_from_flat(model.config, flat);
}

StreamIds embed_inputs(Tape& tape, const ClgtConfig& config, const ParamIds& params, const GraphInputs& inputs,
                       const ForwardOptions& options) {
    if (inputs.node_features.cols != config.node_in_dim)
        throw Error(errc::shape_mismatch, "node feature dim " + std::to_string(inputs.node_features.cols) +
                        " != config node_in_dim " + std::to_string(config.node_in_dim));
    if (inputs.edge_features.cols != config.edge_in_dim)
        throw Error(errc::shape_mismatch, "edge feature dim mismatch");
    if (inputs.edge_weights.cols != config.weight_in_dim)
        throw Error(errc::shape_mismatch, "edge weight dim mismatch");

    StreamIds s;
    const ValueId x_v = tape.input(inputs.node_features);
    const ValueId x_e = tape.input(inputs.edge_features);
    s.v = tape.linear(x_v, params.p_v_w, params.p_v_b);
    if (config.laplacian_pe) {
        const ValueId x_pe = tape.input(inputs.positional);
        s.v = tape.add(s.v, tape.linear(x_pe, params.pe_w, params.pe_b));
    }
    s.e = tape.linear(x_e, params.p_e_w, params.p_e_b);
    if (options.weight_mode != WeightMode::disabled) {
        const ValueId x_w = tape.input(inputs.edge_weights);
        s.w = tape.linear(x_w, params.p_w_w, params.p_w_b);
        s.has_w = true;
    }
    return s;
}

ValueId attention_scores(Tape& tape, const ClgtConfig& config, const LayerParamIds& layer, std::size_t head,
                         const StreamIds& states, const GraphInputs& inputs, const ForwardOptions& options) {
    const std::size_t dk = config.head_dim();
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
    const std::size_t m = inputs.edge_count();

    const ValueId qv = tape.linear(states.v, layer.q[head]);
    const ValueId kv = tape.linear(states.v, layer.k[head]);
    // i is the destination of a directed influence edge, j the source
    const ValueId q_dst = tape.gather_rows(qv, inputs.edge_dst);
    const ValueId k_src = tape.gather_rows(kv, inputs.edge_src);
    const ValueId ee = tape.linear(states.e, layer.e[head]);

    if (config.attention == AttentionKind::scalar) {
        ValueId score = tape.scale(tape.rowwise_dot(q_dst, k_src), inv_sqrt_dk);
        score = tape.mul(score, tape.mean_cols(ee));
        if (options.weight_mode == WeightMode::active) {
            score = tape.mul(score, tape.mean_cols(tape.linear(states.w, layer.ew[head])));
        } else if (options.weight_mode == WeightMode::forced_ones) {
            score = tape.mul(score, tape.input(Tensor(m, 1, 1.0)));
        }
        return tape.broadcast_col(score, dk);
    }

    ValueId h = tape.scale(tape.mul(q_dst, k_src), inv_sqrt_dk);
    h = tape.mul(h, ee);
    if (options.weight_mode == WeightMode::active) {
        h = tape.mul(h, tape.linear(states.w, layer.ew[head]));
    } else if (options.weight_mode == WeightMode::forced_ones) {
        h = tape.mul(h, tape.input(Tensor(m, dk, 1.0)));
    }
    return h;
}

ValueId aggregate(Tape& tape, const LayerParamIds& layer, std::size_t head, ValueId scores, ValueId v_state,
                  const GraphInputs& inputs) {
    const ValueId attention = tape.neighbor_softmax(scores, inputs.edge_dst);
    const ValueId vv = tape.linear(v_state, layer.v[head]);
    const ValueId v_src = tape.gather_rows(vv, inputs.edge_src);
    const ValueId weighted = tape.mul(attention, v_src);
    return tape.segment_sum(weighted, inputs.edge_dst, inputs.n);
}

namespace {

ValueId apply_dropout(Tape& tape, ValueId x, const ForwardOptions& options, double rate) {
    if (!options.training || rate <= 0.0) return x;
    if (options.dropout_rng == nullptr) throw Error(errc::bad_config, "training with dropout needs an rng");
    const Tensor& v = tape.value(x);
    Tensor mask(v.rows, v.cols);
    const double keep = 1.0 - rate;
    for (double& cell : mask.data) cell = options.dropout_rng->bernoulli(keep) ? 1.0 / keep : 0.0;
    return tape.mul(x, tape.input(std::move(mask)));
}

}  // namespace

StreamIds layer_forward(Tape& tape, const ClgtConfig& config, const LayerParamIds& layer, const StreamIds& states,
                        const GraphInputs& inputs, const ForwardOptions& options,
                        std::vector<ValueId>* attention_out) {
    std::vector<ValueId> head_scores;
    std::vector<ValueId> head_aggregates;
    head_scores.reserve(config.heads);
    head_aggregates.reserve(config.heads);
    for (std::size_t h = 0; h < config.heads; ++h) {
        const ValueId scores = attention_scores(tape, config, layer, h, states, inputs, options);
        head_scores.push_back(scores);
        if (attention_out) attention_out->push_back(tape.neighbor_softmax(scores, inputs.edge_dst));
        head_aggregates.push_back(aggregate(tape, layer, h, scores, states.v, inputs));
    }

    StreamIds next;
    const ValueId v_proj = tape.linear(tape.concat_cols(head_aggregates), layer.o_v_w, layer.o_v_b);
    next.v = tape.layer_norm(tape.add(v_proj, states.v), layer.ln_v_g, layer.ln_v_b);
    next.v = apply_dropout(tape, next.v, options, config.dropout);

    const ValueId h_concat = tape.concat_cols(head_scores);
    const ValueId e_proj = tape.linear(h_concat, layer.o_e_w, layer.o_e_b);
    next.e = tape.layer_norm(tape.add(e_proj, states.e), layer.ln_e_g, layer.ln_e_b);
    next.e = apply_dropout(tape, next.e, options, config.dropout);

    if (states.has_w) {
        const ValueId w_proj = tape.linear(h_concat, layer.o_w_w, layer.o_w_b);
        next.w = tape.layer_norm(tape.add(w_proj, states.w), layer.ln_w_g, layer.ln_w_b);
        next.w = apply_dropout(tape, next.w, options, config.dropout);
        next.has_w = true;
    }
    return next;
}

TapeForward forward_with_params(Tape& tape, const ClgtConfig& config, const ParamIds& params,
                                const GraphInputs& inputs, const ForwardOptions& options) {
    config.validate();
    TapeForward result;
    StreamIds states = embed_inputs(tape, config, params, inputs, options);
    result.layer_states.push_back(states);
    for (std::size_t l = 0; l < config.layers; ++l) {
        states = layer_forward(tape, config, params.layers[l], states, inputs, options, &result.attention_weights);
        result.layer_states.push_back(states);
    }
    result.logits = tape.linear(states.v, params.cls_w, params.cls_b);
    return result;
}

TapeForward forward_on_tape(Tape& tape, const ClgtModel& model, const GraphInputs& inputs,
                            const ForwardOptions& options, ParamIds* param_ids_out) {
    ParamIds ids = register_params(tape, model);
    TapeForward result = forward_with_params(tape, model.config, ids, inputs, options);
    if (param_ids_out) *param_ids_out = std::move(ids);
    return result;
}

Tensor forward(const ClgtModel& model, const GraphInputs& inputs, const ForwardOptions& options) {
    Tape tape;
    const TapeForward run = forward_on_tape(tape, model, inputs, options);
    return tape.value(run.logits);
}

std::vector<int> predict_classes(const ClgtModel& model, const GraphInputs& inputs, const ForwardOptions& options) {
    const Tensor logits = forward(model, inputs, options);
    std::vector<int> classes(logits.rows, 0);
    for (std::size_t r = 0; r < logits.rows; ++r) {
        // deterministic tie rule: lowest class index wins
        std::size_t best = 0;
        for (std::size_t c = 1; c < logits.cols; ++c)
            if (logits.at(r, c) > logits.at(r, best)) best = c;
        classes[r] = static_cast<int>(best);
    }
    return classes;
}

}  // namespace clgt::model
