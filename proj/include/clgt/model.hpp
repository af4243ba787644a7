#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "clgt/graphgen.hpp"
#include "clgt/rng.hpp"
#include "clgt/tape.hpp"
#include "clgt/tensor.hpp"

namespace clgt::model {

// Attention score reading: elementwise keeps per-dimension d_k scores, the
// scalar variant reduces to one score per edge per head (scaled dot product
// times the means of the projected edge features).
enum class AttentionKind { elementwise, scalar };

// Weighted-edge pipeline control. `forced_ones` multiplies scores by an
// all-ones factor in place of the projected edge weights; `disabled` is the
// antecedent edge-feature-only network with no weight stream at all.
enum class WeightMode { active, forced_ones, disabled };

struct ClgtConfig {
    std::size_t hidden_dim = 88;
    std::size_t heads = 8;
    std::size_t layers = 10;
    std::size_t classes = 3;
    std::size_t node_in_dim = 19;  // 8 activity features + 11 team one-hot
    std::size_t edge_in_dim = 6;   // kind one-hot(3) ++ level one-hot(3)
    std::size_t weight_in_dim = 1;
    double dropout = 0.0;
    AttentionKind attention = AttentionKind::elementwise;
    bool laplacian_pe = false;
    std::size_t laplacian_pe_dim = 8;

    std::size_t head_dim() const { return hidden_dim / heads; }
    void validate() const;
};

struct LayerParams {
    std::vector<diff::Tensor> q, k, v, e, ew;  // per head, d_k×d each
    diff::Tensor o_v_w, o_v_b;                 // d×d, 1×d
    diff::Tensor o_e_w, o_e_b;
    diff::Tensor o_w_w, o_w_b;
    diff::Tensor ln_v_g, ln_v_b;
    diff::Tensor ln_e_g, ln_e_b;
    diff::Tensor ln_w_g, ln_w_b;
};

struct ClgtModel {
    ClgtConfig config;
    std::uint64_t seed = 0;

    diff::Tensor p_v_w, p_v_b;
    diff::Tensor p_e_w, p_e_b;
    diff::Tensor p_w_w, p_w_b;
    diff::Tensor pe_w, pe_b;  // only allocated when laplacian_pe is on
    std::vector<LayerParams> layer_params;
    diff::Tensor cls_w, cls_b;

    std::vector<std::pair<std::string, diff::Tensor*>> named_params();
    std::vector<std::pair<std::string, const diff::Tensor*>> named_params() const;
    std::size_t param_count() const;
};

// Glorot-uniform weights, zero biases, unit norm gains; deterministic per seed.
ClgtModel init_model(const ClgtConfig& config, std::uint64_t seed);

struct GraphInputs {
    std::size_t n = 0;
    std::vector<int> edge_src;
    std::vector<int> edge_dst;
    diff::Tensor node_features;  // n×node_in
    diff::Tensor edge_features;  // m×edge_in
    diff::Tensor edge_weights;   // m×weight_in
    diff::Tensor positional;     // n×pe_dim, filled only when requested

    std::size_t edge_count() const { return edge_src.size(); }
};

GraphInputs make_inputs(const graphgen::WeeklyInteractionGraph& graph, const graphgen::NodeFeatureTable& features,
                        bool with_laplacian_pe = false, std::size_t pe_dim = 8);

// Symmetric-normalized-Laplacian eigenvectors 1..dim (skipping the trivial
// one), sign-fixed; rows of zeros pad graphs smaller than dim+1 vertices.
diff::Tensor laplacian_positional_encoding(const graphgen::WeeklyInteractionGraph& graph, std::size_t dim);

struct ForwardOptions {
    WeightMode weight_mode = WeightMode::active;
    bool training = false;
    Rng* dropout_rng = nullptr;  // required when training with dropout > 0
};

struct LayerParamIds {
    std::vector<diff::ValueId> q, k, v, e, ew;
    diff::ValueId o_v_w, o_v_b, o_e_w, o_e_b, o_w_w, o_w_b;
    diff::ValueId ln_v_g, ln_v_b, ln_e_g, ln_e_b, ln_w_g, ln_w_b;
};

struct ParamIds {
    diff::ValueId p_v_w, p_v_b, p_e_w, p_e_b, p_w_w, p_w_b;
    diff::ValueId pe_w, pe_b;
    std::vector<LayerParamIds> layers;
    diff::ValueId cls_w, cls_b;
    std::vector<diff::ValueId> flat;  // same order as ClgtModel::named_params()
};

ParamIds register_params(diff::Tape& tape, const ClgtModel& model);

// arranges ids produced in named_params() order into the structured view
ParamIds param_ids_from_flat(const ClgtConfig& config, const std::vector<diff::ValueId>& flat);

struct StreamIds {
    diff::ValueId v = 0;
    diff::ValueId e = 0;
    diff::ValueId w = 0;
    bool has_w = false;
};

StreamIds embed_inputs(diff::Tape& tape, const ClgtConfig& config, const ParamIds& params, const GraphInputs& inputs,
                       const ForwardOptions& options = {});

diff::ValueId attention_scores(diff::Tape& tape, const ClgtConfig& config, const LayerParamIds& layer,
                               std::size_t head, const StreamIds& states, const GraphInputs& inputs,
                               const ForwardOptions& options = {});

diff::ValueId aggregate(diff::Tape& tape, const LayerParamIds& layer, std::size_t head, diff::ValueId scores,
                        diff::ValueId v_state, const GraphInputs& inputs);

StreamIds layer_forward(diff::Tape& tape, const ClgtConfig& config, const LayerParamIds& layer,
                        const StreamIds& states, const GraphInputs& inputs, const ForwardOptions& options = {},
                        std::vector<diff::ValueId>* attention_out = nullptr);

struct TapeForward {
    diff::ValueId logits = 0;
    std::vector<StreamIds> layer_states;           // states entering layer 0..L (L+1 entries)
    std::vector<diff::ValueId> attention_weights;  // softmaxed weights, layer-major then head
};

TapeForward forward_with_params(diff::Tape& tape, const ClgtConfig& config, const ParamIds& params,
                                const GraphInputs& inputs, const ForwardOptions& options = {});

TapeForward forward_on_tape(diff::Tape& tape, const ClgtModel& model, const GraphInputs& inputs,
                            const ForwardOptions& options = {}, ParamIds* param_ids_out = nullptr);

// inference-only convenience: returns n×classes logits
diff::Tensor forward(const ClgtModel& model, const GraphInputs& inputs, const ForwardOptions& options = {});

std::vector<int> predict_classes(const ClgtModel& model, const GraphInputs& inputs,
                                 const ForwardOptions& options = {});

}  // namespace clgt::model
