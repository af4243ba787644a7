#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "clgt/model.hpp"
#include "clgt/rng.hpp"
#include "clgt/tensor.hpp"

namespace clgt::explainer {

// Upper-tail p-value of the chi-square distribution (regularized incomplete
// gamma). dof = 0 returns 1.
double chi_square_pvalue(double statistic, std::size_t dof);

struct PerturbResult {
    diff::Tensor features;
    std::vector<std::uint8_t> perturbed;  // per-vertex selection flags
};

std::vector<double> column_means(const diff::Tensor& features);

// Each vertex is independently selected with probability p; selected rows
// are replaced by the mean feature row. Graph topology is untouched.
PerturbResult perturb(const diff::Tensor& features, const std::vector<double>& mean_row, double p, Rng& rng);

// maps graph inputs to one predicted class per vertex
using Predictor = std::function<std::vector<int>(const model::GraphInputs&)>;

Predictor make_predictor(const model::ClgtModel& m, model::ForwardOptions options = {});

struct SampleTable {
    std::size_t s = 0;  // samples
    std::size_t n = 0;  // per-vertex variables
    std::vector<std::uint8_t> changed;    // s×n, prediction flipped under perturbation
    std::vector<std::uint8_t> perturbed;  // s×n, intervention marker

    int state(std::size_t sample, std::size_t var, bool joint = false) const {
        const int c = changed[sample * n + var];
        return joint ? c + 2 * perturbed[sample * n + var] : c;
    }
    static int arity(bool joint) { return joint ? 4 : 2; }
};

SampleTable generate_samples(const Predictor& predictor, const model::GraphInputs& inputs, double p, std::size_t s,
                             std::uint64_t seed);

struct TestOptions {
    bool g_statistic = false;   // likelihood-ratio G instead of Pearson chi-square
    bool joint_encoding = false;
};

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t dof = 0;
    bool low_expected_counts = false;  // some expected cell < 5; test still computed
};

// Independence test between two table variables, stratified by the joint
// states of the conditioning set; statistics and dof accumulate over strata.
TestResult dependency_test(const SampleTable& table, int var_a, int var_b, const std::vector<int>& conditioning = {},
                           const TestOptions& options = {});

struct BlanketOptions {
    double alpha = 0.05;
    // Stalled grow steps run a pair-conditioned scan (needed for parity-style
    // dependences invisible to marginal tests) at this much stricter level,
    // keeping the false-positive budget of the scan below one alpha.
    double pair_scan_scale = 1e-3;
    TestOptions test;
};

std::vector<int> markov_blanket(const SampleTable& table, int target, double alpha);
std::vector<int> markov_blanket(const SampleTable& table, int target, const BlanketOptions& options);

struct BayesianNetwork {
    std::vector<int> variables;             // table variable ids, ascending
    std::vector<std::vector<int>> parents;  // parallel to variables, ids are table variable ids

    bool has_edge(int parent, int child) const;
    std::vector<int> neighborhood(int var) const;  // parents and children of var
    bool is_acyclic() const;
};

// Σ_v [max-likelihood log-likelihood of v given parents] − (ln s / 2) · free
// CPT parameters; decomposable per family.
double bic_score(const BayesianNetwork& network, const SampleTable& table, bool joint_encoding = false);
double bic_family_score(int child, const std::vector<int>& parents, const SampleTable& table,
                        bool joint_encoding = false);

struct HillClimbResult {
    BayesianNetwork network;
    std::vector<double> score_trace;  // score after each accepted move, strictly increasing
};

HillClimbResult hill_climb(const SampleTable& table, const std::vector<int>& variables, int max_parents,
                           bool joint_encoding = false);

struct TargetExplanation {
    int target = 0;
    std::vector<int> blanket;
    BayesianNetwork network;  // learned over {target} ∪ blanket
};

struct ExplanationGraph {
    std::size_t n = 0;
    struct Edge {
        int src = 0;
        int dst = 0;
        double weight = 0.0;  // normalized mutual information, clipped to (0,1]
    };
    std::vector<Edge> edges;
    std::vector<TargetExplanation> targets;
};

double normalized_mutual_information(const SampleTable& table, int var_a, int var_b, bool joint_encoding = false);

ExplanationGraph build_influence_graph(const std::vector<TargetExplanation>& explanations, const SampleTable& table,
                                       std::size_t n, bool joint_encoding = false);

struct ExplainOptions {
    std::size_t samples = 800;
    double perturb_p = 0.5;
    double alpha = 0.05;
    int max_parents = 3;
    std::uint64_t seed = 0;
    std::vector<int> targets;  // empty means every vertex
    TestOptions test;
};

ExplanationGraph explain(const Predictor& predictor, const model::GraphInputs& inputs, const ExplainOptions& options);

}  // namespace clgt::explainer
