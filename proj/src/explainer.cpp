#include "clgt/explainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "clgt/errors.hpp"

namespace clgt::explainer {

namespace {

// regularized incomplete gamma, series form for P(a,x)
double gamma_p_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    for (int k = 1; k < 10000; ++k) {
        term *= x / (a + k);
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// continued fraction form for Q(a,x), Lentz's method
double gamma_q_cf(double a, double x) {
    constexpr double kTiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / kTiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 10000; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < kTiny) d = kTiny;
        c = b + an / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double chi_square_pvalue(double statistic, std::size_t dof) {
    if (dof == 0 || statistic <= 0.0) return 1.0;
    const double a = static_cast<double>(dof) / 2.0;
    const double x = statistic / 2.0;
    if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
    return gamma_q_cf(a, x);
}

std::vector<double> column_means(const diff::Tensor& features) {
    std::vector<double> means(features.cols, 0.0);
    if (features.rows == 0) return means;
    for (std::size_t r = 0; r < features.rows; ++r)
        for (std::size_t c = 0; c < features.cols; ++c) means[c] += features.at(r, c);
    for (double& m : means) m /= static_cast<double>(features.rows);
    return means;
}

PerturbResult perturb(const diff::Tensor& features, const std::vector<double>& mean_row, double p, Rng& rng) {
    if (mean_row.size() != features.cols) throw Error(errc::shape_mismatch, "mean row width mismatch");
    PerturbResult result;
    result.features = features;
    result.perturbed.assign(features.rows, 0);
    for (std::size_t r = 0; r < features.rows; ++r) {
        if (rng.bernoulli(p)) {
            result.perturbed[r] = 1;
            for (std::size_t c = 0; c < features.cols; ++c) result.features.at(r, c) = mean_row[c];
        }
    }
    return result;
}

Predictor make_predictor(const model::ClgtModel& m, model::ForwardOptions options) {
    return [&m, options](const model::GraphInputs& inputs) { return model::predict_classes(m, inputs, options); };
}

SampleTable generate_samples(const Predictor& predictor, const model::GraphInputs& inputs, double p, std::size_t s,
                             std::uint64_t seed) {
    if (s == 0) throw Error(errc::empty_input, "sample count must be >= 1");
    if (!(p > 0.0 && p < 1.0)) throw Error(errc::bad_config, "perturbation probability must lie in (0,1)");

    const std::vector<int> baseline = predictor(inputs);
    const std::vector<double> mean_row = column_means(inputs.node_features);

    SampleTable table;
    table.s = s;
    table.n = inputs.n;
    table.changed.assign(s * inputs.n, 0);
    table.perturbed.assign(s * inputs.n, 0);

    Rng rng(seed);
    model::GraphInputs work = inputs;
    for (std::size_t round = 0; round < s; ++round) {
        PerturbResult pr = perturb(inputs.node_features, mean_row, p, rng);
        work.node_features = std::move(pr.features);
        const std::vector<int> classes = predictor(work);
        for (std::size_t v = 0; v < inputs.n; ++v) {
            table.perturbed[round * inputs.n + v] = pr.perturbed[v];
            table.changed[round * inputs.n + v] = classes[v] != baseline[v] ? 1 : 0;
        }
    }
    return table;
}

TestResult dependency_test(const SampleTable& table, int var_a, int var_b, const std::vector<int>& conditioning,
                           const TestOptions& options) {
    const int arity = SampleTable::arity(options.joint_encoding);
    const auto cells = static_cast<std::size_t>(arity * arity);

    // stratum key = mixed-radix encoding of the conditioning variables' states
    std::map<std::size_t, std::vector<double>> strata;
    for (std::size_t s = 0; s < table.s; ++s) {
        std::size_t key = 0;
        for (int c : conditioning)
            key = key * static_cast<std::size_t>(arity) +
                  static_cast<std::size_t>(table.state(s, static_cast<std::size_t>(c), options.joint_encoding));
        auto& counts = strata[key];
        if (counts.empty()) counts.assign(cells, 0.0);
        const int a = table.state(s, static_cast<std::size_t>(var_a), options.joint_encoding);
        const int b = table.state(s, static_cast<std::size_t>(var_b), options.joint_encoding);
        counts[static_cast<std::size_t>(a * arity + b)] += 1.0;
    }

    TestResult result;
    for (const auto& [key, counts] : strata) {
        (void)key;
        std::vector<double> row_sum(static_cast<std::size_t>(arity), 0.0);
        std::vector<double> col_sum(static_cast<std::size_t>(arity), 0.0);
        double total = 0.0;
        for (int i = 0; i < arity; ++i) {
            for (int j = 0; j < arity; ++j) {
                const double o = counts[static_cast<std::size_t>(i * arity + j)];
                row_sum[static_cast<std::size_t>(i)] += o;
                col_sum[static_cast<std::size_t>(j)] += o;
                total += o;
            }
        }
        int live_rows = 0, live_cols = 0;
        for (int i = 0; i < arity; ++i) {
            if (row_sum[static_cast<std::size_t>(i)] > 0.0) ++live_rows;
            if (col_sum[static_cast<std::size_t>(i)] > 0.0) ++live_cols;
        }
        if (live_rows < 2 || live_cols < 2) continue;  // no variability in this stratum

        double statistic = 0.0;
        for (int i = 0; i < arity; ++i) {
            for (int j = 0; j < arity; ++j) {
                if (row_sum[static_cast<std::size_t>(i)] == 0.0 || col_sum[static_cast<std::size_t>(j)] == 0.0)
                    continue;
                const double expected =
                    row_sum[static_cast<std::size_t>(i)] * col_sum[static_cast<std::size_t>(j)] / total;
                if (expected < 5.0) result.low_expected_counts = true;
                const double observed = counts[static_cast<std::size_t>(i * arity + j)];
                if (options.g_statistic) {
                    if (observed > 0.0) statistic += 2.0 * observed * std::log(observed / expected);
                } else {
                    const double diff = observed - expected;
                    statistic += diff * diff / expected;
                }
            }
        }
        result.statistic += statistic;
        result.dof += static_cast<std::size_t>((live_rows - 1) * (live_cols - 1));
    }
    result.p_value = chi_square_pvalue(result.statistic, result.dof);
    return result;
}

std::vector<int> markov_blanket(const SampleTable& table, int target, double alpha) {
    BlanketOptions options;
    options.alpha = alpha;
    return markov_blanket(table, target, options);
}

std::vector<int> markov_blanket(const SampleTable& table, int target, const BlanketOptions& options) {
    std::vector<int> blanket;
    std::vector<std::uint8_t> in_blanket(table.n, 0);

    auto candidates = [&] {
        std::vector<int> out;
        for (std::size_t v = 0; v < table.n; ++v)
            if (static_cast<int>(v) != target && !in_blanket[v]) out.push_back(static_cast<int>(v));
        return out;
    };

    // grow: repeatedly add the strongest dependent candidate given the
    // current blanket; when nothing passes, scan candidate pairs so that
    // joint-only (xor-like) dependences can seed the blanket. The per-round
    // threshold is alpha over the candidate count: the shrink retest cannot
    // remove a variable whose entry test it merely repeats, so entries must
    // be family-wise controlled to keep false members out.
    for (;;) {
        const std::vector<int> current = candidates();
        if (current.empty()) break;
        const double round_alpha = options.alpha / static_cast<double>(current.size());
        int best_var = -1;
        double best_p = round_alpha;
        for (int x : current) {
            const TestResult t = dependency_test(table, target, x, blanket, options.test);
            if (t.p_value < best_p) {
                best_p = t.p_value;
                best_var = x;
            }
        }
        if (best_var >= 0) {
            blanket.push_back(best_var);
            in_blanket[static_cast<std::size_t>(best_var)] = 1;
            continue;
        }

        const double scan_alpha = options.alpha * options.pair_scan_scale;
        int scan_var = -1;
        double scan_p = scan_alpha;
        const std::vector<int>& cand = current;
        for (int x : cand) {
            for (int y : cand) {
                if (y == x) continue;
                std::vector<int> cond = blanket;
                cond.push_back(y);
                const TestResult t = dependency_test(table, target, x, cond, options.test);
                if (t.p_value < scan_p) {
                    scan_p = t.p_value;
                    scan_var = x;
                }
            }
        }
        if (scan_var >= 0) {
            blanket.push_back(scan_var);
            in_blanket[static_cast<std::size_t>(scan_var)] = 1;
            continue;
        }
        break;
    }

    // shrink: drop members independent of the target given the rest
    bool removed = true;
    while (removed) {
        removed = false;
        std::vector<int> ordered = blanket;
        std::sort(ordered.begin(), ordered.end());
        for (int x : ordered) {
            std::vector<int> rest;
            for (int b : blanket)
                if (b != x) rest.push_back(b);
            const TestResult t = dependency_test(table, target, x, rest, options.test);
            if (t.p_value >= options.alpha) {
                blanket.erase(std::find(blanket.begin(), blanket.end(), x));
                in_blanket[static_cast<std::size_t>(x)] = 0;
                removed = true;
                break;
            }
        }
    }
    std::sort(blanket.begin(), blanket.end());
    return blanket;
}

bool BayesianNetwork::has_edge(int parent, int child) const {
    for (std::size_t i = 0; i < variables.size(); ++i) {
        if (variables[i] == child) {
            return std::find(parents[i].begin(), parents[i].end(), parent) != parents[i].end();
        }
    }
    return false;
}

std::vector<int> BayesianNetwork::neighborhood(int var) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < variables.size(); ++i) {
        if (variables[i] == var) {
            out = parents[i];
        } else if (std::find(parents[i].begin(), parents[i].end(), var) != parents[i].end()) {
            out.push_back(variables[i]);
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

bool BayesianNetwork::is_acyclic() const {
    const std::size_t n = variables.size();
    std::map<int, std::size_t> position;
    for (std::size_t i = 0; i < n; ++i) position[variables[i]] = i;

    std::vector<int> state(n, 0);  // 0 unvisited, 1 in stack, 2 done
    std::function<bool(std::size_t)> dfs = [&](std::size_t i) {
        state[i] = 1;
        for (int p : parents[i]) {
            const std::size_t pi = position.at(p);
            if (state[pi] == 1) return false;
            if (state[pi] == 0 && !dfs(pi)) return false;
        }
        state[i] = 2;
        return true;
    };
    for (std::size_t i = 0; i < n; ++i)
        if (state[i] == 0 && !dfs(i)) return false;
    return true;
}

double bic_family_score(int child, const std::vector<int>& parents, const SampleTable& table, bool joint_encoding) {
    const int arity = SampleTable::arity(joint_encoding);
    std::map<std::size_t, std::vector<double>> counts;  // parent config -> per-state counts
    for (std::size_t s = 0; s < table.s; ++s) {
        std::size_t key = 0;
        for (int p : parents)
            key = key * static_cast<std::size_t>(arity) +
                  static_cast<std::size_t>(table.state(s, static_cast<std::size_t>(p), joint_encoding));
        auto& row = counts[key];
        if (row.empty()) row.assign(static_cast<std::size_t>(arity), 0.0);
        row[static_cast<std::size_t>(table.state(s, static_cast<std::size_t>(child), joint_encoding))] += 1.0;
    }
    double log_likelihood = 0.0;
    for (const auto& [key, row] : counts) {
        (void)key;
        double total = 0.0;
        for (double c : row) total += c;
        for (double c : row)
            if (c > 0.0) log_likelihood += c * std::log(c / total);
    }
    double param_configs = 1.0;
    for (std::size_t i = 0; i < parents.size(); ++i) param_configs *= static_cast<double>(arity);
    const double free_params = static_cast<double>(arity - 1) * param_configs;
    return log_likelihood - 0.5 * std::log(static_cast<double>(table.s)) * free_params;
}

double bic_score(const BayesianNetwork& network, const SampleTable& table, bool joint_encoding) {
    double total = 0.0;
    for (std::size_t i = 0; i < network.variables.size(); ++i)
        total += bic_family_score(network.variables[i], network.parents[i], table, joint_encoding);
    return total;
}

namespace {

bool creates_cycle(const BayesianNetwork& network, int new_parent, int child) {
    // adding new_parent -> child creates a cycle iff child reaches new_parent
    // through existing parent -> child edges
    std::map<int, std::vector<int>> children;
    for (std::size_t i = 0; i < network.variables.size(); ++i)
        for (int p : network.parents[i]) children[p].push_back(network.variables[i]);

    std::vector<int> stack{child};
    std::vector<int> seen;
    while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        if (v == new_parent) return true;
        if (std::find(seen.begin(), seen.end(), v) != seen.end()) continue;
        seen.push_back(v);
        auto it = children.find(v);
        if (it != children.end())
            for (int c : it->second) stack.push_back(c);
    }
    return false;
}

}  // namespace

HillClimbResult hill_climb(const SampleTable& table, const std::vector<int>& variables, int max_parents,
                           bool joint_encoding) {
    if (variables.empty()) throw Error(errc::empty_input, "hill_climb needs at least one variable");

    HillClimbResult result;
    BayesianNetwork& net = result.network;
    net.variables = variables;
    std::sort(net.variables.begin(), net.variables.end());
    net.parents.assign(net.variables.size(), {});

    std::map<int, std::size_t> position;
    for (std::size_t i = 0; i < net.variables.size(); ++i) position[net.variables[i]] = i;

    std::map<std::pair<int, std::vector<int>>, double> family_cache;
    auto family = [&](int child, std::vector<int> parents) {
        std::sort(parents.begin(), parents.end());
        const auto key = std::make_pair(child, parents);
        auto it = family_cache.find(key);
        if (it != family_cache.end()) return it->second;
        const double score = bic_family_score(child, parents, table, joint_encoding);
        family_cache.emplace(key, score);
        return score;
    };

    double current = 0.0;
    for (std::size_t i = 0; i < net.variables.size(); ++i) current += family(net.variables[i], net.parents[i]);
    result.score_trace.push_back(current);

    constexpr double kMinGain = 1e-9;
    for (;;) {
        double best_gain = kMinGain;
        int best_op = -1;  // 0 add, 1 delete, 2 reverse
        int best_x = 0, best_y = 0;

        auto consider = [&](int op, int x, int y, double gain) {
            // strict improvement; ties keep the earliest (op, x, y) visited
            if (gain > best_gain) {
                best_gain = gain;
                best_op = op;
                best_x = x;
                best_y = y;
            }
        };

        for (int x : net.variables) {
            for (int y : net.variables) {
                if (x == y) continue;
                const std::size_t yi = position[y];
                const bool edge_xy = std::find(net.parents[yi].begin(), net.parents[yi].end(), x) !=
                                     net.parents[yi].end();
                if (!edge_xy) {
                    if (static_cast<int>(net.parents[yi].size()) >= max_parents) continue;
                    if (creates_cycle(net, x, y)) continue;
                    std::vector<int> with = net.parents[yi];
                    with.push_back(x);
                    consider(0, x, y, family(y, with) - family(y, net.parents[yi]));
                }
            }
        }
        for (int x : net.variables) {
            for (int y : net.variables) {
                if (x == y) continue;
                const std::size_t yi = position[y];
                if (std::find(net.parents[yi].begin(), net.parents[yi].end(), x) == net.parents[yi].end()) continue;
                std::vector<int> without;
                for (int p : net.parents[yi])
                    if (p != x) without.push_back(p);
                consider(1, x, y, family(y, without) - family(y, net.parents[yi]));
            }
        }
        for (int x : net.variables) {
            for (int y : net.variables) {
                if (x == y) continue;
                const std::size_t yi = position[y];
                const std::size_t xi = position[x];
                if (std::find(net.parents[yi].begin(), net.parents[yi].end(), x) == net.parents[yi].end()) continue;
                if (static_cast<int>(net.parents[xi].size()) >= max_parents) continue;
                // reversing x->y to y->x: remove first, then test the cycle
                std::vector<int> y_without;
                for (int p : net.parents[yi])
                    if (p != x) y_without.push_back(p);
                BayesianNetwork probe = net;
                probe.parents[yi] = y_without;
                if (creates_cycle(probe, y, x)) continue;
                std::vector<int> x_with = net.parents[xi];
                x_with.push_back(y);
                const double gain = (family(y, y_without) - family(y, net.parents[yi])) +
                                    (family(x, x_with) - family(x, net.parents[xi]));
                consider(2, x, y, gain);
            }
        }

        if (best_op < 0) break;
        const std::size_t yi = position[best_y];
        const std::size_t xi = position[best_x];
        if (best_op == 0) {
            net.parents[yi].push_back(best_x);
            std::sort(net.parents[yi].begin(), net.parents[yi].end());
        } else if (best_op == 1) {
            net.parents[yi].erase(std::find(net.parents[yi].begin(), net.parents[yi].end(), best_x));
        } else {
            net.parents[yi].erase(std::find(net.parents[yi].begin(), net.parents[yi].end(), best_x));
            net.parents[xi].push_back(best_y);
            std::sort(net.parents[xi].begin(), net.parents[xi].end());
        }
        current += best_gain;
        result.score_trace.push_back(current);
    }
    return result;
}

double normalized_mutual_information(const SampleTable& table, int var_a, int var_b, bool joint_encoding) {
    const int arity = SampleTable::arity(joint_encoding);
    std::vector<double> joint(static_cast<std::size_t>(arity * arity), 0.0);
    for (std::size_t s = 0; s < table.s; ++s) {
        const int a = table.state(s, static_cast<std::size_t>(var_a), joint_encoding);
        const int b = table.state(s, static_cast<std::size_t>(var_b), joint_encoding);
        joint[static_cast<std::size_t>(a * arity + b)] += 1.0;
    }
    const double total = static_cast<double>(table.s);
    std::vector<double> pa(static_cast<std::size_t>(arity), 0.0), pb(static_cast<std::size_t>(arity), 0.0);
    for (int i = 0; i < arity; ++i)
        for (int j = 0; j < arity; ++j) {
            const double p = joint[static_cast<std::size_t>(i * arity + j)] / total;
            pa[static_cast<std::size_t>(i)] += p;
            pb[static_cast<std::size_t>(j)] += p;
        }
    double mi = 0.0, ha = 0.0, hb = 0.0;
    for (int i = 0; i < arity; ++i) {
        if (pa[static_cast<std::size_t>(i)] > 0.0)
            ha -= pa[static_cast<std::size_t>(i)] * std::log(pa[static_cast<std::size_t>(i)]);
        if (pb[static_cast<std::size_t>(i)] > 0.0)
            hb -= pb[static_cast<std::size_t>(i)] * std::log(pb[static_cast<std::size_t>(i)]);
    }
    for (int i = 0; i < arity; ++i) {
        for (int j = 0; j < arity; ++j) {
            const double p = joint[static_cast<std::size_t>(i * arity + j)] / total;
            if (p > 0.0) mi += p * std::log(p / (pa[static_cast<std::size_t>(i)] * pb[static_cast<std::size_t>(j)]));
        }
    }
    if (ha <= 0.0 || hb <= 0.0) return 0.0;
    return mi / std::sqrt(ha * hb);
}

ExplanationGraph build_influence_graph(const std::vector<TargetExplanation>& explanations, const SampleTable& table,
                                       std::size_t n, bool joint_encoding) {
    ExplanationGraph graph;
    graph.n = n;
    graph.targets = explanations;
    for (const auto& te : explanations) {
        for (int u : te.network.neighborhood(te.target)) {
            const double nmi = normalized_mutual_information(table, u, te.target, joint_encoding);
            const double weight = std::min(1.0, std::max(nmi, 1e-6));
            graph.edges.push_back({u, te.target, weight});
        }
    }
    std::sort(graph.edges.begin(), graph.edges.end(), [](const auto& a, const auto& b) {
        return std::tie(a.src, a.dst) < std::tie(b.src, b.dst);
    });
    return graph;
}

ExplanationGraph explain(const Predictor& predictor, const model::GraphInputs& inputs, const ExplainOptions& options) {
    const SampleTable table = generate_samples(predictor, inputs, options.perturb_p, options.samples, options.seed);

    std::vector<int> targets = options.targets;
    if (targets.empty()) {
        targets.resize(inputs.n);
        for (std::size_t v = 0; v < inputs.n; ++v) targets[v] = static_cast<int>(v);
    }

    BlanketOptions blanket_options;
    blanket_options.alpha = options.alpha;
    blanket_options.test = options.test;

    std::vector<TargetExplanation> explanations;
    explanations.reserve(targets.size());
    for (int t : targets) {
        TargetExplanation te;
        te.target = t;
        te.blanket = markov_blanket(table, t, blanket_options);
        std::vector<int> vars = te.blanket;
        vars.push_back(t);
        std::sort(vars.begin(), vars.end());
        te.network = hill_climb(table, vars, options.max_parents, options.test.joint_encoding).network;
        explanations.push_back(std::move(te));
    }
    return build_influence_graph(explanations, table, inputs.n, options.test.joint_encoding);
}

}  // namespace clgt::explainer
