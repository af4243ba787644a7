#include "clgt/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "clgt/csv.hpp"
#include "clgt/errors.hpp"

namespace clgt::io {

using nlohmann::json;

namespace {

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in.good()) throw Error(errc::missing_file, "cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw Error(errc::bad_row, path + ": " + e.what());
    }
    return j;
}

void dump_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out.good()) throw Error(errc::io_error, "cannot write " + path);
    out << j.dump(2) << "\n";
}

json config_to_json(const model::ClgtConfig& config) {
    return json{{"hidden_dim", config.hidden_dim},
                {"heads", config.heads},
                {"layers", config.layers},
                {"classes", config.classes},
                {"node_in_dim", config.node_in_dim},
                {"edge_in_dim", config.edge_in_dim},
                {"weight_in_dim", config.weight_in_dim},
                {"dropout", config.dropout},
                {"attention", config.attention == model::AttentionKind::scalar ? "scalar" : "elementwise"},
                {"laplacian_pe", config.laplacian_pe},
                {"laplacian_pe_dim", config.laplacian_pe_dim}};
}

model::ClgtConfig config_from_json(const json& j) {
    model::ClgtConfig config;
    config.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    config.heads = j.at("heads").get<std::size_t>();
    config.layers = j.at("layers").get<std::size_t>();
    config.classes = j.at("classes").get<std::size_t>();
    config.node_in_dim = j.at("node_in_dim").get<std::size_t>();
    config.edge_in_dim = j.at("edge_in_dim").get<std::size_t>();
    config.weight_in_dim = j.at("weight_in_dim").get<std::size_t>();
    config.dropout = j.at("dropout").get<double>();
    config.attention = j.at("attention").get<std::string>() == "scalar" ? model::AttentionKind::scalar
                                                                        : model::AttentionKind::elementwise;
    config.laplacian_pe = j.at("laplacian_pe").get<bool>();
    config.laplacian_pe_dim = j.at("laplacian_pe_dim").get<std::size_t>();
    return config;
}

graphgen::EdgeKind kind_from_string(const std::string& s) {
    if (s == "addition") return graphgen::EdgeKind::addition;
    if (s == "deletion") return graphgen::EdgeKind::deletion;
    if (s == "issue") return graphgen::EdgeKind::issue;
    throw Error(errc::bad_enum_value, "edge kind '" + s + "'");
}

graphgen::Level level_from_string(const std::string& s) {
    if (s == "minor") return graphgen::Level::minor;
    if (s == "moderate") return graphgen::Level::moderate;
    if (s == "severe") return graphgen::Level::severe;
    throw Error(errc::bad_enum_value, "level '" + s + "'");
}

}  // namespace

void write_graph_json(const std::string& path, const graphgen::WeeklyInteractionGraph& graph) {
    json vertices = json::array();
    for (std::size_t i = 0; i < graph.vertices.size(); ++i) {
        vertices.push_back(
            {{"index", i}, {"student_id", graph.vertices[i].first}, {"team_id", graph.vertices[i].second}});
    }
    json edges = json::array();
    for (const auto& e : graph.edges) {
        edges.push_back({{"src", e.src},
                         {"dst", e.dst},
                         {"kind", graphgen::to_string(e.kind)},
                         {"influence", e.influence},
                         {"level", graphgen::to_string(e.level)}});
    }
    dump_json(path, json{{"week", graph.week}, {"vertices", vertices}, {"edges", edges}});
}

graphgen::WeeklyInteractionGraph read_graph_json(const std::string& path) {
    const json j = load_json(path);
    graphgen::WeeklyInteractionGraph graph;
    graph.week = j.at("week").get<int>();
    for (const auto& v : j.at("vertices"))
        graph.vertices.emplace_back(v.at("student_id").get<std::string>(), v.at("team_id").get<std::string>());
    for (const auto& e : j.at("edges")) {
        graphgen::InteractionEdge edge;
        edge.src = e.at("src").get<int>();
        edge.dst = e.at("dst").get<int>();
        edge.kind = kind_from_string(e.at("kind").get<std::string>());
        edge.influence = e.at("influence").get<double>();
        edge.level = level_from_string(e.at("level").get<std::string>());
        graph.edges.push_back(edge);
    }
    return graph;
}

void write_thresholds_json(const std::string& path, const graphgen::LevelThresholds& thresholds) {
    json j;
    for (int k = 0; k < 3; ++k) {
        const auto& cut = thresholds.cuts[static_cast<std::size_t>(k)];
        j[graphgen::to_string(static_cast<graphgen::EdgeKind>(k))] = {{"t1", cut.t1}, {"t2", cut.t2}};
    }
    dump_json(path, j);
}

graphgen::LevelThresholds read_thresholds_json(const std::string& path) {
    const json j = load_json(path);
    graphgen::LevelThresholds thresholds;
    for (int k = 0; k < 3; ++k) {
        const auto& cut = j.at(graphgen::to_string(static_cast<graphgen::EdgeKind>(k)));
        thresholds.cuts[static_cast<std::size_t>(k)] = {cut.at("t1").get<double>(), cut.at("t2").get<double>()};
    }
    return thresholds;
}

void write_matrix_csv(const std::string& path, const graphgen::InteractionMatrixSet& matrices,
                      graphgen::EdgeKind kind) {
    std::ofstream out(path);
    if (!out.good()) throw Error(errc::io_error, "cannot write " + path);
    const auto& values = matrices.values[static_cast<std::size_t>(kind)];
    char buf[64];
    for (std::size_t r = 0; r < matrices.n; ++r) {
        for (std::size_t c = 0; c < matrices.n; ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", values[r * matrices.n + c]);
            out << buf << (c + 1 < matrices.n ? "," : "");
        }
        out << "\n";
    }
}

void write_features_csv(const std::string& path, const graphgen::NodeFeatureTable& features, const Roster& roster) {
    csv::Table table;
    table.header.push_back("student_id");
    for (const auto& name : features.feature_names) table.header.push_back(name);
    char buf[64];
    for (std::size_t r = 0; r < features.rows; ++r) {
        csv::Row row{roster.students[r].first};
        for (std::size_t c = 0; c < features.cols; ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", features.at(r, c));
            row.emplace_back(buf);
        }
        table.rows.push_back(std::move(row));
    }
    csv::write_file(path, table);
}

void save_checkpoint(const std::string& path, const model::ClgtModel& m) {
    json params;
    for (const auto& [name, tensor] : m.named_params()) {
        params[name] = {{"rows", tensor->rows}, {"cols", tensor->cols}, {"data", tensor->data}};
    }
    dump_json(path, json{{"format", "clgt-checkpoint"},
                         {"version", 1},
                         {"seed", m.seed},
                         {"config", config_to_json(m.config)},
                         {"params", params}});
}

model::ClgtModel load_checkpoint(const std::string& path) {
    std::ifstream probe(path);
    if (!probe.good()) throw Error(errc::missing_checkpoint, "checkpoint not found: " + path);
    probe.close();

    const json j = load_json(path);
    if (j.value("format", "") != "clgt-checkpoint")
        throw Error(errc::bad_row, path + ": not a clgt checkpoint");
    model::ClgtModel m = model::init_model(config_from_json(j.at("config")), j.at("seed").get<std::uint64_t>());
    const json& params = j.at("params");
    for (auto& [name, tensor] : m.named_params()) {
        const auto it = params.find(name);
        if (it == params.end()) throw Error(errc::bad_row, path + ": missing parameter " + name);
        const std::size_t rows = it->at("rows").get<std::size_t>();
        const std::size_t cols = it->at("cols").get<std::size_t>();
        if (rows != tensor->rows || cols != tensor->cols)
            throw Error(errc::shape_mismatch, path + ": shape mismatch for " + name);
        tensor->data = it->at("data").get<std::vector<double>>();
    }
    return m;
}

void write_history_csv(const std::string& path, const std::vector<train::EpochStats>& history) {
    csv::Table table;
    table.header = {"epoch", "lr", "train_loss", "val_loss", "val_acc"};
    char buf[64];
    for (const auto& row : history) {
        csv::Row out{std::to_string(row.epoch)};
        for (double v : {row.lr, row.train_loss, row.val_loss, row.val_acc}) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out.emplace_back(buf);
        }
        table.rows.push_back(std::move(out));
    }
    csv::write_file(path, table);
}

void write_metrics_json(const std::string& path, const train::Metrics& metrics, std::uint64_t config_hash,
                        std::uint64_t seed) {
    json per_class = json::array();
    for (std::size_t c = 0; c < metrics.per_class.size(); ++c) {
        const auto& cm = metrics.per_class[c];
        per_class.push_back({{"class", c},
                             {"precision", cm.precision},
                             {"recall", cm.recall},
                             {"f1", cm.f1},
                             {"auc", cm.auc},
                             {"support", cm.support},
                             {"degenerate", cm.degenerate}});
    }
    dump_json(path, json{{"acc", metrics.acc},
                         {"f1_macro", metrics.f1_macro},
                         {"auc_macro_ovr", metrics.auc_macro_ovr},
                         {"f1_weighted", metrics.f1_weighted},
                         {"f1_micro", metrics.f1_micro},
                         {"auc_weighted_ovr", metrics.auc_weighted_ovr},
                         {"auc_micro_ovr", metrics.auc_micro_ovr},
                         {"per_class", per_class},
                         {"has_degenerate_class", metrics.has_degenerate_class},
                         {"config_hash", config_hash},
                         {"seed", seed}});
}

void write_explanation_json(const std::string& path, const explainer::ExplanationGraph& graph, const Roster* roster,
                            const ExplanationMeta& meta) {
    json vertices = json::array();
    for (std::size_t i = 0; i < graph.n; ++i) {
        json v{{"index", i}};
        if (roster && i < roster->size()) {
            v["student_id"] = roster->students[i].first;
            v["team_id"] = roster->students[i].second;
        }
        vertices.push_back(v);
    }
    json edges = json::array();
    for (const auto& e : graph.edges) edges.push_back({{"src", e.src}, {"dst", e.dst}, {"weight", e.weight}});
    json targets = json::array();
    for (const auto& t : graph.targets) {
        json network = json::array();
        for (std::size_t i = 0; i < t.network.variables.size(); ++i) {
            for (int p : t.network.parents[i])
                network.push_back({{"parent", p}, {"child", t.network.variables[i]}});
        }
        targets.push_back({{"target", t.target}, {"blanket", t.blanket}, {"network_edges", network}});
    }
    dump_json(path, json{{"n", graph.n},
                         {"vertices", vertices},
                         {"edges", edges},
                         {"targets", targets},
                         {"params",
                          {{"samples", meta.samples},
                           {"perturb_p", meta.perturb_p},
                           {"alpha", meta.alpha},
                           {"max_parents", meta.max_parents},
                           {"week", meta.week}}},
                         {"config_hash", meta.config_hash},
                         {"seed", meta.seed}});
}

explainer::ExplanationGraph read_explanation_json(const std::string& path) {
    const json j = load_json(path);
    explainer::ExplanationGraph graph;
    graph.n = j.at("n").get<std::size_t>();
    for (const auto& e : j.at("edges"))
        graph.edges.push_back({e.at("src").get<int>(), e.at("dst").get<int>(), e.at("weight").get<double>()});
    return graph;
}

std::string influence_dot(const explainer::ExplanationGraph& graph, const Roster* roster) {
    std::ostringstream out;
    out << "digraph influence {\n";
    out << "  node [style=filled, shape=circle];\n";
    const std::size_t teams = roster ? roster->teams.size() : 1;
    for (std::size_t i = 0; i < graph.n; ++i) {
        std::string name = roster && i < roster->size() ? roster->students[i].first : "v" + std::to_string(i);
        double hue = 0.0;
        if (roster && i < roster->size())
            hue = static_cast<double>(roster->team_of_student(i)) / static_cast<double>(teams);
        char color[48];
        std::snprintf(color, sizeof color, "%.3f 0.500 0.950", hue);
        out << "  \"" << name << "\" [fillcolor=\"" << color << "\"];\n";
    }
    char width[32];
    for (const auto& e : graph.edges) {
        std::string src = roster && static_cast<std::size_t>(e.src) < roster->size()
                              ? roster->students[static_cast<std::size_t>(e.src)].first
                              : "v" + std::to_string(e.src);
        std::string dst = roster && static_cast<std::size_t>(e.dst) < roster->size()
                              ? roster->students[static_cast<std::size_t>(e.dst)].first
                              : "v" + std::to_string(e.dst);
        std::snprintf(width, sizeof width, "%.3f", 0.5 + 4.0 * e.weight);
        out << "  \"" << src << "\" -> \"" << dst << "\" [penwidth=" << width << "];\n";
    }
    out << "}\n";
    return out.str();
}

std::string activity_csv(const std::vector<std::vector<double>>& matrix, const Roster& roster) {
    if (matrix.size() != roster.size()) throw Error(errc::shape_mismatch, "activity rows must match roster");
    // students ordered so teams form contiguous blocks
    std::vector<std::size_t> order(roster.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return roster.team_of_student(a) < roster.team_of_student(b);
    });

    const std::size_t weeks = matrix.empty() ? 0 : matrix[0].size();
    std::ostringstream out;
    out << "student_id,team_id";
    for (std::size_t w = 1; w <= weeks; ++w) out << ",week_" << w;
    out << "\n";
    char buf[64];
    for (std::size_t i : order) {
        out << roster.students[i].first << "," << roster.students[i].second;
        for (std::size_t w = 0; w < weeks; ++w) {
            std::snprintf(buf, sizeof buf, "%.17g", matrix[i][w]);
            out << "," << buf;
        }
        out << "\n";
    }
    return out.str();
}

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t hash = 1469598103934665603ULL;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 1099511628211ULL;
    }
    return hash;
}

}  // namespace clgt::io
