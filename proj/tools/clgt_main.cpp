#include <fcntl.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "clgt/errors.hpp"
#include "clgt/explainer.hpp"
#include "clgt/ingest.hpp"
#include "clgt/io.hpp"
#include "clgt/pipeline.hpp"
#include "clgt/synth.hpp"
#include "clgt/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// run configuration: one INI-style file, flags override

struct RunConfig {
    clgt::pipeline::Paths paths;
    int weeks = 16;
    clgt::graphgen::ScopeConfig scope;
    clgt::model::ClgtConfig model;
    clgt::train::TrainConfig train;
    clgt::explainer::ExplainOptions explain;
    int explain_week = 0;  // 0 means the last week
    std::string explain_targets = "all";
    std::uint64_t seed = 7;
    std::string out_dir = "out";
};

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    std::size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

std::map<std::string, std::string> parse_ini(const std::string& path) {
    std::ifstream in(path);
    if (!in.good()) throw clgt::Error(clgt::errc::missing_file, "config file not found: " + path);
    std::map<std::string, std::string> values;
    std::string line, section;
    while (std::getline(in, line)) {
        const std::string text = trim(line);
        if (text.empty() || text[0] == '#' || text[0] == ';') continue;
        if (text.front() == '[' && text.back() == ']') {
            section = trim(text.substr(1, text.size() - 2));
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string::npos)
            throw clgt::Error(clgt::errc::bad_row, path + ": expected key = value, got '" + text + "'");
        values[section + "." + trim(text.substr(0, eq))] = trim(text.substr(eq + 1));
    }
    return values;
}

class IniView {
public:
    explicit IniView(std::map<std::string, std::string> values) : values_(std::move(values)) {}

    std::string str(const std::string& key, const std::string& fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }
    double real(const std::string& key, double fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : std::stod(it->second);
    }
    long integer(const std::string& key, long fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : std::stol(it->second);
    }
    bool boolean(const std::string& key, bool fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
        if (it->second == "false" || it->second == "0" || it->second == "no") return false;
        throw clgt::Error(clgt::errc::bad_row, "config key " + key + ": expected a boolean, got '" + it->second + "'");
    }

private:
    std::map<std::string, std::string> values_;
};

clgt::graphgen::NormScope scope_from(const std::string& text, const std::string& key) {
    if (text == "team_week") return clgt::graphgen::NormScope::team_week;
    if (text == "week_global") return clgt::graphgen::NormScope::week_global;
    throw clgt::Error(clgt::errc::bad_enum_value, "config key " + key + ": '" + text + "'");
}

RunConfig load_run_config(const std::string& path) {
    RunConfig config;
    if (path.empty()) return config;
    const IniView ini(parse_ini(path));

    config.paths.commits = ini.str("paths.commits", "data/commits.csv");
    config.paths.issues = ini.str("paths.issues", "data/issues.csv");
    config.paths.grades = ini.str("paths.grades", "data/grades.csv");
    config.paths.roster = ini.str("paths.roster", "data/roster.csv");

    config.weeks = static_cast<int>(ini.integer("graphgen.weeks", 16));
    config.scope.adddel_scope = scope_from(ini.str("graphgen.adddel_scope", "team_week"), "graphgen.adddel_scope");
    config.scope.issue_scope = scope_from(ini.str("graphgen.issue_scope", "week_global"), "graphgen.issue_scope");

    config.model.hidden_dim = static_cast<std::size_t>(ini.integer("model.hidden_dim", 88));
    config.model.heads = static_cast<std::size_t>(ini.integer("model.heads", 8));
    config.model.layers = static_cast<std::size_t>(ini.integer("model.layers", 10));
    config.model.dropout = ini.real("model.dropout", 0.0);
    const std::string attention = ini.str("model.attention", "elementwise");
    if (attention == "elementwise") config.model.attention = clgt::model::AttentionKind::elementwise;
    else if (attention == "scalar") config.model.attention = clgt::model::AttentionKind::scalar;
    else throw clgt::Error(clgt::errc::bad_enum_value, "model.attention: '" + attention + "'");
    config.model.laplacian_pe = ini.boolean("model.laplacian_pe", false);
    config.model.laplacian_pe_dim = static_cast<std::size_t>(ini.integer("model.laplacian_pe_dim", 8));

    config.train.initial_lr = ini.real("train.initial_lr", 1e-3);
    config.train.decay_factor = ini.real("train.decay_factor", 0.5);
    config.train.patience = static_cast<int>(ini.integer("train.patience", 5));
    config.train.stop_lr = ini.real("train.stop_lr", 1e-6);
    config.train.max_epochs = static_cast<int>(ini.integer("train.max_epochs", 200));
    config.train.train_ratio = ini.real("train.train_ratio", 0.6);
    config.train.val_ratio = ini.real("train.val_ratio", 0.2);
    config.train.test_ratio = ini.real("train.test_ratio", 0.2);
    config.train.class_weights = ini.boolean("train.class_weights", false);

    config.explain.samples = static_cast<std::size_t>(ini.integer("explainer.samples", 800));
    config.explain.perturb_p = ini.real("explainer.perturb_p", 0.5);
    config.explain.alpha = ini.real("explainer.alpha", 0.05);
    config.explain.max_parents = static_cast<int>(ini.integer("explainer.max_parents", 3));
    config.explain_week = static_cast<int>(ini.integer("explainer.week", 0));
    config.explain_targets = ini.str("explainer.targets", "all");
    return config;
}

// every output embeds this hash; flag overrides are applied before hashing
std::uint64_t config_hash(const RunConfig& config) {
    std::ostringstream out;
    out << config.paths.commits << '|' << config.paths.issues << '|' << config.paths.grades << '|'
        << config.paths.roster << '|' << config.weeks << '|' << static_cast<int>(config.scope.adddel_scope) << '|'
        << static_cast<int>(config.scope.issue_scope) << '|' << config.model.hidden_dim << '|' << config.model.heads
        << '|' << config.model.layers << '|' << config.model.dropout << '|'
        << static_cast<int>(config.model.attention) << '|' << config.model.laplacian_pe << '|'
        << config.train.initial_lr << '|' << config.train.decay_factor << '|' << config.train.patience << '|'
        << config.train.stop_lr << '|' << config.train.max_epochs << '|' << config.train.train_ratio << '|'
        << config.train.val_ratio << '|' << config.train.test_ratio << '|' << config.train.class_weights << '|'
        << config.explain.samples << '|' << config.explain.perturb_p << '|' << config.explain.alpha << '|'
        << config.explain.max_parents << '|' << config.explain_week << '|' << config.explain_targets << '|'
        << config.seed;
    return clgt::io::fnv1a(out.str());
}

// single-writer guard on the output directory
class OutDirLock {
public:
    explicit OutDirLock(const fs::path& dir) {
        fs::create_directories(dir);
        path_ = dir / ".clgt.lock";
        fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd_ < 0)
            throw clgt::Error(clgt::errc::locked,
                              "output directory is locked (" + path_.string() + " exists); remove it if stale");
    }
    ~OutDirLock() {
        if (fd_ >= 0) {
            ::close(fd_);
            std::error_code ec;
            fs::remove(path_, ec);
        }
    }
    OutDirLock(const OutDirLock&) = delete;
    OutDirLock& operator=(const OutDirLock&) = delete;

private:
    fs::path path_;
    int fd_ = -1;
};

std::string week_tag(int week) {
    std::string digits = std::to_string(week);
    if (digits.size() < 2) digits.insert(digits.begin(), '0');
    return digits;
}

// full resolved configuration lands next to every command's outputs
void write_run_config(const RunConfig& config) {
    const json dump{
        {"paths",
         {{"commits", config.paths.commits},
          {"issues", config.paths.issues},
          {"grades", config.paths.grades},
          {"roster", config.paths.roster}}},
        {"graphgen",
         {{"weeks", config.weeks},
          {"adddel_scope", config.scope.adddel_scope == clgt::graphgen::NormScope::team_week ? "team_week"
                                                                                             : "week_global"},
          {"issue_scope", config.scope.issue_scope == clgt::graphgen::NormScope::team_week ? "team_week"
                                                                                           : "week_global"}}},
        {"model",
         {{"hidden_dim", config.model.hidden_dim},
          {"heads", config.model.heads},
          {"layers", config.model.layers},
          {"dropout", config.model.dropout},
          {"attention", config.model.attention == clgt::model::AttentionKind::scalar ? "scalar" : "elementwise"},
          {"laplacian_pe", config.model.laplacian_pe}}},
        {"train",
         {{"initial_lr", config.train.initial_lr},
          {"decay_factor", config.train.decay_factor},
          {"patience", config.train.patience},
          {"stop_lr", config.train.stop_lr},
          {"max_epochs", config.train.max_epochs},
          {"train_ratio", config.train.train_ratio},
          {"val_ratio", config.train.val_ratio},
          {"test_ratio", config.train.test_ratio},
          {"class_weights", config.train.class_weights}}},
        {"explainer",
         {{"samples", config.explain.samples},
          {"perturb_p", config.explain.perturb_p},
          {"alpha", config.explain.alpha},
          {"max_parents", config.explain.max_parents},
          {"week", config.explain_week},
          {"targets", config.explain_targets}}},
        {"seed", config.seed},
        {"config_hash", config_hash(config)},
    };
    std::ofstream out(fs::path(config.out_dir) / "run_config.json");
    out << dump.dump(2) << "\n";
}

struct LoadedData {
    clgt::pipeline::Dataset dataset;
    clgt::pipeline::BuiltGraphs built;
    std::vector<clgt::train::Sample> samples;
};

LoadedData load_everything(const RunConfig& config) {
    LoadedData data;
    data.dataset = clgt::pipeline::load(config.paths, config.weeks);
    data.built = clgt::pipeline::build_graphs(data.dataset, config.scope);
    data.samples = clgt::pipeline::make_samples(data.dataset, data.built, config.model.laplacian_pe,
                                                config.model.laplacian_pe_dim);
    return data;
}

// ---------------------------------------------------------------------------
// subcommands

int cmd_build_graph(const RunConfig& config) {
    OutDirLock lock(config.out_dir);
    write_run_config(config);
    const auto data = load_everything(config);
    const fs::path out(config.out_dir);
    fs::create_directories(out / "graphs");
    fs::create_directories(out / "matrices");
    fs::create_directories(out / "features");

    std::size_t matrix_files = 0;
    for (std::size_t i = 0; i < data.built.graphs.size(); ++i) {
        const auto& graph = data.built.graphs[i];
        const std::string tag = week_tag(graph.week);
        clgt::io::write_graph_json((out / "graphs" / ("week_" + tag + ".json")).string(), graph);
        const auto matrices = clgt::graphgen::to_matrices(graph, data.built.thresholds);
        for (int k = 0; k < 3; ++k) {
            const auto kind = static_cast<clgt::graphgen::EdgeKind>(k);
            clgt::io::write_matrix_csv(
                (out / "matrices" / ("week" + tag + "_" + clgt::graphgen::to_string(kind) + ".csv")).string(),
                matrices, kind);
            ++matrix_files;
        }
        clgt::io::write_features_csv((out / "features" / ("week_" + tag + ".csv")).string(), data.built.features[i],
                                     data.dataset.roster);
    }
    clgt::io::write_thresholds_json((out / "thresholds.json").string(), data.built.thresholds);
    std::cout << "wrote " << data.built.graphs.size() << " graphs, " << matrix_files << " matrices to "
              << config.out_dir << "\n";
    return 0;
}

int cmd_train(RunConfig config) {
    OutDirLock lock(config.out_dir);
    write_run_config(config);
    const auto data = load_everything(config);
    config.model.node_in_dim = data.built.features.at(0).cols;
    config.train.seed = config.seed;

    const auto masks = clgt::train::split_dataset(data.samples, config.train.train_ratio, config.train.val_ratio,
                                                  config.train.test_ratio, config.seed);
    auto initial = clgt::model::init_model(config.model, config.seed);
    auto result = clgt::train::train_loop(std::move(initial), data.samples, masks, config.train);

    const fs::path out(config.out_dir);
    clgt::io::save_checkpoint((out / "checkpoint.json").string(), result.model);
    clgt::io::write_history_csv((out / "history.csv").string(), result.history);

    const auto& eval_mask = config.train.test_ratio > 0.0 ? masks.test : masks.train;
    const auto metrics = clgt::train::evaluate(result.model, data.samples, eval_mask);
    clgt::io::write_metrics_json((out / "metrics.json").string(), metrics, config_hash(config), config.seed);

    std::cout << "trained " << result.history.size() << " epochs (best val loss " << result.best_val_loss
              << " at epoch " << result.best_epoch << ")\n"
              << "test acc " << metrics.acc << ", macro F1 " << metrics.f1_macro << ", macro AUC "
              << metrics.auc_macro_ovr << "\n";
    return 0;
}

int cmd_evaluate(const RunConfig& config, const std::string& checkpoint, const std::string& split) {
    OutDirLock lock(config.out_dir);
    write_run_config(config);
    const auto m = clgt::io::load_checkpoint(checkpoint);
    const auto data = load_everything(config);

    const auto masks = clgt::train::split_dataset(data.samples, config.train.train_ratio, config.train.val_ratio,
                                                  config.train.test_ratio, config.seed);
    const auto* mask = &masks.test;
    if (split == "train") mask = &masks.train;
    else if (split == "val") mask = &masks.val;
    else if (split == "all") mask = nullptr;
    else if (split != "test")
        throw clgt::Error(clgt::errc::bad_enum_value, "--split must be train, val, test or all");

    std::vector<std::vector<std::uint8_t>> all_mask;
    if (mask == nullptr) {
        for (const auto& sample : data.samples) all_mask.emplace_back(sample.inputs.n, 1);
        mask = &all_mask;
    }
    const auto metrics = clgt::train::evaluate(m, data.samples, *mask);

    // final-grade prediction: majority vote over weekly argmax classes
    std::vector<std::vector<int>> weekly_classes;
    for (const auto& sample : data.samples) weekly_classes.push_back(clgt::model::predict_classes(m, sample.inputs));
    const auto finals =
        clgt::train::aggregate_final_per_student(data.samples, weekly_classes, data.dataset.roster.size());
    std::size_t final_correct = 0, final_total = 0;
    for (std::size_t v = 0; v < data.dataset.roster.size(); ++v) {
        const auto it = data.dataset.grades.final_grades.find(data.dataset.roster.students[v].first);
        if (it == data.dataset.grades.final_grades.end()) continue;
        ++final_total;
        if (finals[v] == static_cast<int>(it->second)) ++final_correct;
    }

    const fs::path out(config.out_dir);
    clgt::io::write_metrics_json((out / "metrics.json").string(), metrics, config_hash(config), config.seed);
    if (final_total > 0) {
        json extra{{"final_grade_acc", static_cast<double>(final_correct) / static_cast<double>(final_total)},
                   {"students", final_total}};
        std::ofstream agg((out / "final_grades.json").string());
        agg << extra.dump(2) << "\n";
    }
    std::cout << "split " << split << ": acc " << metrics.acc << ", macro F1 " << metrics.f1_macro << ", macro AUC "
              << metrics.auc_macro_ovr << "\n";
    return 0;
}

int cmd_explain(const RunConfig& config, const std::string& checkpoint, bool write_dot) {
    OutDirLock lock(config.out_dir);
    write_run_config(config);
    const auto m = clgt::io::load_checkpoint(checkpoint);
    const auto data = load_everything(config);

    const int week = config.explain_week > 0 ? config.explain_week : config.weeks;
    if (week < 1 || week > static_cast<int>(data.samples.size()))
        throw clgt::Error(clgt::errc::week_out_of_range, "explain week " + std::to_string(week));
    const auto& sample = data.samples[static_cast<std::size_t>(week - 1)];

    clgt::explainer::ExplainOptions options = config.explain;
    options.seed = config.seed;
    if (config.explain_targets != "all") {
        std::stringstream ss(config.explain_targets);
        std::string token;
        while (std::getline(ss, token, ',')) {
            const int idx = data.dataset.roster.student_index(trim(token));
            if (idx < 0) throw clgt::Error(clgt::errc::unknown_student, "explain target '" + trim(token) + "'");
            options.targets.push_back(idx);
        }
    }

    const auto predictor = clgt::explainer::make_predictor(m);
    const auto graph = clgt::explainer::explain(predictor, sample.inputs, options);

    clgt::io::ExplanationMeta meta;
    meta.samples = options.samples;
    meta.perturb_p = options.perturb_p;
    meta.alpha = options.alpha;
    meta.max_parents = options.max_parents;
    meta.seed = config.seed;
    meta.config_hash = config_hash(config);
    meta.week = week;

    const fs::path out(config.out_dir);
    clgt::io::write_explanation_json((out / "explanation.json").string(), graph, &data.dataset.roster, meta);
    if (write_dot) {
        std::ofstream dot((out / "explanation.dot").string());
        dot << clgt::io::influence_dot(graph, &data.dataset.roster);
    }
    std::cout << "explained week " << week << ": " << graph.edges.size() << " influence edges over " << graph.n
              << " vertices\n";
    return 0;
}

int cmd_export_viz(const RunConfig& config, const std::string& what, const std::string& explanation_path) {
    OutDirLock lock(config.out_dir);
    write_run_config(config);
    const fs::path out(config.out_dir);
    if (what == "activity") {
        const auto data = load_everything(config);
        const auto matrix = clgt::pipeline::activity_matrix(data.built, data.dataset.roster);
        std::ofstream file((out / "activity.csv").string());
        file << clgt::io::activity_csv(matrix, data.dataset.roster);
        std::cout << "wrote activity heatmap (" << matrix.size() << " students x "
                  << (matrix.empty() ? 0 : matrix[0].size()) << " weeks)\n";
        return 0;
    }
    if (what == "influence") {
        const auto graph = clgt::io::read_explanation_json(explanation_path);
        const auto roster = clgt::ingest::parse_roster(config.paths.roster);
        std::ofstream file((out / "influence.dot").string());
        file << clgt::io::influence_dot(graph, &roster);
        std::cout << "wrote influence DOT (" << graph.edges.size() << " edges)\n";
        return 0;
    }
    throw clgt::Error(clgt::errc::bad_enum_value, "--what must be 'activity' or 'influence'");
}

int cmd_synth(const clgt::synth::SynthSpec& spec, const std::string& out_dir) {
    const auto data = clgt::synth::generate(spec);
    clgt::synth::write_csv(data, out_dir);
    std::cout << "wrote synthetic dataset: " << data.roster.size() << " students, " << data.roster.teams.size()
              << " teams, " << spec.weeks << " weeks, " << data.commits.size() << " commits, " << data.issues.size()
              << " issues\n";
    return 0;
}

int exit_code_for(const clgt::Error& error) {
    if (clgt::Error::is_parse_error(error.code())) return 2;
    switch (error.code()) {
        case clgt::errc::missing_checkpoint:
            return 4;
        case clgt::errc::unknown_student:
        case clgt::errc::unknown_team:
        case clgt::errc::self_team_issue:
        case clgt::errc::week_out_of_range:
        case clgt::errc::missing_file:
        case clgt::errc::missing_grade:
        case clgt::errc::bad_config:
        case clgt::errc::bad_ratios:
        case clgt::errc::shape_mismatch:
        case clgt::errc::empty_input:
        case clgt::errc::non_positive_value:
        case clgt::errc::insufficient_data:
        case clgt::errc::empty_mask:
            return 3;
        default:
            return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"collaborative-learning graph transformer pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    std::uint64_t seed_override = 0;
    bool seed_given = false;
    app.add_option("--config", config_path, "INI run configuration")->configurable(false);
    app.add_option("--out", out_override, "output directory (overrides config)");
    app.add_option("--seed", seed_override, "random seed (overrides config)")->each([&](const std::string&) {
        seed_given = true;
    });
    app.fallthrough();

    auto* build = app.add_subcommand("build-graph", "build weekly graphs, matrices, features, thresholds");
    auto* train = app.add_subcommand("train", "train the node classifier and write a checkpoint");

    std::string checkpoint = "out/checkpoint.json";
    std::string split = "test";
    auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint and write metrics.json");
    evaluate->add_option("--checkpoint", checkpoint, "model checkpoint path");
    evaluate->add_option("--split", split, "train | val | test | all");

    bool write_dot = false;
    int explain_week = 0;
    std::string explain_targets;
    auto* explain = app.add_subcommand("explain", "perturbation-based explanation of one week's predictions");
    explain->add_option("--checkpoint", checkpoint, "model checkpoint path");
    explain->add_option("--week", explain_week, "week to explain (default: last)");
    explain->add_option("--targets", explain_targets, "comma-separated student ids, or 'all'");
    explain->add_flag("--dot", write_dot, "also write explanation.dot");

    std::string what = "activity";
    std::string explanation_path = "out/explanation.json";
    auto* viz = app.add_subcommand("export-viz", "export visualization data (influence DOT / activity CSV)");
    viz->add_option("--what", what, "influence | activity")->required();
    viz->add_option("--explanation", explanation_path, "explanation.json path (for influence)");

    clgt::synth::SynthSpec synth_spec;
    auto* synth = app.add_subcommand("synth", "write a synthetic dataset shaped like the reference course");
    synth->add_option("--students", synth_spec.students, "student count");
    synth->add_option("--teams", synth_spec.teams, "team count");
    synth->add_option("--weeks", synth_spec.weeks, "course length in weeks");
    synth->add_option("--synth-seed", synth_spec.seed, "generator seed");

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig config = load_run_config(config_path);
        if (!out_override.empty()) config.out_dir = out_override;
        if (seed_given) config.seed = seed_override;
        if (explain_week > 0) config.explain_week = explain_week;
        if (!explain_targets.empty()) config.explain_targets = explain_targets;

        if (build->parsed()) return cmd_build_graph(config);
        if (train->parsed()) return cmd_train(config);
        if (evaluate->parsed()) return cmd_evaluate(config, checkpoint, split);
        if (explain->parsed()) return cmd_explain(config, checkpoint, write_dot);
        if (viz->parsed()) return cmd_export_viz(config, what, explanation_path);
        if (synth->parsed()) {
            synth_spec.seed = seed_given ? seed_override : synth_spec.seed;
            return cmd_synth(synth_spec, config.out_dir);
        }
    } catch (const clgt::Error& error) {
        std::cerr << "error: " << error.what() << "\n";
        return exit_code_for(error);
    } catch (const std::exception& error) {
        std::cerr << "error: " << error.what() << "\n";
        return 1;
    }
    return 0;
}
