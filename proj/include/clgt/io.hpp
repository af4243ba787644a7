#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "clgt/explainer.hpp"
#include "clgt/graphgen.hpp"
#include "clgt/metrics.hpp"
#include "clgt/model.hpp"
#include "clgt/records.hpp"
#include "clgt/train.hpp"

namespace clgt::io {

// interaction graphs
void write_graph_json(const std::string& path, const graphgen::WeeklyInteractionGraph& graph);
graphgen::WeeklyInteractionGraph read_graph_json(const std::string& path);

void write_thresholds_json(const std::string& path, const graphgen::LevelThresholds& thresholds);
graphgen::LevelThresholds read_thresholds_json(const std::string& path);

// one n×n value matrix per file
void write_matrix_csv(const std::string& path, const graphgen::InteractionMatrixSet& matrices,
                      graphgen::EdgeKind kind);
void write_features_csv(const std::string& path, const graphgen::NodeFeatureTable& features, const Roster& roster);

// model checkpoints: config + seed + flat parameter arrays. Doubles are
// serialized in shortest round-trip form, so a reload reproduces forward
// outputs bitwise.
void save_checkpoint(const std::string& path, const model::ClgtModel& m);
model::ClgtModel load_checkpoint(const std::string& path);

void write_history_csv(const std::string& path, const std::vector<train::EpochStats>& history);
void write_metrics_json(const std::string& path, const train::Metrics& metrics, std::uint64_t config_hash,
                        std::uint64_t seed);

struct ExplanationMeta {
    std::size_t samples = 0;
    double perturb_p = 0.0;
    double alpha = 0.0;
    int max_parents = 0;
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
    int week = 0;
};

void write_explanation_json(const std::string& path, const explainer::ExplanationGraph& graph, const Roster* roster,
                            const ExplanationMeta& meta);
explainer::ExplanationGraph read_explanation_json(const std::string& path);

// Fig. 3-style DOT: vertices colored per team, edge pen width scaled by weight
std::string influence_dot(const explainer::ExplanationGraph& graph, const Roster* roster);

// Fig. 4-style heatmap CSV: one row per student (teams contiguous), one
// column per week of outgoing influence mass
std::string activity_csv(const std::vector<std::vector<double>>& matrix, const Roster& roster);

std::uint64_t fnv1a(const std::string& text);

}  // namespace clgt::io
