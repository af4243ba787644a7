#pragma once

#include <string>
#include <vector>

#include "clgt/graphgen.hpp"
#include "clgt/records.hpp"
#include "clgt/train.hpp"

namespace clgt::pipeline {

struct Dataset {
    Roster roster;
    std::vector<CommitRecord> commits;
    std::vector<IssueRecord> issues;
    GradeTable grades;
    int weeks = 16;
};

struct Paths {
    std::string commits;
    std::string issues;
    std::string grades;
    std::string roster;
};

Dataset load(const Paths& paths, int weeks);

struct BuiltGraphs {
    std::vector<graphgen::WeeklyInteractionGraph> graphs;  // one per week, levels applied
    std::vector<graphgen::NodeFeatureTable> features;
    graphgen::LevelThresholds thresholds;
};

BuiltGraphs build_graphs(const Dataset& dataset, const graphgen::ScopeConfig& scope = {});

std::vector<train::Sample> make_samples(const Dataset& dataset, const BuiltGraphs& built, bool laplacian_pe = false,
                                        std::size_t pe_dim = 8);

// per-student, per-week sum of outgoing influence mass (the activity heatmap),
// rows following roster order
std::vector<std::vector<double>> activity_matrix(const BuiltGraphs& built, const Roster& roster);

}  // namespace clgt::pipeline
