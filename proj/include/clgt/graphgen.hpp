#pragma once

#include <array>
#include <string>
#include <vector>

#include "clgt/records.hpp"

namespace clgt::graphgen {

enum class EdgeKind { addition = 0, deletion = 1, issue = 2 };
enum class Level { minor = 1, moderate = 2, severe = 3 };

const char* to_string(EdgeKind kind);
const char* to_string(Level level);

struct InteractionEdge {
    int src = 0;
    int dst = 0;
    EdgeKind kind = EdgeKind::addition;
    double influence = 0.0;     // normalized share, in (0, 1]
    Level level = Level::minor;  // assigned once thresholds are known

    bool operator==(const InteractionEdge&) const = default;
};

struct WeeklyInteractionGraph {
    int week = 0;
    // full roster, including inactive students; index i mirrors roster order
    std::vector<std::pair<std::string, std::string>> vertices;  // (student_id, team_id)
    std::vector<InteractionEdge> edges;

    std::size_t vertex_count() const { return vertices.size(); }
};

struct InteractionMatrixSet {
    int week = 0;
    std::size_t n = 0;
    // row = source vertex, column = destination; diagonal always zero
    std::array<std::vector<double>, 3> values;  // indexed by EdgeKind
    std::array<std::vector<int>, 3> levels;     // 0 = absent, 1..3 per Level

    double value(EdgeKind kind, int src, int dst) const {
        return values[static_cast<std::size_t>(kind)][static_cast<std::size_t>(src) * n + dst];
    }
    int level(EdgeKind kind, int src, int dst) const {
        return levels[static_cast<std::size_t>(kind)][static_cast<std::size_t>(src) * n + dst];
    }
};

struct NodeFeatureTable {
    int week = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> features;  // row-major rows×cols
    std::vector<std::string> feature_names;

    double at(std::size_t r, std::size_t c) const { return features[r * cols + c]; }
};

struct LevelThresholds {
    // per kind: value <= t1 -> minor, <= t2 -> moderate, else severe.
    // When t1 == t2 the minor/moderate boundary collapses and the minor
    // band is empty (degenerate all-equal data classes as moderate).
    struct Cut {
        double t1 = 0.0;
        double t2 = 0.0;
    };
    std::array<Cut, 3> cuts;  // indexed by EdgeKind

    Level classify(EdgeKind kind, double influence) const {
        const Cut& c = cuts[static_cast<std::size_t>(kind)];
        if (c.t1 < c.t2 && influence <= c.t1) return Level::minor;
        if (influence <= c.t2) return Level::moderate;
        return Level::severe;
    }
};

enum class NormScope { team_week, week_global };

struct ScopeConfig {
    // commit visibility is team-local, issue review is course-wide
    NormScope adddel_scope = NormScope::team_week;
    NormScope issue_scope = NormScope::week_global;
};

// share_i = value_i / sum(values); order preserved, output sums to 1
std::vector<double> normalize_influences(const std::vector<double>& values);

WeeklyInteractionGraph build_weekly_graph(const std::vector<CommitRecord>& week_commits,
                                          const std::vector<IssueRecord>& week_issues, const Roster& roster,
                                          const ScopeConfig& scope = {});

// Empirical 1/3, 2/3 quantiles of nonzero influences per kind, pooled over
// all weeks. Quantile convention: sorted[ceil(n*q) - 1].
LevelThresholds compute_thresholds(const std::vector<WeeklyInteractionGraph>& graphs);

InteractionMatrixSet to_matrices(const WeeklyInteractionGraph& graph, const LevelThresholds& thresholds);

// Reads nonzero matrix entries back into an edge list (inverse of to_matrices).
std::vector<InteractionEdge> edges_from_matrices(const InteractionMatrixSet& matrices);

void apply_thresholds(WeeklyInteractionGraph& graph, const LevelThresholds& thresholds);

NodeFeatureTable build_node_features(const std::vector<CommitRecord>& week_commits,
                                     const std::vector<IssueRecord>& week_issues, const Roster& roster, int week);

}  // namespace clgt::graphgen
