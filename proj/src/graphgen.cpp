#include "clgt/graphgen.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "clgt/errors.hpp"

namespace clgt::graphgen {

const char* to_string(EdgeKind kind) {
    switch (kind) {
        case EdgeKind::addition: return "addition";
        case EdgeKind::deletion: return "deletion";
        case EdgeKind::issue: return "issue";
    }
    return "?";
}

const char* to_string(Level level) {
    switch (level) {
        case Level::minor: return "minor";
        case Level::moderate: return "moderate";
        case Level::severe: return "severe";
    }
    return "?";
}

std::vector<double> normalize_influences(const std::vector<double>& values) {
    if (values.empty()) throw Error(errc::empty_input, "normalize_influences on empty sequence");
    double total = 0.0;
    for (double v : values) {
        if (!(v > 0.0)) throw Error(errc::non_positive_value, "influence values must be positive");
        total += v;
    }
    std::vector<double> shares;
    shares.reserve(values.size());
    for (double v : values) shares.push_back(v / total);
    return shares;
}

namespace {

int checked_student(const Roster& roster, const std::string& id) {
    const int idx = roster.student_index(id);
    if (idx < 0) throw Error(errc::unknown_student, "student '" + id + "' not in roster");
    return idx;
}

int checked_team(const Roster& roster, const std::string& id) {
    const int idx = roster.team_index(id);
    if (idx < 0) throw Error(errc::unknown_team, "team '" + id + "' not in roster");
    return idx;
}

// one normalization pool: aggregated raw amounts keyed by emitting entity
struct Pool {
    std::vector<std::pair<int, double>> entries;  // (key index into sources, raw sum)
};

}  // namespace

WeeklyInteractionGraph build_weekly_graph(const std::vector<CommitRecord>& week_commits,
                                          const std::vector<IssueRecord>& week_issues, const Roster& roster,
                                          const ScopeConfig& scope) {
    int week = 0;
    for (const auto& c : week_commits) {
        if (week == 0) week = c.week;
        if (c.week != week)
            throw Error(errc::week_out_of_range, "records span multiple weeks (" + std::to_string(week) + " and " +
                            std::to_string(c.week) + ")");
    }
    for (const auto& is : week_issues) {
        if (week == 0) week = is.week;
        if (is.week != week)
            throw Error(errc::week_out_of_range, "records span multiple weeks (" + std::to_string(week) + " and " +
                            std::to_string(is.week) + ")");
    }

    WeeklyInteractionGraph graph;
    graph.week = week;
    graph.vertices = roster.students;

    // Same-pair same-kind activity is summed before normalization. For
    // commits the pair set is "student -> every teammate", so the aggregation
    // key is the student; for issues it is (author, target team).
    const std::size_t n_teams = roster.teams.size();

    // addition / deletion pools
    for (int kind_idx = 0; kind_idx < 2; ++kind_idx) {
        const bool additions = (kind_idx == 0);
        std::map<std::pair<int, int>, double> sums;  // (scope key, student) -> raw lines
        for (const auto& c : week_commits) {
            const int sidx = checked_student(roster, c.student_id);
            const int tidx = checked_team(roster, c.team_id);
            const long lines = additions ? c.lines_added : c.lines_deleted;
            if (lines <= 0) continue;
            const int scope_key = scope.adddel_scope == NormScope::team_week ? tidx : 0;
            sums[{scope_key, sidx}] += static_cast<double>(lines);
        }
        // normalize within each scope key
        std::map<int, double> totals;
        for (const auto& [key, raw] : sums) totals[key.first] += raw;
        for (const auto& [key, raw] : sums) {
            const int sidx = key.second;
            const double influence = raw / totals[key.first];
            const int team = roster.team_of_student(static_cast<std::size_t>(sidx));
            for (int member : roster.team_members(team)) {
                if (member == sidx) continue;
                graph.edges.push_back({sidx, member, additions ? EdgeKind::addition : EdgeKind::deletion, influence,
                                       Level::minor});
            }
        }
    }

    // issue pool
    {
        std::map<std::pair<int, std::pair<int, int>>, double> sums;  // (scope, (author, target team)) -> severity
        for (const auto& is : week_issues) {
            const int aidx = checked_student(roster, is.author_id);
            const int atidx = checked_team(roster, is.author_team);
            const int ttidx = checked_team(roster, is.target_team);
            if (atidx == ttidx)
                throw Error(errc::self_team_issue, "issue by '" + is.author_id + "' targets own team");
            int scope_key = 0;
            if (scope.issue_scope == NormScope::team_week) scope_key = ttidx;
            sums[{scope_key, {aidx, ttidx}}] += is.severity;
        }
        std::map<int, double> totals;
        for (const auto& [key, raw] : sums) totals[key.first] += raw;
        for (const auto& [key, raw] : sums) {
            const double influence = raw / totals[key.first];
            const int author = key.second.first;
            const int target_team = key.second.second;
            for (int member : roster.team_members(target_team)) {
                if (member == author) continue;  // cannot happen for cross-team issues
                graph.edges.push_back({author, member, EdgeKind::issue, influence, Level::minor});
            }
        }
    }

    (void)n_teams;
    std::sort(graph.edges.begin(), graph.edges.end(), [](const InteractionEdge& a, const InteractionEdge& b) {
        return std::tie(a.kind, a.src, a.dst) < std::tie(b.kind, b.src, b.dst);
    });
    return graph;
}

LevelThresholds compute_thresholds(const std::vector<WeeklyInteractionGraph>& graphs) {
    LevelThresholds thresholds;
    for (int kind_idx = 0; kind_idx < 3; ++kind_idx) {
        std::vector<double> influences;
        for (const auto& g : graphs) {
            for (const auto& e : g.edges) {
                if (static_cast<int>(e.kind) == kind_idx && e.influence > 0.0) influences.push_back(e.influence);
            }
        }
        std::sort(influences.begin(), influences.end());
        std::vector<double> distinct = influences;
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        if (distinct.size() < 3) {
            // a kind with no edges at all never consults its cuts
            if (distinct.empty()) {
                thresholds.cuts[static_cast<std::size_t>(kind_idx)] = {0.0, 0.0};
                continue;
            }
            // degenerate tie case: every influence equal is allowed, both cuts collapse
            if (distinct.size() == 1) {
                thresholds.cuts[static_cast<std::size_t>(kind_idx)] = {distinct[0], distinct[0]};
                continue;
            }
            throw Error(errc::insufficient_data, std::string("kind '") +
                            to_string(static_cast<EdgeKind>(kind_idx)) +
                            "' has fewer than 3 distinct nonzero influences");
        }
        const std::size_t n = influences.size();
        auto quantile = [&](double q) {
            const auto rank = static_cast<std::size_t>(std::ceil(static_cast<double>(n) * q));
            return influences[std::max<std::size_t>(rank, 1) - 1];
        };
        thresholds.cuts[static_cast<std::size_t>(kind_idx)] = {quantile(1.0 / 3.0), quantile(2.0 / 3.0)};
    }
    return thresholds;
}

InteractionMatrixSet to_matrices(const WeeklyInteractionGraph& graph, const LevelThresholds& thresholds) {
    InteractionMatrixSet m;
    m.week = graph.week;
    m.n = graph.vertex_count();
    for (auto& v : m.values) v.assign(m.n * m.n, 0.0);
    for (auto& l : m.levels) l.assign(m.n * m.n, 0);
    for (const auto& e : graph.edges) {
        if (e.src == e.dst) throw Error(errc::bad_row, "self-loop edge in interaction graph");
        const std::size_t at = static_cast<std::size_t>(e.src) * m.n + static_cast<std::size_t>(e.dst);
        const auto k = static_cast<std::size_t>(e.kind);
        m.values[k][at] = e.influence;
        m.levels[k][at] = static_cast<int>(thresholds.classify(e.kind, e.influence));
    }
    return m;
}

std::vector<InteractionEdge> edges_from_matrices(const InteractionMatrixSet& matrices) {
    std::vector<InteractionEdge> edges;
    for (int kind_idx = 0; kind_idx < 3; ++kind_idx) {
        for (std::size_t src = 0; src < matrices.n; ++src) {
            for (std::size_t dst = 0; dst < matrices.n; ++dst) {
                const double v = matrices.values[static_cast<std::size_t>(kind_idx)][src * matrices.n + dst];
                if (v != 0.0) {
                    edges.push_back({static_cast<int>(src), static_cast<int>(dst),
                                     static_cast<EdgeKind>(kind_idx), v,
                                     static_cast<Level>(matrices.levels[static_cast<std::size_t>(kind_idx)]
                                                                       [src * matrices.n + dst])});
                }
            }
        }
    }
    std::sort(edges.begin(), edges.end(), [](const InteractionEdge& a, const InteractionEdge& b) {
        return std::tie(a.kind, a.src, a.dst) < std::tie(b.kind, b.src, b.dst);
    });
    return edges;
}

void apply_thresholds(WeeklyInteractionGraph& graph, const LevelThresholds& thresholds) {
    for (auto& e : graph.edges) e.level = thresholds.classify(e.kind, e.influence);
}

NodeFeatureTable build_node_features(const std::vector<CommitRecord>& week_commits,
                                     const std::vector<IssueRecord>& week_issues, const Roster& roster, int week) {
    constexpr std::size_t kActivityFeatures = 8;
    const std::size_t n = roster.size();
    const std::size_t n_teams = roster.teams.size();

    NodeFeatureTable table;
    table.week = week;
    table.rows = n;
    table.cols = kActivityFeatures + n_teams;
    table.feature_names = {"doc_lines_added",  "doc_lines_deleted",  "code_lines_added", "code_lines_deleted",
                           "commit_count",     "issues_raised",      "mean_severity_raised", "issues_received"};
    for (std::size_t t = 0; t < n_teams; ++t) table.feature_names.push_back("team_" + roster.teams[t]);
    table.features.assign(n * table.cols, 0.0);

    std::vector<std::array<double, kActivityFeatures>> raw(n, std::array<double, kActivityFeatures>{});
    std::vector<int> issue_counts(n, 0);
    for (const auto& c : week_commits) {
        const int sidx = checked_student(roster, c.student_id);
        auto& r = raw[static_cast<std::size_t>(sidx)];
        if (c.file_kind == FileKind::doc) {
            r[0] += static_cast<double>(c.lines_added);
            r[1] += static_cast<double>(c.lines_deleted);
        } else {
            r[2] += static_cast<double>(c.lines_added);
            r[3] += static_cast<double>(c.lines_deleted);
        }
        r[4] += 1.0;
    }
    for (const auto& is : week_issues) {
        const int aidx = checked_student(roster, is.author_id);
        raw[static_cast<std::size_t>(aidx)][5] += 1.0;
        raw[static_cast<std::size_t>(aidx)][6] += is.severity;
        ++issue_counts[static_cast<std::size_t>(aidx)];
        const int ttidx = checked_team(roster, is.target_team);
        for (int member : roster.team_members(ttidx)) raw[static_cast<std::size_t>(member)][7] += 1.0;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (issue_counts[i] > 0) raw[i][6] /= static_cast<double>(issue_counts[i]);
    }

    // z-normalize per column over the week's population; zero variance -> 0
    for (std::size_t c = 0; c < kActivityFeatures; ++c) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += raw[i][c];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = raw[i][c] - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);
        const double sd = std::sqrt(var);
        for (std::size_t i = 0; i < n; ++i) {
            table.features[i * table.cols + c] = sd > 0.0 ? (raw[i][c] - mean) / sd : 0.0;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        const int team = roster.team_of_student(i);
        table.features[i * table.cols + kActivityFeatures + static_cast<std::size_t>(team)] = 1.0;
    }
    return table;
}

}  // namespace clgt::graphgen
