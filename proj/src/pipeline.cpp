#include "clgt/pipeline.hpp"

#include "clgt/errors.hpp"
#include "clgt/ingest.hpp"

namespace clgt::pipeline {

Dataset load(const Paths& paths, int weeks) {
    Dataset data;
    data.weeks = weeks;
    data.roster = ingest::parse_roster(paths.roster);
    data.commits = ingest::parse_commits(paths.commits, &data.roster);
    data.issues = ingest::parse_issues(paths.issues, &data.roster);
    data.grades = ingest::parse_grades(paths.grades, &data.roster, weeks);
    return data;
}

BuiltGraphs build_graphs(const Dataset& dataset, const graphgen::ScopeConfig& scope) {
    BuiltGraphs built;
    const auto weekly_commits = ingest::section_by_week(dataset.commits, dataset.weeks);
    const auto weekly_issues = ingest::section_by_week(dataset.issues, dataset.weeks);

    static const std::vector<CommitRecord> no_commits;
    static const std::vector<IssueRecord> no_issues;
    for (int week = 1; week <= dataset.weeks; ++week) {
        const auto ci = weekly_commits.find(week);
        const auto ii = weekly_issues.find(week);
        auto graph = graphgen::build_weekly_graph(ci == weekly_commits.end() ? no_commits : ci->second,
                                                  ii == weekly_issues.end() ? no_issues : ii->second, dataset.roster,
                                                  scope);
        graph.week = week;  // empty weeks carry no record to infer it from
        built.graphs.push_back(std::move(graph));
        built.features.push_back(graphgen::build_node_features(ci == weekly_commits.end() ? no_commits : ci->second,
                                                               ii == weekly_issues.end() ? no_issues : ii->second,
                                                               dataset.roster, week));
    }
    built.thresholds = graphgen::compute_thresholds(built.graphs);
    for (auto& graph : built.graphs) graphgen::apply_thresholds(graph, built.thresholds);
    return built;
}

std::vector<train::Sample> make_samples(const Dataset& dataset, const BuiltGraphs& built, bool laplacian_pe,
                                        std::size_t pe_dim) {
    std::vector<train::Sample> samples;
    samples.reserve(built.graphs.size());
    for (std::size_t i = 0; i < built.graphs.size(); ++i) {
        train::Sample sample;
        sample.week = built.graphs[i].week;
        sample.inputs = model::make_inputs(built.graphs[i], built.features[i], laplacian_pe, pe_dim);
        sample.labels.assign(dataset.roster.size(), -1);
        sample.team_of_vertex.resize(dataset.roster.size());
        for (std::size_t v = 0; v < dataset.roster.size(); ++v) {
            sample.team_of_vertex[v] = dataset.roster.team_of_student(v);
            const auto it = dataset.grades.weekly.find({dataset.roster.students[v].first, sample.week});
            if (it != dataset.grades.weekly.end()) sample.labels[v] = static_cast<int>(it->second);
        }
        samples.push_back(std::move(sample));
    }
    return samples;
}

std::vector<std::vector<double>> activity_matrix(const BuiltGraphs& built, const Roster& roster) {
    std::vector<std::vector<double>> matrix(roster.size(), std::vector<double>(built.graphs.size(), 0.0));
    for (std::size_t w = 0; w < built.graphs.size(); ++w) {
        for (const auto& edge : built.graphs[w].edges)
            matrix[static_cast<std::size_t>(edge.src)][w] += edge.influence;
    }
    return matrix;
}

}  // namespace clgt::pipeline
