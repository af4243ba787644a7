#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "clgt/errors.hpp"
#include "clgt/graphgen.hpp"
#include "clgt/io.hpp"
#include "clgt/pipeline.hpp"
#include "clgt/synth.hpp"
#include "support/testutil.hpp"

using namespace clgt;
using namespace clgt::graphgen;

namespace {

// unique (source -> influence) pairs of one kind
std::map<int, double> source_influences(const WeeklyInteractionGraph& g, EdgeKind kind) {
    std::map<int, double> out;
    for (const auto& e : g.edges)
        if (e.kind == kind) out[e.src] = e.influence;
    return out;
}

WeeklyInteractionGraph graph_with_influences(const std::vector<double>& values, EdgeKind kind) {
    WeeklyInteractionGraph g;
    g.week = 1;
    const int n = static_cast<int>(values.size()) + 1;
    for (int i = 0; i < n; ++i) g.vertices.emplace_back("S" + std::to_string(i), "T0");
    for (std::size_t i = 0; i < values.size(); ++i)
        g.edges.push_back({static_cast<int>(i), n - 1, kind, values[i], Level::minor});
    return g;
}

}  // namespace

TEST_CASE("normalize_influences matches the ratio formula") {
    CHECK(normalize_influences({42.0}) == std::vector<double>{1.0});

    const auto two = normalize_influences({30.0, 10.0});
    CHECK(two[0] == doctest::Approx(0.75));
    CHECK(two[1] == doctest::Approx(0.25));

    const auto four = normalize_influences({5.0, 5.0, 5.0, 5.0});
    for (double v : four) CHECK(v == doctest::Approx(0.25));

    CHECK_THROWS_WITH_AS(normalize_influences({}), doctest::Contains("EmptyInput"), Error);
    CHECK_THROWS_WITH_AS(normalize_influences({1.0, 0.0}), doctest::Contains("NonPositiveValue"), Error);
    CHECK_THROWS_WITH_AS(normalize_influences({1.0, -2.0}), doctest::Contains("NonPositiveValue"), Error);
}

TEST_CASE("normalize_influences properties: sum, order, scale invariance") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> values;
        const std::size_t n = 1 + rng.index(20);
        for (std::size_t i = 0; i < n; ++i) values.push_back(0.01 + rng.uniform() * 100.0);
        const auto shares = normalize_influences(values);
        double sum = 0.0;
        for (double s : shares) sum += s;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
        // scale invariance
        std::vector<double> scaled = values;
        for (double& v : scaled) v *= 4.0;  // power of two keeps division exact
        CHECK(normalize_influences(scaled) == shares);
        // order: larger raw value never gets the smaller share
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (values[i] > values[j]) CHECK(shares[i] >= shares[j]);
    }
}

TEST_CASE("single commit spreads to all teammates with unit influence") {
    const auto roster = testutil::toy_roster();  // t1 has s1..s4
    const auto graph = build_weekly_graph({testutil::commit("s1", "t1", 1, FileKind::doc, 20, 0)}, {}, roster);

    CHECK(graph.vertex_count() == roster.size());  // inactive students stay
    REQUIRE(graph.edges.size() == 3);
    std::set<int> dsts;
    for (const auto& e : graph.edges) {
        CHECK(e.kind == EdgeKind::addition);
        CHECK(e.src == 0);
        CHECK(e.influence == doctest::Approx(1.0));
        dsts.insert(e.dst);
    }
    CHECK(dsts == std::set<int>{1, 2, 3});
}

TEST_CASE("two commits split influence by the ratio formula") {
    const auto roster = testutil::toy_roster();
    const auto graph = build_weekly_graph({testutil::commit("s1", "t1", 1, FileKind::doc, 30, 0),
                                           testutil::commit("s2", "t1", 1, FileKind::doc, 10, 0)},
                                          {}, roster);
    const auto shares = source_influences(graph, EdgeKind::addition);
    CHECK(shares.at(0) == doctest::Approx(0.75));
    CHECK(shares.at(1) == doctest::Approx(0.25));
    // each source still reaches all three teammates
    CHECK(graph.edges.size() == 6);
}

TEST_CASE("issue edges cross the team boundary with normalized severity") {
    const auto roster = testutil::toy_roster();  // t2 = s5..s7, t1 has four members
    const auto graph = build_weekly_graph({}, {testutil::issue("s5", "t2", "t1", 2, 3.0)}, roster);
    REQUIRE(graph.edges.size() == 4);
    for (const auto& e : graph.edges) {
        CHECK(e.kind == EdgeKind::issue);
        CHECK(e.src == 4);
        CHECK(e.influence == doctest::Approx(1.0));
        CHECK(roster.students[static_cast<std::size_t>(e.dst)].second == "t1");
    }
}

TEST_CASE("same-pair same-kind events are summed before normalization") {
    const auto roster = testutil::toy_roster();
    const auto graph = build_weekly_graph({testutil::commit("s1", "t1", 1, FileKind::doc, 10, 0),
                                           testutil::commit("s1", "t1", 1, FileKind::code, 30, 0),
                                           testutil::commit("s2", "t1", 1, FileKind::doc, 40, 0)},
                                          {}, roster);
    const auto shares = source_influences(graph, EdgeKind::addition);
    CHECK(shares.at(0) == doctest::Approx(0.5));  // 10+30 of 80
    CHECK(shares.at(1) == doctest::Approx(0.5));
    // one addition edge per (src, dst), not one per commit
    std::map<std::pair<int, int>, int> multiplicity;
    for (const auto& e : graph.edges) multiplicity[{e.src, e.dst}] += 1;
    for (const auto& [pair, count] : multiplicity) {
        (void)pair;
        CHECK(count == 1);
    }
}

TEST_CASE("deletions form their own normalization pool") {
    const auto roster = testutil::toy_roster();
    const auto graph = build_weekly_graph({testutil::commit("s1", "t1", 1, FileKind::doc, 100, 10),
                                           testutil::commit("s2", "t1", 1, FileKind::code, 100, 30)},
                                          {}, roster);
    const auto add = source_influences(graph, EdgeKind::addition);
    const auto del = source_influences(graph, EdgeKind::deletion);
    CHECK(add.at(0) == doctest::Approx(0.5));
    CHECK(del.at(0) == doctest::Approx(0.25));
    CHECK(del.at(1) == doctest::Approx(0.75));
}

TEST_CASE("scope config switches the commit normalization pool to the whole week") {
    const auto roster = testutil::toy_roster();  // teams t1 (4) and t2 (3)
    const std::vector<CommitRecord> commits{testutil::commit("s1", "t1", 1, FileKind::doc, 30, 0),
                                            testutil::commit("s5", "t2", 1, FileKind::doc, 10, 0)};

    // default: each team is its own pool, both students take the whole mass
    const auto per_team = build_weekly_graph(commits, {}, roster);
    CHECK(source_influences(per_team, EdgeKind::addition).at(0) == doctest::Approx(1.0));
    CHECK(source_influences(per_team, EdgeKind::addition).at(4) == doctest::Approx(1.0));

    // week-global pool: shares follow the 30/10 ratio across teams
    ScopeConfig global;
    global.adddel_scope = NormScope::week_global;
    const auto pooled = build_weekly_graph(commits, {}, roster, global);
    CHECK(source_influences(pooled, EdgeKind::addition).at(0) == doctest::Approx(0.75));
    CHECK(source_influences(pooled, EdgeKind::addition).at(4) == doctest::Approx(0.25));
    // edges still stay within each author's team
    for (const auto& e : pooled.edges)
        CHECK(roster.students[static_cast<std::size_t>(e.src)].second ==
              roster.students[static_cast<std::size_t>(e.dst)].second);
}

TEST_CASE("activity export orders teams contiguously") {
    // roster deliberately interleaves teams
    clgt::Roster roster;
    roster.students = {{"a", "T1"}, {"b", "T2"}, {"c", "T1"}, {"d", "T2"}};
    roster.teams = {"T1", "T2"};
    roster.rebuild_lookups();

    pipeline::Dataset dataset;
    dataset.roster = roster;
    dataset.weeks = 2;
    dataset.commits = {testutil::commit("a", "T1", 1, FileKind::doc, 10, 5),
                       testutil::commit("b", "T2", 1, FileKind::code, 20, 5),
                       testutil::commit("c", "T1", 2, FileKind::doc, 30, 5),
                       testutil::commit("d", "T2", 2, FileKind::code, 40, 5)};
    const auto built = pipeline::build_graphs(dataset);
    const auto matrix = pipeline::activity_matrix(built, roster);
    REQUIRE(matrix.size() == 4);
    REQUIRE(matrix[0].size() == 2);
    // student a emits 2 edges (addition+deletion to teammate c) in week 1
    CHECK(matrix[0][0] > 0.0);
    CHECK(matrix[0][1] == 0.0);

    const std::string csv = clgt::io::activity_csv(matrix, roster);
    const auto a_pos = csv.find("\na,");
    const auto b_pos = csv.find("\nb,");
    const auto c_pos = csv.find("\nc,");
    const auto d_pos = csv.find("\nd,");
    CHECK(a_pos < c_pos);  // T1 block first
    CHECK(c_pos < b_pos);  // then T2
    CHECK(b_pos < d_pos);
}

TEST_CASE("build_weekly_graph validates inputs") {
    const auto roster = testutil::toy_roster();
    CHECK_THROWS_WITH_AS(build_weekly_graph({testutil::commit("zz", "t1", 1, FileKind::doc, 5, 0)}, {}, roster),
                         doctest::Contains("UnknownStudent"), Error);
    CHECK_THROWS_WITH_AS(build_weekly_graph({testutil::commit("s1", "tX", 1, FileKind::doc, 5, 0)}, {}, roster),
                         doctest::Contains("UnknownTeam"), Error);
    CHECK_THROWS_WITH_AS(build_weekly_graph({testutil::commit("s1", "t1", 1, FileKind::doc, 5, 0),
                                             testutil::commit("s2", "t1", 2, FileKind::doc, 5, 0)},
                                            {}, roster),
                         doctest::Contains("WeekOutOfRange"), Error);
}

TEST_CASE("thresholds are empirical terciles of nonzero influences") {
    std::vector<WeeklyInteractionGraph> graphs;
    const std::vector<double> nine{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    for (int k = 0; k < 3; ++k) graphs.push_back(graph_with_influences(nine, static_cast<EdgeKind>(k)));

    const auto thresholds = compute_thresholds(graphs);
    for (int k = 0; k < 3; ++k) {
        CHECK(thresholds.cuts[static_cast<std::size_t>(k)].t1 == doctest::Approx(0.3));
        CHECK(thresholds.cuts[static_cast<std::size_t>(k)].t2 == doctest::Approx(0.6));
    }
    CHECK(thresholds.classify(EdgeKind::addition, 0.25) == Level::minor);
    CHECK(thresholds.classify(EdgeKind::addition, 0.3) == Level::minor);
    CHECK(thresholds.classify(EdgeKind::addition, 0.45) == Level::moderate);
    CHECK(thresholds.classify(EdgeKind::addition, 0.61) == Level::severe);
}

TEST_CASE("degenerate threshold inputs") {
    // all influences equal: cuts collapse, everything counts as moderate
    std::vector<WeeklyInteractionGraph> equal;
    for (int k = 0; k < 3; ++k) equal.push_back(graph_with_influences({0.5, 0.5, 0.5}, static_cast<EdgeKind>(k)));
    const auto collapsed = compute_thresholds(equal);
    CHECK(collapsed.cuts[0].t1 == doctest::Approx(0.5));
    CHECK(collapsed.cuts[0].t2 == doctest::Approx(0.5));
    CHECK(collapsed.classify(EdgeKind::addition, 0.5) == Level::moderate);

    // two distinct values only: not enough to place two cuts
    std::vector<WeeklyInteractionGraph> two;
    for (int k = 0; k < 3; ++k) two.push_back(graph_with_influences({0.25, 0.75}, static_cast<EdgeKind>(k)));
    CHECK_THROWS_WITH_AS(compute_thresholds(two), doctest::Contains("InsufficientData"), Error);

    // a kind with no edges anywhere gets trivial cuts; the other kinds still work
    std::vector<WeeklyInteractionGraph> no_issues{
        graph_with_influences({0.1, 0.4, 0.9}, EdgeKind::addition),
        graph_with_influences({0.2, 0.5, 0.8}, EdgeKind::deletion)};
    const auto partial = compute_thresholds(no_issues);
    CHECK(partial.cuts[static_cast<std::size_t>(EdgeKind::issue)].t2 == 0.0);
    CHECK(partial.cuts[static_cast<std::size_t>(EdgeKind::addition)].t1 == doctest::Approx(0.1));
}

TEST_CASE("to_matrices applies the threshold rule per entry") {
    WeeklyInteractionGraph g;
    g.week = 5;
    for (int i = 0; i < 3; ++i) g.vertices.emplace_back("S" + std::to_string(i), "T0");
    g.edges.push_back({1, 2, EdgeKind::issue, 0.6, Level::minor});

    LevelThresholds thresholds;
    for (auto& cut : thresholds.cuts) cut = {0.3, 0.5};

    const auto m = to_matrices(g, thresholds);
    CHECK(m.value(EdgeKind::issue, 1, 2) == doctest::Approx(0.6));
    CHECK(m.level(EdgeKind::issue, 1, 2) == 3);  // severe
    // everything else, including other kinds, stays zero
    double total = 0.0;
    for (const auto& values : m.values)
        for (double v : values) total += v;
    CHECK(total == doctest::Approx(0.6));
}

TEST_CASE("empty graph gives three zero matrices") {
    WeeklyInteractionGraph g;
    g.week = 1;
    for (int i = 0; i < 4; ++i) g.vertices.emplace_back("S" + std::to_string(i), "T0");
    const auto m = to_matrices(g, LevelThresholds{});
    for (const auto& values : m.values)
        for (double v : values) CHECK(v == 0.0);
    for (const auto& levels : m.levels)
        for (int l : levels) CHECK(l == 0);
}

TEST_CASE("full synthetic course produces 48 matrices") {
    synth::SynthSpec spec;
    const auto data = synth::generate(spec);
    pipeline::Dataset dataset{data.roster, data.commits, data.issues, data.grades, spec.weeks};
    const auto built = pipeline::build_graphs(dataset);
    REQUIRE(built.graphs.size() == 16);
    std::size_t matrices = 0;
    for (const auto& g : built.graphs) {
        const auto m = to_matrices(g, built.thresholds);
        matrices += m.values.size();
        for (std::size_t i = 0; i < m.n; ++i) {
            for (const auto& values : m.values) CHECK(values[i * m.n + i] == 0.0);
        }
    }
    CHECK(matrices == 48);
}

TEST_CASE("graph to matrix round-trip is exact on random weeks") {
    Rng rng(21);
    for (int trial = 0; trial < 25; ++trial) {
        const auto week = testutil::random_week(rng);
        auto graph = build_weekly_graph(week.commits, week.issues, week.roster);
        LevelThresholds thresholds;
        for (auto& cut : thresholds.cuts) cut = {0.25, 0.75};
        apply_thresholds(graph, thresholds);
        const auto matrices = to_matrices(graph, thresholds);
        const auto edges = edges_from_matrices(matrices);
        CHECK(edges == graph.edges);  // build_weekly_graph sorts the same way
    }
}

TEST_CASE("influence pools sum to one per kind and scope") {
    Rng rng(37);
    for (int trial = 0; trial < 30; ++trial) {
        const auto week = testutil::random_week(rng);
        const auto graph = build_weekly_graph(week.commits, week.issues, week.roster);

        // addition and deletion normalize per team
        for (const EdgeKind kind : {EdgeKind::addition, EdgeKind::deletion}) {
            std::map<int, std::map<int, double>> per_team;  // team -> src -> influence
            for (const auto& e : graph.edges) {
                if (e.kind != kind) continue;
                const int team = week.roster.team_of_student(static_cast<std::size_t>(e.src));
                per_team[team][e.src] = e.influence;
            }
            for (const auto& [team, sources] : per_team) {
                (void)team;
                double sum = 0.0;
                for (const auto& [src, inf] : sources) {
                    (void)src;
                    sum += inf;
                }
                CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
            }
        }
        // issues normalize globally per week over (author, target team) pairs
        std::map<std::pair<int, int>, double> issue_pairs;
        for (const auto& e : graph.edges) {
            if (e.kind != EdgeKind::issue) continue;
            const int team = week.roster.team_of_student(static_cast<std::size_t>(e.dst));
            issue_pairs[{e.src, team}] = e.influence;
        }
        if (!issue_pairs.empty()) {
            double sum = 0.0;
            for (const auto& [key, inf] : issue_pairs) {
                (void)key;
                sum += inf;
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
        }
        // no self loops anywhere
        for (const auto& e : graph.edges) CHECK(e.src != e.dst);
    }
}

TEST_CASE("monotonicity: more raw lines never means less influence") {
    Rng rng(53);
    for (int trial = 0; trial < 20; ++trial) {
        const auto week = testutil::random_week(rng);
        const auto graph = build_weekly_graph(week.commits, week.issues, week.roster);

        std::map<int, double> raw_added;
        for (const auto& c : week.commits)
            raw_added[week.roster.student_index(c.student_id)] += static_cast<double>(c.lines_added);
        const auto shares = source_influences(graph, EdgeKind::addition);
        for (const auto& [a, sa] : shares) {
            for (const auto& [b, sb] : shares) {
                if (week.roster.team_of_student(static_cast<std::size_t>(a)) !=
                    week.roster.team_of_student(static_cast<std::size_t>(b)))
                    continue;
                if (raw_added[a] > raw_added[b]) CHECK(sa >= sb);
            }
        }
    }
}

TEST_CASE("node features: z-scores, zero-variance rule, team one-hot") {
    clgt::Roster roster;
    roster.students = {{"a", "T0"}, {"b", "T0"}};
    roster.teams = {"T0"};
    roster.rebuild_lookups();

    // commit counts {2, 4} -> z-scores {-1, +1} (population std)
    std::vector<CommitRecord> commits;
    for (int i = 0; i < 2; ++i) commits.push_back(testutil::commit("a", "T0", 1, FileKind::doc, 10, 0));
    for (int i = 0; i < 4; ++i) commits.push_back(testutil::commit("b", "T0", 1, FileKind::doc, 10, 0));
    const auto table = build_node_features(commits, {}, roster, 1);
    REQUIRE(table.cols == 8 + 1);
    const std::size_t commit_col = 4;
    CHECK(table.at(0, commit_col) == doctest::Approx(-1.0));
    CHECK(table.at(1, commit_col) == doctest::Approx(1.0));
    CHECK(table.at(0, 0) == doctest::Approx(-1.0));  // doc lines move with commit count here

    // identical activity -> all-zero z-scores
    std::vector<CommitRecord> same;
    same.push_back(testutil::commit("a", "T0", 1, FileKind::code, 7, 3));
    same.push_back(testutil::commit("b", "T0", 1, FileKind::code, 7, 3));
    const auto flat = build_node_features(same, {}, roster, 1);
    for (std::size_t c = 0; c < 8; ++c) {
        CHECK(flat.at(0, c) == 0.0);
        CHECK(flat.at(1, c) == 0.0);
    }
    CHECK(flat.at(0, 8) == 1.0);  // team one-hot survives

    // a student with no records at all still gets finite features
    const auto idle = build_node_features({testutil::commit("a", "T0", 1, FileKind::doc, 5, 0)}, {}, roster, 1);
    for (std::size_t c = 0; c < idle.cols; ++c) CHECK(std::isfinite(idle.at(1, c)));
    CHECK(idle.at(1, 8) == 1.0);

    CHECK_THROWS_WITH_AS(build_node_features({testutil::commit("zz", "T0", 1, FileKind::doc, 5, 0)}, {}, roster, 1),
                         doctest::Contains("UnknownStudent"), Error);
}

TEST_CASE("feature width is fixed across weeks") {
    synth::SynthSpec spec;
    spec.students = 20;
    spec.teams = 4;
    spec.weeks = 6;
    const auto data = synth::generate(spec);
    pipeline::Dataset dataset{data.roster, data.commits, data.issues, data.grades, spec.weeks};
    const auto built = pipeline::build_graphs(dataset);
    REQUIRE(built.features.size() == 6);
    for (const auto& f : built.features) {
        CHECK(f.cols == built.features[0].cols);
        for (double v : f.features) CHECK(std::isfinite(v));
    }
}
