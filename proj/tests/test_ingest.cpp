#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "clgt/errors.hpp"
#include "clgt/ingest.hpp"
#include "clgt/synth.hpp"
#include "support/testutil.hpp"

using namespace clgt;
using testutil::TempDir;

namespace {

const char* kCommitHeader = "student_id,team_id,week,timestamp,file_kind,lines_added,lines_deleted\n";
const char* kIssueHeader = "author_id,author_team,target_team,week,timestamp,severity\n";

errc code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return errc::io_error;
}

}  // namespace

TEST_CASE("parse_commits reads well-formed rows in order") {
    TempDir dir;
    const auto path = testutil::write_file(dir, "commits.csv",
                                           std::string(kCommitHeader) +
                                               "s1,t1,1,2021-03-01T10:00:00Z,doc,20,0\n"
                                               "s2,t1,2,2021-03-08T11:00:00Z,code,0,7\n");
    const auto records = ingest::parse_commits(path);
    REQUIRE(records.size() == 2);
    CHECK(records[0].student_id == "s1");
    CHECK(records[0].file_kind == FileKind::doc);
    CHECK(records[0].lines_added == 20);
    CHECK(records[1].week == 2);
    CHECK(records[1].lines_deleted == 7);
    CHECK(records[1].file_kind == FileKind::code);

    // same bytes parse to the identical sequence
    CHECK(ingest::parse_commits(path) == records);
}

TEST_CASE("parse_commits on an empty file with a valid header") {
    TempDir dir;
    const auto path = testutil::write_file(dir, "commits.csv", kCommitHeader);
    CHECK(ingest::parse_commits(path).empty());
}

TEST_CASE("parse_commits rejects zero-change and negative commits") {
    TempDir dir;
    const auto zero = testutil::write_file(dir, "zero.csv",
                                           std::string(kCommitHeader) + "s1,t1,1,2021-03-01T10:00:00Z,doc,0,0\n");
    CHECK(code_of([&] { ingest::parse_commits(zero); }) == errc::negative_line_count);

    const auto negative = testutil::write_file(dir, "neg.csv",
                                               std::string(kCommitHeader) + "s1,t1,1,2021-03-01T10:00:00Z,doc,-3,1\n");
    CHECK(code_of([&] { ingest::parse_commits(negative); }) == errc::negative_line_count);
}

TEST_CASE("parse_commits structural errors name the offending row") {
    TempDir dir;
    const auto missing = testutil::write_file(dir, "m.csv", "student_id,team_id,week\ns1,t1,1\n");
    CHECK(code_of([&] { ingest::parse_commits(missing); }) == errc::missing_column);

    const auto bad_kind = testutil::write_file(dir, "k.csv",
                                               std::string(kCommitHeader) + "s1,t1,1,2021-03-01,video,1,0\n");
    try {
        ingest::parse_commits(bad_kind);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.code() == errc::bad_enum_value);
        CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    }
}

TEST_CASE("parse_commits validates against the roster when given") {
    TempDir dir;
    const auto roster = testutil::toy_roster();
    const auto ghost = testutil::write_file(dir, "g.csv",
                                            std::string(kCommitHeader) + "zz,t1,1,2021-03-01,doc,5,0\n");
    CHECK(code_of([&] { ingest::parse_commits(ghost, &roster); }) == errc::unknown_student);

    const auto wrong_team = testutil::write_file(dir, "w.csv",
                                                 std::string(kCommitHeader) + "s1,t2,1,2021-03-01,doc,5,0\n");
    CHECK(code_of([&] { ingest::parse_commits(wrong_team, &roster); }) == errc::unknown_team);
}

TEST_CASE("parse_issues round-trips a single valid row") {
    TempDir dir;
    const auto path = testutil::write_file(dir, "issues.csv",
                                           std::string(kIssueHeader) + "s1,t1,t2,3,2021-03-20T09:30:00Z,2.5\n");
    const auto records = ingest::parse_issues(path);
    REQUIRE(records.size() == 1);
    CHECK(records[0].author_id == "s1");
    CHECK(records[0].author_team == "t1");
    CHECK(records[0].target_team == "t2");
    CHECK(records[0].week == 3);
    CHECK(records[0].timestamp == "2021-03-20T09:30:00Z");
    CHECK(records[0].severity == doctest::Approx(2.5));
}

TEST_CASE("parse_issues rejects non-positive severities and self-team reviews") {
    TempDir dir;
    const auto zero = testutil::write_file(dir, "z.csv", std::string(kIssueHeader) + "s1,t1,t2,3,2021-03-20,0\n");
    CHECK(code_of([&] { ingest::parse_issues(zero); }) == errc::non_positive_severity);

    const auto self = testutil::write_file(dir, "s.csv", std::string(kIssueHeader) + "s1,t1,t1,3,2021-03-20,2\n");
    CHECK(code_of([&] { ingest::parse_issues(self); }) == errc::self_team_issue);
}

TEST_CASE("parse_issues validates authorship against the roster") {
    TempDir dir;
    const auto roster = testutil::toy_roster();  // s1 belongs to t1
    const auto ghost = testutil::write_file(dir, "g.csv", std::string(kIssueHeader) + "zz,t1,t2,3,2021-03-20,2\n");
    CHECK(code_of([&] { ingest::parse_issues(ghost, &roster); }) == errc::unknown_student);

    const auto wrong = testutil::write_file(dir, "w.csv", std::string(kIssueHeader) + "s1,t2,t1,3,2021-03-20,2\n");
    CHECK(code_of([&] { ingest::parse_issues(wrong, &roster); }) == errc::unknown_team);
}

TEST_CASE("parse_grades counts 75 students x 16 weeks + finals") {
    synth::SynthSpec spec;
    const auto data = synth::generate(spec);
    TempDir dir;
    synth::write_csv(data, dir.path().string());

    const auto grades = ingest::parse_grades(dir.file("grades.csv"), &data.roster, spec.weeks);
    CHECK(grades.weekly.size() == 75u * 16u);
    CHECK(grades.final_grades.size() == 75u);
    CHECK(grades.weekly.size() + grades.final_grades.size() == 75u * 17u);
}

TEST_CASE("parse_grades error paths") {
    TempDir dir;
    const auto bad = testutil::write_file(dir, "b.csv", "student_id,week,grade\ns1,1,D\n");
    CHECK(code_of([&] { ingest::parse_grades(bad); }) == errc::bad_grade);

    const auto dup = testutil::write_file(dir, "d.csv", "student_id,week,grade\ns1,1,A\ns1,1,B\n");
    CHECK(code_of([&] { ingest::parse_grades(dup); }) == errc::duplicate_cell);

    const auto roster = testutil::toy_roster();
    const auto sparse = testutil::write_file(dir, "m.csv", "student_id,week,grade\ns1,1,A\n");
    CHECK(code_of([&] { ingest::parse_grades(sparse, &roster, 1); }) == errc::missing_grade);
}

TEST_CASE("section_by_week partitions records") {
    std::vector<CommitRecord> records{testutil::commit("s1", "t1", 1, FileKind::doc, 5, 0),
                                      testutil::commit("s2", "t1", 1, FileKind::code, 3, 1),
                                      testutil::commit("s3", "t1", 3, FileKind::doc, 2, 2)};
    const auto buckets = ingest::section_by_week(records, 16);
    REQUIRE(buckets.size() == 2);
    CHECK(buckets.at(1).size() == 2);
    CHECK(buckets.at(3).size() == 1);
    CHECK(buckets.count(2) == 0);

    CHECK(ingest::section_by_week(std::vector<CommitRecord>{}, 16).empty());

    records[0].week = 0;
    CHECK(code_of([&] { ingest::section_by_week(records, 16); }) == errc::week_out_of_range);
    records[0].week = 17;
    CHECK(code_of([&] { ingest::section_by_week(records, 16); }) == errc::week_out_of_range);
}

TEST_CASE("section_by_week is a partition on random inputs") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<CommitRecord> records;
        const std::size_t count = rng.index(50);
        for (std::size_t i = 0; i < count; ++i) {
            auto r = testutil::commit("s" + std::to_string(i), "t1", 1 + static_cast<int>(rng.index(16)),
                                      FileKind::doc, 1 + static_cast<long>(rng.index(100)), 0);
            r.timestamp = "ts" + std::to_string(i);  // make each record unique
            records.push_back(r);
        }
        const auto buckets = ingest::section_by_week(records, 16);
        std::size_t total = 0;
        for (const auto& [week, bucket] : buckets) {
            CHECK(!bucket.empty());
            for (const auto& r : bucket) CHECK(r.week == week);
            total += bucket.size();
        }
        CHECK(total == records.size());
    }
}

TEST_CASE("full synthetic course yields 16 nonempty commit buckets") {
    const auto data = synth::generate(synth::SynthSpec{});
    const auto buckets = ingest::section_by_week(data.commits, 16);
    CHECK(buckets.size() == 16);
    for (const auto& [week, bucket] : buckets) {
        (void)week;
        CHECK(!bucket.empty());
    }
}

TEST_CASE("canonical serialization round-trips") {
    synth::SynthSpec spec;
    spec.students = 14;
    spec.teams = 3;
    spec.weeks = 4;
    const auto data = synth::generate(spec);

    TempDir dir;
    synth::write_csv(data, dir.path().string());
    const auto roster = ingest::parse_roster(dir.file("roster.csv"));
    const auto commits = ingest::parse_commits(dir.file("commits.csv"), &roster);
    const auto issues = ingest::parse_issues(dir.file("issues.csv"), &roster);
    const auto grades = ingest::parse_grades(dir.file("grades.csv"), &roster, spec.weeks);

    CHECK(roster.students == data.roster.students);
    CHECK(commits == data.commits);
    CHECK(issues == data.issues);
    CHECK(grades == data.grades);

    // write the parsed records again: both byte streams must agree
    TempDir dir2;
    synth::SynthData round{roster, commits, issues, grades};
    synth::write_csv(round, dir2.path().string());
    for (const char* name : {"roster.csv", "commits.csv", "issues.csv", "grades.csv"})
        CHECK(testutil::slurp(dir.file(name)) == testutil::slurp(dir2.file(name)));
}
