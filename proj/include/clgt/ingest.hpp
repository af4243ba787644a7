#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "clgt/csv.hpp"
#include "clgt/records.hpp"

namespace clgt::ingest {

// Canonical export schemas:
//   commits.csv: student_id,team_id,week,timestamp,file_kind,lines_added,lines_deleted
//   issues.csv:  author_id,author_team,target_team,week,timestamp,severity
//   grades.csv:  student_id,week,grade          (week in {1..W, "final"})
//   roster.csv:  student_id,team_id

Roster parse_roster(const std::string& path);
Roster roster_from_table(const csv::Table& table);

std::vector<CommitRecord> parse_commits(const std::string& path, const Roster* roster = nullptr);
std::vector<CommitRecord> commits_from_table(const csv::Table& table, const Roster* roster);

std::vector<IssueRecord> parse_issues(const std::string& path, const Roster* roster = nullptr);
std::vector<IssueRecord> issues_from_table(const csv::Table& table, const Roster* roster);

// When roster and weeks are given, completeness is validated: every student
// needs every weekly grade plus a final grade.
GradeTable parse_grades(const std::string& path, const Roster* roster = nullptr, int weeks = 0);
GradeTable grades_from_table(const csv::Table& table, const Roster* roster, int weeks);

// Partition records into per-week buckets. Weeks must lie in [1, max_week].
template <class Record>
std::map<int, std::vector<Record>> section_by_week(const std::vector<Record>& records, int max_week);

// Canonical serialization (round-trips through the parsers).
csv::Table commits_to_table(const std::vector<CommitRecord>& records);
csv::Table issues_to_table(const std::vector<IssueRecord>& records);
csv::Table roster_to_table(const Roster& roster);
csv::Table grades_to_table(const GradeTable& grades);

Grade parse_grade_letter(const std::string& text, std::size_t row_number);

}  // namespace clgt::ingest
