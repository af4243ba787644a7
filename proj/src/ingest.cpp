#include "clgt/ingest.hpp"

#include <charconv>
#include <cstdio>
#include <set>

#include "clgt/errors.hpp"

namespace clgt {

const char* to_string(FileKind kind) { return kind == FileKind::doc ? "doc" : "code"; }

const char* to_string(Grade grade) {
    switch (grade) {
        case Grade::A: return "A";
        case Grade::B: return "B";
        case Grade::C: return "C";
    }
    return "?";
}

void Roster::rebuild_lookups() {
    student_lookup.clear();
    team_lookup.clear();
    for (std::size_t i = 0; i < students.size(); ++i) student_lookup[students[i].first] = static_cast<int>(i);
    for (std::size_t i = 0; i < teams.size(); ++i) team_lookup[teams[i]] = static_cast<int>(i);
}

int Roster::student_index(const std::string& id) const {
    auto it = student_lookup.find(id);
    return it == student_lookup.end() ? -1 : it->second;
}

int Roster::team_index(const std::string& id) const {
    auto it = team_lookup.find(id);
    return it == team_lookup.end() ? -1 : it->second;
}

int Roster::team_of_student(std::size_t student_idx) const {
    return team_index(students[student_idx].second);
}

std::vector<int> Roster::team_members(int team_idx) const {
    std::vector<int> members;
    for (std::size_t i = 0; i < students.size(); ++i) {
        if (team_of_student(i) == team_idx) members.push_back(static_cast<int>(i));
    }
    return members;
}

}  // namespace clgt

namespace clgt::ingest {

namespace {

std::string row_tag(const std::string& what, std::size_t row_number) {
    return what + " row " + std::to_string(row_number);
}

int require_column(const csv::Table& table, const std::string& name, const std::string& what) {
    const int idx = table.column(name);
    if (idx < 0) throw Error(errc::missing_column, what + " lacks column '" + name + "'");
    return idx;
}

const std::string& cell(const csv::Row& row, int col, const std::string& what, std::size_t row_number) {
    if (col < 0 || static_cast<std::size_t>(col) >= row.size())
        throw Error(errc::bad_row, row_tag(what, row_number) + " is short");
    return row[static_cast<std::size_t>(col)];
}

long parse_long(const std::string& text, const std::string& what, std::size_t row_number) {
    long value = 0;
    const auto* begin = text.data();
    const auto* end = begin + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end)
        throw Error(errc::bad_row, row_tag(what, row_number) + ": not an integer: '" + text + "'");
    return value;
}

double parse_double(const std::string& text, const std::string& what, std::size_t row_number) {
    try {
        std::size_t pos = 0;
        const double value = std::stod(text, &pos);
        if (pos != text.size()) throw std::invalid_argument(text);
        return value;
    } catch (const std::exception&) {
        throw Error(errc::bad_row, row_tag(what, row_number) + ": not a number: '" + text + "'");
    }
}

}  // namespace

Roster roster_from_table(const csv::Table& table) {
    const std::string what = "roster.csv";
    const int c_student = require_column(table, "student_id", what);
    const int c_team = require_column(table, "team_id", what);

    Roster roster;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const std::string& sid = cell(row, c_student, what, i + 2);
        const std::string& tid = cell(row, c_team, what, i + 2);
        if (sid.empty() || tid.empty())
            throw Error(errc::bad_row, row_tag(what, i + 2) + ": empty identifier");
        if (!seen.insert(sid).second)
            throw Error(errc::duplicate_cell, row_tag(what, i + 2) + ": duplicate student '" + sid + "'");
        roster.students.emplace_back(sid, tid);
        bool known_team = false;
        for (const auto& t : roster.teams) known_team |= (t == tid);
        if (!known_team) roster.teams.push_back(tid);
    }
    roster.rebuild_lookups();
    return roster;
}

Roster parse_roster(const std::string& path) { return roster_from_table(csv::read_file(path)); }

std::vector<CommitRecord> commits_from_table(const csv::Table& table, const Roster* roster) {
    const std::string what = "commits.csv";
    const int c_student = require_column(table, "student_id", what);
    const int c_team = require_column(table, "team_id", what);
    const int c_week = require_column(table, "week", what);
    const int c_ts = require_column(table, "timestamp", what);
    const int c_kind = require_column(table, "file_kind", what);
    const int c_added = require_column(table, "lines_added", what);
    const int c_deleted = require_column(table, "lines_deleted", what);

    std::vector<CommitRecord> records;
    records.reserve(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const std::size_t rn = i + 2;
        const auto& row = table.rows[i];
        CommitRecord rec;
        rec.student_id = cell(row, c_student, what, rn);
        rec.team_id = cell(row, c_team, what, rn);
        rec.week = static_cast<int>(parse_long(cell(row, c_week, what, rn), what, rn));
        rec.timestamp = cell(row, c_ts, what, rn);

        const std::string& kind = cell(row, c_kind, what, rn);
        if (kind == "doc") rec.file_kind = FileKind::doc;
        else if (kind == "code") rec.file_kind = FileKind::code;
        else throw Error(errc::bad_enum_value, row_tag(what, rn) + ": file_kind '" + kind + "'");

        rec.lines_added = parse_long(cell(row, c_added, what, rn), what, rn);
        rec.lines_deleted = parse_long(cell(row, c_deleted, what, rn), what, rn);
        if (rec.lines_added < 0 || rec.lines_deleted < 0)
            throw Error(errc::negative_line_count, row_tag(what, rn) + ": negative line count");
        if (rec.lines_added + rec.lines_deleted == 0)
            throw Error(errc::negative_line_count, row_tag(what, rn) + ": zero-change commit");

        if (roster) {
            const int sidx = roster->student_index(rec.student_id);
            if (sidx < 0)
                throw Error(errc::unknown_student, row_tag(what, rn) + ": student '" + rec.student_id + "'");
            if (roster->students[static_cast<std::size_t>(sidx)].second != rec.team_id)
                throw Error(errc::unknown_team,
                            row_tag(what, rn) + ": student '" + rec.student_id + "' not in team '" + rec.team_id + "'");
        }
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<CommitRecord> parse_commits(const std::string& path, const Roster* roster) {
    return commits_from_table(csv::read_file(path), roster);
}

std::vector<IssueRecord> issues_from_table(const csv::Table& table, const Roster* roster) {
    const std::string what = "issues.csv";
    const int c_author = require_column(table, "author_id", what);
    const int c_ateam = require_column(table, "author_team", what);
    const int c_tteam = require_column(table, "target_team", what);
    const int c_week = require_column(table, "week", what);
    const int c_ts = require_column(table, "timestamp", what);
    const int c_sev = require_column(table, "severity", what);

    std::vector<IssueRecord> records;
    records.reserve(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const std::size_t rn = i + 2;
        const auto& row = table.rows[i];
        IssueRecord rec;
        rec.author_id = cell(row, c_author, what, rn);
        rec.author_team = cell(row, c_ateam, what, rn);
        rec.target_team = cell(row, c_tteam, what, rn);
        rec.week = static_cast<int>(parse_long(cell(row, c_week, what, rn), what, rn));
        rec.timestamp = cell(row, c_ts, what, rn);
        rec.severity = parse_double(cell(row, c_sev, what, rn), what, rn);
        if (rec.severity <= 0.0)
            throw Error(errc::non_positive_severity, row_tag(what, rn) + ": severity must be > 0");
        if (rec.author_team == rec.target_team)
            throw Error(errc::self_team_issue,
                        row_tag(what, rn) + ": issue targets the author's own team '" + rec.author_team + "'");
        if (roster) {
            const int author = roster->student_index(rec.author_id);
            if (author < 0)
                throw Error(errc::unknown_student, row_tag(what, rn) + ": author '" + rec.author_id + "'");
            if (roster->students[static_cast<std::size_t>(author)].second != rec.author_team)
                throw Error(errc::unknown_team,
                            row_tag(what, rn) + ": author '" + rec.author_id + "' not in team '" + rec.author_team +
                                "'");
            if (roster->team_index(rec.target_team) < 0)
                throw Error(errc::unknown_team, row_tag(what, rn) + ": team '" + rec.target_team + "'");
        }
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<IssueRecord> parse_issues(const std::string& path, const Roster* roster) {
    return issues_from_table(csv::read_file(path), roster);
}

Grade parse_grade_letter(const std::string& text, std::size_t row_number) {
    if (text == "A") return Grade::A;
    if (text == "B") return Grade::B;
    if (text == "C") return Grade::C;
    throw Error(errc::bad_grade, row_tag("grades.csv", row_number) + ": grade '" + text + "'");
}

GradeTable grades_from_table(const csv::Table& table, const Roster* roster, int weeks) {
    const std::string what = "grades.csv";
    const int c_student = require_column(table, "student_id", what);
    const int c_week = require_column(table, "week", what);
    const int c_grade = require_column(table, "grade", what);

    GradeTable grades;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const std::size_t rn = i + 2;
        const auto& row = table.rows[i];
        const std::string& sid = cell(row, c_student, what, rn);
        const std::string& week_text = cell(row, c_week, what, rn);
        const Grade grade = parse_grade_letter(cell(row, c_grade, what, rn), rn);
        if (roster && roster->student_index(sid) < 0)
            throw Error(errc::unknown_student, row_tag(what, rn) + ": student '" + sid + "'");
        if (week_text == "final") {
            if (!grades.final_grades.emplace(sid, grade).second)
                throw Error(errc::duplicate_cell, row_tag(what, rn) + ": duplicate final grade for '" + sid + "'");
        } else {
            const int week = static_cast<int>(parse_long(week_text, what, rn));
            if (week < 1 || (weeks > 0 && week > weeks))
                throw Error(errc::week_out_of_range, row_tag(what, rn) + ": week " + week_text);
            if (!grades.weekly.emplace(std::make_pair(sid, week), grade).second)
                throw Error(errc::duplicate_cell,
                            row_tag(what, rn) + ": duplicate grade for ('" + sid + "', week " + week_text + ")");
        }
    }

    if (roster && weeks > 0) {
        for (const auto& [sid, tid] : roster->students) {
            (void)tid;
            for (int w = 1; w <= weeks; ++w) {
                if (!grades.weekly.count({sid, w}))
                    throw Error(errc::missing_grade, "no grade for ('" + sid + "', week " + std::to_string(w) + ")");
            }
            if (!grades.final_grades.count(sid))
                throw Error(errc::missing_grade, "no final grade for '" + sid + "'");
        }
    }
    return grades;
}

GradeTable parse_grades(const std::string& path, const Roster* roster, int weeks) {
    return grades_from_table(csv::read_file(path), roster, weeks);
}

template <class Record>
std::map<int, std::vector<Record>> section_by_week(const std::vector<Record>& records, int max_week) {
    std::map<int, std::vector<Record>> buckets;
    for (const auto& rec : records) {
        if (rec.week < 1 || rec.week > max_week)
            throw Error(errc::week_out_of_range,
                        "week " + std::to_string(rec.week) + " outside [1, " + std::to_string(max_week) + "]");
        buckets[rec.week].push_back(rec);
    }
    return buckets;
}

template std::map<int, std::vector<CommitRecord>> section_by_week(const std::vector<CommitRecord>&, int);
template std::map<int, std::vector<IssueRecord>> section_by_week(const std::vector<IssueRecord>&, int);

csv::Table commits_to_table(const std::vector<CommitRecord>& records) {
    csv::Table t;
    t.header = {"student_id", "team_id", "week", "timestamp", "file_kind", "lines_added", "lines_deleted"};
    for (const auto& r : records) {
        t.rows.push_back({r.student_id, r.team_id, std::to_string(r.week), r.timestamp, to_string(r.file_kind),
                          std::to_string(r.lines_added), std::to_string(r.lines_deleted)});
    }
    return t;
}

csv::Table issues_to_table(const std::vector<IssueRecord>& records) {
    csv::Table t;
    t.header = {"author_id", "author_team", "target_team", "week", "timestamp", "severity"};
    for (const auto& r : records) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", r.severity);
        t.rows.push_back({r.author_id, r.author_team, r.target_team, std::to_string(r.week), r.timestamp, buf});
    }
    return t;
}

csv::Table roster_to_table(const Roster& roster) {
    csv::Table t;
    t.header = {"student_id", "team_id"};
    for (const auto& [sid, tid] : roster.students) t.rows.push_back({sid, tid});
    return t;
}

csv::Table grades_to_table(const GradeTable& grades) {
    csv::Table t;
    t.header = {"student_id", "week", "grade"};
    for (const auto& [key, grade] : grades.weekly)
        t.rows.push_back({key.first, std::to_string(key.second), to_string(grade)});
    for (const auto& [sid, grade] : grades.final_grades) t.rows.push_back({sid, "final", to_string(grade)});
    return t;
}

}  // namespace clgt::ingest
