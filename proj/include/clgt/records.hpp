#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace clgt {

enum class FileKind { doc, code };
enum class Grade { A = 0, B = 1, C = 2 };

const char* to_string(FileKind kind);
const char* to_string(Grade grade);

struct CommitRecord {
    std::string student_id;
    std::string team_id;
    int week = 0;
    std::string timestamp;  // ISO-8601, carried verbatim
    FileKind file_kind = FileKind::doc;
    long lines_added = 0;
    long lines_deleted = 0;

    bool operator==(const CommitRecord&) const = default;
};

struct IssueRecord {
    std::string author_id;
    std::string author_team;
    std::string target_team;
    int week = 0;
    std::string timestamp;
    double severity = 0.0;

    bool operator==(const IssueRecord&) const = default;
};

struct Roster {
    // roster order defines vertex indices; teams ordered by first appearance
    std::vector<std::pair<std::string, std::string>> students;  // (student_id, team_id)
    std::vector<std::string> teams;

    std::size_t size() const { return students.size(); }
    int student_index(const std::string& id) const;
    int team_index(const std::string& id) const;
    int team_of_student(std::size_t student_idx) const;
    std::vector<int> team_members(int team_idx) const;  // vertex indices

    std::unordered_map<std::string, int> student_lookup;
    std::unordered_map<std::string, int> team_lookup;
    void rebuild_lookups();
};

struct GradeTable {
    // week -> student_id -> grade; final grades keyed separately
    std::map<std::pair<std::string, int>, Grade> weekly;
    std::map<std::string, Grade> final_grades;

    bool operator==(const GradeTable&) const = default;
};

}  // namespace clgt
