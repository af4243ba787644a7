#include "clgt/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "clgt/csv.hpp"
#include "clgt/errors.hpp"
#include "clgt/ingest.hpp"
#include "clgt/rng.hpp"

namespace clgt::synth {

namespace {

std::string padded(const char* prefix, std::size_t value, int width) {
    std::string digits = std::to_string(value);
    while (static_cast<int>(digits.size()) < width) digits.insert(digits.begin(), '0');
    return prefix + digits;
}

Grade tercile_grade(double value, const std::vector<double>& population) {
    std::vector<double> sorted = population;
    std::sort(sorted.begin(), sorted.end());
    const double t1 = sorted[sorted.size() / 3];
    const double t2 = sorted[(2 * sorted.size()) / 3];
    if (value >= t2) return Grade::A;
    if (value >= t1) return Grade::B;
    return Grade::C;
}

}  // namespace

SynthData generate(const SynthSpec& spec) {
    if (spec.students < spec.teams || spec.teams == 0 || spec.weeks < 1)
        throw Error(errc::bad_config, "synthetic spec needs students >= teams >= 1 and weeks >= 1");

    SynthData data;
    Rng rng(spec.seed);

    for (std::size_t t = 0; t < spec.teams; ++t) data.roster.teams.push_back(padded("t", t + 1, 2));
    for (std::size_t s = 0; s < spec.students; ++s) {
        const std::size_t team = s % spec.teams;  // round-robin keeps sizes within 1
        data.roster.students.emplace_back(padded("s", s + 1, 3), data.roster.teams[team]);
    }
    // teams contiguous in roster order, as the activity export expects
    std::stable_sort(data.roster.students.begin(), data.roster.students.end(),
                     [](const auto& a, const auto& b) { return a.second < b.second; });
    data.roster.rebuild_lookups();

    // latent per-student activity levels
    std::vector<double> activity(spec.students);
    for (double& a : activity) a = 0.3 + rng.uniform() * 1.7;

    std::vector<double> total_lines(spec.students, 0.0);
    for (int week = 1; week <= spec.weeks; ++week) {
        std::vector<double> weekly_lines(spec.students, 0.0);
        for (std::size_t s = 0; s < spec.students; ++s) {
            const auto& [sid, tid] = data.roster.students[s];
            if (!rng.bernoulli(spec.commit_probability)) continue;
            const int commit_count = 1 + static_cast<int>(rng.index(3));
            for (int c = 0; c < commit_count; ++c) {
                CommitRecord rec;
                rec.student_id = sid;
                rec.team_id = tid;
                rec.week = week;
                rec.timestamp = "2021-0" + std::to_string(1 + (week - 1) / 5) + "-" +
                                padded("", 1 + (week * 2) % 27, 2) + "T12:00:00Z";
                rec.file_kind = rng.bernoulli(0.5) ? FileKind::doc : FileKind::code;
                rec.lines_added = 1 + static_cast<long>(activity[s] * rng.uniform() * 200.0);
                rec.lines_deleted = rng.bernoulli(0.6) ? static_cast<long>(activity[s] * rng.uniform() * 80.0) : 0;
                if (rec.lines_added + rec.lines_deleted == 0) rec.lines_added = 1;
                weekly_lines[s] += static_cast<double>(rec.lines_added + rec.lines_deleted);
                data.commits.push_back(std::move(rec));
            }
        }
        for (std::size_t t = 0; t < spec.teams; ++t) {
            const int issue_count = static_cast<int>(spec.issues_per_team_week) +
                                    (rng.bernoulli(spec.issues_per_team_week - std::floor(spec.issues_per_team_week))
                                         ? 1
                                         : 0);
            const auto members = data.roster.team_members(static_cast<int>(t));
            for (int i = 0; i < issue_count; ++i) {
                IssueRecord rec;
                const int author = members[rng.index(members.size())];
                rec.author_id = data.roster.students[static_cast<std::size_t>(author)].first;
                rec.author_team = data.roster.teams[t];
                std::size_t target = rng.index(spec.teams - 1);
                if (target >= t) ++target;
                rec.target_team = data.roster.teams[target];
                rec.week = week;
                rec.timestamp = "2021-0" + std::to_string(1 + (week - 1) / 5) + "-" +
                                padded("", 1 + (week * 2 + i) % 27, 2) + "T15:30:00Z";
                rec.severity = 1.0 + std::floor(rng.uniform() * 5.0);
                weekly_lines[static_cast<std::size_t>(author)] += rec.severity * 10.0;
                data.issues.push_back(std::move(rec));
            }
        }
        for (std::size_t s = 0; s < spec.students; ++s) {
            total_lines[s] += weekly_lines[s];
            data.grades.weekly[{data.roster.students[s].first, week}] = tercile_grade(weekly_lines[s], weekly_lines);
        }
    }
    for (std::size_t s = 0; s < spec.students; ++s)
        data.grades.final_grades[data.roster.students[s].first] = tercile_grade(total_lines[s], total_lines);
    return data;
}

void write_csv(const SynthData& data, const std::string& dir) {
    std::filesystem::create_directories(dir);
    const std::filesystem::path base(dir);
    csv::write_file((base / "roster.csv").string(), ingest::roster_to_table(data.roster));
    csv::write_file((base / "commits.csv").string(), ingest::commits_to_table(data.commits));
    csv::write_file((base / "issues.csv").string(), ingest::issues_to_table(data.issues));
    csv::write_file((base / "grades.csv").string(), ingest::grades_to_table(data.grades));
}

}  // namespace clgt::synth
