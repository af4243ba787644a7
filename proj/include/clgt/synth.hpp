#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "clgt/records.hpp"

namespace clgt::synth {

// Deterministic synthetic course dataset shaped like the reference one:
// students split into teams, weekly doc/code commits, cross-team review
// issues, and weekly + final grades driven by activity terciles.
struct SynthSpec {
    std::size_t students = 75;
    std::size_t teams = 11;
    int weeks = 16;
    std::uint64_t seed = 7;
    double commit_probability = 0.9;  // per student per week
    double issues_per_team_week = 2.0;
};

struct SynthData {
    Roster roster;
    std::vector<CommitRecord> commits;
    std::vector<IssueRecord> issues;
    GradeTable grades;
};

SynthData generate(const SynthSpec& spec);

// writes commits.csv, issues.csv, grades.csv, roster.csv under dir
void write_csv(const SynthData& data, const std::string& dir);

}  // namespace clgt::synth
