#pragma once

#include <stdexcept>
#include <string>

namespace clgt {

// Error taxonomy shared across the library. Parse-family codes map to CLI
// exit code 2, validation-family codes to exit code 3.
enum class errc {
    // ingest / parsing
    missing_column,
    bad_enum_value,
    negative_line_count,
    non_positive_severity,
    bad_grade,
    duplicate_cell,
    missing_grade,
    bad_row,
    // validation
    unknown_student,
    unknown_team,
    self_team_issue,
    week_out_of_range,
    missing_file,
    // graphgen
    empty_input,
    non_positive_value,
    insufficient_data,
    // diffcore / model
    shape_mismatch,
    empty_segment,
    bad_config,
    // train
    bad_ratios,
    empty_mask,
    degenerate_class,
    missing_checkpoint,
    // generic
    io_error,
    locked,
};

const char* errc_name(errc code);

class Error : public std::runtime_error {
public:
    Error(errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

    errc code() const { return code_; }

    static bool is_parse_error(errc c) {
        switch (c) {
            case errc::missing_column:
            case errc::bad_enum_value:
            case errc::negative_line_count:
            case errc::non_positive_severity:
            case errc::bad_grade:
            case errc::duplicate_cell:
            case errc::bad_row:
                return true;
            default:
                return false;
        }
    }

private:
    errc code_;
};

}  // namespace clgt
