#include "clgt/errors.hpp"

namespace clgt {

const char* errc_name(errc code) {
    switch (code) {
        case errc::missing_column: return "MissingColumn";
        case errc::bad_enum_value: return "BadEnumValue";
        case errc::negative_line_count: return "NegativeLineCount";
        case errc::non_positive_severity: return "NonPositiveSeverity";
        case errc::bad_grade: return "BadGrade";
        case errc::duplicate_cell: return "DuplicateCell";
        case errc::missing_grade: return "MissingGrade";
        case errc::bad_row: return "BadRow";
        case errc::unknown_student: return "UnknownStudent";
        case errc::unknown_team: return "UnknownTeam";
        case errc::self_team_issue: return "SelfTeamIssue";
        case errc::week_out_of_range: return "WeekOutOfRange";
        case errc::missing_file: return "MissingFile";
        case errc::empty_input: return "EmptyInput";
        case errc::non_positive_value: return "NonPositiveValue";
        case errc::insufficient_data: return "InsufficientData";
        case errc::shape_mismatch: return "ShapeMismatch";
        case errc::empty_segment: return "EmptySegment";
        case errc::bad_config: return "BadConfig";
        case errc::bad_ratios: return "BadRatios";
        case errc::empty_mask: return "EmptyMask";
        case errc::degenerate_class: return "DegenerateClass";
        case errc::missing_checkpoint: return "MissingCheckpoint";
        case errc::io_error: return "IoError";
        case errc::locked: return "Locked";
    }
    return "UnknownError";
}

}  // namespace clgt
