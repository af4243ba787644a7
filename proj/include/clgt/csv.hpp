#pragma once

#include <string>
#include <vector>

namespace clgt::csv {

using Row = std::vector<std::string>;

struct Table {
    Row header;
    std::vector<Row> rows;

    // column index by name, -1 when absent
    int column(const std::string& name) const;
};

// RFC-4180-style parsing: quoted fields, embedded commas/quotes/newlines.
Table read_file(const std::string& path);
Table parse(const std::string& text);

std::string escape_field(const std::string& field);
std::string format_row(const Row& row);
void write_file(const std::string& path, const Table& table);

}  // namespace clgt::csv
