#include "clgt/csv.hpp"

#include <fstream>
#include <sstream>

#include "clgt/errors.hpp"

namespace clgt::csv {

int Table::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
}

Table parse(const std::string& text) {
    std::vector<Row> rows;
    Row row;
    std::string field;
    bool in_quotes = false;
    bool row_has_content = false;

    auto end_field = [&] {
        row.push_back(field);
        field.clear();
        row_has_content = true;
    };
    auto end_row = [&] {
        if (row_has_content || !row.empty()) {
            end_field();
            rows.push_back(row);
            row.clear();
            row_has_content = false;
        }
        field.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            in_quotes = true;
            row_has_content = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\r') {
            // swallowed; \r\n handled by the \n branch
        } else if (c == '\n') {
            end_row();
        } else {
            field.push_back(c);
        }
    }
    if (!field.empty() || row_has_content || !row.empty()) end_row();

    Table t;
    if (!rows.empty()) {
        t.header = rows.front();
        t.rows.assign(rows.begin() + 1, rows.end());
    }
    return t;
}

Table read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) throw Error(errc::missing_file, "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

std::string escape_field(const std::string& field) {
    bool needs_quotes = false;
    for (char c : field) {
        if (c == ',' || c == '"' || c == '\n' || c == '\r') {
            needs_quotes = true;
            break;
        }
    }
    if (!needs_quotes) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string format_row(const Row& row) {
    std::string out;
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out.push_back(',');
        out += escape_field(row[i]);
    }
    out.push_back('\n');
    return out;
}

void write_file(const std::string& path, const Table& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out.good()) throw Error(errc::io_error, "cannot write " + path);
    out << format_row(table.header);
    for (const auto& row : table.rows) out << format_row(row);
}

}  // namespace clgt::csv
