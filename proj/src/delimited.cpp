#include "fecl/delimited.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace fecl::delimited {

int Table::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
}

namespace {

// Reads one record; returns false at end of input with nothing read.
bool read_record(std::istream& in, char delimiter, Row& row) {
    row.clear();
    std::string field;
    bool in_quotes = false;
    bool any = false;
    char c;
    while (in.get(c)) {
        any = true;
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field.push_back('"');
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"' && field.empty()) {
            in_quotes = true;
        } else if (c == delimiter) {
            row.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            break;
        } else if (c == '\r') {
            if (in.peek() == '\n') in.get(c);
            break;
        } else {
            field.push_back(c);
        }
    }
    if (!any) return false;
    row.push_back(std::move(field));
    return true;
}

bool blank(const Row& row) { return row.size() == 1 && row[0].empty(); }

}  // namespace

Table read(std::istream& in, char delimiter) {
    Table table;
    Row row;
    // Skip a UTF-8 byte order mark.
    if (in.peek() == 0xEF) {
        char bom[3];
        in.read(bom, 3);
    }
    while (read_record(in, delimiter, row)) {
        if (blank(row)) continue;
        if (table.header.empty()) {
            table.header = row;
        } else {
            table.rows.push_back(row);
        }
    }
    return table;
}

Table read_file(const std::string& path, char delimiter) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read(in, delimiter);
}

void write_row(std::ostream& out, const Row& row, char delimiter) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out << delimiter;
        const auto& f = row[i];
        const bool quote = f.find_first_of(std::string{delimiter, '"', '\n', '\r'}) != std::string::npos;
        if (!quote) {
            out << f;
            continue;
        }
        out << '"';
        for (char c : f) {
            if (c == '"') out << '"';
            out << c;
        }
        out << '"';
    }
    out << '\n';
}

void write(std::ostream& out, const Table& table, char delimiter) {
    write_row(out, table.header, delimiter);
    for (const auto& r : table.rows) write_row(out, r, delimiter);
}

}  // namespace fecl::delimited
