#pragma once

// Delimited text with a header row. Fields may be double-quoted; quotes inside
// a quoted field are doubled. Quoted fields may span lines.

#include <iosfwd>
#include <string>
#include <vector>

namespace fecl::delimited {

using Row = std::vector<std::string>;

struct Table {
    Row header;
    std::vector<Row> rows;

    /// Index of a header column, or -1.
    int column(const std::string& name) const;
};

Table read(std::istream& in, char delimiter);
Table read_file(const std::string& path, char delimiter);

void write_row(std::ostream& out, const Row& row, char delimiter);
void write(std::ostream& out, const Table& table, char delimiter);

}  // namespace fecl::delimited
