#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fluxinv::csv {

struct Row {
  std::size_t line = 0;  // 1-based physical line
  std::vector<std::string> fields;
};

struct Table {
  std::string source;
  std::optional<std::string> schema_id;   // from `# schema: <id> v1`
  std::vector<std::string> directives;    // other leading `# key: value` lines, verbatim after '#'
  std::vector<std::string> header;
  std::size_t header_line = 0;
  std::vector<Row> rows;

  // Index of a header column, or FormatError naming it.
  std::size_t column(std::string_view name) const;
  // Value of a leading `# key: value` directive.
  std::optional<std::string> directive(std::string_view key) const;
};

// Reads a CSV document. Leading `#` lines are directives; blank lines are
// skipped; CRLF and a UTF-8 BOM are accepted; double-quoted fields follow
// RFC 4180 within a single line.
Table read(std::istream& in, const std::string& source);
Table read_file(const std::string& path);

// Parse a table and check its schema line (if present) and exact header.
Table read_schema(std::istream& in, const std::string& source, std::string_view schema_id,
                  const std::vector<std::string>& header);

double parse_double(const std::string& field, const std::string& source, std::size_t line, std::string_view column);
long long parse_int(const std::string& field, const std::string& source, std::size_t line, std::string_view column);

// 17 significant digits, locale independent; parses back to the same double.
std::string format_double(double v);

// Quotes a field only when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  void schema(std::string_view id);
  void directive(std::string_view text);
  void row(const std::vector<std::string>& fields);

 private:
  std::ostream& out_;
};

}  // namespace fluxinv::csv
