#include "fluxinv/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "fluxinv/errors.hpp"

namespace fluxinv::csv {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_line(const std::string& line, const std::string& source, std::size_t lineno) {
  std::vector<std::string> out;
  std::string field;
  std::size_t i = 0;
  const std::size_t n = line.size();
  while (true) {
    field.clear();
    if (i < n && line[i] == '"') {
      ++i;
      bool closed = false;
      while (i < n) {
        if (line[i] == '"') {
          if (i + 1 < n && line[i + 1] == '"') {
            field.push_back('"');
            i += 2;
          } else {
            ++i;
            closed = true;
            break;
          }
        } else {
          field.push_back(line[i++]);
        }
      }
      if (!closed) throw FormatError(source, lineno, "unterminated quoted field");
      if (i < n && line[i] != ',') throw FormatError(source, lineno, "unexpected character after quoted field");
      out.push_back(field);
    } else {
      const std::size_t start = i;
      while (i < n && line[i] != ',') {
        if (line[i] == '"') throw FormatError(source, lineno, "quote inside unquoted field");
        ++i;
      }
      out.emplace_back(trim(std::string_view(line).substr(start, i - start)));
    }
    if (i >= n) break;
    ++i;  // comma
    if (i == n) {
      out.emplace_back();
      break;
    }
  }
  return out;
}

}  // namespace

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw FormatError(source, header_line, "missing required column '" + std::string(name) + "'");
}

std::optional<std::string> Table::directive(std::string_view key) const {
  for (const auto& d : directives) {
    std::string_view v = trim(d);
    if (v.size() > key.size() && v.substr(0, key.size()) == key && v[key.size()] == ':') {
      return std::string(trim(v.substr(key.size() + 1)));
    }
  }
  return std::nullopt;
}

Table read(std::istream& in, const std::string& source) {
  Table t;
  t.source = source;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (line.find('\0') != std::string::npos) throw FormatError(source, lineno, "embedded NUL byte");
    if (trim(line).empty()) continue;
    if (!have_header && line.front() == '#') {
      std::string_view body = trim(std::string_view(line).substr(1));
      if (body.substr(0, 7) == "schema:") {
        std::string_view rest = trim(body.substr(7));
        const auto sp = rest.find(' ');
        if (sp == std::string_view::npos) throw FormatError(source, lineno, "schema line must read '# schema: <id> v1'");
        const std::string_view version = trim(rest.substr(sp + 1));
        if (version != "v1") {
          throw FormatError(source, lineno, "unsupported schema version '" + std::string(version) + "'");
        }
        t.schema_id = std::string(rest.substr(0, sp));
      } else {
        t.directives.emplace_back(body);
      }
      continue;
    }
    auto fields = split_line(line, source, lineno);
    if (!have_header) {
      t.header = std::move(fields);
      t.header_line = lineno;
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw FormatError(source, lineno,
                        "expected " + std::to_string(t.header.size()) + " fields, found " + std::to_string(fields.size()));
    }
    t.rows.push_back({lineno, std::move(fields)});
  }
  if (in.bad()) throw FormatError(source, lineno, "read error");
  return t;
}

Table read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path, 0, "cannot open file");
  return read(in, path);
}

Table read_schema(std::istream& in, const std::string& source, std::string_view schema_id,
                  const std::vector<std::string>& header) {
  Table t = read(in, source);
  if (t.schema_id && *t.schema_id != schema_id) {
    throw FormatError(source, 1, "schema '" + *t.schema_id + "' does not match expected '" + std::string(schema_id) + "'");
  }
  if (t.header.empty()) throw FormatError(source, 0, "missing header row");
  if (t.header != header) {
    std::string expected;
    for (std::size_t i = 0; i < header.size(); ++i) expected += (i ? "," : "") + header[i];
    throw FormatError(source, t.header_line, "header must be '" + expected + "'");
  }
  return t;
}

double parse_double(const std::string& field, const std::string& source, std::size_t line, std::string_view column) {
  const char* first = field.data();
  const char* last = first + field.size();
  if (first != last && *first == '+') ++first;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (field.empty() || ec != std::errc() || ptr != last) {
    throw FormatError(source, line, "column '" + std::string(column) + "': cannot parse '" + field + "' as a number");
  }
  if (!std::isfinite(v)) {
    throw FormatError(source, line, "column '" + std::string(column) + "': value must be finite");
  }
  return v;
}

long long parse_int(const std::string& field, const std::string& source, std::size_t line, std::string_view column) {
  const char* first = field.data();
  const char* last = first + field.size();
  if (first != last && *first == '+') ++first;
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (field.empty() || ec != std::errc() || ptr != last) {
    throw FormatError(source, line, "column '" + std::string(column) + "': cannot parse '" + field + "' as an integer");
  }
  return v;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos && trim(field) == field) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void Writer::schema(std::string_view id) { out_ << "# schema: " << id << " v1\n"; }

void Writer::directive(std::string_view text) { out_ << "# " << text << "\n"; }

void Writer::row(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_ << ',';
    out_ << escape(fields[i]);
  }
  out_ << '\n';
}

}  // namespace fluxinv::csv
