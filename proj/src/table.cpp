#include "table.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include "refplan/schema.hpp"

namespace refplan::detail {

namespace {

std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

bool needs_quotes(const std::string& s, char delim) {
  return s.find(delim) != std::string::npos || s.find('"') != std::string::npos ||
         (!s.empty() && (s.front() == ' ' || s.back() == ' '));
}

std::string quote(const std::string& s, char delim) {
  if (!needs_quotes(s, delim)) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

std::optional<std::size_t> Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return i;
  return std::nullopt;
}

std::size_t Table::require(std::string_view name) const {
  if (auto c = column(name)) return *c;
  throw ParseError(file.string(), 1, "missing column '" + std::string(name) + "'");
}

Table read_table(const std::filesystem::path& file, char delim, bool comments) {
  std::ifstream in(file);
  if (!in) throw ParseError(file.string(), 0, "cannot open file");
  Table t;
  t.file = file;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    if (comments && line.front() == '#') {
      t.comments.push_back(trim(std::string_view(line).substr(1)));
      continue;
    }
    auto fields = split_fields(line, delim);
    if (!header) {
      t.columns = std::move(fields);
      header = true;
      continue;
    }
    if (fields.size() != t.columns.size())
      throw ParseError(file.string(), lineno,
                       "expected " + std::to_string(t.columns.size()) + " fields, found " +
                           std::to_string(fields.size()));
    t.rows.push_back(std::move(fields));
    t.lines.push_back(lineno);
  }
  if (!header) throw ParseError(file.string(), 1, "missing header row");
  return t;
}

void write_text_atomic(const std::filesystem::path& file, const std::string& content) {
  auto tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    if (!out) throw Error("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, file, ec);
  if (ec) throw Error("cannot rename " + tmp.string() + ": " + ec.message());
}

void write_table(const std::filesystem::path& file, const std::vector<std::string>& columns,
                 const std::vector<std::vector<std::string>>& rows, char delim,
                 const std::vector<std::string>& comments) {
  std::ostringstream os;
  for (const auto& c : comments) os << "# " << c << '\n';
  auto emit = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) os << delim;
      os << quote(fields[i], delim);
    }
    os << '\n';
  };
  emit(columns);
  for (const auto& r : rows) emit(r);
  write_text_atomic(file, os.str());
}

double parse_number(std::string_view text, const std::filesystem::path& file, std::size_t line) {
  std::string s = trim(text);
  if (s == "inf" || s == "+inf" || s == "Inf" || s == "INF") return kInf;
  if (s == "-inf" || s == "-Inf" || s == "-INF") return -kInf;
  std::string_view v = s;
  if (!v.empty() && v.front() == '+') v.remove_prefix(1);
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty())
    throw ParseError(file.string(), line, "not a number: '" + s + "'");
  return out;
}

std::string format_number(double v) {
  if (v == kInf) return "inf";
  if (v == -kInf) return "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) return std::to_string(v);
  return std::string(buf, ptr);
}

}  // namespace refplan::detail
