#pragma once

// Grade-record CSV, the analytics input format:
//
//   student_id,semester,question_id,attempt,grader,grade
//
// attempt is 1 or 2, grader one of AI/Teacher/SelfEval/TeacherFinal, grade
// one of 0/1/2/NA. Columns may appear in any order; unknown columns are
// ignored. Fields follow RFC 4180 quoting.

#include <array>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "edl/domain.hpp"

namespace edl::store {

inline constexpr std::array<std::string_view, 6> kGradeCsvColumns = {
    "student_id", "semester", "question_id", "attempt", "grader", "grade"};

struct ImportReport {
  std::size_t rows = 0;
  /// Rows whose grade cell was NA.
  std::size_t missing_grades = 0;
  /// Rows whose grade cell was neither 0/1/2 nor NA; imported as Missing.
  std::size_t unparseable_grades = 0;
  std::map<Grader, std::size_t> rows_per_grader;
};

struct ImportResult {
  GradeRecords records;
  ImportReport report;
};

namespace csv {

/// Splits CSV text into records of fields. Handles quoted fields with
/// embedded commas, quotes and newlines, and CRLF line endings. Each record
/// carries the 1-based line it started on.
struct Row {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

inline std::vector<Row> parse(std::string_view text, std::string_view source) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  std::vector<Row> rows;
  Row row{1, {}};
  std::string field;
  bool quoted = false, field_started = false;
  std::size_t line = 1;

  auto end_field = [&] {
    row.fields.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    if (!(row.fields.size() == 1 && row.fields[0].empty())) rows.push_back(std::move(row));
    row = Row{line, {}};
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started) {
          throw Error(Errc::MalformedRow, std::string(source) + ":" + std::to_string(line) +
                                              ": quote inside unquoted field");
        }
        quoted = field_started = true;
        break;
      case ',': end_field(); break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') break;
        [[fallthrough]];
      case '\n':
        ++line;
        end_row();
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (quoted) {
    throw Error(Errc::MalformedRow, std::string(source) + ": unterminated quoted field");
  }
  if (!field.empty() || !row.fields.empty() || field_started) end_row();
  return rows;
}

inline std::string quote(std::string_view field) {
  const bool needs = field.find_first_of(",\"\r\n") != std::string_view::npos ||
                     (!field.empty() && (std::isspace(static_cast<unsigned char>(field.front())) ||
                                         std::isspace(static_cast<unsigned char>(field.back()))));
  if (!needs) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IOFailure, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(Errc::IOFailure, "read error on " + path.string());
  return ss.str();
}

}  // namespace csv

inline std::optional<GradeValue> parse_grade_cell(std::string_view cell, bool& was_na, bool& unparseable) {
  const auto t = text::trim(cell);
  was_na = unparseable = false;
  if (t == "NA") {
    was_na = true;
    return std::nullopt;
  }
  if (t.size() == 1 && t[0] >= '0' && t[0] <= '2') return GradeValue::from_int(t[0] - '0');
  unparseable = true;
  return std::nullopt;
}

inline ImportResult parse_grade_csv(std::string_view content, std::string_view source = "<input>") {
  auto rows = csv::parse(content, source);
  if (rows.empty()) throw Error(Errc::MalformedHeader, std::string(source) + ": missing header row");

  std::array<std::size_t, kGradeCsvColumns.size()> col{};
  const auto& header = rows.front().fields;
  for (std::size_t c = 0; c < kGradeCsvColumns.size(); ++c) {
    auto it = std::find_if(header.begin(), header.end(), [&](const std::string& h) {
      return text::trim(h) == kGradeCsvColumns[c];
    });
    if (it == header.end()) {
      throw Error(Errc::MalformedHeader, std::string(source) + ": header lacks column '" +
                                             std::string(kGradeCsvColumns[c]) + "'");
    }
    col[c] = static_cast<std::size_t>(it - header.begin());
  }

  ImportResult result;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    auto where = [&] { return std::string(source) + ":" + std::to_string(row.line); };
    if (row.fields.size() != header.size()) {
      throw Error(Errc::MalformedRow, where() + ": expected " + std::to_string(header.size()) +
                                          " fields, found " + std::to_string(row.fields.size()));
    }
    GradeRecord rec;
    rec.student_id = row.fields[col[0]];
    rec.semester = row.fields[col[1]];
    rec.question_id = row.fields[col[2]];
    const auto attempt = text::trim(row.fields[col[3]]);
    if (attempt == "1") {
      rec.attempt = Attempt::First;
    } else if (attempt == "2") {
      rec.attempt = Attempt::Second;
    } else {
      throw Error(Errc::MalformedRow, where() + ": attempt must be 1 or 2, got '" + std::string(attempt) + "'");
    }
    auto grader = grader_from_string(text::trim(row.fields[col[4]]));
    if (!grader) throw Error(Errc::MalformedRow, where() + ": unknown grader '" + row.fields[col[4]] + "'");
    rec.grader = *grader;
    bool na = false, bad = false;
    rec.grade = parse_grade_cell(row.fields[col[5]], na, bad);
    result.report.missing_grades += na ? 1 : 0;
    result.report.unparseable_grades += bad ? 1 : 0;
    ++result.report.rows_per_grader[rec.grader];
    result.records.push_back(std::move(rec));
  }
  result.report.rows = result.records.size();
  return result;
}

inline ImportResult import_grade_csv(const std::filesystem::path& path) {
  return parse_grade_csv(csv::read_all(path), path.string());
}

inline void write_grade_csv(const GradeRecords& records, std::ostream& out) {
  for (std::size_t c = 0; c < kGradeCsvColumns.size(); ++c) {
    out << (c ? "," : "") << kGradeCsvColumns[c];
  }
  out << '\n';
  for (const auto& r : records) {
    out << csv::quote(r.student_id) << ',' << csv::quote(r.semester) << ','
        << csv::quote(r.question_id) << ',' << static_cast<int>(r.attempt) << ','
        << to_string(r.grader) << ',';
    if (r.grade) {
      out << r.grade->value();
    } else {
      out << "NA";
    }
    out << '\n';
  }
}

/// Writes `records` to `path`; returns the number of data rows.
inline std::size_t export_grade_csv(const GradeRecords& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IOFailure, "cannot open " + path.string() + " for writing");
  write_grade_csv(records, out);
  out.flush();
  if (!out) throw Error(Errc::IOFailure, "write error on " + path.string());
  return records.size();
}

/// Student level table: `student_id,level` with level 1 (undergraduate) or 2
/// (graduate). Blank or NA levels are left out of the map.
inline std::map<std::string, StudentLevel> parse_level_csv(std::string_view content,
                                                           std::string_view source = "<input>") {
  auto rows = csv::parse(content, source);
  if (rows.empty()) throw Error(Errc::MalformedHeader, std::string(source) + ": missing header row");
  const auto& header = rows.front().fields;
  auto find = [&](std::string_view name) {
    auto it = std::find_if(header.begin(), header.end(),
                           [&](const std::string& h) { return text::trim(h) == name; });
    if (it == header.end()) {
      throw Error(Errc::MalformedHeader, std::string(source) + ": header lacks column '" + std::string(name) + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto id_col = find("student_id");
  const auto level_col = find("level");
  std::map<std::string, StudentLevel> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r].fields;
    if (f.size() != header.size()) {
      throw Error(Errc::MalformedRow, std::string(source) + ":" + std::to_string(rows[r].line) + ": wrong field count");
    }
    const auto level = text::trim(f[level_col]);
    if (level == "1") {
      out[f[id_col]] = StudentLevel::Undergraduate;
    } else if (level == "2") {
      out[f[id_col]] = StudentLevel::Graduate;
    } else if (!(level.empty() || level == "NA")) {
      throw Error(Errc::MalformedRow, std::string(source) + ":" + std::to_string(rows[r].line) +
                                          ": level must be 1, 2 or NA");
    }
  }
  return out;
}

inline std::map<std::string, StudentLevel> import_level_csv(const std::filesystem::path& path) {
  return parse_level_csv(csv::read_all(path), path.string());
}

inline void write_level_csv(const std::map<std::string, StudentLevel>& levels, std::ostream& out) {
  out << "student_id,level\n";
  for (const auto& [id, level] : levels) out << csv::quote(id) << ',' << static_cast<int>(level) << '\n';
}

}  // namespace edl::store
