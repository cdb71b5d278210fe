#pragma once

// Report builders over a grade-record set. Each report renders as tab-separated
// text laid out like a results table, plus a JSON document with full-precision
// numbers. Overlay series are written as CSV for plotting.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "edl/analytics.hpp"
#include "edl/grade_csv.hpp"
#include "edl/json_io.hpp"

namespace edl::reports {

using analytics::Selector;

inline const Selector kAI1{Grader::AI, Attempt::First};
inline const Selector kTeacher1{Grader::Teacher, Attempt::First};
inline const Selector kTeacher2{Grader::Teacher, Attempt::Second};
inline const Selector kSelfEval{Grader::SelfEval, std::nullopt};
inline const Selector kTeacherFinal{Grader::TeacherFinal, std::nullopt};

struct Report {
  std::string name;
  std::string text;
  json data;
};

namespace detail {

inline std::string fixed(double v, int digits) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  std::string s = buf;
  // Values that round to zero print without a sign.
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

inline std::string p_value(double p) { return p < 0.001 ? "<.001" : fixed(p, 3); }

inline json number_or_null(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

}  // namespace detail

// ---------------------------------------------------------------------------

struct DescriptiveRow {
  std::string label;
  Selector selector;
};

inline std::vector<DescriptiveRow> descriptive_rows() {
  return {{"Attempt I AI Grade", kAI1},
          {"Attempt I Teacher Grade", kTeacher1},
          {"Attempt II Teacher Grade", kTeacher2},
          {"Student Self-eval", kSelfEval},
          {"Teacher Final Grade", kTeacherFinal}};
}

/// Rows with nothing selected show N = 0. If every row is empty the whole
/// report fails with EmptySelection.
inline Report descriptives_report(const GradeRecords& records) {
  Report r{"descriptives", "Variable\tN\tMean\tStd. Deviation\tMinimum\tMaximum\n", json::array()};
  bool any = false;
  for (const auto& row : descriptive_rows()) {
    try {
      const auto d = analytics::descriptive_stats(records, row.selector);
      any = true;
      r.text += row.label + "\t" + std::to_string(d.n) + "\t" + detail::fixed(d.mean, 2) + "\t" +
                detail::fixed(d.sd, 2) + "\t" + detail::fixed(d.min, 0) + "\t" + detail::fixed(d.max, 0) + "\n";
      r.data.push_back({{"variable", row.label}, {"n", d.n}, {"mean", d.mean},
                        {"sd", detail::number_or_null(d.sd)}, {"min", d.min}, {"max", d.max}});
    } catch (const Error& e) {
      if (e.code() != Errc::EmptySelection) throw;
      r.text += row.label + "\t0\tNA\tNA\tNA\tNA\n";
      r.data.push_back({{"variable", row.label}, {"n", 0}});
    }
  }
  if (!any) throw Error(Errc::EmptySelection, "no non-missing grades for any descriptive variable");
  return r;
}

// ---------------------------------------------------------------------------

/// One paired comparison; differences are first - second.
struct Comparison {
  std::string label;
  Selector first;
  Selector second;
};

inline std::vector<Comparison> wilcoxon_comparisons() {
  return {{"Attempt I: Teacher Grade - AI Grade", kTeacher1, kAI1},
          {"Teacher Grade: Attempt II - Attempt I", kTeacher2, kTeacher1},
          {"Teacher Grade Attempt II - AI Grade Attempt I", kTeacher2, kAI1},
          {"Attempt II: Teacher Final Grade - Student Self-Eval", kTeacherFinal, kSelfEval}};
}

inline Report wilcoxon_report(const GradeRecords& records,
                              const std::vector<Comparison>& comparisons = wilcoxon_comparisons()) {
  Report r{"wilcoxon", "Comparison\tZ\tAsymp. Sig. (2-tailed)\tn_effective\tW+\tpairs\n", json::array()};
  for (const auto& c : comparisons) {
    const auto joined = analytics::join_present(analytics::select(records, c.first),
                                                analytics::select(records, c.second));
    json row{{"comparison", c.label}, {"pairs", joined.size()}};
    try {
      const auto sample = analytics::PairedSample::from(joined);
      const auto t = analytics::wilcoxon_signed_rank(sample);
      row["z"] = t.z;
      row["p_two_tailed"] = t.p_two_tailed;
      row["n_effective"] = t.n_effective;
      row["w_plus"] = t.w_plus;
      if (t.n_effective <= analytics::kMaxExactWilcoxonN) {
        row["p_exact"] = analytics::wilcoxon_signed_rank_exact(sample).p_two_tailed;
      }
      r.text += c.label + "\t" + detail::fixed(t.z, 3) + "\t" + detail::p_value(t.p_two_tailed) + "\t" +
                std::to_string(t.n_effective) + "\t" + detail::fixed(t.w_plus, 1) + "\t" +
                std::to_string(joined.size()) + "\n";
    } catch (const Error& e) {
      if (e.code() != Errc::AllZeroDifferences) throw;
      row["note"] = joined.empty() ? "no pairs" : "all pairs tied";
      r.text += c.label + "\tNA\tNA\t0\tNA\t" + std::to_string(joined.size()) + "\n";
    }
    r.data.push_back(std::move(row));
  }
  return r;
}

// ---------------------------------------------------------------------------

inline Report spearman_report(const GradeRecords& records,
                              const std::map<std::string, StudentLevel>& levels) {
  Report r{"spearman", "Variable\tSpearman's rho\tp-value\tN\n", json::array()};
  for (const auto& lc : analytics::level_correlations(records, levels)) {
    if (lc.result) {
      const auto& c = *lc.result;
      const char* stars = c.p < 0.01 ? "**" : c.p < 0.05 ? "*" : "";
      r.text += lc.variable + "\t" + detail::fixed(c.rho, 2) + stars + "\t" + detail::p_value(c.p) +
                "\t" + std::to_string(c.n) + "\n";
      r.data.push_back({{"variable", lc.variable}, {"rho", c.rho}, {"p", c.p}, {"n", c.n}});
    } else {
      r.text += lc.variable + "\tNA\tNA\t0\n";
      r.data.push_back({{"variable", lc.variable}, {"note", lc.note}});
    }
  }
  r.text += "Note: ** indicates p < .01, * indicates p < .05.\n";
  return r;
}

// ---------------------------------------------------------------------------

inline Report agreement_report(const GradeRecords& records) {
  const auto t = analytics::agreement_table(analytics::select(records, kAI1),
                                            analytics::select(records, kTeacher1));
  Report r{"agreement", "AI and Teacher Grades\tN\tPercentage (%)\n", {}};
  r.text += "Rows with both AI & Teacher Grades present\t" + std::to_string(t.n_both) + "\t" +
            (t.n_both ? "100.00%" : "0.00%") + "\n";
  r.text += "Same Grades\t" + std::to_string(t.same) + "\t" + t.pct_same.str() + "\n";
  r.text += "Different Grades\t" + std::to_string(t.different) + "\t" + t.pct_different.str() + "\n";
  r.data = {{"n_both", t.n_both},
            {"same", t.same},
            {"different", t.different},
            {"pct_same", t.pct_same.str()},
            {"pct_different", t.pct_different.str()}};
  return r;
}

namespace detail {

inline std::string transition_text(const analytics::TransitionTable& t, const std::string& heading,
                                   const std::string& present, const std::string& a, const std::string& b) {
  std::string s = heading + "\tN\tPercentage (%)\n";
  s += present + "\t" + std::to_string(t.n_both) + "\t" + (t.n_both ? "100.00%" : "0.00%") + "\n";
  s += a + " > " + b + "\t" + std::to_string(t.declined) + "\t" + t.pct_declined.str() + "\n";
  s += a + " < " + b + "\t" + std::to_string(t.improved) + "\t" + t.pct_improved.str() + "\n";
  s += a + " = " + b + "\t" + std::to_string(t.unchanged) + "\t" + t.pct_unchanged.str() + "\n";
  return s;
}

inline json transition_json(const analytics::TransitionTable& t) {
  return {{"n_both", t.n_both},
          {"improved", t.improved},
          {"declined", t.declined},
          {"unchanged", t.unchanged},
          {"pct_improved", t.pct_improved.str()},
          {"pct_declined", t.pct_declined.str()},
          {"pct_unchanged", t.pct_unchanged.str()}};
}

}  // namespace detail

/// Teacher attempt I vs attempt II, then AI attempt I vs teacher attempt II.
inline Report transitions_report(const GradeRecords& records) {
  const auto teacher = analytics::transition_table(analytics::select(records, kTeacher1),
                                                   analytics::select(records, kTeacher2));
  const auto ai = analytics::transition_table(analytics::select(records, kAI1),
                                              analytics::select(records, kTeacher2));
  Report r{"transitions", {}, {}};
  r.text = detail::transition_text(teacher, "Teacher Grades for Attempt I vs. Attempt II",
                                   "Rows with both Teacher Grades for Attempt I & II present",
                                   "Attempt I", "Attempt II");
  r.text += "\n";
  r.text += detail::transition_text(
      ai, "AI Grades for Attempt I vs. Teacher Grades for Attempt II",
      "Rows with both AI Grades for Attempt I & Teacher Grades for Attempt II present",
      "AI Grades Attempt I", "Teacher Grades Attempt II");
  r.data = {{"teacher_attempt1_vs_attempt2", detail::transition_json(teacher)},
            {"ai_attempt1_vs_teacher_attempt2", detail::transition_json(ai)}};
  return r;
}

// ---------------------------------------------------------------------------

struct OverlaySpec {
  std::string file_stem;
  Selector a;
  Selector b;
  bool mismatch_only = false;
};

inline std::vector<OverlaySpec> overlay_specs() {
  return {{"overlay_ai1_vs_teacher1", kAI1, kTeacher1, false},
          {"overlay_ai1_vs_teacher1_mismatch", kAI1, kTeacher1, true},
          {"overlay_teacher1_vs_teacher2", kTeacher1, kTeacher2, false},
          {"overlay_ai1_vs_teacher2", kAI1, kTeacher2, false}};
}

inline void write_overlay_csv(const std::vector<analytics::OverlayRow>& rows, std::ostream& out) {
  out << "index,student_id,question_id,semester,grade_a,grade_b,match\n";
  for (const auto& r : rows) {
    out << r.index << ',' << store::csv::quote(r.key.student_id) << ','
        << store::csv::quote(r.key.question_id) << ',' << store::csv::quote(r.key.semester) << ','
        << r.grade_a.value() << ',' << r.grade_b.value() << ',' << (r.match ? "true" : "false") << '\n';
  }
}

// ---------------------------------------------------------------------------

inline const std::vector<std::string> kReportNames = {"descriptives", "wilcoxon", "spearman",
                                                      "agreement",    "transitions", "overlay"};

struct AnalyzeOptions {
  std::vector<std::string> reports = {"all"};
  std::optional<std::map<std::string, StudentLevel>> levels;
};

namespace detail {

inline void write_text(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IOFailure, "cannot open " + p.string() + " for writing");
  out << content;
  if (!out.flush()) throw Error(Errc::IOFailure, "write error on " + p.string());
}

}  // namespace detail

/// Builds a named report. "overlay" has no single document and is handled by
/// write_reports.
inline Report build_report(const std::string& name, const GradeRecords& records,
                           const std::optional<std::map<std::string, StudentLevel>>& levels) {
  if (name == "descriptives") return descriptives_report(records);
  if (name == "wilcoxon") return wilcoxon_report(records);
  if (name == "agreement") return agreement_report(records);
  if (name == "transitions") return transitions_report(records);
  if (name == "spearman") {
    if (!levels) throw Error(Errc::ConfigError, "the spearman report needs a student level table");
    return spearman_report(records, *levels);
  }
  throw Error(Errc::ConfigError, "unknown report '" + name + "'");
}

/// Writes each selected report into `out_dir` as <name>.txt and <name>.json;
/// overlay writes one CSV per series. "all" selects every report, skipping
/// spearman when no level table is given. Returns the files written.
inline std::vector<std::filesystem::path> write_reports(const GradeRecords& records,
                                                        const AnalyzeOptions& options,
                                                        const std::filesystem::path& out_dir) {
  std::vector<std::string> names;
  for (const auto& n : options.reports) {
    if (n == "all") {
      for (const auto& k : kReportNames) {
        if (k != "spearman" || options.levels) names.push_back(k);
      }
    } else if (std::find(kReportNames.begin(), kReportNames.end(), n) != kReportNames.end()) {
      names.push_back(n);
    } else {
      throw Error(Errc::ConfigError, "unknown report '" + n + "'");
    }
  }

  // Build everything first so a failing report leaves no partial output.
  std::vector<Report> built;
  std::vector<std::pair<std::string, std::vector<analytics::OverlayRow>>> overlays;
  for (const auto& n : names) {
    if (n == "overlay") {
      for (const auto& spec : overlay_specs()) {
        overlays.emplace_back(spec.file_stem,
                              analytics::overlay_series(analytics::select(records, spec.a),
                                                        analytics::select(records, spec.b),
                                                        analytics::kDefaultOverlayOrder, spec.mismatch_only));
      }
    } else {
      built.push_back(build_report(n, records, options.levels));
    }
  }

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(Errc::IOFailure, "cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  for (const auto& r : built) {
    written.push_back(out_dir / (r.name + ".txt"));
    detail::write_text(written.back(), r.text);
    written.push_back(out_dir / (r.name + ".json"));
    detail::write_text(written.back(), r.data.dump(2) + "\n");
  }
  for (const auto& [stem, rows] : overlays) {
    std::ostringstream ss;
    write_overlay_csv(rows, ss);
    written.push_back(out_dir / (stem + ".csv"));
    detail::write_text(written.back(), ss.str());
  }
  return written;
}

}  // namespace edl::reports
