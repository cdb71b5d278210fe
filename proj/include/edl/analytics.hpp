#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "edl/domain.hpp"

namespace edl::analytics {

// ---------------------------------------------------------------------------
// Record selection and joining

/// Picks the records of one grader, optionally restricted to one attempt.
struct Selector {
  Grader grader = Grader::AI;
  std::optional<Attempt> attempt;

  bool matches(const GradeRecord& r) const {
    return r.grader == grader && (!attempt || r.attempt == *attempt);
  }
};

inline GradeRecords select(const GradeRecords& records, const Selector& sel) {
  GradeRecords out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out),
               [&](const GradeRecord& r) { return sel.matches(r); });
  return out;
}

/// Join key shared by every paired analysis.
struct RecordKey {
  std::string student_id;
  std::string question_id;
  std::string semester;
  auto operator<=>(const RecordKey&) const = default;
};

inline RecordKey key_of(const GradeRecord& r) { return {r.student_id, r.question_id, r.semester}; }

struct JoinedGrade {
  RecordKey key;
  GradeValue a;
  GradeValue b;
};

namespace detail {

inline std::map<RecordKey, GradeValue> index_present(const GradeRecords& records, const char* side) {
  std::map<RecordKey, GradeValue> out;
  for (const auto& r : records) {
    if (!r.grade) continue;
    if (!out.emplace(key_of(r), *r.grade).second) {
      throw Error(Errc::DuplicateRecord, std::string(side) + " side has two grades for student '" +
                                             r.student_id + "', question '" + r.question_id +
                                             "', semester '" + r.semester + "'");
    }
  }
  return out;
}

}  // namespace detail

/// Inner join on (student, question, semester) over records whose grade is
/// present on both sides. Missing grades drop out pairwise. Sorted by key.
inline std::vector<JoinedGrade> join_present(const GradeRecords& a, const GradeRecords& b) {
  const auto ia = detail::index_present(a, "first");
  const auto ib = detail::index_present(b, "second");
  std::vector<JoinedGrade> out;
  for (const auto& [k, ga] : ia) {
    if (auto it = ib.find(k); it != ib.end()) out.push_back({k, ga, it->second});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Descriptive statistics

struct Descriptives {
  std::size_t n = 0;
  double mean = 0.0;
  /// Sample standard deviation (n - 1 denominator); NaN when n == 1.
  double sd = 0.0;
  double min = 0.0;
  double max = 0.0;
};

inline Descriptives describe(std::span<const double> values) {
  if (values.empty()) throw Error(Errc::EmptySelection, "no values to describe");
  Descriptives d;
  d.n = values.size();
  d.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(d.n);
  double ss = 0.0;
  for (double v : values) ss += (v - d.mean) * (v - d.mean);
  d.sd = d.n > 1 ? std::sqrt(ss / static_cast<double>(d.n - 1)) : std::nan("");
  auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  d.min = *lo;
  d.max = *hi;
  return d;
}

/// Descriptives of the non-missing grades picked by `sel`.
inline Descriptives descriptive_stats(const GradeRecords& records, const Selector& sel) {
  std::vector<double> values;
  for (const auto& r : records) {
    if (sel.matches(r) && r.grade) values.push_back(r.grade->value());
  }
  if (values.empty()) {
    throw Error(Errc::EmptySelection, "no non-missing " + std::string(to_string(sel.grader)) +
                                          " grades in selection");
  }
  return describe(values);
}

// ---------------------------------------------------------------------------
// Ranking

/// 1-based ranks with ties sharing the average of the positions they span.
inline std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank test

struct PairedSample {
  std::vector<std::pair<double, double>> pairs;

  static PairedSample from(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw Error(Errc::LengthMismatch, "paired sample needs equal lengths");
    PairedSample s;
    for (std::size_t i = 0; i < x.size(); ++i) s.pairs.emplace_back(x[i], y[i]);
    return s;
  }

  /// Pairs (first, second) from a join of two record sets.
  static PairedSample from(const std::vector<JoinedGrade>& joined) {
    PairedSample s;
    for (const auto& j : joined) s.pairs.emplace_back(j.a.value(), j.b.value());
    return s;
  }
};

struct TestResult {
  /// Signed: positive when the first member of each pair tends to be larger.
  double z = 0.0;
  double p_two_tailed = 1.0;
  std::size_t n_effective = 0;
  /// Sum of ranks of positive differences.
  double w_plus = 0.0;
  bool exact = false;
};

/// Largest n_effective accepted by the exact test.
inline constexpr std::size_t kMaxExactWilcoxonN = 20;

namespace detail {

struct SignedRanks {
  std::vector<double> ranks;
  std::vector<bool> positive;
  double w_plus = 0.0;
  double z = 0.0;
};

inline SignedRanks signed_ranks(const PairedSample& sample) {
  std::vector<double> diffs;
  for (const auto& [x, y] : sample.pairs) {
    if (x != y) diffs.push_back(x - y);
  }
  if (diffs.empty()) throw Error(Errc::AllZeroDifferences, "every pair is tied");

  SignedRanks out;
  std::vector<double> mags(diffs.size());
  std::transform(diffs.begin(), diffs.end(), mags.begin(), [](double d) { return std::abs(d); });
  out.ranks = average_ranks(mags);
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    out.positive.push_back(diffs[i] > 0);
    if (diffs[i] > 0) out.w_plus += out.ranks[i];
  }

  // Tie correction: sum over groups of equal |d| of (t^3 - t).
  std::sort(mags.begin(), mags.end());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < mags.size();) {
    std::size_t j = i;
    while (j < mags.size() && mags[j] == mags[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double n = static_cast<double>(diffs.size());
  const double mean = n * (n + 1.0) / 4.0;
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
  out.z = (out.w_plus - mean) / std::sqrt(var);
  return out;
}

inline double normal_two_tailed(double z) { return std::clamp(std::erfc(std::abs(z) / std::sqrt(2.0)), 0.0, 1.0); }

}  // namespace detail

/// Differences are first - second. Zero differences are dropped, |d| gets
/// average ranks, and Z uses the tie-corrected normal approximation without
/// continuity correction.
inline TestResult wilcoxon_signed_rank(const PairedSample& sample) {
  auto sr = detail::signed_ranks(sample);
  return {sr.z, detail::normal_two_tailed(sr.z), sr.ranks.size(), sr.w_plus, false};
}

/// Same statistic, but p is exact: the share of the 2^n equally likely sign
/// assignments whose W+ lies at least as far from its mean as the observed one.
inline TestResult wilcoxon_signed_rank_exact(const PairedSample& sample) {
  auto sr = detail::signed_ranks(sample);
  const auto n = sr.ranks.size();
  if (n > kMaxExactWilcoxonN) {
    throw Error(Errc::SampleTooLarge, "exact mode supports n_effective <= " +
                                          std::to_string(kMaxExactWilcoxonN) + ", got " +
                                          std::to_string(n));
  }
  // Average ranks are multiples of 1/2, so doubled ranks are integers.
  std::vector<std::int64_t> r2(n);
  std::int64_t total = 0, observed = 0;
  for (std::size_t i = 0; i < n; ++i) {
    r2[i] = std::llround(2.0 * sr.ranks[i]);
    total += r2[i];
    if (sr.positive[i]) observed += r2[i];
  }
  std::vector<std::uint64_t> ways(static_cast<std::size_t>(total) + 1, 0);
  ways[0] = 1;
  for (auto r : r2) {
    for (std::int64_t s = total; s >= r; --s) ways[s] += ways[s - r];
  }
  const std::int64_t observed_gap = std::abs(2 * observed - total);
  std::uint64_t extreme = 0;
  for (std::int64_t s = 0; s <= total; ++s) {
    if (std::abs(2 * s - total) >= observed_gap) extreme += ways[s];
  }
  const double p = static_cast<double>(extreme) / std::ldexp(1.0, static_cast<int>(n));
  return {sr.z, std::min(1.0, p), n, sr.w_plus, true};
}

// ---------------------------------------------------------------------------
// Spearman rank correlation

struct CorrelationResult {
  double rho = 0.0;
  double p = 1.0;
  std::size_t n = 0;
};

inline double pearson(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// rho is the Pearson correlation of average ranks. p is two-tailed from
/// t = rho * sqrt((n - 2) / (1 - rho^2)) on n - 2 degrees of freedom, and 0
/// when |rho| = 1.
inline CorrelationResult spearman_rho(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(Errc::LengthMismatch, std::to_string(x.size()) + " vs " + std::to_string(y.size()) + " values");
  }
  if (x.size() < 3) throw Error(Errc::DegenerateInput, "spearman needs at least 3 observations");
  auto distinct = [](std::span<const double> v) {
    return std::any_of(v.begin(), v.end(), [&](double a) { return a != v.front(); });
  };
  if (!distinct(x) || !distinct(y)) throw Error(Errc::DegenerateInput, "constant sequence");

  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  CorrelationResult out;
  out.n = x.size();
  out.rho = pearson(rx, ry);
  if (std::abs(out.rho) >= 1.0) {
    out.p = 0.0;
  } else {
    const double dof = static_cast<double>(out.n - 2);
    const double t = out.rho * std::sqrt(dof / ((1.0 - out.rho) * (1.0 + out.rho)));
    boost::math::students_t_distribution<double> dist(dof);
    out.p = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 0.0, 1.0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Agreement and transition tables

/// A percentage held as an integer count of hundredths, rounded half-up.
struct Percentage {
  std::int64_t hundredths = 0;

  static Percentage of(std::size_t count, std::size_t total) {
    if (total == 0) return {};
    const auto c = static_cast<std::int64_t>(count), t = static_cast<std::int64_t>(total);
    return {(2 * c * 10000 + t) / (2 * t)};
  }

  double value() const { return static_cast<double>(hundredths) / 100.0; }

  /// "83.63%"
  std::string str() const {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%lld.%02lld%%", static_cast<long long>(hundredths / 100),
                  static_cast<long long>(hundredths % 100));
    return buf;
  }

  auto operator<=>(const Percentage&) const = default;
};

struct AgreementTable {
  std::size_t n_both = 0;
  std::size_t same = 0;
  std::size_t different = 0;
  Percentage pct_same;
  Percentage pct_different;
};

/// Compares two graders' grades on the records present on both sides.
inline AgreementTable agreement_table(const GradeRecords& a, const GradeRecords& b) {
  AgreementTable t;
  for (const auto& j : join_present(a, b)) {
    ++t.n_both;
    (j.a == j.b ? t.same : t.different) += 1;
  }
  t.pct_same = Percentage::of(t.same, t.n_both);
  t.pct_different = Percentage::of(t.different, t.n_both);
  return t;
}

struct TransitionTable {
  std::size_t n_both = 0;
  /// first < second
  std::size_t improved = 0;
  /// first > second
  std::size_t declined = 0;
  std::size_t unchanged = 0;
  Percentage pct_improved;
  Percentage pct_declined;
  Percentage pct_unchanged;
};

/// Direction of change from `first` to `second`, joined per question.
inline TransitionTable transition_table(const GradeRecords& first, const GradeRecords& second) {
  TransitionTable t;
  for (const auto& j : join_present(first, second)) {
    ++t.n_both;
    if (j.a < j.b) {
      ++t.improved;
    } else if (j.a > j.b) {
      ++t.declined;
    } else {
      ++t.unchanged;
    }
  }
  t.pct_improved = Percentage::of(t.improved, t.n_both);
  t.pct_declined = Percentage::of(t.declined, t.n_both);
  t.pct_unchanged = Percentage::of(t.unchanged, t.n_both);
  return t;
}

// ---------------------------------------------------------------------------
// Student level correlations

struct LevelVariable {
  std::string name;
  Selector selector;
};

/// The grade variables correlated against student level, in report order.
inline std::vector<LevelVariable> level_variables() {
  return {{"AI Grade - Attempt I", {Grader::AI, Attempt::First}},
          {"Teacher Grade - Attempt I", {Grader::Teacher, Attempt::First}},
          {"Teacher Grade - Attempt II", {Grader::Teacher, Attempt::Second}},
          {"Student Self-Evaluation", {Grader::SelfEval, std::nullopt}},
          {"Teacher Final Grade", {Grader::TeacherFinal, std::nullopt}}};
}

struct LevelCorrelation {
  std::string variable;
  /// Absent when this variable alone is degenerate (too few rows, or constant).
  std::optional<CorrelationResult> result;
  std::string note;
};

/// Spearman rho of student level (1 = undergraduate, 2 = graduate) against each
/// grade variable. A record's own level is used when `levels` lacks its student;
/// records with no known level or a missing grade are left out.
inline std::vector<LevelCorrelation> level_correlations(
    const GradeRecords& records, const std::map<std::string, StudentLevel>& levels) {
  auto level_of = [&](const GradeRecord& r) -> std::optional<double> {
    if (auto it = levels.find(r.student_id); it != levels.end()) return static_cast<double>(it->second);
    if (r.student_level) return static_cast<double>(*r.student_level);
    return std::nullopt;
  };

  bool seen_ug = false, seen_grad = false;
  for (const auto& r : records) {
    if (auto l = level_of(r); l && r.grade) (*l == 1.0 ? seen_ug : seen_grad) = true;
  }
  if (!(seen_ug && seen_grad)) {
    throw Error(Errc::DegenerateInput, "every student with a known level shares the same level");
  }

  std::vector<LevelCorrelation> out;
  for (const auto& var : level_variables()) {
    std::vector<double> lv, gv;
    for (const auto& r : records) {
      if (!var.selector.matches(r) || !r.grade) continue;
      if (auto l = level_of(r)) {
        lv.push_back(*l);
        gv.push_back(r.grade->value());
      }
    }
    LevelCorrelation lc{var.name, std::nullopt, {}};
    try {
      lc.result = spearman_rho(lv, gv);
    } catch (const Error& e) {
      if (e.code() != Errc::DegenerateInput) throw;
      lc.note = e.what();
    }
    out.push_back(std::move(lc));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Overlay series

enum class SortField { Student, Question, Semester };

inline const std::vector<SortField> kDefaultOverlayOrder = {SortField::Student, SortField::Question,
                                                            SortField::Semester};

/// Orders strings with embedded numbers numerically: "q2" < "q10".
inline bool natural_less(std::string_view a, std::string_view b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const bool da = std::isdigit(static_cast<unsigned char>(a[i])) != 0;
    const bool db = std::isdigit(static_cast<unsigned char>(b[j])) != 0;
    if (da && db) {
      std::size_t ie = i, je = j;
      while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
      while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
      auto na = a.substr(i, ie - i), nb = b.substr(j, je - j);
      while (na.size() > 1 && na.front() == '0') na.remove_prefix(1);
      while (nb.size() > 1 && nb.front() == '0') nb.remove_prefix(1);
      if (na.size() != nb.size()) return na.size() < nb.size();
      if (na != nb) return na < nb;
      i = ie;
      j = je;
    } else {
      if (a[i] != b[j]) return a[i] < b[j];
      ++i;
      ++j;
    }
  }
  if ((a.size() - i) != (b.size() - j)) return (a.size() - i) < (b.size() - j);
  return a < b;
}

struct OverlayRow {
  std::size_t index = 0;
  RecordKey key;
  GradeValue grade_a;
  GradeValue grade_b;
  bool match = false;
};

/// Plot-ready rows pairing two graders' grades, sorted by `order` and numbered
/// from 1. With `mismatch_only`, only rows whose grades differ are kept (the
/// numbering still follows the full series).
inline std::vector<OverlayRow> overlay_series(const GradeRecords& a, const GradeRecords& b,
                                              const std::vector<SortField>& order = kDefaultOverlayOrder,
                                              bool mismatch_only = false) {
  auto joined = join_present(a, b);
  auto field = [](const RecordKey& k, SortField f) -> std::string_view {
    switch (f) {
      case SortField::Student: return k.student_id;
      case SortField::Question: return k.question_id;
      case SortField::Semester: return k.semester;
    }
    return {};
  };
  std::stable_sort(joined.begin(), joined.end(), [&](const JoinedGrade& x, const JoinedGrade& y) {
    for (auto f : order) {
      const auto fx = field(x.key, f), fy = field(y.key, f);
      if (natural_less(fx, fy)) return true;
      if (natural_less(fy, fx)) return false;
    }
    return false;
  });
  std::vector<OverlayRow> rows;
  for (std::size_t i = 0; i < joined.size(); ++i) {
    const auto& j = joined[i];
    const bool match = j.a == j.b;
    if (mismatch_only && match) continue;
    rows.push_back({i + 1, j.key, j.a, j.b, match});
  }
  return rows;
}

}  // namespace edl::analytics
