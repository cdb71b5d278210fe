#include <gtest/gtest.h>

#include <fstream>

#include "edl/grade_csv.hpp"
#include "edl/reports.hpp"
#include "helpers.hpp"

using namespace edl;
using edl::testing::TempDir;

namespace {

const GradeRecords& fixture() {
  static const GradeRecords records =
      store::import_grade_csv(std::filesystem::path(EDL_SOURCE_DIR) / "tests/fixtures/study_grades.csv").records;
  return records;
}

std::map<std::string, StudentLevel> levels() {
  return store::import_level_csv(std::filesystem::path(EDL_SOURCE_DIR) / "tests/fixtures/study_levels.csv");
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

}  // namespace

TEST(Reports, Formatting) {
  EXPECT_EQ(reports::detail::fixed(-0.001, 2), "0.00");
  EXPECT_EQ(reports::detail::fixed(-0.5, 2), "-0.50");
  EXPECT_EQ(reports::detail::fixed(std::nan(""), 2), "NA");
  EXPECT_EQ(reports::detail::p_value(0.0004), "<.001");
  EXPECT_EQ(reports::detail::p_value(0.3173), "0.317");
}

TEST(Reports, Descriptives) {
  auto r = reports::descriptives_report(fixture());
  EXPECT_TRUE(contains(r.text, "Attempt I AI Grade\t918\t1.40\t0.73\t0\t2"));
  EXPECT_TRUE(contains(r.text, "Student Self-eval\t74\t1.99\t0.12\t1\t2"));
  ASSERT_EQ(r.data.size(), 5u);
  EXPECT_EQ(r.data[4]["n"], 114);
  EXPECT_ERRC(reports::descriptives_report({}), Errc::EmptySelection);
}

TEST(Reports, AgreementAndTransitions) {
  auto a = reports::agreement_report(fixture());
  EXPECT_TRUE(contains(a.text, "Same Grades\t654\t83.63%"));
  EXPECT_TRUE(contains(a.text, "Different Grades\t128\t16.37%"));
  EXPECT_EQ(a.data["pct_same"], "83.63%");

  auto t = reports::transitions_report(fixture());
  EXPECT_TRUE(contains(t.text, "Attempt I > Attempt II\t3\t0.31%"));
  EXPECT_TRUE(contains(t.text, "Attempt I < Attempt II\t146\t15.18%"));
  EXPECT_TRUE(contains(t.text, "Attempt I = Attempt II\t813\t84.51%"));
  EXPECT_EQ(t.data["ai_attempt1_vs_teacher_attempt2"]["improved"], 205);
}

TEST(Reports, Wilcoxon) {
  auto r = reports::wilcoxon_report(fixture());
  ASSERT_EQ(r.data.size(), 4u);
  EXPECT_NEAR(r.data[0]["z"].get<double>(), 6.3916666951, 1e-9);
  EXPECT_FALSE(r.data[0].contains("p_exact"));
  EXPECT_TRUE(r.data[3].contains("p_exact"));
  EXPECT_TRUE(contains(r.text, "\t6.392\t<.001\t128\t"));
}

TEST(Reports, WilcoxonWithNoPairsShowsNote) {
  auto r = reports::wilcoxon_report({});
  for (const auto& row : r.data) EXPECT_EQ(row["note"], "no pairs");
}

TEST(Reports, Spearman) {
  auto r = reports::spearman_report(fixture(), levels());
  EXPECT_TRUE(contains(r.text, "AI Grade - Attempt I\t0.04\t0.285\t918"));
  EXPECT_ERRC(reports::build_report("spearman", fixture(), std::nullopt), Errc::ConfigError);
  EXPECT_ERRC(reports::build_report("nope", fixture(), std::nullopt), Errc::ConfigError);
}

TEST(Reports, WriteAllMatchesDirectCalls) {
  TempDir dir;
  reports::AnalyzeOptions opts;
  opts.levels = levels();
  auto files = reports::write_reports(fixture(), opts, dir.path());
  EXPECT_EQ(files.size(), 5u * 2 + 4);
  EXPECT_EQ(store::csv::read_all(dir / "agreement.txt"), reports::agreement_report(fixture()).text);
  EXPECT_EQ(json::parse(store::csv::read_all(dir / "wilcoxon.json")), reports::wilcoxon_report(fixture()).data);
  const auto mism = store::csv::read_all(dir / "overlay_ai1_vs_teacher1_mismatch.csv");
  EXPECT_EQ(std::count(mism.begin(), mism.end(), '\n'), 129);
}

TEST(Reports, AllWithoutLevelsSkipsSpearman) {
  TempDir dir;
  auto files = reports::write_reports(fixture(), {}, dir.path());
  EXPECT_FALSE(std::filesystem::exists(dir / "spearman.txt"));
  EXPECT_TRUE(std::filesystem::exists(dir / "descriptives.txt"));
}

TEST(Reports, FailureWritesNothing) {
  TempDir dir;
  reports::AnalyzeOptions opts;
  opts.reports = {"agreement", "spearman"};
  EXPECT_ERRC(reports::write_reports(fixture(), opts, dir / "out"), Errc::ConfigError);
  EXPECT_FALSE(std::filesystem::exists(dir / "out"));
  opts.reports = {"bogus"};
  EXPECT_ERRC(reports::write_reports(fixture(), opts, dir / "out"), Errc::ConfigError);
}
