// edl: serve the loop, simulate cohorts, and run grade analytics.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "edl/edl.hpp"

namespace fs = std::filesystem;
using namespace edl;

namespace {

sim::DemoPackage load_package_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(Errc::IOFailure, "cannot open " + p.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::BadRequest, p.string() + " is not valid JSON");
  sim::DemoPackage out{validate_package(j.get<AssignmentPackage>()), {}};
  if (j.contains("synonyms")) out.synonyms = j["synonyms"].get<sim::SynonymTable>();
  return out;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IOFailure, "cannot open " + p.string() + " for writing");
  return out;
}

service::Service* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Assignment feedback loop: service, cohort simulation and grade analytics"};
  app.require_subcommand(1);

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  std::optional<std::string> config_file;
  std::optional<int> port_override;
  std::optional<std::string> store_override;
  serve->add_option("--config", config_file, "JSON config file (EDL_* environment variables override it)");
  serve->add_option("--port", port_override, "Listen port");
  serve->add_option("--store", store_override, "Event store directory");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Drive a synthetic cohort through the loop");
  int students = 50;
  std::string policy_name = "partial";
  std::uint64_t seed = 7;
  bool lenient = false;
  std::optional<std::string> package_file, sim_out, levels_out;
  simulate->add_option("--students", students, "Number of students")->check(CLI::PositiveNumber);
  simulate->add_option("--policy", policy_name, "adopt-key | partial[:P] | ignorer | skipper");
  simulate->add_option("--seed", seed, "RNG seed");
  simulate->add_flag("--lenient", lenient, "Teacher credits listed synonyms");
  simulate->add_option("--package", package_file, "Package JSON (with optional synonyms); default is the built-in demo");
  simulate->add_option("--out", sim_out, "Grade CSV output (default stdout)");
  simulate->add_option("--levels-out", levels_out, "Write the student level table here");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Write analytics reports for a grade CSV");
  std::string input;
  std::vector<std::string> report_names{"all"};
  std::optional<std::string> levels_file;
  std::string out_dir = "reports";
  bool quiet = false;
  analyze->add_option("--input", input, "Grade CSV")->required();
  analyze->add_option("--report", report_names,
                      "descriptives | wilcoxon | spearman | agreement | transitions | overlay | all");
  analyze->add_option("--levels", levels_file, "student_id,level CSV (needed for spearman)");
  analyze->add_option("--out", out_dir, "Output directory");
  analyze->add_flag("--quiet", quiet, "Do not echo text reports");

  // import
  auto* import = app.add_subcommand("import", "Check a grade CSV and optionally rewrite it normalized");
  std::string import_input;
  std::optional<std::string> import_out;
  import->add_option("--input", import_input, "Grade CSV")->required();
  import->add_option("--out", import_out, "Normalized CSV output");

  // export
  auto* exp = app.add_subcommand("export", "Export grade records held in an event store");
  std::string export_store;
  std::optional<std::string> export_out;
  exp->add_option("--store", export_store, "Event store directory")->required();
  exp->add_option("--out", export_out, "Grade CSV output (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) {
      auto cfg = service::load_config(config_file ? std::optional<fs::path>(*config_file) : std::nullopt);
      if (port_override) cfg.port = *port_override;
      if (store_override) cfg.store_path = *store_override;
      cfg.validate();
      service::Service svc(cfg);
      const int port = svc.bind();
      g_service = &svc;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "listening on " << cfg.host << ":" << port << " (provider " << svc.engine().provider().id()
                << ", " << (cfg.store_path.empty() ? "in-memory" : "store " + cfg.store_path) << ")\n";
      svc.run();
      g_service = nullptr;
      return 0;
    }

    if (*simulate) {
      const auto pkg = package_file ? load_package_file(*package_file) : sim::demo_package();
      const auto policy = sim::parse_policy(policy_name, seed);
      const auto result = sim::simulate_cohort(pkg, students, policy,
                                               lenient ? sim::TeacherModel::Lenient : sim::TeacherModel::Strict);
      if (sim_out) {
        store::export_grade_csv(result.records, *sim_out);
      } else {
        store::write_grade_csv(result.records, std::cout);
      }
      if (levels_out) {
        auto out = open_out(*levels_out);
        store::write_level_csv(result.levels, out);
      }
      const auto t = analytics::transition_table(analytics::select(result.records, reports::kTeacher1),
                                                 analytics::select(result.records, reports::kTeacher2));
      std::cerr << "simulated " << students << " students (" << sim::to_string(policy) << ", seed " << seed
                << ", " << (lenient ? "lenient" : "strict") << " teacher): " << result.records.size()
                << " records; teacher attempt I->II improved " << t.improved << ", declined " << t.declined
                << ", unchanged " << t.unchanged << "\n";
      return 0;
    }

    if (*analyze) {
      const auto imported = store::import_grade_csv(input);
      reports::AnalyzeOptions opts;
      opts.reports = report_names;
      if (levels_file) opts.levels = store::import_level_csv(*levels_file);
      const auto files = reports::write_reports(imported.records, opts, out_dir);
      for (const auto& f : files) {
        if (!quiet && f.extension() == ".txt") std::cout << store::csv::read_all(f) << "\n";
        std::cerr << "wrote " << f.string() << "\n";
      }
      if (imported.report.unparseable_grades) {
        std::cerr << "note: " << imported.report.unparseable_grades << " unparseable grade cells read as missing\n";
      }
      return 0;
    }

    if (*import) {
      const auto imported = store::import_grade_csv(import_input);
      const auto& r = imported.report;
      std::cout << "rows\t" << r.rows << "\nmissing (NA)\t" << r.missing_grades << "\nunparseable\t"
                << r.unparseable_grades << "\n";
      for (const auto& [g, n] : r.rows_per_grader) std::cout << to_string(g) << "\t" << n << "\n";
      if (import_out) store::export_grade_csv(imported.records, *import_out);
      return 0;
    }

    if (*exp) {
      LoopEngine engine(std::make_shared<store::EventStore>(export_store), nullptr);
      engine.recover();
      GradeRecords records;
      for (const auto& s : engine.sessions()) {
        auto more = grade_records_of(s, engine.package_of(s));
        records.insert(records.end(), more.begin(), more.end());
      }
      std::sort(records.begin(), records.end());
      if (export_out) {
        store::export_grade_csv(records, *export_out);
      } else {
        store::write_grade_csv(records, std::cout);
      }
      std::cerr << "exported " << records.size() << " records from " << engine.sessions().size() << " sessions\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
