#pragma once

// Cohort simulation: synthetic students driven through the real engine under a
// fixed revision policy, graded by a strict or lenient teacher model.
//
// Randomness comes only from raw mt19937_64 outputs (no std distributions),
// so a seed yields the same transcript on every standard library.

#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "edl/engine.hpp"
#include "edl/grading.hpp"
#include "edl/teacher_intake.hpp"

namespace edl::sim {

enum class PolicyKind { AdoptKey, PartialImprover, Ignorer, Skipper };

struct StudentPolicy {
  PolicyKind kind = PolicyKind::PartialImprover;
  /// PartialImprover only: chance of fixing each answer the AI flagged.
  double p = 0.5;
  std::uint64_t seed = 0;
};

inline std::string to_string(const StudentPolicy& p) {
  switch (p.kind) {
    case PolicyKind::AdoptKey: return "adopt-key";
    case PolicyKind::PartialImprover: {
      char buf[48];
      std::snprintf(buf, sizeof buf, "partial:%g", p.p);
      return buf;
    }
    case PolicyKind::Ignorer: return "ignorer";
    case PolicyKind::Skipper: return "skipper";
  }
  return "?";
}

/// "adopt-key", "ignorer", "skipper", "partial" (p = 0.5) or "partial:P".
inline StudentPolicy parse_policy(std::string_view s, std::uint64_t seed) {
  if (s == "adopt-key") return {PolicyKind::AdoptKey, 0.0, seed};
  if (s == "ignorer") return {PolicyKind::Ignorer, 0.0, seed};
  if (s == "skipper") return {PolicyKind::Skipper, 0.0, seed};
  if (s == "partial") return {PolicyKind::PartialImprover, 0.5, seed};
  if (s.starts_with("partial:")) {
    const std::string num(s.substr(8));
    char* end = nullptr;
    const double p = std::strtod(num.c_str(), &end);
    if (end == num.c_str() || *end != '\0' || !(p >= 0.0 && p <= 1.0)) {
      throw Error(Errc::ConfigError, "partial improver probability must be in [0, 1], got '" + num + "'");
    }
    return {PolicyKind::PartialImprover, p, seed};
  }
  throw Error(Errc::ConfigError, "unknown policy '" + std::string(s) +
                                     "' (adopt-key, partial[:P], ignorer, skipper)");
}

enum class TeacherModel { Strict, Lenient };

/// Per-question synonym lists: key token -> words a lenient reader accepts for it.
using SynonymTable = std::vector<std::map<std::string, std::vector<std::string>>>;

// ---------------------------------------------------------------------------
// Teacher models

/// Overlap after folding every listed synonym onto its key token. Folding both
/// sides through the same map can only merge token classes, so this overlap is
/// never below the literal one.
inline double lenient_overlap(std::string_view answer, std::string_view key,
                              const std::map<std::string, std::vector<std::string>>& synonyms) {
  std::map<std::string, std::string, std::less<>> fold;
  for (const auto& [head, alts] : synonyms) {
    for (const auto& a : alts) fold.emplace(a, head);
  }
  auto canon = [&](std::string t) {
    auto it = fold.find(t);
    return it == fold.end() ? t : it->second;
  };
  std::map<std::string, int> available;
  for (auto& t : text::content_tokens(answer)) ++available[canon(std::move(t))];
  const auto key_tokens = text::content_tokens(key);
  if (key_tokens.empty()) return 0.0;
  std::size_t hit = 0;
  for (const auto& t : key_tokens) {
    auto& n = available[canon(t)];
    if (n > 0) {
      --n;
      ++hit;
    }
  }
  return static_cast<double>(hit) / static_cast<double>(key_tokens.size());
}

/// Grade a teacher model gives one answer. Strict matches the default grader;
/// lenient also credits listed synonyms.
inline GradeValue teacher_grade(TeacherModel model, std::string_view answer, std::string_view key,
                                const Rubric& rubric,
                                const std::map<std::string, std::vector<std::string>>& synonyms) {
  auto score = grading::score_answer(answer, key);
  if (model == TeacherModel::Lenient) score.overlap = lenient_overlap(answer, key, synonyms);
  return grading::grade_from_score(score, rubric);
}

// ---------------------------------------------------------------------------
// Demo package

/// A ten-question special-education assignment with synonym lists for the
/// lenient teacher model.
struct DemoPackage {
  ValidatedPackage package;
  SynonymTable synonyms;
};

inline AssignmentPackage demo_assignment() {
  AssignmentPackage p;
  p.package_id = "iep-basics";
  p.semester = "F24";
  p.materials = {
      {"Individualized Education Programs",
       "An IEP is a written plan developed by a team that includes the parents, a general "
       "educator, a special educator, a district representative and, when appropriate, the "
       "student. It records present levels of performance, measurable annual goals, services, "
       "accommodations and how progress will be reported."},
      {"Placement and Procedural Safeguards",
       "Students receive services in the least restrictive environment appropriate to their "
       "needs. Parents must give informed written consent before the initial evaluation and "
       "receive prior written notice of proposed changes."}};
  const std::vector<std::pair<std::string, std::string>> qa = {
      {"Who are the required members of an IEP team?",
       "required members: parents, general educator, special educator"},
      {"What does the present levels statement describe?",
       "present levels describe current academic achievement and functional performance"},
      {"What makes an annual goal measurable?",
       "measurable goal states observable behavior, criterion and timeline"},
      {"What is the least restrictive environment?",
       "least restrictive environment means education alongside nondisabled peers to maximum extent appropriate"},
      {"When is parental consent required?",
       "written parental consent required before initial evaluation and initial services"},
      {"What is prior written notice?",
       "prior written notice informs parents about proposed or refused changes"},
      {"How often must an IEP be reviewed?",
       "IEP reviewed at least annually; reevaluation every three years"},
      {"What is an accommodation?",
       "accommodation changes how student learns or demonstrates learning without changing standards"},
      {"What is a modification?",
       "modification changes what student expected to learn, altering curriculum standards"},
      {"What is transition planning?",
       "transition planning begins by age sixteen, addressing postsecondary education, employment and independent living"}};
  for (std::size_t i = 0; i < qa.size(); ++i) {
    p.questions.push_back({"q" + std::to_string(i + 1), qa[i].first});
    p.answer_keys.push_back(qa[i].second);
  }
  return p;
}

inline SynonymTable demo_synonyms() {
  return {
      {{"parents", {"guardians", "family"}}, {"educator", {"teacher", "instructor"}}, {"required", {"mandatory"}}},
      {{"describe", {"summarize", "explain"}}, {"current", {"existing"}}, {"achievement", {"skills"}}},
      {{"observable", {"visible", "measurable"}}, {"criterion", {"standard", "benchmark"}}, {"timeline", {"deadline", "timeframe"}}},
      {{"nondisabled", {"typical", "general"}}, {"peers", {"classmates"}}, {"maximum", {"greatest"}}},
      {{"parental", {"parent", "guardian"}}, {"consent", {"permission", "approval"}}, {"evaluation", {"assessment"}}},
      {{"informs", {"tells", "notifies"}}, {"parents", {"family", "guardians"}}, {"changes", {"revisions"}}},
      {{"reviewed", {"revisited", "updated"}}, {"annually", {"yearly"}}, {"three", {"3"}}},
      {{"changes", {"adjusts"}}, {"demonstrates", {"shows"}}, {"standards", {"expectations"}}},
      {{"changes", {"alters"}}, {"expected", {"required"}}, {"curriculum", {"content"}}},
      {{"sixteen", {"16"}}, {"employment", {"job", "work"}}, {"postsecondary", {"college"}}},
  };
}

inline DemoPackage demo_package() { return {validate_package(demo_assignment()), demo_synonyms()}; }

// ---------------------------------------------------------------------------
// Cohort simulation

struct CohortResult {
  GradeRecords records;
  std::map<std::string, StudentLevel> levels;
  std::vector<std::string> session_ids;
};

namespace detail {

/// Uniform double in [0, 1) from the top 53 bits of one draw.
inline double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::size_t below(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(unit(rng) * static_cast<double>(n));
}

/// A first attempt: each key token is kept, swapped for a listed synonym, or
/// dropped, then padded with filler. A few answers are left blank.
inline std::string first_attempt(std::mt19937_64& rng, std::string_view key,
                                 const std::map<std::string, std::vector<std::string>>& synonyms) {
  static constexpr std::array<std::string_view, 6> kFiller = {
      "i think", "from the reading", "basically", "in my classroom", "as discussed", "overall"};
  if (unit(rng) < 0.03) return "";
  std::string out(kFiller[below(rng, kFiller.size())]);
  for (const auto& t : text::content_tokens(key)) {
    const double r = unit(rng);
    if (r < 0.55) {
      out += " " + t;
    } else if (r < 0.8) {
      auto it = synonyms.find(t);
      if (it != synonyms.end() && !it->second.empty()) {
        out += " " + it->second[below(rng, it->second.size())];
      } else {
        out += " " + t;
      }
    }
  }
  return out;
}

inline GradeValue rounded_mean(const std::vector<GradeValue>& grades) {
  int sum = 0;
  for (auto g : grades) sum += g.value();
  const auto n = static_cast<int>(grades.size());
  return GradeValue::from_int(n ? (2 * sum + n) / (2 * n) : 0);
}

}  // namespace detail

/// Runs `n_students` full sessions through `engine`. For each student it emits
/// AI and teacher attempt-1 grades, teacher attempt-2 grades and a holistic
/// final grade, and a self-evaluation unless the student skipped the revision.
inline CohortResult simulate_cohort(LoopEngine& engine, const DemoPackage& demo, int n_students,
                                    const StudentPolicy& policy, TeacherModel teacher_model) {
  if (n_students < 1) throw Error(Errc::ConfigError, "n_students must be at least 1");
  const auto& pkg = demo.package;
  const auto& keys = pkg->answer_keys;
  const auto& rubric = pkg->rubric;
  auto synonyms_for = [&](std::size_t q) -> const std::map<std::string, std::vector<std::string>>& {
    static const std::map<std::string, std::vector<std::string>> kNone;
    return q < demo.synonyms.size() ? demo.synonyms[q] : kNone;
  };
  const auto teacher = Actor::teacher("sim-teacher");
  std::mt19937_64 rng(policy.seed);

  CohortResult out;
  for (int s = 0; s < n_students; ++s) {
    char sid[32];
    std::snprintf(sid, sizeof sid, "sim-stu-%03d", s + 1);
    const std::string student_id = sid;
    const auto student = Actor::student(student_id);
    // The first two students fix one of each level so small cohorts stay mixed.
    const bool graduate = detail::unit(rng) < 0.5;
    out.levels[student_id] = (s < 2 ? s == 1 : graduate) ? StudentLevel::Graduate : StudentLevel::Undergraduate;

    auto session = engine.create_session(pkg, student_id);
    out.session_ids.push_back(session.session_id);
    engine.render_materials(session.session_id);
    engine.render_questions(session.session_id);

    AnswerSet first;
    for (std::size_t q = 0; q < keys.size(); ++q) {
      first.answers.push_back(detail::first_attempt(rng, keys[q], synonyms_for(q)));
    }
    const auto feedback = engine.submit_answers(session.session_id, first, student);

    std::vector<GradeValue> teacher_first;
    for (std::size_t q = 0; q < keys.size(); ++q) {
      const auto& qid = pkg->questions[q].id;
      out.records.push_back({student_id, std::nullopt, pkg->semester, qid, Attempt::First, Grader::AI,
                             feedback.per_question[q].provisional_grade});
      teacher_first.push_back(teacher_grade(teacher_model, first.answers[q], keys[q], rubric, synonyms_for(q)));
      out.records.push_back({student_id, std::nullopt, pkg->semester, qid, Attempt::First,
                             Grader::Teacher, teacher_first.back()});
    }

    std::vector<std::string> reviewed = first.answers;
    if (policy.kind == PolicyKind::Skipper) {
      engine.skip_revision(session.session_id, "student did not resubmit", student);
    } else {
      RevisedAnswerSet rev{first.answers, std::nullopt};
      for (std::size_t q = 0; q < keys.size(); ++q) {
        const bool flagged = feedback.per_question[q].provisional_grade != kSatisfactory;
        switch (policy.kind) {
          case PolicyKind::AdoptKey: rev.answers[q] = keys[q]; break;
          case PolicyKind::PartialImprover:
            // Keeps what was written and appends the key, so overlap cannot drop.
            if (flagged && detail::unit(rng) < policy.p) rev.answers[q] = first.answers[q] + " " + keys[q];
            break;
          default: break;
        }
      }
      rev.self_reflection = "I compared my answers with the feedback and revised where it pointed to gaps.";
      engine.submit_revision(session.session_id, rev, student);
      reviewed = rev.answers;
    }

    std::vector<GradeValue> per_question;
    for (std::size_t q = 0; q < keys.size(); ++q) {
      per_question.push_back(teacher_grade(teacher_model, reviewed[q], keys[q], rubric, synonyms_for(q)));
    }
    const auto holistic = detail::rounded_mean(per_question);
    auto graded = grading::accept_teacher_grades(engine, session.session_id, per_question, holistic, teacher);
    out.records.insert(out.records.end(), graded.begin(), graded.end());

    if (policy.kind != PolicyKind::Skipper) {
      // Students rate themselves one level above their mean AI feedback grade.
      std::vector<GradeValue> ai;
      for (const auto& e : feedback.per_question) ai.push_back(e.provisional_grade);
      const auto self = GradeValue::from_int(std::min(2, detail::rounded_mean(ai).value() + 1));
      out.records.push_back({student_id, std::nullopt, pkg->semester, std::string(kHolisticQuestionId),
                             Attempt::Second, Grader::SelfEval, self});
    }
  }
  return out;
}

/// Runs the cohort on a fresh in-memory engine with deterministic session ids
/// and a fixed clock, so identical inputs give identical transcripts.
inline CohortResult simulate_cohort(const DemoPackage& demo, int n_students, const StudentPolicy& policy,
                                    TeacherModel teacher_model) {
  auto counter = std::make_shared<int>(0);
  EngineOptions opts;
  opts.clock = [] { return Timestamp{std::chrono::milliseconds{1'700'000'000'000}}; };
  opts.next_session_id = [counter] {
    char buf[24];
    std::snprintf(buf, sizeof buf, "sim-%04d", ++*counter);
    return std::string(buf);
  };
  LoopEngine engine(std::make_shared<store::EventStore>(), std::make_shared<grading::OverlapProvider>(),
                    std::move(opts));
  return simulate_cohort(engine, demo, n_students, policy, teacher_model);
}

}  // namespace edl::sim
