#pragma once

#include <array>
#include <chrono>
#include <compare>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "edl/error.hpp"
#include "edl/text.hpp"

namespace edl {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

inline Timestamp now() {
  return std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now());
}

/// Three-level rubric score. Only 0, 1 and 2 are representable.
class GradeValue {
 public:
  enum class Level : std::uint8_t { NotAssessable = 0, ImprovementNeeded = 1, Satisfactory = 2 };

  constexpr GradeValue() = default;
  constexpr GradeValue(Level level) : level_(level) {  // NOLINT(google-explicit-constructor)
    if (static_cast<std::uint8_t>(level) > 2) throw Error(Errc::InvalidGrade, "level out of range");
  }

  static constexpr GradeValue from_int(int value) {
    if (value < 0 || value > 2) {
      throw Error(Errc::InvalidGrade, "grade must be 0, 1 or 2, got " + std::to_string(value));
    }
    return GradeValue(static_cast<Level>(value));
  }

  constexpr Level level() const noexcept { return level_; }
  constexpr int value() const noexcept { return static_cast<int>(level_); }

  friend constexpr auto operator<=>(GradeValue, GradeValue) = default;

 private:
  Level level_ = Level::NotAssessable;
};

inline constexpr GradeValue kNotAssessable{GradeValue::Level::NotAssessable};
inline constexpr GradeValue kImprovementNeeded{GradeValue::Level::ImprovementNeeded};
inline constexpr GradeValue kSatisfactory{GradeValue::Level::Satisfactory};
inline constexpr std::array<GradeValue, 3> kAllGrades = {kNotAssessable, kImprovementNeeded,
                                                         kSatisfactory};

constexpr std::string_view canonical_name(GradeValue g) noexcept {
  switch (g.level()) {
    case GradeValue::Level::NotAssessable: return "Not Assessable";
    case GradeValue::Level::ImprovementNeeded: return "Improvement Needed";
    case GradeValue::Level::Satisfactory: return "Satisfactory";
  }
  return "";
}

constexpr char letter_code(GradeValue g) noexcept {
  switch (g.level()) {
    case GradeValue::Level::NotAssessable: return 'N';
    case GradeValue::Level::ImprovementNeeded: return 'I';
    case GradeValue::Level::Satisfactory: return 'S';
  }
  return '?';
}

/// Parses a rubric label: a canonical name ("Improvement Needed") or its
/// letter code ("I"), ignoring case, surrounding space and repeated inner space.
inline GradeValue grade_from_label(std::string_view label) {
  std::string folded;
  for (char c : text::trim(label)) {
    const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (space && (folded.empty() || folded.back() == ' ')) continue;
    folded.push_back(space ? ' ' : static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  for (auto g : kAllGrades) {
    if (folded == text::to_lower(canonical_name(g)) ||
        (folded.size() == 1 && folded[0] == std::tolower(letter_code(g)))) {
      return g;
    }
  }
  throw Error(Errc::UnknownLabel, "no rubric level named '" + std::string(label) + "'");
}

enum class Role { Teacher, Student, AIAgent };

constexpr std::string_view to_string(Role r) noexcept {
  switch (r) {
    case Role::Teacher: return "Teacher";
    case Role::Student: return "Student";
    case Role::AIAgent: return "AIAgent";
  }
  return "";
}

struct Actor {
  Role role = Role::AIAgent;
  std::string id;

  static Actor teacher(std::string id) { return {Role::Teacher, std::move(id)}; }
  static Actor student(std::string id) { return {Role::Student, std::move(id)}; }
  static Actor agent(std::string id = "ai-agent") { return {Role::AIAgent, std::move(id)}; }

  bool operator==(const Actor&) const = default;
};

struct Rubric {
  /// Human-readable descriptor per level, indexed by GradeValue::value().
  std::array<std::string, 3> descriptors = {
      "No response, or the response cannot be assessed against the key.",
      "Partially addresses the key content; needs elaboration.",
      "Covers the key content.",
  };
  double satisfactory_threshold = 0.75;
  double improvement_threshold = 0.25;

  /// Throws InvalidRubric unless 0 <= improvement < satisfactory <= 1.
  void validate() const {
    if (!(improvement_threshold >= 0.0 && improvement_threshold < satisfactory_threshold &&
          satisfactory_threshold <= 1.0)) {
      throw Error(Errc::InvalidRubric, "thresholds must satisfy 0 <= improvement < satisfactory <= 1");
    }
  }

  bool operator==(const Rubric&) const = default;
};

struct Document {
  std::string title;
  std::string body;
  bool operator==(const Document&) const = default;
};

struct Question {
  std::string id;
  std::string prompt;
  bool operator==(const Question&) const = default;
};

/// Teacher input {materials, questions, answer keys, rubric}. Unchecked until
/// passed through validate_package().
struct AssignmentPackage {
  std::string package_id;
  std::string semester;
  std::vector<Document> materials;
  std::vector<Question> questions;
  std::vector<std::string> answer_keys;
  Rubric rubric;

  bool operator==(const AssignmentPackage&) const = default;
};

class ValidatedPackage;
ValidatedPackage validate_package(AssignmentPackage candidate);

/// An AssignmentPackage whose invariants have been checked. Only
/// validate_package() can produce one.
class ValidatedPackage {
 public:
  const AssignmentPackage& get() const noexcept { return pkg_; }
  const AssignmentPackage* operator->() const noexcept { return &pkg_; }
  const std::string& id() const noexcept { return pkg_.package_id; }
  std::size_t question_count() const noexcept { return pkg_.questions.size(); }

  bool operator==(const ValidatedPackage&) const = default;

 private:
  explicit ValidatedPackage(AssignmentPackage pkg) : pkg_(std::move(pkg)) {}
  friend ValidatedPackage validate_package(AssignmentPackage candidate);

  AssignmentPackage pkg_;
};

inline ValidatedPackage validate_package(AssignmentPackage candidate) {
  if (candidate.package_id.empty()) throw Error(Errc::EmptyPackageId, "package_id is required");
  if (candidate.questions.empty()) throw Error(Errc::EmptyPackage, "package has no questions");
  if (candidate.questions.size() != candidate.answer_keys.size()) {
    throw Error(Errc::MismatchedKeyCount,
                std::to_string(candidate.questions.size()) + " questions but " +
                    std::to_string(candidate.answer_keys.size()) + " answer keys");
  }
  std::set<std::string_view> seen;
  for (const auto& q : candidate.questions) {
    if (!seen.insert(q.id).second) {
      throw Error(Errc::DuplicateQuestionId, "question id '" + q.id + "' appears twice");
    }
  }
  for (std::size_t i = 0; i < candidate.answer_keys.size(); ++i) {
    if (text::content_tokens(candidate.answer_keys[i]).empty()) {
      throw Error(Errc::EmptyAnswerKey,
                  "answer key for '" + candidate.questions[i].id + "' has no content words");
    }
  }
  candidate.rubric.validate();
  return ValidatedPackage(std::move(candidate));
}

/// First attempt: one response per question, blanks allowed.
struct AnswerSet {
  std::vector<std::string> answers;
  bool operator==(const AnswerSet&) const = default;
};

/// Second attempt plus the self-reflection item. An absent reflection is
/// rejected by the engine; a present but blank one is accepted.
struct RevisedAnswerSet {
  std::vector<std::string> answers;
  std::optional<std::string> self_reflection;
  bool operator==(const RevisedAnswerSet&) const = default;
};

struct FeedbackEntry {
  std::string feedback;
  GradeValue provisional_grade;
  bool operator==(const FeedbackEntry&) const = default;
};

struct FeedbackBundle {
  std::vector<FeedbackEntry> per_question;
  Timestamp generated_at{};
  std::string provider_id;
  bool operator==(const FeedbackBundle&) const = default;
};

enum class StudentLevel { Undergraduate = 1, Graduate = 2 };

enum class Attempt { First = 1, Second = 2 };

enum class Grader { AI, Teacher, SelfEval, TeacherFinal };

inline constexpr std::array<Grader, 4> kAllGraders = {Grader::AI, Grader::Teacher, Grader::SelfEval,
                                                      Grader::TeacherFinal};

constexpr std::string_view to_string(Grader g) noexcept {
  switch (g) {
    case Grader::AI: return "AI";
    case Grader::Teacher: return "Teacher";
    case Grader::SelfEval: return "SelfEval";
    case Grader::TeacherFinal: return "TeacherFinal";
  }
  return "";
}

inline std::optional<Grader> grader_from_string(std::string_view s) {
  for (auto g : kAllGraders) {
    if (to_string(g) == s) return g;
  }
  return std::nullopt;
}

/// Question id used by holistic (whole-assignment) records: self-evaluation
/// and the teacher's final grade.
inline constexpr std::string_view kHolisticQuestionId = "holistic";

/// One grade observation. An empty `grade` means Missing, which is distinct
/// from NotAssessable.
struct GradeRecord {
  std::string student_id;
  std::optional<StudentLevel> student_level;
  std::string semester;
  std::string question_id;
  Attempt attempt = Attempt::First;
  Grader grader = Grader::AI;
  std::optional<GradeValue> grade;

  bool operator==(const GradeRecord&) const = default;
  auto operator<=>(const GradeRecord&) const = default;
};

using GradeRecords = std::vector<GradeRecord>;

}  // namespace edl
