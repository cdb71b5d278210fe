#pragma once

// nlohmann/json bindings for the domain vocabulary. Field names here are the
// wire names used by the HTTP API, the event log and the provider adapter.

#include <json.hpp>

#include "edl/domain.hpp"

namespace edl {

using json = nlohmann::json;

namespace detail {

template <typename T>
T required(const json& j, const char* field) {
  if (!j.is_object() || !j.contains(field)) {
    throw Error(Errc::BadRequest, std::string("missing field '") + field + "'");
  }
  try {
    return j.at(field).get<T>();
  } catch (const json::exception& e) {
    throw Error(Errc::BadRequest, std::string("field '") + field + "': " + e.what());
  }
}

template <typename T>
T optional_field(const json& j, const char* field, T fallback) {
  if (!j.is_object() || !j.contains(field) || j.at(field).is_null()) return fallback;
  try {
    return j.at(field).get<T>();
  } catch (const json::exception& e) {
    throw Error(Errc::BadRequest, std::string("field '") + field + "': " + e.what());
  }
}

}  // namespace detail

// GradeValue travels as its integer 0/1/2; labels are accepted on input.
inline void to_json(json& j, const GradeValue& g) { j = g.value(); }
inline void from_json(const json& j, GradeValue& g) {
  if (j.is_number_integer()) {
    g = GradeValue::from_int(j.get<int>());
  } else if (j.is_string()) {
    g = grade_from_label(j.get<std::string>());
  } else {
    throw Error(Errc::InvalidGrade, "grade must be an integer or a rubric label");
  }
}

inline Role role_from_string(std::string_view s) {
  for (auto r : {Role::Teacher, Role::Student, Role::AIAgent}) {
    if (to_string(r) == s) return r;
  }
  throw Error(Errc::BadRequest, "unknown role '" + std::string(s) + "'");
}

inline void to_json(json& j, const Actor& a) { j = json{{"role", to_string(a.role)}, {"id", a.id}}; }
inline void from_json(const json& j, Actor& a) {
  a.role = role_from_string(detail::required<std::string>(j, "role"));
  a.id = detail::required<std::string>(j, "id");
}

inline void to_json(json& j, const Rubric& r) {
  j = json{{"descriptors", r.descriptors},
           {"satisfactory_threshold", r.satisfactory_threshold},
           {"improvement_threshold", r.improvement_threshold}};
}
inline void from_json(const json& j, Rubric& r) {
  Rubric defaults;
  r.descriptors = detail::optional_field(j, "descriptors", defaults.descriptors);
  r.satisfactory_threshold =
      detail::optional_field(j, "satisfactory_threshold", defaults.satisfactory_threshold);
  r.improvement_threshold =
      detail::optional_field(j, "improvement_threshold", defaults.improvement_threshold);
}

inline void to_json(json& j, const Document& d) { j = json{{"title", d.title}, {"body", d.body}}; }
inline void from_json(const json& j, Document& d) {
  d.title = detail::optional_field<std::string>(j, "title", "");
  d.body = detail::required<std::string>(j, "body");
}

inline void to_json(json& j, const Question& q) { j = json{{"id", q.id}, {"prompt", q.prompt}}; }
inline void from_json(const json& j, Question& q) {
  q.id = detail::required<std::string>(j, "id");
  q.prompt = detail::required<std::string>(j, "prompt");
}

inline void to_json(json& j, const AssignmentPackage& p) {
  j = json{{"package_id", p.package_id}, {"semester", p.semester},   {"materials", p.materials},
           {"questions", p.questions},   {"answer_keys", p.answer_keys}, {"rubric", p.rubric}};
}
inline void from_json(const json& j, AssignmentPackage& p) {
  p.package_id = detail::optional_field<std::string>(j, "package_id", "");
  p.semester = detail::optional_field<std::string>(j, "semester", "");
  p.materials = detail::optional_field<std::vector<Document>>(j, "materials", {});
  p.questions = detail::required<std::vector<Question>>(j, "questions");
  p.answer_keys = detail::required<std::vector<std::string>>(j, "answer_keys");
  p.rubric = detail::optional_field<Rubric>(j, "rubric", Rubric{});
}

inline void to_json(json& j, const ValidatedPackage& p) { j = p.get(); }

inline void to_json(json& j, const AnswerSet& a) { j = json{{"answers", a.answers}}; }
inline void from_json(const json& j, AnswerSet& a) {
  a.answers = detail::required<std::vector<std::string>>(j, "answers");
}

inline void to_json(json& j, const RevisedAnswerSet& r) {
  j = json{{"answers", r.answers}};
  j["self_reflection"] = r.self_reflection ? json(*r.self_reflection) : json(nullptr);
}
inline void from_json(const json& j, RevisedAnswerSet& r) {
  r.answers = detail::required<std::vector<std::string>>(j, "answers");
  r.self_reflection.reset();
  if (j.contains("self_reflection") && !j.at("self_reflection").is_null()) {
    r.self_reflection = detail::required<std::string>(j, "self_reflection");
  }
}

inline void to_json(json& j, const FeedbackEntry& e) {
  j = json{{"feedback", e.feedback}, {"provisional_grade", e.provisional_grade}};
}
inline void from_json(const json& j, FeedbackEntry& e) {
  e.feedback = detail::required<std::string>(j, "feedback");
  e.provisional_grade = detail::required<GradeValue>(j, "provisional_grade");
}

inline void to_json(json& j, const FeedbackBundle& b) {
  j = json{{"per_question", b.per_question},
           {"generated_at", b.generated_at.time_since_epoch().count()},
           {"provider_id", b.provider_id}};
}
inline void from_json(const json& j, FeedbackBundle& b) {
  b.per_question = detail::required<std::vector<FeedbackEntry>>(j, "per_question");
  b.generated_at = Timestamp(std::chrono::milliseconds(
      detail::optional_field<std::int64_t>(j, "generated_at", 0)));
  b.provider_id = detail::optional_field<std::string>(j, "provider_id", "");
}

inline void to_json(json& j, const GradeRecord& r) {
  j = json{{"student_id", r.student_id},
           {"semester", r.semester},
           {"question_id", r.question_id},
           {"attempt", static_cast<int>(r.attempt)},
           {"grader", to_string(r.grader)}};
  j["grade"] = r.grade ? json(r.grade->value()) : json(nullptr);
  if (r.student_level) j["student_level"] = static_cast<int>(*r.student_level);
}

}  // namespace edl
