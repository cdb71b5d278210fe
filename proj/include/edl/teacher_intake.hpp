#pragma once

#include <optional>
#include <string>
#include <vector>

#include "edl/engine.hpp"

namespace edl::grading {

/// Teacher grading of a forwarded session: per-question attempt-2 grades plus
/// one holistic grade. Closes the session and returns the teacher's records
/// (one Teacher record per question, then one TeacherFinal record).
inline GradeRecords accept_teacher_grades(LoopEngine& engine, const std::string& session_id,
                                          const std::vector<GradeValue>& per_question,
                                          GradeValue holistic, const Actor& teacher,
                                          std::optional<std::uint64_t> expected_version = {}) {
  const auto current = engine.session(session_id);
  if (current.phase != Phase::ForwardedToTeacher) {
    throw Error(Errc::WrongPhase, "teacher grading needs ForwardedToTeacher, session is at " +
                                      std::string(to_string(current.phase)));
  }
  if (per_question.size() != current.question_count) {
    throw Error(Errc::CountMismatch, std::to_string(per_question.size()) + " grades for " +
                                         std::to_string(current.question_count) + " questions");
  }
  const auto closed =
      engine.record_final_grade(session_id, holistic, teacher, per_question, expected_version);
  const auto pkg = engine.package_of(closed);

  GradeRecords out;
  for (std::size_t i = 0; i < per_question.size(); ++i) {
    out.push_back({closed.student_id, std::nullopt, pkg->semester, pkg->questions[i].id,
                   Attempt::Second, Grader::Teacher, per_question[i]});
  }
  out.push_back({closed.student_id, std::nullopt, pkg->semester, std::string(kHolisticQuestionId),
                 Attempt::Second, Grader::TeacherFinal, holistic});
  return out;
}

}  // namespace edl::grading

namespace edl {

/// Every grade observation a session holds: attempt-1 AI grades from the
/// archived feedback, and the teacher's attempt-2 and final grades once closed.
inline GradeRecords grade_records_of(const Session& s, const ValidatedPackage& pkg) {
  GradeRecords out;
  const auto& qs = pkg->questions;
  if (s.feedback) {
    for (std::size_t i = 0; i < s.feedback->per_question.size() && i < qs.size(); ++i) {
      out.push_back({s.student_id, std::nullopt, pkg->semester, qs[i].id, Attempt::First, Grader::AI,
                     s.feedback->per_question[i].provisional_grade});
    }
  }
  for (std::size_t i = 0; i < s.teacher_question_grades.size() && i < qs.size(); ++i) {
    out.push_back({s.student_id, std::nullopt, pkg->semester, qs[i].id, Attempt::Second,
                   Grader::Teacher, s.teacher_question_grades[i]});
  }
  if (s.final_grade) {
    out.push_back({s.student_id, std::nullopt, pkg->semester, std::string(kHolisticQuestionId),
                   Attempt::Second, Grader::TeacherFinal, *s.final_grade});
  }
  return out;
}

}  // namespace edl
