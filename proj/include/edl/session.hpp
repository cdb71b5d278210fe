#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "edl/domain.hpp"
#include "edl/json_io.hpp"

namespace edl {

/// Observable session states, in the only order a session may pass through them.
enum class Phase {
  Created,
  BackendInitialized,
  MaterialsRendered,
  QuestionsRendered,
  FirstAttemptSubmitted,
  FeedbackRendered,
  RevisionSubmitted,
  ForwardedToTeacher,
  FinalGraded,
  Closed,
};

constexpr std::string_view to_string(Phase p) noexcept {
  switch (p) {
    case Phase::Created: return "Created";
    case Phase::BackendInitialized: return "BackendInitialized";
    case Phase::MaterialsRendered: return "MaterialsRendered";
    case Phase::QuestionsRendered: return "QuestionsRendered";
    case Phase::FirstAttemptSubmitted: return "FirstAttemptSubmitted";
    case Phase::FeedbackRendered: return "FeedbackRendered";
    case Phase::RevisionSubmitted: return "RevisionSubmitted";
    case Phase::ForwardedToTeacher: return "ForwardedToTeacher";
    case Phase::FinalGraded: return "FinalGraded";
    case Phase::Closed: return "Closed";
  }
  return "";
}

/// Step of the development loop a session is in.
constexpr std::string_view current_step(Phase p) noexcept {
  switch (p) {
    case Phase::Created:
    case Phase::BackendInitialized: return "Start";
    case Phase::MaterialsRendered: return "Knowledge Gap";
    case Phase::QuestionsRendered: return "Learning";
    case Phase::FirstAttemptSubmitted: return "Trial";
    case Phase::FeedbackRendered: return "Reflection";
    case Phase::RevisionSubmitted: return "Trial";
    case Phase::ForwardedToTeacher: return "Assessment";
    case Phase::FinalGraded: return "Goal Achievement";
    case Phase::Closed: return "End";
  }
  return "";
}

/// Attempts per session: one first attempt, one revision.
inline constexpr int kMaxAttempts = 2;

enum class EventKind {
  SessionCreated,
  MaterialsRendered,
  QuestionsRendered,
  FirstAttemptSubmitted,  // answers + AI feedback, committed together
  RevisionSubmitted,      // revision, forwarded to the teacher
  RevisionSkipped,
  FinalGradeRecorded,     // final grade, rendered to the student
};

constexpr std::string_view to_string(EventKind k) noexcept {
  switch (k) {
    case EventKind::SessionCreated: return "SessionCreated";
    case EventKind::MaterialsRendered: return "MaterialsRendered";
    case EventKind::QuestionsRendered: return "QuestionsRendered";
    case EventKind::FirstAttemptSubmitted: return "FirstAttemptSubmitted";
    case EventKind::RevisionSubmitted: return "RevisionSubmitted";
    case EventKind::RevisionSkipped: return "RevisionSkipped";
    case EventKind::FinalGradeRecorded: return "FinalGradeRecorded";
  }
  return "";
}

inline constexpr std::array<EventKind, 7> kAllEventKinds = {
    EventKind::SessionCreated,        EventKind::MaterialsRendered, EventKind::QuestionsRendered,
    EventKind::FirstAttemptSubmitted, EventKind::RevisionSubmitted, EventKind::RevisionSkipped,
    EventKind::FinalGradeRecorded};

inline EventKind event_kind_from_string(std::string_view s) {
  for (auto k : kAllEventKinds) {
    if (to_string(k) == s) return k;
  }
  throw Error(Errc::MalformedEvent, "unknown event kind '" + std::string(s) + "'");
}

/// The only role allowed to author each event kind.
constexpr Role authorized_role(EventKind k) noexcept {
  switch (k) {
    case EventKind::SessionCreated:
    case EventKind::MaterialsRendered:
    case EventKind::QuestionsRendered: return Role::AIAgent;
    case EventKind::FirstAttemptSubmitted:
    case EventKind::RevisionSubmitted:
    case EventKind::RevisionSkipped: return Role::Student;
    case EventKind::FinalGradeRecorded: return Role::Teacher;
  }
  return Role::AIAgent;
}

/// Phase a session must be in to accept the event, and the phase it ends in.
struct Transition {
  Phase from;
  Phase to;
};

constexpr Transition transition_of(EventKind k) noexcept {
  switch (k) {
    case EventKind::SessionCreated: return {Phase::Created, Phase::BackendInitialized};
    case EventKind::MaterialsRendered: return {Phase::BackendInitialized, Phase::MaterialsRendered};
    case EventKind::QuestionsRendered: return {Phase::MaterialsRendered, Phase::QuestionsRendered};
    case EventKind::FirstAttemptSubmitted: return {Phase::QuestionsRendered, Phase::FeedbackRendered};
    case EventKind::RevisionSubmitted: return {Phase::FeedbackRendered, Phase::ForwardedToTeacher};
    case EventKind::RevisionSkipped: return {Phase::FeedbackRendered, Phase::ForwardedToTeacher};
    case EventKind::FinalGradeRecorded: return {Phase::ForwardedToTeacher, Phase::Closed};
  }
  return {Phase::Created, Phase::Created};
}

struct SessionEvent {
  EventKind kind = EventKind::SessionCreated;
  Actor actor;
  json payload = json::object();
  Timestamp at{};
  std::uint64_t seq = 0;

  bool operator==(const SessionEvent&) const = default;
};

inline void to_json(json& j, const SessionEvent& e) {
  j = json{{"kind", to_string(e.kind)},
           {"actor", e.actor},
           {"payload", e.payload},
           {"at", e.at.time_since_epoch().count()},
           {"seq", e.seq}};
}

inline void from_json(const json& j, SessionEvent& e) {
  try {
    e.kind = event_kind_from_string(j.at("kind").get<std::string>());
    e.actor = j.at("actor").get<Actor>();
    e.payload = j.at("payload");
    e.at = Timestamp(std::chrono::milliseconds(j.at("at").get<std::int64_t>()));
    e.seq = j.at("seq").get<std::uint64_t>();
  } catch (const json::exception& ex) {
    throw Error(Errc::MalformedEvent, ex.what());
  } catch (const Error& ex) {
    if (ex.code() == Errc::MalformedEvent) throw;
    throw Error(Errc::MalformedEvent, ex.what());
  }
}

/// One student's traversal of the loop. Every field is derived from
/// `event_log`; see apply().
struct Session {
  std::string session_id;
  std::string package_id;
  std::string student_id;
  std::size_t question_count = 0;
  Phase phase = Phase::Created;
  std::optional<AnswerSet> first_attempt;
  std::optional<FeedbackBundle> feedback;
  std::optional<RevisedAnswerSet> revision;
  std::optional<std::string> skip_reason;
  std::optional<GradeValue> final_grade;
  /// Per-question attempt-2 teacher grades; empty when only a holistic grade was given.
  std::vector<GradeValue> teacher_question_grades;
  std::vector<SessionEvent> event_log;

  /// Sequence number of the last committed event; doubles as the optimistic
  /// concurrency token.
  std::uint64_t version() const noexcept { return event_log.empty() ? 0 : event_log.back().seq; }

  bool revision_skipped() const noexcept { return skip_reason.has_value(); }

  /// Answers the teacher grades: the revision, or the first attempt when skipped.
  const std::vector<std::string>* answers_under_review() const noexcept {
    if (revision) return &revision->answers;
    if (first_attempt && phase >= Phase::ForwardedToTeacher) return &first_attempt->answers;
    return nullptr;
  }

  bool operator==(const Session&) const = default;
};

namespace detail {

inline void require_count(std::size_t got, std::size_t n, Errc code, std::string_view what) {
  if (got != n) {
    throw Error(code, std::to_string(got) + " " + std::string(what) + " for " + std::to_string(n) +
                          " questions");
  }
}

template <typename T>
T payload_field(const json& payload, const char* field) {
  try {
    return payload.at(field).get<T>();
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedEvent, std::string("payload field '") + field + "': " + e.what());
  } catch (const Error& e) {
    throw Error(Errc::MalformedEvent, std::string("payload field '") + field + "': " + e.what());
  }
}

}  // namespace detail

/// Folds one event into `session`. Validates sequence, actor, phase and payload
/// first; on any error `session` is left untouched.
inline void apply(Session& session, const SessionEvent& event) {
  if (event.seq != session.version() + 1) {
    throw Error(Errc::SequenceGap, "expected seq " + std::to_string(session.version() + 1) +
                                       ", got " + std::to_string(event.seq));
  }
  if (event.actor.role != authorized_role(event.kind)) {
    throw Error(Errc::UnauthorizedActor, std::string(to_string(event.kind)) + " by " +
                                             std::string(to_string(event.actor.role)));
  }
  if (event.actor.role == Role::Student && event.actor.id != session.student_id) {
    throw Error(Errc::UnauthorizedActor, "student '" + event.actor.id + "' does not own session");
  }
  const auto [from, to] = transition_of(event.kind);
  if (session.phase != from) {
    throw Error(Errc::WrongPhase, std::string(to_string(event.kind)) + " requires phase " +
                                      std::string(to_string(from)) + ", session is at " +
                                      std::string(to_string(session.phase)));
  }

  Session next = session;
  const auto& p = event.payload;
  switch (event.kind) {
    case EventKind::SessionCreated: {
      next.session_id = detail::payload_field<std::string>(p, "session_id");
      next.package_id = detail::payload_field<std::string>(p, "package_id");
      next.student_id = detail::payload_field<std::string>(p, "student_id");
      next.question_count = detail::payload_field<std::size_t>(p, "question_count");
      if (next.question_count == 0) throw Error(Errc::EmptyPackage, "session with no questions");
      break;
    }
    case EventKind::MaterialsRendered:
    case EventKind::QuestionsRendered: break;
    case EventKind::FirstAttemptSubmitted: {
      auto answers = detail::payload_field<AnswerSet>(p, "answers");
      auto feedback = detail::payload_field<FeedbackBundle>(p, "feedback");
      detail::require_count(answers.answers.size(), next.question_count, Errc::AnswerCountMismatch,
                            "answers");
      detail::require_count(feedback.per_question.size(), next.question_count,
                            Errc::ProviderFailure, "feedback entries");
      next.first_attempt = std::move(answers);
      next.feedback = std::move(feedback);
      break;
    }
    case EventKind::RevisionSubmitted: {
      auto revision = detail::payload_field<RevisedAnswerSet>(p, "revision");
      detail::require_count(revision.answers.size(), next.question_count, Errc::AnswerCountMismatch,
                            "revised answers");
      if (!revision.self_reflection) {
        throw Error(Errc::MissingSelfReflection, "revision must include a self-reflection item");
      }
      next.revision = std::move(revision);
      break;
    }
    case EventKind::RevisionSkipped: {
      next.skip_reason = detail::payload_field<std::string>(p, "reason");
      break;
    }
    case EventKind::FinalGradeRecorded: {
      next.final_grade = detail::payload_field<GradeValue>(p, "grade");
      auto per_question = p.contains("per_question")
                              ? detail::payload_field<std::vector<GradeValue>>(p, "per_question")
                              : std::vector<GradeValue>{};
      if (!per_question.empty()) {
        detail::require_count(per_question.size(), next.question_count, Errc::CountMismatch,
                              "teacher grades");
      }
      next.teacher_question_grades = std::move(per_question);
      break;
    }
  }
  next.phase = to;
  next.event_log.push_back(event);
  session = std::move(next);
}

/// Rebuilds a session from its log.
inline Session replay(const std::vector<SessionEvent>& events) {
  Session s;
  for (const auto& e : events) apply(s, e);
  return s;
}

}  // namespace edl
