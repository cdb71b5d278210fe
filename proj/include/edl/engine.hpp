#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <string>
#include <vector>

#include "edl/domain.hpp"
#include "edl/grading.hpp"
#include "edl/session.hpp"
#include "edl/store.hpp"

namespace edl {

struct EngineOptions {
  grading::Clock clock = now;
  /// Produces fresh session ids. Defaults to random 64-bit hex.
  std::function<std::string()> next_session_id;
};

/// Drives sessions through the loop. Each mutating call is one event: it is
/// validated against the current session, made durable in the store, and only
/// then becomes visible. Calls on one session are serialized; distinct
/// sessions proceed in parallel.
///
/// Mutations accept an optional expected version; a mismatch with the
/// session's current version is a VersionConflict.
class LoopEngine {
 public:
  LoopEngine(std::shared_ptr<store::EventStore> store,
             std::shared_ptr<const grading::FeedbackProvider> provider, EngineOptions options = {})
      : store_(std::move(store)), provider_(std::move(provider)), options_(std::move(options)) {
    if (!store_) store_ = std::make_shared<store::EventStore>();
    if (!provider_) provider_ = std::make_shared<grading::OverlapProvider>();
    if (!options_.next_session_id) {
      options_.next_session_id = [rng = std::make_shared<std::mt19937_64>(std::random_device{}()),
                                  m = std::make_shared<std::mutex>()] {
        std::lock_guard lock(*m);
        char buf[24];
        std::snprintf(buf, sizeof buf, "s-%016llx", static_cast<unsigned long long>((*rng)()));
        return std::string(buf);
      };
    }
  }

  /// Rebuilds packages and sessions from the store, e.g. after a restart.
  void recover() {
    for (auto& pkg : store_->load_packages()) {
      std::unique_lock lock(mutex_);
      packages_.insert_or_assign(pkg.id(), pkg);
    }
    for (const auto& id : store_->session_ids()) {
      auto s = store_->replay_session(id);
      std::unique_lock lock(mutex_);
      sessions_[id] = std::make_shared<Slot>(std::move(s));
    }
  }

  const grading::FeedbackProvider& provider() const noexcept { return *provider_; }
  store::EventStore& store() noexcept { return *store_; }

  /// Phase i: the teacher submits a package.
  void register_package(const ValidatedPackage& pkg, const Actor& by) {
    if (by.role != Role::Teacher) {
      throw Error(Errc::UnauthorizedActor, "only a teacher may submit a package");
    }
    ensure_package(pkg);
  }

  std::optional<ValidatedPackage> find_package(const std::string& id) const {
    std::shared_lock lock(mutex_);
    auto it = packages_.find(id);
    if (it == packages_.end()) return std::nullopt;
    return it->second;
  }

  std::vector<ValidatedPackage> packages() const {
    std::shared_lock lock(mutex_);
    std::vector<ValidatedPackage> out;
    for (const auto& [id, p] : packages_) out.push_back(p);
    return out;
  }

  /// Phases i-ii: opens a session at BackendInitialized. Registers the
  /// package if this engine has not seen it.
  Session create_session(const ValidatedPackage& pkg, const std::string& student_id) {
    ensure_package(pkg);
    if (student_id.empty()) throw Error(Errc::BadRequest, "student id is required");
    const auto id = options_.next_session_id();
    SessionEvent ev{EventKind::SessionCreated, Actor::agent(),
                    json{{"session_id", id},
                         {"package_id", pkg.id()},
                         {"student_id", student_id},
                         {"question_count", pkg.question_count()}},
                    options_.clock(), 1};
    Session s;
    apply(s, ev);
    {
      std::unique_lock lock(mutex_);
      if (sessions_.contains(id)) throw Error(Errc::StorageFailure, "session id collision: " + id);
      store_->append_event(id, ev);
      sessions_[id] = std::make_shared<Slot>(s);
    }
    return s;
  }

  Session create_session(const std::string& package_id, const std::string& student_id) {
    auto pkg = find_package(package_id);
    if (!pkg) throw Error(Errc::UnknownPackage, "no package '" + package_id + "'");
    return create_session(*pkg, student_id);
  }

  /// Phase iii. Advances BackendInitialized -> MaterialsRendered on first call;
  /// later calls only read.
  std::vector<Document> render_materials(const std::string& session_id) {
    return advance_read(session_id, EventKind::MaterialsRendered)->materials;
  }

  /// Phase v. Advances MaterialsRendered -> QuestionsRendered on first call.
  std::vector<Question> render_questions(const std::string& session_id) {
    return advance_read(session_id, EventKind::QuestionsRendered)->questions;
  }

  /// Phases vi-viii as one commit: stores the answers, runs the provider and
  /// stores its feedback. On any failure the session is unchanged.
  FeedbackBundle submit_answers(const std::string& session_id, const AnswerSet& answers,
                                const Actor& by, std::optional<std::uint64_t> expected_version = {}) {
    auto s = mutate(session_id, expected_version, [&](const Session& cur) {
      authorize(cur, by, EventKind::FirstAttemptSubmitted);
      require_phase(cur, Phase::QuestionsRendered, "submit answers");
      require_answer_count(cur, answers.answers.size());
      const auto pkg = package_of(cur);
      auto bundle = grading::generate_feedback(answers, pkg->answer_keys, pkg->rubric, *provider_,
                                               pkg->questions, options_.clock);
      return SessionEvent{EventKind::FirstAttemptSubmitted, by,
                          json{{"answers", answers}, {"feedback", bundle}}};
    });
    return *s.feedback;
  }

  /// The archived feedback, readable at any phase from FeedbackRendered on.
  FeedbackBundle get_feedback(const std::string& session_id) const {
    auto s = session(session_id);
    if (!s.feedback) {
      throw Error(Errc::WrongPhase, "no feedback yet; session is at " + std::string(to_string(s.phase)));
    }
    return *s.feedback;
  }

  /// Phases x-xi: stores the revision and forwards it to the teacher.
  Session submit_revision(const std::string& session_id, const RevisedAnswerSet& revision,
                          const Actor& by, std::optional<std::uint64_t> expected_version = {}) {
    return mutate(session_id, expected_version, [&](const Session& cur) {
      authorize(cur, by, EventKind::RevisionSubmitted);
      require_phase(cur, Phase::FeedbackRendered, "submit a revision");
      require_answer_count(cur, revision.answers.size());
      if (!revision.self_reflection) {
        throw Error(Errc::MissingSelfReflection, "revision must include a self-reflection item");
      }
      return SessionEvent{EventKind::RevisionSubmitted, by, json{{"revision", revision}}};
    });
  }

  /// Forwards the first attempt to the teacher without a revision.
  Session skip_revision(const std::string& session_id, const std::string& reason, const Actor& by,
                        std::optional<std::uint64_t> expected_version = {}) {
    return mutate(session_id, expected_version, [&](const Session& cur) {
      authorize(cur, by, EventKind::RevisionSkipped);
      require_phase(cur, Phase::FeedbackRendered, "skip the revision");
      return SessionEvent{EventKind::RevisionSkipped, by, json{{"reason", reason}}};
    });
  }

  /// Phases xii-xiv: the teacher's holistic grade closes the session.
  /// `per_question` is empty or one attempt-2 grade per question.
  Session record_final_grade(const std::string& session_id, GradeValue grade, const Actor& grader,
                             const std::vector<GradeValue>& per_question = {},
                             std::optional<std::uint64_t> expected_version = {}) {
    return mutate(session_id, expected_version, [&](const Session& cur) {
      authorize(cur, grader, EventKind::FinalGradeRecorded);
      require_phase(cur, Phase::ForwardedToTeacher, "record a final grade");
      if (!per_question.empty() && per_question.size() != cur.question_count) {
        throw Error(Errc::CountMismatch, std::to_string(per_question.size()) + " grades for " +
                                             std::to_string(cur.question_count) + " questions");
      }
      json payload{{"grade", grade}};
      if (!per_question.empty()) payload["per_question"] = per_question;
      return SessionEvent{EventKind::FinalGradeRecorded, grader, std::move(payload)};
    });
  }

  /// Committed snapshot of a session.
  Session session(const std::string& session_id) const {
    auto slot = find_slot(session_id);
    std::lock_guard lock(slot->mutex);
    return slot->session;
  }

  std::vector<Session> sessions() const {
    std::vector<std::shared_ptr<Slot>> slots;
    {
      std::shared_lock lock(mutex_);
      for (const auto& [id, slot] : sessions_) slots.push_back(slot);
    }
    std::vector<Session> out;
    for (const auto& slot : slots) {
      std::lock_guard lock(slot->mutex);
      out.push_back(slot->session);
    }
    return out;
  }

  /// Sessions forwarded to the teacher and not yet graded.
  std::vector<Session> teacher_queue() const {
    auto all = sessions();
    std::erase_if(all, [](const Session& s) { return s.phase != Phase::ForwardedToTeacher; });
    return all;
  }

  ValidatedPackage package_of(const Session& s) const {
    auto pkg = find_package(s.package_id);
    if (!pkg) throw Error(Errc::UnknownPackage, "no package '" + s.package_id + "'");
    return *pkg;
  }

 private:
  struct Slot {
    explicit Slot(Session s) : session(std::move(s)) {}
    mutable std::mutex mutex;
    Session session;
  };

  void ensure_package(const ValidatedPackage& pkg) {
    std::unique_lock lock(mutex_);
    auto it = packages_.find(pkg.id());
    if (it != packages_.end()) {
      if (!(it->second == pkg)) {
        throw Error(Errc::DuplicatePackage, "package '" + pkg.id() + "' exists with different contents");
      }
      return;
    }
    store_->save_package(pkg);
    packages_.emplace(pkg.id(), pkg);
  }

  std::shared_ptr<Slot> find_slot(const std::string& id) const {
    std::shared_lock lock(mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(Errc::UnknownSession, "no session '" + id + "'");
    return it->second;
  }

  static void authorize(const Session& s, const Actor& by, EventKind kind) {
    const auto role = authorized_role(kind);
    if (by.role != role) {
      throw Error(Errc::UnauthorizedActor, std::string(to_string(kind)) + " requires a " +
                                               std::string(to_string(role)) + ", not a " +
                                               std::string(to_string(by.role)));
    }
    if (role == Role::Student && by.id != s.student_id) {
      throw Error(Errc::UnauthorizedActor, "student '" + by.id + "' does not own this session");
    }
  }

  static void require_phase(const Session& s, Phase expected, std::string_view action) {
    if (s.phase != expected) {
      throw Error(Errc::WrongPhase, "cannot " + std::string(action) + " at phase " +
                                        std::string(to_string(s.phase)));
    }
  }

  static void require_answer_count(const Session& s, std::size_t got) {
    if (got != s.question_count) {
      throw Error(Errc::AnswerCountMismatch, std::to_string(got) + " answers for " +
                                                 std::to_string(s.question_count) + " questions");
    }
  }

  template <typename BuildEvent>
  Session mutate(const std::string& session_id, std::optional<std::uint64_t> expected_version,
                 BuildEvent&& build) {
    auto slot = find_slot(session_id);
    std::lock_guard lock(slot->mutex);
    const auto& cur = slot->session;
    if (expected_version && *expected_version != cur.version()) {
      throw Error(Errc::VersionConflict, "session '" + session_id + "' is at version " +
                                             std::to_string(cur.version()) + ", request expected " +
                                             std::to_string(*expected_version));
    }
    SessionEvent ev = build(cur);
    ev.seq = cur.version() + 1;
    ev.at = options_.clock();
    Session next = cur;
    apply(next, ev);
    store_->append_event(session_id, ev);
    slot->session = std::move(next);
    return slot->session;
  }

  // Read operations that commit a render event the first time.
  ValidatedPackage advance_read(const std::string& session_id, EventKind kind) {
    auto slot = find_slot(session_id);
    std::lock_guard lock(slot->mutex);
    auto& cur = slot->session;
    const auto [from, to] = transition_of(kind);
    if (cur.phase < from) {
      throw Error(Errc::WrongPhase, std::string(to_string(kind)) + " needs phase " +
                                        std::string(to_string(from)) + ", session is at " +
                                        std::string(to_string(cur.phase)));
    }
    auto pkg = package_of(cur);
    if (cur.phase == from) {
      SessionEvent ev{kind, Actor::agent(), json::object(), options_.clock(), cur.version() + 1};
      Session next = cur;
      apply(next, ev);
      store_->append_event(session_id, ev);
      cur = std::move(next);
    }
    return pkg;
  }

  std::shared_ptr<store::EventStore> store_;
  std::shared_ptr<const grading::FeedbackProvider> provider_;
  EngineOptions options_;

  mutable std::shared_mutex mutex_;
  std::map<std::string, ValidatedPackage> packages_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
};

}  // namespace edl
