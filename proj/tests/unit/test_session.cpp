#include <gtest/gtest.h>

#include "edl/session.hpp"
#include "helpers.hpp"

using namespace edl;

namespace {

SessionEvent ev(EventKind kind, Actor who, json payload, std::uint64_t seq) {
  return {kind, std::move(who), std::move(payload), Timestamp{std::chrono::milliseconds{seq}}, seq};
}

json feedback_json(std::size_t n) {
  FeedbackBundle b;
  for (std::size_t i = 0; i < n; ++i) b.per_question.push_back({"fb", kImprovementNeeded});
  b.provider_id = "overlap-v1";
  return b;
}

std::vector<SessionEvent> full_log(bool skip) {
  const auto stu = Actor::student("stu-07");
  std::vector<SessionEvent> log = {
      ev(EventKind::SessionCreated, Actor::agent(),
         {{"session_id", "s1"}, {"package_id", "p"}, {"student_id", "stu-07"}, {"question_count", 2}}, 1),
      ev(EventKind::MaterialsRendered, Actor::agent(), json::object(), 2),
      ev(EventKind::QuestionsRendered, Actor::agent(), json::object(), 3),
      ev(EventKind::FirstAttemptSubmitted, stu,
         {{"answers", AnswerSet{{"a", "b"}}}, {"feedback", feedback_json(2)}}, 4)};
  if (skip) {
    log.push_back(ev(EventKind::RevisionSkipped, stu, {{"reason", "no time"}}, 5));
  } else {
    log.push_back(ev(EventKind::RevisionSubmitted, stu,
                     {{"revision", RevisedAnswerSet{{"a2", "b2"}, "I learned"}}}, 5));
  }
  log.push_back(ev(EventKind::FinalGradeRecorded, Actor::teacher("t"), {{"grade", 2}, {"per_question", {2, 1}}}, 6));
  return log;
}

}  // namespace

TEST(Session, FullLogReplaysToClosed) {
  auto s = replay(full_log(false));
  EXPECT_EQ(s.phase, Phase::Closed);
  EXPECT_EQ(s.final_grade, kSatisfactory);
  EXPECT_EQ(s.teacher_question_grades, (std::vector<GradeValue>{kSatisfactory, kImprovementNeeded}));
  EXPECT_EQ(s.version(), 6u);
  ASSERT_NE(s.answers_under_review(), nullptr);
  EXPECT_EQ(*s.answers_under_review(), (std::vector<std::string>{"a2", "b2"}));
}

TEST(Session, SkippedRevisionReviewsFirstAttempt) {
  auto s = replay(full_log(true));
  EXPECT_TRUE(s.revision_skipped());
  EXPECT_FALSE(s.revision.has_value());
  EXPECT_EQ(*s.answers_under_review(), (std::vector<std::string>{"a", "b"}));
}

TEST(Session, ReplayIsDeterministicAndEventJsonRoundTrips) {
  const auto log = full_log(false);
  EXPECT_EQ(replay(log), replay(log));
  std::vector<SessionEvent> copy;
  for (const auto& e : log) copy.push_back(json::parse(json(e).dump()).get<SessionEvent>());
  EXPECT_EQ(copy, log);
  EXPECT_EQ(replay(copy), replay(log));
}

TEST(Session, ApplyRejectsWithoutChangingState) {
  auto log = full_log(false);
  Session s = replay({log.begin(), log.begin() + 3});
  const Session before = s;

  auto gap = log[3];
  gap.seq = 9;
  EXPECT_ERRC(apply(s, gap), Errc::SequenceGap);

  auto wrong_actor = log[3];
  wrong_actor.actor = Actor::teacher("t");
  EXPECT_ERRC(apply(s, wrong_actor), Errc::UnauthorizedActor);

  auto other_student = log[3];
  other_student.actor = Actor::student("stu-08");
  EXPECT_ERRC(apply(s, other_student), Errc::UnauthorizedActor);

  auto early = log[5];
  early.seq = 4;
  EXPECT_ERRC(apply(s, early), Errc::WrongPhase);

  auto bad_payload = log[3];
  bad_payload.payload = {{"answers", AnswerSet{{"only one"}}}, {"feedback", feedback_json(2)}};
  EXPECT_ERRC(apply(s, bad_payload), Errc::AnswerCountMismatch);

  auto malformed = log[3];
  malformed.payload = {{"answers", 7}};
  EXPECT_ERRC(apply(s, malformed), Errc::MalformedEvent);

  EXPECT_EQ(s, before);
}

TEST(Session, RevisionNeedsReflection) {
  auto log = full_log(false);
  Session s = replay({log.begin(), log.begin() + 4});
  auto no_reflection = log[4];
  no_reflection.payload = {{"revision", RevisedAnswerSet{{"a2", "b2"}, std::nullopt}}};
  EXPECT_ERRC(apply(s, no_reflection), Errc::MissingSelfReflection);
}

TEST(Session, AgentCannotRecordFinalGrade) {
  auto log = full_log(false);
  Session s = replay({log.begin(), log.begin() + 5});
  auto by_agent = log[5];
  by_agent.actor = Actor::agent();
  EXPECT_ERRC(apply(s, by_agent), Errc::UnauthorizedActor);
}

TEST(Session, FinalGradePerQuestionCount) {
  auto log = full_log(false);
  Session s = replay({log.begin(), log.begin() + 5});
  auto wrong = log[5];
  wrong.payload = {{"grade", 2}, {"per_question", {2}}};
  EXPECT_ERRC(apply(s, wrong), Errc::CountMismatch);
}

TEST(Session, StepNames) {
  EXPECT_EQ(current_step(Phase::FirstAttemptSubmitted), "Trial");
  EXPECT_EQ(current_step(Phase::FeedbackRendered), "Reflection");
  EXPECT_EQ(current_step(Phase::Closed), "End");
  EXPECT_EQ(current_step(Phase::MaterialsRendered), "Knowledge Gap");
  EXPECT_EQ(current_step(Phase::ForwardedToTeacher), "Assessment");
}

TEST(Session, TransitionsOnlyMoveForward) {
  for (auto k : kAllEventKinds) {
    auto [from, to] = transition_of(k);
    EXPECT_LT(from, to) << to_string(k);
  }
}

TEST(Session, MalformedEventJson) {
  EXPECT_ERRC(json({{"kind", "Nope"}}).get<SessionEvent>(), Errc::MalformedEvent);
  EXPECT_ERRC(json::object().get<SessionEvent>(), Errc::MalformedEvent);
}
