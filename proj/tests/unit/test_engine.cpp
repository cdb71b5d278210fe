#include <gtest/gtest.h>

#include <thread>

#include "edl/teacher_intake.hpp"
#include "helpers.hpp"

using namespace edl;
using edl::testing::make_engine;
using edl::testing::TempDir;
using edl::testing::three_question_package;

namespace {

const Actor kStudent = Actor::student("stu-07");
const Actor kTeacher = Actor::teacher("t-1");

struct EngineTest : ::testing::Test {
  std::shared_ptr<LoopEngine> engine = make_engine();
  ValidatedPackage pkg = validate_package(three_question_package());

  std::string at_questions() {
    auto s = engine->create_session(pkg, "stu-07");
    engine->render_materials(s.session_id);
    engine->render_questions(s.session_id);
    return s.session_id;
  }

  std::string at_feedback() {
    auto id = at_questions();
    engine->submit_answers(id, {{"parents and the general educator", "", "nondisabled peers"}}, kStudent);
    return id;
  }

  std::string forwarded() {
    auto id = at_feedback();
    engine->submit_revision(id, {{"parents general educator special educator members required", "goal", "peers"}, "reflection"}, kStudent);
    return id;
  }
};

struct FailingProvider : grading::FeedbackProvider {
  std::string_view id() const override { return "down"; }
  bool deterministic() const override { return true; }
  bool external() const override { return true; }
  std::vector<FeedbackEntry> grade(const grading::FeedbackRequest&) const override {
    throw std::runtime_error("503");
  }
};

}  // namespace

TEST_F(EngineTest, CreateSession) {
  auto s = engine->create_session(pkg, "stu-07");
  EXPECT_EQ(s.phase, Phase::BackendInitialized);
  EXPECT_EQ(s.question_count, 3u);
  EXPECT_NE(engine->create_session(pkg, "stu-07").session_id, s.session_id);
}

TEST_F(EngineTest, RenderMaterialsIsIdempotent) {
  auto s = engine->create_session(pkg, "stu-07");
  auto m = engine->render_materials(s.session_id);
  EXPECT_EQ(engine->session(s.session_id).phase, Phase::MaterialsRendered);
  EXPECT_EQ(engine->render_materials(s.session_id), m);
  EXPECT_EQ(engine->session(s.session_id).version(), 2u);
}

TEST_F(EngineTest, RenderQuestionsNeedsMaterialsFirst) {
  auto s = engine->create_session(pkg, "stu-07");
  EXPECT_ERRC(engine->render_questions(s.session_id), Errc::WrongPhase);
  engine->render_materials(s.session_id);
  auto q = engine->render_questions(s.session_id);
  EXPECT_EQ(q.size(), 3u);
  EXPECT_EQ(engine->render_questions(s.session_id), q);
}

TEST_F(EngineTest, SubmitAnswers) {
  auto id = at_questions();
  EXPECT_ERRC(engine->submit_answers(id, {{"a", "b"}}, kStudent), Errc::AnswerCountMismatch);
  auto fb = engine->submit_answers(id, {{"a", "b", "c"}}, kStudent);
  EXPECT_EQ(fb.per_question.size(), 3u);
  EXPECT_EQ(engine->session(id).phase, Phase::FeedbackRendered);
  EXPECT_ERRC(engine->submit_answers(id, {{"a", "b", "c"}}, kStudent), Errc::WrongPhase);
}

TEST_F(EngineTest, OnlyOwnerSubmits) {
  auto id = at_questions();
  EXPECT_ERRC(engine->submit_answers(id, {{"a", "b", "c"}}, Actor::student("stu-08")), Errc::UnauthorizedActor);
  EXPECT_ERRC(engine->submit_answers(id, {{"a", "b", "c"}}, kTeacher), Errc::UnauthorizedActor);
}

TEST_F(EngineTest, ProviderFailureLeavesSessionUnchanged) {
  auto broken = make_engine(nullptr, std::make_shared<FailingProvider>());
  auto s = broken->create_session(pkg, "stu-07");
  broken->render_materials(s.session_id);
  broken->render_questions(s.session_id);
  const auto before = broken->session(s.session_id);
  EXPECT_ERRC(broken->submit_answers(s.session_id, {{"a", "b", "c"}}, kStudent), Errc::ProviderFailure);
  EXPECT_EQ(broken->session(s.session_id), before);
  EXPECT_EQ(broken->store().read_page(s.session_id).events.size(), before.event_log.size());
}

TEST_F(EngineTest, FeedbackArchive) {
  auto id = at_questions();
  EXPECT_ERRC(engine->get_feedback(id), Errc::WrongPhase);
  auto fb = engine->submit_answers(id, {{"a", "b", "c"}}, kStudent);
  EXPECT_EQ(engine->get_feedback(id), fb);
  engine->skip_revision(id, "busy", kStudent);
  engine->record_final_grade(id, kImprovementNeeded, kTeacher);
  EXPECT_EQ(json(engine->get_feedback(id)).dump(), json(fb).dump());
}

TEST_F(EngineTest, Revision) {
  auto early = at_questions();
  EXPECT_ERRC(engine->submit_revision(early, {{"a", "b", "c"}, "r"}, kStudent), Errc::WrongPhase);
  auto id = at_feedback();
  EXPECT_ERRC(engine->submit_revision(id, {{"a", "b", "c"}, std::nullopt}, kStudent), Errc::MissingSelfReflection);
  auto s = engine->submit_revision(id, {{"a", "b", "c"}, "I should cite the law"}, kStudent);
  EXPECT_EQ(s.phase, Phase::ForwardedToTeacher);
}

TEST_F(EngineTest, Skip) {
  EXPECT_ERRC(engine->skip_revision(at_questions(), "x", kStudent), Errc::WrongPhase);
  auto id = at_feedback();
  auto s = engine->skip_revision(id, "ran out of time", kStudent);
  EXPECT_EQ(s.phase, Phase::ForwardedToTeacher);
  EXPECT_FALSE(s.revision.has_value());
}

TEST_F(EngineTest, FinalGrade) {
  EXPECT_ERRC(engine->record_final_grade(at_feedback(), kSatisfactory, kTeacher), Errc::WrongPhase);
  auto id = forwarded();
  EXPECT_ERRC(engine->record_final_grade(id, kSatisfactory, Actor::agent()), Errc::UnauthorizedActor);
  auto s = engine->record_final_grade(id, kSatisfactory, kTeacher);
  EXPECT_EQ(s.phase, Phase::Closed);
  EXPECT_EQ(s.final_grade, kSatisfactory);
  // Reads still work and never regress.
  EXPECT_EQ(engine->render_materials(id).size(), 1u);
  EXPECT_EQ(engine->session(id).phase, Phase::Closed);
}

TEST_F(EngineTest, VersionConflict) {
  auto id = at_questions();
  const auto v = engine->session(id).version();
  EXPECT_ERRC(engine->submit_answers(id, {{"a", "b", "c"}}, kStudent, v - 1), Errc::VersionConflict);
  engine->submit_answers(id, {{"a", "b", "c"}}, kStudent, v);
  EXPECT_ERRC(engine->skip_revision(id, "x", kStudent, v), Errc::VersionConflict);
}

TEST_F(EngineTest, TeacherQueue) {
  auto a = forwarded();
  at_feedback();
  auto q = engine->teacher_queue();
  ASSERT_EQ(q.size(), 1u);
  EXPECT_EQ(q[0].session_id, a);
}

TEST_F(EngineTest, AcceptTeacherGrades) {
  auto id = forwarded();
  EXPECT_ERRC(grading::accept_teacher_grades(*engine, id, {kSatisfactory, kSatisfactory}, kSatisfactory, kTeacher),
              Errc::CountMismatch);
  auto recs = grading::accept_teacher_grades(*engine, id, {kSatisfactory, kImprovementNeeded, kSatisfactory},
                                             kSatisfactory, kTeacher);
  ASSERT_EQ(recs.size(), 4u);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(recs[i].grader, Grader::Teacher);
    EXPECT_EQ(recs[i].attempt, Attempt::Second);
  }
  EXPECT_EQ(recs[3].grader, Grader::TeacherFinal);
  EXPECT_EQ(recs[3].question_id, "holistic");
  EXPECT_ERRC(grading::accept_teacher_grades(*engine, id, {kSatisfactory, kSatisfactory, kSatisfactory},
                                             kSatisfactory, kTeacher),
              Errc::WrongPhase);
  // The same records come back from the closed session.
  auto all = grade_records_of(engine->session(id), pkg);
  EXPECT_EQ(std::count_if(all.begin(), all.end(), [](auto& r) { return r.grader == Grader::AI; }), 3);
  EXPECT_EQ(std::vector<GradeRecord>(all.begin() + 3, all.end()), recs);
}

TEST_F(EngineTest, SkipThenGradeUsesFirstAttempt) {
  auto id = at_feedback();
  engine->skip_revision(id, "no time", kStudent);
  auto s = engine->session(id);
  EXPECT_EQ(*s.answers_under_review(), s.first_attempt->answers);
  grading::accept_teacher_grades(*engine, id, {kImprovementNeeded, kNotAssessable, kImprovementNeeded},
                                 kImprovementNeeded, kTeacher);
  EXPECT_EQ(engine->session(id).phase, Phase::Closed);
}

TEST_F(EngineTest, DuplicatePackageWithDifferentContents) {
  engine->register_package(pkg, kTeacher);
  auto changed = three_question_package();
  changed.answer_keys[0] = "something else entirely";
  EXPECT_ERRC(engine->register_package(validate_package(changed), kTeacher), Errc::DuplicatePackage);
  EXPECT_ERRC(engine->register_package(pkg, kStudent), Errc::UnauthorizedActor);
  EXPECT_ERRC(engine->create_session("missing", "stu"), Errc::UnknownPackage);
  EXPECT_ERRC(engine->session("missing"), Errc::UnknownSession);
}

TEST(EngineRecovery, RestartRebuildsEverything) {
  TempDir dir;
  std::string id;
  Session before;
  {
    auto e = make_engine(std::make_shared<store::EventStore>(dir.path()));
    auto s = e->create_session(validate_package(three_question_package()), "stu-07");
    id = s.session_id;
    e->render_materials(id);
    e->render_questions(id);
    e->submit_answers(id, {{"a", "b", "c"}}, kStudent);
    before = e->session(id);
  }
  auto e = make_engine(std::make_shared<store::EventStore>(dir.path()));
  e->recover();
  EXPECT_EQ(e->session(id), before);
  e->skip_revision(id, "x", kStudent);
  EXPECT_EQ(e->session(id).phase, Phase::ForwardedToTeacher);
}

// One writer per session: concurrent identical submissions commit exactly once.
TEST_F(EngineTest, ConcurrentSubmissionsCommitOnce) {
  auto id = at_questions();
  std::atomic<int> ok{0}, wrong_phase{0};
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&] {
      try {
        engine->submit_answers(id, {{"a", "b", "c"}}, kStudent);
        ++ok;
      } catch (const Error& e) {
        if (e.code() == Errc::WrongPhase) ++wrong_phase;
      }
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(ok.load(), 1);
  EXPECT_EQ(wrong_phase.load(), 7);
  EXPECT_EQ(engine->store().replay_session(id), engine->session(id));
}

TEST_F(EngineTest, SessionsProgressInParallel) {
  std::vector<std::thread> threads;
  std::vector<std::string> ids(16);
  for (int i = 0; i < 16; ++i) {
    threads.emplace_back([&, i] {
      const auto who = "stu-" + std::to_string(i);
      auto s = engine->create_session(pkg, who);
      engine->render_materials(s.session_id);
      engine->render_questions(s.session_id);
      engine->submit_answers(s.session_id, {{"a", "b", "c"}}, Actor::student(who));
      engine->skip_revision(s.session_id, "x", Actor::student(who));
      engine->record_final_grade(s.session_id, kSatisfactory, kTeacher);
      ids[i] = s.session_id;
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& id : ids) {
    EXPECT_EQ(engine->session(id).phase, Phase::Closed);
    EXPECT_EQ(engine->store().replay_session(id), engine->session(id));
  }
}
