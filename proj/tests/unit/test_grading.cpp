#include <gtest/gtest.h>

#include <random>

#include "edl/external_provider.hpp"
#include "helpers.hpp"

using namespace edl;
using namespace edl::grading;

TEST(ScoreAnswer, IdentityIsFullOverlap) {
  EXPECT_DOUBLE_EQ(score_answer("the IEP team", "the IEP team").overlap, 1.0);
}

TEST(ScoreAnswer, EmptyAnswerIsZero) {
  auto s = score_answer("", "required members: parents, general educator");
  EXPECT_DOUBLE_EQ(s.overlap, 0.0);
  EXPECT_TRUE(s.answer_blank);
}

// Frozen from tests/oracles/kernel_oracles.py.
TEST(ScoreAnswer, PartialOverlapMatchesTokenOracle) {
  auto s = score_answer("parents and the general educator",
                        "required members: parents, general educator, special educator");
  EXPECT_DOUBLE_EQ(s.overlap, 3.0 / 7.0);
  EXPECT_EQ(s.matched, (std::vector<std::string>{"parents", "general", "educator"}));
  EXPECT_EQ(s.missing, (std::vector<std::string>{"required", "members", "special", "educator"}));
}

TEST(ScoreAnswer, RepeatedKeyTokensNeedRepeatedAnswerTokens) {
  EXPECT_DOUBLE_EQ(score_answer("educator", "educator educator").overlap, 0.5);
  EXPECT_DOUBLE_EQ(score_answer("educator educator educator", "educator educator").overlap, 1.0);
}

TEST(GradeFromScore, Rules) {
  Rubric r;
  MatchScore full{1.0, false, {}, {}};
  EXPECT_EQ(grade_from_score(full, r), kSatisfactory);
  MatchScore blank{0.0, true, {}, {}};
  EXPECT_EQ(grade_from_score(blank, r), kNotAssessable);
  MatchScore at{0.75, false, {}, {}};
  EXPECT_EQ(grade_from_score(at, r), kSatisfactory);
  MatchScore below{0.7499, false, {}, {}};
  EXPECT_EQ(grade_from_score(below, r), kImprovementNeeded);
  MatchScore nothing{0.0, false, {}, {}};
  EXPECT_EQ(grade_from_score(nothing, r), kImprovementNeeded);
}

TEST(GenerateFeedback, ExactKeyIsSatisfactoryWithStrength) {
  OverlapProvider p;
  auto b = generate_feedback({{"parents general educator special educator members required"}},
                             {"required members: parents, general educator, special educator"}, Rubric{}, p);
  ASSERT_EQ(b.per_question.size(), 1u);
  EXPECT_EQ(b.per_question[0].provisional_grade, kSatisfactory);
  EXPECT_NE(b.per_question[0].feedback.find("Strength"), std::string::npos);
  EXPECT_EQ(b.provider_id, "overlap-v1");
}

TEST(GenerateFeedback, BlankPromptsAnAttempt) {
  OverlapProvider p;
  auto b = generate_feedback({{"   "}}, {"measurable goal"}, Rubric{}, p);
  EXPECT_EQ(b.per_question[0].provisional_grade, kNotAssessable);
  EXPECT_NE(b.per_question[0].feedback.find("No answer"), std::string::npos);
}

TEST(GenerateFeedback, FortyPercentIsImprovementNeededWithElaborationPrompt) {
  OverlapProvider p;
  auto b = generate_feedback({{"alpha beta"}}, {"alpha beta gamma delta epsilon"}, Rubric{}, p);
  EXPECT_EQ(b.per_question[0].provisional_grade, kImprovementNeeded);
  EXPECT_NE(b.per_question[0].feedback.find("additional elaboration"), std::string::npos);
  EXPECT_NE(b.per_question[0].feedback.find("gamma"), std::string::npos);
}

TEST(GenerateFeedback, CountMismatch) {
  OverlapProvider p;
  EXPECT_ERRC(generate_feedback({{"a", "b"}}, {"alpha"}, Rubric{}, p), Errc::AnswerCountMismatch);
}

TEST(GenerateFeedback, DeterministicProvider) {
  OverlapProvider p;
  auto clock = [] { return Timestamp{std::chrono::milliseconds{5}}; };
  AnswerSet a{{"parents", "", "goal timeline"}};
  std::vector<std::string> keys = {"parents educator", "measurable goal", "goal timeline criterion"};
  EXPECT_EQ(generate_feedback(a, keys, Rubric{}, p, {}, clock), generate_feedback(a, keys, Rubric{}, p, {}, clock));
}

namespace {

struct ThrowingProvider : FeedbackProvider {
  std::string_view id() const override { return "broken"; }
  bool deterministic() const override { return true; }
  bool external() const override { return false; }
  std::vector<FeedbackEntry> grade(const FeedbackRequest&) const override {
    throw std::runtime_error("model offline");
  }
};

struct ShortProvider : FeedbackProvider {
  std::string_view id() const override { return "short"; }
  bool deterministic() const override { return true; }
  bool external() const override { return false; }
  std::vector<FeedbackEntry> grade(const FeedbackRequest&) const override { return {}; }
};

}  // namespace

TEST(GenerateFeedback, ProviderErrorsCarryProviderId) {
  try {
    generate_feedback({{"x"}}, {"alpha"}, Rubric{}, ThrowingProvider{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ProviderFailure);
    EXPECT_NE(std::string(e.what()).find("broken"), std::string::npos);
  }
  EXPECT_ERRC(generate_feedback({{"x"}}, {"alpha"}, Rubric{}, ShortProvider{}), Errc::ProviderFailure);
}

// Adding key tokens to an answer never lowers its score or grade.
TEST(GradingProperties, MonotoneInKeyTokens) {
  std::mt19937_64 rng(11);
  const std::vector<std::string> vocab = {"parents", "educator", "goal", "timeline", "criterion",
                                          "peers", "consent", "notice", "annual", "services"};
  Rubric rubric;
  for (int i = 0; i < 500; ++i) {
    std::string key, answer;
    for (int k = 0; k < 1 + static_cast<int>(rng() % 6); ++k) key += vocab[rng() % vocab.size()] + " ";
    for (int k = 0; k < static_cast<int>(rng() % 6); ++k) answer += vocab[rng() % vocab.size()] + " ";
    const auto kt = text::content_tokens(key);
    const std::string extended = answer + " " + kt[rng() % kt.size()];
    const auto before = score_answer(answer, key), after = score_answer(extended, key);
    EXPECT_GE(after.overlap, before.overlap);
    EXPECT_GE(grade_from_score(after, rubric), grade_from_score(before, rubric));
    EXPECT_GE(before.overlap, 0.0);
    EXPECT_LE(before.overlap, 1.0);
  }
}

TEST(ExternalProvider, RequestSchemaAndResponseParsing) {
  std::string seen;
  ExternalProvider p("llm", [&](const std::string& body) {
    seen = body;
    return R"({"per_question":[{"feedback":"fine","provisional_grade":2},{"feedback":"more","provisional_grade":1}]})";
  });
  auto b = generate_feedback({{"a", "b"}}, {"alpha", "beta"}, Rubric{}, p, {{"q1", "?"}, {"q2", "?"}});
  EXPECT_EQ(b.provider_id, "llm");
  EXPECT_EQ(b.per_question[1].provisional_grade, kImprovementNeeded);
  auto req = json::parse(seen);
  EXPECT_EQ(req["schema"], "edl.feedback-request/1");
  EXPECT_EQ(req["keys"].size(), 2u);
  EXPECT_EQ(req["questions"][1]["id"], "q2");
}

TEST(ExternalProvider, MalformedResponsesAreProviderFailure) {
  for (std::string body : {"not json", "{}", R"({"per_question":[{"feedback":"x","provisional_grade":7}]})",
                           R"({"per_question":[{"feedback":"x"}]})",
                           R"({"per_question":[{"feedback":"x","provisional_grade":1},{"feedback":"y","provisional_grade":1}]})"}) {
    ExternalProvider p("llm", [&](const std::string&) { return body; });
    EXPECT_ERRC(generate_feedback({{"a"}}, {"alpha"}, Rubric{}, p), Errc::ProviderFailure);
  }
  ExternalProvider down("llm", [](const std::string&) -> std::string { throw std::runtime_error("timeout"); });
  EXPECT_ERRC(generate_feedback({{"a"}}, {"alpha"}, Rubric{}, down), Errc::ProviderFailure);
}
