#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "edl/domain.hpp"
#include "edl/text.hpp"

namespace edl::grading {

/// Fraction of the key's content tokens found in an answer.
struct MatchScore {
  double overlap = 0.0;
  bool answer_blank = true;
  /// Key content tokens covered by the answer, in key order.
  std::vector<std::string> matched;
  /// Key content tokens the answer lacks, in key order.
  std::vector<std::string> missing;
};

/// overlap = |answer ∩ key| / |key| over content-token multisets.
inline MatchScore score_answer(std::string_view answer, std::string_view key) {
  MatchScore score;
  score.answer_blank = text::is_blank(answer);
  const auto key_tokens = text::content_tokens(key);
  std::map<std::string, int, std::less<>> available;
  for (auto& t : text::content_tokens(answer)) ++available[t];

  for (const auto& t : key_tokens) {
    auto it = available.find(t);
    if (it != available.end() && it->second > 0) {
      --it->second;
      score.matched.push_back(t);
    } else {
      score.missing.push_back(t);
    }
  }
  if (!key_tokens.empty()) {
    score.overlap = static_cast<double>(score.matched.size()) / static_cast<double>(key_tokens.size());
  }
  return score;
}

/// Blank answers are NotAssessable; otherwise Satisfactory at or above the
/// satisfactory threshold and ImprovementNeeded below it.
inline GradeValue grade_from_score(const MatchScore& score, const Rubric& rubric) {
  if (score.answer_blank) return kNotAssessable;
  if (score.overlap >= rubric.satisfactory_threshold) return kSatisfactory;
  return kImprovementNeeded;
}

namespace detail {

inline std::string join_distinct(const std::vector<std::string>& tokens) {
  std::string out;
  std::vector<std::string_view> seen;
  for (const auto& t : tokens) {
    if (std::find(seen.begin(), seen.end(), t) != seen.end()) continue;
    seen.push_back(t);
    if (!out.empty()) out += ", ";
    out += t;
  }
  return out;
}

}  // namespace detail

/// Template feedback for one answer. The improvement threshold only picks the
/// wording for ImprovementNeeded answers; it never changes the grade.
inline std::string feedback_text(const MatchScore& score, GradeValue grade, const Rubric& rubric) {
  const auto matched = detail::join_distinct(score.matched);
  const auto missing = detail::join_distinct(score.missing);
  switch (grade.level()) {
    case GradeValue::Level::NotAssessable:
      return "No answer was submitted for this question. Review the study materials and "
             "write a response that addresses the question directly.";
    case GradeValue::Level::ImprovementNeeded:
      if (score.overlap < rubric.improvement_threshold || matched.empty()) {
        return "Your answer does not yet engage with the main points of this question. "
               "Revisit the materials and address: " + missing +
               ". Please provide additional elaboration on each of these points.";
      }
      return "Your answer addresses part of the expected content (" + matched +
             "). It does not yet cover: " + missing +
             ". Please provide additional elaboration on these points.";
    case GradeValue::Level::Satisfactory:
      if (missing.empty()) {
        return "Strength: your answer covers the key content (" + matched + ").";
      }
      return "Strength: your answer covers the key content (" + matched +
             "). To strengthen it further, also address: " + missing + ".";
  }
  return {};
}

/// Everything a feedback provider sees for one first attempt.
struct FeedbackRequest {
  std::vector<Question> questions;
  std::vector<std::string> answers;
  std::vector<std::string> keys;
  Rubric rubric;
};

/// The AI agent's grading function behind a pluggable boundary.
class FeedbackProvider {
 public:
  virtual ~FeedbackProvider() = default;

  virtual std::string_view id() const = 0;
  /// Identical requests yield identical entries.
  virtual bool deterministic() const = 0;
  /// Calls out of process.
  virtual bool external() const = 0;
  /// One entry per answer, in order.
  virtual std::vector<FeedbackEntry> grade(const FeedbackRequest& request) const = 0;
};

/// Default provider: token overlap against the answer key.
class OverlapProvider final : public FeedbackProvider {
 public:
  static constexpr std::string_view kId = "overlap-v1";

  std::string_view id() const override { return kId; }
  bool deterministic() const override { return true; }
  bool external() const override { return false; }

  std::vector<FeedbackEntry> grade(const FeedbackRequest& request) const override {
    std::vector<FeedbackEntry> out;
    out.reserve(request.answers.size());
    for (std::size_t i = 0; i < request.answers.size(); ++i) {
      const auto score = score_answer(request.answers[i], request.keys.at(i));
      const auto g = grade_from_score(score, request.rubric);
      out.push_back({feedback_text(score, g, request.rubric), g});
    }
    return out;
  }
};

using Clock = std::function<Timestamp()>;

/// Runs `provider` over a first attempt and packages the result. Any provider
/// error, or a response of the wrong length, surfaces as ProviderFailure.
inline FeedbackBundle generate_feedback(const AnswerSet& answers, const std::vector<std::string>& keys,
                                        const Rubric& rubric, const FeedbackProvider& provider,
                                        const std::vector<Question>& questions = {},
                                        const Clock& clock = now) {
  if (answers.answers.size() != keys.size()) {
    throw Error(Errc::AnswerCountMismatch, std::to_string(answers.answers.size()) +
                                               " answers for " + std::to_string(keys.size()) +
                                               " questions");
  }
  const std::string pid(provider.id());
  std::vector<FeedbackEntry> entries;
  try {
    entries = provider.grade({questions, answers.answers, keys, rubric});
  } catch (const Error& e) {
    if (e.code() == Errc::ProviderFailure) throw;
    throw Error(Errc::ProviderFailure, "provider '" + pid + "': " + e.what());
  } catch (const std::exception& e) {
    throw Error(Errc::ProviderFailure, "provider '" + pid + "': " + e.what());
  }
  if (entries.size() != keys.size()) {
    throw Error(Errc::ProviderFailure, "provider '" + pid + "' returned " +
                                           std::to_string(entries.size()) + " entries for " +
                                           std::to_string(keys.size()) + " questions");
  }
  return FeedbackBundle{std::move(entries), clock(), pid};
}

}  // namespace edl::grading
