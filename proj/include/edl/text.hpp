#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace edl::text {

/// Identifies the stop-word list below. Bump when the list changes, since
/// every stored match score depends on it.
inline constexpr std::string_view kStopWordsVersion = "edl-stopwords-1";

// Sorted for binary search.
inline constexpr std::array<std::string_view, 125> kStopWords = {
    "a",        "about",   "above",     "after",     "again",      "against", "all",
    "am",       "an",      "and",       "any",       "are",        "as",      "at",
    "be",       "because", "been",      "before",    "being",      "below",   "between",
    "both",     "but",     "by",        "can",       "could",      "did",     "do",
    "does",     "doing",   "down",      "during",    "each",       "few",     "for",
    "from",     "further", "had",       "has",       "have",       "having",  "he",
    "her",      "here",    "hers",      "herself",   "him",        "himself", "his",
    "how",      "i",       "if",        "in",        "into",       "is",      "it",
    "its",      "itself",  "just",      "me",        "more",       "most",    "my",
    "myself",   "no",      "nor",       "not",       "of",         "off",     "on",
    "once",     "only",    "or",        "other",     "our",        "ours",    "ourselves",
    "out",      "over",    "own",       "same",      "she",        "should",  "so",
    "some",     "such",    "than",      "that",      "the",        "their",   "theirs",
    "them",     "themselves", "then",   "there",     "these",      "they",    "this",
    "those",    "through", "to",        "too",       "under",      "until",   "up",
    "very",     "was",     "we",        "were",      "what",       "when",    "where",
    "which",    "while",   "who",       "whom",      "why",        "will",    "with",
    "would",    "you",     "your",      "yours",     "yourself",   "yourselves",
};

static_assert(std::is_sorted(kStopWords.begin(), kStopWords.end()));

inline bool is_stop_word(std::string_view token) {
  return std::binary_search(kStopWords.begin(), kStopWords.end(), token);
}

inline bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

inline std::string_view trim(std::string_view s) {
  auto not_space = [](unsigned char c) { return std::isspace(c) == 0; };
  auto b = std::find_if(s.begin(), s.end(), not_space);
  auto e = std::find_if(s.rbegin(), std::make_reverse_iterator(b), not_space).base();
  return {b, e};
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

/// Case-folds ASCII, treats every ASCII non-alphanumeric byte as a separator
/// and keeps non-ASCII bytes inside tokens.
inline std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : s) {
    if (c >= 0x80 || std::isalnum(c)) {
      cur.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

/// Tokens that carry content: tokenize() minus stop words.
inline std::vector<std::string> content_tokens(std::string_view s) {
  auto toks = tokenize(s);
  std::erase_if(toks, [](const std::string& t) { return is_stop_word(t); });
  return toks;
}

}  // namespace edl::text
