#pragma once

// Adapter for an out-of-process feedback provider (e.g. a hosted language
// model). The request and response are JSON documents:
//
//   request  {"schema": "edl.feedback-request/1",
//             "questions": [{"id", "prompt"}...], "answers": [...],
//             "keys": [...], "rubric": {...}}
//   response {"per_question": [{"feedback": str, "provisional_grade": 0|1|2}...]}
//
// Anything else coming back is a ProviderFailure.

#include <functional>
#include <string>
#include <utility>

#include <httplib.h>

#include "edl/grading.hpp"
#include "edl/json_io.hpp"

namespace edl::grading {

inline constexpr std::string_view kFeedbackRequestSchema = "edl.feedback-request/1";

inline json build_provider_request(const FeedbackRequest& request) {
  return json{{"schema", kFeedbackRequestSchema},
              {"questions", request.questions},
              {"answers", request.answers},
              {"keys", request.keys},
              {"rubric", request.rubric}};
}

inline std::vector<FeedbackEntry> parse_provider_response(std::string_view body,
                                                          std::size_t expected,
                                                          std::string_view provider_id) {
  auto fail = [&](const std::string& why) {
    return Error(Errc::ProviderFailure,
                 "provider '" + std::string(provider_id) + "' malformed response: " + why);
  };
  json doc = json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw fail("not a JSON object");
  if (!doc.contains("per_question") || !doc["per_question"].is_array()) {
    throw fail("missing per_question array");
  }
  std::vector<FeedbackEntry> out;
  for (const auto& item : doc["per_question"]) {
    if (!item.is_object() || !item.contains("feedback") || !item["feedback"].is_string() ||
        !item.contains("provisional_grade") || !item["provisional_grade"].is_number_integer()) {
      throw fail("entry lacks feedback text or integer provisional_grade");
    }
    const int g = item["provisional_grade"].get<int>();
    if (g < 0 || g > 2) throw fail("provisional_grade " + std::to_string(g) + " out of range");
    out.push_back({item["feedback"].get<std::string>(), GradeValue::from_int(g)});
  }
  if (out.size() != expected) {
    throw fail(std::to_string(out.size()) + " entries for " + std::to_string(expected) +
               " questions");
  }
  return out;
}

/// Posts the request body and returns the response body. Throws on transport
/// errors.
using Transport = std::function<std::string(const std::string& request_body)>;

class ExternalProvider final : public FeedbackProvider {
 public:
  ExternalProvider(std::string provider_id, Transport transport)
      : id_(std::move(provider_id)), transport_(std::move(transport)) {}

  std::string_view id() const override { return id_; }
  bool deterministic() const override { return false; }
  bool external() const override { return true; }

  std::vector<FeedbackEntry> grade(const FeedbackRequest& request) const override {
    if (!transport_) throw Error(Errc::ProviderFailure, "provider '" + id_ + "' has no transport");
    std::string body;
    try {
      body = transport_(build_provider_request(request).dump());
    } catch (const std::exception& e) {
      throw Error(Errc::ProviderFailure, "provider '" + id_ + "' transport: " + e.what());
    }
    return parse_provider_response(body, request.answers.size(), id_);
  }

 private:
  std::string id_;
  Transport transport_;
};

/// Transport that POSTs to `base_url` + `path` as application/json.
inline Transport http_transport(std::string base_url, std::string path = "/feedback",
                                int timeout_seconds = 30) {
  return [base_url = std::move(base_url), path = std::move(path),
          timeout_seconds](const std::string& request_body) {
    httplib::Client client(base_url);
    client.set_connection_timeout(timeout_seconds, 0);
    client.set_read_timeout(timeout_seconds, 0);
    auto res = client.Post(path, request_body, "application/json");
    if (!res) throw std::runtime_error("request failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw std::runtime_error("HTTP status " + std::to_string(res->status));
    return res->body;
  };
}

}  // namespace edl::grading
