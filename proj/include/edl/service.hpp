#pragma once

// HTTP+JSON front end for the loop engine.
//
//   POST /packages                      teacher       register an assignment package
//   POST /sessions                      student       open a session {package_id}
//   GET  /sessions/{id}                 owner/teacher session view
//   GET  /sessions/{id}/materials       owner/teacher advances to MaterialsRendered once
//   GET  /sessions/{id}/questions       owner/teacher advances to QuestionsRendered once
//   POST /sessions/{id}/answers         owner         first attempt -> feedback
//   GET  /sessions/{id}/feedback        owner/teacher feedback archive
//   POST /sessions/{id}/revision        owner         revision + self_reflection
//   POST /sessions/{id}/skip            owner         forward without revising
//   POST /sessions/{id}/final-grade     teacher       {grade, per_question?}
//   GET  /teacher/queue                 teacher
//   GET  /health                        anyone
//
// Callers authenticate with "Authorization: Bearer <token>"; the config maps
// tokens to actors. Every session response carries its version, also sent as
// an ETag. Mutations may send If-Match (or "expected_version" in the body);
// a stale version gets 409.

#include <atomic>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include <httplib.h>

#include "edl/engine.hpp"
#include "edl/external_provider.hpp"
#include "edl/json_io.hpp"

namespace edl::service {

// ---------------------------------------------------------------------------
// Configuration

struct ServiceConfig {
  std::string host = "127.0.0.1";
  /// 0 picks a free port.
  int port = 8080;
  /// Event-log directory; empty keeps everything in memory.
  std::string store_path;
  /// "overlap-v1" or "external".
  std::string provider = std::string(grading::OverlapProvider::kId);
  std::string provider_url;
  /// Rubric thresholds applied to packages that do not carry their own rubric.
  double satisfactory_threshold = Rubric{}.satisfactory_threshold;
  double improvement_threshold = Rubric{}.improvement_threshold;
  /// Bearer token -> actor.
  std::map<std::string, Actor> tokens;
  int worker_threads = 8;

  Rubric default_rubric() const {
    Rubric r;
    r.satisfactory_threshold = satisfactory_threshold;
    r.improvement_threshold = improvement_threshold;
    return r;
  }

  /// Throws ConfigError on the first invalid setting.
  void validate() const {
    if (port < 0 || port > 65535) throw Error(Errc::ConfigError, "port out of range: " + std::to_string(port));
    try {
      default_rubric().validate();
    } catch (const Error& e) {
      throw Error(Errc::ConfigError, std::string("rubric thresholds: ") + e.what());
    }
    if (provider == "external") {
      if (provider_url.empty()) throw Error(Errc::ConfigError, "external provider needs provider_url");
    } else if (provider != grading::OverlapProvider::kId) {
      throw Error(Errc::ConfigError, "unknown provider '" + provider + "'");
    }
    if (worker_threads < 1) throw Error(Errc::ConfigError, "worker_threads must be at least 1");
    for (const auto& [token, actor] : tokens) {
      if (token.empty()) throw Error(Errc::ConfigError, "empty bearer token");
      if (actor.id.empty()) throw Error(Errc::ConfigError, "token maps to an actor without an id");
    }
  }
};

namespace detail {

inline Role parse_role(std::string_view s) {
  if (s == "teacher") return Role::Teacher;
  if (s == "student") return Role::Student;
  if (s == "agent" || s == "ai") return Role::AIAgent;
  throw Error(Errc::ConfigError, "unknown role '" + std::string(s) + "'");
}

inline double parse_double(const std::string& s, const char* what) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') throw Error(Errc::ConfigError, std::string(what) + ": not a number: '" + s + "'");
  return v;
}

inline int parse_int(const std::string& s, const char* what) {
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0') throw Error(Errc::ConfigError, std::string(what) + ": not an integer: '" + s + "'");
  return static_cast<int>(v);
}

/// "tok1=teacher:alice,tok2=student:bob"
inline std::map<std::string, Actor> parse_token_list(std::string_view list) {
  std::map<std::string, Actor> out;
  while (!list.empty()) {
    const auto comma = list.find(',');
    const auto item = text::trim(list.substr(0, comma));
    list = comma == std::string_view::npos ? std::string_view{} : list.substr(comma + 1);
    if (item.empty()) continue;
    const auto eq = item.find('='), colon = item.find(':');
    if (eq == std::string_view::npos || colon == std::string_view::npos || colon < eq) {
      throw Error(Errc::ConfigError, "token entry must look like token=role:id, got '" + std::string(item) + "'");
    }
    out[std::string(item.substr(0, eq))] = Actor{parse_role(item.substr(eq + 1, colon - eq - 1)),
                                                 std::string(item.substr(colon + 1))};
  }
  return out;
}

}  // namespace detail

/// Applies a JSON config document on top of `cfg`.
inline void apply_config_json(ServiceConfig& cfg, const json& j) {
  if (!j.is_object()) throw Error(Errc::ConfigError, "config must be a JSON object");
  try {
    if (j.contains("host")) cfg.host = j.at("host").get<std::string>();
    if (j.contains("port")) cfg.port = j.at("port").get<int>();
    if (j.contains("store_path")) cfg.store_path = j.at("store_path").get<std::string>();
    if (j.contains("provider")) cfg.provider = j.at("provider").get<std::string>();
    if (j.contains("provider_url")) cfg.provider_url = j.at("provider_url").get<std::string>();
    if (j.contains("satisfactory_threshold")) cfg.satisfactory_threshold = j.at("satisfactory_threshold").get<double>();
    if (j.contains("improvement_threshold")) cfg.improvement_threshold = j.at("improvement_threshold").get<double>();
    if (j.contains("worker_threads")) cfg.worker_threads = j.at("worker_threads").get<int>();
    if (j.contains("tokens")) {
      cfg.tokens.clear();
      for (const auto& [token, a] : j.at("tokens").items()) {
        cfg.tokens[token] = Actor{detail::parse_role(a.at("role").get<std::string>()), a.at("id").get<std::string>()};
      }
    }
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigError, std::string("bad config value: ") + e.what());
  }
}

/// Overrides from EDL_HOST, EDL_PORT, EDL_STORE_PATH, EDL_PROVIDER,
/// EDL_PROVIDER_URL, EDL_SATISFACTORY_THRESHOLD, EDL_IMPROVEMENT_THRESHOLD,
/// EDL_WORKER_THREADS and EDL_TOKENS (token=role:id,...).
inline void apply_env(ServiceConfig& cfg, const std::function<std::optional<std::string>(const char*)>& getenv) {
  if (auto v = getenv("EDL_HOST")) cfg.host = *v;
  if (auto v = getenv("EDL_PORT")) cfg.port = detail::parse_int(*v, "EDL_PORT");
  if (auto v = getenv("EDL_STORE_PATH")) cfg.store_path = *v;
  if (auto v = getenv("EDL_PROVIDER")) cfg.provider = *v;
  if (auto v = getenv("EDL_PROVIDER_URL")) cfg.provider_url = *v;
  if (auto v = getenv("EDL_SATISFACTORY_THRESHOLD")) {
    cfg.satisfactory_threshold = detail::parse_double(*v, "EDL_SATISFACTORY_THRESHOLD");
  }
  if (auto v = getenv("EDL_IMPROVEMENT_THRESHOLD")) {
    cfg.improvement_threshold = detail::parse_double(*v, "EDL_IMPROVEMENT_THRESHOLD");
  }
  if (auto v = getenv("EDL_WORKER_THREADS")) cfg.worker_threads = detail::parse_int(*v, "EDL_WORKER_THREADS");
  if (auto v = getenv("EDL_TOKENS")) cfg.tokens = detail::parse_token_list(*v);
}

inline std::optional<std::string> process_env(const char* name) {
  const char* v = std::getenv(name);
  return v ? std::optional<std::string>(v) : std::nullopt;
}

/// Defaults, then the optional file, then the environment; validated.
inline ServiceConfig load_config(const std::optional<std::filesystem::path>& file,
                                 const std::function<std::optional<std::string>(const char*)>& getenv = process_env) {
  ServiceConfig cfg;
  if (file) {
    std::ifstream in(*file);
    if (!in) throw Error(Errc::ConfigError, "cannot read config " + file->string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(Errc::ConfigError, file->string() + " is not valid JSON");
    apply_config_json(cfg, j);
  }
  apply_env(cfg, getenv);
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// Wire helpers

inline int http_status(Errc code) {
  switch (code) {
    case Errc::Unauthenticated: return 401;
    case Errc::UnauthorizedActor: return 403;
    case Errc::UnknownSession:
    case Errc::UnknownPackage: return 404;
    case Errc::WrongPhase:
    case Errc::VersionConflict:
    case Errc::DuplicatePackage: return 409;
    case Errc::ProviderFailure: return 502;
    case Errc::StorageFailure:
    case Errc::IOFailure:
    case Errc::ChecksumMismatch:
    case Errc::SequenceGap:
    case Errc::MalformedEvent:
    case Errc::BindFailure:
    case Errc::ConfigError: return 500;
    default: return 400;
  }
}

/// Operations the service would accept for a session at its current phase.
inline std::vector<std::string> allowed_operations(const Session& s) {
  switch (s.phase) {
    case Phase::Created: return {};
    case Phase::BackendInitialized: return {"materials"};
    case Phase::MaterialsRendered: return {"materials", "questions"};
    case Phase::QuestionsRendered: return {"materials", "questions", "answers"};
    case Phase::FirstAttemptSubmitted:
    case Phase::FeedbackRendered: return {"materials", "questions", "feedback", "revision", "skip"};
    case Phase::RevisionSubmitted:
    case Phase::ForwardedToTeacher: return {"materials", "questions", "feedback", "final-grade"};
    case Phase::FinalGraded:
    case Phase::Closed: return {"materials", "questions", "feedback"};
  }
  return {};
}

inline json session_view(const Session& s) {
  json j{{"session_id", s.session_id},
         {"package_id", s.package_id},
         {"student_id", s.student_id},
         {"question_count", s.question_count},
         {"phase", to_string(s.phase)},
         {"step", current_step(s.phase)},
         {"version", s.version()},
         {"revision_skipped", s.revision_skipped()},
         {"allowed", allowed_operations(s)}};
  if (s.final_grade) j["final_grade"] = *s.final_grade;
  return j;
}

// ---------------------------------------------------------------------------
// Server

class Service {
 public:
  explicit Service(ServiceConfig config, std::shared_ptr<LoopEngine> engine = nullptr)
      : config_(std::move(config)), engine_(std::move(engine)) {
    config_.validate();
    if (!engine_) engine_ = make_engine(config_);
    server_.new_task_queue = [n = config_.worker_threads] { return new httplib::ThreadPool(n); };
    // httplib's default adds SO_REUSEPORT, which would let a second server
    // share an occupied port instead of failing to bind.
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    });
    routes();
  }

  ~Service() { stop(); }
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  static std::shared_ptr<LoopEngine> make_engine(const ServiceConfig& cfg) {
    auto store = cfg.store_path.empty() ? std::make_shared<store::EventStore>()
                                        : std::make_shared<store::EventStore>(cfg.store_path);
    std::shared_ptr<const grading::FeedbackProvider> provider;
    if (cfg.provider == "external") {
      provider = std::make_shared<grading::ExternalProvider>("external",
                                                             grading::http_transport(cfg.provider_url));
    } else {
      provider = std::make_shared<grading::OverlapProvider>();
    }
    auto engine = std::make_shared<LoopEngine>(std::move(store), std::move(provider));
    engine->recover();
    return engine;
  }

  LoopEngine& engine() noexcept { return *engine_; }

  /// Binds the listening socket; BindFailure if the address is unavailable.
  /// Returns the bound port.
  int bind() {
    if (config_.port == 0) {
      bound_port_ = server_.bind_to_any_port(config_.host);
    } else {
      bound_port_ = server_.bind_to_port(config_.host, config_.port) ? config_.port : -1;
    }
    if (bound_port_ <= 0) {
      throw Error(Errc::BindFailure, "cannot bind " + config_.host + ":" + std::to_string(config_.port));
    }
    return bound_port_;
  }

  int port() const noexcept { return bound_port_; }

  /// Serves until stop(). Binds first if needed.
  void run() {
    if (bound_port_ <= 0) bind();
    server_.listen_after_bind();
  }

  /// Binds and serves on a background thread.
  int start() {
    const int p = bind();
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return p;
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

 private:
  using Req = httplib::Request;
  using Res = httplib::Response;

  static void send(Res& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void send_session(Res& res, int status, const Session& s, json body) {
    res.set_header("ETag", "\"" + std::to_string(s.version()) + "\"");
    body["session"] = session_view(s);
    body["version"] = s.version();
    send(res, status, body);
  }

  Actor authenticate(const Req& req) const {
    const auto h = req.get_header_value("Authorization");
    constexpr std::string_view kBearer = "Bearer ";
    if (!std::string_view(h).starts_with(kBearer)) throw Error(Errc::Unauthenticated, "bearer token required");
    auto it = config_.tokens.find(std::string(text::trim(std::string_view(h).substr(kBearer.size()))));
    if (it == config_.tokens.end()) throw Error(Errc::Unauthenticated, "unknown bearer token");
    return it->second;
  }

  static json body_of(const Req& req) {
    if (req.body.empty()) return json::object();
    json j = json::parse(req.body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(Errc::BadRequest, "request body must be a JSON object");
    return j;
  }

  /// If-Match takes precedence over "expected_version" in the body.
  static std::optional<std::uint64_t> expected_version(const Req& req, const json& body) {
    auto tag = req.get_header_value("If-Match");
    if (!tag.empty()) {
      std::string_view v = text::trim(tag);
      if (v.starts_with("W/")) v.remove_prefix(2);
      if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
      if (v == "*") return std::nullopt;
      std::uint64_t n = 0;
      auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
      if (ec != std::errc{} || p != v.data() + v.size()) throw Error(Errc::BadRequest, "If-Match must be a version number");
      return n;
    }
    if (body.contains("expected_version")) {
      if (!body["expected_version"].is_number_unsigned()) throw Error(Errc::BadRequest, "expected_version must be a non-negative integer");
      return body["expected_version"].get<std::uint64_t>();
    }
    return std::nullopt;
  }

  /// Owner student or any teacher may read a session.
  Session readable_session(const std::string& id, const Actor& who) const {
    auto s = engine_->session(id);
    if (who.role == Role::Teacher || (who.role == Role::Student && who.id == s.student_id)) return s;
    throw Error(Errc::UnauthorizedActor, "'" + who.id + "' may not read session '" + id + "'");
  }

  template <typename Handler>
  httplib::Server::Handler guarded(Handler h) {
    return [h = std::move(h)](const Req& req, Res& res) {
      try {
        h(req, res);
      } catch (const Error& e) {
        send(res, http_status(e.code()), {{"error", to_string(e.code())}, {"message", e.what()}});
      } catch (const json::exception& e) {
        send(res, 400, {{"error", "BadRequest"}, {"message", e.what()}});
      } catch (const std::exception& e) {
        send(res, 500, {{"error", "Internal"}, {"message", e.what()}});
      }
    };
  }

  void routes() {
    server_.Get("/health", guarded([this](const Req&, Res& res) {
      send(res, 200, {{"status", "ok"},
                      {"provider", std::string(engine_->provider().id())},
                      {"durable", engine_->store().durable()},
                      {"sessions", engine_->sessions().size()}});
    }));

    server_.Post("/packages", guarded([this](const Req& req, Res& res) {
      const auto who = authenticate(req);
      const auto body = body_of(req);
      auto candidate = body.get<AssignmentPackage>();
      if (!body.contains("rubric")) candidate.rubric = config_.default_rubric();
      auto pkg = validate_package(std::move(candidate));
      engine_->register_package(pkg, who);
      send(res, 201, {{"package_id", pkg.id()}, {"package", pkg}});
    }));

    server_.Post("/sessions", guarded([this](const Req& req, Res& res) {
      const auto who = authenticate(req);
      const auto body = body_of(req);
      if (who.role != Role::Student) throw Error(Errc::UnauthorizedActor, "only a student may open a session");
      if (body.contains("student_id") && body["student_id"] != who.id) {
        throw Error(Errc::UnauthorizedActor, "a student may only open their own session");
      }
      const auto s = engine_->create_session(edl::detail::required<std::string>(body, "package_id"), who.id);
      send_session(res, 201, s, json::object());
    }));

    server_.Get(R"(/sessions/([^/]+))", guarded([this](const Req& req, Res& res) {
      const auto who = authenticate(req);
      send_session(res, 200, readable_session(req.matches[1], who), json::object());
    }));

    server_.Get(R"(/sessions/([^/]+)/materials)", guarded([this](const Req& req, Res& res) {
      const auto who = authenticate(req);
      const std::string id = req.matches[1];
      readable_session(id, who);
      auto materials = engine_->render_materials(id);
      send_session(res, 200, engine_->session(id), {{"materials", materials}});
    }));

    server_.Get(R"(/sessions/([^/]+)/questions)", guarded([this](const Req& req, Res& res) {
      const auto who = authenticate(req);
      const std::string id = req.matches[1];
      readable_session(id, who);
      auto questions = engine_->render_questions(id);
      send_session(res, 200, engine_->session(id), {{"questions", questions}});
    }));

    server_.Post(R"(/sessions/([^/]+)/answers)", guarded([this](const Req& req, Res& res) {
      const auto who = authenticate(req);
      const auto body = body_of(req);
      const std::string id = req.matches[1];
      auto bundle = engine_->submit_answers(id, body.get<AnswerSet>(), who, expected_version(req, body));
      send_session(res, 200, engine_->session(id), {{"feedback", bundle}});
    }));

    server_.Get(R"(/sessions/([^/]+)/feedback)", guarded([this](const Req& req, Res& res) {
      const auto who = authenticate(req);
      const std::string id = req.matches[1];
      const auto s = readable_session(id, who);
      send_session(res, 200, s, {{"feedback", engine_->get_feedback(id)}});
    }));

    server_.Post(R"(/sessions/([^/]+)/revision)", guarded([this](const Req& req, Res& res) {
      const auto who = authenticate(req);
      const auto body = body_of(req);
      const auto s = engine_->submit_revision(req.matches[1], body.get<RevisedAnswerSet>(), who,
                                              expected_version(req, body));
      send_session(res, 200, s, json::object());
    }));

    server_.Post(R"(/sessions/([^/]+)/skip)", guarded([this](const Req& req, Res& res) {
      const auto who = authenticate(req);
      const auto body = body_of(req);
      const auto reason = edl::detail::optional_field<std::string>(body, "reason", "skipped by student");
      const auto s = engine_->skip_revision(req.matches[1], reason, who, expected_version(req, body));
      send_session(res, 200, s, json::object());
    }));

    server_.Post(R"(/sessions/([^/]+)/final-grade)", guarded([this](const Req& req, Res& res) {
      const auto who = authenticate(req);
      const auto body = body_of(req);
      const auto grade = edl::detail::required<GradeValue>(body, "grade");
      const auto per_question = edl::detail::optional_field<std::vector<GradeValue>>(body, "per_question", {});
      const auto s = engine_->record_final_grade(req.matches[1], grade, who, per_question,
                                                 expected_version(req, body));
      send_session(res, 200, s, json::object());
    }));

    server_.Get("/teacher/queue", guarded([this](const Req& req, Res& res) {
      const auto who = authenticate(req);
      if (who.role != Role::Teacher) throw Error(Errc::UnauthorizedActor, "only a teacher may read the queue");
      json items = json::array();
      for (const auto& s : engine_->teacher_queue()) {
        json item = session_view(s);
        if (auto answers = s.answers_under_review()) item["answers"] = *answers;
        if (s.revision && s.revision->self_reflection) item["self_reflection"] = *s.revision->self_reflection;
        if (s.skip_reason) item["skip_reason"] = *s.skip_reason;
        if (s.feedback) item["feedback"] = *s.feedback;
        items.push_back(std::move(item));
      }
      send(res, 200, {{"queue", items}});
    }));
  }

  ServiceConfig config_;
  std::shared_ptr<LoopEngine> engine_;
  httplib::Server server_;
  std::thread thread_;
  int bound_port_ = -1;
};

}  // namespace edl::service
