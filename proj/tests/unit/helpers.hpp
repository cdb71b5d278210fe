#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "edl/engine.hpp"

namespace edl::testing {

inline AssignmentPackage three_question_package(std::string id = "pkg-3") {
  AssignmentPackage p;
  p.package_id = std::move(id);
  p.semester = "F24";
  p.materials = {{"IEP teams", "The team includes parents, a general educator and a special educator."}};
  p.questions = {{"q1", "Who is on the IEP team?"},
                 {"q2", "What is a measurable goal?"},
                 {"q3", "What is the least restrictive environment?"}};
  p.answer_keys = {"required members: parents, general educator, special educator",
                   "measurable goal states observable behavior, criterion and timeline",
                   "education alongside nondisabled peers to maximum extent appropriate"};
  return p;
}

/// Engine with a fixed clock and sequential session ids.
inline std::shared_ptr<LoopEngine> make_engine(std::shared_ptr<store::EventStore> store = nullptr,
                                               std::shared_ptr<const grading::FeedbackProvider> provider = nullptr) {
  auto counter = std::make_shared<std::atomic<int>>(0);
  EngineOptions opts;
  opts.clock = [] { return Timestamp{std::chrono::milliseconds{1'000}}; };
  opts.next_session_id = [counter] { return "s-" + std::to_string(++*counter); };
  return std::make_shared<LoopEngine>(std::move(store), std::move(provider), std::move(opts));
}

/// Deleted on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("edl-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + "-" +
             std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace edl::testing

/// Passes when `stmt` throws edl::Error with code `errc`.
#define EXPECT_ERRC(stmt, errc)                                                       \
  do {                                                                                \
    try {                                                                             \
      stmt;                                                                           \
      ADD_FAILURE() << "expected " << ::edl::to_string(errc) << ", nothing thrown";   \
    } catch (const ::edl::Error& e_) {                                                \
      EXPECT_EQ(e_.code(), errc) << e_.what();                                        \
    }                                                                                 \
  } while (0)
