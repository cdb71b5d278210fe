#pragma once

// Event-sourced session persistence.
//
// File layout under the store root:
//   sessions/<session_id>.log   one event per line: "<crc32 hex8> <canonical json>\n"
//   packages/<package_id>.json  validated assignment packages
//
// An append returns only after the line has been fsync'd. A trailing line
// without its newline is a torn write from a crash before acknowledgement;
// readers ignore it and the next append truncates it away.

#include <fcntl.h>
#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <cerrno>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <vector>

#include "edl/json_io.hpp"
#include "edl/session.hpp"

namespace edl::store {

namespace fs = std::filesystem;

inline std::uint32_t crc32_of(std::string_view bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

inline std::string canonical(const SessionEvent& e) { return json(e).dump(); }

/// A session's committed events as read back from storage.
struct EventLogPage {
  std::string session_id;
  std::vector<SessionEvent> events;
  /// CRC-32 over the concatenated canonical serializations of `events`.
  std::uint32_t checksum = 0;

  static std::uint32_t checksum_of(const std::vector<SessionEvent>& events) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    for (const auto& e : events) {
      const auto text = canonical(e);
      crc = ::crc32(crc, reinterpret_cast<const Bytef*>(text.data()), static_cast<uInt>(text.size()));
    }
    return static_cast<std::uint32_t>(crc);
  }

  bool verify() const { return checksum == checksum_of(events); }
};

/// Ids become file names, so only [A-Za-z0-9._-] is accepted (no leading dot).
inline void require_safe_id(std::string_view id, std::string_view what) {
  const bool ok = !id.empty() && id.size() <= 128 && id.front() != '.' &&
                  std::all_of(id.begin(), id.end(), [](unsigned char c) {
                    return std::isalnum(c) || c == '-' || c == '_' || c == '.';
                  });
  if (!ok) throw Error(Errc::BadRequest, std::string(what) + " '" + std::string(id) + "' is not a valid id");
}

namespace detail {

inline std::string format_line(const SessionEvent& e) {
  const auto body = canonical(e);
  char prefix[10];
  std::snprintf(prefix, sizeof prefix, "%08x ", crc32_of(body));
  return std::string(prefix) + body + "\n";
}

struct ParsedLog {
  std::vector<SessionEvent> events;
  std::size_t committed_bytes = 0;  // offset just past the last complete line
  bool torn_tail = false;
};

inline ParsedLog parse_log(std::string_view content, std::string_view session_id) {
  ParsedLog out;
  std::size_t pos = 0;
  while (pos < content.size()) {
    const auto nl = content.find('\n', pos);
    if (nl == std::string_view::npos) {
      out.torn_tail = true;
      break;
    }
    const auto line = content.substr(pos, nl - pos);
    pos = nl + 1;
    out.committed_bytes = pos;
    if (line.size() < 10 || line[8] != ' ') {
      throw Error(Errc::ChecksumMismatch, "session '" + std::string(session_id) + "': bad line framing");
    }
    const auto body = line.substr(9);
    std::uint32_t stored = 0;
    try {
      stored = static_cast<std::uint32_t>(std::stoul(std::string(line.substr(0, 8)), nullptr, 16));
    } catch (const std::exception&) {
      throw Error(Errc::ChecksumMismatch, "session '" + std::string(session_id) + "': bad checksum field");
    }
    if (stored != crc32_of(body)) {
      throw Error(Errc::ChecksumMismatch, "session '" + std::string(session_id) + "': event " +
                                              std::to_string(out.events.size() + 1) +
                                              " fails its checksum");
    }
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded()) throw Error(Errc::MalformedEvent, "unparseable event line");
    auto e = j.get<SessionEvent>();
    if (e.seq != out.events.size() + 1) {
      throw Error(Errc::SequenceGap, "session '" + std::string(session_id) + "': expected seq " +
                                         std::to_string(out.events.size() + 1) + ", found " +
                                         std::to_string(e.seq));
    }
    out.events.push_back(std::move(e));
  }
  return out;
}

inline std::optional<std::string> read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void fsync_path(const fs::path& p, int flags) {
  int fd = ::open(p.c_str(), flags);
  if (fd < 0) return;
  ::fsync(fd);
  ::close(fd);
}

inline void write_all_durable(const fs::path& p, std::string_view bytes, bool append) {
  const bool existed = fs::exists(p);
  int fd = ::open(p.c_str(), O_WRONLY | O_CREAT | (append ? O_APPEND : O_TRUNC), 0644);
  if (fd < 0) {
    throw Error(Errc::StorageFailure, "open " + p.string() + ": " + std::strerror(errno));
  }
  std::size_t done = 0;
  while (done < bytes.size()) {
    auto n = ::write(fd, bytes.data() + done, bytes.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      const std::string why = std::strerror(errno);
      ::close(fd);
      throw Error(Errc::StorageFailure, "write " + p.string() + ": " + why);
    }
    done += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0) {
    const std::string why = std::strerror(errno);
    ::close(fd);
    throw Error(Errc::StorageFailure, "fsync " + p.string() + ": " + why);
  }
  ::close(fd);
  if (!existed) fsync_path(p.parent_path(), O_RDONLY | O_DIRECTORY);
}

}  // namespace detail

/// Append-only event log per session, either in memory or under a directory.
class EventStore {
 public:
  /// In-memory store; nothing survives the process.
  EventStore() = default;

  explicit EventStore(fs::path root) : root_(std::move(root)) {
    std::error_code ec;
    fs::create_directories(*root_ / "sessions", ec);
    if (!ec) fs::create_directories(*root_ / "packages", ec);
    if (ec) throw Error(Errc::StorageFailure, "cannot create store at " + root_->string() + ": " + ec.message());
  }

  bool durable() const noexcept { return root_.has_value(); }
  const std::optional<fs::path>& root() const noexcept { return root_; }

  /// Requires event.seq == last seq + 1 (first event has seq 1).
  void append_event(const std::string& session_id, const SessionEvent& event) {
    require_safe_id(session_id, "session id");
    auto& log = log_for(session_id);
    std::lock_guard lock(log.mutex);
    ensure_loaded(session_id, log);
    if (event.seq != log.last_seq + 1) {
      throw Error(Errc::SequenceGap, "session '" + session_id + "': expected seq " +
                                         std::to_string(log.last_seq + 1) + ", got " +
                                         std::to_string(event.seq));
    }
    auto line = detail::format_line(event);
    if (root_) detail::write_all_durable(session_path(session_id), line, /*append=*/true);
    log.lines.push_back(std::move(line));
    log.last_seq = event.seq;
  }

  /// Reads and verifies a session's log. File-backed stores re-read the
  /// file so on-disk corruption is detected.
  EventLogPage read_page(const std::string& session_id) const {
    require_safe_id(session_id, "session id");
    std::string content;
    if (root_) {
      auto* log = find_log(session_id);
      std::unique_lock<std::mutex> lock;
      if (log) lock = std::unique_lock(log->mutex);
      auto file = detail::read_file(session_path(session_id));
      if (!file) throw Error(Errc::UnknownSession, "no log for session '" + session_id + "'");
      content = std::move(*file);
    } else {
      auto* log = find_log(session_id);
      if (!log) throw Error(Errc::UnknownSession, "no log for session '" + session_id + "'");
      std::lock_guard lock(log->mutex);
      for (const auto& l : log->lines) content += l;
    }
    auto parsed = detail::parse_log(content, session_id);
    if (parsed.events.empty()) throw Error(Errc::UnknownSession, "empty log for session '" + session_id + "'");
    EventLogPage page{session_id, std::move(parsed.events), 0};
    page.checksum = EventLogPage::checksum_of(page.events);
    return page;
  }

  Session replay_session(const std::string& session_id) const {
    return replay(read_page(session_id).events);
  }

  std::vector<std::string> session_ids() const {
    std::vector<std::string> ids;
    if (root_) {
      for (const auto& entry : fs::directory_iterator(*root_ / "sessions")) {
        if (entry.path().extension() == ".log") ids.push_back(entry.path().stem().string());
      }
    } else {
      std::shared_lock lock(map_mutex_);
      for (const auto& [id, log] : logs_) ids.push_back(id);
    }
    std::sort(ids.begin(), ids.end());
    return ids;
  }

  void save_package(const ValidatedPackage& pkg) {
    require_safe_id(pkg.id(), "package id");
    const auto text = json(pkg).dump(2);
    std::lock_guard lock(package_mutex_);
    if (root_) {
      const auto final_path = *root_ / "packages" / (pkg.id() + ".json");
      const auto tmp = final_path.string() + ".tmp";
      detail::write_all_durable(tmp, text, /*append=*/false);
      std::error_code ec;
      fs::rename(tmp, final_path, ec);
      if (ec) throw Error(Errc::StorageFailure, "rename " + tmp + ": " + ec.message());
      detail::fsync_path(final_path.parent_path(), O_RDONLY | O_DIRECTORY);
    }
    packages_.insert_or_assign(pkg.id(), pkg);
  }

  std::vector<ValidatedPackage> load_packages() const {
    std::lock_guard lock(package_mutex_);
    std::vector<ValidatedPackage> out;
    if (root_) {
      for (const auto& entry : fs::directory_iterator(*root_ / "packages")) {
        if (entry.path().extension() != ".json") continue;
        auto text = detail::read_file(entry.path());
        json j = json::parse(text.value_or(""), nullptr, false);
        if (j.is_discarded()) throw Error(Errc::StorageFailure, "corrupt package file " + entry.path().string());
        out.push_back(validate_package(j.get<AssignmentPackage>()));
      }
      std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id() < b.id(); });
    } else {
      for (const auto& [id, pkg] : packages_) out.push_back(pkg);
    }
    return out;
  }

 private:
  struct Log {
    std::mutex mutex;
    std::vector<std::string> lines;
    std::uint64_t last_seq = 0;
    bool loaded = false;
  };

  fs::path session_path(const std::string& id) const { return *root_ / "sessions" / (id + ".log"); }

  Log* find_log(const std::string& id) const {
    std::shared_lock lock(map_mutex_);
    auto it = logs_.find(id);
    return it == logs_.end() ? nullptr : it->second.get();
  }

  Log& log_for(const std::string& id) {
    if (auto* log = find_log(id)) return *log;
    std::unique_lock lock(map_mutex_);
    auto& slot = logs_[id];
    if (!slot) slot = std::make_unique<Log>();
    return *slot;
  }

  // Caller holds log.mutex.
  void ensure_loaded(const std::string& id, Log& log) {
    if (log.loaded) return;
    if (root_) {
      const auto path = session_path(id);
      if (auto content = detail::read_file(path)) {
        auto parsed = detail::parse_log(*content, id);
        if (parsed.torn_tail) {
          if (::truncate(path.c_str(), static_cast<off_t>(parsed.committed_bytes)) != 0) {
            throw Error(Errc::StorageFailure, "cannot truncate torn tail of " + path.string());
          }
        }
        for (const auto& e : parsed.events) log.lines.push_back(detail::format_line(e));
        log.last_seq = parsed.events.size();
      }
    }
    log.loaded = true;
  }

  std::optional<fs::path> root_;
  mutable std::shared_mutex map_mutex_;
  std::map<std::string, std::unique_ptr<Log>> logs_;
  mutable std::mutex package_mutex_;
  std::map<std::string, ValidatedPackage> packages_;
};

}  // namespace edl::store
