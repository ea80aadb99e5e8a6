#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "workbench/catalog.hpp"
#include "workbench/replay.hpp"
#include "workbench/task.hpp"

namespace workbench::service {

using nlohmann::json;

// Status code plus JSON body, independent of the HTTP transport.
struct Response {
  int status = 200;
  json body;
};

// A stored snapshot whose action log is unreadable or does not reproduce
// the stored progress.
class CorruptionError : public std::runtime_error {
 public:
  CorruptionError(std::string session_id, const std::string& detail)
      : std::runtime_error("session " + session_id + ": " + detail), session_id_(std::move(session_id)) {}
  const std::string& session_id() const noexcept { return session_id_; }

 private:
  std::string session_id_;
};

class SnapshotIoError : public std::runtime_error {
 public:
  SnapshotIoError(const std::filesystem::path& path, const std::string& detail)
      : std::runtime_error(path.string() + ": " + detail) {}
};

std::string new_session_id();
bool is_session_id(std::string_view token);

class SessionService {
 public:
  // Monotonic milliseconds; sessions measure their time against it.
  using TimeSource = std::function<std::int64_t()>;

  explicit SessionService(std::shared_ptr<const config::Catalog> catalog, TimeSource time_source = {});

  Response create_session(const json& body);
  Response create_session_text(const std::string& body);
  Response get_state(const std::string& session_id) const;
  Response post_action(const std::string& session_id, const std::string& body);
  Response post_action(const std::string& session_id, const json& action);
  Response submit(const std::string& session_id);
  Response get_scorecard(const std::string& session_id) const;

  Response catalog_tasks() const;
  Response catalog_tools() const;
  Response catalog_parts() const;

  // One JSON file per session. Returns the number of files written.
  std::size_t store(const std::filesystem::path& dir) const;
  // Replays every snapshot in `dir` into this service. Returns the number
  // of sessions restored. Throws CorruptionError or SnapshotIoError.
  std::size_t restore(const std::filesystem::path& dir);

  std::size_t session_count() const;
  std::vector<std::string> session_ids() const;
  const config::Catalog& catalog() const { return *catalog_; }

 private:
  struct Record;

  std::shared_ptr<Record> find(const std::string& session_id) const;
  json snapshot_of(const Record& record) const;
  std::shared_ptr<Record> rebuild(const json& snapshot, const std::string& origin) const;
  std::int64_t now_ms() const { return time_source_(); }

  std::shared_ptr<const config::Catalog> catalog_;
  TimeSource time_source_;
  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Record>> sessions_;
};

}  // namespace workbench::service
