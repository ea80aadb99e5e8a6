#include "workbench/session_service.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>

#include "workbench/json_io.hpp"

namespace workbench::service {

namespace fs = std::filesystem;

namespace {

Response error(int status, std::string code, std::string detail, std::string field = {}) {
  json err{{"code", std::move(code)}, {"detail", std::move(detail)}};
  if (!field.empty()) err["field"] = std::move(field);
  return Response{status, json{{"error", err}}};
}

Response not_found(const std::string& id) { return error(404, "SESSION_NOT_FOUND", "no session '" + id + "'"); }

std::string utc_timestamp() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::int64_t steady_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

// Session time: live against the service time source, or pinned while an
// action runs (so every timestamp inside one action matches its log entry)
// and while a snapshot is replayed.
struct SessionClock {
  SessionService::TimeSource source;
  std::int64_t base = 0;
  std::optional<std::int64_t> pinned;

  std::int64_t now() const { return pinned ? *pinned : source() - base; }
  void resume_from(std::int64_t t) {
    base = source() - t;
    pinned.reset();
  }
};

}  // namespace

std::string new_session_id() {
  static thread_local std::random_device rd;
  std::uint64_t hi = (std::uint64_t{rd()} << 32) | rd();
  std::uint64_t lo = (std::uint64_t{rd()} << 32) | rd();
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(hi),
                static_cast<unsigned long long>(lo));
  return buf;
}

bool is_session_id(std::string_view token) {
  if (token.size() != 32) return false;
  for (char c : token) {
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  }
  return true;
}

struct SessionService::Record {
  std::mutex mutex;
  std::string session_id;
  std::string created_at;
  std::string task_id;
  task::Mode mode = task::Mode::Learning;
  std::shared_ptr<SessionClock> clock;
  std::unique_ptr<task::TaskSession> session;
  std::vector<replay::Entry> log;

  // Runs `fn` with the clock pinned to the current session time and logs
  // the action under that time.
  template <typename Fn>
  auto timed(const engine::Action& action, Fn&& fn) {
    auto t = clock->now();
    clock->pinned = t;
    struct Unpin {
      SessionClock& c;
      ~Unpin() { c.pinned.reset(); }
    } unpin{*clock};
    auto result = fn();
    log.push_back(replay::Entry{action, t, log.size() + 1});
    return result;
  }
};

SessionService::SessionService(std::shared_ptr<const config::Catalog> catalog, TimeSource time_source)
    : catalog_(std::move(catalog)), time_source_(time_source ? std::move(time_source) : TimeSource(steady_ms)) {}

std::shared_ptr<SessionService::Record> SessionService::find(const std::string& session_id) const {
  std::shared_lock lock(sessions_mutex_);
  auto it = sessions_.find(session_id);
  return it == sessions_.end() ? nullptr : it->second;
}

Response SessionService::create_session_text(const std::string& body) {
  auto j = json::parse(body, nullptr, false);
  if (j.is_discarded()) return error(400, "MALFORMED_JSON", "request body is not valid JSON");
  return create_session(j);
}

Response SessionService::create_session(const json& body) {
  if (!body.is_object()) return error(400, "VALIDATION_ERROR", "body must be a JSON object");
  for (const char* key : {"task_id", "mode"}) {
    if (!body.contains(key)) return error(400, "VALIDATION_ERROR", "required", key);
    if (!body.at(key).is_string()) return error(400, "VALIDATION_ERROR", "must be a string", key);
  }
  auto task_id = body.at("task_id").get<std::string>();
  auto mode = task::parse_mode(body.at("mode").get<std::string>());
  if (!mode) return error(400, "VALIDATION_ERROR", "mode must be LEARNING, TRAINING or EXAM", "mode");
  if (!catalog_->find_plan(task_id)) return error(404, "TASK_NOT_FOUND", "no task '" + task_id + "'");

  auto rec = std::make_shared<Record>();
  rec->session_id = new_session_id();
  rec->created_at = utc_timestamp();
  rec->task_id = task_id;
  rec->mode = *mode;
  rec->clock = std::make_shared<SessionClock>();
  rec->clock->source = time_source_;
  rec->clock->resume_from(0);
  rec->session =
      task::TaskSession::start(catalog_, task_id, *mode, [c = rec->clock] { return c->now(); }, rec->session_id);
  auto progress = json_io::to_json(rec->session->progress());
  {
    std::unique_lock lock(sessions_mutex_);
    sessions_[rec->session_id] = rec;
  }
  return Response{201, json{{"session_id", rec->session_id}, {"progress", progress}}};
}

Response SessionService::get_state(const std::string& session_id) const {
  auto rec = find(session_id);
  if (!rec) return not_found(session_id);
  std::lock_guard lock(rec->mutex);
  json actions = json::array();
  if (!rec->session->state().submitted) {
    for (const auto& a : rec->session->available_actions()) actions.push_back(json_io::to_json(a));
  }
  auto hint = rec->session->next_hint();
  return Response{200, json{{"progress", json_io::to_json(rec->session->progress())},
                            {"actions", actions},
                            {"hint", hint ? json_io::to_json(*hint) : json(nullptr)},
                            {"submitted", rec->session->state().submitted},
                            {"world", json_io::to_json(rec->session->state().world)}}};
}

Response SessionService::post_action(const std::string& session_id, const std::string& body) {
  auto j = json::parse(body, nullptr, false);
  if (j.is_discarded()) {
    if (!find(session_id)) return not_found(session_id);
    return error(400, "MALFORMED_JSON", "request body is not valid JSON");
  }
  return post_action(session_id, j);
}

Response SessionService::post_action(const std::string& session_id, const json& body) {
  auto rec = find(session_id);
  if (!rec) return not_found(session_id);
  engine::Action action;
  try {
    action = json_io::action_from_json(body);
  } catch (const json_io::ActionFormatError& e) {
    return error(400, "VALIDATION_ERROR", e.what(), e.field());
  }
  if (action.op == engine::ActionOp::Submit) return submit(session_id);

  std::lock_guard lock(rec->mutex);
  if (rec->session->state().submitted) return error(409, "ALREADY_SUBMITTED", "session already submitted");
  auto outcome = rec->timed(action, [&] { return rec->session->handle_action(action); });
  return Response{200, json{{"outcome", json_io::to_json(outcome)},
                            {"progress", json_io::to_json(rec->session->progress())}}};
}

Response SessionService::submit(const std::string& session_id) {
  auto rec = find(session_id);
  if (!rec) return not_found(session_id);
  std::lock_guard lock(rec->mutex);
  if (rec->session->state().submitted) return error(409, "ALREADY_SUBMITTED", "session already submitted");
  engine::Action action{};
  action.op = engine::ActionOp::Submit;
  auto card = rec->timed(action, [&] { return rec->session->submit(); });
  return Response{200, json{{"scorecard", json_io::to_json(card)}}};
}

Response SessionService::get_scorecard(const std::string& session_id) const {
  auto rec = find(session_id);
  if (!rec) return not_found(session_id);
  std::lock_guard lock(rec->mutex);
  const auto& card = rec->session->state().scorecard;
  if (!card) return error(409, "NOT_SUBMITTED", "session not submitted");
  return Response{200, json{{"scorecard", json_io::to_json(*card)}}};
}

Response SessionService::catalog_tasks() const {
  json out = json::array();
  for (const auto& plan : catalog_->plans()) {
    auto j = json_io::to_json(plan);
    j["step_count"] = plan.step_count();
    out.push_back(std::move(j));
  }
  return Response{200, json{{"tasks", out}}};
}

Response SessionService::catalog_tools() const {
  json out = json::array();
  for (const auto& t : catalog_->tools()) out.push_back(json_io::to_json(t));
  return Response{200, json{{"tools", out}}};
}

Response SessionService::catalog_parts() const {
  json out = json::array();
  for (const auto& p : catalog_->parts()) out.push_back(json_io::to_json(p));
  return Response{200, json{{"parts", out}}};
}

std::size_t SessionService::session_count() const {
  std::shared_lock lock(sessions_mutex_);
  return sessions_.size();
}

std::vector<std::string> SessionService::session_ids() const {
  std::shared_lock lock(sessions_mutex_);
  std::vector<std::string> out;
  for (const auto& [id, rec] : sessions_) out.push_back(id);
  return out;
}

json SessionService::snapshot_of(const Record& rec) const {
  json log = json::array();
  for (const auto& e : rec.log) {
    auto j = json_io::to_json(e.action);
    j["t_ms"] = e.t_ms.value_or(0);
    log.push_back(std::move(j));
  }
  const auto& card = rec.session->state().scorecard;
  return json{{"session_id", rec.session_id},
              {"created_at", rec.created_at},
              {"task_id", rec.task_id},
              {"mode", task::to_string(rec.mode)},
              {"action_log", log},
              {"clock_ms", rec.clock->now()},
              {"progress", json_io::to_json(rec.session->progress())},
              {"scorecard", card ? json_io::to_json(*card) : json(nullptr)}};
}

std::size_t SessionService::store(const fs::path& dir) const {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw SnapshotIoError(dir, ec.message());
  std::vector<std::shared_ptr<Record>> records;
  {
    std::shared_lock lock(sessions_mutex_);
    for (const auto& [id, rec] : sessions_) records.push_back(rec);
  }
  for (const auto& rec : records) {
    json snap;
    {
      std::lock_guard lock(rec->mutex);
      snap = snapshot_of(*rec);
    }
    auto path = dir / (rec->session_id + ".json");
    auto tmp = path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw SnapshotIoError(tmp, "cannot open for writing");
      out << snap.dump(2) << '\n';
      if (!out.flush()) throw SnapshotIoError(tmp, "write failed");
    }
    fs::rename(tmp, path, ec);
    if (ec) throw SnapshotIoError(path, ec.message());
  }
  return records.size();
}

std::shared_ptr<SessionService::Record> SessionService::rebuild(const json& snap, const std::string& origin) const {
  if (!snap.is_object() || !snap.contains("session_id") || !snap.at("session_id").is_string()) {
    throw CorruptionError(origin, "missing session_id");
  }
  auto rec = std::make_shared<Record>();
  rec->session_id = snap.at("session_id").get<std::string>();
  const auto& id = rec->session_id;
  if (!is_session_id(id)) throw CorruptionError(id, "malformed session id");
  auto field = [&](const char* key) -> const json& {
    if (!snap.contains(key)) throw CorruptionError(id, std::string("missing field ") + key);
    return snap.at(key);
  };
  try {
    rec->created_at = field("created_at").get<std::string>();
    rec->task_id = field("task_id").get<std::string>();
    auto mode = task::parse_mode(field("mode").get<std::string>());
    if (!mode) throw CorruptionError(id, "invalid mode");
    rec->mode = *mode;
  } catch (const json::exception& e) {
    throw CorruptionError(id, e.what());
  }
  if (!catalog_->find_plan(rec->task_id)) throw CorruptionError(id, "unknown task '" + rec->task_id + "'");
  const auto& log = field("action_log");
  if (!log.is_array()) throw CorruptionError(id, "action_log is not an array");

  rec->clock = std::make_shared<SessionClock>();
  rec->clock->source = time_source_;
  rec->clock->pinned = 0;
  rec->session =
      task::TaskSession::start(catalog_, rec->task_id, rec->mode, [c = rec->clock] { return c->now(); }, id);

  std::int64_t last_t = 0;
  std::size_t line = 0;
  for (const auto& item : log) {
    ++line;
    replay::Entry entry;
    try {
      entry = replay::parse_entry(item.dump(), line);
    } catch (const replay::FormatError& e) {
      throw CorruptionError(id, "action_log entry " + std::string(e.what()));
    }
    if (!entry.t_ms || *entry.t_ms < last_t) {
      throw CorruptionError(id, "action_log entry " + std::to_string(line) + ": missing or decreasing t_ms");
    }
    last_t = *entry.t_ms;
    rec->clock->pinned = last_t;
    try {
      if (entry.action.op == engine::ActionOp::Submit) {
        rec->session->submit();
      } else {
        rec->session->handle_action(entry.action);
      }
    } catch (const task::SessionError& e) {
      throw CorruptionError(id, "action_log entry " + std::to_string(line) + ": " + e.what());
    }
    rec->log.push_back(std::move(entry));
  }

  if (json_io::to_json(rec->session->progress()) != field("progress")) {
    throw CorruptionError(id, "replayed progress differs from stored progress");
  }
  const auto& card = rec->session->state().scorecard;
  const auto& stored_card = field("scorecard");
  if ((card ? json_io::to_json(*card) : json(nullptr)) != stored_card) {
    throw CorruptionError(id, "replayed scorecard differs from stored scorecard");
  }
  std::int64_t resume_at = last_t;
  if (snap.contains("clock_ms")) {
    const auto& c = snap.at("clock_ms");
    if (!c.is_number_integer() || c.get<std::int64_t>() < last_t) {
      throw CorruptionError(id, "clock_ms is not an integer at or after the last action");
    }
    resume_at = c.get<std::int64_t>();
  }
  rec->clock->resume_from(resume_at);
  return rec;
}

std::size_t SessionService::restore(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw SnapshotIoError(dir, "not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  if (ec) throw SnapshotIoError(dir, ec.message());
  std::sort(files.begin(), files.end());

  std::vector<std::shared_ptr<Record>> rebuilt;
  for (const auto& path : files) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SnapshotIoError(path, "cannot open for reading");
    std::stringstream ss;
    ss << in.rdbuf();
    auto snap = json::parse(ss.str(), nullptr, false);
    auto origin = path.stem().string();
    if (snap.is_discarded()) throw CorruptionError(origin, "snapshot is not valid JSON");
    rebuilt.push_back(rebuild(snap, origin));
  }
  std::unique_lock lock(sessions_mutex_);
  for (auto& rec : rebuilt) sessions_[rec->session_id] = std::move(rec);
  return rebuilt.size();
}

}  // namespace workbench::service
