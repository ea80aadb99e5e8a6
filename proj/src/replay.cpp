#include "workbench/replay.hpp"

#include "workbench/json_io.hpp"

namespace workbench::replay {

Entry parse_entry(std::string_view json_text, std::size_t line) {
  auto j = nlohmann::json::parse(json_text, nullptr, false);
  if (j.is_discarded()) {
    throw FormatError(line, "malformed JSON");
  }
  Entry e;
  e.line = line;
  try {
    e.action = json_io::action_from_json(j);
  } catch (const json_io::ActionFormatError& err) {
    throw FormatError(line, err.what());
  }
  if (auto it = j.find("t_ms"); it != j.end()) e.t_ms = it->get<std::int64_t>();
  return e;
}

std::vector<Entry> parse(std::string_view text) {
  std::vector<Entry> out;
  std::size_t line = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    auto raw = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    ++line;
    if (raw.find_first_not_of(" \t\r") != std::string_view::npos) {
      out.push_back(parse_entry(raw, line));
    }
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
  return out;
}

std::string to_line(const Entry& entry) {
  auto j = json_io::to_json(entry.action);
  if (entry.t_ms) j["t_ms"] = *entry.t_ms;
  return j.dump();
}

std::string to_text(const std::vector<Entry>& entries) {
  std::string out;
  for (const auto& e : entries) out += to_line(e) + "\n";
  return out;
}

std::vector<Entry> to_entries(const std::vector<engine::Action>& actions) {
  std::vector<Entry> out;
  for (std::size_t i = 0; i < actions.size(); ++i) out.push_back(Entry{actions[i], std::nullopt, i + 1});
  return out;
}

RunResult run(std::shared_ptr<const config::Catalog> catalog, std::string_view task_id, task::Mode mode,
              const std::vector<Entry>& entries) {
  task::ManualClock clock;
  auto session = task::TaskSession::start(std::move(catalog), task_id, mode, clock.clock());
  RunResult result;
  for (const auto& entry : entries) {
    if (entry.t_ms) clock.set(*entry.t_ms);
    Record rec{entry, std::nullopt, std::nullopt, {}};
    try {
      if (entry.action.op == engine::ActionOp::Submit) {
        result.progress = session->progress();
        rec.scorecard = session->submit();
        result.scorecard = rec.scorecard;
      } else {
        rec.outcome = session->handle_action(entry.action);
      }
    } catch (const task::SessionError& e) {
      rec.error = e.what();
    }
    result.records.push_back(std::move(rec));
  }
  if (!result.scorecard) result.progress = session->progress();
  result.event_log = session->event_log();
  return result;
}

}  // namespace workbench::replay
