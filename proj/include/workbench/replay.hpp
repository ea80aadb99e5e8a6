#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "workbench/catalog.hpp"
#include "workbench/engine.hpp"
#include "workbench/task.hpp"

namespace workbench::replay {

// One line of a replay file: the action plus the optional session-relative
// timestamp the action was taken at.
struct Entry {
  engine::Action action;
  std::optional<std::int64_t> t_ms;
  std::size_t line = 0;

  bool operator==(const Entry&) const = default;
};

class FormatError : public std::runtime_error {
 public:
  FormatError(std::size_t line, const std::string& detail)
      : std::runtime_error("line " + std::to_string(line) + ": " + detail), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

Entry parse_entry(std::string_view json_text, std::size_t line = 0);
// One JSON object per line; blank lines are skipped.
std::vector<Entry> parse(std::string_view text);
std::string to_line(const Entry& entry);
std::string to_text(const std::vector<Entry>& entries);

struct Record {
  Entry entry;
  std::optional<task::Outcome> outcome;
  std::optional<task::ScoreCard> scorecard;  // for the submit entry
  std::string error;                          // session-level refusal, e.g. after submit
};

struct RunResult {
  std::vector<Record> records;
  std::optional<task::ScoreCard> scorecard;
  task::ProgressReport progress;  // taken before submit resets the scene
  std::vector<bus::Message> event_log;
};

// Executes `entries` on a fresh session. The session clock follows the
// entries' t_ms values and holds its last value where t_ms is absent.
RunResult run(std::shared_ptr<const config::Catalog> catalog, std::string_view task_id, task::Mode mode,
              const std::vector<Entry>& entries);

std::vector<Entry> to_entries(const std::vector<engine::Action>& actions);

}  // namespace workbench::replay
