#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

#include "workbench/catalog.hpp"
#include "workbench/engine.hpp"
#include "workbench/task.hpp"

namespace workbench::json_io {

using nlohmann::json;

// A replay-format action object that fails validation. `field` names the
// offending key (empty when the whole value is wrong).
class ActionFormatError : public std::runtime_error {
 public:
  ActionFormatError(std::string field, const std::string& detail)
      : std::runtime_error(field.empty() ? detail : field + ": " + detail), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

json to_json(const engine::StateChangeEvent& ev);
engine::StateChangeEvent event_from_json(const json& j);
json to_json(const engine::EngineError& err);
json to_json(const engine::CombinedTool& tool);
json to_json(const engine::WorldState& world);

// Replay-format action. Only fields the action carries are emitted.
json to_json(const engine::Action& action);
// Validates and converts a replay-format object. "t_ms" is accepted and
// ignored here; see replay::parse_entry.
engine::Action action_from_json(const json& j);

json to_json(const task::ProgressReport& report);
json to_json(const task::ScoreCard& card);
task::ScoreCard scorecard_from_json(const json& j);
json to_json(const task::Outcome& outcome);
json to_json(const task::Hint& hint);
json to_json(const task::ErrorEntry& entry);

json to_json(const config::ValidationReport& report);
json to_json(const config::ToolSpec& tool);
json to_json(const config::PartSpec& part);
json to_json(const config::TaskPlan& plan);

}  // namespace workbench::json_io
