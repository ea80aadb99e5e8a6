#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "workbench/csv.hpp"

namespace workbench::config {

enum class ToolKind { Wrench, TorqueWrench, Extension, Socket, Special };

std::string_view to_string(ToolKind kind);
std::optional<ToolKind> parse_tool_kind(std::string_view token);
inline bool is_wrench(ToolKind k) { return k == ToolKind::Wrench || k == ToolKind::TorqueWrench; }

struct ToolSpec {
  std::string tool_id;
  std::string name;
  ToolKind kind = ToolKind::Special;
  std::vector<std::string> kit;
  std::size_t source_row = 0;

  bool operator==(const ToolSpec&) const = default;
};

struct WrenchUseCondition {
  std::string wrench_id;
  std::optional<std::string> fix_wrench_id;
  std::optional<std::string> extension_id;
  std::optional<std::string> socket_id;
  bool need_extension = false;
  int min_torque = 0;  // N·m
  int max_torque = 0;  // N·m

  bool operator==(const WrenchUseCondition&) const = default;
};

enum class ScrewOutLevel { OneCm, TwoCm, Custom };

std::string_view to_string(ScrewOutLevel level);
std::optional<ScrewOutLevel> parse_screw_out_level(std::string_view token);

using Vec3 = std::array<double, 3>;

struct PartSpec {
  std::string part_id;
  std::string name;
  bool tool_dependent = false;
  std::vector<std::string> preconditions;
  std::optional<WrenchUseCondition> wrench_condition;
  ScrewOutLevel screw_out_level = ScrewOutLevel::TwoCm;
  std::optional<double> custom_out_cm;
  bool auto_fix = false;
  Vec3 disappear_dir{0.0, 0.0, 1.0};
  double disappear_dist_cm = 0.0;
  double disappear_duration_s = 1.0;
  std::size_t source_row = 0;

  // Travel of a screw-type part when fully unscrewed; 0 for hand-operated parts.
  double screw_target_cm() const;

  bool operator==(const PartSpec&) const = default;
};

enum class StepAction { Remove, Install };

std::string_view to_string(StepAction action);
std::optional<StepAction> parse_step_action(std::string_view token);

struct Step {
  std::string step_name;
  std::string part_id;
  StepAction action = StepAction::Remove;
  std::size_t source_row = 0;

  bool operator==(const Step&) const = default;
};

struct StepGroup {
  std::string group_name;
  std::vector<Step> steps;

  bool operator==(const StepGroup&) const = default;
};

struct TaskPlan {
  std::string task_id;
  std::string task_name;
  std::vector<StepGroup> groups;

  std::size_t step_count() const;
  // Steps flattened in execution order.
  std::vector<const Step*> flat_steps() const;

  bool operator==(const TaskPlan&) const = default;
};

inline const std::vector<std::string> kToolsHeader{"tool_id", "name", "kind", "kit"};
inline const std::vector<std::string> kPartsHeader{
    "part_id",    "name",           "tool_dependent",  "preconditions",     "wrench_id",
    "fix_wrench_id", "extension_id", "socket_id",       "need_extension",    "min_torque",
    "max_torque", "screw_out_level", "custom_out_cm",   "auto_fix",          "disappear_dir",
    "disappear_dist_cm", "disappear_duration_s"};
inline const std::vector<std::string> kTasksHeader{"task_id",    "task_name", "group_index",
                                                   "group_name", "step_index", "step_name",
                                                   "part_id",    "action"};

bool is_valid_id(std::string_view token);

std::vector<ToolSpec> parse_tools_csv(std::string_view text, const std::string& file = "tools.csv");
std::vector<PartSpec> parse_parts_csv(std::string_view text, const std::string& file = "parts.csv");
std::vector<TaskPlan> parse_tasks_csv(std::string_view text, const std::string& file = "tasks.csv");

std::string serialize_tools_csv(const std::vector<ToolSpec>& tools);
std::string serialize_parts_csv(const std::vector<PartSpec>& parts);
std::string serialize_tasks_csv(const std::vector<TaskPlan>& plans);

struct Issue {
  std::string code;
  csv::Location location;
  std::string detail;
};

struct ValidationReport {
  std::vector<Issue> errors;
  std::vector<Issue> warnings;

  bool usable() const { return errors.empty(); }
  bool has_error(std::string_view code) const;
};

ValidationReport validate_catalog(const std::vector<ToolSpec>& tools,
                                  const std::vector<PartSpec>& parts,
                                  const std::vector<TaskPlan>& plans);

// Immutable, indexed view over parsed records. Built once per process and
// shared by every session.
class Catalog {
 public:
  Catalog(std::vector<ToolSpec> tools, std::vector<PartSpec> parts, std::vector<TaskPlan> plans);

  const std::vector<ToolSpec>& tools() const { return tools_; }
  const std::vector<PartSpec>& parts() const { return parts_; }
  const std::vector<TaskPlan>& plans() const { return plans_; }

  const ToolSpec* find_tool(std::string_view id) const;
  const PartSpec* find_part(std::string_view id) const;
  const TaskPlan* find_plan(std::string_view id) const;

  // Parts that list `part_id` among their preconditions.
  const std::vector<std::string>& dependents(std::string_view part_id) const;

 private:
  std::vector<ToolSpec> tools_;
  std::vector<PartSpec> parts_;
  std::vector<TaskPlan> plans_;
  std::unordered_map<std::string, std::size_t> tool_index_;
  std::unordered_map<std::string, std::size_t> part_index_;
  std::unordered_map<std::string, std::size_t> plan_index_;
  std::unordered_map<std::string, std::vector<std::string>> dependents_;
};

// Phases a plan expects the parts to be in before its first step: every part
// whose first touch in the plan is an INSTALL starts removed, closed over the
// precondition relation so the start state never has a removed part whose
// preconditions are still in place.
std::map<std::string, bool> starting_removed(const Catalog& catalog, const TaskPlan& plan);

class LoadError : public std::runtime_error {
 public:
  LoadError(std::string path, const std::string& detail)
      : std::runtime_error(path + ": " + detail), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

struct LoadedCatalog {
  std::shared_ptr<const Catalog> catalog;
  ValidationReport report;
};

// Reads tools.csv, parts.csv and tasks.csv from `dir`. Missing or unreadable
// files raise LoadError; malformed content raises csv::ParseError.
LoadedCatalog load_catalog_dir(const std::filesystem::path& dir);

std::string read_file(const std::filesystem::path& path);

}  // namespace workbench::config
