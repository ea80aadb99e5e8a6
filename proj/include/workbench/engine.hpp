#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "workbench/catalog.hpp"

namespace workbench::bus {
class MessageBus;
}

namespace workbench::engine {

inline constexpr const char* kStateChangedTopic = "part.state_changed";

enum class Phase { Installed, Loosened, Removed };

std::string_view to_string(Phase phase);
std::optional<Phase> parse_phase(std::string_view token);

struct PartState {
  Phase phase = Phase::Installed;
  double screw_progress_cm = 0.0;

  bool operator==(const PartState&) const = default;
};

struct CombinedTool {
  std::string base;
  std::optional<std::string> extension;
  std::optional<std::string> socket;

  // base first, then extension, then socket.
  std::vector<std::string> tool_ids() const;

  auto operator<=>(const CombinedTool&) const = default;
};

struct WorldState {
  std::shared_ptr<const config::Catalog> catalog;
  std::map<std::string, PartState> parts;
  std::set<std::string> toolbox;
  std::vector<CombinedTool> assemblies;

  bool operator==(const WorldState& other) const {
    return catalog == other.catalog && parts == other.parts && toolbox == other.toolbox &&
           assemblies == other.assemblies;
  }
};

// Every part installed, every tool in the toolbox.
WorldState initial_world(std::shared_ptr<const config::Catalog> catalog);

struct DisappearEffect {
  config::Vec3 dir{};
  double dist_cm = 0.0;
  double duration_s = 0.0;

  bool operator==(const DisappearEffect&) const = default;
};

struct StateChangeEvent {
  std::string part_id;
  Phase from_phase = Phase::Installed;
  Phase to_phase = Phase::Installed;
  double screw_progress_cm = 0.0;
  std::optional<DisappearEffect> disappear;

  bool operator==(const StateChangeEvent&) const = default;
};

enum class ErrorCode {
  NotFound,
  IncompatibleKit,
  SlotOccupied,
  ToolUnavailable,
  NotToolDependent,
  PreconditionUnmet,
  ReversePreconditionUnmet,
  WrenchConditionFailed,
  WrongPhase,
};

std::string_view to_string(ErrorCode code);

enum class Violation {
  BaseMismatch,
  SocketMismatch,
  MissingExtension,
  ExtensionMismatch,
  UnexpectedExtension,
  TorqueOutOfRange,
  TorqueMissing,
};

std::string_view to_string(Violation v);

struct EngineError {
  ErrorCode code = ErrorCode::NotFound;
  std::string detail;
  std::vector<std::string> blocking_parts;  // PRECONDITION_UNMET / REVERSE_PRECONDITION_UNMET
  std::vector<Violation> violations;        // WRENCH_CONDITION_FAILED

  bool operator==(const EngineError&) const = default;
};

template <class T>
class Result {
 public:
  Result(T value) : value_(std::move(value)) {}
  Result(EngineError error) : value_(std::move(error)) {}

  bool ok() const { return std::holds_alternative<T>(value_); }
  explicit operator bool() const { return ok(); }

  const T& value() const& { return std::get<T>(value_); }
  T& value() & { return std::get<T>(value_); }
  T&& value() && { return std::get<T>(std::move(value_)); }
  const EngineError& error() const { return std::get<EngineError>(value_); }

 private:
  std::variant<T, EngineError> value_;
};

struct Combined {
  WorldState world;
  CombinedTool tool;
};

struct Transition {
  WorldState world;
  std::vector<StateChangeEvent> events;
};

// Which wrench of a condition is acting: the main wrench unscrews (and
// screws back in when auto_fix is set), the fixing wrench tightens.
enum class WrenchRole { Main, Fixing };

// Every clause of `cond` that `assembly` (and `torque`, when given) breaks.
// An empty result means the condition passes.
std::vector<Violation> check_wrench_condition(const config::WrenchUseCondition& cond, const CombinedTool& assembly,
                                              std::optional<int> torque, WrenchRole role = WrenchRole::Main);

// True when `tool` is one of the built assemblies, or a bare wrench sitting
// in the toolbox.
bool is_held(const WorldState& world, const CombinedTool& tool);

Result<Combined> combine(const WorldState& world, std::string_view base, std::string_view attachment);
Result<WorldState> split(const WorldState& world, const CombinedTool& assembly);

// INSTALLED -> LOOSENED (unscrew) or LOOSENED -> INSTALLED (screw in and fix).
//
// Loosening needs the condition's main wrench and every precondition part
// removed; torque is ignored. Fixing with auto_fix set completes with the main
// wrench. Otherwise the fixing wrench acts (the main wrench when none is
// configured) and, when that wrench is a torque wrench, the torque must fall
// inside the configured range.
Result<Transition> apply_tool(const WorldState& world, const CombinedTool& assembly, std::string_view part,
                              std::optional<int> torque);
Result<Transition> detach_part(const WorldState& world, std::string_view part);
Result<Transition> attach_part(const WorldState& world, std::string_view part);

// The tool an apply_tool call on `part` needs in its current phase, with the
// torque to pass (absent when torque plays no role). Empty for parts that are
// not tool-dependent or not in a tool-operable phase.
struct ToolRequirement {
  CombinedTool assembly;
  WrenchRole role = WrenchRole::Main;
  std::optional<int> torque;
  std::optional<std::pair<int, int>> torque_range;
};
std::optional<ToolRequirement> required_tool(const WorldState& world, std::string_view part);

enum class ActionOp { Combine, Split, ApplyTool, Detach, Attach, Submit };

std::string_view to_string(ActionOp op);
std::optional<ActionOp> parse_action_op(std::string_view token);

struct Action {
  ActionOp op = ActionOp::Submit;
  std::optional<std::string> base;
  std::optional<std::string> attachment;
  std::vector<std::string> tool;
  std::optional<std::string> part;
  std::optional<int> torque;

  bool operator==(const Action&) const = default;
  auto operator<=>(const Action&) const = default;
};

// Resolves a replay-style tool list ([base, attachments...]) into a
// CombinedTool by the attachments' kinds.
Result<CombinedTool> resolve_tool(const WorldState& world, const std::vector<std::string>& ids);

// Dispatches any non-submit action. Combine/split produce no events.
Result<Transition> perform(const WorldState& world, const Action& action);

// Every combine/split/apply_tool/detach/attach call that succeeds on `world`.
// apply_tool entries carry the torque of ToolRequirement.
std::vector<Action> available_actions(const WorldState& world);

// Publishes each event on kStateChangedTopic.
void publish_events(bus::MessageBus& bus, const std::vector<StateChangeEvent>& events);

}  // namespace workbench::engine
