#include "workbench/engine.hpp"

#include <algorithm>

#include "workbench/bus.hpp"
#include "workbench/json_io.hpp"

namespace workbench::engine {

namespace {

using config::PartSpec;
using config::ToolKind;
using config::ToolSpec;

EngineError make_error(ErrorCode code, std::string detail) {
  return EngineError{code, std::move(detail), {}, {}};
}

bool contains(const std::vector<std::string>& v, std::string_view id) {
  return std::find(v.begin(), v.end(), id) != v.end();
}

// Base of the assembly currently built on `base`, if any.
const CombinedTool* assembly_with_base(const WorldState& world, std::string_view base) {
  for (const auto& a : world.assemblies) {
    if (a.base == base) return &a;
  }
  return nullptr;
}

std::optional<EngineError> check_tool_ids(const WorldState& world, const CombinedTool& tool) {
  for (const auto& id : tool.tool_ids()) {
    if (!world.catalog->find_tool(id)) {
      return make_error(ErrorCode::NotFound, "unknown tool '" + id + "'");
    }
  }
  return std::nullopt;
}

std::vector<std::string> unremoved_preconditions(const WorldState& world, const PartSpec& part) {
  std::vector<std::string> blockers;
  for (const auto& pre : part.preconditions) {
    auto it = world.parts.find(pre);
    if (it != world.parts.end() && it->second.phase != Phase::Removed) {
      blockers.push_back(pre);
    }
  }
  return blockers;
}

std::vector<std::string> removed_dependents(const WorldState& world, const PartSpec& part) {
  std::vector<std::string> blockers;
  for (const auto& dep : world.catalog->dependents(part.part_id)) {
    auto it = world.parts.find(dep);
    if (it != world.parts.end() && it->second.phase == Phase::Removed) {
      blockers.push_back(dep);
    }
  }
  return blockers;
}

EngineError blocked(ErrorCode code, std::vector<std::string> blockers, const std::string& what) {
  EngineError e = make_error(code, what + " blocked by " + csv::join_list(blockers, ','));
  e.blocking_parts = std::move(blockers);
  return e;
}

std::optional<EngineError> lookup_part(const WorldState& world, std::string_view part, const PartSpec*& spec) {
  spec = world.catalog->find_part(part);
  if (!spec || !world.parts.contains(spec->part_id)) {
    return make_error(ErrorCode::NotFound, "unknown part '" + std::string(part) + "'");
  }
  return std::nullopt;
}

Transition transition(const WorldState& world, const PartSpec& part, Phase to, double progress) {
  Transition t{world, {}};
  auto& state = t.world.parts.at(part.part_id);
  StateChangeEvent ev{part.part_id, state.phase, to, progress, std::nullopt};
  if (to == Phase::Removed) {
    ev.disappear = DisappearEffect{part.disappear_dir, part.disappear_dist_cm, part.disappear_duration_s};
  }
  state = PartState{to, progress};
  t.events.push_back(std::move(ev));
  return t;
}

// Shared by apply_tool and available_actions: why apply_tool would fail.
std::optional<EngineError> apply_error(const WorldState& world, const CombinedTool& assembly, const PartSpec& part,
                                       std::optional<int> torque) {
  if (!part.tool_dependent || !part.wrench_condition) {
    return make_error(ErrorCode::NotToolDependent, "part '" + part.part_id + "' is operated by hand");
  }
  const auto& state = world.parts.at(part.part_id);
  if (state.phase == Phase::Removed) {
    return make_error(ErrorCode::WrongPhase, "part '" + part.part_id + "' is removed; attach it first");
  }
  if (auto err = check_tool_ids(world, assembly)) return err;
  if (!is_held(world, assembly)) {
    return make_error(ErrorCode::ToolUnavailable,
                      "tool " + csv::join_list(assembly.tool_ids(), '+') + " is not assembled");
  }

  const auto& cond = *part.wrench_condition;
  std::vector<Violation> violations;
  if (state.phase == Phase::Installed) {
    auto blockers = unremoved_preconditions(world, part);
    if (!blockers.empty()) {
      return blocked(ErrorCode::PreconditionUnmet, std::move(blockers), "unscrewing '" + part.part_id + "'");
    }
    violations = check_wrench_condition(cond, assembly, std::nullopt, WrenchRole::Main);
  } else {
    WrenchRole role = part.auto_fix ? WrenchRole::Main : WrenchRole::Fixing;
    const std::string& acting = role == WrenchRole::Main ? cond.wrench_id : cond.fix_wrench_id.value_or(cond.wrench_id);
    const ToolSpec* acting_spec = world.catalog->find_tool(acting);
    bool torque_applies = role == WrenchRole::Fixing && acting_spec && acting_spec->kind == ToolKind::TorqueWrench;
    violations = check_wrench_condition(cond, assembly, torque_applies ? torque : std::nullopt, role);
    if (torque_applies && !torque) {
      violations.push_back(Violation::TorqueMissing);
    }
  }
  if (!violations.empty()) {
    EngineError e = make_error(ErrorCode::WrenchConditionFailed, "");
    for (std::size_t i = 0; i < violations.size(); ++i) {
      if (i > 0) e.detail += ",";
      e.detail += to_string(violations[i]);
    }
    e.violations = std::move(violations);
    return e;
  }
  return std::nullopt;
}

std::optional<EngineError> detach_error(const WorldState& world, const PartSpec& part) {
  const auto& state = world.parts.at(part.part_id);
  Phase needed = part.tool_dependent ? Phase::Loosened : Phase::Installed;
  if (state.phase != needed) {
    return make_error(ErrorCode::WrongPhase, "part '" + part.part_id + "' is " + std::string(to_string(state.phase)) +
                                                 ", detach needs " + std::string(to_string(needed)));
  }
  auto blockers = unremoved_preconditions(world, part);
  if (!blockers.empty()) {
    return blocked(ErrorCode::PreconditionUnmet, std::move(blockers), "removing '" + part.part_id + "'");
  }
  return std::nullopt;
}

std::optional<EngineError> attach_error(const WorldState& world, const PartSpec& part) {
  const auto& state = world.parts.at(part.part_id);
  if (state.phase != Phase::Removed) {
    return make_error(ErrorCode::WrongPhase, "part '" + part.part_id + "' is " + std::string(to_string(state.phase)) +
                                                 ", attach needs REMOVED");
  }
  auto blockers = removed_dependents(world, part);
  if (!blockers.empty()) {
    return blocked(ErrorCode::ReversePreconditionUnmet, std::move(blockers), "installing '" + part.part_id + "'");
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::Installed: return "INSTALLED";
    case Phase::Loosened: return "LOOSENED";
    case Phase::Removed: return "REMOVED";
  }
  return "INSTALLED";
}

std::optional<Phase> parse_phase(std::string_view token) {
  for (auto p : {Phase::Installed, Phase::Loosened, Phase::Removed}) {
    if (to_string(p) == token) return p;
  }
  return std::nullopt;
}

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotFound: return "NOT_FOUND";
    case ErrorCode::IncompatibleKit: return "INCOMPATIBLE_KIT";
    case ErrorCode::SlotOccupied: return "SLOT_OCCUPIED";
    case ErrorCode::ToolUnavailable: return "TOOL_UNAVAILABLE";
    case ErrorCode::NotToolDependent: return "NOT_TOOL_DEPENDENT";
    case ErrorCode::PreconditionUnmet: return "PRECONDITION_UNMET";
    case ErrorCode::ReversePreconditionUnmet: return "REVERSE_PRECONDITION_UNMET";
    case ErrorCode::WrenchConditionFailed: return "WRENCH_CONDITION_FAILED";
    case ErrorCode::WrongPhase: return "WRONG_PHASE";
  }
  return "NOT_FOUND";
}

std::string_view to_string(Violation v) {
  switch (v) {
    case Violation::BaseMismatch: return "BASE_MISMATCH";
    case Violation::SocketMismatch: return "SOCKET_MISMATCH";
    case Violation::MissingExtension: return "MISSING_EXTENSION";
    case Violation::ExtensionMismatch: return "EXTENSION_MISMATCH";
    case Violation::UnexpectedExtension: return "UNEXPECTED_EXTENSION";
    case Violation::TorqueOutOfRange: return "TORQUE_OUT_OF_RANGE";
    case Violation::TorqueMissing: return "TORQUE_MISSING";
  }
  return "BASE_MISMATCH";
}

std::string_view to_string(ActionOp op) {
  switch (op) {
    case ActionOp::Combine: return "combine";
    case ActionOp::Split: return "split";
    case ActionOp::ApplyTool: return "apply_tool";
    case ActionOp::Detach: return "detach";
    case ActionOp::Attach: return "attach";
    case ActionOp::Submit: return "submit";
  }
  return "submit";
}

std::optional<ActionOp> parse_action_op(std::string_view token) {
  for (auto op : {ActionOp::Combine, ActionOp::Split, ActionOp::ApplyTool, ActionOp::Detach, ActionOp::Attach,
                  ActionOp::Submit}) {
    if (to_string(op) == token) return op;
  }
  return std::nullopt;
}

bool is_held(const WorldState& world, const CombinedTool& tool) {
  if (!tool.extension && !tool.socket) {
    const ToolSpec* spec = world.catalog->find_tool(tool.base);
    return spec && config::is_wrench(spec->kind) && world.toolbox.contains(tool.base);
  }
  return std::find(world.assemblies.begin(), world.assemblies.end(), tool) != world.assemblies.end();
}

std::vector<std::string> CombinedTool::tool_ids() const {
  std::vector<std::string> ids{base};
  if (extension) ids.push_back(*extension);
  if (socket) ids.push_back(*socket);
  return ids;
}

WorldState initial_world(std::shared_ptr<const config::Catalog> catalog) {
  WorldState w;
  for (const auto& p : catalog->parts()) w.parts.emplace(p.part_id, PartState{});
  for (const auto& t : catalog->tools()) w.toolbox.insert(t.tool_id);
  w.catalog = std::move(catalog);
  return w;
}

std::vector<Violation> check_wrench_condition(const config::WrenchUseCondition& cond, const CombinedTool& assembly,
                                              std::optional<int> torque, WrenchRole role) {
  std::vector<Violation> out;
  const std::string& expected_base =
      role == WrenchRole::Fixing ? cond.fix_wrench_id.value_or(cond.wrench_id) : cond.wrench_id;
  if (assembly.base != expected_base) out.push_back(Violation::BaseMismatch);
  if (cond.socket_id && assembly.socket != cond.socket_id) out.push_back(Violation::SocketMismatch);
  if (cond.need_extension) {
    if (!assembly.extension) out.push_back(Violation::MissingExtension);
    else if (cond.extension_id && assembly.extension != cond.extension_id) out.push_back(Violation::ExtensionMismatch);
  } else if (assembly.extension) {
    out.push_back(Violation::UnexpectedExtension);
  }
  if (torque && (*torque < cond.min_torque || *torque > cond.max_torque)) {
    out.push_back(Violation::TorqueOutOfRange);
  }
  return out;
}

Result<Combined> combine(const WorldState& world, std::string_view base, std::string_view attachment) {
  const ToolSpec* base_spec = world.catalog->find_tool(base);
  const ToolSpec* att_spec = world.catalog->find_tool(attachment);
  if (!base_spec) return make_error(ErrorCode::NotFound, "unknown tool '" + std::string(base) + "'");
  if (!att_spec) return make_error(ErrorCode::NotFound, "unknown tool '" + std::string(attachment) + "'");
  if (!config::is_wrench(base_spec->kind)) {
    return make_error(ErrorCode::IncompatibleKit, "'" + base_spec->tool_id + "' is not a wrench");
  }
  if (att_spec->kind != ToolKind::Extension && att_spec->kind != ToolKind::Socket) {
    return make_error(ErrorCode::IncompatibleKit, "'" + att_spec->tool_id + "' is not an extension or socket");
  }
  const CombinedTool* existing = assembly_with_base(world, base);
  if (!existing && !world.toolbox.contains(base_spec->tool_id)) {
    return make_error(ErrorCode::ToolUnavailable, "'" + base_spec->tool_id + "' is not available");
  }
  if (!world.toolbox.contains(att_spec->tool_id)) {
    return make_error(ErrorCode::ToolUnavailable, "'" + att_spec->tool_id + "' is not in the toolbox");
  }
  if (!contains(base_spec->kit, att_spec->tool_id)) {
    return make_error(ErrorCode::IncompatibleKit,
                      "'" + att_spec->tool_id + "' is not in the kit of '" + base_spec->tool_id + "'");
  }

  CombinedTool tool = existing ? *existing : CombinedTool{base_spec->tool_id, std::nullopt, std::nullopt};
  auto& slot = att_spec->kind == ToolKind::Extension ? tool.extension : tool.socket;
  if (slot) {
    return make_error(ErrorCode::SlotOccupied, "'" + base_spec->tool_id + "' already holds '" + *slot + "'");
  }
  slot = att_spec->tool_id;

  Combined out{world, tool};
  out.world.toolbox.erase(att_spec->tool_id);
  if (existing) {
    auto it = std::find(out.world.assemblies.begin(), out.world.assemblies.end(), *existing);
    *it = tool;
  } else {
    out.world.toolbox.erase(base_spec->tool_id);
    out.world.assemblies.push_back(tool);
  }
  return out;
}

Result<WorldState> split(const WorldState& world, const CombinedTool& assembly) {
  auto it = std::find(world.assemblies.begin(), world.assemblies.end(), assembly);
  if (it == world.assemblies.end()) {
    return make_error(ErrorCode::NotFound,
                      "no assembly " + csv::join_list(assembly.tool_ids(), '+') + " to split");
  }
  WorldState out = world;
  out.assemblies.erase(out.assemblies.begin() + (it - world.assemblies.begin()));
  for (const auto& id : assembly.tool_ids()) out.toolbox.insert(id);
  return out;
}

Result<Transition> apply_tool(const WorldState& world, const CombinedTool& assembly, std::string_view part,
                              std::optional<int> torque) {
  const PartSpec* spec = nullptr;
  if (auto err = lookup_part(world, part, spec)) return *err;
  if (auto err = apply_error(world, assembly, *spec, torque)) return *err;
  if (world.parts.at(spec->part_id).phase == Phase::Installed) {
    return transition(world, *spec, Phase::Loosened, spec->screw_target_cm());
  }
  return transition(world, *spec, Phase::Installed, 0.0);
}

Result<Transition> detach_part(const WorldState& world, std::string_view part) {
  const PartSpec* spec = nullptr;
  if (auto err = lookup_part(world, part, spec)) return *err;
  if (auto err = detach_error(world, *spec)) return *err;
  return transition(world, *spec, Phase::Removed, spec->screw_target_cm());
}

Result<Transition> attach_part(const WorldState& world, std::string_view part) {
  const PartSpec* spec = nullptr;
  if (auto err = lookup_part(world, part, spec)) return *err;
  if (auto err = attach_error(world, *spec)) return *err;
  if (spec->tool_dependent) {
    return transition(world, *spec, Phase::Loosened, spec->screw_target_cm());
  }
  return transition(world, *spec, Phase::Installed, 0.0);
}

std::optional<ToolRequirement> required_tool(const WorldState& world, std::string_view part) {
  const PartSpec* spec = world.catalog->find_part(part);
  if (!spec || !spec->wrench_condition) return std::nullopt;
  auto it = world.parts.find(spec->part_id);
  if (it == world.parts.end() || it->second.phase == Phase::Removed) return std::nullopt;

  const auto& cond = *spec->wrench_condition;
  ToolRequirement req;
  req.role = it->second.phase == Phase::Loosened && !spec->auto_fix ? WrenchRole::Fixing : WrenchRole::Main;
  req.assembly.base = req.role == WrenchRole::Fixing ? cond.fix_wrench_id.value_or(cond.wrench_id) : cond.wrench_id;
  if (cond.need_extension) req.assembly.extension = cond.extension_id;
  req.assembly.socket = cond.socket_id;
  const ToolSpec* base = world.catalog->find_tool(req.assembly.base);
  if (req.role == WrenchRole::Fixing && base && base->kind == ToolKind::TorqueWrench) {
    req.torque_range = std::make_pair(cond.min_torque, cond.max_torque);
    req.torque = cond.min_torque + (cond.max_torque - cond.min_torque) / 2;
  }
  return req;
}

Result<CombinedTool> resolve_tool(const WorldState& world, const std::vector<std::string>& ids) {
  if (ids.empty()) return make_error(ErrorCode::NotFound, "empty tool list");
  CombinedTool tool;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const ToolSpec* spec = world.catalog->find_tool(ids[i]);
    if (!spec) return make_error(ErrorCode::NotFound, "unknown tool '" + ids[i] + "'");
    if (i == 0) {
      tool.base = spec->tool_id;
      continue;
    }
    std::optional<std::string>* slot = nullptr;
    if (spec->kind == ToolKind::Extension) slot = &tool.extension;
    else if (spec->kind == ToolKind::Socket) slot = &tool.socket;
    else return make_error(ErrorCode::IncompatibleKit, "'" + spec->tool_id + "' is not an attachment");
    if (*slot) return make_error(ErrorCode::SlotOccupied, "two attachments of the same kind in tool list");
    *slot = spec->tool_id;
  }
  return tool;
}

Result<Transition> perform(const WorldState& world, const Action& action) {
  auto missing = [](const char* field) { return make_error(ErrorCode::NotFound, std::string("missing '") + field + "'"); };
  switch (action.op) {
    case ActionOp::Combine: {
      if (!action.base) return missing("base");
      if (!action.attachment) return missing("attachment");
      auto r = combine(world, *action.base, *action.attachment);
      if (!r) return r.error();
      return Transition{std::move(r).value().world, {}};
    }
    case ActionOp::Split: {
      auto tool = resolve_tool(world, action.tool);
      if (!tool) return tool.error();
      auto r = split(world, tool.value());
      if (!r) return r.error();
      return Transition{std::move(r).value(), {}};
    }
    case ActionOp::ApplyTool: {
      if (!action.part) return missing("part");
      auto tool = resolve_tool(world, action.tool);
      if (!tool) return tool.error();
      return apply_tool(world, tool.value(), *action.part, action.torque);
    }
    case ActionOp::Detach:
      if (!action.part) return missing("part");
      return detach_part(world, *action.part);
    case ActionOp::Attach:
      if (!action.part) return missing("part");
      return attach_part(world, *action.part);
    case ActionOp::Submit:
      break;
  }
  throw std::invalid_argument("perform: submit is handled by the task engine");
}

std::vector<Action> available_actions(const WorldState& world) {
  const auto& catalog = *world.catalog;
  std::vector<Action> out;

  std::vector<CombinedTool> held = world.assemblies;
  for (const auto& t : catalog.tools()) {
    if (!config::is_wrench(t.kind)) continue;
    const CombinedTool* existing = assembly_with_base(world, t.tool_id);
    bool bare = world.toolbox.contains(t.tool_id);
    if (bare) held.push_back(CombinedTool{t.tool_id, std::nullopt, std::nullopt});
    if (!bare && !existing) continue;
    for (const auto& id : t.kit) {
      const ToolSpec* att = catalog.find_tool(id);
      if (!att || !world.toolbox.contains(id)) continue;
      if (att->kind == ToolKind::Extension && !(existing && existing->extension)) {
        out.push_back(Action{ActionOp::Combine, t.tool_id, id, {}, {}, {}});
      } else if (att->kind == ToolKind::Socket && !(existing && existing->socket)) {
        out.push_back(Action{ActionOp::Combine, t.tool_id, id, {}, {}, {}});
      }
    }
  }
  for (const auto& a : world.assemblies) {
    out.push_back(Action{ActionOp::Split, {}, {}, a.tool_ids(), {}, {}});
  }

  for (const auto& p : catalog.parts()) {
    if (!world.parts.contains(p.part_id)) continue;
    if (p.tool_dependent) {
      auto req = required_tool(world, p.part_id);
      std::optional<int> torque = req ? req->torque : std::nullopt;
      for (const auto& tool : held) {
        if (!apply_error(world, tool, p, torque)) {
          out.push_back(Action{ActionOp::ApplyTool, {}, {}, tool.tool_ids(), p.part_id, torque});
        }
      }
    }
    if (!detach_error(world, p)) out.push_back(Action{ActionOp::Detach, {}, {}, {}, p.part_id, {}});
    if (!attach_error(world, p)) out.push_back(Action{ActionOp::Attach, {}, {}, {}, p.part_id, {}});
  }

  std::sort(out.begin(), out.end());
  return out;
}

void publish_events(bus::MessageBus& bus, const std::vector<StateChangeEvent>& events) {
  for (const auto& ev : events) {
    bus.publish(kStateChangedTopic, json_io::to_json(ev));
  }
}

}  // namespace workbench::engine
