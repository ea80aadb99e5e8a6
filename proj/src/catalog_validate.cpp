#include <algorithm>
#include <functional>
#include <set>

#include "workbench/catalog.hpp"

namespace workbench::config {

namespace {

using PartLookup = std::function<const PartSpec*(std::string_view)>;

std::map<std::string, bool> starting_removed_impl(const std::vector<PartSpec>& parts, const PartLookup& find,
                                                  const TaskPlan& plan) {
  std::map<std::string, bool> removed;
  for (const auto& p : parts) removed[p.part_id] = false;

  std::set<std::string> touched;
  std::vector<std::string> frontier;
  for (const Step* step : plan.flat_steps()) {
    if (!touched.insert(step->part_id).second) continue;
    if (step->action == StepAction::Install && removed.contains(step->part_id)) {
      removed[step->part_id] = true;
      frontier.push_back(step->part_id);
    }
  }
  while (!frontier.empty()) {
    auto id = std::move(frontier.back());
    frontier.pop_back();
    const PartSpec* part = find(id);
    if (!part) continue;
    for (const auto& pre : part->preconditions) {
      auto it = removed.find(pre);
      if (it != removed.end() && !it->second) {
        it->second = true;
        frontier.push_back(pre);
      }
    }
  }
  return removed;
}

class Validator {
 public:
  Validator(const std::vector<ToolSpec>& tools, const std::vector<PartSpec>& parts,
            const std::vector<TaskPlan>& plans)
      : tools_(tools), parts_(parts), plans_(plans) {
    for (const auto& t : tools_) tool_.emplace(t.tool_id, &t);
    for (const auto& p : parts_) part_.emplace(p.part_id, &p);
  }

  ValidationReport run() {
    check_duplicates();
    check_tools();
    check_parts();
    check_cycles();
    check_plans();
    return std::move(report_);
  }

 private:
  void error(std::string code, csv::Location where, std::string detail) {
    report_.errors.push_back(Issue{std::move(code), std::move(where), std::move(detail)});
  }
  void warning(std::string code, csv::Location where, std::string detail) {
    report_.warnings.push_back(Issue{std::move(code), std::move(where), std::move(detail)});
  }

  const ToolSpec* tool(std::string_view id) const {
    auto it = tool_.find(std::string(id));
    return it == tool_.end() ? nullptr : it->second;
  }
  const PartSpec* part(std::string_view id) const {
    auto it = part_.find(std::string(id));
    return it == part_.end() ? nullptr : it->second;
  }

  void check_duplicates() {
    std::set<std::string> seen;
    for (const auto& t : tools_) {
      if (!seen.insert(t.tool_id).second) {
        error("DUPLICATE_TOOL_ID", {"tools.csv", t.source_row, "tool_id"}, t.tool_id);
      }
    }
    seen.clear();
    for (const auto& p : parts_) {
      if (!seen.insert(p.part_id).second) {
        error("DUPLICATE_PART_ID", {"parts.csv", p.source_row, "part_id"}, p.part_id);
      }
    }
    seen.clear();
    for (const auto& plan : plans_) {
      if (!seen.insert(plan.task_id).second) {
        error("DUPLICATE_TASK_ID", {"tasks.csv", 0, "task_id"}, plan.task_id);
      }
    }
  }

  void check_tools() {
    for (const auto& t : tools_) {
      csv::Location at{"tools.csv", t.source_row, "kit"};
      if (!t.kit.empty() && !is_wrench(t.kind)) {
        error("KIT_ON_NON_WRENCH", at,
              "tool '" + t.tool_id + "' of kind " + std::string(to_string(t.kind)) + " cannot have a kit");
      }
      for (const auto& id : t.kit) {
        const ToolSpec* item = tool(id);
        if (!item) {
          error("UNKNOWN_KIT_TOOL", at, "kit of '" + t.tool_id + "' references unknown tool '" + id + "'");
        } else if (item->kind != ToolKind::Extension && item->kind != ToolKind::Socket) {
          warning("KIT_ITEM_NOT_ATTACHMENT", at,
                  "kit of '" + t.tool_id + "' lists '" + id + "', which is neither an extension nor a socket");
        }
      }
    }
  }

  void check_condition_tool(const PartSpec& p, const std::optional<std::string>& id, std::string_view column,
                            std::initializer_list<ToolKind> kinds) {
    if (!id) return;
    csv::Location at{"parts.csv", p.source_row, std::string(column)};
    const ToolSpec* t = tool(*id);
    if (!t) {
      error("UNKNOWN_CONDITION_TOOL", at, "part '" + p.part_id + "' references unknown tool '" + *id + "'");
      return;
    }
    if (std::find(kinds.begin(), kinds.end(), t->kind) == kinds.end()) {
      error("CONDITION_TOOL_KIND", at,
            "tool '" + *id + "' has kind " + std::string(to_string(t->kind)) + ", not usable as " +
                std::string(column));
    }
  }

  void check_condition_kit(const PartSpec& p, const std::string& wrench_id, std::string_view role) {
    const auto& c = *p.wrench_condition;
    const ToolSpec* w = tool(wrench_id);
    if (!w) return;
    auto in_kit = [&](const std::string& id) {
      return std::find(w->kit.begin(), w->kit.end(), id) != w->kit.end();
    };
    csv::Location at{"parts.csv", p.source_row, std::string(role)};
    if (c.socket_id && !in_kit(*c.socket_id)) {
      error("CONDITION_NOT_IN_KIT", at,
            "socket '" + *c.socket_id + "' is not in the kit of " + std::string(role) + " '" + wrench_id + "'");
    }
    if (c.need_extension && c.extension_id && !in_kit(*c.extension_id)) {
      error("CONDITION_NOT_IN_KIT", at,
            "extension '" + *c.extension_id + "' is not in the kit of " + std::string(role) + " '" + wrench_id +
                "'");
    }
  }

  void check_parts() {
    for (const auto& p : parts_) {
      for (const auto& pre : p.preconditions) {
        if (!part(pre)) {
          error("UNKNOWN_PRECONDITION_PART", {"parts.csv", p.source_row, "preconditions"},
                "part '" + p.part_id + "' requires unknown part '" + pre + "'");
        }
      }
      if (p.tool_dependent != p.wrench_condition.has_value()) {
        error("TOOL_CONDITION_MISMATCH", {"parts.csv", p.source_row, "tool_dependent"},
              "tool_dependent must hold exactly when a wrench condition is present");
      }
      if (!p.wrench_condition) continue;
      const auto& c = *p.wrench_condition;
      if (c.min_torque > c.max_torque) {
        error("TORQUE_RANGE_INVERTED", {"parts.csv", p.source_row, "min_torque"}, p.part_id);
      }
      check_condition_tool(p, c.wrench_id, "wrench_id", {ToolKind::Wrench, ToolKind::TorqueWrench});
      check_condition_tool(p, c.fix_wrench_id, "fix_wrench_id", {ToolKind::Wrench, ToolKind::TorqueWrench});
      check_condition_tool(p, c.extension_id, "extension_id", {ToolKind::Extension});
      check_condition_tool(p, c.socket_id, "socket_id", {ToolKind::Socket});
      check_condition_kit(p, c.wrench_id, "wrench_id");
      if (c.fix_wrench_id && !p.auto_fix) {
        check_condition_kit(p, *c.fix_wrench_id, "fix_wrench_id");
      }
    }
  }

  // Tarjan's strongly connected components over precondition edges.
  void check_cycles() {
    std::map<std::string, int> index, low;
    std::set<std::string> on_stack;
    std::vector<std::string> stack;
    int counter = 0;

    std::function<void(const std::string&)> visit = [&](const std::string& v) {
      index[v] = low[v] = counter++;
      stack.push_back(v);
      on_stack.insert(v);
      for (const auto& w : part(v)->preconditions) {
        if (!part(w)) continue;
        if (!index.contains(w)) {
          visit(w);
          low[v] = std::min(low[v], low[w]);
        } else if (on_stack.contains(w)) {
          low[v] = std::min(low[v], index[w]);
        }
      }
      if (low[v] == index[v]) {
        std::vector<std::string> component;
        while (true) {
          auto w = stack.back();
          stack.pop_back();
          on_stack.erase(w);
          component.push_back(w);
          if (w == v) break;
        }
        const PartSpec* only = part(v);
        bool self_loop = component.size() == 1 &&
                         std::find(only->preconditions.begin(), only->preconditions.end(), v) !=
                             only->preconditions.end();
        if (component.size() > 1 || self_loop) {
          std::sort(component.begin(), component.end());
          cyclic_.insert(component.begin(), component.end());
          error("PRECONDITION_CYCLE", {"parts.csv", part(component.front())->source_row, "preconditions"},
                "{" + csv::join_list(component, ',') + "}");
        }
      }
    };

    for (const auto& p : parts_) {
      if (!index.contains(p.part_id)) visit(p.part_id);
    }
  }

  void check_plans() {
    std::set<std::string> used;
    std::map<std::string, std::vector<std::string>> dependents;
    for (const auto& p : parts_) {
      for (const auto& pre : p.preconditions) dependents[pre].push_back(p.part_id);
    }

    for (const auto& plan : plans_) {
      if (plan.step_count() == 0) {
        error("EMPTY_PLAN", {"tasks.csv", 0, "task_id"}, plan.task_id);
        continue;
      }
      std::set<std::pair<std::string, StepAction>> pairs;
      bool dangling = false;
      for (const Step* step : plan.flat_steps()) {
        csv::Location at{"tasks.csv", step->source_row, "part_id"};
        if (!part(step->part_id)) {
          error("UNKNOWN_STEP_PART", at,
                "task '" + plan.task_id + "' references unknown part '" + step->part_id + "'");
          dangling = true;
          continue;
        }
        used.insert(step->part_id);
        if (!pairs.emplace(step->part_id, step->action).second) {
          error("DUPLICATE_PLAN_STEP", at,
                "task '" + plan.task_id + "' repeats " + std::string(to_string(step->action)) + " of '" +
                    step->part_id + "'");
        }
      }
      if (dangling) continue;

      auto removed = starting_removed_impl(parts_, [this](std::string_view id) { return part(id); }, plan);
      for (const Step* step : plan.flat_steps()) {
        csv::Location at{"tasks.csv", step->source_row, "action"};
        const PartSpec* p = part(step->part_id);
        std::vector<std::string> blockers;
        if (step->action == StepAction::Remove) {
          if (removed[p->part_id]) {
            error("PLAN_ORDER_CONFLICT", at, "'" + p->part_id + "' is already removed at this step");
            continue;
          }
          for (const auto& pre : p->preconditions) {
            if (removed.contains(pre) && !removed[pre]) blockers.push_back(pre);
          }
          if (!blockers.empty()) {
            error("PLAN_ORDER_CONFLICT", at,
                  "task '" + plan.task_id + "' removes '" + p->part_id + "' before " + csv::join_list(blockers, ','));
          }
          removed[p->part_id] = true;
        } else {
          if (!removed[p->part_id]) {
            error("PLAN_ORDER_CONFLICT", at, "'" + p->part_id + "' is not removed at this step");
            continue;
          }
          for (const auto& dep : dependents[p->part_id]) {
            if (removed[dep]) blockers.push_back(dep);
          }
          if (!blockers.empty()) {
            error("PLAN_ORDER_CONFLICT", at,
                  "task '" + plan.task_id + "' installs '" + p->part_id + "' before " +
                      csv::join_list(blockers, ','));
          }
          removed[p->part_id] = false;
        }
      }
    }

    for (const auto& p : parts_) {
      if (!used.contains(p.part_id)) {
        warning("PART_NOT_IN_PLAN", {"parts.csv", p.source_row, "part_id"},
                "part '" + p.part_id + "' is not used by any task");
      }
    }
  }

  const std::vector<ToolSpec>& tools_;
  const std::vector<PartSpec>& parts_;
  const std::vector<TaskPlan>& plans_;
  std::map<std::string, const ToolSpec*> tool_;
  std::map<std::string, const PartSpec*> part_;
  std::set<std::string> cyclic_;
  ValidationReport report_;
};

}  // namespace

bool ValidationReport::has_error(std::string_view code) const {
  return std::any_of(errors.begin(), errors.end(), [&](const Issue& i) { return i.code == code; });
}

ValidationReport validate_catalog(const std::vector<ToolSpec>& tools, const std::vector<PartSpec>& parts,
                                  const std::vector<TaskPlan>& plans) {
  return Validator(tools, parts, plans).run();
}

Catalog::Catalog(std::vector<ToolSpec> tools, std::vector<PartSpec> parts, std::vector<TaskPlan> plans)
    : tools_(std::move(tools)), parts_(std::move(parts)), plans_(std::move(plans)) {
  for (std::size_t i = 0; i < tools_.size(); ++i) tool_index_.emplace(tools_[i].tool_id, i);
  for (std::size_t i = 0; i < parts_.size(); ++i) part_index_.emplace(parts_[i].part_id, i);
  for (std::size_t i = 0; i < plans_.size(); ++i) plan_index_.emplace(plans_[i].task_id, i);
  for (const auto& p : parts_) {
    dependents_.try_emplace(p.part_id);
    for (const auto& pre : p.preconditions) dependents_[pre].push_back(p.part_id);
  }
}

const ToolSpec* Catalog::find_tool(std::string_view id) const {
  auto it = tool_index_.find(std::string(id));
  return it == tool_index_.end() ? nullptr : &tools_[it->second];
}

const PartSpec* Catalog::find_part(std::string_view id) const {
  auto it = part_index_.find(std::string(id));
  return it == part_index_.end() ? nullptr : &parts_[it->second];
}

const TaskPlan* Catalog::find_plan(std::string_view id) const {
  auto it = plan_index_.find(std::string(id));
  return it == plan_index_.end() ? nullptr : &plans_[it->second];
}

const std::vector<std::string>& Catalog::dependents(std::string_view part_id) const {
  static const std::vector<std::string> kNone;
  auto it = dependents_.find(std::string(part_id));
  return it == dependents_.end() ? kNone : it->second;
}

std::map<std::string, bool> starting_removed(const Catalog& catalog, const TaskPlan& plan) {
  return starting_removed_impl(catalog.parts(), [&](std::string_view id) { return catalog.find_part(id); },
                               plan);
}

}  // namespace workbench::config
