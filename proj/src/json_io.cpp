#include "workbench/json_io.hpp"

#include <cmath>
#include <limits>
#include <set>

namespace workbench::json_io {

namespace {

std::vector<std::string> violation_names(const std::vector<engine::Violation>& vs) {
  std::vector<std::string> out;
  for (auto v : vs) out.emplace_back(engine::to_string(v));
  return out;
}

std::string require_id(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ActionFormatError(key, "required");
  if (!it->is_string()) throw ActionFormatError(key, "must be a string");
  auto s = it->get<std::string>();
  if (!config::is_valid_id(s)) throw ActionFormatError(key, "invalid id '" + s + "'");
  return s;
}

}  // namespace

json to_json(const engine::StateChangeEvent& ev) {
  json j{{"part_id", ev.part_id},
         {"from_phase", engine::to_string(ev.from_phase)},
         {"to_phase", engine::to_string(ev.to_phase)},
         {"screw_progress_cm", ev.screw_progress_cm}};
  if (ev.disappear) {
    j["disappear"] = {{"dir", ev.disappear->dir},
                      {"dist_cm", ev.disappear->dist_cm},
                      {"duration_s", ev.disappear->duration_s}};
  } else {
    j["disappear"] = nullptr;
  }
  return j;
}

engine::StateChangeEvent event_from_json(const json& j) {
  engine::StateChangeEvent ev;
  ev.part_id = j.at("part_id").get<std::string>();
  ev.from_phase = engine::parse_phase(j.at("from_phase").get<std::string>()).value();
  ev.to_phase = engine::parse_phase(j.at("to_phase").get<std::string>()).value();
  ev.screw_progress_cm = j.at("screw_progress_cm").get<double>();
  if (j.contains("disappear") && !j.at("disappear").is_null()) {
    const auto& d = j.at("disappear");
    ev.disappear = engine::DisappearEffect{d.at("dir").get<config::Vec3>(), d.at("dist_cm").get<double>(),
                                           d.at("duration_s").get<double>()};
  }
  return ev;
}

json to_json(const engine::EngineError& err) {
  json j{{"code", engine::to_string(err.code)}, {"detail", err.detail}};
  if (!err.blocking_parts.empty()) j["blocking_parts"] = err.blocking_parts;
  if (!err.violations.empty()) j["violations"] = violation_names(err.violations);
  return j;
}

json to_json(const engine::CombinedTool& tool) {
  return json{{"base", tool.base},
              {"extension", tool.extension ? json(*tool.extension) : json(nullptr)},
              {"socket", tool.socket ? json(*tool.socket) : json(nullptr)},
              {"tool", tool.tool_ids()}};
}

json to_json(const engine::WorldState& world) {
  json parts = json::object();
  for (const auto& [id, st] : world.parts) {
    parts[id] = {{"phase", engine::to_string(st.phase)}, {"screw_progress_cm", st.screw_progress_cm}};
  }
  json assemblies = json::array();
  for (const auto& a : world.assemblies) assemblies.push_back(to_json(a));
  return json{{"parts", parts}, {"toolbox", world.toolbox}, {"assemblies", assemblies}};
}

json to_json(const engine::Action& a) {
  json j{{"op", engine::to_string(a.op)}};
  if (a.base) j["base"] = *a.base;
  if (a.attachment) j["attachment"] = *a.attachment;
  if (!a.tool.empty()) j["tool"] = a.tool;
  if (a.part) j["part"] = *a.part;
  if (a.torque) j["torque"] = *a.torque;
  return j;
}

engine::Action action_from_json(const json& j) {
  static const std::set<std::string> kKnown{"op", "base", "attachment", "tool", "part", "torque", "t_ms"};
  if (!j.is_object()) throw ActionFormatError("", "action must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!kKnown.contains(key)) throw ActionFormatError(key, "unknown field");
  }
  auto op_it = j.find("op");
  if (op_it == j.end()) throw ActionFormatError("op", "required");
  if (!op_it->is_string()) throw ActionFormatError("op", "must be a string");
  auto op = engine::parse_action_op(op_it->get<std::string>());
  if (!op) throw ActionFormatError("op", "unknown op '" + op_it->get<std::string>() + "'");

  engine::Action a;
  a.op = *op;
  switch (a.op) {
    case engine::ActionOp::Combine:
      a.base = require_id(j, "base");
      a.attachment = require_id(j, "attachment");
      break;
    case engine::ActionOp::Split:
    case engine::ActionOp::ApplyTool: {
      auto it = j.find("tool");
      if (it == j.end()) throw ActionFormatError("tool", "required");
      if (!it->is_array() || it->empty()) throw ActionFormatError("tool", "must be a non-empty array of tool ids");
      for (const auto& id : *it) {
        if (!id.is_string() || !config::is_valid_id(id.get<std::string>())) {
          throw ActionFormatError("tool", "must contain tool id strings");
        }
        a.tool.push_back(id.get<std::string>());
      }
      if (a.op == engine::ActionOp::ApplyTool) a.part = require_id(j, "part");
      break;
    }
    case engine::ActionOp::Detach:
    case engine::ActionOp::Attach:
      a.part = require_id(j, "part");
      break;
    case engine::ActionOp::Submit:
      break;
  }
  if (auto it = j.find("torque"); it != j.end() && !it->is_null()) {
    if (!it->is_number()) throw ActionFormatError("torque", "must be a number");
    double v = it->get<double>();
    if (!std::isfinite(v) || v != std::floor(v) || std::abs(v) > std::numeric_limits<int>::max()) {
      throw ActionFormatError("torque", "must be an integer N·m value");
    }
    a.torque = static_cast<int>(v);
  }
  if (auto it = j.find("t_ms"); it != j.end()) {
    if (!it->is_number_integer() || it->get<std::int64_t>() < 0) {
      throw ActionFormatError("t_ms", "must be a non-negative integer");
    }
  }
  return a;
}

json to_json(const task::ProgressReport& r) {
  json groups = json::array();
  for (const auto& g : r.per_group) {
    groups.push_back({{"group_name", g.group_name}, {"done", g.done}, {"total", g.total}});
  }
  return json{{"steps_total", r.steps_total},
              {"steps_done", r.steps_done},
              {"percent", r.percent},
              {"per_group", groups},
              {"current_score", r.current_score ? json(*r.current_score) : json("hidden")}};
}

json to_json(const task::ScoreCard& c) {
  return json{{"final_score", c.final_score},
              {"steps_done", c.steps_done},
              {"errors", c.errors},
              {"duration_s", c.duration_s}};
}

task::ScoreCard scorecard_from_json(const json& j) {
  task::ScoreCard c;
  c.final_score = j.at("final_score").get<int>();
  c.steps_done = j.at("steps_done").get<std::size_t>();
  c.errors = j.at("errors").get<std::map<std::string, int>>();
  c.duration_s = j.at("duration_s").get<double>();
  return c;
}

json to_json(const task::Outcome& o) {
  json events = json::array();
  for (const auto& ev : o.events) events.push_back(to_json(ev));
  return json{{"kind", task::to_string(o.kind)},
              {"reason", o.reason ? to_json(*o.reason) : json(nullptr)},
              {"step", o.step ? json(*o.step) : json(nullptr)},
              {"sequence_error", o.sequence_error},
              {"events", events}};
}

json to_json(const task::Hint& h) {
  json j{{"step_index", h.step_index},
         {"step_name", h.step_name},
         {"part_id", h.part_id},
         {"action", config::to_string(h.action)},
         {"next_op", engine::to_string(h.next_op)},
         {"required_assembly", h.required_assembly ? to_json(*h.required_assembly) : json(nullptr)},
         {"torque", h.torque ? json(*h.torque) : json(nullptr)}};
  j["torque_range"] = h.torque_range ? json{h.torque_range->first, h.torque_range->second} : json(nullptr);
  return j;
}

json to_json(const task::ErrorEntry& e) {
  return json{{"timestamp_ms", e.timestamp_ms}, {"kind", e.kind}, {"detail", e.detail}};
}

json to_json(const config::ValidationReport& report) {
  auto issues = [](const std::vector<config::Issue>& list) {
    json arr = json::array();
    for (const auto& i : list) {
      arr.push_back({{"code", i.code},
                     {"location", {{"file", i.location.file}, {"row", i.location.row}, {"column", i.location.column}}},
                     {"detail", i.detail}});
    }
    return arr;
  };
  return json{{"errors", issues(report.errors)}, {"warnings", issues(report.warnings)}};
}

json to_json(const config::ToolSpec& t) {
  return json{{"tool_id", t.tool_id}, {"name", t.name}, {"kind", config::to_string(t.kind)}, {"kit", t.kit}};
}

json to_json(const config::PartSpec& p) {
  json j{{"part_id", p.part_id},
         {"name", p.name},
         {"tool_dependent", p.tool_dependent},
         {"preconditions", p.preconditions},
         {"screw_out_level", config::to_string(p.screw_out_level)},
         {"custom_out_cm", p.custom_out_cm ? json(*p.custom_out_cm) : json(nullptr)},
         {"auto_fix", p.auto_fix},
         {"disappear_dir", p.disappear_dir},
         {"disappear_dist_cm", p.disappear_dist_cm},
         {"disappear_duration_s", p.disappear_duration_s}};
  if (p.wrench_condition) {
    const auto& c = *p.wrench_condition;
    auto opt = [](const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); };
    j["wrench_condition"] = {{"wrench_id", c.wrench_id},         {"fix_wrench_id", opt(c.fix_wrench_id)},
                             {"extension_id", opt(c.extension_id)}, {"socket_id", opt(c.socket_id)},
                             {"need_extension", c.need_extension}, {"min_torque", c.min_torque},
                             {"max_torque", c.max_torque}};
  } else {
    j["wrench_condition"] = nullptr;
  }
  return j;
}

json to_json(const config::TaskPlan& plan) {
  json groups = json::array();
  for (const auto& g : plan.groups) {
    json steps = json::array();
    for (const auto& s : g.steps) {
      steps.push_back({{"step_name", s.step_name}, {"part_id", s.part_id}, {"action", config::to_string(s.action)}});
    }
    groups.push_back({{"group_name", g.group_name}, {"steps", steps}});
  }
  return json{{"task_id", plan.task_id}, {"task_name", plan.task_name}, {"groups", groups}};
}

}  // namespace workbench::json_io
