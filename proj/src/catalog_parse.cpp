#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "workbench/catalog.hpp"

namespace workbench::config {

namespace {

using csv::Location;
using csv::ParseError;
using csv::Record;

struct RowReader {
  const Record& rec;
  const std::vector<std::string>& header;
  const std::string& file;

  std::size_t col(std::string_view name) const {
    auto it = std::find(header.begin(), header.end(), name);
    return static_cast<std::size_t>(it - header.begin());
  }
  const std::string& cell(std::string_view name) const { return rec.cells[col(name)]; }

  [[noreturn]] void fail(std::string_view column, const std::string& detail) const {
    throw ParseError(Location{file, rec.row, std::string(column)}, detail);
  }

  std::string id(std::string_view name) const {
    const auto& v = cell(name);
    if (!is_valid_id(v)) {
      fail(name, "invalid id '" + v + "' (expected [A-Za-z0-9_-]+)");
    }
    return v;
  }

  std::optional<std::string> optional_id(std::string_view name) const {
    if (cell(name).empty()) return std::nullopt;
    return id(name);
  }

  std::vector<std::string> id_list(std::string_view name) const {
    auto items = csv::split_list(cell(name));
    for (const auto& item : items) {
      if (!is_valid_id(item)) {
        fail(name, "invalid id '" + item + "' in list");
      }
    }
    return items;
  }

  bool flag(std::string_view name) const {
    const auto& v = cell(name);
    if (v == "0") return false;
    if (v == "1") return true;
    fail(name, "expected 0 or 1, found '" + v + "'");
  }

  int integer(std::string_view name) const {
    const auto& v = cell(name);
    int out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
      fail(name, "expected an integer, found '" + v + "'");
    }
    return out;
  }

  double decimal(std::string_view name, std::string_view text) const {
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(out)) {
      fail(name, "expected a decimal number, found '" + std::string(text) + "'");
    }
    return out;
  }
  double decimal(std::string_view name) const { return decimal(name, cell(name)); }

  std::size_t index(std::string_view name) const {
    int v = integer(name);
    if (v < 1) fail(name, "index must be >= 1");
    return static_cast<std::size_t>(v);
  }
};

std::string format_decimal(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

std::string_view to_string(ToolKind kind) {
  switch (kind) {
    case ToolKind::Wrench: return "WRENCH";
    case ToolKind::TorqueWrench: return "TORQUE_WRENCH";
    case ToolKind::Extension: return "EXTENSION";
    case ToolKind::Socket: return "SOCKET";
    case ToolKind::Special: return "SPECIAL";
  }
  return "SPECIAL";
}

std::optional<ToolKind> parse_tool_kind(std::string_view token) {
  for (auto k : {ToolKind::Wrench, ToolKind::TorqueWrench, ToolKind::Extension, ToolKind::Socket,
                 ToolKind::Special}) {
    if (to_string(k) == token) return k;
  }
  return std::nullopt;
}

std::string_view to_string(ScrewOutLevel level) {
  switch (level) {
    case ScrewOutLevel::OneCm: return "ONE_CM";
    case ScrewOutLevel::TwoCm: return "TWO_CM";
    case ScrewOutLevel::Custom: return "CUSTOM";
  }
  return "TWO_CM";
}

std::optional<ScrewOutLevel> parse_screw_out_level(std::string_view token) {
  for (auto l : {ScrewOutLevel::OneCm, ScrewOutLevel::TwoCm, ScrewOutLevel::Custom}) {
    if (to_string(l) == token) return l;
  }
  return std::nullopt;
}

std::string_view to_string(StepAction action) {
  return action == StepAction::Remove ? "REMOVE" : "INSTALL";
}

std::optional<StepAction> parse_step_action(std::string_view token) {
  if (token == "REMOVE") return StepAction::Remove;
  if (token == "INSTALL") return StepAction::Install;
  return std::nullopt;
}

bool is_valid_id(std::string_view token) {
  if (token.empty()) return false;
  return std::all_of(token.begin(), token.end(), [](char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' ||
           c == '-';
  });
}

double PartSpec::screw_target_cm() const {
  if (!tool_dependent) return 0.0;
  switch (screw_out_level) {
    case ScrewOutLevel::OneCm: return 1.0;
    case ScrewOutLevel::TwoCm: return 2.0;
    case ScrewOutLevel::Custom: return custom_out_cm.value_or(0.0);
  }
  return 0.0;
}

std::size_t TaskPlan::step_count() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.steps.size();
  return n;
}

std::vector<const Step*> TaskPlan::flat_steps() const {
  std::vector<const Step*> out;
  out.reserve(step_count());
  for (const auto& g : groups) {
    for (const auto& s : g.steps) out.push_back(&s);
  }
  return out;
}

std::vector<ToolSpec> parse_tools_csv(std::string_view text, const std::string& file) {
  auto rows = csv::read_table(text, kToolsHeader, file);
  std::vector<ToolSpec> tools;
  std::map<std::string, std::size_t> seen;
  for (const auto& rec : rows) {
    RowReader r{rec, kToolsHeader, file};
    ToolSpec t;
    t.tool_id = r.id("tool_id");
    t.name = r.cell("name");
    auto kind = parse_tool_kind(r.cell("kind"));
    if (!kind) {
      r.fail("kind", "unknown tool kind '" + r.cell("kind") + "'");
    }
    t.kind = *kind;
    t.kit = r.id_list("kit");
    t.source_row = rec.row;
    auto [it, inserted] = seen.emplace(t.tool_id, rec.row);
    if (!inserted) {
      r.fail("tool_id", "duplicate tool_id '" + t.tool_id + "' (rows " + std::to_string(it->second) +
                            " and " + std::to_string(rec.row) + ")");
    }
    tools.push_back(std::move(t));
  }
  return tools;
}

std::vector<PartSpec> parse_parts_csv(std::string_view text, const std::string& file) {
  auto rows = csv::read_table(text, kPartsHeader, file);
  std::vector<PartSpec> parts;
  std::map<std::string, std::size_t> seen;
  static const std::vector<std::string> kToolColumns{
      "wrench_id",  "fix_wrench_id",   "extension_id",  "socket_id", "need_extension",
      "min_torque", "max_torque",      "screw_out_level", "custom_out_cm", "auto_fix"};

  for (const auto& rec : rows) {
    RowReader r{rec, kPartsHeader, file};
    PartSpec p;
    p.part_id = r.id("part_id");
    p.name = r.cell("name");
    p.tool_dependent = r.flag("tool_dependent");
    p.preconditions = r.id_list("preconditions");
    p.source_row = rec.row;

    if (p.tool_dependent) {
      if (r.cell("wrench_id").empty()) {
        r.fail("wrench_id", "tool_dependent=1 requires a wrench_id");
      }
      WrenchUseCondition c;
      c.wrench_id = r.id("wrench_id");
      c.fix_wrench_id = r.optional_id("fix_wrench_id");
      c.extension_id = r.optional_id("extension_id");
      c.socket_id = r.optional_id("socket_id");
      c.need_extension = r.flag("need_extension");
      c.min_torque = r.integer("min_torque");
      c.max_torque = r.integer("max_torque");
      if (c.min_torque > c.max_torque) {
        r.fail("min_torque", "min_torque " + std::to_string(c.min_torque) + " exceeds max_torque " +
                                 std::to_string(c.max_torque));
      }
      if (c.need_extension && !c.extension_id) {
        r.fail("extension_id", "need_extension=1 requires an extension_id");
      }
      p.wrench_condition = std::move(c);

      auto level = parse_screw_out_level(r.cell("screw_out_level"));
      if (!level) {
        r.fail("screw_out_level", "unknown screw-out level '" + r.cell("screw_out_level") + "'");
      }
      p.screw_out_level = *level;
      if (p.screw_out_level == ScrewOutLevel::Custom) {
        if (r.cell("custom_out_cm").empty()) {
          r.fail("custom_out_cm", "CUSTOM screw-out level requires custom_out_cm");
        }
        double cm = r.decimal("custom_out_cm");
        if (cm <= 0.0) r.fail("custom_out_cm", "custom_out_cm must be > 0");
        p.custom_out_cm = cm;
      } else if (!r.cell("custom_out_cm").empty()) {
        r.fail("custom_out_cm", "custom_out_cm is only allowed with CUSTOM screw-out level");
      }
      p.auto_fix = r.flag("auto_fix");
    } else {
      for (const auto& column : kToolColumns) {
        if (!r.cell(column).empty()) {
          r.fail(column, "must be empty when tool_dependent=0");
        }
      }
    }

    auto dir = csv::split_list(r.cell("disappear_dir"), ';');
    if (dir.size() != 3) {
      r.fail("disappear_dir", "expected x;y;z");
    }
    for (std::size_t i = 0; i < 3; ++i) {
      p.disappear_dir[i] = r.decimal("disappear_dir", dir[i]);
    }
    double norm = std::sqrt(p.disappear_dir[0] * p.disappear_dir[0] + p.disappear_dir[1] * p.disappear_dir[1] +
                            p.disappear_dir[2] * p.disappear_dir[2]);
    if (std::abs(norm - 1.0) > 1e-3) {
      r.fail("disappear_dir", "direction must be a unit vector");
    }
    p.disappear_dist_cm = r.decimal("disappear_dist_cm");
    if (p.disappear_dist_cm < 0.0) r.fail("disappear_dist_cm", "must be >= 0");
    p.disappear_duration_s = r.decimal("disappear_duration_s");
    if (p.disappear_duration_s <= 0.0) r.fail("disappear_duration_s", "must be > 0");

    auto [it, inserted] = seen.emplace(p.part_id, rec.row);
    if (!inserted) {
      r.fail("part_id", "duplicate part_id '" + p.part_id + "' (rows " + std::to_string(it->second) +
                            " and " + std::to_string(rec.row) + ")");
    }
    parts.push_back(std::move(p));
  }
  return parts;
}

std::vector<TaskPlan> parse_tasks_csv(std::string_view text, const std::string& file) {
  auto rows = csv::read_table(text, kTasksHeader, file);

  struct Pending {
    std::size_t group_index;
    std::size_t step_index;
    std::string group_name;
    Step step;
    std::size_t row;
  };

  std::vector<TaskPlan> plans;
  std::set<std::string> finished;

  std::size_t i = 0;
  while (i < rows.size()) {
    RowReader first{rows[i], kTasksHeader, file};
    TaskPlan plan;
    plan.task_id = first.id("task_id");
    plan.task_name = first.cell("task_name");
    if (finished.contains(plan.task_id)) {
      first.fail("task_id", "rows for task '" + plan.task_id + "' are not contiguous");
    }

    std::vector<Pending> pending;
    for (; i < rows.size() && rows[i].cells[0] == plan.task_id; ++i) {
      RowReader r{rows[i], kTasksHeader, file};
      if (r.cell("task_name") != plan.task_name) {
        r.fail("task_name", "task_name differs from the task's first row");
      }
      Pending p;
      p.group_index = r.index("group_index");
      p.step_index = r.index("step_index");
      p.group_name = r.cell("group_name");
      p.step.step_name = r.cell("step_name");
      p.step.part_id = r.id("part_id");
      auto action = parse_step_action(r.cell("action"));
      if (!action) {
        r.fail("action", "unknown action '" + r.cell("action") + "'");
      }
      p.step.action = *action;
      p.step.source_row = rows[i].row;
      p.row = rows[i].row;
      pending.push_back(std::move(p));
    }
    finished.insert(plan.task_id);

    std::stable_sort(pending.begin(), pending.end(), [](const Pending& a, const Pending& b) {
      return std::tie(a.group_index, a.step_index) < std::tie(b.group_index, b.step_index);
    });

    auto fail_at = [&](const Pending& p, std::string_view column, const std::string& detail) {
      throw ParseError(Location{file, p.row, std::string(column)}, detail);
    };

    std::size_t expected_group = 1;
    std::size_t expected_step = 1;
    for (const auto& p : pending) {
      if (p.group_index == expected_group - 1 && !plan.groups.empty()) {
        // Same group as the previous row.
        if (p.group_name != plan.groups.back().group_name) {
          fail_at(p, "group_name", "group_name differs within group " + std::to_string(p.group_index));
        }
        if (p.step_index != expected_step) {
          fail_at(p, "step_index",
                  p.step_index < expected_step ? "duplicate step index " + std::to_string(p.step_index)
                                               : "gap in step indices");
        }
      } else if (p.group_index == expected_group) {
        plan.groups.push_back(StepGroup{p.group_name, {}});
        ++expected_group;
        expected_step = 1;
        if (p.step_index != expected_step) {
          fail_at(p, "step_index", "gap in step indices");
        }
      } else {
        fail_at(p, "group_index", "gap in group indices");
      }
      plan.groups.back().steps.push_back(p.step);
      ++expected_step;
    }
    plans.push_back(std::move(plan));
  }
  return plans;
}

std::string serialize_tools_csv(const std::vector<ToolSpec>& tools) {
  std::string out = csv::write_row(kToolsHeader);
  for (const auto& t : tools) {
    out += csv::write_row({t.tool_id, t.name, std::string(to_string(t.kind)), csv::join_list(t.kit)});
  }
  return out;
}

std::string serialize_parts_csv(const std::vector<PartSpec>& parts) {
  std::string out = csv::write_row(kPartsHeader);
  for (const auto& p : parts) {
    std::vector<std::string> cells(kPartsHeader.size());
    cells[0] = p.part_id;
    cells[1] = p.name;
    cells[2] = p.tool_dependent ? "1" : "0";
    cells[3] = csv::join_list(p.preconditions);
    if (p.tool_dependent && p.wrench_condition) {
      const auto& c = *p.wrench_condition;
      cells[4] = c.wrench_id;
      cells[5] = c.fix_wrench_id.value_or("");
      cells[6] = c.extension_id.value_or("");
      cells[7] = c.socket_id.value_or("");
      cells[8] = c.need_extension ? "1" : "0";
      cells[9] = std::to_string(c.min_torque);
      cells[10] = std::to_string(c.max_torque);
      cells[11] = std::string(to_string(p.screw_out_level));
      cells[12] = p.custom_out_cm ? format_decimal(*p.custom_out_cm) : "";
      cells[13] = p.auto_fix ? "1" : "0";
    }
    cells[14] = format_decimal(p.disappear_dir[0]) + ";" + format_decimal(p.disappear_dir[1]) + ";" +
                format_decimal(p.disappear_dir[2]);
    cells[15] = format_decimal(p.disappear_dist_cm);
    cells[16] = format_decimal(p.disappear_duration_s);
    out += csv::write_row(cells);
  }
  return out;
}

std::string serialize_tasks_csv(const std::vector<TaskPlan>& plans) {
  std::string out = csv::write_row(kTasksHeader);
  for (const auto& plan : plans) {
    for (std::size_t g = 0; g < plan.groups.size(); ++g) {
      const auto& group = plan.groups[g];
      for (std::size_t s = 0; s < group.steps.size(); ++s) {
        const auto& step = group.steps[s];
        out += csv::write_row({plan.task_id, plan.task_name, std::to_string(g + 1), group.group_name,
                               std::to_string(s + 1), step.step_name, step.part_id,
                               std::string(to_string(step.action))});
      }
    }
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw LoadError(path.string(), "cannot open file");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

LoadedCatalog load_catalog_dir(const std::filesystem::path& dir) {
  for (const char* name : {"tools.csv", "parts.csv", "tasks.csv"}) {
    if (!std::filesystem::is_regular_file(dir / name)) {
      throw LoadError((dir / name).string(), "missing catalog file");
    }
  }
  auto tools = parse_tools_csv(read_file(dir / "tools.csv"), "tools.csv");
  auto parts = parse_parts_csv(read_file(dir / "parts.csv"), "parts.csv");
  auto plans = parse_tasks_csv(read_file(dir / "tasks.csv"), "tasks.csv");
  LoadedCatalog out;
  out.report = validate_catalog(tools, parts, plans);
  out.catalog = std::make_shared<const Catalog>(std::move(tools), std::move(parts), std::move(plans));
  return out;
}

}  // namespace workbench::config
