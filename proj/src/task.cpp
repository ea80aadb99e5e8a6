#include "workbench/task.hpp"

#include <algorithm>
#include <chrono>

namespace workbench::task {

using config::StepAction;
using engine::Action;
using engine::ActionOp;
using engine::Phase;

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::Learning: return "LEARNING";
    case Mode::Training: return "TRAINING";
    case Mode::Exam: return "EXAM";
  }
  return "LEARNING";
}

std::optional<Mode> parse_mode(std::string_view token) {
  for (auto m : {Mode::Learning, Mode::Training, Mode::Exam}) {
    if (to_string(m) == token) return m;
  }
  return std::nullopt;
}

std::string_view to_string(OutcomeKind kind) {
  switch (kind) {
    case OutcomeKind::Accepted: return "accepted";
    case OutcomeKind::Rejected: return "rejected";
    case OutcomeKind::StepCompleted: return "step_completed";
    case OutcomeKind::TaskFinished: return "task_finished";
  }
  return "accepted";
}

Clock steady_session_clock() {
  auto start = std::chrono::steady_clock::now();
  return [start] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
  };
}

std::vector<int> step_points(std::size_t step_count) {
  if (step_count == 0) return {};
  const int each = 100 / static_cast<int>(step_count);
  std::vector<int> points(step_count, each);
  points.back() += 100 - each * static_cast<int>(step_count);
  return points;
}

engine::WorldState starting_world(std::shared_ptr<const config::Catalog> catalog, const config::TaskPlan& plan) {
  auto removed = config::starting_removed(*catalog, plan);
  auto world = engine::initial_world(catalog);
  for (const auto& [id, is_removed] : removed) {
    if (!is_removed) continue;
    world.parts[id] = engine::PartState{Phase::Removed, catalog->find_part(id)->screw_target_cm()};
  }
  return world;
}

std::unique_ptr<TaskSession> TaskSession::start(std::shared_ptr<const config::Catalog> catalog,
                                                std::string_view task_id, Mode mode, Clock clock,
                                                std::string session_id) {
  const config::TaskPlan* plan = catalog->find_plan(task_id);
  if (!plan) {
    throw SessionError(SessionErrorCode::NotFound, "unknown task '" + std::string(task_id) + "'");
  }
  if (!clock) clock = steady_session_clock();
  return std::unique_ptr<TaskSession>(
      new TaskSession(std::move(catalog), *plan, mode, std::move(clock), std::move(session_id)));
}

TaskSession::TaskSession(std::shared_ptr<const config::Catalog> catalog, const config::TaskPlan& plan, Mode mode,
                         Clock clock, std::string session_id)
    : catalog_(std::move(catalog)),
      steps_(plan.flat_steps()),
      points_(step_points(steps_.size())),
      clock_(std::move(clock)) {
  state_.session_id = std::move(session_id);
  state_.mode = mode;
  state_.plan = &plan;
  state_.world = starting_world(catalog_, plan);
  state_.completed.assign(steps_.size(), false);
  for (const auto& [id, part] : state_.world.parts) {
    ever_removed_[id] = part.phase == Phase::Removed;
  }
  subscription_ = bus_.subscribe(engine::kStateChangedTopic, [this](const bus::Message& m) { on_state_changed(m); });
}

TaskSession::~TaskSession() = default;

void TaskSession::on_state_changed(const bus::Message& message) {
  event_log_.push_back(message);
  const auto& payload = message.payload;
  const std::string part = payload.at("part_id").get<std::string>();
  const auto from = engine::parse_phase(payload.at("from_phase").get<std::string>());
  const auto to = engine::parse_phase(payload.at("to_phase").get<std::string>());
  if (to == Phase::Removed) ever_removed_[part] = true;

  for (std::size_t i = 0; i < steps_.size(); ++i) {
    const auto& step = *steps_[i];
    if (step.part_id != part) continue;
    if (state_.completed[i]) continue;
    // Earlier steps on this part gate this one.
    bool fulfils = step.action == StepAction::Remove ? (from == Phase::Installed && to != Phase::Installed)
                                                     : (to == Phase::Installed && ever_removed_[part]);
    if (fulfils) {
      state_.completed[i] = true;
      just_completed_.push_back(i);
    }
    break;
  }
}

std::size_t TaskSession::first_incomplete() const {
  auto it = std::find(state_.completed.begin(), state_.completed.end(), false);
  return static_cast<std::size_t>(it - state_.completed.begin());
}

int TaskSession::earned() const {
  int total = 0;
  for (std::size_t i = 0; i < steps_.size(); ++i) {
    if (state_.completed[i]) total += points_[i];
  }
  return total;
}

int TaskSession::current_score() const {
  return std::clamp(earned() - state_.deductions, 0, 100);
}

void TaskSession::log_error(std::string kind, std::string detail) {
  state_.error_log.push_back(ErrorEntry{clock_(), std::move(kind), std::move(detail)});
  state_.deductions += kErrorDeduction;
}

Outcome TaskSession::handle_action(const Action& action) {
  if (state_.submitted) {
    throw SessionError(SessionErrorCode::AlreadySubmitted, "session already submitted");
  }
  if (action.op == ActionOp::Submit) {
    throw std::invalid_argument("handle_action: use submit()");
  }

  Outcome outcome;
  auto result = engine::perform(state_.world, action);
  if (!result) {
    outcome.kind = OutcomeKind::Rejected;
    outcome.reason = result.error();
    if (action.op != ActionOp::Combine && action.op != ActionOp::Split) {
      log_error(std::string(engine::to_string(result.error().code)), result.error().detail);
    }
    return outcome;
  }

  auto transition = std::move(result).value();
  state_.world = std::move(transition.world);
  outcome.events = transition.events;

  const std::size_t expected = state_.cursor;
  just_completed_.clear();
  engine::publish_events(bus_, transition.events);

  if (just_completed_.empty()) {
    outcome.kind = OutcomeKind::Accepted;
    bool planned_part = transition.events.empty() ||
                        std::any_of(steps_.begin(), steps_.end(), [&](const config::Step* s) {
                          return s->part_id == transition.events.front().part_id;
                        });
    if (!planned_part) {
      outcome.sequence_error = true;
      log_error(kSequenceError, "'" + transition.events.front().part_id + "' is not part of this task");
    }
    return outcome;
  }

  const std::size_t done = just_completed_.front();
  outcome.step = done;
  if (done != expected) {
    outcome.sequence_error = true;
    log_error(kSequenceError, "completed step " + std::to_string(done + 1) + " while step " +
                                  std::to_string(expected + 1) + " was expected");
  }
  state_.cursor = first_incomplete();
  outcome.kind = state_.cursor == steps_.size() ? OutcomeKind::TaskFinished : OutcomeKind::StepCompleted;
  return outcome;
}

ProgressReport TaskSession::progress() const {
  ProgressReport r;
  r.steps_total = steps_.size();
  r.steps_done = static_cast<std::size_t>(std::count(state_.completed.begin(), state_.completed.end(), true));
  r.percent = r.steps_total == 0 ? 0.0 : 100.0 * static_cast<double>(r.steps_done) / static_cast<double>(r.steps_total);
  std::size_t i = 0;
  for (const auto& group : state_.plan->groups) {
    GroupProgress g{group.group_name, 0, group.steps.size()};
    for (std::size_t s = 0; s < group.steps.size(); ++s, ++i) {
      if (state_.completed[i]) ++g.done;
    }
    r.per_group.push_back(std::move(g));
  }
  if (shows_live_score(state_.mode)) r.current_score = current_score();
  return r;
}

std::optional<Hint> TaskSession::next_hint() const {
  if (!shows_guidance(state_.mode) || state_.submitted || state_.cursor >= steps_.size()) {
    return std::nullopt;
  }
  const auto& step = *steps_[state_.cursor];
  const config::PartSpec* part = catalog_->find_part(step.part_id);
  const auto& phase = state_.world.parts.at(step.part_id).phase;

  Hint h;
  h.step_index = state_.cursor;
  h.step_name = step.step_name;
  h.part_id = step.part_id;
  h.action = step.action;
  if (step.action == StepAction::Remove) {
    h.next_op = part->tool_dependent && phase == Phase::Installed ? ActionOp::ApplyTool : ActionOp::Detach;
  } else {
    h.next_op = phase == Phase::Removed ? ActionOp::Attach : ActionOp::ApplyTool;
  }
  if (h.next_op == ActionOp::ApplyTool) {
    if (auto req = engine::required_tool(state_.world, step.part_id)) {
      h.required_assembly = req->assembly;
      h.torque = req->torque;
      h.torque_range = req->torque_range;
    }
  }
  return h;
}

std::vector<Action> TaskSession::available_actions() const {
  return engine::available_actions(state_.world);
}

ScoreCard TaskSession::submit() {
  if (state_.submitted) {
    throw SessionError(SessionErrorCode::AlreadySubmitted, "session already submitted");
  }
  ScoreCard card;
  card.final_score = current_score();
  card.steps_done = static_cast<std::size_t>(std::count(state_.completed.begin(), state_.completed.end(), true));
  for (const auto& e : state_.error_log) ++card.errors[e.kind];
  card.duration_s = static_cast<double>(clock_()) / 1000.0;

  state_.submitted = true;
  state_.scorecard = card;
  state_.world = starting_world(catalog_, *state_.plan);
  return card;
}

namespace {

class GoldenBuilder {
 public:
  GoldenBuilder(std::shared_ptr<const config::Catalog> catalog, const config::TaskPlan& plan)
      : world_(starting_world(std::move(catalog), plan)) {}

  void run(const config::TaskPlan& plan) {
    for (const config::Step* step : plan.flat_steps()) {
      const auto& part = *world_.catalog->find_part(step->part_id);
      if (step->action == StepAction::Remove) {
        if (part.tool_dependent && phase(part) == Phase::Installed) use_tool(part);
        if (phase(part) != Phase::Removed) detach(part);
      } else {
        if (phase(part) == Phase::Removed) attach(part);
        if (part.tool_dependent && phase(part) == Phase::Loosened) use_tool(part);
      }
    }
    actions_.push_back(Action{ActionOp::Submit, {}, {}, {}, {}, {}});
  }

  std::vector<Action> take() { return std::move(actions_); }

 private:
  Phase phase(const config::PartSpec& part) const { return world_.parts.at(part.part_id).phase; }

  void perform(Action a) {
    auto r = engine::perform(world_, a);
    if (!r) {
      throw std::logic_error("golden path failed at " + std::string(engine::to_string(a.op)) + ": " +
                             std::string(engine::to_string(r.error().code)) + " " + r.error().detail);
    }
    world_ = std::move(r).value().world;
    actions_.push_back(std::move(a));
  }

  void detach(const config::PartSpec& p) { perform(Action{ActionOp::Detach, {}, {}, {}, p.part_id, {}}); }
  void attach(const config::PartSpec& p) { perform(Action{ActionOp::Attach, {}, {}, {}, p.part_id, {}}); }

  void use_tool(const config::PartSpec& part) {
    auto req = engine::required_tool(world_, part.part_id);
    if (!req) throw std::logic_error("no tool requirement for '" + part.part_id + "'");
    ensure_held(req->assembly);
    perform(Action{ActionOp::ApplyTool, {}, {}, req->assembly.tool_ids(), part.part_id, req->torque});
  }

  void ensure_held(const engine::CombinedTool& want) {
    if (engine::is_held(world_, want)) return;
    auto ids = want.tool_ids();
    // Free every tool the wanted assembly needs.
    for (bool again = true; again;) {
      again = false;
      for (const auto& a : world_.assemblies) {
        auto held = a.tool_ids();
        bool overlaps = std::any_of(held.begin(), held.end(), [&](const std::string& id) {
          return std::find(ids.begin(), ids.end(), id) != ids.end();
        });
        if (overlaps) {
          perform(Action{ActionOp::Split, {}, {}, held, {}, {}});
          again = true;
          break;
        }
      }
    }
    if (want.extension) perform(Action{ActionOp::Combine, want.base, *want.extension, {}, {}, {}});
    if (want.socket) perform(Action{ActionOp::Combine, want.base, *want.socket, {}, {}, {}});
  }

  engine::WorldState world_;
  std::vector<Action> actions_;
};

}  // namespace

std::vector<Action> golden_actions(std::shared_ptr<const config::Catalog> catalog, const config::TaskPlan& plan) {
  GoldenBuilder builder(std::move(catalog), plan);
  builder.run(plan);
  return builder.take();
}

}  // namespace workbench::task
