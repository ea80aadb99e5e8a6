#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "workbench/bus.hpp"
#include "workbench/catalog.hpp"
#include "workbench/engine.hpp"

namespace workbench::task {

enum class Mode { Learning, Training, Exam };

std::string_view to_string(Mode mode);
std::optional<Mode> parse_mode(std::string_view token);

inline bool shows_guidance(Mode m) { return m == Mode::Learning; }
inline bool shows_live_score(Mode m) { return m == Mode::Training; }

// Session-relative monotonic milliseconds.
using Clock = std::function<std::int64_t()>;

Clock steady_session_clock();

// A clock whose value is set explicitly; used for deterministic replay.
class ManualClock {
 public:
  void set(std::int64_t ms) { *now_ = ms; }
  std::int64_t now() const { return *now_; }
  Clock clock() const {
    return [now = now_] { return *now; };
  }

 private:
  std::shared_ptr<std::int64_t> now_ = std::make_shared<std::int64_t>(0);
};

inline constexpr int kErrorDeduction = 2;
inline constexpr const char* kSequenceError = "SEQUENCE_ERROR";

// Points awarded per step: 100 split evenly (floor), remainder on the last step.
std::vector<int> step_points(std::size_t step_count);

struct ErrorEntry {
  std::int64_t timestamp_ms = 0;
  std::string kind;
  std::string detail;

  bool operator==(const ErrorEntry&) const = default;
};

struct GroupProgress {
  std::string group_name;
  std::size_t done = 0;
  std::size_t total = 0;

  bool operator==(const GroupProgress&) const = default;
};

struct ProgressReport {
  std::size_t steps_total = 0;
  std::size_t steps_done = 0;
  double percent = 0.0;
  std::vector<GroupProgress> per_group;
  std::optional<int> current_score;  // absent = hidden in this mode

  bool operator==(const ProgressReport&) const = default;
};

struct ScoreCard {
  int final_score = 0;
  std::size_t steps_done = 0;
  std::map<std::string, int> errors;
  double duration_s = 0.0;

  bool operator==(const ScoreCard&) const = default;
};

enum class OutcomeKind { Accepted, Rejected, StepCompleted, TaskFinished };

std::string_view to_string(OutcomeKind kind);

struct Outcome {
  OutcomeKind kind = OutcomeKind::Accepted;
  std::optional<engine::EngineError> reason;
  std::optional<std::size_t> step;
  // The action was legal but out of the plan's order; it cost a deduction.
  bool sequence_error = false;
  std::vector<engine::StateChangeEvent> events;

  bool operator==(const Outcome&) const = default;
};

struct Hint {
  std::size_t step_index = 0;
  std::string step_name;
  std::string part_id;
  config::StepAction action = config::StepAction::Remove;
  engine::ActionOp next_op = engine::ActionOp::Detach;
  std::optional<engine::CombinedTool> required_assembly;
  std::optional<int> torque;
  std::optional<std::pair<int, int>> torque_range;

  bool operator==(const Hint&) const = default;
};

enum class SessionErrorCode { NotFound, AlreadySubmitted };

class SessionError : public std::runtime_error {
 public:
  SessionError(SessionErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  SessionErrorCode code() const noexcept { return code_; }

 private:
  SessionErrorCode code_;
};

struct SessionState {
  std::string session_id;
  Mode mode = Mode::Learning;
  const config::TaskPlan* plan = nullptr;
  engine::WorldState world;
  std::size_t cursor = 0;
  std::vector<bool> completed;
  std::vector<ErrorEntry> error_log;
  int deductions = 0;
  bool submitted = false;
  std::optional<ScoreCard> scorecard;
};

// The plan's starting configuration: parts the plan installs start removed,
// everything else installed; every tool in the toolbox.
engine::WorldState starting_world(std::shared_ptr<const config::Catalog> catalog, const config::TaskPlan& plan);

/// One student's run through a task plan.
///
/// Engine state changes are published on the session's bus; the session's
/// own subscriber turns them into step completions. A step completes on the
/// first state change that carries its part in the step's direction: a
/// REMOVE step when the part leaves INSTALLED, an INSTALL step when it
/// reaches INSTALLED. Earlier plan steps on the same part must be done first.
class TaskSession {
 public:
  static std::unique_ptr<TaskSession> start(std::shared_ptr<const config::Catalog> catalog,
                                            std::string_view task_id, Mode mode, Clock clock,
                                            std::string session_id = {});

  TaskSession(const TaskSession&) = delete;
  TaskSession& operator=(const TaskSession&) = delete;
  ~TaskSession();

  // Throws SessionError(AlreadySubmitted) after submit, std::invalid_argument
  // for the submit op (use submit()).
  Outcome handle_action(const engine::Action& action);
  ScoreCard submit();

  ProgressReport progress() const;
  std::optional<Hint> next_hint() const;
  std::vector<engine::Action> available_actions() const;
  int current_score() const;

  const SessionState& state() const { return state_; }
  const config::Catalog& catalog() const { return *catalog_; }
  bus::MessageBus& bus() { return bus_; }
  // Every message published on the session bus, in order.
  const std::vector<bus::Message>& event_log() const { return event_log_; }

 private:
  TaskSession(std::shared_ptr<const config::Catalog> catalog, const config::TaskPlan& plan, Mode mode, Clock clock,
              std::string session_id);

  void on_state_changed(const bus::Message& message);
  void log_error(std::string kind, std::string detail);
  std::size_t first_incomplete() const;
  int earned() const;

  std::shared_ptr<const config::Catalog> catalog_;
  std::vector<const config::Step*> steps_;
  std::vector<int> points_;
  Clock clock_;
  bus::MessageBus bus_;
  bus::Subscription subscription_;
  SessionState state_;
  std::vector<bus::Message> event_log_;
  std::vector<std::size_t> just_completed_;
  std::map<std::string, bool> ever_removed_;
};

// A correct action sequence for `plan`, ending in submit, built by driving
// the engine from the plan's starting configuration.
std::vector<engine::Action> golden_actions(std::shared_ptr<const config::Catalog> catalog,
                                           const config::TaskPlan& plan);

}  // namespace workbench::task
