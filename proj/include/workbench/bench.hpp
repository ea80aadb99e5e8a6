#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "workbench/catalog.hpp"
#include "workbench/task.hpp"

namespace workbench::bench {

inline constexpr double kDefaultBudgetMs = 1000.0 / 90.0;
inline constexpr std::size_t kMinIterations = 100;

struct Report {
  std::size_t iterations = 0;
  std::size_t actions_executed = 0;
  double median_latency_ms = 0.0;
  double p99_latency_ms = 0.0;
  double max_latency_ms = 0.0;
  double budget_ms = kDefaultBudgetMs;
  // Outcome of each golden action in the first iteration, then the scorecard.
  std::vector<task::Outcome> outcomes;
  task::ScoreCard scorecard;
  // Every iteration produced the same outcomes and scorecard.
  bool deterministic = true;

  bool pass() const { return median_latency_ms < budget_ms && p99_latency_ms < 2.0 * budget_ms; }
};

// Nearest-rank percentile of an ascending sample, p in (0, 100].
double nearest_rank(const std::vector<double>& sorted, double p);

// Replays the task's golden sequence `iterations` times on fresh sessions,
// timing every action. Throws std::invalid_argument below kMinIterations.
Report run(std::shared_ptr<const config::Catalog> catalog, std::string_view task_id, std::size_t iterations,
           double budget_ms = kDefaultBudgetMs);

}  // namespace workbench::bench
