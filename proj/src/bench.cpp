#include "workbench/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace workbench::bench {

double nearest_rank(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return 0.0;
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(sorted.size())));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

Report run(std::shared_ptr<const config::Catalog> catalog, std::string_view task_id, std::size_t iterations,
           double budget_ms) {
  if (iterations < kMinIterations) {
    throw std::invalid_argument("iterations must be at least " + std::to_string(kMinIterations));
  }
  const auto* plan = catalog->find_plan(task_id);
  if (!plan) throw task::SessionError(task::SessionErrorCode::NotFound, "unknown task '" + std::string(task_id) + "'");
  auto golden = task::golden_actions(catalog, *plan);

  Report report;
  report.iterations = iterations;
  report.budget_ms = budget_ms;
  std::vector<double> samples;
  samples.reserve(iterations * golden.size());
  task::ManualClock clock;

  for (std::size_t it = 0; it < iterations; ++it) {
    auto session = task::TaskSession::start(catalog, task_id, task::Mode::Training, clock.clock());
    std::vector<task::Outcome> outcomes;
    outcomes.reserve(golden.size());
    task::ScoreCard card;
    for (const auto& action : golden) {
      auto t0 = std::chrono::steady_clock::now();
      if (action.op == engine::ActionOp::Submit) {
        card = session->submit();
      } else {
        outcomes.push_back(session->handle_action(action));
      }
      auto t1 = std::chrono::steady_clock::now();
      samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    if (it == 0) {
      report.outcomes = std::move(outcomes);
      report.scorecard = card;
    } else if (outcomes != report.outcomes || card != report.scorecard) {
      report.deterministic = false;
    }
  }

  std::sort(samples.begin(), samples.end());
  report.actions_executed = samples.size();
  report.median_latency_ms = nearest_rank(samples, 50.0);
  report.p99_latency_ms = nearest_rank(samples, 99.0);
  report.max_latency_ms = samples.empty() ? 0.0 : samples.back();
  return report;
}

}  // namespace workbench::bench
