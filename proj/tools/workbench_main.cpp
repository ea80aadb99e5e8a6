#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "workbench/bench.hpp"
#include "workbench/catalog.hpp"
#include "workbench/csv.hpp"
#include "workbench/http_api.hpp"
#include "workbench/json_io.hpp"
#include "workbench/replay.hpp"
#include "workbench/session_service.hpp"

namespace fs = std::filesystem;
using namespace workbench;

namespace {

constexpr int kOk = 0;
constexpr int kDomainFailure = 1;
constexpr int kUsageFailure = 2;

std::string location_text(const csv::Location& loc) {
  std::string out = loc.file;
  if (loc.row) out += ":" + std::to_string(loc.row);
  if (!loc.column.empty()) out += " [" + loc.column + "]";
  return out;
}

// Loads the catalog or reports why it could not; returns an exit code on
// failure.
std::optional<int> load(const fs::path& dir, config::LoadedCatalog& out) {
  try {
    out = config::load_catalog_dir(dir);
  } catch (const config::LoadError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageFailure;
  } catch (const csv::ParseError& e) {
    std::cerr << "error: " << location_text(e.where()) << ": " << e.detail() << "\n";
    return kDomainFailure;
  }
  return std::nullopt;
}

std::optional<int> load_usable(const fs::path& dir, config::LoadedCatalog& out) {
  if (auto rc = load(dir, out)) return rc;
  if (!out.report.usable()) {
    for (const auto& i : out.report.errors) {
      std::cerr << "error: " << i.code << " " << location_text(i.location) << ": " << i.detail << "\n";
    }
    std::cerr << "catalog has " << out.report.errors.size() << " error(s)\n";
    return kDomainFailure;
  }
  return std::nullopt;
}

int cmd_validate(const fs::path& dir, bool as_json) {
  config::ValidationReport report;
  try {
    report = config::load_catalog_dir(dir).report;
  } catch (const config::LoadError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageFailure;
  } catch (const csv::ParseError& e) {
    report.errors.push_back(config::Issue{"PARSE_ERROR", e.where(), e.detail()});
  }
  if (as_json) {
    std::cout << json_io::to_json(report).dump(2) << "\n";
  } else {
    for (const auto& i : report.errors) {
      std::cout << "ERROR   " << i.code << " " << location_text(i.location) << ": " << i.detail << "\n";
    }
    for (const auto& i : report.warnings) {
      std::cout << "WARNING " << i.code << " " << location_text(i.location) << ": " << i.detail << "\n";
    }
    std::cout << report.errors.size() << " error(s), " << report.warnings.size() << " warning(s)\n";
  }
  return report.usable() ? kOk : kDomainFailure;
}

std::string describe(const engine::Action& a) {
  std::string out(engine::to_string(a.op));
  if (a.base) out += " " + *a.base + "+" + a.attachment.value_or("");
  if (!a.tool.empty()) out += " [" + csv::join_list(a.tool, ',') + "]";
  if (a.part) out += " " + *a.part;
  if (a.torque) out += " @" + std::to_string(*a.torque) + "Nm";
  return out;
}

std::string describe(const task::Outcome& o) {
  std::string out(task::to_string(o.kind));
  if (o.step) out += " step=" + std::to_string(*o.step);
  if (o.reason) {
    out += " " + std::string(engine::to_string(o.reason->code));
    for (auto v : o.reason->violations) out += " " + std::string(engine::to_string(v));
    if (!o.reason->detail.empty()) out += ": " + o.reason->detail;
  }
  if (o.sequence_error) out += " (" + std::string(task::kSequenceError) + ")";
  return out;
}

int cmd_replay(const fs::path& dir, const std::string& task_id, const std::string& mode_token, const fs::path& file) {
  auto mode = task::parse_mode(mode_token);
  if (!mode) {
    std::cerr << "error: unknown mode '" << mode_token << "'\n";
    return kUsageFailure;
  }
  config::LoadedCatalog loaded;
  if (auto rc = load_usable(dir, loaded)) return *rc;
  if (!loaded.catalog->find_plan(task_id)) {
    std::cerr << "error: unknown task '" << task_id << "'\n";
    return kDomainFailure;
  }
  std::vector<replay::Entry> entries;
  try {
    entries = replay::parse(config::read_file(file));
  } catch (const config::LoadError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageFailure;
  } catch (const replay::FormatError& e) {
    std::cerr << "error: " << file.string() << ": " << e.what() << "\n";
    return kUsageFailure;
  }

  auto result = replay::run(loaded.catalog, task_id, *mode, entries);
  for (const auto& rec : result.records) {
    std::cout << "#" << rec.entry.line << " " << describe(rec.entry.action) << " -> ";
    if (!rec.error.empty()) {
      std::cout << "refused: " << rec.error;
    } else if (rec.outcome) {
      std::cout << describe(*rec.outcome);
    } else {
      std::cout << "submitted";
    }
    std::cout << "\n";
  }
  bool ends_with_submit = !entries.empty() && entries.back().action.op == engine::ActionOp::Submit;
  if (!result.scorecard || !ends_with_submit) {
    std::cout << "progress " << json_io::to_json(result.progress).dump() << "\n";
    std::cerr << "session not submitted\n";
    return kDomainFailure;
  }
  std::cout << "scorecard " << json_io::to_json(*result.scorecard).dump() << "\n";
  return kOk;
}

int cmd_bench(const fs::path& dir, const std::string& task_id, std::size_t iterations, double budget_ms,
              bool as_json) {
  config::LoadedCatalog loaded;
  if (auto rc = load_usable(dir, loaded)) return *rc;
  if (!loaded.catalog->find_plan(task_id)) {
    std::cerr << "error: unknown task '" << task_id << "'\n";
    return kDomainFailure;
  }
  auto r = bench::run(loaded.catalog, task_id, iterations, budget_ms);
  if (as_json) {
    nlohmann::json j{{"iterations", r.iterations},
                     {"actions_executed", r.actions_executed},
                     {"median_latency_ms", r.median_latency_ms},
                     {"p99_latency_ms", r.p99_latency_ms},
                     {"max_latency_ms", r.max_latency_ms},
                     {"budget_ms", r.budget_ms},
                     {"final_score", r.scorecard.final_score},
                     {"deterministic", r.deterministic},
                     {"pass", r.pass()}};
    std::cout << j.dump(2) << "\n";
  } else {
    std::printf("iterations        %zu\n", r.iterations);
    std::printf("actions executed  %zu\n", r.actions_executed);
    std::printf("median latency    %.6f ms\n", r.median_latency_ms);
    std::printf("p99 latency       %.6f ms\n", r.p99_latency_ms);
    std::printf("max latency       %.6f ms\n", r.max_latency_ms);
    std::printf("budget            %.6f ms (p99 limit %.6f ms)\n", r.budget_ms, 2.0 * r.budget_ms);
    std::printf("final score       %d\n", r.scorecard.final_score);
    std::printf("%s\n", r.pass() ? "PASS" : "FAIL");
  }
  return r.pass() ? kOk : kDomainFailure;
}

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted.store(true); }

int cmd_serve(const fs::path& dir, const std::string& bind, const std::string& snapshot_dir) {
  auto colon = bind.rfind(':');
  int port = -1;
  std::string host;
  if (colon != std::string::npos) {
    host = bind.substr(0, colon);
    try {
      std::size_t used = 0;
      port = std::stoi(bind.substr(colon + 1), &used);
      if (used != bind.size() - colon - 1) port = -1;
    } catch (const std::exception&) {
      port = -1;
    }
  }
  if (host.empty() || port < 0 || port > 65535) {
    std::cerr << "error: --bind expects host:port, got '" << bind << "'\n";
    return kUsageFailure;
  }

  config::LoadedCatalog loaded;
  if (auto rc = load_usable(dir, loaded)) {
    std::cerr << "refusing to start\n";
    return *rc;
  }
  service::SessionService svc(loaded.catalog);
  if (!snapshot_dir.empty() && fs::is_directory(snapshot_dir)) {
    try {
      auto n = svc.restore(snapshot_dir);
      std::cout << "restored " << n << " session(s) from " << snapshot_dir << "\n";
    } catch (const std::exception& e) {
      std::cerr << "error: restore failed: " << e.what() << "\n";
      return kDomainFailure;
    }
  }

  http::Server server(svc);
  int bound = port == 0 ? server.bind_any_port(host) : (server.bind(host, port) ? port : -1);
  if (bound < 0) {
    std::cerr << "error: cannot bind " << bind << "\n";
    return kUsageFailure;
  }
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "listening on " << host << ":" << bound << std::endl;

  std::atomic<bool> done{false};
  std::thread watcher([&] {
    while (!done.load()) {
      if (g_interrupted.load()) {
        server.stop();
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
  });
  server.listen();
  done.store(true);
  watcher.join();

  if (!snapshot_dir.empty()) {
    try {
      auto n = svc.store(snapshot_dir);
      std::cout << "stored " << n << " session(s) to " << snapshot_dir << std::endl;
    } catch (const std::exception& e) {
      std::cerr << "error: snapshot failed: " << e.what() << "\n";
      return kUsageFailure;
    }
  }
  std::cout << "shut down" << std::endl;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Engine disassembly/assembly training workbench"};
  app.require_subcommand(1);

  std::string dir;
  bool as_json = false;
  auto* validate = app.add_subcommand("validate", "Check a catalog directory");
  validate->add_option("dir", dir, "Directory with tools.csv, parts.csv, tasks.csv")->required();
  validate->add_flag("--json", as_json, "Print the report as JSON");

  std::string task_id, mode, replay_file;
  auto* replay_cmd = app.add_subcommand("replay", "Run a JSONL action script and print the scorecard");
  replay_cmd->add_option("dir", dir)->required();
  replay_cmd->add_option("--task", task_id)->required();
  replay_cmd->add_option("--mode", mode)->required();
  replay_cmd->add_option("file", replay_file, "Replay file, one action per line")->required();

  std::size_t iterations = 0;
  double budget_ms = bench::kDefaultBudgetMs;
  auto* bench_cmd = app.add_subcommand("bench", "Time the golden action sequence");
  bench_cmd->add_option("dir", dir)->required();
  bench_cmd->add_option("--task", task_id)->required();
  bench_cmd->add_option("--iterations", iterations)->required()->check(CLI::Range(
      static_cast<std::size_t>(bench::kMinIterations), std::numeric_limits<std::size_t>::max()));
  bench_cmd->add_option("--budget-ms", budget_ms)->check(CLI::PositiveNumber);
  bench_cmd->add_flag("--json", as_json);

  std::string bind, snapshot_dir;
  auto* serve = app.add_subcommand("serve", "Run the HTTP session service");
  serve->add_option("dir", dir, "Catalog directory (default: $WORKBENCH_CATALOG_DIR)");
  serve->add_option("--bind", bind, "host:port")->required();
  serve->add_option("--snapshot-dir", snapshot_dir, "Restore from and store sessions to this directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kUsageFailure;
  }

  try {
    if (*validate) return cmd_validate(dir, as_json);
    if (*replay_cmd) return cmd_replay(dir, task_id, mode, replay_file);
    if (*bench_cmd) return cmd_bench(dir, task_id, iterations, budget_ms, as_json);
    if (*serve) {
      if (dir.empty()) {
        const char* env = std::getenv("WORKBENCH_CATALOG_DIR");
        if (!env || !*env) {
          std::cerr << "error: no catalog directory given and WORKBENCH_CATALOG_DIR is unset\n";
          return kUsageFailure;
        }
        dir = env;
      }
      return cmd_serve(dir, bind, snapshot_dir);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageFailure;
  }
  return kUsageFailure;
}
