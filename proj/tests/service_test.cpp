#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include <httplib.h>

#include "support.hpp"
#include "workbench/http_api.hpp"
#include "workbench/json_io.hpp"
#include "workbench/session_service.hpp"

using namespace workbench;
using service::Response;
using service::SessionService;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::shared_ptr<const config::Catalog> fixture() {
  static auto catalog = wbtest::fixture_catalog();
  return catalog;
}

// A service whose clock only moves when the test says so.
struct Harness {
  std::shared_ptr<std::int64_t> now = std::make_shared<std::int64_t>(1'000'000);
  SessionService svc{fixture(), [n = now] { return *n; }};

  std::string create(const std::string& mode = "TRAINING") {
    auto r = svc.create_session(json{{"task_id", wbtest::kFixtureTask}, {"mode", mode}});
    REQUIRE(r.status == 201);
    return r.body.at("session_id").get<std::string>();
  }
};

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("wb_service_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string error_code(const Response& r) { return r.body.at("error").at("code").get<std::string>(); }

json golden_json(std::size_t i) {
  auto catalog = fixture();
  static auto golden = task::golden_actions(catalog, *catalog->find_plan(wbtest::kFixtureTask));
  return json_io::to_json(golden.at(i));
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p, std::ios::trunc);
  out << j.dump(2);
}

}  // namespace

TEST_CASE("session ids") {
  std::set<std::string> seen;
  for (int i = 0; i < 200; ++i) {
    auto id = service::new_session_id();
    CHECK(service::is_session_id(id));
    seen.insert(id);
  }
  CHECK(seen.size() == 200);
  CHECK_FALSE(service::is_session_id("abc"));
  CHECK_FALSE(service::is_session_id(std::string(32, 'g')));
  CHECK_FALSE(service::is_session_id(std::string(32, 'A')));
}

TEST_CASE("create session") {
  Harness h;
  auto r = h.svc.create_session(json{{"task_id", wbtest::kFixtureTask}, {"mode", "LEARNING"}});
  CHECK(r.status == 201);
  CHECK(service::is_session_id(r.body.at("session_id").get<std::string>()));
  CHECK(r.body.at("progress").at("steps_total") == 5);
  CHECK(r.body.at("progress").at("current_score") == "hidden");
  CHECK(h.svc.session_count() == 1);

  SUBCASE("malformed body") {
    auto bad = h.svc.create_session_text("{\"task_id\":");
    CHECK(bad.status == 400);
    CHECK(error_code(bad) == "MALFORMED_JSON");
  }
  SUBCASE("missing and wrongly typed fields") {
    auto missing = h.svc.create_session(json{{"task_id", wbtest::kFixtureTask}});
    CHECK(missing.status == 400);
    CHECK(error_code(missing) == "VALIDATION_ERROR");
    CHECK(missing.body["error"]["field"] == "mode");
    auto typed = h.svc.create_session(json{{"task_id", 7}, {"mode", "EXAM"}});
    CHECK(typed.body["error"]["field"] == "task_id");
    CHECK(h.svc.create_session(json::array()).status == 400);
  }
  SUBCASE("unknown mode") {
    auto bad = h.svc.create_session(json{{"task_id", wbtest::kFixtureTask}, {"mode", "practice"}});
    CHECK(bad.status == 400);
    CHECK(bad.body["error"]["field"] == "mode");
  }
  SUBCASE("unknown task") {
    auto bad = h.svc.create_session(json{{"task_id", "gearbox"}, {"mode", "EXAM"}});
    CHECK(bad.status == 404);
    CHECK(error_code(bad) == "TASK_NOT_FOUND");
  }
  CHECK(h.svc.session_count() == 1);
}

TEST_CASE("get state") {
  Harness h;
  auto id = h.create("LEARNING");
  auto r = h.svc.get_state(id);
  REQUIRE(r.status == 200);
  CHECK_FALSE(r.body.at("actions").empty());
  CHECK(r.body.at("hint").at("part_id") == "oil_drain_plug");
  CHECK(r.body.at("submitted") == false);
  CHECK(r.body.at("world").at("parts").at("oil_filter").at("phase") == "INSTALLED");

  // Reading changes nothing.
  *h.now += 5000;
  CHECK(h.svc.get_state(id).body == r.body);

  CHECK(h.svc.get_state(h.create("EXAM")).body.at("hint").is_null());
  auto missing = h.svc.get_state(std::string(32, '0'));
  CHECK(missing.status == 404);
  CHECK(error_code(missing) == "SESSION_NOT_FOUND");
}

TEST_CASE("post action") {
  Harness h;
  auto id = h.create("LEARNING");

  SUBCASE("out-of-order step") {
    auto r = h.svc.post_action(id, std::string(R"({"op":"detach","part":"oil_filter"})"));
    REQUIRE(r.status == 200);
    CHECK(r.body.at("outcome").at("kind") == "step_completed");
    CHECK(r.body.at("outcome").at("sequence_error") == true);
    CHECK(r.body.at("outcome").at("events").size() == 1);
    CHECK(r.body.at("progress").at("steps_done") == 1);
  }
  SUBCASE("rejection is reported in the outcome") {
    auto r = h.svc.post_action(id, json{{"op", "detach"}, {"part", "heat_shield"}});
    REQUIRE(r.status == 200);
    CHECK(r.body.at("outcome").at("kind") == "rejected");
    CHECK(r.body.at("outcome").at("reason").at("code") == "PRECONDITION_UNMET");
    CHECK(r.body.at("outcome").at("reason").at("blocking_parts") == json{"exhaust_manifold"});
  }
  SUBCASE("invalid actions") {
    auto r = h.svc.post_action(id, json{{"op", "detach"}});
    CHECK(r.status == 400);
    CHECK(error_code(r) == "VALIDATION_ERROR");
    CHECK(r.body["error"]["field"] == "part");
    CHECK(error_code(h.svc.post_action(id, std::string("nope"))) == "MALFORMED_JSON");
    CHECK(h.svc.post_action(id, json{{"op", "detach"}, {"part", "x"}, {"speed", 3}}).body["error"]["field"] ==
          "speed");
  }
  SUBCASE("unknown session") {
    auto other = std::string(32, 'f');
    CHECK(h.svc.post_action(other, json{{"op", "submit"}}).status == 404);
    CHECK(h.svc.post_action(other, std::string("nope")).status == 404);
  }
  SUBCASE("submit through the action endpoint") {
    auto r = h.svc.post_action(id, json{{"op", "submit"}});
    CHECK(r.status == 200);
    CHECK(r.body.contains("scorecard"));
  }
}

TEST_CASE("submit and scorecard") {
  Harness h;
  auto id = h.create();
  auto early = h.svc.get_scorecard(id);
  CHECK(early.status == 409);
  CHECK(error_code(early) == "NOT_SUBMITTED");

  for (std::size_t i = 0; i < 12; ++i) {
    *h.now += 1500;
    REQUIRE(h.svc.post_action(id, golden_json(i)).status == 200);
  }
  *h.now += 2000;
  auto r = h.svc.submit(id);
  REQUIRE(r.status == 200);
  CHECK(r.body.at("scorecard").at("final_score") == 100);
  CHECK(r.body.at("scorecard").at("duration_s").get<double>() == doctest::Approx(20.0));
  CHECK(h.svc.get_scorecard(id).body == r.body);

  auto again = h.svc.submit(id);
  CHECK(again.status == 409);
  CHECK(error_code(again) == "ALREADY_SUBMITTED");
  CHECK(h.svc.post_action(id, golden_json(0)).status == 409);
  auto state = h.svc.get_state(id).body;
  CHECK(state.at("submitted") == true);
  CHECK(state.at("actions").empty());
  CHECK(h.svc.submit(std::string(32, 'a')).status == 404);
  CHECK(h.svc.get_scorecard(std::string(32, 'a')).status == 404);
}

TEST_CASE("catalog endpoints") {
  Harness h;
  auto tasks = h.svc.catalog_tasks();
  CHECK(tasks.status == 200);
  REQUIRE(tasks.body.at("tasks").size() == 1);
  CHECK(tasks.body["tasks"][0]["step_count"] == 5);
  CHECK(tasks.body["tasks"][0]["groups"].size() == 2);
  CHECK(h.svc.catalog_tools().body.at("tools").size() == 8);
  auto parts = h.svc.catalog_parts().body.at("parts");
  REQUIRE(parts.size() == 5);
  CHECK(parts[2]["wrench_condition"]["fix_wrench_id"] == "TW1");
  CHECK(parts[1]["wrench_condition"].is_null());
}

TEST_CASE("store and restore") {
  Harness h;
  TempDir dir;
  std::mt19937_64 rng(77);
  std::vector<std::string> ids;
  for (int i = 0; i < 6; ++i) {
    auto id = h.create(i % 3 == 0 ? "LEARNING" : i % 3 == 1 ? "TRAINING" : "EXAM");
    ids.push_back(id);
    auto steps = rng() % 12;
    for (std::size_t k = 0; k < steps; ++k) {
      *h.now += static_cast<std::int64_t>(rng() % 3000);
      if (rng() % 4 == 0) {
        h.svc.post_action(id, json{{"op", "detach"}, {"part", "heat_shield"}});
      } else {
        h.svc.post_action(id, golden_json(k));
      }
    }
  }
  h.svc.submit(ids[1]);
  CHECK(h.svc.store(dir.path) == 6);
  for (const auto& id : ids) CHECK(fs::exists(dir.path / (id + ".json")));

  auto snap = read_json(dir.path / (ids[0] + ".json"));
  for (const char* key : {"session_id", "created_at", "task_id", "mode", "action_log", "progress", "scorecard"}) {
    CHECK(snap.contains(key));
  }

  Harness restored;
  *restored.now = 50;
  CHECK(restored.svc.restore(dir.path) == 6);
  auto sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  CHECK(restored.svc.session_ids() == sorted);
  for (const auto& id : ids) {
    CHECK(restored.svc.get_state(id).body == h.svc.get_state(id).body);
    CHECK(restored.svc.get_scorecard(id).body == h.svc.get_scorecard(id).body);
  }

  // Both copies carry on identically, including timestamps.
  *h.now += 4000;
  *restored.now += 4000;
  for (const auto& id : ids) {
    auto a = h.svc.post_action(id, json{{"op", "detach"}, {"part", "heat_shield"}});
    auto b = restored.svc.post_action(id, json{{"op", "detach"}, {"part", "heat_shield"}});
    CHECK(a.body == b.body);
    CHECK(h.svc.submit(id).body == restored.svc.submit(id).body);
  }
}

TEST_CASE("restore edge cases") {
  Harness h;
  TempDir dir;

  SUBCASE("empty directory") { CHECK(h.svc.restore(dir.path) == 0); }
  SUBCASE("missing directory") { CHECK_THROWS_AS(h.svc.restore(dir.path / "nope"), service::SnapshotIoError); }
  SUBCASE("other files are ignored") {
    std::ofstream(dir.path / "notes.txt") << "hello";
    CHECK(h.svc.restore(dir.path) == 0);
  }
}

TEST_CASE("tampered snapshots are refused") {
  Harness h;
  TempDir dir;
  auto id = h.create();
  for (std::size_t i = 0; i < 4; ++i) {
    *h.now += 100;
    h.svc.post_action(id, golden_json(i));
  }
  h.svc.store(dir.path);
  auto file = dir.path / (id + ".json");
  auto snap = read_json(file);

  auto expect_corrupt = [&](json changed, const std::string& fragment) {
    write_json(file, changed);
    Harness fresh;
    try {
      fresh.svc.restore(dir.path);
      FAIL("restore accepted a tampered snapshot");
    } catch (const service::CorruptionError& e) {
      CHECK(e.session_id() == id);
      CHECK(std::string(e.what()).find(id) != std::string::npos);
      CHECK_MESSAGE(std::string(e.what()).find(fragment) != std::string::npos, e.what());
    }
    CHECK(fresh.svc.session_count() == 0);
  };

  SUBCASE("edited action") {
    auto s = snap;
    s["action_log"][2]["part"] = "heat_shield";
    expect_corrupt(s, "progress");
  }
  SUBCASE("dropped action") {
    auto s = snap;
    s["action_log"].erase(2);
    expect_corrupt(s, "progress");
  }
  SUBCASE("edited progress") {
    auto s = snap;
    s["progress"]["steps_done"] = 5;
    expect_corrupt(s, "progress");
  }
  SUBCASE("decreasing time") {
    auto s = snap;
    s["action_log"][3]["t_ms"] = 0;
    expect_corrupt(s, "t_ms");
  }
  SUBCASE("clock behind the log") {
    auto s = snap;
    s["clock_ms"] = 1;
    expect_corrupt(s, "clock_ms");
  }
  SUBCASE("unreadable entry") {
    auto s = snap;
    s["action_log"][0]["op"] = "teleport";
    expect_corrupt(s, "line 1");
  }
  SUBCASE("scorecard without submit") {
    auto s = snap;
    s["scorecard"] = json{{"final_score", 100}, {"steps_done", 5}, {"errors", json::object()}, {"duration_s", 1.0}};
    expect_corrupt(s, "scorecard");
  }
  SUBCASE("unknown task") {
    auto s = snap;
    s["task_id"] = "gearbox";
    expect_corrupt(s, "gearbox");
  }
  SUBCASE("not JSON at all") {
    std::ofstream(file, std::ios::trunc) << "{{{";
    Harness fresh;
    CHECK_THROWS_AS(fresh.svc.restore(dir.path), service::CorruptionError);
  }
}

TEST_CASE("interleaved sessions do not affect each other") {
  std::mt19937_64 rng(5150);
  Harness together;
  auto a = together.create();
  auto b = together.create();
  Harness alone_a, alone_b;
  auto sa = alone_a.create();
  auto sb = alone_b.create();
  auto world = engine::initial_world(fixture());
  for (int i = 0; i < 80; ++i) {
    auto action = json_io::to_json(wbtest::random_action(rng, world, 0.8));
    bool to_a = rng() % 2;
    auto shared = together.svc.post_action(to_a ? a : b, action);
    auto solo = to_a ? alone_a.svc.post_action(sa, action) : alone_b.svc.post_action(sb, action);
    CHECK(shared.body == solo.body);
  }
  CHECK(together.svc.get_state(a).body == alone_a.svc.get_state(sa).body);
  CHECK(together.svc.get_state(b).body == alone_b.svc.get_state(sb).body);
}

TEST_CASE("concurrent sessions") {
  SessionService svc(fixture());
  constexpr int kThreads = 8;
  std::vector<std::string> ids;
  for (int i = 0; i < kThreads; ++i) {
    ids.push_back(svc.create_session(json{{"task_id", wbtest::kFixtureTask}, {"mode", "EXAM"}}).body["session_id"].get<std::string>());
  }
  std::atomic<int> perfect{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < kThreads; ++t) {
    threads.emplace_back([&, t] {
      for (std::size_t i = 0; i < 12; ++i) {
        svc.post_action(ids[t], golden_json(i));
        svc.get_state(ids[(t + 1) % kThreads]);
      }
      if (svc.submit(ids[t]).body["scorecard"]["final_score"] == 100) ++perfect;
    });
  }
  for (auto& th : threads) th.join();
  CHECK(perfect == kThreads);
}

TEST_CASE("HTTP front end") {
  SessionService svc(fixture());
  http::Server server(svc);
  int port = server.bind_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread listener([&] { server.listen(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto post = [&](const std::string& path, const json& body) {
    auto res = client.Post(path, body.dump(), "application/json");
    REQUIRE(res);
    return std::pair{res->status, json::parse(res->body)};
  };
  auto get = [&](const std::string& path) {
    auto res = client.Get(path);
    REQUIRE(res);
    return std::pair{res->status, json::parse(res->body)};
  };

  auto [created_status, created] = post("/sessions", {{"task_id", wbtest::kFixtureTask}, {"mode", "LEARNING"}});
  CHECK(created_status == 201);
  auto id = created.at("session_id").get<std::string>();

  auto [state_status, state] = get("/sessions/" + id);
  CHECK(state_status == 200);
  CHECK(state.at("hint").at("part_id") == "oil_drain_plug");

  auto [act_status, act] = post("/sessions/" + id + "/actions", golden_json(0));
  CHECK(act_status == 200);
  CHECK(act.at("outcome").at("kind") == "step_completed");

  auto bad = client.Post("/sessions/" + id + "/actions", "{oops", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);

  CHECK(get("/sessions/" + id + "/scorecard").first == 409);
  auto [sub_status, sub] = post("/sessions/" + id + "/submit", json::object());
  CHECK(sub_status == 200);
  CHECK(sub.at("scorecard").at("steps_done") == 1);
  CHECK(get("/sessions/" + id + "/scorecard").second == sub);
  CHECK(post("/sessions/" + id + "/submit", json::object()).first == 409);
  CHECK(get("/sessions/" + std::string(32, '0')).first == 404);

  CHECK(get("/catalog/tasks").second.at("tasks").size() == 1);
  CHECK(get("/catalog/tools").second.at("tools").size() == 8);
  CHECK(get("/catalog/parts").second.at("parts").size() == 5);

  auto missing = client.Get("/nowhere");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  CHECK(json::parse(missing->body).contains("error"));

  auto preflight = client.Options("/sessions");
  REQUIRE(preflight);
  CHECK(preflight->status == 204);
  CHECK(preflight->get_header_value("Access-Control-Allow-Origin") == "*");

  server.stop();
  listener.join();
}
