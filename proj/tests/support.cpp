#include "support.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "workbench/bus.hpp"
#include "workbench/json_io.hpp"

namespace wbtest {

std::filesystem::path fixture_dir(const std::string& name) { return std::filesystem::path(WORKBENCH_FIXTURES) / name; }

std::filesystem::path workbench_binary() { return std::filesystem::path(WORKBENCH_BINARY); }

std::shared_ptr<const config::Catalog> fixture_catalog() {
  auto loaded = config::load_catalog_dir(fixture_dir());
  if (!loaded.report.usable()) throw std::runtime_error("fixture catalog has errors");
  return loaded.catalog;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

template <typename T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& items) {
  return items[std::uniform_int_distribution<std::size_t>(0, items.size() - 1)(rng)];
}

bool chance(std::mt19937_64& rng, double p) { return std::bernoulli_distribution(p)(rng); }

int uniform(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

config::WrenchUseCondition random_condition(std::mt19937_64& rng) {
  config::WrenchUseCondition c;
  c.wrench_id = pick<std::string>(rng, {"W1", "W2", "TW1"});
  bool has_extension_kit = c.wrench_id != "W2";
  c.need_extension = has_extension_kit && chance(rng, 0.4);
  if (c.need_extension) c.extension_id = "E1";
  if (chance(rng, 0.7)) c.socket_id = pick<std::string>(rng, {"S1", "S2"});
  if (chance(rng, 0.35)) c.fix_wrench_id = "TW1";
  c.min_torque = uniform(rng, 5, 40);
  c.max_torque = c.min_torque + uniform(rng, 0, 20);
  return c;
}

}  // namespace

RandomCatalog random_catalog(std::mt19937_64& rng, const RandomCatalogOptions& opt) {
  RandomCatalog out;
  auto tool = [](std::string id, config::ToolKind kind, std::vector<std::string> kit) {
    return config::ToolSpec{id, "Tool " + id, kind, std::move(kit), 0};
  };
  out.tools = {tool("W1", config::ToolKind::Wrench, {"E1", "S1", "S2"}),
               tool("W2", config::ToolKind::Wrench, {"S1", "S2"}),
               tool("TW1", config::ToolKind::TorqueWrench, {"E1", "S1", "S2"}),
               tool("E1", config::ToolKind::Extension, {}),
               tool("S1", config::ToolKind::Socket, {}),
               tool("S2", config::ToolKind::Socket, {})};

  const std::size_t n = opt.parts;
  // rank[i]: position of part i in a hidden topological order.
  std::vector<std::size_t> rank(n);
  for (std::size_t i = 0; i < n; ++i) rank[i] = i;
  std::shuffle(rank.begin(), rank.end(), rng);
  std::vector<std::size_t> by_rank(n);
  for (std::size_t i = 0; i < n; ++i) by_rank[rank[i]] = i;

  for (std::size_t i = 0; i < n; ++i) {
    config::PartSpec p;
    p.part_id = "p" + std::to_string(i);
    p.name = "Part " + std::to_string(i);
    p.tool_dependent = chance(rng, 0.6);
    for (std::size_t r = rank[i] > opt.edge_window ? rank[i] - opt.edge_window : 0; r < rank[i]; ++r) {
      if (chance(rng, opt.edge_probability)) p.preconditions.push_back("p" + std::to_string(by_rank[r]));
    }
    if (p.tool_dependent) {
      p.wrench_condition = random_condition(rng);
      int level = uniform(rng, 0, 2);
      p.screw_out_level = static_cast<config::ScrewOutLevel>(level);
      if (p.screw_out_level == config::ScrewOutLevel::Custom) p.custom_out_cm = uniform(rng, 1, 40) / 8.0;
      p.auto_fix = chance(rng, 0.5);
    }
    p.disappear_dir = pick<config::Vec3>(rng, {{1, 0, 0}, {0, -1, 0}, {0, 0, 1}});
    p.disappear_dist_cm = uniform(rng, 0, 40);
    p.disappear_duration_s = uniform(rng, 1, 20) / 10.0;
    out.parts.push_back(std::move(p));
  }
  std::shuffle(out.parts.begin(), out.parts.end(), rng);

  if (opt.with_plan && n > 0) {
    config::TaskPlan plan{"t", "Random task", {}};
    std::size_t step = 0;
    while (step < n) {
      auto size = static_cast<std::size_t>(uniform(rng, 1, 4));
      config::StepGroup g{"Group " + std::to_string(plan.groups.size() + 1), {}};
      for (std::size_t k = 0; k < size && step < n; ++k, ++step) {
        auto id = "p" + std::to_string(by_rank[step]);
        g.steps.push_back(config::Step{"Remove " + id, id, config::StepAction::Remove, 0});
      }
      plan.groups.push_back(std::move(g));
    }
    out.plans.push_back(std::move(plan));
  }
  out.catalog = std::make_shared<const config::Catalog>(out.tools, out.parts, out.plans);
  return out;
}

std::set<Order> topological_orders(const std::vector<config::PartSpec>& parts) {
  std::set<Order> out;
  std::vector<bool> used(parts.size(), false);
  Order prefix;
  std::function<void()> extend = [&] {
    if (prefix.size() == parts.size()) {
      out.insert(prefix);
      return;
    }
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (used[i]) continue;
      bool ready = std::all_of(parts[i].preconditions.begin(), parts[i].preconditions.end(),
                               [&](const std::string& pre) {
                                 return std::find(prefix.begin(), prefix.end(), pre) != prefix.end();
                               });
      if (!ready) continue;
      used[i] = true;
      prefix.push_back(parts[i].part_id);
      extend();
      prefix.pop_back();
      used[i] = false;
    }
  };
  extend();
  return out;
}

namespace {

// Returns the world after fully removing `part_id`, or nothing if any engine
// step on the way is refused.
std::optional<engine::WorldState> try_remove(const engine::WorldState& start, const config::PartSpec& part) {
  engine::WorldState world = start;
  while (!world.assemblies.empty()) {
    auto r = engine::split(world, world.assemblies.front());
    if (!r) return std::nullopt;
    world = std::move(r).value();
  }
  if (part.tool_dependent) {
    const auto& cond = *part.wrench_condition;
    engine::CombinedTool tool{cond.wrench_id, std::nullopt, std::nullopt};
    std::vector<std::string> attachments;
    if (cond.need_extension && cond.extension_id) attachments.push_back(*cond.extension_id);
    if (cond.socket_id) attachments.push_back(*cond.socket_id);
    for (const auto& att : attachments) {
      auto r = engine::combine(world, cond.wrench_id, att);
      if (!r) return std::nullopt;
      world = r.value().world;
      tool = r.value().tool;
    }
    auto applied = engine::apply_tool(world, tool, part.part_id, std::nullopt);
    if (!applied) return std::nullopt;
    world = std::move(applied).value().world;
  }
  auto detached = engine::detach_part(world, part.part_id);
  if (!detached) return std::nullopt;
  return std::move(detached).value().world;
}

}  // namespace

std::set<Order> engine_removal_orders(std::shared_ptr<const config::Catalog> catalog) {
  std::set<Order> out;
  Order prefix;
  std::function<void(const engine::WorldState&)> explore = [&](const engine::WorldState& world) {
    if (prefix.size() == catalog->parts().size()) {
      out.insert(prefix);
      return;
    }
    for (const auto& part : catalog->parts()) {
      if (world.parts.at(part.part_id).phase == engine::Phase::Removed) continue;
      auto next = try_remove(world, part);
      if (!next) continue;
      prefix.push_back(part.part_id);
      explore(*next);
      prefix.pop_back();
    }
  };
  explore(engine::initial_world(catalog));
  return out;
}

std::string world_key(const engine::WorldState& world) { return json_io::to_json(world).dump(); }

engine::Action random_action(std::mt19937_64& rng, const engine::WorldState& world, double legal_share) {
  if (chance(rng, legal_share)) {
    auto legal = engine::available_actions(world);
    if (!legal.empty()) return pick(rng, legal);
  }
  const auto& catalog = *world.catalog;
  std::vector<std::string> tool_ids, part_ids;
  for (const auto& t : catalog.tools()) tool_ids.push_back(t.tool_id);
  for (const auto& p : catalog.parts()) part_ids.push_back(p.part_id);
  tool_ids.push_back("ZZ");
  engine::Action a;
  switch (uniform(rng, 0, 4)) {
    case 0:
      a.op = engine::ActionOp::Combine;
      a.base = pick(rng, tool_ids);
      a.attachment = pick(rng, tool_ids);
      break;
    case 1: {
      a.op = engine::ActionOp::Split;
      a.tool.push_back(pick(rng, tool_ids));
      if (chance(rng, 0.7)) a.tool.push_back(pick(rng, tool_ids));
      break;
    }
    case 2: {
      a.op = engine::ActionOp::ApplyTool;
      a.tool.push_back(pick(rng, tool_ids));
      int extra = uniform(rng, 0, 2);
      for (int i = 0; i < extra; ++i) a.tool.push_back(pick(rng, tool_ids));
      a.part = pick(rng, part_ids);
      if (chance(rng, 0.6)) a.torque = uniform(rng, 0, 60);
      break;
    }
    case 3:
      a.op = engine::ActionOp::Detach;
      a.part = pick(rng, part_ids);
      break;
    default:
      a.op = engine::ActionOp::Attach;
      a.part = pick(rng, part_ids);
      break;
  }
  return a;
}

namespace {

enum class SubKind { Plain, Thrower, Relay };

struct RefSub {
  std::size_t token;
  bus::SubscriptionHandle handle;
  std::string topic;
  SubKind kind;
  bool active = true;
};

constexpr const char* kRelayTopic = "c";

}  // namespace

std::size_t run_bus_script(std::mt19937_64& rng, std::size_t steps, std::string* log) {
  bus::MessageBus bus;
  std::vector<RefSub> subs;
  std::map<std::size_t, std::vector<std::uint64_t>> actual;    // token -> seqs received
  std::map<std::size_t, std::vector<std::uint64_t>> expected;  // token -> seqs expected
  std::vector<bus::SubscriptionHandle> retired;
  std::uint64_t next_seq = 1;
  std::size_t violations = 0;
  auto fail = [&](const std::string& what) {
    if (violations++ == 0 && log) *log = what;
  };

  auto active_on = [&](const std::string& topic) {
    std::vector<const RefSub*> out;
    for (const auto& s : subs) {
      if (s.active && s.topic == topic) out.push_back(&s);
    }
    return out;
  };

  for (std::size_t step = 0; step < steps; ++step) {
    int op = uniform(rng, 0, 9);
    if (op < 3 || subs.empty()) {
      std::string topic = pick<std::string>(rng, {"a", "b", "c"});
      SubKind kind = SubKind::Plain;
      int k = uniform(rng, 0, 9);
      if (k == 0) kind = SubKind::Thrower;
      if (k == 1 && topic != kRelayTopic) kind = SubKind::Relay;
      std::size_t token = subs.size();
      auto sub = bus.subscribe(topic, [&, token, kind](const bus::Message& m) {
        actual[token].push_back(m.seq);
        if (kind == SubKind::Thrower) throw std::runtime_error("subscriber failure");
        if (kind == SubKind::Relay) bus.publish(kRelayTopic, {{"from", token}});
      });
      subs.push_back(RefSub{token, sub.handle, topic, kind});
    } else if (op < 5) {
      bool stale = !retired.empty() && chance(rng, 0.25);
      std::vector<RefSub*> live;
      for (auto& s : subs) {
        if (s.active) live.push_back(&s);
      }
      if (stale || live.empty()) {
        auto handle = retired.empty() || chance(rng, 0.5) ? bus::SubscriptionHandle{1'000'000 + step}
                                                          : pick(rng, retired);
        try {
          bus.unsubscribe(handle);
          fail("unsubscribe of unknown handle " + std::to_string(handle.value) + " did not throw");
        } catch (const bus::NotFoundError&) {
        }
      } else {
        RefSub* s = pick(rng, live);
        bus.unsubscribe(s->handle);
        s->active = false;
        retired.push_back(s->handle);
      }
    } else {
      std::string topic = pick<std::string>(rng, {"a", "b", "c"});
      auto recipients = active_on(topic);
      std::uint64_t seq = next_seq++;
      std::size_t throwers = 0;
      std::vector<std::pair<std::uint64_t, std::vector<const RefSub*>>> deferred;
      for (const auto* r : recipients) {
        expected[r->token].push_back(seq);
        if (r->kind == SubKind::Thrower) ++throwers;
        if (r->kind == SubKind::Relay) deferred.emplace_back(next_seq++, active_on(kRelayTopic));
      }
      for (const auto& [dseq, drecipients] : deferred) {
        for (const auto* r : drecipients) expected[r->token].push_back(dseq);
      }
      auto report = bus.publish(topic, {{"step", step}});
      if (report.seq != seq) fail("step " + std::to_string(step) + ": seq " + std::to_string(report.seq));
      if (report.delivered != recipients.size()) {
        fail("step " + std::to_string(step) + ": delivered " + std::to_string(report.delivered) + ", expected " +
             std::to_string(recipients.size()));
      }
      if (report.failures.size() != throwers) fail("step " + std::to_string(step) + ": failure count");
      if (report.deferred) fail("top-level publish reported deferred");
    }
  }

  for (const auto& s : subs) {
    const auto& got = actual[s.token];
    const auto& want = expected[s.token];
    if (got != want) fail("subscriber " + std::to_string(s.token) + " tally mismatch");
    if (!std::is_sorted(got.begin(), got.end()) || std::adjacent_find(got.begin(), got.end()) != got.end()) {
      fail("subscriber " + std::to_string(s.token) + " saw non-increasing seq");
    }
  }
  if (bus.last_seq() != next_seq - 1) fail("last_seq mismatch");
  return violations;
}

}  // namespace wbtest
