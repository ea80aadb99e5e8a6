#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "workbench/catalog.hpp"
#include "workbench/engine.hpp"

namespace wbtest {

using namespace workbench;

inline constexpr const char* kFixtureTask = "engine_attachment_removal";

std::filesystem::path fixture_dir(const std::string& name = "engine");
std::filesystem::path workbench_binary();
std::shared_ptr<const config::Catalog> fixture_catalog();
std::string slurp(const std::filesystem::path& path);

struct RandomCatalogOptions {
  std::size_t parts = 6;
  double edge_probability = 0.35;
  // Edges only reach this many ranks back; keeps large plans sparse.
  std::size_t edge_window = 6;
  bool with_plan = true;
};

// Tools W1, W2, TW1 (torque wrench), E1, S1, S2; parts p0..pN-1 listed in a
// shuffled order with a random acyclic precondition relation; one REMOVE-only
// plan "t" over every part in a random topological order.
struct RandomCatalog {
  std::vector<config::ToolSpec> tools;
  std::vector<config::PartSpec> parts;
  std::vector<config::TaskPlan> plans;
  std::shared_ptr<const config::Catalog> catalog;
};
RandomCatalog random_catalog(std::mt19937_64& rng, const RandomCatalogOptions& options);

using Order = std::vector<std::string>;

// Every linear extension of "each part after its preconditions", by
// straightforward backtracking on the part list.
std::set<Order> topological_orders(const std::vector<config::PartSpec>& parts);

// Every full removal order the engine admits from the all-installed state,
// found by cloning the world at each point and trying to remove each
// remaining part with the tool its condition names.
std::set<Order> engine_removal_orders(std::shared_ptr<const config::Catalog> catalog);

// Canonical text form of a world, usable as a set key.
std::string world_key(const engine::WorldState& world);

// Mostly legal actions drawn from available_actions, mixed with arbitrary
// ones built from catalog ids.
engine::Action random_action(std::mt19937_64& rng, const engine::WorldState& world, double legal_share = 0.7);

// Runs one random subscribe/unsubscribe/publish script against a MessageBus
// and a reference tally model. Returns the number of disagreements; `log`
// gets a description of the first one.
std::size_t run_bus_script(std::mt19937_64& rng, std::size_t steps, std::string* log = nullptr);

}  // namespace wbtest
