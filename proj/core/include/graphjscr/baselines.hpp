#pragma once

#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "graphjscr/agent.hpp"
#include "graphjscr/environment.hpp"

namespace graphjscr {

enum class BaselineKind { kShortestPath, kGreedyQueue, kRandom, kNoSourceC, kNoRelay };

std::string_view to_string(BaselineKind kind);
BaselineKind parse_baseline_kind(std::string_view name);  // throws std::invalid_argument
bool needs_policy(BaselineKind kind);

struct BaselineSpec {
  BaselineKind kind = BaselineKind::kShortestPath;
  std::optional<int> fixed_budget;  // C in {64, 96, 128}
  std::optional<int> fixed_relay;   // 0 or 1

  void validate() const;
};

// Propagation delay from every node to dst over live links; +inf where dst
// is unreachable.
std::vector<double> delay_to(const GraphSnapshot& snap, NodeId dst);
// Live-link hop count from every node to dst; -1 where unreachable.
std::vector<int> hops_to(const GraphSnapshot& snap, NodeId dst);

// First hop of a minimum-propagation-delay path, ties to the lowest
// neighbour index. nullopt when dst is unreachable (the no_link case).
std::optional<int> shortest_path_next_hop(const GraphSnapshot& snap, NodeId current, NodeId dst);

// Fixed-rule controllers. Budget defaults to 128 and relay to 0 unless the
// BaselineSpec fixes them.
class ShortestPathController : public Controller {
 public:
  explicit ShortestPathController(const BaselineSpec& spec = {}) : spec_(spec) {}
  JointAction decide(const Network& net, PacketId pid) override;

 private:
  BaselineSpec spec_;
};

class GreedyQueueController : public Controller {
 public:
  explicit GreedyQueueController(const BaselineSpec& spec = {}) : spec_(spec) {}
  JointAction decide(const Network& net, PacketId pid) override;

 private:
  BaselineSpec spec_;
};

class RandomController : public Controller {
 public:
  explicit RandomController(const BaselineSpec& spec = {}) : spec_(spec) {}
  void begin_episode(std::uint64_t seed) override { rng_.seed(seed); }
  JointAction decide(const Network& net, PacketId pid) override;

 private:
  BaselineSpec spec_;
  std::mt19937_64 rng_;
};

// Overrides a greedy trained policy is frozen under for the given ablation.
PolicyOverrides ablation_overrides(const BaselineSpec& spec);

}  // namespace graphjscr
