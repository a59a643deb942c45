#pragma once

#include <optional>
#include <random>
#include <unordered_map>
#include <vector>

#include "graphjscr/environment.hpp"
#include "graphjscr/observation.hpp"
#include "graphjscr/policy.hpp"
#include "graphjscr/ppo.hpp"

namespace graphjscr {

// Frozen action overrides applied on top of the policy's choice.
struct PolicyOverrides {
  std::optional<int> source_budget;  // budget C forced when a session opens
  std::optional<int> fixed_budget;   // budget C forced at every decision
  bool disable_relay = false;

  bool any() const { return source_budget || fixed_budget || disable_relay; }
};

PolicyInput make_policy_input(const Network& net, PacketId pid);

// Drives the simulator with the shared policy. With a trainer attached it
// samples actions, assembles per-packet trajectories and runs PPO updates
// whenever the buffer reaches the horizon and again at episode end.
class PolicyController : public Controller {
 public:
  enum class Mode { kSample, kGreedy };

  PolicyController(PolicyNetwork& policy, Mode mode, PpoTrainer* trainer = nullptr,
                   PolicyOverrides overrides = {});

  void begin_episode(std::uint64_t seed) override;
  JointAction decide(const Network& net, PacketId pid) override;
  void on_reward(PacketId pid, double reward, bool done) override;
  void end_episode() override;

  const std::vector<UpdateStats>& episode_updates() const { return updates_; }

 private:
  void maybe_update(bool force);

  PolicyNetwork* policy_;
  Mode mode_;
  PpoTrainer* trainer_;
  PolicyOverrides overrides_;
  std::mt19937_64 rng_;
  std::unordered_map<PacketId, Trajectory> open_;
  std::vector<UpdateStats> updates_;
};

}  // namespace graphjscr
