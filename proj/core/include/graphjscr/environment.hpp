#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <vector>

#include "graphjscr/channel.hpp"
#include "graphjscr/constellation.hpp"
#include "graphjscr/reward.hpp"
#include "graphjscr/semproxy.hpp"
#include "graphjscr/simcore.hpp"

namespace graphjscr {

// Everything needed to build an episode except the per-episode seed.
struct Scenario {
  ConstellationConfig constellation;
  ChannelConfig channel;
  SimulationConfig sim;
  QualityProxyConfig proxy;
  RewardConfig reward;

  void validate() const;
};

// splitmix64-style stream separation.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index);

// Uniform source, uniform destination != source. Drawing sequentially makes
// the first k flows of a larger draw identical to a k-flow draw.
std::vector<Flow> sample_flows(int count, int num_nodes, std::mt19937_64& rng);

// Per-episode flow set drawn from the episode seed. Flow sets for the same
// seed are nested across counts.
std::vector<Flow> episode_flows(std::uint64_t episode_seed, int count, int num_nodes);

class Controller {
 public:
  virtual ~Controller() = default;
  virtual void begin_episode(std::uint64_t /*seed*/) {}
  virtual JointAction decide(const Network& net, PacketId pid) = 0;
  // Reward for the packet's most recent decision; `done` marks its last one.
  virtual void on_reward(PacketId /*pid*/, double /*reward*/, bool /*done*/) {}
  virtual void end_episode() {}
};

struct EpisodeOptions {
  std::ostream* trace = nullptr;
  bool record_queue_slots = false;
  // Called after every batch of processed events.
  std::function<void(const Network&)> on_batch;
};

struct EpisodeResult {
  std::uint64_t seed = 0;
  std::vector<Flow> flows;
  std::vector<SessionOutcome> sessions;
  std::int64_t packets_created = 0;
  std::int64_t packets_delivered = 0;
  std::int64_t packets_dropped = 0;
  std::int64_t packets_in_flight = 0;
  std::array<std::int64_t, 3> drops_by_cause{};  // indexed by DropCause
  std::int64_t decisions = 0;
  std::int64_t relay_events = 0;
  double reward_sum = 0.0;
  std::int64_t packets_rewarded = 0;
  double end_time_s = 0.0;
  std::vector<QueueSlotSample> queue_slots;

  double mean_packet_return() const {
    return packets_rewarded > 0 ? reward_sum / static_cast<double>(packets_rewarded) : 0.0;
  }
  bool conserved() const {
    return packets_created == packets_delivered + packets_dropped + packets_in_flight;
  }
};

// Runs one episode to completion. Rewards for a packet's decision are
// settled when the packet next needs a decision, is delivered, or is
// dropped; decisions still unsettled at the episode cap get no reward.
EpisodeResult run_episode(const Scenario& scenario, const Constellation& constellation,
                          const QualityProxy& proxy, std::uint64_t episode_seed, Controller& controller,
                          const EpisodeOptions& opts = {});

}  // namespace graphjscr
