#include "graphjscr/environment.hpp"

#include <algorithm>
#include <optional>
#include <stdexcept>

namespace graphjscr {

namespace {

struct Unsettled {
  double prev_dist_km = 0.0;
  double new_dist_km = 0.0;
  double normalizer_km = 0.0;
  double queue_frac = 0.0;
  bool revisited = false;
  std::size_t hops_before = 0;
};

double distance_at(const Constellation& c, NodeId a, NodeId b, double t) {
  return (c.position(a, t).xyz - c.position(b, t).xyz).norm();
}

}  // namespace

void Scenario::validate() const {
  constellation.validate();
  channel.validate();
  sim.validate();
  proxy.validate();
  reward.validate();
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ stream) ^ index);
}

std::vector<Flow> sample_flows(int count, int num_nodes, std::mt19937_64& rng) {
  if (num_nodes < 2) throw std::invalid_argument("flows need at least two nodes");
  if (count < 0) throw std::invalid_argument("flow count must be nonnegative");
  std::vector<Flow> flows;
  flows.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Flow f;
    f.src = std::uniform_int_distribution<int>(0, num_nodes - 1)(rng);
    f.dst = std::uniform_int_distribution<int>(0, num_nodes - 2)(rng);
    if (f.dst >= f.src) ++f.dst;
    flows.push_back(f);
  }
  return flows;
}

std::vector<Flow> episode_flows(std::uint64_t episode_seed, int count, int num_nodes) {
  std::mt19937_64 rng(derive_seed(episode_seed, 3, 0));
  return sample_flows(count, num_nodes, rng);
}

EpisodeResult run_episode(const Scenario& scenario, const Constellation& constellation,
                          const QualityProxy& proxy, std::uint64_t episode_seed, Controller& controller,
                          const EpisodeOptions& opts) {
  if (!(constellation.config() == scenario.constellation))
    throw std::invalid_argument("constellation does not match the scenario");
  ChannelConfig ch = scenario.channel;
  ch.seed = derive_seed(episode_seed, 1, 0);
  Network net(constellation, ch, scenario.sim, proxy);
  net.set_trace(opts.trace);
  net.record_queue_slots(opts.record_queue_slots);

  EpisodeResult res;
  res.seed = episode_seed;
  res.flows = episode_flows(episode_seed, scenario.sim.flows, constellation.size());
  net.schedule_flows(res.flows, derive_seed(episode_seed, 2, 0));
  controller.begin_episode(derive_seed(episode_seed, 4, 0));

  std::vector<std::optional<Unsettled>> unsettled;
  std::vector<char> rewarded;
  auto settle = [&](PacketId pid, StepKind kind) {
    if (static_cast<std::size_t>(pid) >= unsettled.size() || !unsettled[pid]) return;
    const Unsettled u = *unsettled[pid];
    unsettled[pid].reset();
    const Packet& p = net.packet(pid);
    HopOutcome hop;
    hop.prev_dist_km = u.prev_dist_km;
    hop.normalizer_km = u.normalizer_km;
    hop.slot_s = scenario.sim.slot_s;
    hop.revisited = u.revisited;
    hop.queue_frac = u.queue_frac;
    if (p.hops.size() > u.hops_before) {
      hop.new_dist_km = u.new_dist_km;
      hop.delay_s = p.hops.back().total_s;
    } else {
      // Never left the node (queue overflow).
      hop.new_dist_km = u.prev_dist_km;
      hop.queue_frac = 1.0;
    }
    const double prog = progress_reward(hop, scenario.reward);
    std::optional<double> q;
    if (kind == StepKind::kDelivered) q = proxy.quality(p.sem);
    const double r = total_reward(kind, prog, q, scenario.reward);
    res.reward_sum += r;
    controller.on_reward(pid, r, kind != StepKind::kForward);
  };

  std::vector<Event> events;
  while (true) {
    events.clear();
    net.advance(scenario.sim.max_episode_s, events);
    if (opts.on_batch) opts.on_batch(net);
    for (const Event& ev : events) {
      if (ev.type == EventType::kDelivered) settle(ev.packet_id, StepKind::kDelivered);
      else if (ev.type == EventType::kDropped) settle(ev.packet_id, StepKind::kDropped);
      else if (ev.type == EventType::kDecisionRequest) settle(ev.packet_id, StepKind::kForward);
    }
    const std::optional<PacketId> pending = net.pending_decision();
    if (!pending) break;

    const PacketId pid = *pending;
    const Packet& p = net.packet(pid);
    const NodeId node = p.at;
    const JointAction a = controller.decide(net, pid);
    const Edge* e = net.snapshot().edge_at(node, a.hop);
    if (e == nullptr) throw std::logic_error("controller chose an unavailable port");

    if (unsettled.size() <= static_cast<std::size_t>(pid)) {
      unsettled.resize(static_cast<std::size_t>(pid) + 1);
      rewarded.resize(static_cast<std::size_t>(pid) + 1, 0);
    }
    const double t = net.now();
    Unsettled u;
    u.prev_dist_km = distance_at(constellation, node, p.dst, t);
    u.new_dist_km = distance_at(constellation, e->dst, p.dst, t);
    u.normalizer_km = distance_at(constellation, p.src, p.dst, p.created_s);
    u.queue_frac = static_cast<double>(net.port_queue(node, a.hop).length()) / scenario.sim.q_max;
    u.revisited = std::find(p.hop_trace.begin(), p.hop_trace.end(), e->dst) != p.hop_trace.end();
    u.hops_before = p.hops.size();
    unsettled[pid] = u;
    if (!rewarded[pid]) {
      rewarded[pid] = 1;
      ++res.packets_rewarded;
    }
    ++res.decisions;
    net.apply(pid, a);
  }
  controller.end_episode();

  res.sessions = net.sessions();
  res.packets_created = net.created();
  res.packets_delivered = net.delivered();
  res.packets_dropped = net.dropped();
  res.packets_in_flight = net.in_flight();
  res.relay_events = net.relay_events();
  res.end_time_s = net.now();
  for (const Packet& p : net.packets())
    if (p.status == PacketStatus::kDropped && p.drop_cause)
      ++res.drops_by_cause[static_cast<std::size_t>(*p.drop_cause)];
  if (opts.record_queue_slots) res.queue_slots = net.queue_slot_samples();
  return res;
}

}  // namespace graphjscr
