#include "graphjscr/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

namespace graphjscr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Live in-links per node.
std::vector<std::vector<const Edge*>> in_edges(const GraphSnapshot& snap) {
  std::vector<std::vector<const Edge*>> in(snap.nodes.size());
  for (const Edge& e : snap.edges) in[static_cast<std::size_t>(e.dst)].push_back(&e);
  return in;
}

JointAction finish(const BaselineSpec& spec, int port) {
  JointAction a;
  a.hop = port;
  a.budget_c = spec.fixed_budget.value_or(kMaxBudget);
  a.relay = spec.fixed_relay.value_or(0);
  return a;
}

// Port towards the geometrically closest neighbour; used when dst is cut off.
int closest_port(const Network& net, NodeId node, NodeId dst) {
  const GraphSnapshot& snap = net.snapshot();
  const Constellation& c = net.constellation();
  const auto target = c.position(dst, snap.time_s).xyz;
  int best = -1;
  double best_d = kInf;
  for (int p = 0; p < kNumPorts; ++p) {
    const Edge* e = snap.edge_at(node, p);
    if (e == nullptr) continue;
    const double d = (c.position(e->dst, snap.time_s).xyz - target).norm();
    if (d < best_d) {
      best_d = d;
      best = p;
    }
  }
  if (best < 0) throw std::logic_error("decision requested at a node without live links");
  return best;
}

}  // namespace

std::string_view to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::kShortestPath: return "shortest_path";
    case BaselineKind::kGreedyQueue: return "greedy_queue";
    case BaselineKind::kRandom: return "random";
    case BaselineKind::kNoSourceC: return "graphjscr_no_sourceC";
    case BaselineKind::kNoRelay: return "graphjscr_no_relay";
  }
  return "?";
}

BaselineKind parse_baseline_kind(std::string_view name) {
  for (BaselineKind k : {BaselineKind::kShortestPath, BaselineKind::kGreedyQueue, BaselineKind::kRandom,
                         BaselineKind::kNoSourceC, BaselineKind::kNoRelay})
    if (to_string(k) == name) return k;
  throw std::invalid_argument("unknown baseline kind '" + std::string(name) + "'");
}

bool needs_policy(BaselineKind kind) {
  return kind == BaselineKind::kNoSourceC || kind == BaselineKind::kNoRelay;
}

void BaselineSpec::validate() const {
  if (fixed_budget && !is_valid_budget(*fixed_budget))
    throw std::invalid_argument("fixed_budget must be one of 64, 96, 128");
  if (fixed_relay && *fixed_relay != 0 && *fixed_relay != 1)
    throw std::invalid_argument("fixed_relay must be 0 or 1");
  if (kind == BaselineKind::kNoRelay && fixed_relay && *fixed_relay != 0)
    throw std::invalid_argument("graphjscr_no_relay cannot fix relay to 1");
}

std::vector<double> delay_to(const GraphSnapshot& snap, NodeId dst) {
  const auto in = in_edges(snap);
  std::vector<double> dist(snap.nodes.size(), kInf);
  using Item = std::pair<double, NodeId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[static_cast<std::size_t>(dst)] = 0.0;
  pq.emplace(0.0, dst);
  while (!pq.empty()) {
    const auto [d, v] = pq.top();
    pq.pop();
    if (d > dist[static_cast<std::size_t>(v)]) continue;
    for (const Edge* e : in[static_cast<std::size_t>(v)]) {
      const double nd = d + propagation_delay(e->distance_km);
      if (nd < dist[static_cast<std::size_t>(e->src)]) {
        dist[static_cast<std::size_t>(e->src)] = nd;
        pq.emplace(nd, e->src);
      }
    }
  }
  return dist;
}

std::vector<int> hops_to(const GraphSnapshot& snap, NodeId dst) {
  const auto in = in_edges(snap);
  std::vector<int> hops(snap.nodes.size(), -1);
  std::queue<NodeId> q;
  hops[static_cast<std::size_t>(dst)] = 0;
  q.push(dst);
  while (!q.empty()) {
    const NodeId v = q.front();
    q.pop();
    for (const Edge* e : in[static_cast<std::size_t>(v)]) {
      if (hops[static_cast<std::size_t>(e->src)] >= 0) continue;
      hops[static_cast<std::size_t>(e->src)] = hops[static_cast<std::size_t>(v)] + 1;
      q.push(e->src);
    }
  }
  return hops;
}

std::optional<int> shortest_path_next_hop(const GraphSnapshot& snap, NodeId current, NodeId dst) {
  if (current == dst) throw std::invalid_argument("current node is the destination");
  const std::vector<double> dist = delay_to(snap, dst);
  std::optional<int> best;
  double best_cost = kInf;
  NodeId best_node = -1;
  for (int p = 0; p < kNumPorts; ++p) {
    const Edge* e = snap.edge_at(current, p);
    if (e == nullptr) continue;
    const double cost = propagation_delay(e->distance_km) + dist[static_cast<std::size_t>(e->dst)];
    if (!std::isfinite(cost)) continue;
    if (!best || cost < best_cost || (cost == best_cost && e->dst < best_node)) {
      best = p;
      best_cost = cost;
      best_node = e->dst;
    }
  }
  return best;
}

JointAction ShortestPathController::decide(const Network& net, PacketId pid) {
  const Packet& p = net.packet(pid);
  const auto port = shortest_path_next_hop(net.snapshot(), p.at, p.dst);
  return finish(spec_, port ? *port : closest_port(net, p.at, p.dst));
}

JointAction GreedyQueueController::decide(const Network& net, PacketId pid) {
  const Packet& p = net.packet(pid);
  const GraphSnapshot& snap = net.snapshot();
  const std::vector<int> hops = hops_to(snap, p.dst);
  const int here = hops[static_cast<std::size_t>(p.at)];
  int best = -1;
  int best_len = std::numeric_limits<int>::max();
  double best_prop = kInf;
  for (int port = 0; port < kNumPorts; ++port) {
    const Edge* e = snap.edge_at(p.at, port);
    if (e == nullptr) continue;
    const int h = hops[static_cast<std::size_t>(e->dst)];
    if (here < 0 || h < 0 || h >= here) continue;
    const int len = net.port_queue(p.at, port).length();
    const double prop = propagation_delay(e->distance_km);
    if (len < best_len || (len == best_len && prop < best_prop)) {
      best = port;
      best_len = len;
      best_prop = prop;
    }
  }
  return finish(spec_, best >= 0 ? best : closest_port(net, p.at, p.dst));
}

JointAction RandomController::decide(const Network& net, PacketId pid) {
  const Packet& p = net.packet(pid);
  std::vector<int> live;
  for (int port = 0; port < kNumPorts; ++port)
    if (net.snapshot().edge_at(p.at, port) != nullptr) live.push_back(port);
  if (live.empty()) throw std::logic_error("decision requested at a node without live links");
  const auto k = std::uniform_int_distribution<std::size_t>(0, live.size() - 1)(rng_);
  return finish(spec_, live[k]);
}

PolicyOverrides ablation_overrides(const BaselineSpec& spec) {
  PolicyOverrides o;
  switch (spec.kind) {
    case BaselineKind::kNoSourceC:
      o.source_budget = spec.fixed_budget.value_or(kMaxBudget);
      if (spec.fixed_relay && *spec.fixed_relay == 0) o.disable_relay = true;
      break;
    case BaselineKind::kNoRelay:
      o.disable_relay = true;
      o.fixed_budget = spec.fixed_budget;
      break;
    default:
      throw std::invalid_argument("baseline kind is not a policy ablation");
  }
  return o;
}

}  // namespace graphjscr
