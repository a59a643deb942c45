#include "graphjscr/observation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace graphjscr {

namespace {

struct Geometry {
  const Constellation& c;
  double t;
  NodeId dst;
  Eigen::Vector3d dst_xyz;
  double diameter;
  double max_hops;

  Geometry(const Network& net, NodeId destination)
      : c(net.constellation()),
        t(net.snapshot().time_s),
        dst(destination),
        dst_xyz(c.position(destination, t).xyz),
        diameter(2.0 * c.orbit_radius_km()),
        max_hops(std::max(1, c.config().num_planes / 2 + c.config().sats_per_plane / 2)) {}

  double dist_norm(NodeId n) const { return (c.position(n, t).xyz - dst_xyz).norm() / diameter; }
  double hops_norm(NodeId n) const { return c.grid_hops(n, dst) / max_hops; }
};

double queue_fraction(const Network& net, NodeId n, int port) {
  return static_cast<double>(net.port_queue(n, port).length()) / net.config().q_max;
}

double mean_queue(const Network& net, NodeId n) {
  double s = 0.0;
  for (int p = 0; p < kNumPorts; ++p) s += queue_fraction(net, n, p);
  return s / kNumPorts;
}

double max_queue(const Network& net, NodeId n) {
  double m = 0.0;
  for (int p = 0; p < kNumPorts; ++p) m = std::max(m, queue_fraction(net, n, p));
  return m;
}

bool visited(const Packet& pkt, NodeId n) {
  return std::find(pkt.hop_trace.begin(), pkt.hop_trace.end(), n) != pkt.hop_trace.end();
}

const Packet& held_packet(const Network& net, NodeId node, PacketId pid) {
  const Packet& pkt = net.packet(pid);
  if (pkt.at != node || pkt.status != PacketStatus::kInFlight)
    throw std::invalid_argument("packet " + std::to_string(pid) + " is not held at node " +
                                std::to_string(node));
  return pkt;
}

}  // namespace

double normalize_snr(double snr_db) {
  if (std::isnan(snr_db)) return 0.0;
  return std::clamp(snr_db / 30.0, -1.0, 1.0);
}

Eigen::VectorXd Observation::flat() const {
  Eigen::VectorXd v(kDim);
  v << net, pkt, sem;
  return v;
}

HopMask hop_mask(const GraphSnapshot& snap, NodeId node) {
  HopMask m{};
  for (int p = 0; p < kNumPorts; ++p) m[p] = snap.edge_at(node, p) != nullptr;
  return m;
}

Observation observe(const Network& net, NodeId node, PacketId pid) {
  const Packet& pkt = held_packet(net, node, pid);
  const GraphSnapshot& snap = net.snapshot();
  const Geometry geo(net, pkt.dst);
  const double ttl0 = net.config().ttl_hops;

  Observation o;
  o.mask = hop_mask(snap, node);
  for (int p = 0; p < kNumPorts; ++p) {
    const Edge* e = snap.edge_at(node, p);
    if (e == nullptr) continue;
    o.net(3 * p + 0) = 1.0;
    o.net(3 * p + 1) = queue_fraction(net, node, p);
    o.net(3 * p + 2) = snap.out_degree(e->dst) / 4.0;

    o.pkt(4 * p + 0) = geo.dist_norm(e->dst);
    o.pkt(4 * p + 1) = geo.hops_norm(e->dst);
    o.pkt(4 * p + 2) = visited(pkt, e->dst) ? 1.0 : 0.0;
    o.pkt(4 * p + 3) = e->dst == pkt.dst ? 1.0 : 0.0;

    o.sem(p) = normalize_snr(e->snr_db);
  }
  o.net(12) = snap.out_degree(node) / 4.0;
  o.net(13) = mean_queue(net, node);

  const auto& cc = net.constellation().config();
  const auto [dplane, dslot] = net.constellation().grid_delta(node, pkt.dst);
  o.pkt(16) = pkt.ttl_hops / ttl0;
  o.pkt(17) = geo.dist_norm(node);
  o.pkt(18) = geo.hops_norm(node);
  o.pkt(19) = cc.num_planes > 1 ? dplane / std::max(1.0, cc.num_planes / 2.0) : 0.0;
  o.pkt(20) = cc.sats_per_plane > 1 ? dslot / std::max(1.0, cc.sats_per_plane / 2.0) : 0.0;

  const SemanticState& s = pkt.sem;
  o.sem(4) = static_cast<double>(s.budget_c) / kMaxBudget;
  o.sem(5) = std::tanh(s.accum_distortion);
  o.sem(6) = s.hops_since_process / ttl0;
  o.sem(7) = std::isinf(s.min_link_snr_db) && s.min_link_snr_db > 0 ? 1.0 : normalize_snr(s.min_link_snr_db);
  o.sem(8) = s.quant_penalties / ttl0;
  o.sem(9) = net.is_session_head(pid) ? 1.0 : 0.0;
  return o;
}

SubgraphInput build_subgraph(const Network& net, NodeId node, PacketId pid) {
  const Packet& pkt = held_packet(net, node, pid);
  const GraphSnapshot& snap = net.snapshot();
  const Geometry geo(net, pkt.dst);

  SubgraphInput in;
  in.center = node;
  in.members.push_back(node);
  std::array<double, kNumPorts> snr{};
  int count = 1;
  for (int p = 0; p < kNumPorts; ++p) {
    if (const Edge* e = snap.edge_at(node, p)) {
      in.members.push_back(e->dst);
      snr[count - 1] = e->snr_db;
      ++count;
    }
  }
  in.features.setZero(count, kNodeFeatureDim);
  const double budget = static_cast<double>(pkt.sem.budget_c) / kMaxBudget;
  for (int m = 0; m < count; ++m) {
    const NodeId n = in.members[m];
    auto row = in.features.row(m);
    row(0) = m == 0 ? 1.0 : 0.0;
    row(1) = m == 0 ? 0.0 : normalize_snr(snr[m - 1]);
    row(2) = mean_queue(net, n);
    row(3) = max_queue(net, n);
    row(4) = snap.out_degree(n) / 4.0;
    row(5) = geo.dist_norm(n);
    row(6) = geo.hops_norm(n);
    row(7) = n == pkt.dst ? 1.0 : 0.0;
    row(8) = visited(pkt, n) ? 1.0 : 0.0;
    row(9) = budget;
  }
  return in;
}

}  // namespace graphjscr
