#include "graphjscr/constellation.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "graphjscr/channel.hpp"

namespace graphjscr {

namespace {

int wrap(int v, int n) { return ((v % n) + n) % n; }

// Shortest signed offset on a ring of n.
int ring_delta(int from, int to, int n) {
  int d = wrap(to - from, n);
  if (d > n / 2) d -= n;
  return d;
}

}  // namespace

void ConstellationConfig::validate() const {
  if (num_planes < 1) throw std::invalid_argument("num_planes must be >= 1");
  if (sats_per_plane < 1) throw std::invalid_argument("sats_per_plane must be >= 1");
  if (!(altitude_km > 0.0)) throw std::invalid_argument("altitude_km must be > 0");
  if (!(inclination_deg >= 0.0 && inclination_deg <= 180.0))
    throw std::invalid_argument("inclination_deg must lie in [0, 180]");
  if (!(earth_radius_km > 0.0)) throw std::invalid_argument("earth_radius_km must be > 0");
  if (!(mu > 0.0)) throw std::invalid_argument("mu must be > 0");
}

const Edge* GraphSnapshot::edge_at(NodeId node, int port) const {
  if (node < 0 || node >= static_cast<int>(out_port.size()) || port < 0 || port >= kNumPorts)
    return nullptr;
  const int idx = out_port[node][port];
  return idx < 0 ? nullptr : &edges[idx];
}

int GraphSnapshot::out_degree(NodeId node) const {
  int deg = 0;
  for (int idx : out_port.at(node)) deg += idx >= 0;
  return deg;
}

Constellation::Constellation(const ConstellationConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  radius_km_ = cfg_.earth_radius_km + cfg_.altitude_km;
  mean_motion_ = std::sqrt(cfg_.mu / (radius_km_ * radius_km_ * radius_km_));
  const double inc = cfg_.inclination_deg * std::numbers::pi / 180.0;
  cos_inc_ = std::cos(inc);
  sin_inc_ = std::sin(inc);

  const int planes = cfg_.num_planes;
  const int per_plane = cfg_.sats_per_plane;
  const int total = planes * per_plane;
  const double two_pi = 2.0 * std::numbers::pi;
  sats_.reserve(total);
  for (int p = 0; p < planes; ++p) {
    for (int s = 0; s < per_plane; ++s) {
      Satellite sat;
      sat.id = p * per_plane + s;
      sat.plane = p;
      sat.slot = s;
      sat.raan_rad = two_pi * p / planes;
      sat.phase_rad = two_pi * s / per_plane + two_pi * cfg_.phasing_factor * p / total;
      sats_.push_back(sat);
    }
  }

  nbrs_.resize(total);
  for (const auto& sat : sats_) {
    for (int port = 0; port < kNumPorts; ++port) {
      if (auto n = neighbor(sat.id, port)) nbrs_[sat.id].emplace_back(port, *n);
    }
  }
}

const Satellite& Constellation::satellite(NodeId id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("unknown satellite id " + std::to_string(id));
  return sats_[id];
}

double Constellation::period_s() const { return 2.0 * std::numbers::pi / mean_motion_; }

SatPosition Constellation::position(NodeId sat_id, double time_s) const {
  const Satellite& sat = satellite(sat_id);
  if (time_s < 0.0) throw std::invalid_argument("time_s must be >= 0");
  const double u = sat.phase_rad + mean_motion_ * time_s;
  const double cu = std::cos(u), su = std::sin(u);
  const double co = std::cos(sat.raan_rad), so = std::sin(sat.raan_rad);
  SatPosition pos;
  pos.sat_id = sat_id;
  pos.time_s = time_s;
  pos.xyz = radius_km_ * Eigen::Vector3d(co * cu - so * su * cos_inc_,
                                         so * cu + co * su * cos_inc_,
                                         su * sin_inc_);
  return pos;
}

double Constellation::distance_km(NodeId a, NodeId b, double time_s) const {
  // Order the operands so d(a,b) and d(b,a) are bit-identical.
  if (b < a) std::swap(a, b);
  return (position(a, time_s).xyz - position(b, time_s).xyz).norm();
}

std::optional<NodeId> Constellation::neighbor(NodeId id, int port) const {
  const Satellite& sat = satellite(id);
  const int planes = cfg_.num_planes;
  const int per_plane = cfg_.sats_per_plane;
  switch (static_cast<Port>(port)) {
    case Port::kIntraNext:
      if (per_plane < 2) return std::nullopt;
      return sat.plane * per_plane + wrap(sat.slot + 1, per_plane);
    case Port::kIntraPrev:
      if (per_plane < 3) return std::nullopt;
      return sat.plane * per_plane + wrap(sat.slot - 1, per_plane);
    case Port::kInterEast:
      if (planes < 2) return std::nullopt;
      return wrap(sat.plane + 1, planes) * per_plane + sat.slot;
    case Port::kInterWest:
      if (planes < 3) return std::nullopt;
      return wrap(sat.plane - 1, planes) * per_plane + sat.slot;
  }
  throw std::out_of_range("port index out of range");
}

std::pair<int, int> Constellation::grid_delta(NodeId a, NodeId b) const {
  const Satellite& sa = satellite(a);
  const Satellite& sb = satellite(b);
  return {ring_delta(sa.plane, sb.plane, cfg_.num_planes),
          ring_delta(sa.slot, sb.slot, cfg_.sats_per_plane)};
}

int Constellation::grid_hops(NodeId a, NodeId b) const {
  auto [dp, ds] = grid_delta(a, b);
  return std::abs(dp) + std::abs(ds);
}

GraphSnapshot Constellation::snapshot(double time_s, ChannelModel* channel) const {
  if (time_s < 0.0) throw std::invalid_argument("time_s must be >= 0");
  GraphSnapshot snap;
  snap.time_s = time_s;
  const int n = size();
  snap.nodes.resize(n);
  snap.out_port.assign(n, {-1, -1, -1, -1});

  std::vector<Eigen::Vector3d> xyz(n);
  for (int i = 0; i < n; ++i) {
    snap.nodes[i] = i;
    xyz[i] = position(i, time_s).xyz;
  }
  if (channel != nullptr) channel->advance_to(time_s);

  for (int i = 0; i < n; ++i) {
    for (const auto& [port, j] : nbrs_[i]) {
      Edge e;
      e.src = i;
      e.dst = j;
      e.port = port;
      e.distance_km = i < j ? (xyz[i] - xyz[j]).norm() : (xyz[j] - xyz[i]).norm();
      if (channel != nullptr) {
        const int key = ChannelModel::edge_key(i, port);
        e.available = channel->available(key);
        e.snr_db = channel->slot_snr_db(key, e.distance_km);
        e.rate_bps = channel->link_rate(e.snr_db);
      } else {
        e.snr_db = std::numeric_limits<double>::infinity();
        e.rate_bps = std::numeric_limits<double>::infinity();
      }
      if (!e.available) continue;
      snap.out_port[i][port] = static_cast<int>(snap.edges.size());
      snap.edges.push_back(e);
    }
  }
  return snap;
}

}  // namespace graphjscr
