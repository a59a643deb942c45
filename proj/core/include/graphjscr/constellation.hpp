#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

namespace graphjscr {

class ChannelModel;

using NodeId = int;

// Port layout of the +Grid: two intra-plane neighbours and the same-slot
// satellites of the two adjacent planes.
enum class Port : int { kIntraNext = 0, kIntraPrev = 1, kInterEast = 2, kInterWest = 3 };
inline constexpr int kNumPorts = 4;

struct ConstellationConfig {
  int num_planes = 10;
  int sats_per_plane = 7;
  double altitude_km = 570.0;
  double inclination_deg = 53.0;
  int phasing_factor = 1;
  double earth_radius_km = 6371.0;
  double mu = 398600.4418;  // km^3/s^2

  void validate() const;
  bool operator==(const ConstellationConfig&) const = default;
};

struct SatPosition {
  NodeId sat_id = 0;
  Eigen::Vector3d xyz = Eigen::Vector3d::Zero();  // ECI, km
  double time_s = 0.0;
};

struct Satellite {
  NodeId id = 0;
  int plane = 0;
  int slot = 0;
  double raan_rad = 0.0;
  double phase_rad = 0.0;  // argument of latitude at t = 0
};

struct Edge {
  NodeId src = 0;
  NodeId dst = 0;
  int port = 0;
  double distance_km = 0.0;
  bool available = true;
  double snr_db = 0.0;   // slot SNR, +inf without a channel model
  double rate_bps = 0.0;
};

// One slot of the time-varying directed ISL graph.
struct GraphSnapshot {
  double time_s = 0.0;
  std::vector<NodeId> nodes;
  std::vector<Edge> edges;  // only available links
  // out_port[node][port] indexes `edges`, or -1 when the port has no live link.
  std::vector<std::array<int, kNumPorts>> out_port;

  const Edge* edge_at(NodeId node, int port) const;
  int out_degree(NodeId node) const;
};

class Constellation {
 public:
  explicit Constellation(const ConstellationConfig& cfg);

  const ConstellationConfig& config() const { return cfg_; }
  int size() const { return static_cast<int>(sats_.size()); }
  const Satellite& satellite(NodeId id) const;
  const std::vector<Satellite>& satellites() const { return sats_; }

  double orbit_radius_km() const { return radius_km_; }
  double mean_motion_rad_s() const { return mean_motion_; }
  double period_s() const;

  SatPosition position(NodeId sat_id, double time_s) const;
  double distance_km(NodeId a, NodeId b, double time_s) const;

  // +Grid neighbour reached through `port`, if that port exists for the
  // configured shape (small planes/shells collapse duplicate neighbours).
  std::optional<NodeId> neighbor(NodeId id, int port) const;
  const std::vector<std::pair<int, NodeId>>& neighbors(NodeId id) const { return nbrs_[id]; }

  // Minimum hop count on the failure-free +Grid torus.
  int grid_hops(NodeId a, NodeId b) const;
  // Signed plane/slot offsets from a to b, wrapped to the shortest direction.
  std::pair<int, int> grid_delta(NodeId a, NodeId b) const;

  // Graph at `time_s` with channel-drawn availability. Without a channel
  // every +Grid link is available.
  GraphSnapshot snapshot(double time_s, ChannelModel* channel = nullptr) const;

 private:
  ConstellationConfig cfg_;
  std::vector<Satellite> sats_;
  std::vector<std::vector<std::pair<int, NodeId>>> nbrs_;
  double radius_km_ = 0.0;
  double mean_motion_ = 0.0;
  double cos_inc_ = 1.0;
  double sin_inc_ = 0.0;
};

}  // namespace graphjscr
