#pragma once

#include <array>

#include <Eigen/Core>

#include "graphjscr/gat.hpp"
#include "graphjscr/simcore.hpp"

namespace graphjscr {

using HopMask = std::array<bool, kNumPorts>;

// Local observation of the packet-holding node, in three blocks.
//
// net (14): per port p = 0..3 [live link, send-queue length / q_max,
//           neighbour out-degree / 4], then [own out-degree / 4,
//           mean own send-queue occupancy].
// pkt (21): per port [neighbour distance to destination / orbit diameter,
//           neighbour grid hops to destination / max grid hops,
//           neighbour already visited, neighbour is destination], then
//           [remaining TTL / initial TTL, own distance to destination,
//           own grid hops to destination, signed plane offset, signed slot
//           offset] with offsets scaled into [-1, 1].
// sem (10): per port link SNR / 30 dB clipped to [-1, 1], then
//           [budget C / 128, tanh(accumulated distortion),
//           hops since last processing / initial TTL, min link SNR so far
//           (same scaling, 1 before the first hop), re-quantizations /
//           initial TTL, 1 if this decision opens the session budget].
//
// Ports without a live link have every per-port entry zeroed.
struct Observation {
  static constexpr int kNetDim = 14;
  static constexpr int kPktDim = 21;
  static constexpr int kSemDim = 10;
  static constexpr int kDim = kNetDim + kPktDim + kSemDim;

  Eigen::VectorXd net = Eigen::VectorXd::Zero(kNetDim);
  Eigen::VectorXd pkt = Eigen::VectorXd::Zero(kPktDim);
  Eigen::VectorXd sem = Eigen::VectorXd::Zero(kSemDim);
  HopMask mask{};

  Eigen::VectorXd flat() const;
};

// Per-member GAT input features (F = 10):
// [is center, SNR of center->member link, member mean queue occupancy,
//  member max queue occupancy, member out-degree / 4, member distance to
//  destination, member grid hops to destination, member is destination,
//  member visited by this packet, packet budget C / 128].
inline constexpr int kNodeFeatureDim = 10;

double normalize_snr(double snr_db);

HopMask hop_mask(const GraphSnapshot& snap, NodeId node);

// Throws std::invalid_argument if the packet is not currently held at `node`.
Observation observe(const Network& net, NodeId node, PacketId pid);
SubgraphInput build_subgraph(const Network& net, NodeId node, PacketId pid);

}  // namespace graphjscr
