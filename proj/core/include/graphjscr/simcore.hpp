#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <queue>
#include <string_view>
#include <vector>

#include "graphjscr/channel.hpp"
#include "graphjscr/constellation.hpp"
#include "graphjscr/semproxy.hpp"

namespace graphjscr {

inline constexpr double kSpeedOfLightKmS = 299792.458;

using PacketId = std::int64_t;

enum class DropCause : int { kTtlExpired = 0, kQueueOverflow = 1, kNoLink = 2 };
std::string_view to_string(DropCause cause);

struct SimulationConfig {
  double slot_s = 0.1;
  double episode_length_s = 6.0;   // sessions start inside [0, episode_length_s)
  double max_episode_s = 120.0;    // hard stop for draining in-flight packets
  int flows = 2;
  int q_max = 600;
  int ttl_hops = 16;
  int chunk_bytes = 1200;
  double frame_interval_s = 6.0;
  double proc_delay_s = 0.005;
  double source_chunk_interval_s = 0.0005;
  double session_start_window_s = 0.2;

  void validate() const;
  bool operator==(const SimulationConfig&) const = default;
};

// Fluid queue update: serve up to o, then admit up to q_max.
int step_queue(int q_len, int departures, int arrivals, int q_max);
double propagation_delay(double distance_km);
// Throws std::domain_error for a nonpositive rate (dead link).
double transmission_delay(double payload_bytes, double rate_bps);

struct HopDelayRecord {
  NodeId from = -1;
  NodeId to = -1;
  int port = -1;
  double prop_s = 0.0;
  double tx_s = 0.0;
  double queue_s = 0.0;
  double proc_s = 0.0;
  double total_s = 0.0;

  static HopDelayRecord make(double prop, double tx, double queue, double proc);
};

enum class PacketStatus : int { kInFlight = 0, kDelivered = 1, kDropped = 2 };

struct Packet {
  PacketId packet_id = -1;
  int session_id = -1;
  int chunk_index = 0;
  NodeId src = -1;
  NodeId dst = -1;
  int size_bytes = 0;
  int ttl_hops = 0;
  double created_s = 0.0;
  std::vector<NodeId> hop_trace;
  SemanticState sem;
  std::vector<HopDelayRecord> hops;

  NodeId at = -1;
  double arrived_s = 0.0;
  PacketStatus status = PacketStatus::kInFlight;
  std::optional<DropCause> drop_cause;
  double finished_s = 0.0;

  double delay_s() const { return finished_s - created_s; }
};

class PortQueue {
 public:
  enum class Result { kAccepted, kOverflow };

  PortQueue(NodeId node, int port, int capacity);

  Result enqueue(PacketId id);
  PacketId pop();
  PacketId front() const { return packets_.front(); }
  int length() const { return static_cast<int>(packets_.size()); }
  bool empty() const { return packets_.empty(); }
  int capacity() const { return capacity_; }
  NodeId node() const { return node_; }
  int port() const { return port_; }

  bool busy = false;
  bool stalled = false;

 private:
  NodeId node_;
  int port_;
  int capacity_;
  std::deque<PacketId> packets_;
};

struct SessionOutcome {
  int session_id = -1;
  NodeId src = -1;
  NodeId dst = -1;
  double start_s = 0.0;
  int budget_c = kMaxBudget;
  int chunks = 0;
  int chunks_delivered = 0;
  int relay_events = 0;
  bool delivered = false;
  bool resolved = false;
  double end_to_end_delay_s = 0.0;  // slowest chunk, = sum of its hop records
  std::vector<NodeId> path;
  std::vector<HopDelayRecord> hop_records;
  std::optional<DropCause> drop_cause;
  double quality = 0.0;  // mean chunk quality, delivered sessions only
};

// Sum of per-hop totals along the recorded path. Throws for sessions that
// were not delivered.
double end_to_end_delay(const SessionOutcome& session);

struct JointAction {
  int hop = 0;        // port
  int budget_c = kMaxBudget;
  int relay = 0;      // 0 forward, 1 relay processing

  bool operator==(const JointAction&) const = default;
};

enum class EventType : int {
  kSessionStart,
  kChunkInject,
  kArrival,
  kDecisionRequest,
  kForward,
  kProcDone,
  kTxStart,
  kTxDone,
  kPortRetry,
  kDelivered,
  kDropped,
  kSessionDone,
};
std::string_view to_string(EventType type);

struct Event {
  double time_s = 0.0;
  std::uint64_t seq = 0;
  EventType type = EventType::kArrival;
  PacketId packet_id = -1;
  int session_id = -1;
  NodeId node = -1;
  int port = -1;
  std::optional<DropCause> cause;
};

// Per-port queue accounting over one slot. `departures` counts packets that
// were already queued at slot start; `arrivals` counts accepted packets that
// are still queued at slot end. Packets that both arrive and leave inside the
// slot appear in neither.
struct QueueSlotSample {
  NodeId node = -1;
  int port = -1;
  std::int64_t slot = 0;
  int q_start = 0;
  int departures = 0;
  int arrivals = 0;
  int q_end = 0;
};

struct Flow {
  NodeId src = -1;
  NodeId dst = -1;
};

// Single-threaded discrete-event engine for one episode. Events run in
// (time, sequence) order. Whenever a packet reaches the head of a receive
// queue the engine stops and waits for `apply` with a joint action.
class Network {
 public:
  Network(const Constellation& constellation, const ChannelConfig& channel,
          const SimulationConfig& sim, const QualityProxy& proxy);

  const Constellation& constellation() const { return *constellation_; }
  const SimulationConfig& config() const { return sim_; }
  const QualityProxy& proxy() const { return *proxy_; }
  double now() const { return now_; }
  const GraphSnapshot& snapshot() const { return snap_; }
  ChannelModel& channel() { return channel_; }

  int add_session(NodeId src, NodeId dst, double start_s);
  // Flows get one session per frame interval inside the episode window.
  void schedule_flows(const std::vector<Flow>& flows, std::uint64_t seed);

  // Processes events up to until_s. Stops early, with a kDecisionRequest as
  // the last appended event, when a packet needs an action.
  void advance(double until_s, std::vector<Event>& out);
  std::vector<Event> advance(double until_s);

  std::optional<PacketId> pending_decision() const { return pending_; }
  void apply(PacketId id, const JointAction& action);

  bool finished() const;

  const Packet& packet(PacketId id) const { return packets_.at(static_cast<std::size_t>(id)); }
  const std::vector<Packet>& packets() const { return packets_; }
  const PortQueue& port_queue(NodeId node, int port) const {
    return ports_.at(static_cast<std::size_t>(node * kNumPorts + port));
  }
  // True while the session's budget is still open, i.e. the packet is the
  // first chunk of its session and has not been dispatched yet.
  bool is_session_head(PacketId id) const;
  const SessionOutcome& session(int id) const { return sessions_.at(static_cast<std::size_t>(id)); }
  const std::vector<SessionOutcome>& sessions() const { return sessions_; }

  std::int64_t created() const { return created_; }
  std::int64_t delivered() const { return delivered_; }
  std::int64_t dropped() const { return dropped_; }
  std::int64_t in_flight() const { return live_; }
  std::int64_t relay_events() const { return relay_events_; }

  void set_trace(std::ostream* trace) { trace_ = trace; }
  void record_queue_slots(bool on) { record_slots_ = on; }
  // Closes the current slot and returns every recorded sample.
  const std::vector<QueueSlotSample>& queue_slot_samples();

 private:
  struct Scheduled {
    double time_s;
    std::uint64_t seq;
    EventType type;
    PacketId packet_id;
    int session_id;
    NodeId node;
    int port;
    bool operator>(const Scheduled& o) const {
      return time_s != o.time_s ? time_s > o.time_s : seq > o.seq;
    }
  };
  struct SessionState {
    bool budget_set = false;
    int chunks_total = 0;
    int resolved = 0;
    PacketId head = -1;
    std::vector<int> sizes;
    std::vector<PacketId> packets;
    double quality_sum = 0.0;
  };
  struct PendingHop {
    NodeId to = -1;
    int port = -1;
    double proc_s = 0.0;
    bool relayed = false;
  };
  struct PortSlotStats {
    int q_start = 0;
    int departures = 0;
    int arrivals = 0;
    int passthrough = 0;
  };

  void schedule(double t, EventType type, PacketId pid, int sid, NodeId node, int port);
  void emit(std::vector<Event>& out, EventType type, PacketId pid, int sid, NodeId node, int port,
            std::optional<DropCause> cause = std::nullopt);
  void handle(const Scheduled& ev, std::vector<Event>& out);
  void refresh_slot(double t);
  void close_slot();
  PacketId create_packet(int sid, int chunk_index, int size_bytes, double t);
  void arrive(PacketId pid, NodeId node, std::vector<Event>& out);
  void enqueue_send(PacketId pid, NodeId node, int port, std::vector<Event>& out);
  void start_tx(NodeId node, int port, std::vector<Event>& out);
  void finish_packet(PacketId pid, bool delivered, std::optional<DropCause> cause,
                     std::vector<Event>& out);
  PortQueue& port_ref(NodeId node, int port) { return ports_[static_cast<std::size_t>(node * kNumPorts + port)]; }

  const Constellation* constellation_;
  const QualityProxy* proxy_;
  SimulationConfig sim_;
  ChannelModel channel_;
  GraphSnapshot snap_;
  std::int64_t slot_ = 0;
  double now_ = 0.0;
  std::uint64_t seq_ = 0;
  std::priority_queue<Scheduled, std::vector<Scheduled>, std::greater<>> queue_;

  std::vector<Packet> packets_;
  std::vector<PendingHop> pending_hop_;
  std::vector<double> enqueued_at_;
  std::vector<std::int64_t> enqueue_slot_;
  std::vector<SessionOutcome> sessions_;
  std::vector<SessionState> session_state_;
  std::vector<PortQueue> ports_;
  std::vector<std::deque<PacketId>> rx_;
  std::deque<NodeId> ready_;
  std::optional<PacketId> pending_;
  std::vector<Event> deferred_;  // emitted by apply(), flushed by the next advance()

  std::int64_t created_ = 0;
  std::int64_t delivered_ = 0;
  std::int64_t dropped_ = 0;
  std::int64_t live_ = 0;
  std::int64_t relay_events_ = 0;

  std::ostream* trace_ = nullptr;
  bool record_slots_ = false;
  std::vector<PortSlotStats> slot_stats_;
  std::vector<QueueSlotSample> slot_samples_;
};

}  // namespace graphjscr
