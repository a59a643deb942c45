#include "graphjscr/simcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace graphjscr {

std::string_view to_string(DropCause cause) {
  switch (cause) {
    case DropCause::kTtlExpired: return "ttl_expired";
    case DropCause::kQueueOverflow: return "queue_overflow";
    case DropCause::kNoLink: return "no_link";
  }
  return "unknown";
}

std::string_view to_string(EventType type) {
  switch (type) {
    case EventType::kSessionStart: return "session_start";
    case EventType::kChunkInject: return "chunk_inject";
    case EventType::kArrival: return "arrival";
    case EventType::kDecisionRequest: return "decision_request";
    case EventType::kForward: return "forward";
    case EventType::kProcDone: return "proc_done";
    case EventType::kTxStart: return "tx_start";
    case EventType::kTxDone: return "tx_done";
    case EventType::kPortRetry: return "port_retry";
    case EventType::kDelivered: return "delivered";
    case EventType::kDropped: return "dropped";
    case EventType::kSessionDone: return "session_done";
  }
  return "unknown";
}

void SimulationConfig::validate() const {
  if (!(slot_s > 0.0)) throw std::invalid_argument("slot_s must be > 0");
  if (!(episode_length_s >= 0.0)) throw std::invalid_argument("episode_length_s must be >= 0");
  if (!(max_episode_s > 0.0)) throw std::invalid_argument("max_episode_s must be > 0");
  if (flows < 0) throw std::invalid_argument("flows must be >= 0");
  if (q_max < 1) throw std::invalid_argument("q_max must be >= 1");
  if (ttl_hops < 1) throw std::invalid_argument("ttl_hops must be >= 1");
  if (chunk_bytes < 1) throw std::invalid_argument("chunk_bytes must be >= 1");
  if (!(frame_interval_s > 0.0)) throw std::invalid_argument("frame_interval_s must be > 0");
  if (!(proc_delay_s >= 0.0)) throw std::invalid_argument("proc_delay_s must be >= 0");
  if (!(source_chunk_interval_s >= 0.0))
    throw std::invalid_argument("source_chunk_interval_s must be >= 0");
  if (!(session_start_window_s >= 0.0))
    throw std::invalid_argument("session_start_window_s must be >= 0");
}

int step_queue(int q_len, int departures, int arrivals, int q_max) {
  if (q_len < 0 || departures < 0 || arrivals < 0 || q_max < 0)
    throw std::invalid_argument("queue quantities must be >= 0");
  return std::min(std::max(q_len - departures, 0) + arrivals, q_max);
}

double propagation_delay(double distance_km) {
  if (!(distance_km >= 0.0)) throw std::invalid_argument("distance_km must be >= 0");
  return distance_km / kSpeedOfLightKmS;
}

double transmission_delay(double payload_bytes, double rate_bps) {
  if (!(rate_bps > 0.0)) throw std::domain_error("nonpositive link rate: dead link");
  if (payload_bytes < 0.0) throw std::invalid_argument("payload_bytes must be >= 0");
  return 8.0 * payload_bytes / rate_bps;
}

HopDelayRecord HopDelayRecord::make(double prop, double tx, double queue, double proc) {
  HopDelayRecord r;
  r.prop_s = prop;
  r.tx_s = tx;
  r.queue_s = queue;
  r.proc_s = proc;
  r.total_s = prop + tx + queue + proc;
  return r;
}

double end_to_end_delay(const SessionOutcome& session) {
  if (!session.delivered)
    throw std::invalid_argument("session " + std::to_string(session.session_id) + " was not delivered");
  double total = 0.0;
  for (const auto& h : session.hop_records) total += h.total_s;
  return total;
}

PortQueue::PortQueue(NodeId node, int port, int capacity)
    : node_(node), port_(port), capacity_(capacity) {}

PortQueue::Result PortQueue::enqueue(PacketId id) {
  if (length() >= capacity_) return Result::kOverflow;
  packets_.push_back(id);
  return Result::kAccepted;
}

PacketId PortQueue::pop() {
  PacketId id = packets_.front();
  packets_.pop_front();
  return id;
}

Network::Network(const Constellation& constellation, const ChannelConfig& channel,
                 const SimulationConfig& sim, const QualityProxy& proxy)
    : constellation_(&constellation),
      proxy_(&proxy),
      sim_(sim),
      channel_(channel, constellation.size(), sim.slot_s) {
  sim_.validate();
  const int n = constellation.size();
  ports_.reserve(static_cast<std::size_t>(n) * kNumPorts);
  for (int i = 0; i < n; ++i)
    for (int p = 0; p < kNumPorts; ++p) ports_.emplace_back(i, p, sim_.q_max);
  rx_.resize(n);
  slot_stats_.resize(ports_.size());
  slot_ = channel_.current_slot();
  snap_ = constellation.snapshot(0.0, &channel_);
}

int Network::add_session(NodeId src, NodeId dst, double start_s) {
  constellation_->satellite(src);
  constellation_->satellite(dst);
  if (start_s < now_) throw std::invalid_argument("session cannot start in the past");
  const int sid = static_cast<int>(sessions_.size());
  SessionOutcome o;
  o.session_id = sid;
  o.src = src;
  o.dst = dst;
  o.start_s = start_s;
  sessions_.push_back(o);
  session_state_.emplace_back();
  schedule(start_s, EventType::kSessionStart, -1, sid, src, -1);
  return sid;
}

void Network::schedule_flows(const std::vector<Flow>& flows, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const Flow& f : flows) {
    const double offset = sim_.session_start_window_s * u(rng);
    double t = offset;
    do {
      add_session(f.src, f.dst, t);
      t += sim_.frame_interval_s;
    } while (t < sim_.episode_length_s);
  }
}

void Network::schedule(double t, EventType type, PacketId pid, int sid, NodeId node, int port) {
  queue_.push(Scheduled{t, seq_++, type, pid, sid, node, port});
}

void Network::emit(std::vector<Event>& out, EventType type, PacketId pid, int sid, NodeId node,
                   int port, std::optional<DropCause> cause) {
  Event ev;
  ev.time_s = now_;
  ev.seq = seq_++;
  ev.type = type;
  ev.packet_id = pid;
  ev.session_id = sid;
  ev.node = node;
  ev.port = port;
  ev.cause = cause;
  if (trace_ != nullptr) {
    nlohmann::json j = {{"t", ev.time_s}, {"seq", ev.seq}, {"type", to_string(type)}};
    if (pid >= 0) j["packet"] = pid;
    if (sid >= 0) j["session"] = sid;
    if (node >= 0) j["node"] = node;
    if (port >= 0) j["port"] = port;
    if (cause) j["cause"] = to_string(*cause);
    *trace_ << j.dump() << '\n';
  }
  out.push_back(ev);
}

void Network::refresh_slot(double t) {
  const std::int64_t s = channel_.slot_of(t);
  if (s <= slot_) return;
  if (record_slots_) close_slot();
  slot_ = s;
  snap_ = constellation_->snapshot(static_cast<double>(s) * sim_.slot_s, &channel_);
}

void Network::close_slot() {
  for (std::size_t i = 0; i < ports_.size(); ++i) {
    PortSlotStats& st = slot_stats_[i];
    const PortQueue& q = ports_[i];
    if (st.q_start != 0 || st.departures != 0 || st.arrivals != 0 || q.length() != 0) {
      QueueSlotSample s;
      s.node = q.node();
      s.port = q.port();
      s.slot = slot_;
      s.q_start = st.q_start;
      s.departures = st.departures;
      s.arrivals = st.arrivals - st.passthrough;
      s.q_end = q.length();
      slot_samples_.push_back(s);
    }
    st = PortSlotStats{};
    st.q_start = q.length();
  }
}

const std::vector<QueueSlotSample>& Network::queue_slot_samples() {
  if (record_slots_) close_slot();
  return slot_samples_;
}

PacketId Network::create_packet(int sid, int chunk_index, int size_bytes, double t) {
  const SessionOutcome& o = sessions_[static_cast<std::size_t>(sid)];
  Packet p;
  p.packet_id = static_cast<PacketId>(packets_.size());
  p.session_id = sid;
  p.chunk_index = chunk_index;
  p.src = o.src;
  p.dst = o.dst;
  p.size_bytes = size_bytes;
  p.ttl_hops = sim_.ttl_hops;
  p.created_s = t;
  p.hop_trace = {o.src};
  p.sem.session_id = sid;
  p.sem.budget_c = o.budget_c;
  p.at = o.src;
  p.arrived_s = t;
  packets_.push_back(std::move(p));
  pending_hop_.emplace_back();
  enqueued_at_.push_back(0.0);
  enqueue_slot_.push_back(0);
  session_state_[static_cast<std::size_t>(sid)].packets.push_back(packets_.back().packet_id);
  ++created_;
  ++live_;
  return packets_.back().packet_id;
}

bool Network::is_session_head(PacketId id) const {
  const Packet& p = packet(id);
  return p.chunk_index == 0 && !session_state_[static_cast<std::size_t>(p.session_id)].budget_set;
}

void Network::arrive(PacketId pid, NodeId node, std::vector<Event>& out) {
  Packet& p = packets_[static_cast<std::size_t>(pid)];
  p.at = node;
  p.arrived_s = now_;
  if (node == p.dst) {
    finish_packet(pid, true, std::nullopt, out);
  } else if (p.ttl_hops <= 0) {
    finish_packet(pid, false, DropCause::kTtlExpired, out);
  } else {
    rx_[node].push_back(pid);
    if (rx_[node].size() == 1) ready_.push_back(node);
  }
}

void Network::finish_packet(PacketId pid, bool delivered, std::optional<DropCause> cause,
                            std::vector<Event>& out) {
  Packet& p = packets_[static_cast<std::size_t>(pid)];
  p.status = delivered ? PacketStatus::kDelivered : PacketStatus::kDropped;
  p.drop_cause = cause;
  p.finished_s = now_;
  --live_;
  if (delivered) ++delivered_;
  else ++dropped_;
  emit(out, delivered ? EventType::kDelivered : EventType::kDropped, pid, p.session_id, p.at, -1,
       cause);

  const auto sid = static_cast<std::size_t>(p.session_id);
  SessionOutcome& o = sessions_[sid];
  SessionState& st = session_state_[sid];
  if (!st.budget_set) {
    // The head chunk failed before the budget was chosen: nothing else was sent.
    st.budget_set = true;
    st.chunks_total = 1;
    o.chunks = 1;
  }
  ++st.resolved;
  if (delivered) {
    ++o.chunks_delivered;
    st.quality_sum += proxy_->quality(p.sem);
    double hop_sum = 0.0;
    for (const auto& h : p.hops) hop_sum += h.total_s;
    if (o.chunks_delivered == 1 || hop_sum > o.end_to_end_delay_s) {
      o.end_to_end_delay_s = hop_sum;
      o.path = p.hop_trace;
      o.hop_records = p.hops;
    }
  } else if (!o.drop_cause) {
    o.drop_cause = cause;
  }
  if (st.resolved == st.chunks_total) {
    o.resolved = true;
    o.delivered = o.chunks_delivered == st.chunks_total;
    o.quality = o.delivered ? st.quality_sum / st.chunks_total : 0.0;
    if (!o.delivered) {
      o.end_to_end_delay_s = 0.0;
      o.path.clear();
      o.hop_records.clear();
    }
    emit(out, EventType::kSessionDone, -1, o.session_id, o.dst, -1, o.drop_cause);
  }
}

void Network::enqueue_send(PacketId pid, NodeId node, int port, std::vector<Event>& out) {
  PortQueue& q = port_ref(node, port);
  if (q.enqueue(pid) == PortQueue::Result::kOverflow) {
    finish_packet(pid, false, DropCause::kQueueOverflow, out);
    return;
  }
  enqueued_at_[static_cast<std::size_t>(pid)] = now_;
  enqueue_slot_[static_cast<std::size_t>(pid)] = slot_;
  ++slot_stats_[static_cast<std::size_t>(node * kNumPorts + port)].arrivals;
  if (!q.busy && !q.stalled) start_tx(node, port, out);
}

void Network::start_tx(NodeId node, int port, std::vector<Event>& out) {
  PortQueue& q = port_ref(node, port);
  if (q.empty()) return;
  const Edge* e = snap_.edge_at(node, port);
  if (e == nullptr || !(e->rate_bps > 0.0)) {
    // Link down this slot: hold the head of line until the next slot.
    q.stalled = true;
    schedule(static_cast<double>(slot_ + 1) * sim_.slot_s, EventType::kPortRetry, -1, -1, node, port);
    return;
  }
  const PacketId pid = q.pop();
  auto& stats = slot_stats_[static_cast<std::size_t>(node * kNumPorts + port)];
  if (enqueue_slot_[static_cast<std::size_t>(pid)] < slot_) ++stats.departures;
  else ++stats.passthrough;
  q.busy = true;

  Packet& p = packets_[static_cast<std::size_t>(pid)];
  const PendingHop& h = pending_hop_[static_cast<std::size_t>(pid)];
  const double tx = transmission_delay(p.size_bytes, e->rate_bps);
  const double prop = propagation_delay(e->distance_km);
  const double wait = std::max(0.0, now_ - p.arrived_s - h.proc_s);
  HopDelayRecord r = HopDelayRecord::make(prop, tx, wait, h.proc_s);
  r.from = node;
  r.to = e->dst;
  r.port = port;
  p.hops.push_back(r);
  p.sem = record_hop(p.sem, e->snr_db, proxy_->config());

  emit(out, EventType::kTxStart, pid, p.session_id, node, port);
  schedule(now_ + tx, EventType::kTxDone, -1, -1, node, port);
  schedule(now_ + tx + prop, EventType::kArrival, pid, p.session_id, e->dst, port);
}

void Network::handle(const Scheduled& ev, std::vector<Event>& out) {
  switch (ev.type) {
    case EventType::kSessionStart: {
      const auto sid = static_cast<std::size_t>(ev.session_id);
      SessionOutcome& o = sessions_[sid];
      SessionState& st = session_state_[sid];
      emit(out, EventType::kSessionStart, -1, ev.session_id, o.src, -1);
      if (o.src == o.dst) {
        // Zero-hop session: nothing to decide, the whole payload is local.
        st.budget_set = true;
        st.sizes = packetize(proxy_->config().base_latent_bytes, o.budget_c, sim_.chunk_bytes).chunk_sizes;
        st.chunks_total = static_cast<int>(st.sizes.size());
        o.chunks = st.chunks_total;
        for (int i = 0; i < st.chunks_total; ++i)
          schedule(now_ + i * sim_.source_chunk_interval_s, EventType::kChunkInject, -1,
                   ev.session_id, o.src, i);
        break;
      }
      st.head = create_packet(ev.session_id, 0, sim_.chunk_bytes, now_);
      arrive(st.head, o.src, out);
      break;
    }
    case EventType::kChunkInject: {
      const auto sid = static_cast<std::size_t>(ev.session_id);
      const int idx = ev.port;
      const PacketId pid = create_packet(ev.session_id, idx, session_state_[sid].sizes[static_cast<std::size_t>(idx)], now_);
      emit(out, EventType::kChunkInject, pid, ev.session_id, ev.node, -1);
      arrive(pid, ev.node, out);
      break;
    }
    case EventType::kArrival: {
      Packet& p = packets_[static_cast<std::size_t>(ev.packet_id)];
      p.hop_trace.push_back(ev.node);
      emit(out, EventType::kArrival, ev.packet_id, ev.session_id, ev.node, -1);
      arrive(ev.packet_id, ev.node, out);
      break;
    }
    case EventType::kProcDone:
      emit(out, EventType::kProcDone, ev.packet_id, ev.session_id, ev.node, ev.port);
      enqueue_send(ev.packet_id, ev.node, ev.port, out);
      break;
    case EventType::kTxDone: {
      PortQueue& q = port_ref(ev.node, ev.port);
      q.busy = false;
      emit(out, EventType::kTxDone, -1, -1, ev.node, ev.port);
      if (!q.stalled) start_tx(ev.node, ev.port, out);
      break;
    }
    case EventType::kPortRetry: {
      PortQueue& q = port_ref(ev.node, ev.port);
      q.stalled = false;
      emit(out, EventType::kPortRetry, -1, -1, ev.node, ev.port);
      if (!q.busy) start_tx(ev.node, ev.port, out);
      break;
    }
    default:
      throw std::logic_error("unexpected scheduled event type");
  }
}

void Network::advance(double until_s, std::vector<Event>& out) {
  if (pending_) throw std::logic_error("advance called with an unresolved decision request");
  if (until_s < now_) throw std::invalid_argument("cannot advance into the past");
  out.insert(out.end(), deferred_.begin(), deferred_.end());
  deferred_.clear();
  const double horizon = std::min(until_s, sim_.max_episode_s);
  while (true) {
    while (!ready_.empty()) {
      const NodeId n = ready_.front();
      ready_.pop_front();
      if (rx_[n].empty()) continue;
      const PacketId pid = rx_[n].front();
      if (snap_.out_degree(n) == 0) {
        rx_[n].pop_front();
        finish_packet(pid, false, DropCause::kNoLink, out);
        if (!rx_[n].empty()) ready_.push_back(n);
        continue;
      }
      pending_ = pid;
      emit(out, EventType::kDecisionRequest, pid, packet(pid).session_id, n, -1);
      return;
    }
    if (queue_.empty() || queue_.top().time_s > horizon) {
      if (std::isfinite(horizon) && horizon > now_) {
        now_ = horizon;
        refresh_slot(now_);
      }
      return;
    }
    const Scheduled ev = queue_.top();
    queue_.pop();
    now_ = ev.time_s;
    refresh_slot(now_);
    handle(ev, out);
  }
}

std::vector<Event> Network::advance(double until_s) {
  std::vector<Event> out;
  advance(until_s, out);
  return out;
}

void Network::apply(PacketId id, const JointAction& action) {
  if (!pending_ || *pending_ != id) throw std::logic_error("packet has no pending decision");
  if (action.relay != 0 && action.relay != 1) throw std::invalid_argument("relay must be 0 or 1");
  if (!is_valid_budget(action.budget_c)) throw std::invalid_argument("budget is not in {64, 96, 128}");
  Packet& p = packets_[static_cast<std::size_t>(id)];
  const NodeId n = p.at;
  const Edge* e = snap_.edge_at(n, action.hop);
  if (e == nullptr) throw std::invalid_argument("joint action selects an unavailable port");

  const auto sid = static_cast<std::size_t>(p.session_id);
  SessionState& st = session_state_[sid];
  SessionOutcome& o = sessions_[sid];
  if (is_session_head(id)) {
    st.budget_set = true;
    st.sizes = packetize(proxy_->config().base_latent_bytes, action.budget_c, sim_.chunk_bytes).chunk_sizes;
    if (st.sizes.empty()) st.sizes.push_back(sim_.chunk_bytes);
    st.chunks_total = static_cast<int>(st.sizes.size());
    o.budget_c = action.budget_c;
    o.chunks = st.chunks_total;
    p.size_bytes = st.sizes.front();
    p.sem.budget_c = action.budget_c;
    for (int i = 1; i < st.chunks_total; ++i)
      schedule(o.start_s + i * sim_.source_chunk_interval_s, EventType::kChunkInject, -1,
               p.session_id, o.src, i);
  }

  PendingHop& h = pending_hop_[static_cast<std::size_t>(id)];
  h = PendingHop{};
  h.to = e->dst;
  h.port = action.hop;
  if (action.relay == 1) {
    const int before = p.sem.budget_c;
    p.sem = relay_process(p.sem, RelayMode::kProcess, action.budget_c, proxy_->config());
    if (p.sem.budget_c < before) {
      const std::int64_t scaled =
          (static_cast<std::int64_t>(p.size_bytes) * p.sem.budget_c + before - 1) / before;
      p.size_bytes = static_cast<int>(std::max<std::int64_t>(1, scaled));
    }
    h.proc_s = sim_.proc_delay_s;
    h.relayed = true;
    ++relay_events_;
    ++o.relay_events;
  }
  p.ttl_hops -= 1;

  rx_[n].pop_front();
  if (!rx_[n].empty()) ready_.push_back(n);
  pending_.reset();
  emit(deferred_, EventType::kForward, id, p.session_id, n, action.hop);
  if (h.relayed) schedule(now_ + h.proc_s, EventType::kProcDone, id, p.session_id, n, action.hop);
  else enqueue_send(id, n, action.hop, deferred_);
}

bool Network::finished() const {
  return !pending_ && ready_.empty() && deferred_.empty() &&
         (queue_.empty() || queue_.top().time_s > sim_.max_episode_s);
}

}  // namespace graphjscr
