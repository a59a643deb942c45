#include "graphjscr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace graphjscr {

namespace {

constexpr const char* kSessionColumns =
    "episode,seed,session_id,src,dst,start_s,budget_c,chunks,chunks_delivered,relay_events,hops,"
    "delivered,drop_cause,delay_s,delay_norm,quality,cost";

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

nlohmann::json opt(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

void ObjectiveConfig::validate() const {
  if (lambda_d < 0.0 || lambda_s < 0.0) throw std::invalid_argument("lambda_d and lambda_s must be nonnegative");
  if (std::abs(lambda_d + lambda_s - 1.0) > 1e-9) throw std::invalid_argument("lambda_d + lambda_s must equal 1");
  if (delay_scale_s < 0.0) throw std::invalid_argument("delay_scale_s must be nonnegative");
}

double default_delay_scale(const Scenario& s, const Constellation& c) {
  const GraphSnapshot snap = c.snapshot(0.0);
  double dmax = 0.0;
  for (const Edge& e : snap.edges) dmax = std::max(dmax, e.distance_km);
  const ChannelConfig& ch = s.channel;
  const double snr = dmax > 0.0 ? ch.base_snr_db - 10.0 * ch.pathloss_exponent * std::log10(dmax / ch.reference_distance_km)
                                : ch.base_snr_db;
  const double tx = transmission_delay(s.sim.chunk_bytes, shannon_rate_bps(snr, ch.bandwidth_hz));
  return s.sim.ttl_hops * (propagation_delay(dmax) + s.sim.proc_delay_s + tx);
}

double session_cost(bool delivered, double delay_s, double quality, const ObjectiveConfig& obj,
                    double delay_scale_s) {
  if (!delivered) return obj.lambda_d + obj.lambda_s;
  const double dn = delay_scale_s > 0.0 ? std::min(delay_s / delay_scale_s, 1.0) : 1.0;
  return obj.lambda_d * dn + obj.lambda_s * (1.0 - quality);
}

std::vector<SessionRecord> session_records(const EpisodeResult& r, int episode, const ObjectiveConfig& obj,
                                           double delay_scale_s) {
  std::vector<SessionRecord> out;
  for (const SessionOutcome& o : r.sessions) {
    SessionRecord s;
    s.episode = episode;
    s.seed = r.seed;
    s.session_id = o.session_id;
    s.src = o.src;
    s.dst = o.dst;
    s.start_s = o.start_s;
    s.budget_c = o.budget_c;
    s.chunks = o.chunks;
    s.chunks_delivered = o.chunks_delivered;
    s.relay_events = o.relay_events;
    s.delivered = o.resolved && o.delivered;
    if (s.delivered) {
      s.delay_s = o.end_to_end_delay_s;
      s.hops = static_cast<int>(o.hop_records.size());
      s.delay_norm = delay_scale_s > 0.0 ? std::min(s.delay_s / delay_scale_s, 1.0) : 1.0;
      s.quality = o.quality;
    } else {
      s.drop_cause = o.drop_cause ? std::string(to_string(*o.drop_cause)) : std::string("unresolved");
    }
    s.cost = session_cost(s.delivered, s.delay_s, s.quality, obj, delay_scale_s);
    out.push_back(std::move(s));
  }
  return out;
}

std::optional<double> objective_of(const std::vector<SessionRecord>& sessions) {
  if (sessions.empty()) return std::nullopt;
  double sum = 0.0;
  for (const auto& s : sessions) sum += s.cost;
  return sum / static_cast<double>(sessions.size());
}

EpisodeMetrics summarize(const std::vector<SessionRecord>& sessions, const ObjectiveConfig&) {
  EpisodeMetrics m;
  m.sessions = static_cast<int>(sessions.size());
  double dsum = 0.0, dnsum = 0.0, qsum = 0.0;
  for (const auto& s : sessions) {
    dnsum += s.delay_norm;
    qsum += s.quality;
    if (s.delivered) {
      ++m.delivered_sessions;
      dsum += s.delay_s;
    } else {
      for (int c = 0; c < 3; ++c)
        if (s.drop_cause == to_string(static_cast<DropCause>(c))) ++m.drops_by_cause[c];
    }
  }
  if (m.sessions > 0) {
    m.delivery_rate = static_cast<double>(m.delivered_sessions) / m.sessions;
    m.drop_rate = 1.0 - m.delivery_rate;
    m.mean_delay_norm = dnsum / m.sessions;
    m.mean_quality = qsum / m.sessions;
  }
  if (m.delivered_sessions > 0) m.mean_delay_s = dsum / m.delivered_sessions;
  m.objective = objective_of(sessions);
  return m;
}

MetricsBuilder::MetricsBuilder(std::string label, const ObjectiveConfig& obj, double delay_scale_s) {
  obj.validate();
  bundle_.label = std::move(label);
  bundle_.objective = obj;
  bundle_.delay_scale_s = delay_scale_s;
}

void MetricsBuilder::add(const EpisodeResult& r) {
  const int idx = static_cast<int>(bundle_.episodes.size());
  auto recs = session_records(r, idx, bundle_.objective, bundle_.delay_scale_s);
  EpisodeMetrics m = summarize(recs, bundle_.objective);
  m.episode = idx;
  m.seed = r.seed;
  m.mean_reward = r.mean_packet_return();
  m.packets_created = r.packets_created;
  m.packets_delivered = r.packets_delivered;
  m.packets_dropped = r.packets_dropped;
  m.relay_events = r.relay_events;
  reward_sum_ += m.mean_reward;
  bundle_.episodes.push_back(m);
  bundle_.sessions.insert(bundle_.sessions.end(), recs.begin(), recs.end());
}

MetricsBundle MetricsBuilder::finish() {
  EpisodeMetrics s = summarize(bundle_.sessions, bundle_.objective);
  s.episode = -1;
  for (const auto& e : bundle_.episodes) {
    s.packets_created += e.packets_created;
    s.packets_delivered += e.packets_delivered;
    s.packets_dropped += e.packets_dropped;
    s.relay_events += e.relay_events;
  }
  if (!bundle_.episodes.empty()) s.mean_reward = reward_sum_ / static_cast<double>(bundle_.episodes.size());
  bundle_.summary = s;
  return bundle_;
}

nlohmann::json to_json(const EpisodeMetrics& m) {
  nlohmann::json j;
  j["episode"] = m.episode;
  j["seed"] = m.seed;
  j["sessions"] = m.sessions;
  j["delivered_sessions"] = m.delivered_sessions;
  j["delivery_rate"] = m.delivery_rate;
  j["drop_rate"] = m.drop_rate;
  j["drops_by_cause"] = {{"ttl_expired", m.drops_by_cause[0]},
                         {"queue_overflow", m.drops_by_cause[1]},
                         {"no_link", m.drops_by_cause[2]}};
  j["mean_delay_s"] = opt(m.mean_delay_s);
  j["mean_delay_norm"] = m.mean_delay_norm;
  j["mean_quality"] = m.mean_quality;
  j["objective"] = opt(m.objective);
  j["mean_reward"] = m.mean_reward;
  j["packets_created"] = m.packets_created;
  j["packets_delivered"] = m.packets_delivered;
  j["packets_dropped"] = m.packets_dropped;
  j["relay_events"] = m.relay_events;
  return j;
}

nlohmann::json to_json(const MetricsBundle& b) {
  nlohmann::json j;
  j["label"] = b.label;
  j["lambda_d"] = b.objective.lambda_d;
  j["lambda_s"] = b.objective.lambda_s;
  j["delay_scale_s"] = b.delay_scale_s;
  j["summary"] = to_json(b.summary);
  j["episodes"] = nlohmann::json::array();
  for (const auto& e : b.episodes) j["episodes"].push_back(to_json(e));
  return j;
}

void write_sessions_csv(std::ostream& os, const std::vector<SessionRecord>& sessions) {
  os << kSessionColumns << '\n';
  for (const auto& s : sessions) {
    os << s.episode << ',' << s.seed << ',' << s.session_id << ',' << s.src << ',' << s.dst << ','
       << fmt(s.start_s) << ',' << s.budget_c << ',' << s.chunks << ',' << s.chunks_delivered << ','
       << s.relay_events << ',' << s.hops << ',' << (s.delivered ? 1 : 0) << ',' << s.drop_cause << ','
       << fmt(s.delay_s) << ',' << fmt(s.delay_norm) << ',' << fmt(s.quality) << ',' << fmt(s.cost) << '\n';
  }
}

std::vector<SessionRecord> read_sessions_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kSessionColumns)
    throw std::runtime_error("sessions CSV has an unexpected header");
  std::vector<SessionRecord> out;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 17) throw std::runtime_error("sessions CSV line " + std::to_string(lineno) + ": expected 17 fields");
    SessionRecord s;
    s.episode = std::stoi(f[0]);
    s.seed = std::stoull(f[1]);
    s.session_id = std::stoi(f[2]);
    s.src = std::stoi(f[3]);
    s.dst = std::stoi(f[4]);
    s.start_s = std::stod(f[5]);
    s.budget_c = std::stoi(f[6]);
    s.chunks = std::stoi(f[7]);
    s.chunks_delivered = std::stoi(f[8]);
    s.relay_events = std::stoi(f[9]);
    s.hops = std::stoi(f[10]);
    s.delivered = f[11] == "1";
    s.drop_cause = f[12];
    s.delay_s = std::stod(f[13]);
    s.delay_norm = std::stod(f[14]);
    s.quality = std::stod(f[15]);
    s.cost = std::stod(f[16]);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace graphjscr
