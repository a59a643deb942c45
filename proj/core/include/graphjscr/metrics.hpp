#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "graphjscr/environment.hpp"

namespace graphjscr {

struct ObjectiveConfig {
  double lambda_d = 0.5;
  double lambda_s = 0.5;
  double delay_scale_s = 0.0;  // 0 selects the TTL-bound default

  void validate() const;
  bool operator==(const ObjectiveConfig&) const = default;
};

// TTL hops x (longest +Grid link propagation + relay processing + one chunk
// at the pathloss-only rate of that link).
double default_delay_scale(const Scenario& scenario, const Constellation& constellation);

struct SessionRecord {
  int episode = 0;
  std::uint64_t seed = 0;
  int session_id = -1;
  NodeId src = -1;
  NodeId dst = -1;
  double start_s = 0.0;
  int budget_c = kMaxBudget;
  int chunks = 0;
  int chunks_delivered = 0;
  int relay_events = 0;
  int hops = 0;  // hops of the slowest chunk
  bool delivered = false;
  std::string drop_cause;  // empty when delivered
  double delay_s = 0.0;
  double delay_norm = 1.0;
  double quality = 0.0;
  double cost = 0.0;
};

// Per-session objective term; undelivered sessions count as delay_norm 1 and
// quality 0.
double session_cost(bool delivered, double delay_s, double quality, const ObjectiveConfig& obj,
                    double delay_scale_s);

struct EpisodeMetrics {
  int episode = 0;
  std::uint64_t seed = 0;
  int sessions = 0;
  int delivered_sessions = 0;
  double delivery_rate = 0.0;
  double drop_rate = 0.0;
  std::array<int, 3> drops_by_cause{};  // sessions, by first drop cause
  std::optional<double> mean_delay_s;   // delivered sessions
  double mean_delay_norm = 0.0;
  double mean_quality = 0.0;
  std::optional<double> objective;      // null without sessions
  double mean_reward = 0.0;             // mean per-packet return
  std::int64_t packets_created = 0;
  std::int64_t packets_delivered = 0;
  std::int64_t packets_dropped = 0;
  std::int64_t relay_events = 0;
};

struct MetricsBundle {
  std::string label;
  ObjectiveConfig objective;
  double delay_scale_s = 0.0;
  std::vector<EpisodeMetrics> episodes;
  std::vector<SessionRecord> sessions;
  EpisodeMetrics summary;  // pooled over every session and episode
};

std::vector<SessionRecord> session_records(const EpisodeResult& r, int episode,
                                           const ObjectiveConfig& obj, double delay_scale_s);
EpisodeMetrics summarize(const std::vector<SessionRecord>& sessions, const ObjectiveConfig& obj);

class MetricsBuilder {
 public:
  MetricsBuilder(std::string label, const ObjectiveConfig& obj, double delay_scale_s);
  void add(const EpisodeResult& r);
  const MetricsBundle& bundle() const { return bundle_; }
  MetricsBundle finish();

 private:
  MetricsBundle bundle_;
  double reward_sum_ = 0.0;
};

nlohmann::json to_json(const EpisodeMetrics& m);
nlohmann::json to_json(const MetricsBundle& b);

void write_sessions_csv(std::ostream& os, const std::vector<SessionRecord>& sessions);
std::vector<SessionRecord> read_sessions_csv(std::istream& is);

// Mean session cost; nullopt for an empty list.
std::optional<double> objective_of(const std::vector<SessionRecord>& sessions);

}  // namespace graphjscr
