#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace graphjscr {

struct ChannelConfig {
  double fast_std_db = 1.0;
  double jitter_amplitude_db = 2.0;
  double correlation_horizon_s = 2.0;
  double failure_rate = 0.05;
  double base_snr_db = 10.0;
  double reference_distance_km = 4000.0;
  double pathloss_exponent = 2.0;
  double bandwidth_hz = 20e6;
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const ChannelConfig&) const = default;
};

// Snapshot of one directed link in the current slot.
struct LinkState {
  int src = 0;
  int port = 0;
  double jitter_db = 0.0;
  double snr_db = 0.0;
  double rate_bps = 0.0;
  bool available = true;
};

// Shannon rate for a given SNR.
double shannon_rate_bps(double snr_db, double bandwidth_hz);

// Per-link stochastic channel. Time advances in slots; inside a slot every
// link keeps one jitter value, one fast perturbation and one availability
// draw. The slow jitter is a clamped AR(1) process whose autocorrelation
// decays as exp(-lag / correlation_horizon_s).
class ChannelModel {
 public:
  ChannelModel(const ChannelConfig& cfg, int num_nodes, double slot_s);

  static int edge_key(int src, int port) { return src * 4 + port; }

  const ChannelConfig& config() const { return cfg_; }
  double slot_s() const { return slot_s_; }
  std::int64_t current_slot() const { return slot_; }
  std::int64_t slot_of(double time_s) const;

  // Steps the process forward to the slot containing time_s. Rewinding is
  // an error: the RNG stream is consumed in slot order.
  void advance_to(double time_s);

  double pathloss_snr_db(double distance_km) const;
  double jitter_db(int key) const { return jitter_.at(key); }
  double fast_db(int key) const { return fast_.at(key); }
  bool available(int key) const { return up_.at(key) != 0; }

  // Full SNR of a link in the current slot.
  double slot_snr_db(int key, double distance_km) const;
  double link_snr(int key, double distance_km, double time_s);
  double link_rate(double snr_db) const { return shannon_rate_bps(snr_db, cfg_.bandwidth_hz); }
  std::vector<bool> sample_failures(std::span<const int> keys, double time_s);

  LinkState link_state(int src, int port, double distance_km) const;

 private:
  void draw_slot(bool initial);

  ChannelConfig cfg_;
  double slot_s_;
  double ar_coeff_;
  double jitter_std_;
  std::int64_t slot_ = 0;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::vector<double> jitter_;
  std::vector<double> fast_;
  std::vector<std::uint8_t> up_;
};

}  // namespace graphjscr
