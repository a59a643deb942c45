#include "graphjscr/channel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace graphjscr {

void ChannelConfig::validate() const {
  if (!(fast_std_db >= 0.0)) throw std::invalid_argument("fast_std_db must be >= 0");
  if (!(jitter_amplitude_db >= 0.0)) throw std::invalid_argument("jitter_amplitude_db must be >= 0");
  if (!(correlation_horizon_s > 0.0)) throw std::invalid_argument("correlation_horizon_s must be > 0");
  if (!(failure_rate >= 0.0 && failure_rate <= 1.0))
    throw std::invalid_argument("failure_rate must lie in [0, 1]");
  if (!(bandwidth_hz > 0.0)) throw std::invalid_argument("bandwidth_hz must be > 0");
  if (!(reference_distance_km > 0.0)) throw std::invalid_argument("reference_distance_km must be > 0");
  if (!(pathloss_exponent >= 0.0)) throw std::invalid_argument("pathloss_exponent must be >= 0");
}

double shannon_rate_bps(double snr_db, double bandwidth_hz) {
  if (snr_db == -std::numeric_limits<double>::infinity()) return 0.0;
  return bandwidth_hz * std::log2(1.0 + std::pow(10.0, snr_db / 10.0));
}

ChannelModel::ChannelModel(const ChannelConfig& cfg, int num_nodes, double slot_s)
    : cfg_(cfg), slot_s_(slot_s), rng_(cfg.seed) {
  cfg_.validate();
  if (!(slot_s > 0.0)) throw std::invalid_argument("slot length must be > 0");
  if (num_nodes < 0) throw std::invalid_argument("num_nodes must be >= 0");
  ar_coeff_ = std::exp(-slot_s_ / cfg_.correlation_horizon_s);
  // Amplitude is the 3-sigma envelope; the clamp then rarely binds and the
  // autocorrelation stays close to exp(-lag / horizon).
  jitter_std_ = cfg_.jitter_amplitude_db / 3.0;
  const std::size_t keys = static_cast<std::size_t>(num_nodes) * 4;
  jitter_.assign(keys, 0.0);
  fast_.assign(keys, 0.0);
  up_.assign(keys, 1);
  draw_slot(true);
}

std::int64_t ChannelModel::slot_of(double time_s) const {
  if (time_s < 0.0) throw std::invalid_argument("time_s must be >= 0");
  return static_cast<std::int64_t>(std::floor(time_s / slot_s_ + 1e-9));
}

void ChannelModel::draw_slot(bool initial) {
  const double amp = cfg_.jitter_amplitude_db;
  const double innov = jitter_std_ * std::sqrt(1.0 - ar_coeff_ * ar_coeff_);
  for (std::size_t k = 0; k < jitter_.size(); ++k) {
    const double w = normal_(rng_);
    double j = initial ? jitter_std_ * w : ar_coeff_ * jitter_[k] + innov * w;
    jitter_[k] = std::clamp(j, -amp, amp);
    fast_[k] = cfg_.fast_std_db * normal_(rng_);
    up_[k] = uniform_(rng_) >= cfg_.failure_rate ? 1 : 0;
  }
}

void ChannelModel::advance_to(double time_s) {
  const std::int64_t target = slot_of(time_s);
  if (target < slot_) throw std::invalid_argument("channel state cannot be rewound");
  while (slot_ < target) {
    ++slot_;
    draw_slot(false);
  }
}

double ChannelModel::pathloss_snr_db(double distance_km) const {
  if (!(distance_km > 0.0)) throw std::invalid_argument("distance_km must be > 0");
  return cfg_.base_snr_db -
         10.0 * cfg_.pathloss_exponent * std::log10(distance_km / cfg_.reference_distance_km);
}

double ChannelModel::slot_snr_db(int key, double distance_km) const {
  return pathloss_snr_db(distance_km) + jitter_.at(key) + fast_.at(key);
}

double ChannelModel::link_snr(int key, double distance_km, double time_s) {
  if (!(distance_km > 0.0)) throw std::invalid_argument("distance_km must be > 0");
  advance_to(time_s);
  return slot_snr_db(key, distance_km);
}

std::vector<bool> ChannelModel::sample_failures(std::span<const int> keys, double time_s) {
  advance_to(time_s);
  std::vector<bool> flags;
  flags.reserve(keys.size());
  for (int k : keys) flags.push_back(available(k));
  return flags;
}

LinkState ChannelModel::link_state(int src, int port, double distance_km) const {
  const int key = edge_key(src, port);
  LinkState s;
  s.src = src;
  s.port = port;
  s.jitter_db = jitter_.at(key);
  s.snr_db = slot_snr_db(key, distance_km);
  s.rate_bps = link_rate(s.snr_db);
  s.available = available(key);
  return s;
}

}  // namespace graphjscr
