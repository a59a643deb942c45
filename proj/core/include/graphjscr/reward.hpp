#pragma once

#include <optional>

namespace graphjscr {

struct RewardConfig {
  double omega_h = 1.0;  // progress
  double omega_d = 0.2;  // hop delay
  double omega_q = 0.2;  // queue occupancy
  double omega_l = 1.0;  // loop
  double r_succ = 10.0;
  double r_fail = 5.0;
  double beta_sem = 1.0;

  void validate() const;
  bool operator==(const RewardConfig&) const = default;
};

struct HopOutcome {
  double prev_dist_km = 0.0;   // distance to destination before the hop
  double new_dist_km = 0.0;    // distance to destination after the hop
  double normalizer_km = 0.0;  // initial source-destination distance
  double delay_s = 0.0;        // total hop delay
  double slot_s = 0.1;
  double queue_frac = 0.0;     // occupancy of the chosen send queue
  bool revisited = false;
};

double progress_reward(const HopOutcome& hop, const RewardConfig& cfg);

enum class StepKind { kForward, kDelivered, kDropped };

// Delivered steps need the chunk quality; throws std::invalid_argument
// otherwise.
double total_reward(StepKind kind, double progress, std::optional<double> quality,
                    const RewardConfig& cfg);

}  // namespace graphjscr
