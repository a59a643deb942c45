#include "graphjscr/reward.hpp"

#include <cmath>
#include <stdexcept>

namespace graphjscr {

void RewardConfig::validate() const {
  for (double w : {omega_h, omega_d, omega_q, omega_l, r_succ, r_fail, beta_sem})
    if (!std::isfinite(w) || w < 0.0) throw std::invalid_argument("reward weights must be finite and nonnegative");
}

double progress_reward(const HopOutcome& hop, const RewardConfig& cfg) {
  const double progress =
      hop.normalizer_km > 0.0 ? (hop.prev_dist_km - hop.new_dist_km) / hop.normalizer_km : 0.0;
  const double delay = hop.slot_s > 0.0 ? hop.delay_s / hop.slot_s : 0.0;
  return cfg.omega_h * progress - cfg.omega_d * delay - cfg.omega_q * hop.queue_frac -
         cfg.omega_l * (hop.revisited ? 1.0 : 0.0);
}

double total_reward(StepKind kind, double progress, std::optional<double> quality,
                    const RewardConfig& cfg) {
  switch (kind) {
    case StepKind::kForward:
      return progress;
    case StepKind::kDelivered:
      if (!quality) throw std::invalid_argument("a delivered step needs the chunk quality");
      return progress + cfg.r_succ + cfg.beta_sem * *quality;
    case StepKind::kDropped:
      return progress - cfg.r_fail;
  }
  throw std::invalid_argument("unknown step kind");
}

}  // namespace graphjscr
