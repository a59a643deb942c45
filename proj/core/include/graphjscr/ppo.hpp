#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "graphjscr/policy.hpp"

namespace graphjscr {

struct PpoConfig {
  double learning_rate = 5e-5;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  int horizon = 256;
  double clip = 0.2;
  int epochs = 4;
  int minibatch = 128;
  double entropy_coef = 0.05;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
  LossCoefs loss_coefs() const { return {clip, value_coef, entropy_coef}; }
  bool operator==(const PpoConfig&) const = default;
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// Generalized advantage estimation over one contiguous sequence. dones[t]
// cuts the recursion after step t; `bootstrap` is V(s_T) for a sequence that
// ends without a terminal step. Advantages are not normalized here.
GaeResult compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                      const std::vector<bool>& dones, double bootstrap, double gamma, double lambda);

// Zero mean, unit variance in place; left centred only when the spread is 0.
void normalize_advantages(std::vector<double>& adv);

double clipped_surrogate(double ratio, double advantage, double clip);

double clip_grad_norm(Eigen::VectorXd& grad, double max_norm);  // returns the norm before clipping

class Adam {
 public:
  Adam(Eigen::Index n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad);
  std::int64_t steps() const { return t_; }

 private:
  double lr_, b1_, b2_, eps_;
  std::int64_t t_ = 0;
  Eigen::VectorXd m_, v_;
};

struct Transition {
  PolicyInput input;
  ActionIndices action;
  double logp = 0.0;   // behaviour log-prob at collection time
  double value = 0.0;
  double reward = 0.0;
  bool done = false;
};

using Trajectory = std::vector<Transition>;

struct UpdateStats {
  int samples = 0;
  int minibatches = 0;
  double policy_loss = 0.0;   // mean -surrogate
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;     // mean(logp_old - logp) over the last epoch
  double clip_fraction = 0.0;
  double grad_norm = 0.0;     // mean pre-clip norm
  // max |pi_theta / pi_behaviour - 1| before the first step; 0 when every
  // transition was collected with the current parameters.
  double behaviour_ratio_max_dev = 0.0;
  // max |ratio - 1| over the first minibatch of the first epoch.
  double first_ratio_max_dev = 0.0;
};

// Owns the rollout buffer and the optimizer state for one policy.
class PpoTrainer {
 public:
  PpoTrainer(PolicyNetwork& policy, const PpoConfig& cfg, std::uint64_t seed);

  // Only complete trajectories (last step done) are accepted.
  void add(Trajectory traj);
  std::size_t buffered() const { return count_; }
  bool ready() const { return count_ >= static_cast<std::size_t>(cfg_.horizon); }

  // Throws std::logic_error on an empty buffer. Clears the buffer.
  UpdateStats update();

  std::int64_t updates() const { return updates_; }
  const PpoConfig& config() const { return cfg_; }

 private:
  PolicyNetwork* policy_;
  PpoConfig cfg_;
  Adam adam_;
  std::mt19937_64 rng_;
  std::vector<Trajectory> buffer_;
  std::size_t count_ = 0;
  std::int64_t updates_ = 0;
};

}  // namespace graphjscr
