#include "graphjscr/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace graphjscr {

void PpoConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("gamma must be in [0, 1]");
  if (gae_lambda < 0.0 || gae_lambda > 1.0) throw std::invalid_argument("gae_lambda must be in [0, 1]");
  if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
  if (!(clip > 0.0)) throw std::invalid_argument("clip must be positive");
  if (epochs < 1) throw std::invalid_argument("epochs must be at least 1");
  if (minibatch < 1) throw std::invalid_argument("minibatch must be at least 1");
  if (entropy_coef < 0.0 || value_coef < 0.0) throw std::invalid_argument("loss coefficients must be nonnegative");
  if (!(max_grad_norm > 0.0)) throw std::invalid_argument("max_grad_norm must be positive");
}

GaeResult compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                      const std::vector<bool>& dones, double bootstrap, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n)
    throw std::invalid_argument("rewards, values and dones must have equal length");
  GaeResult r;
  r.advantages.assign(n, 0.0);
  r.returns.assign(n, 0.0);
  double next_value = bootstrap;
  double next_adv = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double live = dones[i] ? 0.0 : 1.0;
    const double delta = rewards[i] + gamma * next_value * live - values[i];
    next_adv = delta + gamma * lambda * live * next_adv;
    r.advantages[i] = next_adv;
    r.returns[i] = next_adv + values[i];
    next_value = values[i];
  }
  return r;
}

void normalize_advantages(std::vector<double>& adv) {
  if (adv.empty()) return;
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(adv.size());
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / static_cast<double>(adv.size()));
  for (double& a : adv) a = sd > 1e-12 ? (a - mean) / sd : a - mean;
}

double clipped_surrogate(double ratio, double advantage, double clip) {
  return std::min(ratio * advantage, std::clamp(ratio, 1.0 - clip, 1.0 + clip) * advantage);
}

double clip_grad_norm(Eigen::VectorXd& grad, double max_norm) {
  const double norm = grad.norm();
  if (norm > max_norm && norm > 0.0) grad *= max_norm / norm;
  return norm;
}

Adam::Adam(Eigen::Index n, double lr, double beta1, double beta2, double eps)
    : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps), m_(Eigen::VectorXd::Zero(n)), v_(Eigen::VectorXd::Zero(n)) {}

void Adam::step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad) {
  if (grad.size() != m_.size() || theta.size() != m_.size())
    throw std::invalid_argument("Adam: size mismatch");
  ++t_;
  m_ = b1_ * m_ + (1.0 - b1_) * grad;
  v_ = b2_ * v_ + (1.0 - b2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  theta.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

PpoTrainer::PpoTrainer(PolicyNetwork& policy, const PpoConfig& cfg, std::uint64_t seed)
    : policy_(&policy),
      cfg_(cfg),
      adam_(policy.num_params(), cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps),
      rng_(seed) {
  cfg_.validate();
}

void PpoTrainer::add(Trajectory traj) {
  if (traj.empty()) return;
  if (!traj.back().done) throw std::invalid_argument("trajectory must end with a terminal step");
  count_ += traj.size();
  buffer_.push_back(std::move(traj));
}

UpdateStats PpoTrainer::update() {
  if (count_ == 0) throw std::logic_error("PPO update on an empty buffer");
  const LossCoefs coefs = cfg_.loss_coefs();
  UpdateStats st;

  // theta_old := theta. Trajectories that straddled the previous update were
  // partly collected under older parameters, so the behaviour log-probs are
  // refreshed before building targets.
  std::vector<TrainSample> samples;
  samples.reserve(count_);
  for (const Trajectory& traj : buffer_) {
    std::vector<double> rewards, values;
    std::vector<bool> dones;
    const std::size_t first = samples.size();
    for (const Transition& tr : traj) {
      const PolicyOutput out = policy_->evaluate(tr.input);
      TrainSample s;
      s.input = tr.input;
      s.action = tr.action;
      s.logp_old = out.joint_logp(tr.action);
      st.behaviour_ratio_max_dev =
          std::max(st.behaviour_ratio_max_dev, std::abs(std::exp(s.logp_old - tr.logp) - 1.0));
      samples.push_back(std::move(s));
      rewards.push_back(tr.reward);
      values.push_back(out.value);
      dones.push_back(tr.done);
    }
    const GaeResult g = compute_gae(rewards, values, dones, 0.0, cfg_.gamma, cfg_.gae_lambda);
    for (std::size_t i = 0; i < traj.size(); ++i) {
      samples[first + i].advantage = g.advantages[i];
      samples[first + i].ret = g.returns[i];
    }
  }
  {
    std::vector<double> adv(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) adv[i] = samples[i].advantage;
    normalize_advantages(adv);
    for (std::size_t i = 0; i < samples.size(); ++i) samples[i].advantage = adv[i];
  }

  const std::size_t n = samples.size();
  const std::size_t mb = static_cast<std::size_t>(cfg_.minibatch);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Eigen::VectorXd grad(policy_->num_params());
  double pol_sum = 0.0, val_sum = 0.0, ent_sum = 0.0, kl_sum = 0.0, grad_sum = 0.0;
  std::size_t terms = 0, kl_terms = 0, clipped = 0;

  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng_);
    for (std::size_t start = 0; start < n; start += mb) {
      const std::size_t end = std::min(n, start + mb);
      const double w = 1.0 / static_cast<double>(end - start);
      grad.setZero();
      for (std::size_t k = start; k < end; ++k) {
        const TrainSample& s = samples[order[k]];
        const LossTerms t = policy_->sample_loss(s, coefs, w, &grad);
        pol_sum -= t.surrogate;
        val_sum += t.value_loss;
        ent_sum += t.entropy;
        clipped += t.clipped ? 1 : 0;
        ++terms;
        if (epoch == 0 && start == 0)
          st.first_ratio_max_dev = std::max(st.first_ratio_max_dev, std::abs(t.ratio - 1.0));
        if (epoch == cfg_.epochs - 1) {
          kl_sum += s.logp_old - t.logp;
          ++kl_terms;
        }
      }
      grad_sum += clip_grad_norm(grad, cfg_.max_grad_norm);
      adam_.step(policy_->params(), grad);
      ++st.minibatches;
    }
  }

  st.samples = static_cast<int>(n);
  st.policy_loss = pol_sum / static_cast<double>(terms);
  st.value_loss = val_sum / static_cast<double>(terms);
  st.entropy = ent_sum / static_cast<double>(terms);
  st.clip_fraction = static_cast<double>(clipped) / static_cast<double>(terms);
  st.approx_kl = kl_terms > 0 ? kl_sum / static_cast<double>(kl_terms) : 0.0;
  st.grad_norm = grad_sum / st.minibatches;
  buffer_.clear();
  count_ = 0;
  ++updates_;
  return st;
}

}  // namespace graphjscr
