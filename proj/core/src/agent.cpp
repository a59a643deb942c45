#include "graphjscr/agent.hpp"

#include <stdexcept>

namespace graphjscr {

PolicyInput make_policy_input(const Network& net, PacketId pid) {
  const NodeId node = net.packet(pid).at;
  Observation o = observe(net, node, pid);
  PolicyInput in;
  in.obs = o.flat();
  in.mask = o.mask;
  in.graph = build_subgraph(net, node, pid);
  in.session_head = net.is_session_head(pid);
  return in;
}

PolicyController::PolicyController(PolicyNetwork& policy, Mode mode, PpoTrainer* trainer,
                                   PolicyOverrides overrides)
    : policy_(&policy), mode_(mode), trainer_(trainer), overrides_(overrides) {
  if (overrides_.source_budget && !is_valid_budget(*overrides_.source_budget))
    throw std::invalid_argument("source budget override is not in {64, 96, 128}");
  if (overrides_.fixed_budget && !is_valid_budget(*overrides_.fixed_budget))
    throw std::invalid_argument("fixed budget override is not in {64, 96, 128}");
}

void PolicyController::begin_episode(std::uint64_t seed) {
  rng_.seed(seed);
  open_.clear();
  updates_.clear();
}

JointAction PolicyController::decide(const Network& net, PacketId pid) {
  PolicyInput in = make_policy_input(net, pid);
  const PolicyOutput out = policy_->evaluate(in);
  ActionIndices a = mode_ == Mode::kSample ? policy_->sample(out, rng_) : policy_->greedy(out);
  if (overrides_.fixed_budget) a.budget = budget_index(*overrides_.fixed_budget);
  else if (overrides_.source_budget && in.session_head) a.budget = budget_index(*overrides_.source_budget);
  if (overrides_.disable_relay) a.relay = 0;

  if (trainer_ != nullptr) {
    Transition t;
    t.action = a;
    t.logp = out.joint_logp(a);
    t.value = out.value;
    t.input = std::move(in);
    open_[pid].push_back(std::move(t));
  }
  return a.joint();
}

void PolicyController::on_reward(PacketId pid, double reward, bool done) {
  if (trainer_ == nullptr) return;
  auto it = open_.find(pid);
  if (it == open_.end() || it->second.empty()) return;
  it->second.back().reward = reward;
  if (!done) return;
  it->second.back().done = true;
  trainer_->add(std::move(it->second));
  open_.erase(it);
  maybe_update(false);
}

void PolicyController::end_episode() {
  // Trajectories cut off by the episode cap have no terminal reward.
  open_.clear();
  maybe_update(true);
}

void PolicyController::maybe_update(bool force) {
  if (trainer_ == nullptr) return;
  if (trainer_->ready() || (force && trainer_->buffered() > 0)) updates_.push_back(trainer_->update());
}

}  // namespace graphjscr
