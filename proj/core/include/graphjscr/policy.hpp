#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "graphjscr/gat.hpp"
#include "graphjscr/observation.hpp"
#include "graphjscr/simcore.hpp"

namespace graphjscr {

struct PolicyDims {
  int obs_dim = Observation::kDim;
  int node_feature_dim = kNodeFeatureDim;
  int gat_hidden = 64;
  int trunk_width = 128;
  double leaky_slope = 0.2;

  bool operator==(const PolicyDims&) const = default;
};

enum Head : int { kHopHead = 0, kBudgetHead = 1, kRelayHead = 2 };
inline constexpr std::array<int, 3> kHeadSizes = {kNumPorts, 3, 2};

struct PolicyInput {
  Eigen::VectorXd obs;
  SubgraphInput graph;
  HopMask mask{};
  bool session_head = false;
};

struct ActionIndices {
  int hop = 0;
  int budget = 2;  // index into kBudgets
  int relay = 0;

  JointAction joint() const;
  bool operator==(const ActionIndices&) const = default;
};

struct PolicyOutput {
  std::array<Eigen::VectorXd, 3> probs;
  std::array<Eigen::VectorXd, 3> logp;  // -inf at masked hop ports
  double value = 0.0;

  double joint_logp(const ActionIndices& a) const;  // sum of the three heads
  double entropy() const;  // sum of the three head entropies
};

struct LossCoefs {
  double clip = 0.2;
  double value_coef = 0.5;
  double entropy_coef = 0.05;
};

struct TrainSample {
  PolicyInput input;
  ActionIndices action;
  double logp_old = 0.0;
  double advantage = 0.0;
  double ret = 0.0;
};

struct LossTerms {
  double loss = 0.0;        // -surrogate + c_v * value_loss - c_e * entropy
  double surrogate = 0.0;   // min(r A, clip(r) A)
  double value_loss = 0.0;  // (V - R)^2
  double entropy = 0.0;
  double ratio = 1.0;
  double logp = 0.0;
  bool clipped = false;
};

// GAT encoder + two tanh layers + hop / budget / relay / value heads, with
// all weights in one flat vector.
class PolicyNetwork {
 public:
  PolicyNetwork(const PolicyDims& dims, std::uint64_t seed);
  PolicyNetwork(const PolicyDims& dims, Eigen::VectorXd params);

  const PolicyDims& dims() const { return dims_; }
  const Eigen::VectorXd& params() const { return theta_; }
  Eigen::VectorXd& params() { return theta_; }
  Eigen::Index num_params() const { return theta_.size(); }

  PolicyOutput evaluate(const PolicyInput& in) const;
  GatParams gat_params() const;

  // Draws all three heads in a fixed order.
  ActionIndices sample(const PolicyOutput& out, std::mt19937_64& rng) const;
  ActionIndices greedy(const PolicyOutput& out) const;

  // Per-sample clipped PPO loss. Adds weight * dLoss/dtheta into *grad when
  // grad is non-null. Returned terms are unweighted.
  LossTerms sample_loss(const TrainSample& s, const LossCoefs& coefs, double weight,
                        Eigen::VectorXd* grad) const;

  nlohmann::json to_json() const;
  static PolicyNetwork from_json(const nlohmann::json& j);

 private:
  struct Layout {
    Eigen::Index gat_W, gat_a, W1, b1, W2, b2, head_W[3], head_b[3], Wv, bv, total;
  };
  struct Cache;

  static Layout make_layout(const PolicyDims& d);
  void forward(const PolicyInput& in, Cache& c) const;
  Eigen::Map<const Eigen::MatrixXd> mat(Eigen::Index off, Eigen::Index r, Eigen::Index c) const {
    return {theta_.data() + off, r, c};
  }
  Eigen::Map<const Eigen::VectorXd> vec(Eigen::Index off, Eigen::Index n) const {
    return {theta_.data() + off, n};
  }
  int trunk_in() const { return dims_.obs_dim + dims_.gat_hidden; }

  PolicyDims dims_;
  Layout layout_;
  Eigen::VectorXd theta_;
};

}  // namespace graphjscr
