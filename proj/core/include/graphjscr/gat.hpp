#pragma once

#include <optional>
#include <random>
#include <vector>

#include <Eigen/Core>

namespace graphjscr {

// Relay-aware one-hop subgraph. Row 0 of `features` belongs to the center,
// the remaining rows to its neighbours over live links.
struct SubgraphInput {
  int center = 0;
  std::vector<int> members;
  Eigen::MatrixXd features;  // members x F

  int size() const { return static_cast<int>(features.rows()); }
  int feature_dim() const { return static_cast<int>(features.cols()); }
};

struct GatParams {
  Eigen::MatrixXd W;  // F x H projection
  Eigen::VectorXd a;  // 2H attention vector, [center half | neighbour half]
  double leaky_slope = 0.2;

  static GatParams glorot(int feature_dim, int hidden_dim, std::mt19937_64& rng);
};

using ConstMatRef = Eigen::Ref<const Eigen::MatrixXd>;
using ConstVecRef = Eigen::Ref<const Eigen::VectorXd>;

struct GatCache {
  Eigen::MatrixXd z;      // members x H, projected features
  Eigen::VectorXd score;  // pre-activation a^T [z_c || z_j]
  Eigen::VectorXd alpha;  // attention coefficients
  Eigen::VectorXd pre;    // sum_j alpha_j z_j
  Eigen::VectorXd h;      // ELU(pre)
};

void gat_forward(const SubgraphInput& in, ConstMatRef W, ConstVecRef a, double slope, GatCache& cache);

// Accumulates dL/dW and dL/da into grad_W / grad_a given dL/dh.
void gat_backward(const SubgraphInput& in, ConstMatRef W, ConstVecRef a, double slope,
                  const GatCache& cache, ConstVecRef grad_h, Eigen::Ref<Eigen::MatrixXd> grad_W,
                  Eigen::Ref<Eigen::VectorXd> grad_a);

Eigen::VectorXd attention_scores(const SubgraphInput& in, const GatParams& params);
Eigen::VectorXd embed(const SubgraphInput& in, const GatParams& params);

struct GatGradients {
  Eigen::MatrixXd W;
  Eigen::VectorXd a;
};

// Stateful wrapper: forward() caches what backward() needs.
class GatEncoder {
 public:
  explicit GatEncoder(GatParams params) : params_(std::move(params)) {}

  const GatParams& params() const { return params_; }
  GatParams& params() { return params_; }

  const Eigen::VectorXd& forward(const SubgraphInput& in);
  GatGradients backward(const Eigen::VectorXd& grad_h) const;

 private:
  GatParams params_;
  std::optional<SubgraphInput> input_;
  GatCache cache_;
};

}  // namespace graphjscr
