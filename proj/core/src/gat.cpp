#include "graphjscr/gat.hpp"

#include <cmath>
#include <stdexcept>

namespace graphjscr {

namespace {

void check_dims(const SubgraphInput& in, ConstMatRef W, ConstVecRef a) {
  if (in.size() < 1) throw std::invalid_argument("subgraph needs at least the center node");
  if (in.feature_dim() != W.rows())
    throw std::invalid_argument("feature dimension does not match the projection matrix");
  if (a.size() != 2 * W.cols()) throw std::invalid_argument("attention vector must have size 2H");
  if (!in.members.empty() && static_cast<int>(in.members.size()) != in.size())
    throw std::invalid_argument("member list and feature rows differ");
}

}  // namespace

GatParams GatParams::glorot(int feature_dim, int hidden_dim, std::mt19937_64& rng) {
  GatParams p;
  const double lw = std::sqrt(6.0 / (feature_dim + hidden_dim));
  const double la = std::sqrt(6.0 / (2 * hidden_dim + 1));
  std::uniform_real_distribution<double> uw(-lw, lw), ua(-la, la);
  p.W.resize(feature_dim, hidden_dim);
  for (int c = 0; c < hidden_dim; ++c)
    for (int r = 0; r < feature_dim; ++r) p.W(r, c) = uw(rng);
  p.a.resize(2 * hidden_dim);
  for (int i = 0; i < 2 * hidden_dim; ++i) p.a(i) = ua(rng);
  return p;
}

void gat_forward(const SubgraphInput& in, ConstMatRef W, ConstVecRef a, double slope, GatCache& c) {
  check_dims(in, W, a);
  const Eigen::Index H = W.cols();
  c.z.noalias() = in.features * W;
  const double center_term = c.z.row(0).dot(a.head(H));
  c.score = (c.z * a.tail(H)).array() + center_term;
  Eigen::VectorXd e = c.score.unaryExpr([slope](double s) { return s > 0.0 ? s : slope * s; });
  const double m = e.maxCoeff();
  c.alpha = (e.array() - m).exp();
  c.alpha /= c.alpha.sum();
  c.pre.noalias() = c.z.transpose() * c.alpha;
  c.h = c.pre.unaryExpr([](double u) { return u > 0.0 ? u : std::expm1(u); });
}

void gat_backward(const SubgraphInput& in, ConstMatRef W, ConstVecRef a, double slope,
                  const GatCache& c, ConstVecRef grad_h, Eigen::Ref<Eigen::MatrixXd> grad_W,
                  Eigen::Ref<Eigen::VectorXd> grad_a) {
  check_dims(in, W, a);
  const Eigen::Index H = W.cols();
  if (grad_h.size() != H) throw std::invalid_argument("upstream gradient must have size H");
  if (c.z.rows() != in.size()) throw std::logic_error("forward cache does not match the input");

  const Eigen::VectorXd g_pre =
      grad_h.array() * c.pre.unaryExpr([](double u) { return u > 0.0 ? 1.0 : std::exp(u); }).array();
  // Aggregation: pre = sum_j alpha_j z_j.
  Eigen::MatrixXd g_z = c.alpha * g_pre.transpose();
  const Eigen::VectorXd g_alpha = c.z * g_pre;
  // Softmax.
  const double mean = c.alpha.dot(g_alpha);
  const Eigen::VectorXd g_e = c.alpha.array() * (g_alpha.array() - mean);
  // LeakyReLU.
  const Eigen::VectorXd g_s =
      g_e.array() * c.score.unaryExpr([slope](double s) { return s > 0.0 ? 1.0 : slope; }).array();
  // score_j = a_c . z_0 + a_n . z_j
  const double g_s_sum = g_s.sum();
  grad_a.head(H) += g_s_sum * c.z.row(0).transpose();
  grad_a.tail(H).noalias() += c.z.transpose() * g_s;
  g_z.row(0) += g_s_sum * a.head(H).transpose();
  g_z.noalias() += g_s * a.tail(H).transpose();
  grad_W.noalias() += in.features.transpose() * g_z;
}

Eigen::VectorXd attention_scores(const SubgraphInput& in, const GatParams& params) {
  GatCache c;
  gat_forward(in, params.W, params.a, params.leaky_slope, c);
  return c.alpha;
}

Eigen::VectorXd embed(const SubgraphInput& in, const GatParams& params) {
  GatCache c;
  gat_forward(in, params.W, params.a, params.leaky_slope, c);
  return c.h;
}

const Eigen::VectorXd& GatEncoder::forward(const SubgraphInput& in) {
  gat_forward(in, params_.W, params_.a, params_.leaky_slope, cache_);
  input_ = in;
  return cache_.h;
}

GatGradients GatEncoder::backward(const Eigen::VectorXd& grad_h) const {
  if (!input_) throw std::logic_error("GatEncoder::backward called before forward");
  GatGradients g;
  g.W = Eigen::MatrixXd::Zero(params_.W.rows(), params_.W.cols());
  g.a = Eigen::VectorXd::Zero(params_.a.size());
  gat_backward(*input_, params_.W, params_.a, params_.leaky_slope, cache_, grad_h, g.W, g.a);
  return g;
}

}  // namespace graphjscr
