#include "graphjscr/policy.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace graphjscr {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr int kCheckpointVersion = 1;

// Masked log-softmax; masked entries get probability 0 and log-prob -inf.
void masked_softmax(const Eigen::VectorXd& logits, const bool* mask, Eigen::VectorXd& p,
                    Eigen::VectorXd& logp) {
  const Eigen::Index n = logits.size();
  double m = kNegInf;
  for (Eigen::Index k = 0; k < n; ++k)
    if (mask == nullptr || mask[k]) m = std::max(m, logits(k));
  if (m == kNegInf) throw std::invalid_argument("every action is masked");
  double z = 0.0;
  for (Eigen::Index k = 0; k < n; ++k)
    if (mask == nullptr || mask[k]) z += std::exp(logits(k) - m);
  const double lz = m + std::log(z);
  p.resize(n);
  logp.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    if (mask == nullptr || mask[k]) {
      logp(k) = logits(k) - lz;
      p(k) = std::exp(logp(k));
    } else {
      logp(k) = kNegInf;
      p(k) = 0.0;
    }
  }
}

double head_entropy(const Eigen::VectorXd& p, const Eigen::VectorXd& logp) {
  double h = 0.0;
  for (Eigen::Index k = 0; k < p.size(); ++k)
    if (p(k) > 0.0) h -= p(k) * logp(k);
  return h;
}

int draw(const Eigen::VectorXd& p, std::mt19937_64& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  int last = -1;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    if (p(k) <= 0.0) continue;
    acc += p(k);
    last = static_cast<int>(k);
    if (u < acc) return last;
  }
  return last;
}

void glorot_fill(Eigen::Ref<Eigen::VectorXd> block, int fan_in, int fan_out, double scale,
                 std::mt19937_64& rng) {
  const double lim = scale * std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> u(-lim, lim);
  for (Eigen::Index i = 0; i < block.size(); ++i) block(i) = u(rng);
}

}  // namespace

JointAction ActionIndices::joint() const {
  return JointAction{hop, kBudgets.at(static_cast<std::size_t>(budget)), relay};
}

double PolicyOutput::joint_logp(const ActionIndices& a) const {
  return logp[kHopHead](a.hop) + logp[kBudgetHead](a.budget) + logp[kRelayHead](a.relay);
}

double PolicyOutput::entropy() const {
  double h = 0.0;
  for (int k = 0; k < 3; ++k) h += head_entropy(probs[k], logp[k]);
  return h;
}

struct PolicyNetwork::Cache {
  GatCache gat;
  Eigen::VectorXd x, a1, a2;
  std::array<Eigen::VectorXd, 3> logits;
  PolicyOutput out;
};

PolicyNetwork::Layout PolicyNetwork::make_layout(const PolicyDims& d) {
  if (d.obs_dim <= 0 || d.node_feature_dim <= 0 || d.gat_hidden <= 0 || d.trunk_width <= 0)
    throw std::invalid_argument("policy dimensions must be positive");
  Layout l{};
  Eigen::Index off = 0;
  auto take = [&off](Eigen::Index n) {
    const Eigen::Index o = off;
    off += n;
    return o;
  };
  const int H = d.gat_hidden, T = d.trunk_width, in = d.obs_dim + d.gat_hidden;
  l.gat_W = take(static_cast<Eigen::Index>(d.node_feature_dim) * H);
  l.gat_a = take(2 * H);
  l.W1 = take(static_cast<Eigen::Index>(T) * in);
  l.b1 = take(T);
  l.W2 = take(static_cast<Eigen::Index>(T) * T);
  l.b2 = take(T);
  for (int h = 0; h < 3; ++h) {
    l.head_W[h] = take(static_cast<Eigen::Index>(kHeadSizes[h]) * T);
    l.head_b[h] = take(kHeadSizes[h]);
  }
  l.Wv = take(T);
  l.bv = take(1);
  l.total = off;
  return l;
}

PolicyNetwork::PolicyNetwork(const PolicyDims& dims, std::uint64_t seed)
    : dims_(dims), layout_(make_layout(dims)), theta_(Eigen::VectorXd::Zero(layout_.total)) {
  std::mt19937_64 rng(seed);
  const int F = dims.node_feature_dim, H = dims.gat_hidden, T = dims.trunk_width;
  glorot_fill(theta_.segment(layout_.gat_W, F * H), F, H, 1.0, rng);
  glorot_fill(theta_.segment(layout_.gat_a, 2 * H), 2 * H, 1, 1.0, rng);
  glorot_fill(theta_.segment(layout_.W1, static_cast<Eigen::Index>(T) * trunk_in()), trunk_in(), T, 1.0, rng);
  glorot_fill(theta_.segment(layout_.W2, static_cast<Eigen::Index>(T) * T), T, T, 1.0, rng);
  // Near-uniform initial action distributions.
  for (int h = 0; h < 3; ++h)
    glorot_fill(theta_.segment(layout_.head_W[h], kHeadSizes[h] * T), T, kHeadSizes[h], 0.01, rng);
  glorot_fill(theta_.segment(layout_.Wv, T), T, 1, 1.0, rng);
}

PolicyNetwork::PolicyNetwork(const PolicyDims& dims, Eigen::VectorXd params)
    : dims_(dims), layout_(make_layout(dims)), theta_(std::move(params)) {
  if (theta_.size() != layout_.total)
    throw std::invalid_argument("parameter vector has " + std::to_string(theta_.size()) +
                                " entries, expected " + std::to_string(layout_.total));
}

GatParams PolicyNetwork::gat_params() const {
  GatParams g;
  g.W = mat(layout_.gat_W, dims_.node_feature_dim, dims_.gat_hidden);
  g.a = vec(layout_.gat_a, 2 * dims_.gat_hidden);
  g.leaky_slope = dims_.leaky_slope;
  return g;
}

void PolicyNetwork::forward(const PolicyInput& in, Cache& c) const {
  if (in.obs.size() != dims_.obs_dim)
    throw std::invalid_argument("observation has size " + std::to_string(in.obs.size()) +
                                ", expected " + std::to_string(dims_.obs_dim));
  const int H = dims_.gat_hidden, T = dims_.trunk_width;
  gat_forward(in.graph, mat(layout_.gat_W, dims_.node_feature_dim, H), vec(layout_.gat_a, 2 * H),
              dims_.leaky_slope, c.gat);
  c.x.resize(trunk_in());
  c.x << in.obs, c.gat.h;
  c.a1 = (mat(layout_.W1, T, trunk_in()) * c.x + vec(layout_.b1, T)).array().tanh();
  c.a2 = (mat(layout_.W2, T, T) * c.a1 + vec(layout_.b2, T)).array().tanh();
  for (int h = 0; h < 3; ++h) {
    c.logits[h] = mat(layout_.head_W[h], kHeadSizes[h], T) * c.a2 + vec(layout_.head_b[h], kHeadSizes[h]);
    masked_softmax(c.logits[h], h == kHopHead ? in.mask.data() : nullptr, c.out.probs[h], c.out.logp[h]);
  }
  c.out.value = vec(layout_.Wv, T).dot(c.a2) + theta_(layout_.bv);
}

PolicyOutput PolicyNetwork::evaluate(const PolicyInput& in) const {
  Cache c;
  forward(in, c);
  return std::move(c.out);
}

ActionIndices PolicyNetwork::sample(const PolicyOutput& out, std::mt19937_64& rng) const {
  ActionIndices a;
  a.hop = draw(out.probs[kHopHead], rng);
  a.budget = draw(out.probs[kBudgetHead], rng);
  a.relay = draw(out.probs[kRelayHead], rng);
  return a;
}

ActionIndices PolicyNetwork::greedy(const PolicyOutput& out) const {
  ActionIndices a;
  out.probs[kHopHead].maxCoeff(&a.hop);
  out.probs[kBudgetHead].maxCoeff(&a.budget);
  out.probs[kRelayHead].maxCoeff(&a.relay);
  return a;
}

LossTerms PolicyNetwork::sample_loss(const TrainSample& s, const LossCoefs& coefs, double weight,
                                     Eigen::VectorXd* grad) const {
  Cache c;
  forward(s.input, c);
  const PolicyOutput& o = c.out;

  LossTerms t;
  t.logp = o.joint_logp(s.action);
  t.ratio = std::exp(t.logp - s.logp_old);
  const double lo = 1.0 - coefs.clip, hi = 1.0 + coefs.clip;
  const double clipped_ratio = std::clamp(t.ratio, lo, hi);
  const double A = s.advantage;
  t.surrogate = std::min(t.ratio * A, clipped_ratio * A);
  t.clipped = (t.ratio > hi && A > 0.0) || (t.ratio < lo && A < 0.0);
  t.value_loss = (o.value - s.ret) * (o.value - s.ret);
  t.entropy = o.entropy();
  t.loss = -t.surrogate + coefs.value_coef * t.value_loss - coefs.entropy_coef * t.entropy;
  if (grad == nullptr) return t;
  if (grad->size() != theta_.size()) throw std::invalid_argument("gradient buffer has the wrong size");

  const int H = dims_.gat_hidden, T = dims_.trunk_width;
  // dLoss/dlogpi of the joint action.
  const double g_logp = t.clipped ? 0.0 : -t.ratio * A;
  const std::array<int, 3> taken = {s.action.hop, s.action.budget, s.action.relay};

  Eigen::VectorXd g_a2 = Eigen::VectorXd::Zero(T);
  for (int h = 0; h < 3; ++h) {
    const Eigen::VectorXd& p = o.probs[h];
    const Eigen::VectorXd& lp = o.logp[h];
    const double ent = head_entropy(p, lp);
    Eigen::VectorXd g_l = Eigen::VectorXd::Zero(kHeadSizes[h]);
    for (int k = 0; k < kHeadSizes[h]; ++k) {
      if (p(k) <= 0.0) continue;
      g_l(k) += g_logp * ((k == taken[h] ? 1.0 : 0.0) - p(k));
      // d(-c_e H)/dl_k = c_e p_k (log p_k + H)
      g_l(k) += coefs.entropy_coef * p(k) * (lp(k) + ent);
    }
    g_l *= weight;
    Eigen::Map<Eigen::MatrixXd> gW(grad->data() + layout_.head_W[h], kHeadSizes[h], T);
    gW.noalias() += g_l * c.a2.transpose();
    grad->segment(layout_.head_b[h], kHeadSizes[h]) += g_l;
    g_a2.noalias() += mat(layout_.head_W[h], kHeadSizes[h], T).transpose() * g_l;
  }
  const double g_v = weight * 2.0 * coefs.value_coef * (o.value - s.ret);
  grad->segment(layout_.Wv, T) += g_v * c.a2;
  (*grad)(layout_.bv) += g_v;
  g_a2 += g_v * vec(layout_.Wv, T);

  const Eigen::VectorXd g_z2 = g_a2.array() * (1.0 - c.a2.array().square());
  Eigen::Map<Eigen::MatrixXd>(grad->data() + layout_.W2, T, T).noalias() += g_z2 * c.a1.transpose();
  grad->segment(layout_.b2, T) += g_z2;
  const Eigen::VectorXd g_a1 = mat(layout_.W2, T, T).transpose() * g_z2;
  const Eigen::VectorXd g_z1 = g_a1.array() * (1.0 - c.a1.array().square());
  Eigen::Map<Eigen::MatrixXd>(grad->data() + layout_.W1, T, trunk_in()).noalias() += g_z1 * c.x.transpose();
  grad->segment(layout_.b1, T) += g_z1;
  const Eigen::VectorXd g_x = mat(layout_.W1, T, trunk_in()).transpose() * g_z1;

  Eigen::Map<Eigen::MatrixXd> gW_gat(grad->data() + layout_.gat_W, dims_.node_feature_dim, H);
  gat_backward(s.input.graph, mat(layout_.gat_W, dims_.node_feature_dim, H), vec(layout_.gat_a, 2 * H),
               dims_.leaky_slope, c.gat, g_x.tail(H), gW_gat, grad->segment(layout_.gat_a, 2 * H));
  return t;
}

nlohmann::json PolicyNetwork::to_json() const {
  return {{"format_version", kCheckpointVersion},
          {"dims",
           {{"obs_dim", dims_.obs_dim},
            {"node_feature_dim", dims_.node_feature_dim},
            {"gat_hidden", dims_.gat_hidden},
            {"trunk_width", dims_.trunk_width},
            {"leaky_slope", dims_.leaky_slope}}},
          {"params", std::vector<double>(theta_.data(), theta_.data() + theta_.size())}};
}

PolicyNetwork PolicyNetwork::from_json(const nlohmann::json& j) {
  if (!j.contains("format_version") || j.at("format_version").get<int>() != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint format version");
  const auto& d = j.at("dims");
  PolicyDims dims;
  dims.obs_dim = d.at("obs_dim").get<int>();
  dims.node_feature_dim = d.at("node_feature_dim").get<int>();
  dims.gat_hidden = d.at("gat_hidden").get<int>();
  dims.trunk_width = d.at("trunk_width").get<int>();
  dims.leaky_slope = d.at("leaky_slope").get<double>();
  const auto p = j.at("params").get<std::vector<double>>();
  return PolicyNetwork(dims, Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size())));
}

}  // namespace graphjscr
