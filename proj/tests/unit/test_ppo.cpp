#include <doctest.h>

#include <cmath>
#include <random>

#include "graphjscr/ppo.hpp"
#include "oracles.hpp"

using namespace graphjscr;

namespace {

// Advantage as an explicit discounted sum of TD errors up to the episode end.
std::vector<double> gae_by_sum(const std::vector<double>& r, const std::vector<double>& v,
                               const std::vector<bool>& done, double boot, double g, double l) {
  const std::size_t n = r.size();
  std::vector<double> delta(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double next = done[t] ? 0.0 : (t + 1 < n ? v[t + 1] : boot);
    delta[t] = r[t] + g * next - v[t];
  }
  std::vector<double> adv(n);
  for (std::size_t t = 0; t < n; ++t) {
    double s = 0.0, w = 1.0;
    for (std::size_t k = t; k < n; ++k) {
      s += w * delta[k];
      if (done[k]) break;
      w *= g * l;
    }
    adv[t] = s;
  }
  return adv;
}

PolicyDims tiny() {
  PolicyDims d;
  d.gat_hidden = 8;
  d.trunk_width = 16;
  return d;
}

Trajectory rollout(PolicyNetwork& net, std::mt19937_64& rng, int len) {
  std::normal_distribution<double> n(0.0, 1.0);
  Trajectory traj;
  for (int t = 0; t < len; ++t) {
    Transition tr;
    tr.input.obs.resize(net.dims().obs_dim);
    for (int i = 0; i < net.dims().obs_dim; ++i) tr.input.obs(i) = n(rng);
    tr.input.mask = {true, true, t % 2 == 0, true};
    tr.input.graph = oracle::random_subgraph(rng, 4, net.dims().node_feature_dim);
    auto out = net.evaluate(tr.input);
    tr.action = net.sample(out, rng);
    tr.logp = out.joint_logp(tr.action);
    tr.value = out.value;
    tr.reward = n(rng);
    tr.done = t + 1 == len;
    traj.push_back(std::move(tr));
  }
  return traj;
}

}  // namespace

TEST_CASE("GAE matches the discounted TD-error sum") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  std::bernoulli_distribution cut(0.2);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t len = 1 + trial % 30;
    std::vector<double> r(len), v(len);
    std::vector<bool> d(len);
    for (std::size_t t = 0; t < len; ++t) {
      r[t] = n(rng);
      v[t] = n(rng);
      d[t] = cut(rng);
    }
    const double boot = n(rng);
    const double g = 0.99, l = 0.95;
    auto got = compute_gae(r, v, d, boot, g, l);
    auto want = gae_by_sum(r, v, d, boot, g, l);
    for (std::size_t t = 0; t < len; ++t) {
      CHECK(got.advantages[t] == doctest::Approx(want[t]).epsilon(1e-12));
      CHECK(got.returns[t] == doctest::Approx(want[t] + v[t]).epsilon(1e-12));
    }
  }
}

TEST_CASE("GAE limits") {
  std::vector<double> r = {1.0, 2.0, 3.0}, v = {0.5, 0.1, -0.2};
  std::vector<bool> d = {false, false, true};
  auto td = compute_gae(r, v, d, 0.0, 0.0, 0.95);
  for (int t = 0; t < 3; ++t) CHECK(td.advantages[t] == doctest::Approx(r[t] - v[t]));
  // lambda = 1 gives the Monte Carlo return.
  auto mc = compute_gae(r, v, d, 0.0, 0.9, 1.0);
  CHECK(mc.returns[0] == doctest::Approx(1.0 + 0.9 * 2.0 + 0.81 * 3.0));
  CHECK(mc.returns[2] == doctest::Approx(3.0));
  CHECK_THROWS(compute_gae({1.0}, {1.0, 2.0}, {true}, 0.0, 0.9, 0.9));
}

TEST_CASE("clipped surrogate unit cases") {
  CHECK(clipped_surrogate(1.5, 1.0, 0.2) == 1.2);
  CHECK(clipped_surrogate(0.5, -1.0, 0.2) == -0.8);
  CHECK(clipped_surrogate(1.0, 3.0, 0.2) == 3.0);
  CHECK(clipped_surrogate(0.5, 1.0, 0.2) == 0.5);   // pessimistic side is unclipped
  CHECK(clipped_surrogate(1.5, -1.0, 0.2) == -1.5);
}

TEST_CASE("advantage normalization") {
  std::vector<double> a = {1.0, 2.0, 3.0, 10.0};
  normalize_advantages(a);
  double m = 0.0, s = 0.0;
  for (double x : a) m += x;
  m /= 4.0;
  for (double x : a) s += (x - m) * (x - m);
  CHECK(std::abs(m) < 1e-12);
  CHECK(std::sqrt(s / 4.0) == doctest::Approx(1.0).epsilon(1e-6));
  std::vector<double> flat = {2.0, 2.0};
  normalize_advantages(flat);
  CHECK(flat[0] == 0.0);
}

TEST_CASE("gradient norm clipping") {
  Eigen::VectorXd g(2);
  g << 3.0, 4.0;
  CHECK(clip_grad_norm(g, 0.5) == doctest::Approx(5.0));
  CHECK(g.norm() == doctest::Approx(0.5));
  Eigen::VectorXd small(1);
  small << 0.1;
  clip_grad_norm(small, 0.5);
  CHECK(small(0) == 0.1);
}

TEST_CASE("Adam first steps against a hand computation") {
  Adam adam(2, 0.1);
  Eigen::VectorXd th = Eigen::VectorXd::Zero(2), g(2);
  g << 2.0, -0.5;
  adam.step(th, g);
  // Bias-corrected first step moves each coordinate by lr * sign(g).
  CHECK(th(0) == doctest::Approx(-0.1).epsilon(1e-6));
  CHECK(th(1) == doctest::Approx(0.1).epsilon(1e-6));
  Eigen::VectorXd g2(2);
  g2 << 1.0, 1.0;
  adam.step(th, g2);
  const double m = (0.9 * 0.1 * 2.0 + 0.1 * 1.0) / (1 - 0.81);
  const double v = (0.999 * 0.001 * 4.0 + 0.001 * 1.0) / (1 - 0.999 * 0.999);
  CHECK(th(0) == doctest::Approx(-0.1 - 0.1 * m / (std::sqrt(v) + 1e-8)).epsilon(1e-9));
  CHECK(adam.steps() == 2);
}

TEST_CASE("first update starts from unit ratios") {
  std::mt19937_64 rng(2);
  PolicyNetwork net(tiny(), 3);
  PpoConfig cfg;
  cfg.horizon = 40;
  cfg.minibatch = 16;
  PpoTrainer tr(net, cfg, 4);
  for (int i = 0; i < 5; ++i) tr.add(rollout(net, rng, 9));
  CHECK(tr.ready());
  CHECK(tr.buffered() == 45);
  auto st = tr.update();
  CHECK(st.behaviour_ratio_max_dev < 1e-12);
  CHECK(st.first_ratio_max_dev < 1e-6);
  CHECK(st.samples == 45);
  CHECK(st.minibatches == 4 * 3);
  CHECK(tr.buffered() == 0);
  CHECK(tr.updates() == 1);
  CHECK_THROWS_AS(tr.update(), std::logic_error);
}

TEST_CASE("trajectories must terminate") {
  std::mt19937_64 rng(3);
  PolicyNetwork net(tiny(), 3);
  PpoTrainer tr(net, PpoConfig{}, 1);
  auto t = rollout(net, rng, 3);
  t.back().done = false;
  CHECK_THROWS(tr.add(t));
  tr.add({});
  CHECK(tr.buffered() == 0);
}

TEST_CASE("repeated updates raise the log-probability of advantaged actions") {
  std::mt19937_64 rng(5);
  PolicyNetwork net(tiny(), 6);
  PpoConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.minibatch = 8;
  PpoTrainer tr(net, cfg, 7);
  Trajectory base = rollout(net, rng, 2);
  base[0].reward = 0.0;
  base[1].reward = 5.0;  // terminal action is the good one
  const double before = net.evaluate(base[1].input).joint_logp(base[1].action);
  for (int k = 0; k < 30; ++k) {
    // Mix in a bad trajectory so normalized advantages differ in sign.
    Trajectory bad = base;
    bad[1].action.relay = 1 - bad[1].action.relay;
    bad[1].reward = -5.0;
    tr.add(base);
    tr.add(bad);
    tr.update();
  }
  CHECK(net.evaluate(base[1].input).joint_logp(base[1].action) > before);
}

TEST_CASE("ppo config validation") {
  PpoConfig c;
  c.gamma = 1.5;
  CHECK_THROWS(c.validate());
  c = {};
  c.minibatch = 0;
  CHECK_THROWS(c.validate());
}
