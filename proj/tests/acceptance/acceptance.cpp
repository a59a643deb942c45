// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "graphjscr/experiment.hpp"
#include "oracles.hpp"

using namespace graphjscr;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Verdict()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Shortest-path forwarding with random budget and relay choices, so relay
// processing and every budget show up in the delay records.
class MixedController : public Controller {
 public:
  void begin_episode(std::uint64_t seed) override { rng_.seed(seed ^ 0x5eedULL); }
  JointAction decide(const Network& net, PacketId pid) override {
    const Packet& p = net.packet(pid);
    std::uniform_int_distribution<int> b(0, 2), r(0, 1);
    JointAction a{0, kBudgets[static_cast<std::size_t>(b(rng_))], r(rng_)};
    if (auto hop = shortest_path_next_hop(net.snapshot(), p.at, p.dst)) {
      a.hop = *hop;
    } else {
      for (int port = 0; port < kNumPorts; ++port)
        if (net.snapshot().edge_at(p.at, port) != nullptr) {
          a.hop = port;
          break;
        }
    }
    return a;
  }

 private:
  std::mt19937_64 rng_;
};

// ---------------------------------------------------------------------------

Verdict queue_law(const ExperimentConfig& small) {
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<int> cap(1, 700), u(0, 800);
  long mismatches = 0;
  const int cases = 1'000'000;
  for (int i = 0; i < cases; ++i) {
    const int qmax = cap(rng);
    const int q = u(rng) % (qmax + 1), o = u(rng) % 64, z = u(rng) % 96;
    // Unit-by-unit reference: serve, then admit until full.
    int ref = q;
    for (int k = 0; k < o && ref > 0; ++k) --ref;
    for (int k = 0; k < z; ++k)
      if (ref < qmax) ++ref;
    if (step_queue(q, o, z, qmax) != ref) ++mismatches;
  }

  // Congested runs: full payload and four flows. The second setup injects
  // chunks faster than any link drains them into a short queue, so the cap binds.
  long samples = 0, bad = 0, at_cap = 0, overflow = 0;
  for (int q_max : {600, 24}) {
    ExperimentConfig cfg = small;
    cfg.scenario.proxy.base_latent_bytes = QualityProxyConfig{}.base_latent_bytes;
    cfg.scenario.sim.flows = 4;
    cfg.scenario.sim.q_max = q_max;
    if (q_max < 600) cfg.scenario.sim.source_chunk_interval_s = 2e-5;
    const World world(cfg);
    MixedController ctl;
    EpisodeOptions opts;
    opts.record_queue_slots = true;
    for (int e = 0; e < 10; ++e) {
      const EpisodeResult r = world.run(derive_seed(cfg.seed, 100, static_cast<std::uint64_t>(e)), ctl, opts);
      for (const auto& s : r.queue_slots) {
        ++samples;
        if (s.q_end != step_queue(s.q_start, s.departures, s.arrivals, q_max)) ++bad;
        if (s.q_end == q_max) ++at_cap;
      }
      overflow += r.drops_by_cause[static_cast<std::size_t>(DropCause::kQueueOverflow)];
    }
  }
  return {mismatches == 0 && bad == 0 && samples > 0 && at_cap > 0 && overflow > 0,
          fmt("%d random cases, %ld mismatches; %ld simulator slot samples (%ld ending full, %ld overflow drops), "
              "%ld violations",
              cases, mismatches, samples, at_cap, overflow, bad)};
}

Verdict delay_composition(const ExperimentConfig& full) {
  const World world(full);
  MixedController ctl;
  long sessions = 0, packets = 0, negative = 0, off = 0;
  double worst = 0.0;
  for (int e = 0; e < 10; ++e) {
    EpisodeOptions opts;
    opts.on_batch = [&](const Network& net) {
      if (net.pending_decision()) return;  // only the final batch
      for (const Packet& p : net.packets()) {
        if (p.status != PacketStatus::kDelivered) continue;
        ++packets;
        double sum = 0.0;
        for (const auto& h : p.hops) {
          if (h.prop_s < 0 || h.tx_s < 0 || h.queue_s < 0 || h.proc_s < 0) ++negative;
          sum += h.total_s;
        }
        // Clock time spent in the network against the per-hop records.
        worst = std::max(worst, std::abs(sum - p.delay_s()));
      }
      for (const SessionOutcome& s : net.sessions()) {
        if (!s.delivered) continue;
        double slowest = 0.0;
        for (const Packet& p : net.packets())
          if (p.session_id == s.session_id) slowest = std::max(slowest, p.delay_s());
        double sum = 0.0;
        for (const auto& h : s.hop_records) {
          if (h.prop_s < 0 || h.tx_s < 0 || h.queue_s < 0 || h.proc_s < 0) ++negative;
          sum += h.prop_s + h.tx_s + h.queue_s + h.proc_s;
        }
        const double err = std::max(std::abs(sum - s.end_to_end_delay_s), std::abs(slowest - s.end_to_end_delay_s));
        worst = std::max(worst, err);
        if (err > 1e-9) ++off;
      }
    };
    const EpisodeResult r = world.run(derive_seed(full.seed, 101, static_cast<std::uint64_t>(e)), ctl, opts);
    for (const auto& s : r.sessions) sessions += s.delivered ? 1 : 0;
  }
  return {sessions > 0 && off == 0 && negative == 0 && worst <= 1e-9,
          fmt("%ld delivered sessions, %ld delivered packets, max |sum - delay| %.2e s, %ld negative components",
              sessions, packets, worst, negative)};
}

Verdict conservation(const ExperimentConfig& full) {
  const World world(full);
  RandomController random;
  MixedController mixed;
  ShortestPathController sp;
  long batches = 0, violations = 0, created = 0, dropped = 0;
  for (int e = 0; e < 100; ++e) {
    Controller* ctl = e % 3 == 0 ? static_cast<Controller*>(&random)
                                 : (e % 3 == 1 ? static_cast<Controller*>(&mixed) : &sp);
    EpisodeOptions opts;
    opts.on_batch = [&](const Network& net) {
      ++batches;
      if (net.created() != net.delivered() + net.dropped() + net.in_flight()) ++violations;
    };
    const EpisodeResult r = world.run(derive_seed(full.seed, 102, static_cast<std::uint64_t>(e)), *ctl, opts);
    if (!r.conserved()) ++violations;
    created += r.packets_created;
    dropped += r.packets_dropped;
  }
  return {violations == 0 && batches > 0,
          fmt("100 episodes, %ld event batches, %ld packets created (%ld dropped), %ld violations", batches, created,
              dropped, violations)};
}

Verdict gat_correctness(const PolicyDims& dims) {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> members(1, 9);
  double worst_row = 0.0, worst_embed = 0.0, worst_grad = 0.0;
  for (int t = 0; t < 100; ++t) {
    const SubgraphInput in = oracle::random_subgraph(rng, members(rng), dims.node_feature_dim);
    const GatParams p = GatParams::glorot(dims.node_feature_dim, dims.gat_hidden, rng);

    worst_row = std::max(worst_row, std::abs(attention_scores(in, p).sum() - 1.0));
    const auto dense = oracle::dense_gat(in, p.W, p.a, p.leaky_slope);
    const Eigen::VectorXd h = embed(in, p);
    for (int k = 0; k < h.size(); ++k) worst_embed = std::max(worst_embed, std::abs(h(k) - dense.h[k]));

    // Scalar loss w . h with random w.
    Eigen::VectorXd w(dims.gat_hidden);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int k = 0; k < w.size(); ++k) w(k) = n(rng);
    GatEncoder enc(p);
    enc.forward(in);
    const GatGradients g = enc.backward(w);

    const Eigen::Index nw = p.W.size();
    Eigen::VectorXd theta(nw + p.a.size()), analytic(nw + p.a.size());
    theta << Eigen::Map<const Eigen::VectorXd>(p.W.data(), nw), p.a;
    analytic << Eigen::Map<const Eigen::VectorXd>(g.W.data(), nw), g.a;
    auto loss = [&](const Eigen::VectorXd& x) {
      const Eigen::MatrixXd W = Eigen::Map<const Eigen::MatrixXd>(x.data(), p.W.rows(), p.W.cols());
      const auto d = oracle::dense_gat(in, W, x.tail(p.a.size()), p.leaky_slope);
      double s = 0.0;
      for (int k = 0; k < w.size(); ++k) s += w(k) * d.h[k];
      return s;
    };
    worst_grad = std::max(worst_grad, oracle::rel_error(analytic, oracle::central_diff(loss, theta, 1e-6)));
  }
  return {worst_row <= 1e-12 && worst_embed <= 1e-10 && worst_grad <= 1e-4,
          fmt("100 instances (F=%d, H=%d): max |row sum - 1| %.1e, max embed error %.1e, max grad rel error %.1e",
              dims.node_feature_dim, dims.gat_hidden, worst_row, worst_embed, worst_grad)};
}

Verdict ppo_mechanics(const ExperimentConfig& small) {
  // Ratios straight after a real rollout.
  const World world(small);
  PolicyNetwork policy = initial_policy(small);
  PpoTrainer trainer(policy, small.ppo, derive_seed(small.seed, 31, 0));
  PolicyController ctl(policy, PolicyController::Mode::kSample, &trainer);
  std::vector<UpdateStats> updates;
  for (int e = 0; e < 3; ++e) {
    world.run(train_episode_seed(small.seed, e), ctl);
    updates.insert(updates.end(), ctl.episode_updates().begin(), ctl.episode_updates().end());
  }
  double first_mb = 0.0;
  long samples = 0;
  for (const auto& u : updates) {
    first_mb = std::max(first_mb, u.first_ratio_max_dev);
    samples += u.samples;
  }
  const double fresh = updates.empty() ? 1.0 : updates.front().behaviour_ratio_max_dev;
  const bool ratios_ok = !updates.empty() && fresh <= 1e-6 && first_mb <= 1e-6;

  const bool unit_ok = clipped_surrogate(1.5, 1.0, 0.2) == 1.2 && clipped_surrogate(0.5, -1.0, 0.2) == -0.8;

  // Full loss on a width-16 network, all three clip branches.
  PolicyDims d = small.model;
  d.gat_hidden = 16;
  d.trunk_width = 16;
  std::mt19937_64 rng(16);
  std::normal_distribution<double> n(0.0, 1.0);
  std::bernoulli_distribution coin(0.6);
  double worst = 0.0;
  for (int t = 0; t < 9; ++t) {
    PolicyNetwork net(d, 200 + static_cast<std::uint64_t>(t));
    for (Eigen::Index i = 0; i < net.num_params(); ++i) net.params()(i) = 0.4 * n(rng);
    TrainSample s;
    s.input.obs.resize(d.obs_dim);
    for (int i = 0; i < d.obs_dim; ++i) s.input.obs(i) = n(rng);
    int live = 0;
    for (auto& m : s.input.mask) live += (m = coin(rng)) ? 1 : 0;
    if (live == 0) s.input.mask[1] = true, live = 1;
    s.input.graph = oracle::random_subgraph(rng, 1 + live, d.node_feature_dim);
    s.input.session_head = t % 2 == 0;
    const auto out = net.evaluate(s.input);
    s.action = net.sample(out, rng);
    const double shift[] = {0.05, -0.6, 0.6};
    s.logp_old = out.joint_logp(s.action) + shift[t % 3];
    s.advantage = t % 2 == 0 ? 1.1 : -0.9;
    s.ret = 0.3;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(net.num_params());
    net.sample_loss(s, small.ppo.loss_coefs(), 1.0, &grad);
    PolicyNetwork probe = net;
    auto loss = [&](const Eigen::VectorXd& x) {
      probe.params() = x;
      return probe.sample_loss(s, small.ppo.loss_coefs(), 1.0, nullptr).loss;
    };
    worst = std::max(worst, oracle::rel_error(grad, oracle::central_diff(loss, net.params(), 1e-6)));
  }
  return {ratios_ok && unit_ok && worst <= 1e-3,
          fmt("%zu updates over %ld samples: fresh-rollout max |r-1| %.1e, first-minibatch max |r-1| %.1e; "
              "surrogate cases %s; width-16 loss grad rel error %.1e",
              updates.size(), samples, fresh, first_mb, unit_ok ? "exact" : "WRONG", worst)};
}

Verdict proxy_monotonicity() {
  const QualityProxy proxy{QualityProxyConfig{}};
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> snr(-15.0, 30.0), dist(0.0, 3.0), step(0.0, 5.0);
  std::uniform_int_distribution<int> quant(0, 10), b(0, 2);
  long violations = 0;
  const int states = 10'000;
  for (int i = 0; i < states; ++i) {
    SemanticState s;
    s.budget_c = kBudgets[static_cast<std::size_t>(b(rng))];
    s.min_link_snr_db = snr(rng);
    s.accum_distortion = dist(rng);
    s.quant_penalties = quant(rng);
    const double q = proxy.quality(s);
    if (!(q >= 0.0 && q <= 1.0)) ++violations;

    SemanticState t = s;
    t.min_link_snr_db += step(rng);
    if (proxy.quality(t) < q) ++violations;
    t = s;
    t.accum_distortion += step(rng) * 0.2;
    if (proxy.quality(t) > q) ++violations;
    t = s;
    t.quant_penalties += 1 + quant(rng) / 3;
    if (proxy.quality(t) > q) ++violations;
    for (int c : kBudgets) {
      if (c <= s.budget_c) continue;
      t = s;
      t.budget_c = c;
      if (proxy.quality(t) < q) ++violations;
    }
  }
  return {violations == 0, fmt("%d random states, %ld violations", states, violations)};
}

// State shared by the training-based criteria.
struct Trained {
  ExperimentConfig cfg;
  fs::path run_a;
  std::unique_ptr<PolicyNetwork> policy;
};

CommandOptions command(const fs::path& config, const fs::path& out) {
  CommandOptions o;
  o.config = config;
  o.out = out;
  return o;
}

Verdict learning_trend(Trained& t, const fs::path& config) {
  std::ostringstream log;
  if (cmd_train(command(config, t.run_a), log) != 0) return {false, "cmd_train failed"};
  t.policy = std::make_unique<PolicyNetwork>(load_checkpoint(t.run_a / "checkpoint.json"));

  std::ifstream in(t.run_a / "curve.csv");
  std::string line;
  std::getline(in, line);
  int col = 0;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',') && cell != "mean_reward") ++col;
  }
  std::vector<double> reward;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    for (int c = 0; c <= col && std::getline(ss, cell, ','); ++c)
      if (c == col) reward.push_back(std::stod(cell));
  }
  if (reward.size() < 100) return {false, fmt("only %zu curve rows", reward.size())};
  double first = 0.0, last = 0.0;
  for (std::size_t i = 0; i < 50; ++i) {
    first += reward[i] / 50.0;
    last += reward[reward.size() - 50 + i] / 50.0;
  }

  const World world(t.cfg);
  const int n = t.cfg.train.eval_episodes;
  const auto pol = evaluate_policy(world, *t.policy, n);
  const auto rnd = run_baseline(world, BaselineSpec{BaselineKind::kRandom}, n);
  const double gap = pol.summary.delivery_rate - rnd.summary.delivery_rate;
  return {last > first && gap >= 0.20,
          fmt("%zu episodes: reward window %.3f -> %.3f; delivery %.3f vs random %.3f over %d paired episodes",
              reward.size(), first, last, pol.summary.delivery_rate, rnd.summary.delivery_rate, n)};
}

Verdict competitiveness(const Trained& t) {
  if (!t.policy) return {false, "no trained policy"};
  const World world(t.cfg);
  const int n = t.cfg.train.eval_episodes;
  const auto pol = evaluate_policy(world, *t.policy, n);
  const auto sp = run_baseline(world, BaselineSpec{BaselineKind::kShortestPath}, n);
  BaselineSpec ab{BaselineKind::kNoRelay, 64, std::nullopt};
  const auto fixed = run_baseline(world, ab, n, t.policy.get());
  if (!pol.summary.mean_delay_s || !sp.summary.mean_delay_s) return {false, "no delivered sessions"};
  const double ratio = *pol.summary.mean_delay_s / *sp.summary.mean_delay_s;
  return {ratio <= 2.0 && pol.summary.mean_quality >= fixed.summary.mean_quality,
          fmt("delay %.4f s vs shortest path %.4f s (x%.2f); quality %.4f vs fixed C=64 no relay %.4f",
              *pol.summary.mean_delay_s, *sp.summary.mean_delay_s, ratio, pol.summary.mean_quality,
              fixed.summary.mean_quality)};
}

Verdict sweep_trends(const Trained& t) {
  if (!t.policy) return {false, "no trained policy"};
  ControllerFactory make = [&]() -> std::unique_ptr<Controller> {
    return std::make_unique<PolicyController>(*t.policy, PolicyController::Mode::kGreedy);
  };
  const int n = t.cfg.train.eval_episodes;
  const auto snr = run_sweep(t.cfg, SweepAxis::kSnr, {-5, 0, 5, 10, 15}, n, make);
  int inversions = 0;
  bool snr_ok = true;
  for (std::size_t i = 1; i < snr.size(); ++i) {
    const double drop = snr[i - 1].mean_quality - snr[i].mean_quality;
    if (drop > 0.0) {
      ++inversions;
      if (drop > 0.02) snr_ok = false;
    }
  }
  snr_ok = snr_ok && inversions <= 1;

  // Congestion needs the full-size latent; the small payload never queues.
  ExperimentConfig heavy = t.cfg;
  heavy.scenario.proxy.base_latent_bytes = QualityProxyConfig{}.base_latent_bytes;
  const auto load = run_sweep(heavy, SweepAxis::kLoad, {1, 2, 4, 6, 8}, n, make);
  bool load_ok = true;
  for (std::size_t i = 1; i < load.size(); ++i) load_ok = load_ok && load[i].drop_rate >= load[i - 1].drop_rate;

  std::string q, d;
  for (const auto& r : snr) q += fmt("%s%.3f", q.empty() ? "" : " ", r.mean_quality);
  for (const auto& r : load) d += fmt("%s%.3f", d.empty() ? "" : " ", r.drop_rate);
  return {snr_ok && load_ok, fmt("quality at SNR -5..15 dB: %s (%d inversions); drop rate at 1,2,4,6,8 flows: %s",
                                 q.c_str(), inversions, d.c_str())};
}

Verdict determinism(const Trained& t, const fs::path& config, const fs::path& work) {
  if (!fs::exists(t.run_a / "curve.csv")) return {false, "first training run missing"};
  std::ostringstream log;
  const fs::path run_b = work / "train_b";
  if (cmd_train(command(config, run_b), log) != 0) return {false, "second cmd_train failed"};
  const bool curve = slurp(t.run_a / "curve.csv") == slurp(run_b / "curve.csv");
  const bool ckpt = slurp(t.run_a / "checkpoint.json") == slurp(run_b / "checkpoint.json");

  bool metrics = true;
  std::string first_json;
  for (const char* name : {"eval_a", "eval_b"}) {
    CommandOptions o = command(config, work / name);
    o.checkpoint = t.run_a / "checkpoint.json";
    if (cmd_eval(o, log) != 0) return {false, "cmd_eval failed"};
  }
  for (const char* f : {"metrics.json", "sessions.csv"})
    metrics = metrics && slurp(work / "eval_a" / f) == slurp(work / "eval_b" / f);
  return {curve && ckpt && metrics,
          fmt("curve.csv %s, checkpoint %s, eval metrics.json and sessions.csv %s", curve ? "identical" : "DIFFER",
              ckpt ? "identical" : "DIFFERS", metrics ? "identical" : "DIFFER")};
}

Verdict payload_anchor() {
  const std::int64_t base = QualityProxyConfig{}.base_latent_bytes;
  const auto c128 = packetize(base, 128).chunks();
  const auto c64 = packetize(base, 64).chunks();
  return {c128 == 931 && c64 == 466, fmt("default latent %lld bytes: C=128 -> %zu chunks, C=64 -> %zu chunks",
                                         static_cast<long long>(base), c128, c64)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graphjscr acceptance run"};
  fs::path config, work = "acceptance_runs";
  std::vector<int> only;
  app.add_option("--config", config, "small-constellation experiment config")->required()->check(CLI::ExistingFile);
  app.add_option("--workdir", work, "scratch directory for command outputs");
  app.add_option("--only", only, "run a subset of criteria (training criteria 8-10 need 7)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  fs::remove_all(work);
  fs::create_directories(work);
  Trained trained;
  trained.cfg = load_config(config);
  trained.run_a = work / "train_a";
  const ExperimentConfig full{};  // 10 x 7 constellation, default payload

  const std::vector<Criterion> criteria = {
      {1, "queue law", 10, [&] { return queue_law(trained.cfg); }},
      {2, "delay composition", 60, [&] { return delay_composition(full); }},
      {3, "packet conservation", 120, [&] { return conservation(full); }},
      {4, "GAT correctness", 30, [&] { return gat_correctness(trained.cfg.model); }},
      {5, "PPO mechanics", 60, [&] { return ppo_mechanics(trained.cfg); }},
      {6, "proxy monotonicity", 10, [&] { return proxy_monotonicity(); }},
      {7, "learning trend", 900, [&] { return learning_trend(trained, config); }},
      {8, "competitiveness", 300, [&] { return competitiveness(trained); }},
      {9, "sweep trends", 600, [&] { return sweep_trends(trained); }},
      {10, "determinism", 300, [&] { return determinism(trained, config, work); }},
      {11, "payload anchoring", 1, [&] { return payload_anchor(); }},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.budget_s;
    const bool pass = v.pass && in_time;
    failed += pass ? 0 : 1;
    std::cout << (pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << v.detail
              << fmt(" (%.2f s of %.0f s%s)", secs, c.budget_s, in_time ? "" : ", over budget") << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : fmt("%d criteria failed", failed)) << std::endl;
  return failed == 0 ? 0 : 1;
}
