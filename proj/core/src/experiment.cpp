#include "graphjscr/experiment.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

namespace graphjscr {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  return f;
}

void write_json(const std::filesystem::path& p, const nlohmann::json& j) { open_out(p) << j.dump(2) << '\n'; }

std::optional<CalibrationTable> calibration_for(const QualityProxyConfig& px) {
  if (px.calibration_table.empty()) return std::nullopt;
  return CalibrationTable::from_csv(px.calibration_table);
}

ExperimentConfig effective_config(const CommandOptions& opt) {
  if (opt.config.empty()) throw std::invalid_argument("--config is required");
  ExperimentConfig cfg = load_config(opt.config);
  if (opt.seed) cfg.seed = *opt.seed;
  return cfg;
}

void prepare_run_dir(const CommandOptions& opt, const ExperimentConfig& cfg) {
  std::filesystem::create_directories(opt.out);
  open_out(opt.out / "config.yaml") << serialize_config(cfg);
}

nlohmann::json manifest(const std::string& command, const ExperimentConfig& cfg, int episodes) {
  return {{"command", command}, {"seed", cfg.seed}, {"config", "config.yaml"}, {"episodes", episodes}};
}

void write_eval_outputs(const std::filesystem::path& out, const MetricsBundle& b) {
  write_json(out / "metrics.json", to_json(b));
  auto f = open_out(out / "sessions.csv");
  write_sessions_csv(f, b.sessions);
}

void check_dims(const PolicyNetwork& p, const ExperimentConfig& cfg) {
  const PolicyDims& d = p.dims();
  if (d.obs_dim != Observation::kDim || d.node_feature_dim != kNodeFeatureDim)
    throw std::runtime_error("checkpoint was written for a different observation layout");
  if (d.gat_hidden != cfg.model.gat_hidden || d.trunk_width != cfg.model.trunk_width)
    throw std::runtime_error("checkpoint model dimensions do not match the configuration");
}

struct TraceFile {
  std::unique_ptr<std::ofstream> f;
  explicit TraceFile(const CommandOptions& opt) {
    if (opt.trace) f = std::make_unique<std::ofstream>(open_out(opt.out / "trace.jsonl"));
  }
  std::ostream* get() const { return f.get(); }
};

}  // namespace

World::World(const ExperimentConfig& cfg)
    : cfg_(cfg),
      constellation_(cfg.scenario.constellation),
      proxy_(std::make_unique<QualityProxy>(cfg.scenario.proxy, calibration_for(cfg.scenario.proxy))) {
  cfg_.validate();
  delay_scale_s_ = cfg.objective.delay_scale_s > 0.0 ? cfg.objective.delay_scale_s
                                                     : default_delay_scale(cfg.scenario, constellation_);
}

EpisodeResult World::run(std::uint64_t episode_seed, Controller& ctl, std::ostream* trace) const {
  EpisodeOptions opts;
  opts.trace = trace;
  return run(episode_seed, ctl, opts);
}

EpisodeResult World::run(std::uint64_t episode_seed, Controller& ctl, const EpisodeOptions& opts) const {
  return run_episode(cfg_.scenario, constellation_, *proxy_, episode_seed, ctl, opts);
}

std::uint64_t train_episode_seed(std::uint64_t seed, int episode) {
  return derive_seed(seed, 10, static_cast<std::uint64_t>(episode));
}

std::uint64_t eval_episode_seed(std::uint64_t seed, int episode) {
  return derive_seed(seed, 20, static_cast<std::uint64_t>(episode));
}

void write_curve_csv(std::ostream& os, const std::vector<CurveRow>& rows) {
  os << "episode,updates,mean_reward,delivery_rate,policy_loss,value_loss,entropy,approx_kl\n";
  for (const auto& r : rows)
    os << r.episode << ',' << r.updates << ',' << fmt(r.mean_reward) << ',' << fmt(r.delivery_rate) << ','
       << fmt(r.policy_loss) << ',' << fmt(r.value_loss) << ',' << fmt(r.entropy) << ',' << fmt(r.approx_kl)
       << '\n';
}

PolicyNetwork initial_policy(const ExperimentConfig& cfg) {
  return PolicyNetwork(cfg.model, derive_seed(cfg.seed, 30, 0));
}

TrainResult train(const ExperimentConfig& cfg, int episodes, std::ostream* trace) {
  if (episodes < 0) throw std::invalid_argument("episode count must be nonnegative");
  World world(cfg);
  TrainResult out{initial_policy(cfg), {}, 0};
  PpoTrainer trainer(out.policy, cfg.ppo, derive_seed(cfg.seed, 31, 0));
  PolicyController ctl(out.policy, PolicyController::Mode::kSample, &trainer);
  for (int e = 0; e < episodes; ++e) {
    const EpisodeResult r = world.run(train_episode_seed(cfg.seed, e), ctl, trace);
    CurveRow row;
    row.episode = e;
    row.updates = trainer.updates();
    row.mean_reward = r.mean_packet_return();
    int delivered = 0;
    for (const auto& s : r.sessions) delivered += s.delivered ? 1 : 0;
    row.delivery_rate = r.sessions.empty() ? 0.0 : static_cast<double>(delivered) / r.sessions.size();
    const auto& ups = ctl.episode_updates();
    if (!ups.empty()) {
      double pl = 0, vl = 0, en = 0, kl = 0;
      for (const auto& u : ups) {
        pl += u.policy_loss;
        vl += u.value_loss;
        en += u.entropy;
        kl += u.approx_kl;
      }
      const double n = static_cast<double>(ups.size());
      row.policy_loss = pl / n;
      row.value_loss = vl / n;
      row.entropy = en / n;
      row.approx_kl = kl / n;
    }
    out.curve.push_back(row);
  }
  out.updates = trainer.updates();
  return out;
}

MetricsBundle evaluate(const World& world, Controller& ctl, int episodes, const std::string& label,
                       std::ostream* trace) {
  MetricsBuilder mb(label, world.config().objective, world.delay_scale_s());
  for (int e = 0; e < episodes; ++e) mb.add(world.run(eval_episode_seed(world.config().seed, e), ctl, trace));
  return mb.finish();
}

MetricsBundle evaluate_policy(const World& world, const PolicyNetwork& policy, int episodes,
                              const PolicyOverrides& overrides, std::ostream* trace) {
  // Greedy evaluation never touches the parameters.
  PolicyController ctl(const_cast<PolicyNetwork&>(policy), PolicyController::Mode::kGreedy, nullptr, overrides);
  return evaluate(world, ctl, episodes, "graphjscr", trace);
}

MetricsBundle run_baseline(const World& world, const BaselineSpec& spec, int episodes, const PolicyNetwork* policy,
                           std::ostream* trace) {
  spec.validate();
  const std::string label(to_string(spec.kind));
  switch (spec.kind) {
    case BaselineKind::kShortestPath: {
      ShortestPathController c(spec);
      return evaluate(world, c, episodes, label, trace);
    }
    case BaselineKind::kGreedyQueue: {
      GreedyQueueController c(spec);
      return evaluate(world, c, episodes, label, trace);
    }
    case BaselineKind::kRandom: {
      RandomController c(spec);
      return evaluate(world, c, episodes, label, trace);
    }
    case BaselineKind::kNoSourceC:
    case BaselineKind::kNoRelay: {
      if (policy == nullptr) throw std::invalid_argument(label + " needs a trained policy checkpoint");
      PolicyController c(const_cast<PolicyNetwork&>(*policy), PolicyController::Mode::kGreedy, nullptr,
                         ablation_overrides(spec));
      return evaluate(world, c, episodes, label, trace);
    }
  }
  throw std::invalid_argument("unknown baseline kind");
}

SweepAxis parse_sweep_axis(const std::string& name) {
  if (name == "snr") return SweepAxis::kSnr;
  if (name == "load") return SweepAxis::kLoad;
  throw std::invalid_argument("unknown sweep axis '" + name + "' (expected snr or load)");
}

std::string_view to_string(SweepAxis axis) { return axis == SweepAxis::kSnr ? "snr" : "load"; }

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, SweepAxis axis, const std::vector<double>& values,
                                int episodes, const ControllerFactory& make) {
  if (values.empty()) throw std::invalid_argument("sweep needs at least one value");
  std::vector<SweepRow> rows;
  for (double v : values) {
    ExperimentConfig point = cfg;
    if (axis == SweepAxis::kSnr) {
      point.scenario.channel.base_snr_db = v;
    } else {
      if (v < 0.0 || v != std::floor(v)) throw std::invalid_argument("load values must be nonnegative integers");
      point.scenario.sim.flows = static_cast<int>(v);
    }
    const World world(point);
    auto ctl = make();
    const MetricsBundle b = evaluate(world, *ctl, episodes, "sweep");
    SweepRow r;
    r.axis = std::string(to_string(axis));
    r.value = v;
    r.episodes = episodes;
    r.sessions = b.summary.sessions;
    r.delivery_rate = b.summary.delivery_rate;
    r.drop_rate = b.summary.drop_rate;
    r.mean_delay_s = b.summary.mean_delay_s;
    r.mean_quality = b.summary.mean_quality;
    r.objective = b.summary.objective;
    rows.push_back(r);
  }
  return rows;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "axis,value,episodes,sessions,delivery_rate,drop_rate,mean_delay_s,mean_quality,objective\n";
  for (const auto& r : rows)
    os << r.axis << ',' << fmt(r.value) << ',' << r.episodes << ',' << r.sessions << ',' << fmt(r.delivery_rate)
       << ',' << fmt(r.drop_rate) << ',' << fmt(r.mean_delay_s) << ',' << fmt(r.mean_quality) << ','
       << fmt(r.objective) << '\n';
}

void save_checkpoint(const std::filesystem::path& path, const PolicyNetwork& policy, const ExperimentConfig& cfg) {
  nlohmann::json j = policy.to_json();
  j["seed"] = cfg.seed;
  const PpoConfig& p = cfg.ppo;
  j["hyper"] = {{"learning_rate", p.learning_rate}, {"gamma", p.gamma},       {"gae_lambda", p.gae_lambda},
                {"horizon", p.horizon},             {"clip", p.clip},         {"epochs", p.epochs},
                {"minibatch", p.minibatch},         {"entropy_coef", p.entropy_coef},
                {"value_coef", p.value_coef},       {"max_grad_norm", p.max_grad_norm}};
  open_out(path) << j.dump() << '\n';
}

PolicyNetwork load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open checkpoint " + path.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  return PolicyNetwork::from_json(j);
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (f) {
    f.read(buf, sizeof buf);
    if (f.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(f.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return hex.str();
}

int cmd_train(const CommandOptions& opt, std::ostream& log) {
  const ExperimentConfig cfg = effective_config(opt);
  const int episodes = opt.episodes.value_or(cfg.train.episodes);
  prepare_run_dir(opt, cfg);
  TraceFile trace(opt);
  const TrainResult tr = train(cfg, episodes, trace.get());
  {
    auto f = open_out(opt.out / "curve.csv");
    write_curve_csv(f, tr.curve);
  }
  save_checkpoint(opt.out / "checkpoint.json", tr.policy, cfg);
  const std::string sha = sha256_file(opt.out / "checkpoint.json");

  const World world(cfg);
  const MetricsBundle eval = evaluate_policy(world, tr.policy, cfg.train.eval_episodes);
  write_eval_outputs(opt.out, eval);
  nlohmann::json m = to_json(eval);
  double first = 0.0, last = 0.0;
  const std::size_t w = std::min<std::size_t>(50, tr.curve.size());
  for (std::size_t i = 0; i < w; ++i) {
    first += tr.curve[i].mean_reward;
    last += tr.curve[tr.curve.size() - 1 - i].mean_reward;
  }
  m["training"] = {{"episodes", episodes},
                   {"updates", tr.updates},
                   {"first_window_mean_reward", w ? nlohmann::json(first / w) : nlohmann::json(nullptr)},
                   {"last_window_mean_reward", w ? nlohmann::json(last / w) : nlohmann::json(nullptr)}};
  write_json(opt.out / "metrics.json", m);

  nlohmann::json run = manifest("train", cfg, episodes);
  run["checkpoint"] = "checkpoint.json";
  run["checkpoint_sha256"] = sha;
  write_json(opt.out / "run.json", run);
  log << "trained " << episodes << " episodes, " << tr.updates << " updates; eval delivery rate "
      << eval.summary.delivery_rate << "\n";
  return 0;
}

int cmd_eval(const CommandOptions& opt, std::ostream& log) {
  const ExperimentConfig cfg = effective_config(opt);
  if (!opt.checkpoint) throw std::invalid_argument("eval needs --checkpoint");
  const PolicyNetwork policy = load_checkpoint(*opt.checkpoint);
  check_dims(policy, cfg);
  const int episodes = opt.episodes.value_or(cfg.train.eval_episodes);
  prepare_run_dir(opt, cfg);
  TraceFile trace(opt);
  const World world(cfg);
  const MetricsBundle b = evaluate_policy(world, policy, episodes, {}, trace.get());
  write_eval_outputs(opt.out, b);
  nlohmann::json run = manifest("eval", cfg, episodes);
  run["checkpoint"] = opt.checkpoint->string();
  run["checkpoint_sha256"] = sha256_file(*opt.checkpoint);
  write_json(opt.out / "run.json", run);
  log << "evaluated " << episodes << " episodes: delivery rate " << b.summary.delivery_rate << "\n";
  return 0;
}

int cmd_baseline(const CommandOptions& opt, std::ostream& log) {
  const ExperimentConfig cfg = effective_config(opt);
  BaselineSpec spec;
  spec.kind = parse_baseline_kind(opt.baseline_kind);
  spec.fixed_budget = opt.fixed_budget;
  spec.fixed_relay = opt.fixed_relay;
  spec.validate();
  std::optional<PolicyNetwork> policy;
  if (needs_policy(spec.kind)) {
    if (!opt.checkpoint) throw std::invalid_argument(opt.baseline_kind + " needs --checkpoint");
    policy = load_checkpoint(*opt.checkpoint);
    check_dims(*policy, cfg);
  }
  const int episodes = opt.episodes.value_or(cfg.train.eval_episodes);
  prepare_run_dir(opt, cfg);
  TraceFile trace(opt);
  const World world(cfg);
  const MetricsBundle b = run_baseline(world, spec, episodes, policy ? &*policy : nullptr, trace.get());
  write_eval_outputs(opt.out, b);
  nlohmann::json run = manifest("baseline", cfg, episodes);
  run["baseline_kind"] = opt.baseline_kind;
  if (opt.checkpoint) {
    run["checkpoint"] = opt.checkpoint->string();
    run["checkpoint_sha256"] = sha256_file(*opt.checkpoint);
  }
  write_json(opt.out / "run.json", run);
  log << opt.baseline_kind << ": delivery rate " << b.summary.delivery_rate << " over " << episodes
      << " episodes\n";
  return 0;
}

int cmd_sweep(const CommandOptions& opt, std::ostream& log) {
  const ExperimentConfig cfg = effective_config(opt);
  const SweepAxis axis = parse_sweep_axis(opt.axis);
  if (opt.values.empty()) throw std::invalid_argument("sweep needs --values");
  std::shared_ptr<PolicyNetwork> policy;
  BaselineSpec spec;
  const bool use_baseline = !opt.baseline_kind.empty();
  if (use_baseline) {
    spec.kind = parse_baseline_kind(opt.baseline_kind);
    spec.fixed_budget = opt.fixed_budget;
    spec.fixed_relay = opt.fixed_relay;
    spec.validate();
  }
  if (!use_baseline || needs_policy(spec.kind)) {
    if (!opt.checkpoint) throw std::invalid_argument("sweep needs --checkpoint (or a fixed-rule --baseline-kind)");
    policy = std::make_shared<PolicyNetwork>(load_checkpoint(*opt.checkpoint));
    check_dims(*policy, cfg);
  }
  ControllerFactory make = [&]() -> std::unique_ptr<Controller> {
    if (!use_baseline)
      return std::make_unique<PolicyController>(*policy, PolicyController::Mode::kGreedy);
    switch (spec.kind) {
      case BaselineKind::kShortestPath: return std::make_unique<ShortestPathController>(spec);
      case BaselineKind::kGreedyQueue: return std::make_unique<GreedyQueueController>(spec);
      case BaselineKind::kRandom: return std::make_unique<RandomController>(spec);
      default:
        return std::make_unique<PolicyController>(*policy, PolicyController::Mode::kGreedy, nullptr,
                                                  ablation_overrides(spec));
    }
  };
  const int episodes = opt.episodes.value_or(cfg.train.eval_episodes);
  prepare_run_dir(opt, cfg);
  const auto rows = run_sweep(cfg, axis, opt.values, episodes, make);
  {
    auto f = open_out(opt.out / "sweep.csv");
    write_sweep_csv(f, rows);
  }
  nlohmann::json run = manifest("sweep", cfg, episodes);
  run["axis"] = opt.axis;
  run["values"] = opt.values;
  if (opt.checkpoint) {
    run["checkpoint"] = opt.checkpoint->string();
    run["checkpoint_sha256"] = sha256_file(*opt.checkpoint);
  }
  if (use_baseline) run["baseline_kind"] = opt.baseline_kind;
  write_json(opt.out / "run.json", run);
  log << "swept " << opt.axis << " over " << rows.size() << " values\n";
  return 0;
}

}  // namespace graphjscr
