#include "graphjscr/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace graphjscr {

namespace {

using Setter = std::function<void(const YAML::Node&)>;
using FieldTable = std::map<std::string, Setter>;

int line_of(const YAML::Node& n) { return n.Mark().is_null() ? 0 : n.Mark().line + 1; }

template <class T>
Setter bind(T& field) {
  return [&field](const YAML::Node& n) { field = n.as<T>(); };
}

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& at, const std::string& msg) const {
    throw ConfigError(source_, line_of(at), msg);
  }

  void section(const YAML::Node& root, const std::string& name, const FieldTable& fields,
               const std::function<void()>& validate) const {
    const YAML::Node node = root[name];
    if (!node) {
      check(root, name, validate);
      return;
    }
    if (!node.IsMap()) fail(node, "section '" + name + "' must be a mapping");
    for (const auto& kv : node) {
      const std::string key = kv.first.as<std::string>();
      auto it = fields.find(key);
      if (it == fields.end()) fail(kv.first, "unknown field '" + key + "' in section '" + name + "'");
      try {
        it->second(kv.second);
      } catch (const YAML::Exception&) {
        fail(kv.second, "field '" + name + "." + key + "' has the wrong type");
      } catch (const std::invalid_argument& e) {
        fail(kv.second, "field '" + name + "." + key + "': " + e.what());
      }
    }
    check(node, name, validate);
  }

 private:
  void check(const YAML::Node& at, const std::string& name, const std::function<void()>& validate) const {
    try {
      validate();
    } catch (const std::invalid_argument& e) {
      fail(at, "section '" + name + "': " + e.what());
    }
  }

  std::string source_;
};

Setter budget_gain_setter(std::map<int, double>& gain) {
  return [&gain](const YAML::Node& n) {
    if (!n.IsMap()) throw std::invalid_argument("budget_gain must map C to a quality ceiling");
    std::map<int, double> g;
    for (const auto& kv : n) g[kv.first.as<int>()] = kv.second.as<double>();
    gain = std::move(g);
  };
}

}  // namespace

ConfigError::ConfigError(const std::string& source, int line, const std::string& msg)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + msg), line_(line) {}

void ExperimentConfig::validate() const {
  scenario.validate();
  ppo.validate();
  objective.validate();
  if (model.gat_hidden < 1 || model.trunk_width < 1) throw std::invalid_argument("model widths must be positive");
  if (train.episodes < 0 || train.eval_episodes < 0) throw std::invalid_argument("episode counts must be nonnegative");
}

bool ExperimentConfig::operator==(const ExperimentConfig& o) const {
  const Scenario& a = scenario;
  const Scenario& b = o.scenario;
  ChannelConfig ca = a.channel, cb = b.channel;
  ca.seed = cb.seed = 0;
  return seed == o.seed && a.constellation == b.constellation && ca == cb && a.sim == b.sim &&
         a.proxy == b.proxy && a.reward == b.reward && ppo == o.ppo && model == o.model &&
         objective == o.objective && train == o.train;
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source, e.mark.line + 1, e.msg);
  }
  ExperimentConfig cfg;
  if (!root || root.IsNull()) return cfg;
  Reader rd(source);
  if (!root.IsMap()) rd.fail(root, "configuration must be a mapping of sections");

  static const std::vector<std::string> kSections = {"seed",   "constellation", "channel", "simulation",
                                                     "proxy",  "reward",        "ppo",     "model",
                                                     "objective", "train"};
  for (const auto& kv : root) {
    const std::string key = kv.first.as<std::string>();
    if (std::find(kSections.begin(), kSections.end(), key) == kSections.end())
      rd.fail(kv.first, "unknown section '" + key + "'");
  }
  if (root["seed"]) {
    try {
      cfg.seed = root["seed"].as<std::uint64_t>();
    } catch (const YAML::Exception&) {
      rd.fail(root["seed"], "seed must be a nonnegative integer");
    }
  }

  Scenario& s = cfg.scenario;
  auto& c = s.constellation;
  rd.section(root, "constellation",
             {{"num_planes", bind(c.num_planes)},
              {"sats_per_plane", bind(c.sats_per_plane)},
              {"altitude_km", bind(c.altitude_km)},
              {"inclination_deg", bind(c.inclination_deg)},
              {"phasing_factor", bind(c.phasing_factor)},
              {"earth_radius_km", bind(c.earth_radius_km)},
              {"mu_km3_s2", bind(c.mu)}},
             [&] { c.validate(); });
  auto& ch = s.channel;
  rd.section(root, "channel",
             {{"fast_std_db", bind(ch.fast_std_db)},
              {"jitter_amplitude_db", bind(ch.jitter_amplitude_db)},
              {"correlation_horizon_s", bind(ch.correlation_horizon_s)},
              {"failure_rate", bind(ch.failure_rate)},
              {"base_snr_db", bind(ch.base_snr_db)},
              {"reference_distance_km", bind(ch.reference_distance_km)},
              {"pathloss_exponent", bind(ch.pathloss_exponent)},
              {"bandwidth_hz", bind(ch.bandwidth_hz)}},
             [&] { ch.validate(); });
  auto& sim = s.sim;
  rd.section(root, "simulation",
             {{"slot_s", bind(sim.slot_s)},
              {"episode_length_s", bind(sim.episode_length_s)},
              {"max_episode_s", bind(sim.max_episode_s)},
              {"flows", bind(sim.flows)},
              {"q_max_packets", bind(sim.q_max)},
              {"ttl_hops", bind(sim.ttl_hops)},
              {"chunk_bytes", bind(sim.chunk_bytes)},
              {"frame_interval_s", bind(sim.frame_interval_s)},
              {"proc_delay_s", bind(sim.proc_delay_s)},
              {"source_chunk_interval_s", bind(sim.source_chunk_interval_s)},
              {"session_start_window_s", bind(sim.session_start_window_s)}},
             [&] { sim.validate(); });
  auto& px = s.proxy;
  rd.section(root, "proxy",
             {{"snr_midpoint_db", bind(px.snr_midpoint_db)},
              {"snr_slope_per_db", bind(px.snr_slope)},
              {"budget_gain", budget_gain_setter(px.budget_gain)},
              {"per_hop_distortion", bind(px.per_hop_distortion)},
              {"requant_penalty", bind(px.requant_penalty)},
              {"relay_recovery", bind(px.relay_recovery)},
              {"noise_floor", bind(px.noise_floor)},
              {"noise_snr_scale_db", bind(px.noise_snr_scale_db)},
              {"base_latent_bytes", bind(px.base_latent_bytes)},
              {"calibration_table", bind(px.calibration_table)}},
             [&] { px.validate(); });
  auto& rw = s.reward;
  rd.section(root, "reward",
             {{"omega_h", bind(rw.omega_h)},
              {"omega_d", bind(rw.omega_d)},
              {"omega_q", bind(rw.omega_q)},
              {"omega_l", bind(rw.omega_l)},
              {"r_succ", bind(rw.r_succ)},
              {"r_fail", bind(rw.r_fail)},
              {"beta_sem", bind(rw.beta_sem)}},
             [&] { rw.validate(); });
  auto& pp = cfg.ppo;
  rd.section(root, "ppo",
             {{"learning_rate", bind(pp.learning_rate)},
              {"gamma", bind(pp.gamma)},
              {"gae_lambda", bind(pp.gae_lambda)},
              {"horizon", bind(pp.horizon)},
              {"clip", bind(pp.clip)},
              {"epochs", bind(pp.epochs)},
              {"minibatch", bind(pp.minibatch)},
              {"entropy_coef", bind(pp.entropy_coef)},
              {"value_coef", bind(pp.value_coef)},
              {"max_grad_norm", bind(pp.max_grad_norm)}},
             [&] { pp.validate(); });
  auto& md = cfg.model;
  rd.section(root, "model",
             {{"gat_hidden", bind(md.gat_hidden)},
              {"trunk_width", bind(md.trunk_width)},
              {"leaky_slope", bind(md.leaky_slope)}},
             [&] {
               if (md.gat_hidden < 1 || md.trunk_width < 1)
                 throw std::invalid_argument("gat_hidden and trunk_width must be >= 1");
             });
  auto& ob = cfg.objective;
  rd.section(root, "objective",
             {{"lambda_d", bind(ob.lambda_d)},
              {"lambda_s", bind(ob.lambda_s)},
              {"delay_scale_s", bind(ob.delay_scale_s)}},
             [&] { ob.validate(); });
  auto& tr = cfg.train;
  rd.section(root, "train",
             {{"episodes", bind(tr.episodes)}, {"eval_episodes", bind(tr.eval_episodes)}},
             [&] {
               if (tr.episodes < 0 || tr.eval_episodes < 0)
                 throw std::invalid_argument("episode counts must be >= 0");
             });
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), 0, "cannot open configuration file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out.SetFloatPrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "seed" << YAML::Value << cfg.seed;

  auto section = [&out](const char* name, const std::vector<std::pair<const char*, double>>& fields) {
    out << YAML::Key << name << YAML::Value << YAML::BeginMap;
    for (const auto& [k, v] : fields) out << YAML::Key << k << YAML::Value << v;
    out << YAML::EndMap;
  };
  const Scenario& s = cfg.scenario;
  const auto& c = s.constellation;
  out << YAML::Key << "constellation" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "num_planes" << YAML::Value << c.num_planes;
  out << YAML::Key << "sats_per_plane" << YAML::Value << c.sats_per_plane;
  out << YAML::Key << "altitude_km" << YAML::Value << c.altitude_km;
  out << YAML::Key << "inclination_deg" << YAML::Value << c.inclination_deg;
  out << YAML::Key << "phasing_factor" << YAML::Value << c.phasing_factor;
  out << YAML::Key << "earth_radius_km" << YAML::Value << c.earth_radius_km;
  out << YAML::Key << "mu_km3_s2" << YAML::Value << c.mu;
  out << YAML::EndMap;
  const auto& ch = s.channel;
  section("channel", {{"fast_std_db", ch.fast_std_db},
                      {"jitter_amplitude_db", ch.jitter_amplitude_db},
                      {"correlation_horizon_s", ch.correlation_horizon_s},
                      {"failure_rate", ch.failure_rate},
                      {"base_snr_db", ch.base_snr_db},
                      {"reference_distance_km", ch.reference_distance_km},
                      {"pathloss_exponent", ch.pathloss_exponent},
                      {"bandwidth_hz", ch.bandwidth_hz}});
  const auto& sim = s.sim;
  out << YAML::Key << "simulation" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "slot_s" << YAML::Value << sim.slot_s;
  out << YAML::Key << "episode_length_s" << YAML::Value << sim.episode_length_s;
  out << YAML::Key << "max_episode_s" << YAML::Value << sim.max_episode_s;
  out << YAML::Key << "flows" << YAML::Value << sim.flows;
  out << YAML::Key << "q_max_packets" << YAML::Value << sim.q_max;
  out << YAML::Key << "ttl_hops" << YAML::Value << sim.ttl_hops;
  out << YAML::Key << "chunk_bytes" << YAML::Value << sim.chunk_bytes;
  out << YAML::Key << "frame_interval_s" << YAML::Value << sim.frame_interval_s;
  out << YAML::Key << "proc_delay_s" << YAML::Value << sim.proc_delay_s;
  out << YAML::Key << "source_chunk_interval_s" << YAML::Value << sim.source_chunk_interval_s;
  out << YAML::Key << "session_start_window_s" << YAML::Value << sim.session_start_window_s;
  out << YAML::EndMap;
  const auto& px = s.proxy;
  out << YAML::Key << "proxy" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "snr_midpoint_db" << YAML::Value << px.snr_midpoint_db;
  out << YAML::Key << "snr_slope_per_db" << YAML::Value << px.snr_slope;
  out << YAML::Key << "budget_gain" << YAML::Value << YAML::BeginMap;
  for (const auto& [k, v] : px.budget_gain) out << YAML::Key << k << YAML::Value << v;
  out << YAML::EndMap;
  out << YAML::Key << "per_hop_distortion" << YAML::Value << px.per_hop_distortion;
  out << YAML::Key << "requant_penalty" << YAML::Value << px.requant_penalty;
  out << YAML::Key << "relay_recovery" << YAML::Value << px.relay_recovery;
  out << YAML::Key << "noise_floor" << YAML::Value << px.noise_floor;
  out << YAML::Key << "noise_snr_scale_db" << YAML::Value << px.noise_snr_scale_db;
  out << YAML::Key << "base_latent_bytes" << YAML::Value << px.base_latent_bytes;
  out << YAML::Key << "calibration_table" << YAML::Value << YAML::DoubleQuoted << px.calibration_table;
  out << YAML::EndMap;
  const auto& rw = s.reward;
  section("reward", {{"omega_h", rw.omega_h},
                     {"omega_d", rw.omega_d},
                     {"omega_q", rw.omega_q},
                     {"omega_l", rw.omega_l},
                     {"r_succ", rw.r_succ},
                     {"r_fail", rw.r_fail},
                     {"beta_sem", rw.beta_sem}});
  const auto& pp = cfg.ppo;
  out << YAML::Key << "ppo" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "learning_rate" << YAML::Value << pp.learning_rate;
  out << YAML::Key << "gamma" << YAML::Value << pp.gamma;
  out << YAML::Key << "gae_lambda" << YAML::Value << pp.gae_lambda;
  out << YAML::Key << "horizon" << YAML::Value << pp.horizon;
  out << YAML::Key << "clip" << YAML::Value << pp.clip;
  out << YAML::Key << "epochs" << YAML::Value << pp.epochs;
  out << YAML::Key << "minibatch" << YAML::Value << pp.minibatch;
  out << YAML::Key << "entropy_coef" << YAML::Value << pp.entropy_coef;
  out << YAML::Key << "value_coef" << YAML::Value << pp.value_coef;
  out << YAML::Key << "max_grad_norm" << YAML::Value << pp.max_grad_norm;
  out << YAML::EndMap;
  out << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "gat_hidden" << YAML::Value << cfg.model.gat_hidden;
  out << YAML::Key << "trunk_width" << YAML::Value << cfg.model.trunk_width;
  out << YAML::Key << "leaky_slope" << YAML::Value << cfg.model.leaky_slope;
  out << YAML::EndMap;
  section("objective", {{"lambda_d", cfg.objective.lambda_d},
                        {"lambda_s", cfg.objective.lambda_s},
                        {"delay_scale_s", cfg.objective.delay_scale_s}});
  out << YAML::Key << "train" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "episodes" << YAML::Value << cfg.train.episodes;
  out << YAML::Key << "eval_episodes" << YAML::Value << cfg.train.eval_episodes;
  out << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace graphjscr
