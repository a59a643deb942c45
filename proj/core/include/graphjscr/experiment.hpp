#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "graphjscr/agent.hpp"
#include "graphjscr/baselines.hpp"
#include "graphjscr/config.hpp"
#include "graphjscr/metrics.hpp"

namespace graphjscr {

// Built once per configuration and shared by every episode of a run.
class World {
 public:
  explicit World(const ExperimentConfig& cfg);

  const ExperimentConfig& config() const { return cfg_; }
  const Constellation& constellation() const { return constellation_; }
  const QualityProxy& proxy() const { return *proxy_; }
  double delay_scale_s() const { return delay_scale_s_; }

  EpisodeResult run(std::uint64_t episode_seed, Controller& ctl, std::ostream* trace = nullptr) const;
  EpisodeResult run(std::uint64_t episode_seed, Controller& ctl, const EpisodeOptions& opts) const;

 private:
  ExperimentConfig cfg_;
  Constellation constellation_;
  std::unique_ptr<QualityProxy> proxy_;
  double delay_scale_s_;
};

// Seed streams derived from the experiment seed.
std::uint64_t train_episode_seed(std::uint64_t seed, int episode);
std::uint64_t eval_episode_seed(std::uint64_t seed, int episode);

struct CurveRow {
  int episode = 0;
  std::int64_t updates = 0;  // cumulative
  double mean_reward = 0.0;
  double delivery_rate = 0.0;
  std::optional<double> policy_loss, value_loss, entropy, approx_kl;  // mean over this episode's updates
};

void write_curve_csv(std::ostream& os, const std::vector<CurveRow>& rows);

struct TrainResult {
  PolicyNetwork policy;
  std::vector<CurveRow> curve;
  std::int64_t updates = 0;
};

PolicyNetwork initial_policy(const ExperimentConfig& cfg);
TrainResult train(const ExperimentConfig& cfg, int episodes, std::ostream* trace = nullptr);

// Paired-seed evaluation: episode i always uses eval_episode_seed(seed, i).
MetricsBundle evaluate(const World& world, Controller& ctl, int episodes, const std::string& label,
                       std::ostream* trace = nullptr);
MetricsBundle evaluate_policy(const World& world, const PolicyNetwork& policy, int episodes,
                              const PolicyOverrides& overrides = {}, std::ostream* trace = nullptr);
// Policy ablations need `policy`; fixed-rule baselines ignore it.
MetricsBundle run_baseline(const World& world, const BaselineSpec& spec, int episodes,
                           const PolicyNetwork* policy = nullptr, std::ostream* trace = nullptr);

enum class SweepAxis { kSnr, kLoad };
SweepAxis parse_sweep_axis(const std::string& name);  // throws std::invalid_argument
std::string_view to_string(SweepAxis axis);

struct SweepRow {
  std::string axis;
  double value = 0.0;
  int episodes = 0;
  int sessions = 0;
  double delivery_rate = 0.0;
  double drop_rate = 0.0;
  std::optional<double> mean_delay_s;
  double mean_quality = 0.0;
  std::optional<double> objective;
};

// snr sets the channel's base SNR (dB at the reference distance) to each
// value; load sets the number of concurrent flows. `make` builds the
// controller for each point.
using ControllerFactory = std::function<std::unique_ptr<Controller>()>;
std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, SweepAxis axis, const std::vector<double>& values,
                                int episodes, const ControllerFactory& make);
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

// Checkpoints carry the policy plus the hyperparameters and seed of the run.
void save_checkpoint(const std::filesystem::path& path, const PolicyNetwork& policy, const ExperimentConfig& cfg);
PolicyNetwork load_checkpoint(const std::filesystem::path& path);
std::string sha256_file(const std::filesystem::path& path);

// Command entry points. Each writes into `out` (created if missing) and
// returns a process exit code.
struct CommandOptions {
  std::filesystem::path config;
  std::filesystem::path out = "run";
  std::optional<std::uint64_t> seed;
  std::optional<int> episodes;
  std::optional<std::filesystem::path> checkpoint;
  bool trace = false;
  std::string axis;
  std::vector<double> values;
  std::string baseline_kind;
  std::optional<int> fixed_budget;
  std::optional<int> fixed_relay;
};

int cmd_train(const CommandOptions& opt, std::ostream& log);
int cmd_eval(const CommandOptions& opt, std::ostream& log);
int cmd_sweep(const CommandOptions& opt, std::ostream& log);
int cmd_baseline(const CommandOptions& opt, std::ostream& log);

}  // namespace graphjscr
