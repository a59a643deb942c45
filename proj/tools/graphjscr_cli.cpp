#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "graphjscr/experiment.hpp"

namespace {

void common_flags(CLI::App* sub, graphjscr::CommandOptions& o, std::uint64_t& seed, int& episodes) {
  sub->add_option("--config", o.config, "experiment configuration (YAML)")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", o.out, "output directory")->capture_default_str();
  sub->add_option("--seed", seed, "override the configured seed");
  sub->add_option("--episodes", episodes, "override the episode count")->check(CLI::NonNegativeNumber);
  sub->add_flag("--trace", o.trace, "write a JSON-lines event trace to <out>/trace.jsonl");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic routing and relay control for LEO inter-satellite networks"};
  app.require_subcommand(1);

  graphjscr::CommandOptions o;
  std::uint64_t seed = 0;
  int episodes = -1;
  std::string checkpoint;
  int fixed_budget = 0, fixed_relay = -1;

  auto* train = app.add_subcommand("train", "train the shared policy with PPO");
  common_flags(train, o, seed, episodes);

  auto* eval = app.add_subcommand("eval", "greedy evaluation of a checkpoint on seeded episodes");
  common_flags(eval, o, seed, episodes);
  eval->add_option("--checkpoint", checkpoint, "policy checkpoint")->required()->check(CLI::ExistingFile);

  auto* sweep = app.add_subcommand("sweep", "evaluate across SNR or load values");
  common_flags(sweep, o, seed, episodes);
  sweep->add_option("--axis", o.axis, "snr (base SNR in dB) or load (concurrent flows)")
      ->required()
      ->check(CLI::IsMember({"snr", "load"}));
  sweep->add_option("--values", o.values, "sweep values")->required()->delimiter(',');
  sweep->add_option("--checkpoint", checkpoint, "policy checkpoint")->check(CLI::ExistingFile);
  sweep->add_option("--baseline-kind", o.baseline_kind, "sweep a baseline instead of the policy");
  sweep->add_option("--fixed-budget", fixed_budget, "baseline budget C")->check(CLI::IsMember({64, 96, 128}));

  auto* baseline = app.add_subcommand("baseline", "evaluate a comparator or ablation");
  common_flags(baseline, o, seed, episodes);
  baseline->add_option("--baseline-kind", o.baseline_kind, "baseline kind")
      ->required()
      ->check(CLI::IsMember({"shortest_path", "greedy_queue", "random", "graphjscr_no_sourceC", "graphjscr_no_relay"}));
  baseline->add_option("--checkpoint", checkpoint, "policy checkpoint (ablations)")->check(CLI::ExistingFile);
  baseline->add_option("--fixed-budget", fixed_budget, "budget C")->check(CLI::IsMember({64, 96, 128}));
  baseline->add_option("--fixed-relay", fixed_relay, "relay mode")->check(CLI::IsMember({0, 1}));

  CLI11_PARSE(app, argc, argv);

  CLI::App* used = app.get_subcommands().front();
  if (used->count("--seed") > 0) o.seed = seed;
  if (episodes >= 0) o.episodes = episodes;
  if (!checkpoint.empty()) o.checkpoint = checkpoint;
  if (fixed_budget > 0) o.fixed_budget = fixed_budget;
  if (fixed_relay >= 0) o.fixed_relay = fixed_relay;

  try {
    if (used == train) return graphjscr::cmd_train(o, std::cout);
    if (used == eval) return graphjscr::cmd_eval(o, std::cout);
    if (used == sweep) return graphjscr::cmd_sweep(o, std::cout);
    return graphjscr::cmd_baseline(o, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
