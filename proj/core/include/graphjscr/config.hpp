#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "graphjscr/environment.hpp"
#include "graphjscr/metrics.hpp"
#include "graphjscr/policy.hpp"
#include "graphjscr/ppo.hpp"

namespace graphjscr {

struct TrainConfig {
  int episodes = 300;
  int eval_episodes = 50;

  bool operator==(const TrainConfig&) const = default;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  Scenario scenario;
  PpoConfig ppo;
  PolicyDims model;
  ObjectiveConfig objective;
  TrainConfig train;

  void validate() const;
  bool operator==(const ExperimentConfig& o) const;
};

// Parse or validation failure, pointing at a 1-based line of the source.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, int line, const std::string& msg);
  int line() const { return line_; }

 private:
  int line_;
};

// Missing sections and fields keep their defaults; unknown ones are errors.
ExperimentConfig parse_config(const std::string& yaml_text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const ExperimentConfig& cfg);

}  // namespace graphjscr
