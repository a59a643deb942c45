#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace graphjscr {

// Candidate semantic channel budgets C.
inline constexpr std::array<int, 3> kBudgets = {64, 96, 128};
inline constexpr int kMaxBudget = 128;

bool is_valid_budget(int c);
int budget_index(int c);  // throws for budgets outside kBudgets

enum class RelayMode : int { kForward = 0, kProcess = 1 };

struct SemanticState {
  int session_id = 0;
  int budget_c = kMaxBudget;
  int hops_since_process = 0;
  double accum_distortion = 0.0;
  int quant_penalties = 0;
  double min_link_snr_db = std::numeric_limits<double>::infinity();

  bool operator==(const SemanticState&) const = default;
};

// Measured (snr, C) -> quality grid, bilinearly interpolated. Loaded from a
// CSV with header `snr_db,channel_c,quality`; the rows must form a full grid.
class CalibrationTable {
 public:
  static CalibrationTable from_csv(const std::string& path);
  static CalibrationTable from_rows(const std::vector<std::array<double, 3>>& rows);

  double lookup(double snr_db, double channel_c) const;
  const std::vector<double>& snr_axis() const { return snr_; }
  const std::vector<double>& budget_axis() const { return budget_; }

 private:
  std::vector<double> snr_;
  std::vector<double> budget_;
  std::vector<double> q_;  // row-major [snr][budget]
};

struct QualityProxyConfig {
  double snr_midpoint_db = 3.0;
  double snr_slope = 0.5;  // per dB
  std::map<int, double> budget_gain = {{64, 0.80}, {96, 0.90}, {128, 1.0}};
  double per_hop_distortion = 0.05;
  double requant_penalty = 0.03;
  double relay_recovery = 0.5;
  double noise_floor = 0.2;
  double noise_snr_scale_db = 3.0;
  std::int64_t base_latent_bytes = 1117200;
  std::string calibration_table;  // optional CSV path, empty for none

  void validate() const;
  bool operator==(const QualityProxyConfig&) const = default;
};

struct Packetization {
  std::int64_t payload_bytes = 0;
  std::vector<int> chunk_sizes;
  std::size_t chunks() const { return chunk_sizes.size(); }
};

// Payload scales linearly with the budget and is cut into <= chunk_bytes units.
Packetization packetize(std::int64_t base_latent_bytes, int budget_c, int chunk_bytes = 1200);

// Per-hop distortion multiplier; nonincreasing in SNR, saturating at the floor.
double noise_factor(double link_snr_db, const QualityProxyConfig& cfg);

SemanticState relay_process(const SemanticState& state, RelayMode mode, int budget_c,
                            const QualityProxyConfig& cfg);
SemanticState record_hop(const SemanticState& state, double link_snr_db,
                         const QualityProxyConfig& cfg);

// Parametric stand-in for a reconstruction-quality metric, normalized to [0, 1].
class QualityProxy {
 public:
  explicit QualityProxy(QualityProxyConfig cfg);
  QualityProxy(QualityProxyConfig cfg, std::optional<CalibrationTable> table);

  const QualityProxyConfig& config() const { return cfg_; }
  bool calibrated() const { return table_.has_value(); }

  double quality(const SemanticState& state) const;

 private:
  QualityProxyConfig cfg_;
  std::optional<CalibrationTable> table_;
};

}  // namespace graphjscr
