#include "graphjscr/semproxy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace graphjscr {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Index i with axis[i] <= v <= axis[i+1] and the interpolation weight.
std::pair<std::size_t, double> bracket(const std::vector<double>& axis, double v) {
  if (axis.size() == 1 || v <= axis.front()) return {0, 0.0};
  if (v >= axis.back()) return {axis.size() - 2, 1.0};
  auto it = std::upper_bound(axis.begin(), axis.end(), v);
  const std::size_t hi = static_cast<std::size_t>(it - axis.begin());
  const std::size_t lo = hi - 1;
  return {lo, (v - axis[lo]) / (axis[hi] - axis[lo])};
}

}  // namespace

bool is_valid_budget(int c) {
  return std::find(kBudgets.begin(), kBudgets.end(), c) != kBudgets.end();
}

int budget_index(int c) {
  for (std::size_t i = 0; i < kBudgets.size(); ++i)
    if (kBudgets[i] == c) return static_cast<int>(i);
  throw std::invalid_argument("budget " + std::to_string(c) + " is not in {64, 96, 128}");
}

void QualityProxyConfig::validate() const {
  if (per_hop_distortion < 0.0 || requant_penalty < 0.0 || requant_penalty > 1.0)
    throw std::invalid_argument("proxy penalties must be >= 0 (requant_penalty <= 1)");
  if (!(relay_recovery >= 0.0 && relay_recovery <= 1.0))
    throw std::invalid_argument("relay_recovery must lie in [0, 1]");
  if (!(noise_floor >= 0.0 && noise_floor <= 1.0))
    throw std::invalid_argument("noise_floor must lie in [0, 1]");
  if (!(noise_snr_scale_db > 0.0)) throw std::invalid_argument("noise_snr_scale_db must be > 0");
  if (snr_slope < 0.0) throw std::invalid_argument("snr_slope must be >= 0");
  if (base_latent_bytes < 0) throw std::invalid_argument("base_latent_bytes must be >= 0");
  double prev = 0.0;
  for (int c : kBudgets) {
    auto it = budget_gain.find(c);
    if (it == budget_gain.end())
      throw std::invalid_argument("budget_gain missing entry for C=" + std::to_string(c));
    if (!(it->second > 0.0 && it->second <= 1.0))
      throw std::invalid_argument("budget_gain values must lie in (0, 1]");
    if (it->second < prev) throw std::invalid_argument("budget_gain must be nondecreasing in C");
    prev = it->second;
  }
  if (budget_gain.size() != kBudgets.size())
    throw std::invalid_argument("budget_gain may only contain the budgets 64, 96, 128");
}

Packetization packetize(std::int64_t base_latent_bytes, int budget_c, int chunk_bytes) {
  if (!is_valid_budget(budget_c))
    throw std::invalid_argument("budget " + std::to_string(budget_c) + " is not in {64, 96, 128}");
  if (chunk_bytes <= 0) throw std::invalid_argument("chunk_bytes must be > 0");
  if (base_latent_bytes < 0) throw std::invalid_argument("payload size must be >= 0");
  Packetization out;
  out.payload_bytes = (base_latent_bytes * budget_c + kMaxBudget - 1) / kMaxBudget;
  std::int64_t left = out.payload_bytes;
  out.chunk_sizes.reserve(static_cast<std::size_t>((left + chunk_bytes - 1) / chunk_bytes));
  while (left > 0) {
    const int sz = static_cast<int>(std::min<std::int64_t>(left, chunk_bytes));
    out.chunk_sizes.push_back(sz);
    left -= sz;
  }
  return out;
}

double noise_factor(double link_snr_db, const QualityProxyConfig& cfg) {
  const double z = (link_snr_db - cfg.snr_midpoint_db) / cfg.noise_snr_scale_db;
  return cfg.noise_floor + (1.0 - cfg.noise_floor) * 2.0 * sigmoid(-z);
}

SemanticState relay_process(const SemanticState& state, RelayMode mode, int budget_c,
                            const QualityProxyConfig& cfg) {
  if (!is_valid_budget(budget_c))
    throw std::invalid_argument("budget " + std::to_string(budget_c) + " is not in {64, 96, 128}");
  switch (mode) {
    case RelayMode::kForward:
      return state;
    case RelayMode::kProcess: {
      SemanticState out = state;
      out.budget_c = std::min(state.budget_c, budget_c);
      out.hops_since_process = 0;
      out.accum_distortion = state.accum_distortion * cfg.relay_recovery;
      out.quant_penalties = state.quant_penalties + 1;
      return out;
    }
  }
  throw std::invalid_argument("relay mode must be 0 or 1");
}

SemanticState record_hop(const SemanticState& state, double link_snr_db,
                         const QualityProxyConfig& cfg) {
  SemanticState out = state;
  out.accum_distortion += cfg.per_hop_distortion * noise_factor(link_snr_db, cfg);
  out.min_link_snr_db = std::min(state.min_link_snr_db, link_snr_db);
  out.hops_since_process += 1;
  return out;
}

CalibrationTable CalibrationTable::from_rows(const std::vector<std::array<double, 3>>& rows) {
  std::set<double> snrs, budgets;
  for (const auto& r : rows) {
    if (!std::isfinite(r[0]) || !std::isfinite(r[1]) || !std::isfinite(r[2]))
      throw std::invalid_argument("calibration table holds a non-finite value");
    snrs.insert(r[0]);
    budgets.insert(r[1]);
  }
  if (snrs.empty()) throw std::invalid_argument("calibration table is empty");
  CalibrationTable t;
  t.snr_.assign(snrs.begin(), snrs.end());
  t.budget_.assign(budgets.begin(), budgets.end());
  if (rows.size() != t.snr_.size() * t.budget_.size())
    throw std::invalid_argument("calibration table must be a full (snr, C) grid without duplicates");
  t.q_.assign(rows.size(), std::numeric_limits<double>::quiet_NaN());
  for (const auto& r : rows) {
    const auto i = std::lower_bound(t.snr_.begin(), t.snr_.end(), r[0]) - t.snr_.begin();
    const auto j = std::lower_bound(t.budget_.begin(), t.budget_.end(), r[1]) - t.budget_.begin();
    double& cell = t.q_[static_cast<std::size_t>(i) * t.budget_.size() + j];
    if (!std::isnan(cell)) throw std::invalid_argument("calibration table has duplicate cells");
    cell = std::clamp(r[2], 0.0, 1.0);
  }
  return t;
}

CalibrationTable CalibrationTable::from_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open calibration table " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument(path + ": empty calibration table");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "snr_db,channel_c,quality")
    throw std::invalid_argument(path + ":1: expected header snr_db,channel_c,quality");
  std::vector<std::array<double, 3>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::array<double, 3> row{};
    std::stringstream ss(line);
    std::string cell;
    for (int k = 0; k < 3; ++k) {
      if (!std::getline(ss, cell, ','))
        throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": expected 3 columns");
      try {
        std::size_t used = 0;
        row[k] = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    if (std::getline(ss, cell, ','))
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": expected 3 columns");
    rows.push_back(row);
  }
  return from_rows(rows);
}

double CalibrationTable::lookup(double snr_db, double channel_c) const {
  const auto [i, ti] = bracket(snr_, snr_db);
  const auto [j, tj] = bracket(budget_, channel_c);
  const std::size_t nb = budget_.size();
  auto at = [&](std::size_t a, std::size_t b) {
    a = std::min(a, snr_.size() - 1);
    b = std::min(b, nb - 1);
    return q_[a * nb + b];
  };
  const double lo = (1.0 - tj) * at(i, j) + tj * at(i, j + 1);
  const double hi = (1.0 - tj) * at(i + 1, j) + tj * at(i + 1, j + 1);
  return std::clamp((1.0 - ti) * lo + ti * hi, 0.0, 1.0);
}

QualityProxy::QualityProxy(QualityProxyConfig cfg) : QualityProxy(std::move(cfg), std::nullopt) {
  if (!cfg_.calibration_table.empty()) table_ = CalibrationTable::from_csv(cfg_.calibration_table);
}

QualityProxy::QualityProxy(QualityProxyConfig cfg, std::optional<CalibrationTable> table)
    : cfg_(std::move(cfg)), table_(std::move(table)) {
  cfg_.validate();
}

double QualityProxy::quality(const SemanticState& s) const {
  double head;
  if (table_) {
    head = table_->lookup(s.min_link_snr_db, s.budget_c);
  } else {
    const double gain = cfg_.budget_gain.at(s.budget_c);
    const double link = s.min_link_snr_db == std::numeric_limits<double>::infinity()
                            ? 1.0
                            : sigmoid(cfg_.snr_slope * (s.min_link_snr_db - cfg_.snr_midpoint_db));
    head = gain * link;
  }
  const double q = head * std::exp(-s.accum_distortion) *
                   std::pow(1.0 - cfg_.requant_penalty, s.quant_penalties);
  return std::clamp(q, 0.0, 1.0);
}

}  // namespace graphjscr
