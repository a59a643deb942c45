#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "graphjscr/semproxy.hpp"

using namespace graphjscr;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

SemanticState random_state(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> bi(0, 2), qi(0, 10), hi(0, 16);
  std::uniform_real_distribution<double> snr(-20.0, 30.0), dist(0.0, 5.0);
  SemanticState s;
  s.budget_c = kBudgets[static_cast<std::size_t>(bi(rng))];
  s.min_link_snr_db = snr(rng);
  s.accum_distortion = dist(rng);
  s.quant_penalties = qi(rng);
  s.hops_since_process = hi(rng);
  return s;
}

}  // namespace

TEST_CASE("packetization anchors the default latent size") {
  QualityProxyConfig cfg;
  CHECK(packetize(cfg.base_latent_bytes, 128).chunks() == 931);
  CHECK(packetize(cfg.base_latent_bytes, 64).chunks() == 466);
  CHECK(packetize(cfg.base_latent_bytes, 64).payload_bytes * 2 == packetize(cfg.base_latent_bytes, 128).payload_bytes);
  CHECK(packetize(0, 128).chunks() == 0);
  CHECK_THROWS(packetize(1000, 100));
  CHECK_THROWS(packetize(1000, 128, 0));
}

TEST_CASE("packetization conserves bytes and respects the chunk size") {
  for (std::int64_t base : {1LL, 1199LL, 1200LL, 1201LL, 38400LL, 1117200LL, 999999LL}) {
    for (int c : kBudgets) {
      auto p = packetize(base, c);
      std::int64_t total = 0;
      for (int s : p.chunk_sizes) {
        CHECK(s > 0);
        CHECK(s <= 1200);
        total += s;
      }
      CHECK(total == p.payload_bytes);
      CHECK(p.payload_bytes == (base * c + 127) / 128);
      CHECK(static_cast<std::int64_t>(p.chunks()) == (p.payload_bytes + 1199) / 1200);
    }
  }
}

TEST_CASE("relay_process update rule") {
  QualityProxyConfig cfg;
  SemanticState s;
  s.budget_c = 128;
  s.accum_distortion = 0.4;
  s.hops_since_process = 3;
  s.quant_penalties = 1;
  s.min_link_snr_db = 7.0;

  CHECK(relay_process(s, RelayMode::kForward, 64, cfg) == s);

  auto same = relay_process(s, RelayMode::kProcess, 128, cfg);
  CHECK(same.quant_penalties == 2);
  CHECK(same.accum_distortion == doctest::Approx(0.2));
  CHECK(same.hops_since_process == 0);
  CHECK(same.budget_c == 128);

  auto pruned = relay_process(s, RelayMode::kProcess, 64, cfg);
  CHECK(pruned.budget_c == 64);
  // The ceiling never rises again.
  CHECK(relay_process(pruned, RelayMode::kProcess, 128, cfg).budget_c == 64);
  CHECK_THROWS(relay_process(s, RelayMode::kProcess, 32, cfg));
  CHECK_THROWS(relay_process(s, static_cast<RelayMode>(2), 64, cfg));
}

TEST_CASE("record_hop accumulates noise-weighted distortion") {
  QualityProxyConfig cfg;
  SemanticState s;
  CHECK(noise_factor(kInf, cfg) == doctest::Approx(cfg.noise_floor));
  auto one = record_hop(s, 5.0, cfg);
  auto two = record_hop(one, 5.0, cfg);
  CHECK(two.accum_distortion == doctest::Approx(2.0 * one.accum_distortion));
  CHECK(two.hops_since_process == 2);
  CHECK(one.min_link_snr_db == 5.0);
  CHECK(record_hop(one, 9.0, cfg).min_link_snr_db == 5.0);
  CHECK(record_hop(s, -10.0, cfg).accum_distortion > record_hop(s, 10.0, cfg).accum_distortion);
  double prev = kInf;
  for (double snr = -30.0; snr <= 40.0; snr += 0.25) {
    const double f = noise_factor(snr, cfg);
    CHECK(f <= prev);
    CHECK(f >= cfg.noise_floor);
    prev = f;
  }
}

TEST_CASE("quality closed form") {
  QualityProxyConfig cfg;
  QualityProxy proxy(cfg);
  SemanticState s;
  s.budget_c = 96;
  s.min_link_snr_db = 6.0;
  s.accum_distortion = 0.3;
  s.quant_penalties = 2;
  const double sig = 1.0 / (1.0 + std::exp(-cfg.snr_slope * (6.0 - cfg.snr_midpoint_db)));
  const double want = 0.9 * sig * std::exp(-0.3) * std::pow(1.0 - cfg.requant_penalty, 2);
  CHECK(proxy.quality(s) == doctest::Approx(want).epsilon(1e-14));

  s.accum_distortion = 1e6;
  CHECK(proxy.quality(s) == doctest::Approx(0.0));
  SemanticState fresh;
  CHECK(proxy.quality(fresh) == doctest::Approx(1.0));
}

TEST_CASE("quality is monotone and bounded over random states") {
  QualityProxy proxy{QualityProxyConfig{}};
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> step(0.0, 3.0);
  for (int i = 0; i < 10000; ++i) {
    const SemanticState s = random_state(rng);
    const double q = proxy.quality(s);
    CHECK(q >= 0.0);
    CHECK(q <= 1.0);

    SemanticState t = s;
    t.min_link_snr_db += step(rng);
    CHECK(proxy.quality(t) >= q);
    t = s;
    t.accum_distortion += step(rng);
    CHECK(proxy.quality(t) <= q);
    t = s;
    t.quant_penalties += 1;
    CHECK(proxy.quality(t) <= q);
    if (s.budget_c < kMaxBudget) {
      t = s;
      t.budget_c = kBudgets[static_cast<std::size_t>(budget_index(s.budget_c) + 1)];
      CHECK(proxy.quality(t) >= q);
    }
  }
}

TEST_CASE("calibration table interpolates bilinearly") {
  // q = 0.02 * snr + 0.004 * C is bilinear, so interpolation is exact inside the grid.
  std::vector<std::array<double, 3>> rows;
  for (double snr : {0.0, 5.0, 10.0})
    for (double c : {64.0, 96.0, 128.0}) rows.push_back({snr, c, 0.02 * snr + 0.004 * c - 0.2});
  auto t = CalibrationTable::from_rows(rows);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> us(0.0, 10.0), uc(64.0, 128.0);
  for (int i = 0; i < 500; ++i) {
    const double s = us(rng), c = uc(rng);
    CHECK(t.lookup(s, c) == doctest::Approx(std::clamp(0.02 * s + 0.004 * c - 0.2, 0.0, 1.0)).epsilon(1e-12));
  }
  // Outside the grid the edge values hold.
  CHECK(t.lookup(-50.0, 128.0) == doctest::Approx(t.lookup(0.0, 128.0)));
  CHECK(t.lookup(50.0, 64.0) == doctest::Approx(t.lookup(10.0, 64.0)));

  rows.pop_back();
  CHECK_THROWS(CalibrationTable::from_rows(rows));
  CHECK_THROWS(CalibrationTable::from_rows({}));
}

TEST_CASE("calibrated proxy replaces the gain and SNR factors") {
  std::vector<std::array<double, 3>> rows;
  for (double snr : {-5.0, 15.0})
    for (double c : {64.0, 96.0, 128.0}) rows.push_back({snr, c, snr < 0 ? 0.2 : 0.8});
  QualityProxy proxy(QualityProxyConfig{}, CalibrationTable::from_rows(rows));
  CHECK(proxy.calibrated());
  SemanticState s;
  s.min_link_snr_db = 5.0;
  CHECK(proxy.quality(s) == doctest::Approx(0.5));
  s.accum_distortion = 0.5;
  CHECK(proxy.quality(s) == doctest::Approx(0.5 * std::exp(-0.5)));
}

TEST_CASE("calibration CSV loading") {
  const auto dir = std::filesystem::temp_directory_path() / "graphjscr_semproxy_test";
  std::filesystem::create_directories(dir);
  const auto good = dir / "good.csv";
  {
    std::ofstream f(good);
    f << "snr_db,channel_c,quality\n0,64,0.1\n0,128,0.3\n10,64,0.5\n10,128,0.9\n";
  }
  auto t = CalibrationTable::from_csv(good.string());
  CHECK(t.lookup(5.0, 96.0) == doctest::Approx(0.45));

  const auto bad = dir / "bad.csv";
  {
    std::ofstream f(bad);
    f << "snr_db,channel_c,quality\n0,64,0.1\n0,128,x\n";
  }
  try {
    CalibrationTable::from_csv(bad.string());
    FAIL("expected a parse error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
  const auto header = dir / "header.csv";
  {
    std::ofstream f(header);
    f << "snr,c,q\n";
  }
  CHECK_THROWS_AS(CalibrationTable::from_csv(header.string()), std::invalid_argument);
  CHECK_THROWS(CalibrationTable::from_csv((dir / "missing.csv").string()));
  std::filesystem::remove_all(dir);
}

TEST_CASE("proxy config validation") {
  QualityProxyConfig cfg;
  cfg.budget_gain[96] = 0.5;  // below C=64
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.budget_gain.erase(128);
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.relay_recovery = 1.5;
  CHECK_THROWS(QualityProxy{cfg});
}
