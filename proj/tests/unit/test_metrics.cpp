#include <doctest.h>

#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "graphjscr/metrics.hpp"

using namespace graphjscr;

namespace {

SessionOutcome delivered(int id, double delay, double q) {
  SessionOutcome o;
  o.session_id = id;
  o.src = 0;
  o.dst = 3;
  o.resolved = true;
  o.delivered = true;
  o.chunks = o.chunks_delivered = 2;
  o.end_to_end_delay_s = delay;
  o.hop_records.assign(3, HopDelayRecord::make(delay / 3.0, 0.0, 0.0, 0.0));
  o.quality = q;
  return o;
}

SessionOutcome dropped(int id, DropCause c) {
  SessionOutcome o;
  o.session_id = id;
  o.resolved = true;
  o.chunks = 2;
  o.drop_cause = c;
  return o;
}

}  // namespace

TEST_CASE("session cost") {
  ObjectiveConfig obj;
  CHECK(session_cost(true, 0.5, 0.6, obj, 1.0) == doctest::Approx(0.5 * 0.5 + 0.5 * 0.4));
  CHECK(session_cost(true, 5.0, 0.6, obj, 1.0) == doctest::Approx(0.5 + 0.5 * 0.4));
  CHECK(session_cost(false, 0.0, 0.0, obj, 1.0) == doctest::Approx(1.0));
  ObjectiveConfig delay_only{1.0, 0.0, 0.0};
  CHECK(session_cost(true, 0.25, 0.1, delay_only, 1.0) == doctest::Approx(0.25));
  ObjectiveConfig bad{0.7, 0.7, 0.0};
  CHECK_THROWS(bad.validate());
}

TEST_CASE("records, summary and objective") {
  EpisodeResult r;
  r.seed = 77;
  r.sessions = {delivered(0, 0.2, 0.9), delivered(1, 0.6, 0.5), dropped(2, DropCause::kTtlExpired),
                dropped(3, DropCause::kQueueOverflow)};
  SessionOutcome open;
  open.session_id = 4;
  r.sessions.push_back(open);
  ObjectiveConfig obj;
  auto recs = session_records(r, 3, obj, 2.0);
  REQUIRE(recs.size() == 5);
  CHECK(recs[0].delay_norm == doctest::Approx(0.1));
  CHECK(recs[0].hops == 3);
  CHECK(recs[2].drop_cause == "ttl_expired");
  CHECK(recs[4].drop_cause == "unresolved");
  CHECK_FALSE(recs[4].delivered);
  auto m = summarize(recs, obj);
  CHECK(m.sessions == 5);
  CHECK(m.delivery_rate == doctest::Approx(0.4));
  CHECK(m.drop_rate == doctest::Approx(0.6));
  CHECK(*m.mean_delay_s == doctest::Approx(0.4));
  CHECK(m.mean_quality == doctest::Approx((0.9 + 0.5) / 5.0));
  CHECK(m.drops_by_cause[static_cast<int>(DropCause::kTtlExpired)] == 1);
  CHECK(m.drops_by_cause[static_cast<int>(DropCause::kQueueOverflow)] == 1);
  const double want = (0.5 * 0.1 + 0.5 * 0.1 + 0.5 * 0.3 + 0.5 * 0.5 + 3.0) / 5.0;
  CHECK(*m.objective == doctest::Approx(want));

  CHECK_FALSE(objective_of({}).has_value());
  auto empty = summarize({}, obj);
  CHECK_FALSE(empty.objective);
  CHECK_FALSE(empty.mean_delay_s);
  CHECK(to_json(empty)["objective"].is_null());
}

TEST_CASE("sessions CSV round trip is exact") {
  EpisodeResult r;
  r.seed = 0xdeadbeefcafeULL;
  r.sessions = {delivered(0, 0.123456789012345678, 1.0 / 3.0), dropped(1, DropCause::kNoLink)};
  auto recs = session_records(r, 1, ObjectiveConfig{}, 0.7);
  std::stringstream ss;
  write_sessions_csv(ss, recs);
  const std::string text = ss.str();
  CHECK(text.rfind("episode,seed,session_id,src,dst,start_s,budget_c,chunks,chunks_delivered,relay_events,"
                   "hops,delivered,drop_cause,delay_s,delay_norm,quality,cost\n", 0) == 0);
  auto back = read_sessions_csv(ss);
  REQUIRE(back.size() == recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(back[i].seed == recs[i].seed);
    CHECK(back[i].delay_s == recs[i].delay_s);
    CHECK(back[i].quality == recs[i].quality);
    CHECK(back[i].cost == recs[i].cost);
    CHECK(back[i].drop_cause == recs[i].drop_cause);
    CHECK(back[i].delivered == recs[i].delivered);
  }
  // The objective recomputed from the file matches.
  CHECK(*objective_of(back) == *objective_of(recs));
  std::stringstream bad("episode,seed\n1,2\n");
  CHECK_THROWS(read_sessions_csv(bad));
}

TEST_CASE("builder pools sessions across episodes") {
  ObjectiveConfig obj;
  MetricsBuilder b("x", obj, 1.0);
  EpisodeResult a, c;
  a.sessions = {delivered(0, 0.5, 0.8)};
  a.reward_sum = 4.0;
  a.packets_rewarded = 2;
  c.sessions = {dropped(0, DropCause::kNoLink), delivered(1, 0.1, 0.4)};
  b.add(a);
  b.add(c);
  auto bundle = b.finish();
  CHECK(bundle.label == "x");
  CHECK(bundle.episodes.size() == 2);
  CHECK(bundle.sessions.size() == 3);
  CHECK(bundle.summary.sessions == 3);
  CHECK(bundle.summary.delivery_rate == doctest::Approx(2.0 / 3.0));
  CHECK(bundle.episodes[1].episode == 1);
  auto j = to_json(bundle);
  CHECK(j["summary"]["sessions"] == 3);
  CHECK(j["episodes"].size() == 2);
}

TEST_CASE("default delay scale bounds a TTL-long path") {
  Scenario s;
  s.constellation.num_planes = 3;
  s.constellation.sats_per_plane = 3;
  Constellation con(s.constellation);
  const double scale = default_delay_scale(s, con);
  double dmax = 0.0;
  for (const auto& e : con.snapshot(0.0).edges) dmax = std::max(dmax, e.distance_km);
  CHECK(scale > s.sim.ttl_hops * (dmax / kSpeedOfLightKmS + s.sim.proc_delay_s));
  const double snr = 10.0 - 20.0 * std::log10(dmax / 4000.0);
  const double tx = 8.0 * 1200 / shannon_rate_bps(snr, 20e6);
  CHECK(scale == doctest::Approx(16 * (dmax / kSpeedOfLightKmS + 0.005 + tx)));
}
