#include <random>

#include <benchmark/benchmark.h>

#include "graphjscr/experiment.hpp"

using namespace graphjscr;

namespace {

SubgraphInput random_subgraph(std::mt19937_64& rng, int members) {
  std::normal_distribution<double> n(0.0, 1.0);
  SubgraphInput in;
  in.features.resize(members, kNodeFeatureDim);
  for (int i = 0; i < members; ++i) {
    in.members.push_back(i);
    for (int f = 0; f < kNodeFeatureDim; ++f) in.features(i, f) = n(rng);
  }
  return in;
}

void BM_Snapshot(benchmark::State& state) {
  const Constellation con{ConstellationConfig{}};
  ChannelModel channel(ChannelConfig{}, con.size(), 0.1);
  double t = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(con.snapshot(t, &channel));
    t += 0.1;
  }
}
BENCHMARK(BM_Snapshot);

void BM_GatForwardBackward(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto in = random_subgraph(rng, static_cast<int>(state.range(0)));
  GatEncoder enc(GatParams::glorot(kNodeFeatureDim, 64, rng));
  const Eigen::VectorXd up = Eigen::VectorXd::Ones(64);
  for (auto _ : state) {
    enc.forward(in);
    benchmark::DoNotOptimize(enc.backward(up));
  }
}
BENCHMARK(BM_GatForwardBackward)->Arg(3)->Arg(5)->Arg(9);

void BM_PolicyEvaluate(benchmark::State& state) {
  std::mt19937_64 rng(2);
  PolicyNetwork net(PolicyDims{}, 3);
  PolicyInput in;
  in.obs = Eigen::VectorXd::Random(Observation::kDim);
  in.graph = random_subgraph(rng, 5);
  in.mask = {true, true, true, true};
  for (auto _ : state) benchmark::DoNotOptimize(net.evaluate(in));
}
BENCHMARK(BM_PolicyEvaluate);

void BM_PolicyLossGradient(benchmark::State& state) {
  std::mt19937_64 rng(4);
  PolicyNetwork net(PolicyDims{}, 5);
  TrainSample s;
  s.input.obs = Eigen::VectorXd::Random(Observation::kDim);
  s.input.graph = random_subgraph(rng, 5);
  s.input.mask = {true, true, true, true};
  s.logp_old = net.evaluate(s.input).joint_logp(s.action);
  s.advantage = 1.0;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(net.num_params());
  for (auto _ : state) benchmark::DoNotOptimize(net.sample_loss(s, LossCoefs{}, 1.0, &grad));
}
BENCHMARK(BM_PolicyLossGradient);

// One default-scenario episode (70 satellites, 931-chunk sessions).
void BM_EpisodeShortestPath(benchmark::State& state) {
  const World world{ExperimentConfig{}};
  ShortestPathController ctl;
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(world.run(++seed, ctl));
}
BENCHMARK(BM_EpisodeShortestPath)->Unit(benchmark::kMillisecond);

void BM_EpisodeGreedyPolicy(benchmark::State& state) {
  const World world{ExperimentConfig{}};
  PolicyNetwork net(PolicyDims{}, 6);
  PolicyController ctl(net, PolicyController::Mode::kGreedy);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(world.run(++seed, ctl));
}
BENCHMARK(BM_EpisodeGreedyPolicy)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
