#include <benchmark/benchmark.h>

#include <random>

#include "qdy/explorer.hpp"
#include "qdy/models.hpp"

using namespace qdy;

namespace {

class Knowledge : public benchmark::Fixture {
 public:
  void SetUp(const benchmark::State&) override {
    const Term k = Term::name("k");
    for (int i = 1; i <= 4; ++i) {
      const std::string p = std::to_string(i);
      state_.learn(bit(k, "b", p, "Alice", i % 2 ? "0" : "1"));
      state_.learn(senc(bit(k, "d", p, "Alice", "1"), bit(k, "b", p, "Alice", i % 2 ? "0" : "1")));
    }
    ctx_.state = &state_;
    ctx_.rules = threat_preset("full");
    ctx_.seed = k;
    ctx_.universe = Universe{{"b", "d"}, {"Alice", "Bob"}, {"1", "2", "3", "4"}};
    target_ = pair(bit(k, "d", "3", "Alice", "1"), bit(k, "d", "2", "Bob", "0"));
  }

 protected:
  KnowledgeState state_;
  DeductionContext ctx_;
  Term target_;
};

BENCHMARK_F(Knowledge, ClassicalDeduction)(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(deduce_classical(ctx_, target_));
}

void EqB(benchmark::State& st) {
  std::mt19937_64 rng(1);
  const Term k = Term::name("k");
  std::vector<Term> terms;
  for (int i = 0; i < 256; ++i) {
    Term t = bit(k, i % 2 ? "b" : "d", std::to_string(1 + i % 4), i % 3 ? "Alice" : "Bob", i % 5 ? "0" : "1");
    for (int d = 0; d < 3; ++d) t = qubit(t, pair(t, Term::constant("x")));
    terms.push_back(t);
  }
  const InterchangeabilityConfig cfg{{"b"}};
  std::size_t i = 0;
  for (auto _ : st) {
    benchmark::DoNotOptimize(eq_b(terms[i % 256], terms[(i * 7 + 3) % 256], cfg));
    ++i;
  }
}
BENCHMARK(EqB);

void Explore(benchmark::State& st, const char* model, const char* preset, const char* auth) {
  const ProtocolSpec spec = builtin(model, ChannelAssumptions::from_auth_list(auth));
  const ThreatRuleSet threat = effective_threat(spec, threat_preset(preset));
  for (auto _ : st) {
    Verdict v = explore(spec, threat);
    st.counters["states"] = static_cast<double>(v.stats.states);
  }
}
BENCHMARK_CAPTURE(Explore, qkd2q_passive, "qkd-2q", "passive", "")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(Explore, qkd2q_forge_attack, "qkd-2q", "forge", "")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(Explore, qkd2q_full_proof, "qkd-2q", "full", "done,matchingBases,verif")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(Explore, qbc2q_full, "qbc-2q", "full", "")->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
