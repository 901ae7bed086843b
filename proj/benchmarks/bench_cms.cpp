#include <benchmark/benchmark.h>

#include "cms/analysis.hpp"
#include "cms/coding.hpp"
#include "cms/rng.hpp"
#include "cms/simulate.hpp"

namespace {

std::string fixture(const char* name) {
  return std::string(CMS_FIXTURE_DIR) + "/" + name;
}

const cms::ValidatedSystem& prdm() {
  static cms::ValidatedSystem sys = cms::validate(cms::parse_spec_file(fixture("prdm.json")));
  return sys;
}

const cms::ValidatedSystem& ieex() {
  static cms::ValidatedSystem sys = cms::validate(cms::parse_spec_file(fixture("ieex.json")));
  return sys;
}

void BM_step_prdm(benchmark::State& state) {
  cms::Stepper stepper(prdm());
  cms::RngStream rng(42, 0);
  double x = 0.7;
  for (auto _ : state) {
    auto r = stepper.step(x, rng);
    x = r.x_next;
    benchmark::DoNotOptimize(x);
  }
}
BENCHMARK(BM_step_prdm);

void BM_step_tail_family(benchmark::State& state) {
  cms::Stepper stepper(ieex());
  cms::RngStream rng(42, 0);
  double x = 0.0;
  for (auto _ : state) {
    auto r = stepper.step(x, rng);
    x = r.x_next;
    benchmark::DoNotOptimize(x);
  }
}
BENCHMARK(BM_step_tail_family);

void BM_classify_prdm(benchmark::State& state) {
  for (auto _ : state) {
    auto rep = cms::classify(prdm());
    benchmark::DoNotOptimize(rep.existence.rule);
  }
}
BENCHMARK(BM_classify_prdm);

void BM_cylinder_depth12(benchmark::State& state) {
  cms::SymbolWord w;
  for (int k = 0; k < 12; ++k) w.symbols.push_back(k % 2 ? "c" : "b");
  cms::Rational x(1, 3);
  for (auto _ : state) {
    auto p = cms::cylinder_prob(prdm(), x, w);
    benchmark::DoNotOptimize(p);
  }
}
BENCHMARK(BM_cylinder_depth12);

void BM_coding_exact(benchmark::State& state) {
  cms::EventuallyPeriodicWord w;
  for (int k = 0; k < 8; ++k) w.period.symbols.push_back(k % 3 ? "c" : "b");
  for (auto _ : state) {
    auto f = cms::coding_map_exact(prdm(), w);
    benchmark::DoNotOptimize(f);
  }
}
BENCHMARK(BM_coding_exact);

}  // namespace

BENCHMARK_MAIN();
