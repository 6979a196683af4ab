#include <benchmark/benchmark.h>

#include "ruleopt/eval.hpp"
#include "ruleopt/loss.hpp"
#include "ruleopt/optimize.hpp"
#include "ruleopt/rng.hpp"
#include "ruleopt/synth.hpp"

namespace {

using namespace ruleopt;

const SyntheticData& data() {
    static const SyntheticData s = generate_synthetic(42);
    return s;
}

// Full-matrix candidate evaluation (225k rows x 98 rules).
void BM_EvaluateCandidate(benchmark::State& state) {
    const SyntheticData& s = data();
    const Evaluator evaluator(s.dataset);
    const LossSpec loss = LossSpec::synthetic();
    EvaluationReport baseline =
        evaluator.metrics(s.dataset.initial_priorities, evaluator.full_range());
    baseline.loss = loss.value(baseline, nullptr);
    std::uint64_t ordinal = 0;
    for (auto _ : state) {
        Rng rng(7, ordinal++);
        const PriorityVector p = random_candidate(s.dataset, RandomSearchParams{0.4, 0.0}, rng);
        benchmark::DoNotOptimize(
            evaluator.evaluate(p, loss, &baseline, evaluator.full_range()).loss);
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_EvaluateCandidate)->Unit(benchmark::kMillisecond);

// Same evaluation over the 280-column augmented pool.
void BM_EvaluateAugmented(benchmark::State& state) {
    static const Dataset wide = augment_rules_pool(data().dataset);
    const Evaluator evaluator(wide);
    const LossSpec loss = LossSpec::synthetic();
    EvaluationReport baseline = evaluator.metrics(wide.initial_priorities, evaluator.full_range());
    baseline.loss = loss.value(baseline, nullptr);
    std::uint64_t ordinal = 0;
    for (auto _ : state) {
        Rng rng(8, ordinal++);
        const PriorityVector p = random_candidate(wide, RandomSearchParams{0.4, 0.0}, rng);
        benchmark::DoNotOptimize(
            evaluator.evaluate(p, loss, &baseline, evaluator.full_range()).loss);
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_EvaluateAugmented)->Unit(benchmark::kMillisecond);

// Candidate generation alone (per-ordinal counter streams).
void BM_RandomCandidate(benchmark::State& state) {
    const SyntheticData& s = data();
    std::uint64_t ordinal = 0;
    for (auto _ : state) {
        Rng rng(9, ordinal++);
        benchmark::DoNotOptimize(random_candidate(s.dataset, RandomSearchParams{0.4, 0.2}, rng));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_RandomCandidate);

// Blacklist dependency precompute on a mid-sized synthetic stream.
void BM_DependencyPrecompute(benchmark::State& state) {
    Rng rng(10, 0);
    std::map<int, Action> actions{{1, Action::accept}, {2, Action::alert}, {3, Action::decline}};
    std::vector<Rule> rules(6);
    for (std::size_t j = 0; j < rules.size(); ++j) {
        rules[j].id = "r" + std::to_string(j);
        rules[j].action = Action::decline;
        rules[j].original_priority = 3;
        if (j < 3) rules[j].updates_fields = {"email"};
        if (j >= 2) rules[j].checks_fields = {"email"};
    }
    const std::size_t n = 50000;
    TriggerMatrixBuilder builder(n, rules.size());
    const char* emails[] = {"a", "b", "c", "d", "e", "f", "g", "h"};
    for (std::size_t i = 0; i < n; ++i) {
        builder.set_timestamp(i, static_cast<std::int64_t>(i) * 1000);
        builder.set_label(i, rng.next_below(20) == 0);
        for (std::size_t j = 0; j < rules.size(); ++j) {
            if (rng.next_below(40) == 0) builder.set_fired(i, j);
        }
        builder.add_field(i, "email", emails[rng.next_below(8)]);
    }
    const Dataset d = Dataset::validate(rules, ActionMap(actions), builder.build());
    for (auto _ : state) {
        benchmark::DoNotOptimize(compute_blacklist_dependencies(d).empty());
    }
}
BENCHMARK(BM_DependencyPrecompute)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
