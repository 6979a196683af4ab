#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "ruleopt/eval.hpp"
#include "ruleopt/rng.hpp"
#include "ruleopt/rules.hpp"

namespace ruleopt {

struct NoImprovementCriterion {
    double epsilon = 0.0;
    std::uint64_t window = 0;  // evaluations between checks
};

/// When nothing is set, optimize() applies the default budget of 10000
/// candidate evaluations.
struct StoppingCriteria {
    std::optional<std::uint64_t> max_evaluations;
    std::optional<double> max_seconds;
    std::optional<NoImprovementCriterion> no_improvement;

    bool any() const { return max_evaluations || max_seconds || no_improvement; }
    static StoppingCriteria evaluations(std::uint64_t n) {
        StoppingCriteria sc;
        sc.max_evaluations = n;
        return sc;
    }
};

struct TracePoint {
    std::uint64_t eval_index = 0;  // 1-based candidate ordinal
    double candidate_loss = 0.0;
    double best_loss = 0.0;
};

struct SearchResult {
    PriorityVector best;
    EvaluationReport best_report;
    std::vector<TracePoint> trace;
    std::vector<std::uint32_t> inclusion_order;  // greedy: committed columns, in order
    std::uint64_t evaluations = 0;
};

struct RandomSearchParams {
    double shutoff_prob = 0.4;   // per-rule probability of deactivation
    double shuffle_prob = 0.0;   // per-rule probability of a priority shuffle
};

struct GreedyParams {
    bool backtracking = false;
    std::uint32_t contraction_count = 1;   // rules removed per contraction
    std::uint64_t contraction_period = 0;  // expansions between contractions; 0 = pool/10
};

enum class MutationKind : std::uint8_t {
    activation_flip,   // toggle between inactive and the gene's original priority
    priority_shuffle,  // reshuffle active genes within their action's alphabet
};

struct GeneticParams {
    std::uint32_t population = 30;
    double survivors_fraction = 0.05;
    double mutation_prob = 0.1;
    std::optional<std::uint64_t> generations;
    MutationKind mutation = MutationKind::activation_flip;
};

using MethodParams = std::variant<RandomSearchParams, GreedyParams, GeneticParams>;

using CandidateObserver =
    std::function<void(std::uint64_t eval_index, const PriorityVector& candidate, double loss)>;

struct OptimizeOptions {
    StoppingCriteria stopping;
    std::uint64_t seed = 0;
    int threads = 1;
    std::optional<RowRange> range;  // rows to evaluate on; defaults to the full dataset
    CandidateObserver observer;     // called once per evaluated candidate, in ordinal order
};

/// Uniform draw from the same-action alphabet excluding the current priority;
/// singleton alphabets return the priority unchanged.
int random_priority_shuffle(int priority, Action action, const ActionMap& actions, Rng& rng);

/// Widens the search space by appending, per non-frozen rule, one clone column
/// per alternative same-action priority. Clones share the parent's firing
/// column, are never mandatory, and start inactive. Dependency indexes must be
/// computed on the pre-augmentation dataset; evaluation resolves clones
/// through their parent.
Dataset augment_rules_pool(const Dataset& data);

/// One random-search candidate: per rule, shuffle with probability
/// shuffle_prob, then deactivate with probability shutoff_prob; frozen rules
/// are untouched, mandatory rules are never deactivated.
PriorityVector random_candidate(const Dataset& data, const RandomSearchParams& params, Rng& rng);

/// Start-of-search individual: the initial configuration with each
/// non-mandatory, non-frozen gene deactivated with probability mutation_prob.
PriorityVector genetic_init_individual(const Dataset& data, double mutation_prob, Rng& rng);

/// Uniform crossover: each gene comes from mother or father with equal
/// probability.
PriorityVector crossover_uniform(const PriorityVector& mother, const PriorityVector& father,
                                 Rng& rng);

void mutate_activation_flip(PriorityVector& p, const Dataset& data, double mutation_prob, Rng& rng);
void mutate_priority_shuffle(PriorityVector& p, const Dataset& data, double mutation_prob,
                             Rng& rng);

/// Runs the selected search heuristic. Best-so-far starts at the dataset's
/// initial configuration with the provided baseline report (whose loss must
/// already be filled in); a candidate replaces it only on strictly lower
/// loss. Deterministic for a fixed seed, independent of thread count.
SearchResult optimize(const Evaluator& evaluator, const LossSpec& loss,
                      const EvaluationReport& baseline, const MethodParams& params,
                      const OptimizeOptions& options);

}  // namespace ruleopt
