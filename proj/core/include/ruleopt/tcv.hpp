#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ruleopt/eval.hpp"
#include "ruleopt/optimize.hpp"
#include "ruleopt/rules.hpp"

namespace ruleopt {

/// Period length for fold construction: a fixed duration or a row count.
struct FoldSpec {
    std::optional<std::int64_t> period_ms;
    std::optional<std::size_t> period_rows;
    std::size_t stride = 1;  // periods advanced between folds
};

/// One temporal fold: three consecutive, disjoint, time-ordered windows.
struct Fold {
    RowRange train;
    RowRange validation;
    RowRange test;
};

/// Sliding window of three consecutive periods advancing `stride` periods per
/// fold. A trailing partial period counts as a period. Throws when the data
/// spans fewer than three periods.
std::vector<Fold> make_folds(const TriggerMatrix& triggers, const FoldSpec& spec);

/// Jaccard similarity of two deactivated-rule id sets; 1 when both are empty.
double jaccard_removed(const std::vector<std::string>& removed_a,
                       const std::vector<std::string>& removed_b);

/// Rank-consistency of two greedy inclusion orders. Relevance of rule x is
/// |reference| - rank(x) (1-based; missing rules score 0); DCG over the other
/// order with 1/log2(i+1) discounts, normalized by the reference's own DCG.
/// All-zero relevance (e.g. single-element orders) normalizes to 1. Throws on
/// empty orders.
double ndcg_consistency(std::span<const std::string> reference,
                        std::span<const std::string> other);

struct BaselineRun {
    std::string name;
    PriorityVector priorities;
    EvaluationReport train_report;
    EvaluationReport validation_report;
    double delta_loss_validation = 0.0;  // vs the all-on system, validation split
};

struct BaselineSet {
    std::vector<BaselineRun> runs;  // all_on, all_off, then one per grid rho
    double selected_rho = 0.0;      // grid rho with the lowest validation loss
    std::size_t selected_index = 0;
};

struct BaselineOptions {
    std::vector<double> rho_grid;  // empty = 4%..92% in 4% steps
    std::uint64_t evaluations_per_rho = 10000;
    std::uint64_t seed = 0;
    int threads = 1;
};

/// Baseline systems for one fold: all rules on, mandatory-only, and a
/// random-search sweep over the rho grid trained on the fold's train window
/// with the winner selected on validation.
BaselineSet run_baselines(const Evaluator& evaluator, const LossSpec& loss, const Fold& fold,
                          const BaselineOptions& options);

/// losses[i][j - i] = loss of fold i's best configuration on fold j's test
/// window, j >= i; the per-window baseline is the all-on system evaluated on
/// that same window.
std::vector<std::vector<double>> cross_fold_losses(const Evaluator& evaluator,
                                                   const LossSpec& loss,
                                                   std::span<const PriorityVector> fold_best,
                                                   std::span<const Fold> folds);

}  // namespace ruleopt
