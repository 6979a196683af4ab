#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ruleopt/blacklist.hpp"
#include "ruleopt/loss.hpp"
#include "ruleopt/rules.hpp"

namespace ruleopt {

/// Half-open row window [begin, end).
struct RowRange {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const { return end - begin; }
    friend bool operator==(const RowRange&, const RowRange&) = default;
};

enum class Outcome : std::uint8_t { true_negative, false_negative, false_positive, true_positive };

/// Action of the highest-priority adjusted trigger; accept when none.
Action decide(std::span<const int> adjusted, const ActionMap& actions);

/// accept/legit -> TN, accept/fraud -> FN, alert-or-decline/legit -> FP,
/// alert-or-decline/fraud -> TP.
Outcome get_truth_value(Action decision, int label);

/// Evaluates candidate configurations over a dataset. Per row the pipeline is
/// mask -> blacklist adjustment -> decide -> truth value, executed as bitwise
/// sweeps over 64-row blocks grouped by priority level. Pure given the
/// immutable dataset and dependency index; safe to call concurrently.
class Evaluator {
public:
    /// `bd` may be null when the ruleset has no blacklist rules. Both the
    /// dataset and the index must outlive the evaluator.
    explicit Evaluator(const Dataset& data, const DependencyIndex* bd = nullptr);

    RowRange full_range() const { return {0, data_->triggers.rows()}; }

    /// Counts and derived metrics; the loss field is left at zero.
    EvaluationReport metrics(const PriorityVector& p, RowRange range) const;

    /// metrics() plus the loss. `baseline` is required when the loss
    /// references baseline metrics.
    EvaluationReport evaluate(const PriorityVector& p, const LossSpec& loss,
                              const EvaluationReport* baseline, RowRange range) const;

    /// Per-row decisions over the window, in row order.
    std::vector<Action> decisions(const PriorityVector& p, RowRange range) const;

    const Dataset& dataset() const { return *data_; }

private:
    struct CheckerDeps {
        std::uint32_t checker = 0;               // original column id
        std::vector<std::uint32_t> rows;         // ascending rows with recorded pairs
        std::vector<std::uint32_t> offsets;      // rows.size() + 1
        std::vector<std::uint32_t> enablers;     // original column ids, flat
    };

    template <typename GroupSink, typename DefaultSink>
    void sweep(const PriorityVector& p, RowRange range, GroupSink&& on_group,
               DefaultSink&& on_default) const;

    const Dataset* data_;
    const DependencyIndex* bd_;
    std::vector<CheckerDeps> checker_deps_;
};

}  // namespace ruleopt
