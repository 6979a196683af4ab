#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ruleopt/rules.hpp"

namespace ruleopt {

enum class MetricKind : std::uint8_t { rules_pct, recall, alerts_pct, fpr };

std::string_view to_string(MetricKind metric);
std::optional<MetricKind> metric_from_string(std::string_view name);
double metric_value(const EvaluationReport& report, MetricKind metric);

class MissingBaselineError : public std::runtime_error {
public:
    MissingBaselineError() : std::runtime_error("loss references baseline metrics but no baseline report was given") {}
};

/// One weighted metric term; `baseline` selects the baseline report's value
/// instead of the candidate's.
struct MetricTerm {
    MetricKind metric = MetricKind::recall;
    double weight = 0.0;
    bool baseline = false;
};

/// constant + sum of weighted metric terms over the candidate and (optionally)
/// baseline reports.
struct LinearExpr {
    double constant = 0.0;
    std::vector<MetricTerm> terms;

    double value(const EvaluationReport& report, const EvaluationReport* baseline) const;
    bool needs_baseline() const;
};

enum class Comparator : std::uint8_t { ge, le };

/// candidate metric {>=, <=} bound, where the bound may reference baseline
/// metrics. Boundary inequalities are closed.
struct LossConstraint {
    MetricKind metric = MetricKind::recall;
    Comparator cmp = Comparator::ge;
    LinearExpr bound;
};

/// User-defined loss: a weighted objective guarded by constraints, with a
/// penalty expression applied when any constraint fails.
class LossSpec {
public:
    LossSpec() = default;
    LossSpec(LinearExpr objective, std::vector<LossConstraint> constraints, LinearExpr penalty);

    double value(const EvaluationReport& report, const EvaluationReport* baseline) const;
    bool needs_baseline() const { return needs_baseline_; }

    const LinearExpr& objective() const { return objective_; }
    const std::vector<LossConstraint>& constraints() const { return constraints_; }
    const LinearExpr& penalty() const { return penalty_; }

    // The three shipped losses, expressed in the generic form.
    static LossSpec synthetic();
    static LossSpec d1();
    static LossSpec d2();
    static std::optional<LossSpec> builtin(std::string_view name);

private:
    LinearExpr objective_;
    std::vector<LossConstraint> constraints_;
    LinearExpr penalty_;
    bool needs_baseline_ = false;
};

/// 0.1 * rules% - 0.5 * recall + 0.4 * alerts%.
double loss_synthetic(const EvaluationReport& report);

/// 0.5 * rules% + 0.5 * alerts% while recall stays within 95% of the
/// baseline's; otherwise 1 + (baseline recall - recall).
double loss_d1(const EvaluationReport& report, const EvaluationReport& baseline);

/// 0.05 * rules% - 0.95 * recall while fpr does not exceed the baseline's;
/// otherwise 0.05 + (baseline fpr - fpr).
double loss_d2(const EvaluationReport& report, const EvaluationReport& baseline);

}  // namespace ruleopt
