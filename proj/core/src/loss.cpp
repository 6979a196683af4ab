#include "ruleopt/loss.hpp"

#include <cmath>

namespace ruleopt {

std::string_view to_string(MetricKind metric) {
    switch (metric) {
        case MetricKind::rules_pct: return "rules_pct";
        case MetricKind::recall: return "recall";
        case MetricKind::alerts_pct: return "alerts_pct";
        case MetricKind::fpr: return "fpr";
    }
    return "?";
}

std::optional<MetricKind> metric_from_string(std::string_view name) {
    if (name == "rules_pct" || name == "rules%") return MetricKind::rules_pct;
    if (name == "recall") return MetricKind::recall;
    if (name == "alerts_pct" || name == "alerts%" || name == "alert_rate") return MetricKind::alerts_pct;
    if (name == "fpr") return MetricKind::fpr;
    return std::nullopt;
}

double metric_value(const EvaluationReport& report, MetricKind metric) {
    switch (metric) {
        case MetricKind::rules_pct: return report.rules_active_fraction;
        case MetricKind::recall: return report.recall;
        case MetricKind::alerts_pct: return report.alert_rate;
        case MetricKind::fpr: return report.fpr;
    }
    return 0.0;
}

double LinearExpr::value(const EvaluationReport& report, const EvaluationReport* baseline) const {
    double sum = constant;
    for (const MetricTerm& term : terms) {
        const EvaluationReport* src = term.baseline ? baseline : &report;
        if (!src) throw MissingBaselineError();
        sum += term.weight * metric_value(*src, term.metric);
    }
    return sum;
}

bool LinearExpr::needs_baseline() const {
    for (const MetricTerm& term : terms) {
        if (term.baseline) return true;
    }
    return false;
}

LossSpec::LossSpec(LinearExpr objective, std::vector<LossConstraint> constraints, LinearExpr penalty)
    : objective_(std::move(objective)),
      constraints_(std::move(constraints)),
      penalty_(std::move(penalty)) {
    for (const MetricTerm& term : objective_.terms) {
        if (!std::isfinite(term.weight)) throw std::invalid_argument("non-finite loss weight");
    }
    needs_baseline_ = objective_.needs_baseline() || penalty_.needs_baseline();
    for (const LossConstraint& c : constraints_) {
        needs_baseline_ = needs_baseline_ || c.bound.needs_baseline();
    }
}

double LossSpec::value(const EvaluationReport& report, const EvaluationReport* baseline) const {
    if (needs_baseline_ && !baseline) throw MissingBaselineError();
    for (const LossConstraint& c : constraints_) {
        const double lhs = metric_value(report, c.metric);
        const double rhs = c.bound.value(report, baseline);
        const bool ok = c.cmp == Comparator::ge ? lhs >= rhs : lhs <= rhs;
        if (!ok) return penalty_.value(report, baseline);
    }
    return objective_.value(report, baseline);
}

LossSpec LossSpec::synthetic() {
    LinearExpr objective;
    objective.terms = {{MetricKind::rules_pct, 0.1, false},
                       {MetricKind::recall, -0.5, false},
                       {MetricKind::alerts_pct, 0.4, false}};
    return LossSpec(std::move(objective), {}, {});
}

LossSpec LossSpec::d1() {
    LinearExpr objective;
    objective.terms = {{MetricKind::rules_pct, 0.5, false}, {MetricKind::alerts_pct, 0.5, false}};
    LossConstraint keep_recall;
    keep_recall.metric = MetricKind::recall;
    keep_recall.cmp = Comparator::ge;
    keep_recall.bound.terms = {{MetricKind::recall, 0.95, true}};
    LinearExpr penalty;
    penalty.constant = 1.0;
    penalty.terms = {{MetricKind::recall, 1.0, true}, {MetricKind::recall, -1.0, false}};
    return LossSpec(std::move(objective), {std::move(keep_recall)}, std::move(penalty));
}

LossSpec LossSpec::d2() {
    LinearExpr objective;
    objective.terms = {{MetricKind::rules_pct, 0.05, false}, {MetricKind::recall, -0.95, false}};
    LossConstraint keep_fpr;
    keep_fpr.metric = MetricKind::fpr;
    keep_fpr.cmp = Comparator::le;
    keep_fpr.bound.terms = {{MetricKind::fpr, 1.0, true}};
    LinearExpr penalty;
    penalty.constant = 0.05;
    penalty.terms = {{MetricKind::fpr, 1.0, true}, {MetricKind::fpr, -1.0, false}};
    return LossSpec(std::move(objective), {std::move(keep_fpr)}, std::move(penalty));
}

std::optional<LossSpec> LossSpec::builtin(std::string_view name) {
    if (name == "synthetic") return synthetic();
    if (name == "d1") return d1();
    if (name == "d2") return d2();
    return std::nullopt;
}

double loss_synthetic(const EvaluationReport& report) {
    return 0.1 * report.rules_active_fraction - 0.5 * report.recall + 0.4 * report.alert_rate;
}

double loss_d1(const EvaluationReport& report, const EvaluationReport& baseline) {
    constexpr double alpha = 0.5;
    constexpr double beta = 0.5;
    if (report.recall >= 0.95 * baseline.recall) {
        return alpha * report.rules_active_fraction + beta * report.alert_rate;
    }
    return alpha + beta + (baseline.recall - report.recall);
}

double loss_d2(const EvaluationReport& report, const EvaluationReport& baseline) {
    constexpr double alpha = 0.05;
    constexpr double beta = 0.95;
    if (report.fpr <= baseline.fpr) {
        return alpha * report.rules_active_fraction - beta * report.recall;
    }
    return alpha + (baseline.fpr - report.fpr);
}

}  // namespace ruleopt
