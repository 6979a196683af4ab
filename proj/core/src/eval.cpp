#include "ruleopt/eval.hpp"

#include <algorithm>
#include <bit>
#include <cassert>
#include <map>
#include <stdexcept>

namespace ruleopt {

Action decide(std::span<const int> adjusted, const ActionMap& actions) {
    int best = kInactive;
    for (int v : adjusted) best = std::max(best, v);
    if (best == kInactive) return Action::accept;  // default action
    auto action = actions.action_for(best);
    if (!action) throw std::invalid_argument("decide: unmapped priority " + std::to_string(best));
    return *action;
}

Outcome get_truth_value(Action decision, int label) {
    if (decision == Action::accept) {
        return label ? Outcome::false_negative : Outcome::true_negative;
    }
    return label ? Outcome::true_positive : Outcome::false_positive;
}

Evaluator::Evaluator(const Dataset& data, const DependencyIndex* bd) : data_(&data), bd_(bd) {
    if (!bd_ || bd_->empty()) return;
    std::map<std::uint32_t, CheckerDeps> per_checker;
    std::vector<std::uint32_t> checkers_here;
    for (const auto& [row, pairs] : bd_->by_row()) {
        checkers_here.clear();
        for (const DependencyPair& p : pairs) {
            if (std::find(checkers_here.begin(), checkers_here.end(), p.checker) ==
                checkers_here.end()) {
                checkers_here.push_back(p.checker);
            }
        }
        for (std::uint32_t checker : checkers_here) {
            CheckerDeps& cd = per_checker[checker];
            if (cd.offsets.empty()) {
                cd.checker = checker;
                cd.offsets.push_back(0);
            }
            cd.rows.push_back(row);
            for (const DependencyPair& p : pairs) {
                if (p.checker == checker) cd.enablers.push_back(p.enabler);
            }
            cd.offsets.push_back(static_cast<std::uint32_t>(cd.enablers.size()));
        }
    }
    checker_deps_.reserve(per_checker.size());
    for (auto& [checker, cd] : per_checker) checker_deps_.push_back(std::move(cd));
}

namespace {

struct PriorityGroup {
    int priority;
    Action action;
    std::vector<std::uint32_t> cols;
};

}  // namespace

template <typename GroupSink, typename DefaultSink>
void Evaluator::sweep(const PriorityVector& p, RowRange range, GroupSink&& on_group,
                      DefaultSink&& on_default) const {
    const TriggerMatrix& tm = data_->triggers;
    const std::size_t cols = tm.cols();

    std::vector<std::uint8_t> parent_active(data_->parent_count, 0);
    for (std::size_t i = 0; i < cols; ++i) {
        if (p.active(i)) parent_active[data_->parent[i]] = 1;
    }

    // Active columns grouped by priority, highest first. Every priority maps
    // to exactly one action, so a group resolves to one decision.
    std::map<int, PriorityGroup, std::greater<>> groups;
    for (std::size_t i = 0; i < cols; ++i) {
        if (!p.active(i)) continue;
        auto [it, inserted] = groups.try_emplace(p[i]);
        if (inserted) {
            it->second.priority = p[i];
            it->second.action = *data_->actions.action_for(p[i]);
        }
        it->second.cols.push_back(static_cast<std::uint32_t>(i));
    }

    const std::size_t word_begin = range.begin / 64;
    const std::size_t word_end = (range.end + 63) / 64;
    const std::size_t span_words = word_end - word_begin;

    // Kill bitmaps: rows where an active checker column loses its trigger
    // because every recorded enabler is inactive. Indexed by original checker
    // id so clone columns share their parent's mask.
    std::vector<std::vector<std::uint64_t>> kill_store;
    std::vector<const std::uint64_t*> kill_of_col;
    if (!checker_deps_.empty()) {
        kill_store.reserve(checker_deps_.size());
        std::vector<const std::uint64_t*> kill_of_parent(data_->parent_count, nullptr);
        for (const CheckerDeps& cd : checker_deps_) {
            if (!parent_active[cd.checker]) continue;  // no active variant to adjust
            std::vector<std::uint64_t> mask(span_words, 0);
            bool any = false;
            for (std::size_t r = 0; r < cd.rows.size(); ++r) {
                const std::uint32_t row = cd.rows[r];
                if (row < range.begin || row >= range.end) continue;
                bool enabled = false;
                for (std::uint32_t e = cd.offsets[r]; e < cd.offsets[r + 1]; ++e) {
                    if (parent_active[cd.enablers[e]]) {
                        enabled = true;
                        break;
                    }
                }
                if (!enabled) {
                    mask[row / 64 - word_begin] |= std::uint64_t{1} << (row % 64);
                    any = true;
                }
            }
            if (any) {
                kill_store.push_back(std::move(mask));
                kill_of_parent[cd.checker] = kill_store.back().data();
            }
        }
        if (!kill_store.empty()) {
            kill_of_col.assign(cols, nullptr);
            for (std::size_t i = 0; i < cols; ++i) {
                if (p.active(i)) kill_of_col[i] = kill_of_parent[data_->parent[i]];
            }
        }
    }

    const std::uint64_t* label_words = tm.label_words().data();
    for (std::size_t w = word_begin; w < word_end; ++w) {
        std::uint64_t remaining = ~std::uint64_t{0};
        if (w == word_begin && range.begin % 64 != 0) {
            remaining &= ~std::uint64_t{0} << (range.begin % 64);
        }
        if (w == word_end - 1 && range.end % 64 != 0) {
            remaining &= (std::uint64_t{1} << (range.end % 64)) - 1;
        }
        for (const auto& [priority, group] : groups) {
            std::uint64_t acc = 0;
            for (std::uint32_t col : group.cols) {
                std::uint64_t word = tm.column(col)[w];
                if (!kill_of_col.empty() && kill_of_col[col]) {
                    word &= ~kill_of_col[col][w - word_begin];
                }
                acc |= word;
            }
            const std::uint64_t hit = remaining & acc;
            if (!hit) continue;
            on_group(group.action, w, hit, label_words[w]);
            remaining &= ~hit;
            if (!remaining) break;
        }
        if (remaining) on_default(w, remaining, label_words[w]);
    }
}

EvaluationReport Evaluator::metrics(const PriorityVector& p, RowRange range) const {
    if (auto problem = data_->check_candidate(p)) throw std::invalid_argument(*problem);
    if (range.end > data_->triggers.rows() || range.begin > range.end) {
        throw std::invalid_argument("row range out of bounds");
    }

    EvaluationReport report;
    auto count = [&report](Action action, std::uint64_t hit, std::uint64_t labels) {
        const auto fraud = static_cast<std::int64_t>(std::popcount(hit & labels));
        const auto all = static_cast<std::int64_t>(std::popcount(hit));
        report.counts[static_cast<std::size_t>(action)][1] += fraud;
        report.counts[static_cast<std::size_t>(action)][0] += all - fraud;
    };
    sweep(
        p, range,
        [&](Action action, std::size_t, std::uint64_t hit, std::uint64_t labels) {
            count(action, hit, labels);
        },
        [&](std::size_t, std::uint64_t hit, std::uint64_t labels) {
            count(Action::accept, hit, labels);
        });

    const auto& c = report.counts;
    report.tn = c[static_cast<std::size_t>(Action::accept)][0];
    report.fn = c[static_cast<std::size_t>(Action::accept)][1];
    report.fp = c[static_cast<std::size_t>(Action::alert)][0] +
                c[static_cast<std::size_t>(Action::decline)][0];
    report.tp = c[static_cast<std::size_t>(Action::alert)][1] +
                c[static_cast<std::size_t>(Action::decline)][1];

    if (report.tp + report.fn > 0) {
        report.recall = static_cast<double>(report.tp) / static_cast<double>(report.tp + report.fn);
    } else {
        report.recall = 0.0;
        report.recall_defined = false;
    }
    if (report.fp + report.tn > 0) {
        report.fpr = static_cast<double>(report.fp) / static_cast<double>(report.fp + report.tn);
    } else {
        report.fpr = 0.0;
        report.fpr_defined = false;
    }
    const auto n = static_cast<double>(range.size());
    const auto alerts = c[static_cast<std::size_t>(Action::alert)][0] +
                        c[static_cast<std::size_t>(Action::alert)][1];
    report.alert_rate = n > 0 ? static_cast<double>(alerts) / n : 0.0;

    std::vector<std::uint8_t> parent_active(data_->parent_count, 0);
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p.active(i)) parent_active[data_->parent[i]] = 1;
    }
    const auto active = std::count(parent_active.begin(), parent_active.end(), std::uint8_t{1});
    report.rules_active_fraction =
        data_->parent_count > 0 ? static_cast<double>(active) / static_cast<double>(data_->parent_count)
                                : 0.0;
    return report;
}

EvaluationReport Evaluator::evaluate(const PriorityVector& p, const LossSpec& loss,
                                     const EvaluationReport* baseline, RowRange range) const {
    EvaluationReport report = metrics(p, range);
    report.loss = loss.value(report, baseline);
    return report;
}

std::vector<Action> Evaluator::decisions(const PriorityVector& p, RowRange range) const {
    if (auto problem = data_->check_candidate(p)) throw std::invalid_argument(*problem);
    std::vector<Action> out(range.size(), Action::accept);
    auto assign = [&](Action action, std::size_t w, std::uint64_t hit) {
        while (hit) {
            const int bit = std::countr_zero(hit);
            out[w * 64 + static_cast<std::size_t>(bit) - range.begin] = action;
            hit &= hit - 1;
        }
    };
    sweep(
        p, range,
        [&](Action action, std::size_t w, std::uint64_t hit, std::uint64_t) {
            assign(action, w, hit);
        },
        [&](std::size_t w, std::uint64_t hit, std::uint64_t) { assign(Action::accept, w, hit); });
    return out;
}

}  // namespace ruleopt
