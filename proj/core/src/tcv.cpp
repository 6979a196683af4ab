#include "ruleopt/tcv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>

namespace ruleopt {

std::vector<Fold> make_folds(const TriggerMatrix& triggers, const FoldSpec& spec) {
    if (spec.period_ms.has_value() == spec.period_rows.has_value()) {
        throw std::invalid_argument("fold spec needs exactly one of period_ms or period_rows");
    }
    if (spec.stride == 0) throw std::invalid_argument("fold stride must be positive");
    const std::size_t rows = triggers.rows();
    if (rows == 0) throw std::invalid_argument("dataset shorter than one fold");

    // Period boundaries as row offsets.
    std::vector<std::size_t> bounds{0};
    if (spec.period_rows) {
        if (*spec.period_rows == 0) throw std::invalid_argument("period_rows must be positive");
        for (std::size_t b = *spec.period_rows; b < rows; b += *spec.period_rows) bounds.push_back(b);
    } else {
        if (*spec.period_ms <= 0) throw std::invalid_argument("period_ms must be positive");
        const std::int64_t t0 = triggers.timestamp_ms(0);
        std::size_t row = 0;
        for (std::int64_t edge = t0 + *spec.period_ms;; edge += *spec.period_ms) {
            while (row < rows && triggers.timestamp_ms(row) < edge) ++row;
            if (row >= rows) break;
            bounds.push_back(row);
        }
    }
    bounds.push_back(rows);

    const std::size_t periods = bounds.size() - 1;
    if (periods < 3) {
        throw std::invalid_argument("dataset shorter than one fold (" + std::to_string(periods) +
                                    " period(s), need 3)");
    }
    std::vector<Fold> folds;
    for (std::size_t start = 0; start + 3 <= periods; start += spec.stride) {
        folds.push_back(Fold{{bounds[start], bounds[start + 1]},
                             {bounds[start + 1], bounds[start + 2]},
                             {bounds[start + 2], bounds[start + 3]}});
    }
    return folds;
}

double jaccard_removed(const std::vector<std::string>& removed_a,
                       const std::vector<std::string>& removed_b) {
    const std::set<std::string> a(removed_a.begin(), removed_a.end());
    const std::set<std::string> b(removed_b.begin(), removed_b.end());
    if (a.empty() && b.empty()) return 1.0;
    std::size_t intersection = 0;
    for (const auto& x : a) intersection += b.count(x);
    const std::size_t united = a.size() + b.size() - intersection;
    return static_cast<double>(intersection) / static_cast<double>(united);
}

double ndcg_consistency(std::span<const std::string> reference, std::span<const std::string> other) {
    if (reference.empty() || other.empty()) {
        throw std::invalid_argument("ndcg_consistency: empty order");
    }
    auto relevance = [&](const std::string& id) -> double {
        for (std::size_t i = 0; i < reference.size(); ++i) {
            if (reference[i] == id) return static_cast<double>(reference.size() - (i + 1));
        }
        return 0.0;
    };
    double dcg = 0.0;
    for (std::size_t i = 0; i < other.size(); ++i) {
        dcg += relevance(other[i]) / std::log2(static_cast<double>(i) + 2.0);
    }
    // The reference's own ordering is ideal: relevance decreases with rank.
    double ideal = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        ideal += static_cast<double>(reference.size() - (i + 1)) /
                 std::log2(static_cast<double>(i) + 2.0);
    }
    if (ideal == 0.0) return 1.0;
    return dcg / ideal;
}

BaselineSet run_baselines(const Evaluator& evaluator, const LossSpec& loss, const Fold& fold,
                          const BaselineOptions& options) {
    const Dataset& data = evaluator.dataset();
    std::vector<double> grid = options.rho_grid;
    if (grid.empty()) {
        for (int pct = 4; pct <= 92; pct += 4) grid.push_back(pct / 100.0);
    }

    // Per-window all-on reports; they double as the loss baseline Omega^1.
    EvaluationReport train_base = evaluator.metrics(data.initial_priorities, fold.train);
    train_base.loss = loss.value(train_base, &train_base);
    EvaluationReport val_base = evaluator.metrics(data.initial_priorities, fold.validation);
    val_base.loss = loss.value(val_base, &val_base);

    auto scored = [&](const PriorityVector& p, RowRange range,
                      const EvaluationReport& base) -> EvaluationReport {
        EvaluationReport r = evaluator.metrics(p, range);
        r.loss = loss.value(r, &base);
        return r;
    };

    BaselineSet set;
    set.runs.push_back(BaselineRun{"all_on", data.initial_priorities, train_base, val_base, 0.0});

    PriorityVector mandatory_only = data.initial_priorities;
    for (std::size_t i = 0; i < data.rules.size(); ++i) {
        if (!data.rules[i].mandatory && !data.rules[i].frozen) mandatory_only[i] = kInactive;
    }
    {
        EvaluationReport val = scored(mandatory_only, fold.validation, val_base);
        set.runs.push_back(BaselineRun{"all_off", mandatory_only,
                                       scored(mandatory_only, fold.train, train_base), val,
                                       val.loss - val_base.loss});
    }

    std::size_t best = 0;
    double best_val = 0.0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        RandomSearchParams params;
        params.shutoff_prob = grid[g];
        OptimizeOptions opt;
        opt.stopping = StoppingCriteria::evaluations(options.evaluations_per_rho);
        opt.seed = options.seed + g;  // independent streams per grid point
        opt.threads = options.threads;
        opt.range = fold.train;
        SearchResult result = optimize(evaluator, loss, train_base, params, opt);

        EvaluationReport val = scored(result.best, fold.validation, val_base);
        char name[32];
        std::snprintf(name, sizeof(name), "random rho=%.2f", grid[g]);
        set.runs.push_back(BaselineRun{name, std::move(result.best), result.best_report, val,
                                       val.loss - val_base.loss});
        const std::size_t run_index = set.runs.size() - 1;
        if (run_index == 2 || val.loss < best_val) {
            best = run_index;
            best_val = val.loss;
            set.selected_rho = grid[g];
        }
    }
    set.selected_index = best;
    return set;
}

std::vector<std::vector<double>> cross_fold_losses(const Evaluator& evaluator,
                                                   const LossSpec& loss,
                                                   std::span<const PriorityVector> fold_best,
                                                   std::span<const Fold> folds) {
    if (fold_best.size() != folds.size()) {
        throw std::invalid_argument("cross_fold_losses: one best configuration per fold required");
    }
    const Dataset& data = evaluator.dataset();
    std::vector<EvaluationReport> test_base(folds.size());
    for (std::size_t j = 0; j < folds.size(); ++j) {
        test_base[j] = evaluator.metrics(data.initial_priorities, folds[j].test);
        test_base[j].loss = loss.value(test_base[j], &test_base[j]);
    }
    std::vector<std::vector<double>> table(folds.size());
    for (std::size_t i = 0; i < folds.size(); ++i) {
        for (std::size_t j = i; j < folds.size(); ++j) {
            EvaluationReport r = evaluator.metrics(fold_best[i], folds[j].test);
            r.loss = loss.value(r, &test_base[j]);
            table[i].push_back(r.loss);
        }
    }
    return table;
}

}  // namespace ruleopt
