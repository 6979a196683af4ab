#include "ruleopt/optimize.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace ruleopt {

namespace {

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    const auto workers = static_cast<std::size_t>(
        std::min<std::size_t>(static_cast<std::size_t>(threads), count));
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

/// Serialized reduction point shared by all methods: best-so-far, trace,
/// observer, and the no-improvement window.
class BestTracker {
public:
    BestTracker(const PriorityVector& initial, const EvaluationReport& baseline,
                const StoppingCriteria& stopping, const CandidateObserver& observer)
        : best_(initial),
          best_report_(baseline),
          best_loss_(baseline.loss),
          observer_(observer),
          start_(std::chrono::steady_clock::now()),
          stopping_(stopping) {
        if (stopping_.no_improvement) {
            window_ = stopping_.no_improvement->window;
            next_check_ = window_;
            window_start_best_ = best_loss_;
        }
    }

    void fold(const PriorityVector& candidate, const EvaluationReport& report) {
        ++evaluations_;
        if (report.loss < best_loss_) {
            best_ = candidate;
            best_report_ = report;
            best_loss_ = report.loss;
        }
        trace_.push_back(TracePoint{evaluations_, report.loss, best_loss_});
        if (observer_) observer_(evaluations_, candidate, report.loss);
        if (window_ > 0 && evaluations_ >= next_check_) {
            if (window_start_best_ - best_loss_ < stopping_.no_improvement->epsilon) {
                stalled_ = true;
            }
            window_start_best_ = best_loss_;
            next_check_ += window_;
        }
    }

    /// True once any stopping criterion fired; max_evaluations is treated as
    /// "no further evaluation may start".
    bool stop_requested() const {
        if (stalled_) return true;
        if (stopping_.max_evaluations && evaluations_ >= *stopping_.max_evaluations) return true;
        if (stopping_.max_seconds) {
            const auto elapsed = std::chrono::duration<double>(
                std::chrono::steady_clock::now() - start_).count();
            if (elapsed >= *stopping_.max_seconds) return true;
        }
        return false;
    }

    /// Evaluations still allowed by the budget, capped at `want`.
    std::uint64_t budget_for(std::uint64_t want) const {
        if (!stopping_.max_evaluations) return want;
        const std::uint64_t left =
            *stopping_.max_evaluations > evaluations_ ? *stopping_.max_evaluations - evaluations_ : 0;
        return std::min(want, left);
    }

    std::uint64_t evaluations() const { return evaluations_; }
    double best_loss() const { return best_loss_; }

    SearchResult take_result() {
        SearchResult r;
        r.best = std::move(best_);
        r.best_report = best_report_;
        r.trace = std::move(trace_);
        r.evaluations = evaluations_;
        return r;
    }

private:
    PriorityVector best_;
    EvaluationReport best_report_;
    double best_loss_;
    std::vector<TracePoint> trace_;
    const CandidateObserver& observer_;
    std::chrono::steady_clock::time_point start_;
    StoppingCriteria stopping_;
    std::uint64_t evaluations_ = 0;
    std::uint64_t window_ = 0;
    std::uint64_t next_check_ = 0;
    double window_start_best_ = 0.0;
    bool stalled_ = false;
};

struct Engine {
    const Evaluator& evaluator;
    const LossSpec& loss;
    const EvaluationReport& baseline;
    RowRange range;
    int threads;
    std::uint64_t seed;
    BestTracker tracker;

    /// Evaluates a batch in parallel and folds results in candidate order.
    std::vector<EvaluationReport> run_batch(const std::vector<PriorityVector>& candidates) {
        std::vector<EvaluationReport> reports(candidates.size());
        parallel_for(candidates.size(), threads, [&](std::size_t i) {
            reports[i] = evaluator.evaluate(candidates[i], loss, &baseline, range);
        });
        for (std::size_t i = 0; i < candidates.size(); ++i) tracker.fold(candidates[i], reports[i]);
        return reports;
    }
};

void run_random_search(Engine& e, const RandomSearchParams& params) {
    const Dataset& data = e.evaluator.dataset();
    std::uint64_t ordinal = 0;
    const std::uint64_t batch_cap = std::max<std::uint64_t>(64, static_cast<std::uint64_t>(e.threads) * 16);
    std::vector<PriorityVector> batch;
    while (!e.tracker.stop_requested()) {
        const std::uint64_t batch_size = e.tracker.budget_for(batch_cap);
        if (batch_size == 0) break;
        batch.clear();
        batch.reserve(batch_size);
        for (std::uint64_t b = 0; b < batch_size; ++b) {
            Rng rng(e.seed, ordinal++);
            batch.push_back(random_candidate(data, params, rng));
        }
        e.run_batch(batch);
    }
}

void run_genetic(Engine& e, const GeneticParams& params) {
    const Dataset& data = e.evaluator.dataset();
    const std::uint32_t population_size = params.population;
    const auto survivors = std::min<std::uint32_t>(
        population_size,
        static_cast<std::uint32_t>(std::ceil(params.survivors_fraction * population_size)));

    std::uint64_t ordinal = 0;
    std::vector<PriorityVector> population;
    population.reserve(population_size);
    for (std::uint32_t i = 0; i < population_size; ++i) {
        Rng rng(e.seed, ordinal++);
        population.push_back(genetic_init_individual(data, params.mutation_prob, rng));
    }

    std::uint64_t generation = 0;
    while (!e.tracker.stop_requested()) {
        if (params.generations && generation >= *params.generations) break;
        if (e.tracker.budget_for(population_size) < population_size) break;
        const std::vector<EvaluationReport> reports = e.run_batch(population);
        ++generation;

        // Stable selection: sort by loss, index breaking ties.
        std::vector<std::uint32_t> order(population_size);
        std::iota(order.begin(), order.end(), 0u);
        std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
            return reports[a].loss != reports[b].loss ? reports[a].loss < reports[b].loss : a < b;
        });

        std::vector<PriorityVector> next;
        next.reserve(population_size);
        for (std::uint32_t s = 0; s < survivors; ++s) next.push_back(population[order[s]]);
        while (next.size() < population_size) {
            Rng rng(e.seed, ordinal++);
            const PriorityVector& mother = next[rng.next_below(survivors)];
            const PriorityVector& father = next[rng.next_below(survivors)];
            PriorityVector child = crossover_uniform(mother, father, rng);
            if (params.mutation == MutationKind::activation_flip) {
                mutate_activation_flip(child, data, params.mutation_prob, rng);
            } else {
                mutate_priority_shuffle(child, data, params.mutation_prob, rng);
            }
            next.push_back(std::move(child));
        }
        population = std::move(next);
    }
}

void run_greedy(Engine& e, const GreedyParams& params, std::vector<std::uint32_t>& inclusion_order) {
    const Dataset& data = e.evaluator.dataset();
    const std::size_t cols = data.rules.size();

    PriorityVector current = data.initial_priorities;
    std::vector<std::uint32_t> expandable;
    for (std::size_t i = 0; i < cols; ++i) {
        if (data.rules[i].mandatory || data.rules[i].frozen) continue;
        current[i] = kInactive;
        expandable.push_back(static_cast<std::uint32_t>(i));
    }
    std::vector<std::uint8_t> in_q(cols, 0);

    const std::uint64_t period = params.contraction_period > 0
                                     ? params.contraction_period
                                     : std::max<std::uint64_t>(2, cols / 10);
    std::uint64_t expansions_since_contraction = 0;

    std::vector<PriorityVector> batch;
    std::vector<std::uint32_t> batch_cols;
    while (inclusion_order.size() < expandable.size() && !e.tracker.stop_requested()) {
        batch.clear();
        batch_cols.clear();
        for (std::uint32_t col : expandable) {
            if (in_q[col]) continue;
            PriorityVector candidate = current;
            candidate[col] = data.rules[col].original_priority;
            batch.push_back(std::move(candidate));
            batch_cols.push_back(col);
        }
        if (batch.empty()) break;
        const std::vector<EvaluationReport> reports = e.run_batch(batch);

        std::size_t keep = 0;
        for (std::size_t i = 1; i < reports.size(); ++i) {
            if (reports[i].loss < reports[keep].loss) keep = i;
        }
        const std::uint32_t committed = batch_cols[keep];
        current[committed] = data.rules[committed].original_priority;
        in_q[committed] = 1;
        inclusion_order.push_back(committed);
        ++expansions_since_contraction;

        if (params.backtracking && expansions_since_contraction >= period &&
            inclusion_order.size() > params.contraction_count) {
            for (std::uint32_t c = 0; c < params.contraction_count; ++c) {
                if (inclusion_order.size() < 2 || e.tracker.stop_requested()) break;
                batch.clear();
                batch_cols.clear();
                for (std::uint32_t col : inclusion_order) {
                    PriorityVector candidate = current;
                    candidate[col] = kInactive;
                    batch.push_back(std::move(candidate));
                    batch_cols.push_back(col);
                }
                const std::vector<EvaluationReport> removal = e.run_batch(batch);
                std::size_t drop = 0;
                for (std::size_t i = 1; i < removal.size(); ++i) {
                    if (removal[i].loss < removal[drop].loss) drop = i;
                }
                const std::uint32_t removed = batch_cols[drop];
                current[removed] = kInactive;
                in_q[removed] = 0;
                inclusion_order.erase(
                    std::find(inclusion_order.begin(), inclusion_order.end(), removed));
            }
            expansions_since_contraction = 0;
        }
    }
}

void validate_params(const MethodParams& params) {
    if (const auto* rs = std::get_if<RandomSearchParams>(&params)) {
        if (rs->shutoff_prob < 0 || rs->shutoff_prob > 1 || rs->shuffle_prob < 0 ||
            rs->shuffle_prob > 1) {
            throw std::invalid_argument("random search probabilities must lie in [0, 1]");
        }
    } else if (const auto* gp = std::get_if<GeneticParams>(&params)) {
        if (gp->population < 2) throw std::invalid_argument("genetic population must be >= 2");
        if (gp->survivors_fraction <= 0 || gp->survivors_fraction >= 1) {
            throw std::invalid_argument("genetic survivors fraction must lie in (0, 1)");
        }
        if (gp->mutation_prob < 0 || gp->mutation_prob > 1) {
            throw std::invalid_argument("genetic mutation probability must lie in [0, 1]");
        }
    } else if (const auto* gr = std::get_if<GreedyParams>(&params)) {
        if (gr->backtracking && gr->contraction_period > 0 &&
            gr->contraction_period <= gr->contraction_count) {
            throw std::invalid_argument("greedy contraction period must exceed contraction count");
        }
    }
}

}  // namespace

int random_priority_shuffle(int priority, Action action, const ActionMap& actions, Rng& rng) {
    const std::vector<int>& alphabet = actions.alphabet(action);
    if (alphabet.size() <= 1) return priority;
    const auto pos = std::find(alphabet.begin(), alphabet.end(), priority);
    if (pos == alphabet.end()) {
        return alphabet[rng.next_below(static_cast<std::uint32_t>(alphabet.size()))];
    }
    auto idx = rng.next_below(static_cast<std::uint32_t>(alphabet.size() - 1));
    if (idx >= static_cast<std::uint32_t>(pos - alphabet.begin())) ++idx;
    return alphabet[idx];
}

Dataset augment_rules_pool(const Dataset& data) {
    if (data.augmented()) throw std::logic_error("rules pool already augmented");
    std::vector<Rule> rules = data.rules;
    std::vector<std::uint32_t> parent(data.parent.begin(), data.parent.end());
    std::vector<int> initial = data.initial_priorities.values;
    std::vector<std::uint32_t> clone_sources;

    for (std::uint32_t r = 0; r < data.rules.size(); ++r) {
        const Rule& original = data.rules[r];
        if (original.frozen) continue;
        for (int alt : data.actions.alphabet(original.action)) {
            if (alt == original.original_priority) continue;
            Rule clone = original;
            clone.id = original.id + "#p" + std::to_string(alt);
            clone.original_priority = alt;
            clone.mandatory = false;
            clone.frozen = false;
            rules.push_back(std::move(clone));
            parent.push_back(r);
            initial.push_back(kInactive);
            clone_sources.push_back(r);
        }
    }

    Dataset out;
    out.rules = std::move(rules);
    out.actions = data.actions;
    out.triggers = data.triggers.with_cloned_columns(clone_sources);
    out.parent = std::move(parent);
    out.parent_count = data.parent_count;
    out.initial_priorities = PriorityVector(std::move(initial));
    for (std::uint32_t i = 0; i < out.rules.size(); ++i) {
        if (out.rules[i].is_updater()) out.updater_columns.push_back(i);
        if (out.rules[i].is_checker()) out.checker_columns.push_back(i);
    }
    return out;
}

PriorityVector random_candidate(const Dataset& data, const RandomSearchParams& params, Rng& rng) {
    PriorityVector p = data.initial_priorities;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const Rule& rule = data.rules[i];
        if (rule.frozen) continue;
        if (rng.next_bernoulli(params.shuffle_prob) && p.active(i)) {
            p[i] = random_priority_shuffle(p[i], rule.action, data.actions, rng);
        }
        if (!rule.mandatory && rng.next_bernoulli(params.shutoff_prob)) p[i] = kInactive;
    }
    return p;
}

PriorityVector genetic_init_individual(const Dataset& data, double mutation_prob, Rng& rng) {
    PriorityVector p = data.initial_priorities;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const Rule& rule = data.rules[i];
        if (rule.mandatory || rule.frozen) continue;
        if (rng.next_bernoulli(mutation_prob)) p[i] = kInactive;
    }
    return p;
}

PriorityVector crossover_uniform(const PriorityVector& mother, const PriorityVector& father,
                                 Rng& rng) {
    PriorityVector child = mother;
    for (std::size_t i = 0; i < child.size(); ++i) {
        if (rng.next_bernoulli(0.5)) child[i] = father[i];
    }
    return child;
}

void mutate_activation_flip(PriorityVector& p, const Dataset& data, double mutation_prob,
                            Rng& rng) {
    for (std::size_t i = 0; i < p.size(); ++i) {
        const Rule& rule = data.rules[i];
        if (rule.mandatory || rule.frozen) continue;
        if (rng.next_bernoulli(mutation_prob)) {
            p[i] = p.active(i) ? kInactive : rule.original_priority;
        }
    }
}

void mutate_priority_shuffle(PriorityVector& p, const Dataset& data, double mutation_prob,
                             Rng& rng) {
    for (std::size_t i = 0; i < p.size(); ++i) {
        const Rule& rule = data.rules[i];
        if (rule.frozen) continue;
        if (rng.next_bernoulli(mutation_prob) && p.active(i)) {
            p[i] = random_priority_shuffle(p[i], rule.action, data.actions, rng);
        }
    }
}

SearchResult optimize(const Evaluator& evaluator, const LossSpec& loss,
                      const EvaluationReport& baseline, const MethodParams& params,
                      const OptimizeOptions& options) {
    validate_params(params);
    StoppingCriteria stopping = options.stopping;
    if (!stopping.any()) stopping.max_evaluations = 10000;

    Engine engine{evaluator,
                  loss,
                  baseline,
                  options.range.value_or(evaluator.full_range()),
                  std::max(1, options.threads),
                  options.seed,
                  BestTracker(evaluator.dataset().initial_priorities, baseline, stopping,
                              options.observer)};

    std::vector<std::uint32_t> inclusion_order;
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, RandomSearchParams>) {
                run_random_search(engine, p);
            } else if constexpr (std::is_same_v<T, GreedyParams>) {
                run_greedy(engine, p, inclusion_order);
            } else {
                run_genetic(engine, p);
            }
        },
        params);

    SearchResult result = engine.tracker.take_result();
    result.inclusion_order = std::move(inclusion_order);
    return result;
}

}  // namespace ruleopt
