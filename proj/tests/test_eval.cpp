#include <algorithm>
#include <numeric>

#include "doctest.h"
#include "ruleopt/blacklist.hpp"
#include "ruleopt/eval.hpp"
#include "ruleopt/rng.hpp"
#include "support/fixtures.hpp"

using namespace ruleopt;
using testfix::make_dataset;
using testfix::RowSpec;
using testfix::RuleSpec;

TEST_CASE("decide picks the highest-priority action, accept by default") {
    ActionMap amap({{5, Action::alert}, {3, Action::decline}, {8, Action::decline}});
    CHECK(decide(std::vector<int>{-1, 5, 3}, amap) == Action::alert);
    CHECK(decide(std::vector<int>{-1, -1, -1}, amap) == Action::accept);
    CHECK(decide(std::vector<int>{8}, amap) == Action::decline);
}

TEST_CASE("truth values per decision and label") {
    CHECK(get_truth_value(Action::accept, 1) == Outcome::false_negative);
    CHECK(get_truth_value(Action::accept, 0) == Outcome::true_negative);
    CHECK(get_truth_value(Action::alert, 0) == Outcome::false_positive);
    CHECK(get_truth_value(Action::decline, 0) == Outcome::false_positive);
    CHECK(get_truth_value(Action::alert, 1) == Outcome::true_positive);
    CHECK(get_truth_value(Action::decline, 1) == Outcome::true_positive);
}

namespace {

Dataset three_row_fixture() {
    // R1 decline p=3, R2 accept p=1; firings t1:{R1,R2}, t2:{R2}, t3:{}.
    return make_dataset({{"R1", Action::decline, 3}, {"R2", Action::accept, 1}},
                        testfix::basic_actions(),
                        {{1000, 1, {0, 1}}, {2000, 0, {1}}, {3000, 1, {}}});
}

}  // namespace

TEST_CASE("evaluate resolves decisions and counts over a tiny fixture") {
    Dataset d = three_row_fixture();
    Evaluator evaluator(d);
    const auto decisions = evaluator.decisions(d.initial_priorities, evaluator.full_range());
    CHECK(decisions == std::vector<Action>{Action::decline, Action::accept, Action::accept});

    const EvaluationReport r = evaluator.metrics(d.initial_priorities, evaluator.full_range());
    CHECK(r.tp == 1);
    CHECK(r.tn == 1);
    CHECK(r.fn == 1);
    CHECK(r.fp == 0);
    CHECK(r.recall == doctest::Approx(0.5));
    CHECK(r.fpr == doctest::Approx(0.0));
    CHECK(r.rules_active_fraction == doctest::Approx(1.0));
}

TEST_CASE("deactivating the decline rule turns its catch into misses") {
    Dataset d = three_row_fixture();
    Evaluator evaluator(d);
    PriorityVector p = d.initial_priorities;
    p[0] = kInactive;
    const EvaluationReport r = evaluator.metrics(p, evaluator.full_range());
    CHECK(r.fn == 2);
    CHECK(r.recall == doctest::Approx(0.0));
}

TEST_CASE("all-inactive candidate over legit labels: recall flagged undefined") {
    Dataset d = make_dataset({{"R1", Action::alert, 2}}, testfix::basic_actions(),
                             {{1, 0, {0}}, {2, 0, {}}});
    Evaluator evaluator(d);
    PriorityVector off(std::vector<int>{kInactive});
    const EvaluationReport r = evaluator.metrics(off, evaluator.full_range());
    CHECK(r.counts[static_cast<std::size_t>(Action::accept)][0] == 2);
    CHECK(r.fpr == 0.0);
    CHECK(r.recall == 0.0);
    CHECK(!r.recall_defined);
    CHECK(r.fpr_defined);
}

namespace {

struct RandomInstance {
    Dataset data;
    PriorityVector candidate;
};

RandomInstance random_instance(Rng& rng, std::size_t max_rules = 10, std::size_t max_rows = 120) {
    const std::size_t k = 1 + rng.next_below(static_cast<std::uint32_t>(max_rules));
    const std::size_t n = 1 + rng.next_below(static_cast<std::uint32_t>(max_rows));
    std::map<int, Action> actions;
    for (int p = 1; p <= 7; ++p) actions[p] = static_cast<Action>(rng.next_below(3));
    std::vector<RuleSpec> rules;
    for (std::size_t j = 0; j < k; ++j) {
        RuleSpec rs;
        rs.id = "r" + std::to_string(j);
        rs.priority = 1 + static_cast<int>(rng.next_below(7));
        rs.action = actions.at(rs.priority);
        rules.push_back(std::move(rs));
    }
    std::vector<RowSpec> rows;
    for (std::size_t i = 0; i < n; ++i) {
        RowSpec row;
        row.ts = static_cast<std::int64_t>(i) * 100;
        row.label = static_cast<int>(rng.next_below(2));
        for (std::size_t j = 0; j < k; ++j) {
            if (rng.next_below(10) < 3) row.fired.push_back(j);
        }
        rows.push_back(std::move(row));
    }
    RandomInstance inst{make_dataset(rules, actions, rows), {}};
    std::vector<int> p(k);
    for (std::size_t j = 0; j < k; ++j) {
        p[j] = rng.next_below(4) == 0 ? kInactive : inst.data.rules[j].original_priority;
    }
    inst.candidate = PriorityVector(std::move(p));
    return inst;
}

EvaluationReport strip_loss(EvaluationReport r) {
    r.loss = 0;
    return r;
}

}  // namespace

TEST_CASE("bitwise sweep equals the per-row scalar pipeline") {
    Rng rng(123, 0);
    for (int trial = 0; trial < 150; ++trial) {
        RandomInstance inst = random_instance(rng);
        Evaluator evaluator(inst.data);
        const auto fast = evaluator.decisions(inst.candidate, evaluator.full_range());
        const auto& tm = inst.data.triggers;
        for (std::size_t row = 0; row < tm.rows(); ++row) {
            std::vector<std::uint8_t> fired(tm.cols());
            for (std::size_t c = 0; c < tm.cols(); ++c) fired[c] = tm.fired(row, c);
            const auto masked = mask(fired, inst.candidate.span());
            const auto adjusted = handle_bd(masked, {}, inst.candidate.span());
            REQUIRE(fast[row] == decide(adjusted, inst.data.actions));
        }
    }
}

TEST_CASE("counts are conserved and ranges partition cleanly") {
    Rng rng(124, 0);
    for (int trial = 0; trial < 100; ++trial) {
        RandomInstance inst = random_instance(rng);
        Evaluator evaluator(inst.data);
        const std::size_t n = inst.data.triggers.rows();
        const EvaluationReport whole = evaluator.metrics(inst.candidate, {0, n});
        CHECK(whole.total() == static_cast<std::int64_t>(n));
        const std::size_t cut = rng.next_below(static_cast<std::uint32_t>(n + 1));
        const EvaluationReport left = evaluator.metrics(inst.candidate, {0, cut});
        const EvaluationReport right = evaluator.metrics(inst.candidate, {cut, n});
        for (std::size_t a = 0; a < kActionCount; ++a) {
            CHECK(whole.counts[a][0] == left.counts[a][0] + right.counts[a][0]);
            CHECK(whole.counts[a][1] == left.counts[a][1] + right.counts[a][1]);
        }
    }
}

TEST_CASE("column order does not matter") {
    Rng rng(125, 0);
    for (int trial = 0; trial < 60; ++trial) {
        RandomInstance inst = random_instance(rng);
        const std::size_t k = inst.data.rules.size();
        std::vector<std::size_t> perm(k);
        std::iota(perm.begin(), perm.end(), 0u);
        for (std::size_t i = k; i > 1; --i) {
            std::swap(perm[i - 1], perm[rng.next_below(static_cast<std::uint32_t>(i))]);
        }
        std::vector<RuleSpec> rules;
        for (std::size_t j = 0; j < k; ++j) {
            const Rule& src = inst.data.rules[perm[j]];
            rules.push_back(RuleSpec{src.id, src.action, src.original_priority});
        }
        const auto& tm = inst.data.triggers;
        std::vector<RowSpec> rows;
        for (std::size_t i = 0; i < tm.rows(); ++i) {
            RowSpec row;
            row.ts = tm.timestamp_ms(i);
            row.label = tm.label(i);
            for (std::size_t j = 0; j < k; ++j) {
                if (tm.fired(i, perm[j])) row.fired.push_back(j);
            }
            rows.push_back(std::move(row));
        }
        Dataset shuffled = make_dataset(rules, inst.data.actions.entries(), rows);
        std::vector<int> p(k);
        for (std::size_t j = 0; j < k; ++j) p[j] = inst.candidate[perm[j]];

        Evaluator a(inst.data), b(shuffled);
        CHECK(strip_loss(a.metrics(inst.candidate, a.full_range())) ==
              strip_loss(b.metrics(PriorityVector(std::move(p)), b.full_range())));
    }
}

TEST_CASE("deactivating a never-firing rule only moves rules_active_fraction") {
    Dataset d = make_dataset(
        {{"R1", Action::decline, 3}, {"idle", Action::alert, 2}}, testfix::basic_actions(),
        {{1, 1, {0}}, {2, 0, {}}});
    Evaluator evaluator(d);
    const EvaluationReport with = evaluator.metrics(d.initial_priorities, evaluator.full_range());
    PriorityVector p = d.initial_priorities;
    p[1] = kInactive;
    const EvaluationReport without = evaluator.metrics(p, evaluator.full_range());
    CHECK(with.counts == without.counts);
    CHECK(with.rules_active_fraction == doctest::Approx(1.0));
    CHECK(without.rules_active_fraction == doctest::Approx(0.5));
}

TEST_CASE("removing a fired cell only matters when it held the row maximum") {
    Rng rng(126, 0);
    for (int trial = 0; trial < 40; ++trial) {
        RandomInstance inst = random_instance(rng, 6, 40);
        Evaluator evaluator(inst.data);
        const auto base = evaluator.decisions(inst.candidate, evaluator.full_range());
        const auto& tm = inst.data.triggers;
        for (std::size_t row = 0; row < tm.rows(); ++row) {
            int row_max = kInactive;
            for (std::size_t c = 0; c < tm.cols(); ++c) {
                if (tm.fired(row, c) && inst.candidate.active(c)) {
                    row_max = std::max(row_max, inst.candidate[c]);
                }
            }
            for (std::size_t c = 0; c < tm.cols(); ++c) {
                if (!tm.fired(row, c)) continue;
                // Rebuild without this single firing.
                std::vector<RowSpec> rows;
                for (std::size_t i = 0; i < tm.rows(); ++i) {
                    RowSpec rs;
                    rs.ts = tm.timestamp_ms(i);
                    rs.label = tm.label(i);
                    for (std::size_t cc = 0; cc < tm.cols(); ++cc) {
                        if (i == row && cc == c) continue;
                        if (tm.fired(i, cc)) rs.fired.push_back(cc);
                    }
                    rows.push_back(std::move(rs));
                }
                std::vector<RuleSpec> rules;
                for (const Rule& r : inst.data.rules) {
                    rules.push_back(RuleSpec{r.id, r.action, r.original_priority});
                }
                Dataset pruned = make_dataset(rules, inst.data.actions.entries(), rows);
                Evaluator pruned_eval(pruned);
                const auto changed = pruned_eval.decisions(inst.candidate, pruned_eval.full_range());
                if (!(inst.candidate.active(c) && inst.candidate[c] == row_max)) {
                    REQUIRE(changed[row] == base[row]);
                }
            }
        }
    }
}
