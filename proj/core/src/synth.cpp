#include "ruleopt/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ruleopt/rng.hpp"

namespace ruleopt {

namespace {

constexpr std::size_t kRows = 225'000;
constexpr std::size_t kFraud = 11'250;
constexpr std::size_t kAcceptRules = 8;
constexpr std::size_t kAlertRules = 30;
constexpr std::size_t kDeclineRules = 60;
constexpr std::size_t kRules = kAcceptRules + kAlertRules + kDeclineRules;
constexpr std::size_t kSplitRows = 75'000;

// Per-action support distributions. Accept coverage is kept below the point
// where whitelist rules blanket the whole fraud class, and decline rules
// carry enough coverage that deactivating accepts recovers a large share of
// the fraud; alert rules stay small so the deployed alert rate is around 1%.
struct ActionProfile {
    const char* prefix;
    Action action;
    double support_mean;
    double support_sd;
    double quality_mean;
    double quality_sd;
};

constexpr ActionProfile kProfiles[] = {
    {"accept", Action::accept, 22'500.0, 7'500.0, 0.75, 0.20},
    {"alert", Action::alert, 22.5, 225.0, 0.17, 0.05},
    {"decline", Action::decline, 900.0, 225.0, 0.17, 0.05},
};

const std::vector<int> kAcceptPriorities = {0, 1, 5, 6, 10};
const std::vector<int> kAlertPriorities = {2, 4, 7, 9};
const std::vector<int> kDeclinePriorities = {3, 8};

/// First `count` entries of a partial Fisher-Yates shuffle over `pool`.
std::vector<std::uint32_t> sample_rows(std::vector<std::uint32_t> pool, std::size_t count,
                                       Rng& rng) {
    count = std::min(count, pool.size());
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + rng.next_below(static_cast<std::uint32_t>(pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    return pool;
}

std::int64_t clamp_round(double x, std::int64_t lo, std::int64_t hi) {
    return std::clamp(static_cast<std::int64_t>(std::llround(x)), lo, hi);
}

std::string rule_name(const char* prefix, std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%02zu", prefix, index + 1);
    return buf;
}

}  // namespace

SyntheticData generate_synthetic(std::uint64_t seed) {
    // Stream 0 places the fraud labels; stream 1 + i drives rule i.
    Rng label_rng(seed, 0);
    std::vector<std::uint32_t> all_rows(kRows);
    for (std::uint32_t i = 0; i < kRows; ++i) all_rows[i] = i;
    const std::vector<std::uint32_t> fraud_pick = sample_rows(std::move(all_rows), kFraud, label_rng);

    std::vector<std::uint8_t> labels(kRows, 0);
    for (std::uint32_t r : fraud_pick) labels[r] = 1;
    std::vector<std::uint32_t> legit_rows;
    legit_rows.reserve(kRows - kFraud);
    std::vector<std::uint32_t> fraud_rows;
    fraud_rows.reserve(kFraud);
    for (std::uint32_t i = 0; i < kRows; ++i) {
        (labels[i] ? fraud_rows : legit_rows).push_back(i);
    }

    TriggerMatrixBuilder builder(kRows, kRules);
    for (std::size_t row = 0; row < kRows; ++row) {
        builder.set_timestamp(row, static_cast<std::int64_t>(row) * 1000);
        builder.set_label(row, labels[row]);
    }

    std::map<int, Action> action_entries;
    for (int p : kAcceptPriorities) action_entries[p] = Action::accept;
    for (int p : kAlertPriorities) action_entries[p] = Action::alert;
    for (int p : kDeclinePriorities) action_entries[p] = Action::decline;
    ActionMap actions(std::move(action_entries));

    std::vector<Rule> rules;
    std::vector<SynthRuleStats> stats;
    rules.reserve(kRules);
    stats.reserve(kRules);
    for (std::size_t i = 0; i < kRules; ++i) {
        Rng rng(seed, 1 + i);
        const ActionProfile& profile =
            i < kAcceptRules ? kProfiles[0]
                             : (i < kAcceptRules + kAlertRules ? kProfiles[1] : kProfiles[2]);
        const std::size_t index_in_action =
            i < kAcceptRules ? i
                             : (i < kAcceptRules + kAlertRules ? i - kAcceptRules
                                                               : i - kAcceptRules - kAlertRules);
        Rule rule;
        rule.id = rule_name(profile.prefix, index_in_action);
        rule.action = profile.action;

        const auto support =
            clamp_round(profile.support_mean + profile.support_sd * rng.next_gaussian(), 1,
                        static_cast<std::int64_t>(kRows));
        const double quality = std::clamp(
            profile.quality_mean + profile.quality_sd * rng.next_gaussian(), 0.01, 0.99);

        const std::vector<int>& alphabet = actions.alphabet(rule.action);
        rule.original_priority =
            alphabet[rng.next_below(static_cast<std::uint32_t>(alphabet.size()))];

        // Correct firings land on the rule's target label class (legit for
        // accepts, fraud otherwise), the rest on the other class, both
        // sampled without replacement.
        const bool is_accept = rule.action == Action::accept;
        const auto& correct_pool = is_accept ? legit_rows : fraud_rows;
        const auto& incorrect_pool = is_accept ? fraud_rows : legit_rows;
        const auto correct = static_cast<std::size_t>(
            clamp_round(quality * static_cast<double>(support), 0,
                        static_cast<std::int64_t>(correct_pool.size())));
        const std::size_t incorrect =
            std::min(static_cast<std::size_t>(support) - correct, incorrect_pool.size());
        for (std::uint32_t row : sample_rows(correct_pool, correct, rng)) builder.set_fired(row, i);
        for (std::uint32_t row : sample_rows(incorrect_pool, incorrect, rng)) {
            builder.set_fired(row, i);
        }
        rules.push_back(std::move(rule));
        stats.push_back(SynthRuleStats{support, quality});
    }

    SyntheticData out{Dataset::validate(std::move(rules), std::move(actions), builder.build()),
                      Splits{{0, kSplitRows}, {kSplitRows, 2 * kSplitRows}, {2 * kSplitRows, kRows}},
                      std::move(stats)};
    return out;
}

}  // namespace ruleopt
