#pragma once

#include <cstdint>
#include <vector>

#include "ruleopt/eval.hpp"
#include "ruleopt/rules.hpp"

namespace ruleopt {

struct Splits {
    RowRange train;
    RowRange validation;
    RowRange test;
};

/// Sampled targets behind each generated rule, for diagnostics and tests.
/// `quality` is NPV for accept rules and precision for alert/decline rules.
struct SynthRuleStats {
    std::int64_t support = 0;
    double quality = 0.0;
};

struct SyntheticData {
    Dataset dataset;
    Splits splits;
    std::vector<SynthRuleStats> rule_stats;  // aligned with dataset.rules
};

/// Synthetic benchmark: 225k transactions at an exact 5% fraud rate, 98 rules
/// (8 accept, 30 alert, 60 decline) with Gaussian-sampled support and hit
/// quality, and three contiguous 75k splits (train, validation, test).
/// Same seed, same bits.
SyntheticData generate_synthetic(std::uint64_t seed);

}  // namespace ruleopt
