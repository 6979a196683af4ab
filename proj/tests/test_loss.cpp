#include <cmath>

#include "doctest.h"
#include "ruleopt/loss.hpp"
#include "ruleopt/rng.hpp"

using namespace ruleopt;

namespace {

EvaluationReport report_of(double rules_pct, double recall, double alerts_pct, double fpr = 0.0) {
    EvaluationReport r;
    r.rules_active_fraction = rules_pct;
    r.recall = recall;
    r.alert_rate = alerts_pct;
    r.fpr = fpr;
    return r;
}

}  // namespace

TEST_CASE("synthetic loss reproduces the published reference points") {
    // (rules%, recall, alerts%) -> loss, 5e-4 tolerance.
    CHECK(std::abs(loss_synthetic(report_of(1.0, 0.1311, 0.00779)) - 0.0376) <= 5e-4);
    CHECK(std::abs(loss_synthetic(report_of(53.0 / 98.0, 0.5309, 0.0097)) - (-0.2075)) <= 5e-4);
    CHECK(loss_synthetic(report_of(0, 0, 0)) == 0.0);
}

TEST_CASE("recall-constrained loss: feasible, penalty, and boundary") {
    const EvaluationReport baseline = report_of(1.0, 0.8, 0.05);
    CHECK(loss_d1(report_of(0.5, 0.78, 0.02), baseline) == doctest::Approx(0.26));
    CHECK(loss_d1(report_of(0.5, 0.5, 0.02), baseline) == doctest::Approx(1.3));
    // Exactly 0.95 * baseline recall stays feasible (closed inequality).
    const double boundary = 0.95 * baseline.recall;
    CHECK(loss_d1(report_of(0.5, boundary, 0.02), baseline) == doctest::Approx(0.26));
}

TEST_CASE("fpr-constrained loss: feasible, penalty, and boundary") {
    const EvaluationReport baseline = report_of(1.0, 0.5, 0.01, 0.05);
    CHECK(loss_d2(report_of(0.4, 0.6, 0.0, 0.04), baseline) == doctest::Approx(-0.55));
    CHECK(loss_d2(report_of(0.4, 0.6, 0.0, 0.07), baseline) == doctest::Approx(0.03));
    CHECK(loss_d2(report_of(0.4, 0.6, 0.0, 0.05), baseline) == doctest::Approx(-0.55));
}

TEST_CASE("generic specs match the dedicated losses pointwise") {
    const LossSpec synthetic = LossSpec::synthetic();
    const LossSpec d1 = LossSpec::d1();
    const LossSpec d2 = LossSpec::d2();
    Rng rng(3, 0);
    for (int i = 0; i < 1000; ++i) {
        const EvaluationReport r =
            report_of(rng.next_double(), rng.next_double(), rng.next_double(), rng.next_double());
        const EvaluationReport base =
            report_of(rng.next_double(), rng.next_double(), rng.next_double(), rng.next_double());
        CHECK(synthetic.value(r, nullptr) == doctest::Approx(loss_synthetic(r)).epsilon(1e-12));
        CHECK(d1.value(r, &base) == doctest::Approx(loss_d1(r, base)).epsilon(1e-12));
        CHECK(d2.value(r, &base) == doctest::Approx(loss_d2(r, base)).epsilon(1e-12));
    }
}

TEST_CASE("recall-constrained loss separates feasible and penalty ranges") {
    Rng rng(4, 0);
    for (int i = 0; i < 500; ++i) {
        const EvaluationReport base = report_of(1.0, rng.next_double(), rng.next_double());
        const EvaluationReport r =
            report_of(rng.next_double(), rng.next_double(), rng.next_double());
        const double value = loss_d1(r, base);
        if (r.recall >= 0.95 * base.recall) {
            CHECK(value >= 0.0);
            CHECK(value <= 1.0);
        } else if (r.recall <= base.recall) {
            CHECK(value >= 1.0);
        }
    }
}

TEST_CASE("an empty spec scores zero") {
    CHECK(LossSpec().value(report_of(0.9, 0.9, 0.9), nullptr) == 0.0);
}

TEST_CASE("baseline references without a baseline report throw") {
    CHECK_THROWS_AS(LossSpec::d1().value(report_of(1, 1, 1), nullptr), MissingBaselineError);
    CHECK_THROWS_AS(LossSpec::d2().value(report_of(1, 1, 1), nullptr), MissingBaselineError);
    CHECK(LossSpec::d1().needs_baseline());
    CHECK(!LossSpec::synthetic().needs_baseline());
}

TEST_CASE("non-finite objective weights are rejected") {
    LinearExpr objective;
    objective.terms = {{MetricKind::recall, std::nan(""), false}};
    CHECK_THROWS_AS(LossSpec(objective, {}, {}), std::invalid_argument);
}
