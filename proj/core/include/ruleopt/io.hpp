#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ruleopt/loss.hpp"
#include "ruleopt/optimize.hpp"
#include "ruleopt/rules.hpp"
#include "ruleopt/synth.hpp"
#include "ruleopt/tcv.hpp"

namespace ruleopt {

class IoError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};
class ConfigError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;

/// Standard dataset file names inside a data directory.
inline constexpr const char* kRulesFile = "rules.csv";
inline constexpr const char* kTriggersFile = "triggers.csv";
inline constexpr const char* kFieldsFile = "fields.csv";
inline constexpr const char* kActionMapFile = "actionmap.json";
inline constexpr const char* kSplitsFile = "splits.json";

/// Loads and validates a dataset directory. Validation failures throw
/// ValidationError with every violation; malformed or missing files throw
/// IoError. A binary sidecar cache keyed by the CSV content hash accelerates
/// repeat loads of triggers.csv.
Dataset load_dataset(const std::filesystem::path& dir);

/// Writes the dataset files in canonical form (column order = rules order).
/// Loading then re-serializing is byte-stable.
void save_dataset(const std::filesystem::path& dir, const Dataset& data);

void save_splits(const std::filesystem::path& dir, const Splits& splits);
std::optional<Splits> load_splits(const std::filesystem::path& dir);

/// Parsed run configuration (a single JSON document).
struct RunConfig {
    std::string method = "random";  // random | greedy | genetic
    std::string loss_name = "synthetic";  // builtin name, or "inline"
    LossSpec loss = LossSpec::synthetic();
    MethodParams theta = RandomSearchParams{};
    bool arp = false;
    std::uint64_t seed = 0;
    int threads = 1;
    StoppingCriteria stopping;
    std::optional<FoldSpec> folds;
    std::optional<std::string> split;  // train | validation | test (needs splits.json)
    BaselineOptions baselines;
    std::string canonical_json;  // sorted-key echo, threads stripped
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& file);

/// Rule-id -> priority map from a JSON file; accepts either a flat object or
/// a document with a "p_best" member (e.g. a run report). Pool columns absent
/// from the file come back inactive; unknown ids are returned via `unknown`.
PriorityVector priorities_from_json_file(const std::filesystem::path& file, const Dataset& pool,
                                         std::vector<std::string>* unknown = nullptr);

struct RunOutput {
    EvaluationReport baseline;  // deployed system on the optimized window
    SearchResult result;
    std::size_t pool_size = 0;
    std::size_t original_rules = 0;
    RowRange range;
    std::string split_label;
};

/// The end-to-end pipeline: blacklist dependencies, baseline evaluation,
/// optional pool augmentation, then optimization. Writes report.json and
/// trace.csv under out_dir (created if needed). Deterministic for a fixed
/// seed: report.json bytes do not depend on the thread count.
RunOutput run_optimization(const Dataset& data, const RunConfig& config,
                           const std::optional<Splits>& splits,
                           const std::filesystem::path& out_dir);

/// Report for one fixed configuration (the `evaluate` surface); writes
/// report.json under out_dir when given.
EvaluationReport run_evaluation(const Dataset& data, const RunConfig& config,
                                const std::optional<Splits>& splits,
                                const std::optional<PriorityVector>& priorities,
                                const std::optional<std::filesystem::path>& out_dir);

struct TcvFoldResult {
    Fold fold;
    SearchResult result;
    EvaluationReport validation_report;
    EvaluationReport test_report;
    std::vector<std::string> removed_rules;
    std::vector<std::string> inclusion_ids;  // greedy only
    double selected_rho = 0.0;
};

struct TcvOutput {
    std::vector<TcvFoldResult> folds;
    std::vector<std::vector<double>> jaccard;     // full symmetric matrix
    std::vector<std::vector<double>> ndcg;        // greedy only, by reference fold
    std::vector<std::vector<double>> cross_fold;  // upper triangle
};

/// Fold harness: baselines plus the configured method per fold, consistency
/// matrices, and the cross-fold loss table. Writes per-fold reports and the
/// delimited tables plus summary.json under out_dir.
TcvOutput run_tcv(const Dataset& data, const RunConfig& config,
                  const std::filesystem::path& out_dir);

void write_trace_csv(const std::filesystem::path& file, std::span<const TracePoint> trace);

/// Human-readable rendering of a report (counts, metrics, loss).
std::string format_report(const EvaluationReport& report);

}  // namespace ruleopt
