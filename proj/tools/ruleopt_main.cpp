#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "ruleopt/io.hpp"
#include "ruleopt/synth.hpp"

namespace {

using nlohmann::json;

struct GlobalArgs {
    std::optional<std::uint64_t> seed;
    int threads = 0;  // 0 = from config
    std::string config_path;
    std::string out_dir;
};

ruleopt::RunConfig make_config(const GlobalArgs& args) {
    ruleopt::RunConfig config;
    if (!args.config_path.empty()) {
        config = ruleopt::load_run_config(args.config_path);
    } else {
        config.canonical_json = "{}";
    }
    if (args.seed) config.seed = *args.seed;
    if (args.threads > 0) config.threads = args.threads;
    return config;
}

void print_matrix(const std::string& title, const std::vector<std::vector<double>>& m,
                  bool triangular) {
    std::cout << title << "\n      ";
    for (std::size_t j = 0; j < m.size(); ++j) std::printf("fold %-4zu", j);
    std::cout << "\n";
    for (std::size_t i = 0; i < m.size(); ++i) {
        std::printf("fold %zu", i);
        for (std::size_t j = 0; j < m.size(); ++j) {
            if (triangular && j < i) {
                std::printf("%9s", "-");
            } else {
                std::printf("%9.4f", triangular ? m[i][j - i] : m[i][j]);
            }
        }
        std::cout << "\n";
    }
}

int cmd_evaluate(const GlobalArgs& args, const std::string& data_dir,
                 const std::string& priorities_file) {
    const ruleopt::RunConfig config = make_config(args);
    const ruleopt::Dataset data = ruleopt::load_dataset(data_dir);
    const auto splits = ruleopt::load_splits(data_dir);

    std::optional<ruleopt::PriorityVector> priorities;
    if (!priorities_file.empty()) {
        std::optional<ruleopt::Dataset> augmented;
        const ruleopt::Dataset* pool = &data;
        if (config.arp) {
            augmented = ruleopt::augment_rules_pool(data);
            pool = &*augmented;
        }
        std::vector<std::string> unknown;
        priorities = ruleopt::priorities_from_json_file(priorities_file, *pool, &unknown);
        for (const auto& id : unknown) {
            std::cerr << "warning: priorities file names unknown rule '" << id
                      << "' (ignored)\n";
        }
    }

    std::optional<std::filesystem::path> out;
    if (!args.out_dir.empty()) out = args.out_dir;
    const ruleopt::EvaluationReport report =
        ruleopt::run_evaluation(data, config, splits, priorities, out);
    std::cout << ruleopt::format_report(report);
    return ruleopt::kExitOk;
}

int cmd_optimize(const GlobalArgs& args, const std::string& data_dir) {
    if (args.out_dir.empty()) throw ruleopt::ConfigError("optimize requires --out");
    const ruleopt::RunConfig config = make_config(args);
    const ruleopt::Dataset data = ruleopt::load_dataset(data_dir);
    const auto splits = ruleopt::load_splits(data_dir);
    const ruleopt::RunOutput out =
        ruleopt::run_optimization(data, config, splits, args.out_dir);
    std::cout << "baseline (" << out.split_label << " rows " << out.range.begin << ".."
              << out.range.end << ")\n"
              << ruleopt::format_report(out.baseline) << "\nbest after " << out.result.evaluations
              << " evaluations (pool " << out.pool_size << ")\n"
              << ruleopt::format_report(out.result.best_report) << "\nreport written to "
              << args.out_dir << "\n";
    return ruleopt::kExitOk;
}

int cmd_synth(const GlobalArgs& args) {
    if (args.out_dir.empty()) throw ruleopt::ConfigError("synth requires --out");
    const std::uint64_t seed = args.seed.value_or(0);
    const ruleopt::SyntheticData synth = ruleopt::generate_synthetic(seed);
    ruleopt::save_dataset(args.out_dir, synth.dataset);
    ruleopt::save_splits(args.out_dir, synth.splits);
    std::cout << "synthetic dataset (seed " << seed << ") written to " << args.out_dir << ": "
              << synth.dataset.triggers.rows() << " rows, " << synth.dataset.rules.size()
              << " rules\n";
    return ruleopt::kExitOk;
}

int cmd_tcv(const GlobalArgs& args, const std::string& data_dir) {
    if (args.out_dir.empty()) throw ruleopt::ConfigError("tcv requires --out");
    const ruleopt::RunConfig config = make_config(args);
    const ruleopt::Dataset data = ruleopt::load_dataset(data_dir);
    const ruleopt::TcvOutput out = ruleopt::run_tcv(data, config, args.out_dir);
    for (std::size_t f = 0; f < out.folds.size(); ++f) {
        const auto& fr = out.folds[f];
        std::printf("fold %zu: validation loss %.6f, test loss %.6f, rho* %.2f, %zu rules removed\n",
                    f, fr.validation_report.loss, fr.test_report.loss, fr.selected_rho,
                    fr.removed_rules.size());
    }
    print_matrix("\nJaccard of removed rules", out.jaccard, false);
    if (!out.ndcg.empty()) print_matrix("\nNDCG of inclusion orders", out.ndcg, false);
    print_matrix("\nLoss on later test windows", out.cross_fold, true);
    std::cout << "\nreport written to " << args.out_dir << "\n";
    return ruleopt::kExitOk;
}

int cmd_report(const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path base(dir);
    if (fs::exists(base / "summary.json")) {
        json doc = json::parse(std::ifstream(base / "summary.json"));
        std::cout << "folds:\n";
        for (std::size_t f = 0; f < doc["folds"].size(); ++f) {
            const auto& fold = doc["folds"][f];
            std::printf(
                "  fold %zu: validation loss %.6f, test loss %.6f, rho* %.2f, %zu removed\n", f,
                fold["validation_loss"].get<double>(), fold["test_loss"].get<double>(),
                fold["selected_rho"].get<double>(), fold["removed_rules"].size());
        }
        auto matrix = [&doc](const char* key) {
            std::vector<std::vector<double>> m;
            if (doc.contains(key)) m = doc[key].get<std::vector<std::vector<double>>>();
            return m;
        };
        if (auto m = matrix("jaccard"); !m.empty()) print_matrix("\nJaccard of removed rules", m, false);
        if (auto m = matrix("ndcg"); !m.empty()) print_matrix("\nNDCG of inclusion orders", m, false);
        if (auto m = matrix("cross_fold"); !m.empty()) {
            print_matrix("\nLoss on later test windows", m, true);
        }
        return ruleopt::kExitOk;
    }
    if (fs::exists(base / "report.json")) {
        json doc = json::parse(std::ifstream(base / "report.json"));
        auto print_block = [&doc](const char* key) {
            if (!doc.contains(key)) return;
            const auto& r = doc[key];
            std::printf("%s: loss %.6f  recall %.4f  fpr %.4f  alert_rate %.4f  rules %.4f\n", key,
                        r["loss"].get<double>(), r["recall"].get<double>(),
                        r["fpr"].get<double>(), r["alert_rate"].get<double>(),
                        r["rules_active_fraction"].get<double>());
        };
        if (doc.contains("method")) {
            std::cout << "method " << doc["method"].get<std::string>() << ", seed "
                      << doc["seed"].get<std::uint64_t>() << ", pool "
                      << doc["pool_size"].get<std::size_t>() << "\n";
        }
        print_block("baseline");
        print_block("best");
        print_block("report");
        return ruleopt::kExitOk;
    }
    throw ruleopt::IoError("no report.json or summary.json under " + dir);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rule-set evaluation and optimization for fraud decision systems"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalArgs args;
    std::uint64_t seed_value = 0;
    auto* seed_opt = app.add_option("--seed", seed_value, "random seed");
    app.add_option("--threads", args.threads, "evaluation worker count");
    app.add_option("--config", args.config_path, "run configuration JSON");
    app.add_option("--out", args.out_dir, "output directory");

    std::string data_dir;
    std::string priorities_file;
    std::string report_dir;

    auto* evaluate = app.add_subcommand("evaluate", "evaluate one configuration");
    evaluate->add_option("--data", data_dir, "dataset directory")->required();
    evaluate->add_option("--priorities", priorities_file,
                         "rule-id to priority JSON (or a run report.json)");
    auto* optimize = app.add_subcommand("optimize", "run the optimization pipeline");
    optimize->add_option("--data", data_dir, "dataset directory")->required();
    auto* synth = app.add_subcommand("synth", "generate the synthetic benchmark dataset");
    auto* tcv = app.add_subcommand("tcv", "temporal cross-validation harness");
    tcv->add_option("--data", data_dir, "dataset directory")->required();
    auto* report = app.add_subcommand("report", "render summary tables from a run directory");
    report->add_option("dir", report_dir, "run directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return ruleopt::kExitConfig;
    }
    if (seed_opt->count() > 0) args.seed = seed_value;

    try {
        if (evaluate->parsed()) return cmd_evaluate(args, data_dir, priorities_file);
        if (optimize->parsed()) return cmd_optimize(args, data_dir);
        if (synth->parsed()) return cmd_synth(args);
        if (tcv->parsed()) return cmd_tcv(args, data_dir);
        if (report->parsed()) return cmd_report(report_dir);
    } catch (const ruleopt::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return ruleopt::kExitValidation;
    } catch (const ruleopt::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return ruleopt::kExitConfig;
    } catch (const ruleopt::MissingBaselineError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return ruleopt::kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return ruleopt::kExitConfig;
    } catch (const ruleopt::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return ruleopt::kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return ruleopt::kExitIo;
    }
    return ruleopt::kExitConfig;
}
