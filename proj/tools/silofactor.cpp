// Command-line surface over the library: build metadata, assemble the
// target, run products and training either way, estimate costs, and run the
// two benchmark harnesses.
//
//   silofactor <command> --spec <path> [--mode ...] [--seed N] [--trials N]
//              [--out <path>]
//
// Successful output goes to --out (or stdout); failures print one
// machine-readable JSON object to stderr and exit with the error's code.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "silofactor/silofactor.hpp"

namespace {

using silofactor::Json;

void emit(const std::string& text, const std::string& out_path) {
    const std::string body = (!text.empty() && text.back() == '\n') ? text : text + "\n";
    if (out_path.empty())
        std::cout << body;
    else
        silofactor::write_text_file(out_path, body);
}

void emit_json(const Json& doc, const std::string& out_path) {
    emit(doc.dump(2), out_path);
}

silofactor::RegressionTask make_task(const std::vector<std::size_t>& features,
                                     std::size_t label, double lr, std::size_t iterations) {
    silofactor::RegressionTask task;
    task.feature_cols = features;
    task.label_col = label;
    task.learning_rate = lr;
    task.iterations = iterations;
    return task;
}

int run(int argc, char** argv) {
    CLI::App app{"factorized linear algebra over siloed tables"};
    app.require_subcommand(1);

    std::string spec_path, out_path, x_path, presence_path, preset = "desk";
    std::string lmm_mode = "factorized", train_mode = "centralized";
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::optional<std::size_t> trials_flag;
    std::vector<std::size_t> feature_cols;
    std::size_t label_col = 0;
    double learning_rate = 0.01;
    std::size_t iterations = 100;
    std::size_t per_quadrant = 10;

    auto add_common = [&](CLI::App* cmd, bool needs_spec) {
        if (needs_spec) cmd->add_option("--spec", spec_path, "integration spec JSON")->required();
        cmd->add_option("--out", out_path, "output file (default: stdout)");
        cmd->add_option("--seed", seed, "deterministic seed")->each([&](const std::string&) {
            seed_set = true;
        });
        cmd->add_option("--trials", trials_flag, "timing repetitions");
    };

    CLI::App* build = app.add_subcommand("build-metadata",
                                         "derive mapping/indicator/redundancy structures");
    add_common(build, true);

    CLI::App* mat = app.add_subcommand("materialize", "assemble the target table as CSV");
    add_common(mat, true);
    mat->add_option("--presence", presence_path, "also write the 0/1 presence mask CSV");

    CLI::App* lmm = app.add_subcommand("lmm", "multiply the target with a workload matrix");
    add_common(lmm, true);
    lmm->add_option("--x", x_path, "workload matrix CSV (c_T rows)")->required();
    lmm->add_option("--mode", lmm_mode, "factorized | materialized | baseline");

    CLI::App* train = app.add_subcommand("train", "least-squares regression on the target");
    add_common(train, true);
    train->add_option("--mode", train_mode, "centralized | federated");
    train->add_option("--features", feature_cols, "feature column ids")->required();
    train->add_option("--label", label_col, "label column id")->required();
    train->add_option("--lr", learning_rate, "learning rate")->default_val(0.01);
    train->add_option("--iterations", iterations, "gradient steps")->default_val(100);

    CLI::App* estimate = app.add_subcommand("estimate", "factorize-or-materialize decision");
    add_common(estimate, true);

    CLI::App* bench_overlap =
        app.add_subcommand("bench-overlap", "time both paths across overlap levels");
    add_common(bench_overlap, false);
    bench_overlap->add_option("--preset", preset, "desk | server")->default_val("desk");

    CLI::App* bench_decisions =
        app.add_subcommand("bench-decisions", "score the estimator against measured times");
    add_common(bench_decisions, false);
    bench_decisions->add_option("--per-quadrant", per_quadrant, "scenarios per quadrant")
        ->default_val(10);

    CLI11_PARSE(app, argc, argv);

    if (build->parsed()) {
        const silofactor::SpecPipeline p = silofactor::run_pipeline(spec_path);
        std::cerr << "scenario: " << to_string(p.meta.scenario.kind) << "\n";
        emit_json(silofactor::metadata_json(p.meta, p.ts), out_path);
        return 0;
    }

    if (mat->parsed()) {
        const silofactor::SpecPipeline p = silofactor::run_pipeline(spec_path, false);
        const silofactor::MaterializedTarget target = silofactor::materialize(p.meta, p.data);
        if (!target.conflicts.empty()) {
            std::cerr << target.conflicts.size()
                      << " cell(s) with conflicting values kept the base source's value; first at "
                      << "row " << target.conflicts.front().row << ", column "
                      << target.conflicts.front().col << "\n";
        }
        emit(silofactor::matrix_csv(target.matrix, p.ts.target.columns), out_path);
        if (!presence_path.empty())
            silofactor::write_text_file(
                presence_path, silofactor::matrix_csv(target.presence, p.ts.target.columns));
        return 0;
    }

    if (lmm->parsed()) {
        const silofactor::SpecPipeline p = silofactor::run_pipeline(spec_path, false);
        auto [x, x_header] = silofactor::read_matrix_csv(x_path);
        const silofactor::LmmRequest request{p.meta, p.data, x};
        silofactor::DataMatrix result(0, 0);
        if (lmm_mode == "factorized") {
            result = silofactor::factorized_lmm(request);
        } else if (lmm_mode == "materialized") {
            const silofactor::MaterializedTarget target = silofactor::materialize(p.meta, p.data);
            result = silofactor::matmul(target.matrix, x);
        } else if (lmm_mode == "baseline") {
            result = silofactor::baseline_lmm_disjoint(request);
        } else {
            throw CLI::ValidationError("--mode", "expected factorized|materialized|baseline");
        }
        emit(silofactor::matrix_csv(result, x_header), out_path);
        return 0;
    }

    if (train->parsed()) {
        const silofactor::SpecPipeline p = silofactor::run_pipeline(spec_path, false);
        const silofactor::RegressionTask task =
            make_task(feature_cols, label_col, learning_rate, iterations);
        silofactor::TrainResult result;
        if (train_mode == "centralized") {
            result = silofactor::train_centralized(task, silofactor::materialize(p.meta, p.data));
        } else if (train_mode == "federated") {
            result = silofactor::train_federated(task, p.meta, p.data);
        } else {
            throw CLI::ValidationError("--mode", "expected centralized|federated");
        }
        emit_json(silofactor::train_report_json(train_mode, task, result), out_path);
        return 0;
    }

    if (estimate->parsed()) {
        const silofactor::SpecPipeline p = silofactor::run_pipeline(spec_path, false);
        const silofactor::CostFeatures features =
            silofactor::extract_features(p.meta, p.data, p.spec.options.c_X);
        const silofactor::Decision decision = silofactor::decide(p.ts, features);
        emit_json(silofactor::decision_json(decision, features), out_path);
        return 0;
    }

    if (bench_overlap->parsed()) {
        silofactor::OverlapConfig cfg;
        if (preset == "server") cfg = silofactor::server_scale_config();
        else if (preset != "desk") throw CLI::ValidationError("--preset", "expected desk|server");
        if (seed_set) cfg.seed = seed;
        if (trials_flag) cfg.trials = *trials_flag;
        const silofactor::OverlapReport report = silofactor::overlap_sweep(cfg);
        emit_json(silofactor::overlap_report_json(report), out_path);
        return 0;
    }

    if (bench_decisions->parsed()) {
        const std::size_t trials = trials_flag.value_or(3);
        const std::vector<silofactor::ScenarioInstance> instances =
            silofactor::decision_suite(per_quadrant, seed);
        const silofactor::AccuracyReport report =
            silofactor::accuracy_experiment(instances, trials);
        std::cerr << silofactor::decisions_table_text(report);
        emit_json(silofactor::decisions_report_json(report, seed, trials, per_quadrant), out_path);
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const silofactor::Error& e) {
        std::cerr << silofactor::error_json(e).dump(2) << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << Json{{"error",
                           {{"type", "InternalError"}, {"message", e.what()}, {"exit_code", 1}}}}
                         .dump(2)
                  << "\n";
        return 1;
    }
}
