#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "silofactor/cost.hpp"
#include "silofactor/engine.hpp"
#include "silofactor/matrix.hpp"
#include "silofactor/metadata.hpp"
#include "silofactor/spec_io.hpp"
#include "silofactor/tgd.hpp"

namespace silofactor {

namespace detail {

inline std::string join_names(const std::vector<std::string>& names) {
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i) out.push_back(',');
        out += names[i];
    }
    return out;
}

// Assembles rule text from LHS atoms and the target argument list; an empty
// RHS argument becomes a fresh existential variable.
inline std::string make_rule(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& lhs,
    const std::vector<std::optional<std::string>>& rhs_args, const std::string& target) {
    std::vector<std::string> forall;
    for (const auto& [name, vars] : lhs)
        for (const auto& v : vars)
            if (std::find(forall.begin(), forall.end(), v) == forall.end()) forall.push_back(v);

    std::vector<std::string> exists;
    std::vector<std::string> args;
    for (const auto& arg : rhs_args) {
        if (arg) {
            args.push_back(*arg);
        } else {
            exists.push_back("e" + std::to_string(exists.size()));
            args.push_back(exists.back());
        }
    }

    std::string text = "forall " + join_names(forall) + " (";
    for (std::size_t i = 0; i < lhs.size(); ++i) {
        if (i) text += " & ";
        text += lhs[i].first + "(" + join_names(lhs[i].second) + ")";
    }
    text += " -> ";
    if (!exists.empty()) text += "exists " + join_names(exists) + " ";
    text += target + "(" + join_names(args) + "))";
    return text;
}

// Deterministic small integers; avoids distribution classes whose output is
// implementation-defined.
inline double rand_value(std::mt19937_64& rng, std::uint64_t bound) {
    return static_cast<double>(rng() % bound);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Synthetic two-source scenarios.
// ---------------------------------------------------------------------------

// Two sources of `cols` columns each; the last floor(col_overlap * cols)
// target columns of source 1 are also fed by source 2, and the first
// floor(row_overlap * min(rows)) rows of both sources are matched pairwise.
// Matched rows agree on the shared columns, so every execution path
// assembles the identical target.
struct SyntheticScenarioConfig {
    std::string label = "synthetic";
    std::size_t rows1 = 100;
    std::size_t rows2 = 100;
    std::size_t cols = 10;
    double row_overlap = 0.0;
    double col_overlap = 0.2;
    std::size_t c_X = 4;
    Scenario kind = Scenario::FullOuterJoin;
    std::uint64_t seed = 0;
    std::size_t duplicate_rows = 0;  // rows of source 2 repeated verbatim
};

inline ScenarioInstance generate_scenario(const SyntheticScenarioConfig& cfg) {
    const std::size_t c = cfg.cols;
    const std::size_t c_ov =
        std::min(c, static_cast<std::size_t>(cfg.col_overlap * static_cast<double>(c)));
    const std::size_t max_matched = std::min(cfg.rows1, cfg.rows2);
    // Stacked targets have no merged rows, so a union ignores row overlap.
    const std::size_t r_ov =
        cfg.kind == Scenario::Union
            ? 0
            : std::min(max_matched, static_cast<std::size_t>(
                                        cfg.row_overlap * static_cast<double>(max_matched)));
    const std::size_t c_T = 2 * c - c_ov;

    std::vector<std::string> x_vars(c), y_vars(c - c_ov);
    for (std::size_t i = 0; i < c; ++i) x_vars[i] = "x" + std::to_string(i);
    for (std::size_t i = 0; i < c - c_ov; ++i) y_vars[i] = "y" + std::to_string(i);

    // Source 2's atom lists its shared columns first, so its projected matrix
    // keeps raw column order.
    std::vector<std::string> s2_vars;
    for (std::size_t i = 0; i < c_ov; ++i) s2_vars.push_back(x_vars[c - c_ov + i]);
    for (const auto& v : y_vars) s2_vars.push_back(v);

    std::vector<std::optional<std::string>> rhs_join;
    for (const auto& v : x_vars) rhs_join.emplace_back(v);
    for (const auto& v : y_vars) rhs_join.emplace_back(v);

    ScenarioInstance inst;
    inst.label = cfg.label;
    inst.source_ids = {1, 2};
    inst.ts.sources = {"S1", "S2"};
    inst.ts.target.name = "T";
    for (std::size_t j = 0; j < c_T; ++j) inst.ts.target.columns.push_back("t" + std::to_string(j));

    std::vector<std::string> rule_texts;
    if (cfg.kind != Scenario::Union)
        rule_texts.push_back(detail::make_rule({{"S1", x_vars}, {"S2", s2_vars}}, rhs_join, "T"));
    if (cfg.kind != Scenario::InnerJoin) {
        std::vector<std::optional<std::string>> rhs_s1;
        for (const auto& v : x_vars) rhs_s1.emplace_back(v);
        for (std::size_t i = 0; i < c - c_ov; ++i) rhs_s1.emplace_back(std::nullopt);
        rule_texts.push_back(detail::make_rule({{"S1", x_vars}}, rhs_s1, "T"));
    }
    if (cfg.kind == Scenario::FullOuterJoin || cfg.kind == Scenario::Union) {
        // Target order: existentials for source 1's own columns, then the
        // shared columns, then source 2's own columns.
        std::vector<std::optional<std::string>> rhs_s2;
        for (std::size_t i = 0; i < c - c_ov; ++i) rhs_s2.emplace_back(std::nullopt);
        for (std::size_t i = 0; i < c_ov; ++i) rhs_s2.emplace_back(s2_vars[i]);
        for (const auto& v : y_vars) rhs_s2.emplace_back(v);
        rule_texts.push_back(detail::make_rule({{"S2", s2_vars}}, rhs_s2, "T"));
    }
    for (const auto& text : rule_texts) inst.ts.tgds.push_back(parse_tgd(text));
    validate_tgd_set(inst.ts);

    std::mt19937_64 rng(cfg.seed);
    DataMatrix d1(cfg.rows1, c), d2(cfg.rows2, c);
    for (std::size_t i = 0; i < cfg.rows1; ++i)
        for (std::size_t j = 0; j < c; ++j) d1(i, j) = detail::rand_value(rng, 100);
    for (std::size_t i = 0; i < cfg.rows2; ++i)
        for (std::size_t j = 0; j < c; ++j) d2(i, j) = detail::rand_value(rng, 100);

    for (std::size_t i = 0; i < r_ov; ++i) {
        inst.matching.clusters.push_back({{{1, i}, {2, i}}});
        for (std::size_t j = 0; j < c_ov; ++j) d2(i, j) = d1(i, c - c_ov + j);
    }

    // Verbatim repeats among the unmatched rows of source 2.
    if (cfg.duplicate_rows > 0 && cfg.rows2 > r_ov + 1) {
        const std::size_t original = r_ov;
        const std::size_t limit = std::min(cfg.rows2, r_ov + 1 + cfg.duplicate_rows);
        for (std::size_t i = r_ov + 1; i < limit; ++i)
            for (std::size_t j = 0; j < c; ++j) d2(i, j) = d2(original, j);
    }

    inst.data.push_back(std::move(d1));
    inst.data.push_back(std::move(d2));

    DataMatrix x(c_T, cfg.c_X);
    for (std::size_t i = 0; i < c_T; ++i)
        for (std::size_t j = 0; j < cfg.c_X; ++j) x(i, j) = detail::rand_value(rng, 10);
    inst.x = std::move(x);
    return inst;
}

// ---------------------------------------------------------------------------
// Overlap sweep: how the two execution paths trade places as row and column
// overlap grow.
// ---------------------------------------------------------------------------

struct OverlapConfig {
    std::string preset = "desk";
    std::size_t source_rows = 5000;
    std::size_t source_cols = 50;
    std::size_t c_X = 500;
    std::size_t trials = 5;
    std::uint64_t seed = 42;
    std::vector<double> row_sweep = {0.05, 0.25, 0.5, 0.75, 0.95};
    double fixed_col_overlap = 0.2;
    std::vector<double> joint_sweep = {0.1, 0.3, 0.5, 0.7, 0.9};
    Scenario kind = Scenario::FullOuterJoin;
};

// Server-class workload; minutes of runtime rather than seconds.
inline OverlapConfig server_scale_config() {
    OverlapConfig cfg;
    cfg.preset = "server";
    cfg.source_rows = 30000;
    cfg.source_cols = 100;
    cfg.c_X = 5000;
    return cfg;
}

struct OverlapPoint {
    std::string sweep;  // "row" (column overlap fixed) or "joint" (both equal)
    double row_overlap = 0.0;
    double col_overlap = 0.0;
    std::size_t r_S = 0;
    std::size_t c_S = 0;
    std::size_t r_T = 0;
    std::size_t c_T = 0;
    double t_fact_ms = 0.0;
    double t_mat_ms = 0.0;
    double speedup = 0.0;  // t_mat / t_fact; 0 when either time rounds to 0
};

struct OverlapReport {
    std::string preset;
    std::size_t c_X = 0;
    std::size_t trials = 0;
    std::uint64_t seed = 0;
    std::vector<OverlapPoint> rows;
};

inline OverlapPoint measure_overlap_point(const OverlapConfig& cfg, const std::string& sweep,
                                          double row_ov, double col_ov, std::uint64_t seed) {
    SyntheticScenarioConfig scenario;
    scenario.label = sweep;
    scenario.rows1 = scenario.rows2 = cfg.source_rows;
    scenario.cols = cfg.source_cols;
    scenario.row_overlap = row_ov;
    scenario.col_overlap = col_ov;
    scenario.c_X = cfg.c_X;
    scenario.kind = cfg.kind;
    scenario.seed = seed;
    const ScenarioInstance inst = generate_scenario(scenario);

    std::vector<std::size_t> row_counts;
    for (const auto& d : inst.data) row_counts.push_back(d.rows());
    MetadataOptions options;
    options.dense_redundancy = false;
    const IntegrationMetadata meta =
        build_metadata(inst.ts, inst.matching, row_counts, inst.source_ids, options);

    const PathTimes times = measure_paths(meta, inst.data, inst.x, cfg.trials);

    OverlapPoint p;
    p.sweep = sweep;
    p.row_overlap = row_ov;
    p.col_overlap = col_ov;
    p.r_S = cfg.source_rows;
    p.c_S = cfg.source_cols;
    p.r_T = meta.r_T;
    p.c_T = meta.c_T;
    p.t_fact_ms = times.fact_ms;
    p.t_mat_ms = times.mat_ms;
    p.speedup = (times.fact_ms > 0.0 && times.mat_ms > 0.0) ? times.mat_ms / times.fact_ms : 0.0;
    return p;
}

inline OverlapReport overlap_sweep(const OverlapConfig& cfg) {
    OverlapReport report;
    report.preset = cfg.preset;
    report.c_X = cfg.c_X;
    report.trials = cfg.trials;
    report.seed = cfg.seed;
    std::uint64_t point_seed = cfg.seed;
    for (double v : cfg.row_sweep)
        report.rows.push_back(
            measure_overlap_point(cfg, "row", v, cfg.fixed_col_overlap, ++point_seed));
    for (double v : cfg.joint_sweep)
        report.rows.push_back(measure_overlap_point(cfg, "joint", v, v, ++point_seed));
    return report;
}

inline Json overlap_report_json(const OverlapReport& report) {
    Json rows = Json::array();
    for (const auto& p : report.rows)
        rows.push_back(Json{{"sweep", p.sweep},
                            {"row_overlap", p.row_overlap},
                            {"col_overlap", p.col_overlap},
                            {"r_S", p.r_S},
                            {"c_S", p.c_S},
                            {"r_T", p.r_T},
                            {"c_T", p.c_T},
                            {"t_fact_ms", p.t_fact_ms},
                            {"t_mat_ms", p.t_mat_ms},
                            {"speedup", p.speedup}});
    return Json{{"preset", report.preset},
                {"c_X", report.c_X},
                {"trials", report.trials},
                {"seed", report.seed},
                {"rows", std::move(rows)}};
}

// ---------------------------------------------------------------------------
// Decision-accuracy suite: scenarios spread over the four redundancy
// quadrants, plus a couple the pruning rule short-circuits.
// ---------------------------------------------------------------------------

inline std::vector<ScenarioInstance> decision_suite(std::size_t per_quadrant,
                                                    std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<ScenarioInstance> instances;

    auto pct = [&](std::uint64_t lo, std::uint64_t hi) {  // percentage in [lo, hi]
        return static_cast<double>(lo + rng() % (hi - lo + 1)) / 100.0;
    };

    for (int quadrant = 0; quadrant < 4; ++quadrant) {
        const bool duplicates = (quadrant / 2) != 0;
        const bool target_redundancy = (quadrant % 2) != 0;
        for (std::size_t i = 0; i < per_quadrant; ++i) {
            SyntheticScenarioConfig cfg;
            cfg.label = std::string("quadrant-") + (duplicates ? "dup" : "nodup") + "-" +
                        (target_redundancy ? "red" : "nored") + "-" + std::to_string(i);
            cfg.rows1 = 300 + rng() % 2701;
            cfg.rows2 = 300 + rng() % 2701;
            cfg.cols = 10 + rng() % 31;
            cfg.c_X = 20 + rng() % 181;
            cfg.kind = Scenario::FullOuterJoin;
            if (target_redundancy) {
                cfg.row_overlap = pct(20, 60);
                cfg.col_overlap = pct(20, 50);
            } else if (rng() % 2 == 0) {
                cfg.row_overlap = 0.0;
                cfg.col_overlap = pct(20, 50);
            } else {
                cfg.row_overlap = pct(20, 60);
                cfg.col_overlap = 0.0;
            }
            if (duplicates) cfg.duplicate_rows = 2 + cfg.rows2 / 20;
            cfg.seed = rng();
            instances.push_back(generate_scenario(cfg));
        }
    }

    // Fully-mapped inner joins the pruning rule decides without the model.
    for (std::size_t i = 0; i < 2; ++i) {
        SyntheticScenarioConfig cfg;
        cfg.label = "pruned-" + std::to_string(i);
        cfg.rows1 = 500 + rng() % 1001;
        cfg.rows2 = 500 + rng() % 1001;
        cfg.cols = 10 + rng() % 11;
        cfg.c_X = 20 + rng() % 81;
        cfg.row_overlap = 0.3;
        cfg.col_overlap = 0.2;
        cfg.kind = Scenario::InnerJoin;
        cfg.seed = rng();
        instances.push_back(generate_scenario(cfg));
    }
    return instances;
}

}  // namespace silofactor
