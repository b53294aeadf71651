#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cstddef>
#include <cstring>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "silofactor/engine.hpp"
#include "silofactor/errors.hpp"
#include "silofactor/materialize.hpp"
#include "silofactor/matrix.hpp"
#include "silofactor/metadata.hpp"
#include "silofactor/tgd.hpp"

namespace silofactor {

// Everything the cost model looks at.  Extracted from compressed metadata in
// O(r_T + sum r_Sk c_Sk); no dense target structure is touched.
struct CostFeatures {
    std::size_t n_sources = 0;
    std::vector<std::size_t> source_rows;  // r_Sk
    std::vector<std::size_t> source_cols;  // c_Sk
    std::size_t r_T = 0;
    std::size_t c_T = 0;
    std::size_t c_X = 0;
    std::size_t row_overlap = 0;  // target rows covered by >= 2 sources
    std::size_t col_overlap = 0;  // target columns mapped by >= 2 sources
    double tuple_ratio = 0.0;     // r_T / sum r_Sk
    double feature_ratio = 0.0;   // c_T / sum c_Sk
    // "Redundancy in the sources" under its two readings: rows shared across
    // sources (or duplicated within one), and just duplicates within one.
    bool redundancy_in_sources = false;
    bool intra_source_duplicate_rows = false;
    // Some redundancy mask has a zero: the same cell reaches the target twice.
    bool redundancy_in_target = false;

    std::size_t total_source_rows() const {
        std::size_t s = 0;
        for (auto r : source_rows) s += r;
        return s;
    }
    std::size_t total_source_cols() const {
        std::size_t s = 0;
        for (auto c : source_cols) s += c;
        return s;
    }
};

inline CostFeatures extract_features(const IntegrationMetadata& meta,
                                     const std::vector<DataMatrix>& data, std::size_t c_X) {
    validate_source_data(meta, data);
    CostFeatures f;
    f.n_sources = meta.n_sources();
    f.source_rows = meta.source_rows;
    for (std::size_t k = 0; k < meta.n_sources(); ++k) f.source_cols.push_back(meta.c_S(k));
    f.r_T = meta.r_T;
    f.c_T = meta.c_T;
    f.c_X = c_X;

    for (std::size_t i = 0; i < meta.r_T; ++i) {
        std::size_t covering = 0;
        for (std::size_t k = 0; k < meta.n_sources(); ++k) covering += meta.covers_row(k, i);
        f.row_overlap += (covering >= 2);
    }
    for (std::size_t j = 0; j < meta.c_T; ++j) {
        std::size_t mapping = 0;
        for (std::size_t k = 0; k < meta.n_sources(); ++k) mapping += meta.maps_col(k, j);
        f.col_overlap += (mapping >= 2);
    }

    const double sum_rows = static_cast<double>(f.total_source_rows());
    const double sum_cols = static_cast<double>(f.total_source_cols());
    f.tuple_ratio = sum_rows > 0 ? static_cast<double>(f.r_T) / sum_rows : 0.0;
    f.feature_ratio = sum_cols > 0 ? static_cast<double>(f.c_T) / sum_cols : 0.0;

    // The target holds a redundant copy iff some pair of sources shares both
    // a row and a column.
    for (std::size_t b = 0; b < meta.n_sources() && !f.redundancy_in_target; ++b)
        for (std::size_t k = b + 1; k < meta.n_sources() && !f.redundancy_in_target; ++k) {
            bool shared_row = false, shared_col = false;
            for (std::size_t i = 0; i < meta.r_T && !shared_row; ++i)
                shared_row = meta.covers_row(b, i) && meta.covers_row(k, i);
            for (std::size_t j = 0; j < meta.c_T && !shared_col; ++j)
                shared_col = meta.maps_col(b, j) && meta.maps_col(k, j);
            f.redundancy_in_target = shared_row && shared_col;
        }

    for (std::size_t k = 0; k < data.size() && !f.intra_source_duplicate_rows; ++k) {
        std::unordered_set<std::string> seen;
        for (std::size_t i = 0; i < data[k].rows(); ++i) {
            std::string key(reinterpret_cast<const char*>(data[k].row_data(i)),
                            data[k].cols() * sizeof(double));
            if (!seen.insert(std::move(key)).second) {
                f.intra_source_duplicate_rows = true;
                break;
            }
        }
    }
    f.redundancy_in_sources = f.row_overlap > 0 || f.intra_source_duplicate_rows;
    return f;
}

// Measured per-backend weights for each cost term; 1.0 = count raw flops.
struct CostCalibration {
    double join = 1.0;
    double mat_multiply = 1.0;
    double mat_write = 1.0;
    double fact_multiply = 1.0;
    double fact_correction = 1.0;
    double fact_scatter = 1.0;
};

struct FlopEstimate {
    double factorized = 0.0;
    double materialized = 0.0;
};

// Materialized path: assemble the target (hash join over the source rows,
// then one write per target cell), then one dense multiply.
// Factorized path: one dense multiply per source, the overlap correction,
// and the scatter-sum of n partial results.
inline FlopEstimate flop_model(const CostFeatures& f, const CostCalibration& cal = {}) {
    const double r_T = static_cast<double>(f.r_T);
    const double c_T = static_cast<double>(f.c_T);
    const double c_X = static_cast<double>(f.c_X);

    FlopEstimate est;
    est.materialized = cal.join * static_cast<double>(f.total_source_rows()) +
                       cal.mat_multiply * 2.0 * r_T * c_T * c_X +
                       cal.mat_write * r_T * c_T;

    double per_source = 0.0;
    for (std::size_t k = 0; k < f.n_sources; ++k)
        per_source += 2.0 * static_cast<double>(f.source_rows[k]) *
                      static_cast<double>(f.source_cols[k]) * c_X;
    est.factorized = cal.fact_multiply * per_source +
                     cal.fact_correction * 2.0 * static_cast<double>(f.row_overlap) *
                         static_cast<double>(f.col_overlap) * c_X +
                     cal.fact_scatter * static_cast<double>(f.n_sources) * r_T * c_X;
    return est;
}

enum class Choice { Factorize, Materialize };
enum class DecisionReason { PruningRule, FlopModel };

inline const char* to_string(Choice c) {
    return c == Choice::Factorize ? "Factorize" : "Materialize";
}
inline const char* to_string(DecisionReason r) {
    return r == DecisionReason::PruningRule ? "PruningRule" : "FlopModel";
}

struct Decision {
    Choice choice = Choice::Materialize;
    DecisionReason reason = DecisionReason::FlopModel;
    double est_flops_fact = 0.0;
    double est_flops_mat = 0.0;
};

// When every rule is full and the target is no larger than the sources put
// together, assembling it cannot amplify anything — materialize without
// counting flops.  Returns nothing when the rule does not apply.
inline std::optional<Choice> pruning_rule(const TgdSet& ts, const CostFeatures& f) {
    for (const auto& t : ts.tgds)
        if (!is_full(t)) return std::nullopt;
    if (f.r_T <= f.total_source_rows() && f.c_T <= f.total_source_cols())
        return Choice::Materialize;
    return std::nullopt;
}

// Pure function of the rule set and the extracted features: pruning rule
// first, then the flop comparison (ties materialize; a single source has
// nothing to factorize).
inline Decision decide(const TgdSet& ts, const CostFeatures& f, const CostCalibration& cal = {}) {
    const FlopEstimate est = flop_model(f, cal);
    Decision d;
    d.est_flops_fact = est.factorized;
    d.est_flops_mat = est.materialized;
    if (auto pruned = pruning_rule(ts, f)) {
        d.choice = *pruned;
        d.reason = DecisionReason::PruningRule;
        return d;
    }
    d.reason = DecisionReason::FlopModel;
    if (f.n_sources < 2) {
        d.choice = Choice::Materialize;
        return d;
    }
    d.choice = est.factorized < est.materialized ? Choice::Factorize : Choice::Materialize;
    return d;
}

// ---------------------------------------------------------------------------
// Decision-accuracy harness: run both paths for real, take the faster one as
// ground truth, and score the estimator against it.
// ---------------------------------------------------------------------------

// A self-contained generated workload.
struct ScenarioInstance {
    std::string label;
    TgdSet ts;
    RowMatching matching;
    std::vector<int> source_ids;
    std::vector<DataMatrix> data;
    DataMatrix x;
};

struct PathTimes {
    double fact_ms = 0.0;
    double mat_ms = 0.0;
};

namespace detail {

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v.empty() ? 0.0 : v[v.size() / 2];
}

}  // namespace detail

// Wall-clock medians over `trials` runs of each path, engine kept
// single-threaded so the comparison is algorithmic.
inline PathTimes measure_paths(const IntegrationMetadata& meta,
                               const std::vector<DataMatrix>& data, const DataMatrix& x,
                               std::size_t trials) {
    using clock = std::chrono::steady_clock;
    std::vector<double> fact, mat;
    double sink = 0.0;
    for (std::size_t t = 0; t < std::max<std::size_t>(trials, 1); ++t) {
        const auto t0 = clock::now();
        const DataMatrix y_fact = factorized_lmm(LmmRequest{meta, data, x}, EngineOptions{1});
        const auto t1 = clock::now();
        const MaterializedTarget target = materialize(meta, data);
        const DataMatrix y_mat = matmul(target.matrix, x);
        const auto t2 = clock::now();
        if (y_fact.size() > 0) sink += y_fact.values().front();
        if (y_mat.size() > 0) sink += y_mat.values().back();
        fact.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
        mat.push_back(std::chrono::duration<double, std::milli>(t2 - t1).count());
    }
    // Keep the results observable so the work cannot be optimized away.
    volatile double guard = sink;
    (void)guard;
    return {detail::median(std::move(fact)), detail::median(std::move(mat))};
}

struct ScenarioOutcome {
    std::string label;
    CostFeatures features;
    Decision decision;
    double measured_fact_ms = 0.0;
    double measured_mat_ms = 0.0;
    Choice ground_truth = Choice::Materialize;
    bool correct = false;
};

struct QuadrantStats {
    bool redundancy_in_sources = false;
    bool redundancy_in_target = false;
    std::size_t count = 0;
    std::size_t correct = 0;

    double accuracy() const {
        return count == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(count);
    }
};

struct AccuracyReport {
    // Scenarios the flop model decided, and separately those the pruning rule
    // decided deterministically.
    std::vector<ScenarioOutcome> outcomes;
    std::vector<ScenarioOutcome> pruned;
    // Accuracy per quadrant.  The primary axis reads "redundancy in sources"
    // as duplicate rows within a source; the alternate reads it as
    // cross-source row overlap too.
    std::array<QuadrantStats, 4> quadrants{};
    std::array<QuadrantStats, 4> quadrants_overlap_reading{};
};

inline AccuracyReport accuracy_experiment(const std::vector<ScenarioInstance>& instances,
                                          std::size_t trials) {
    AccuracyReport report;
    for (std::size_t q = 0; q < 4; ++q) {
        report.quadrants[q].redundancy_in_sources = (q / 2) != 0;
        report.quadrants[q].redundancy_in_target = (q % 2) != 0;
        report.quadrants_overlap_reading[q] = report.quadrants[q];
    }

    for (const auto& inst : instances) {
        std::vector<std::size_t> row_counts;
        for (const auto& d : inst.data) row_counts.push_back(d.rows());
        MetadataOptions opts;
        opts.dense_redundancy = false;
        const IntegrationMetadata meta =
            build_metadata(inst.ts, inst.matching, row_counts, inst.source_ids, opts);

        ScenarioOutcome outcome;
        outcome.label = inst.label;
        outcome.features = extract_features(meta, inst.data, inst.x.cols());
        outcome.decision = decide(inst.ts, outcome.features);
        const PathTimes times = measure_paths(meta, inst.data, inst.x, trials);
        outcome.measured_fact_ms = times.fact_ms;
        outcome.measured_mat_ms = times.mat_ms;
        outcome.ground_truth =
            times.fact_ms < times.mat_ms ? Choice::Factorize : Choice::Materialize;
        outcome.correct = outcome.decision.choice == outcome.ground_truth;

        if (outcome.decision.reason == DecisionReason::PruningRule) {
            report.pruned.push_back(std::move(outcome));
            continue;
        }
        const std::size_t q_dup = (outcome.features.intra_source_duplicate_rows ? 2 : 0) +
                                  (outcome.features.redundancy_in_target ? 1 : 0);
        const std::size_t q_ovl = (outcome.features.redundancy_in_sources ? 2 : 0) +
                                  (outcome.features.redundancy_in_target ? 1 : 0);
        report.quadrants[q_dup].count++;
        report.quadrants[q_dup].correct += outcome.correct;
        report.quadrants_overlap_reading[q_ovl].count++;
        report.quadrants_overlap_reading[q_ovl].correct += outcome.correct;
        report.outcomes.push_back(std::move(outcome));
    }
    return report;
}

}  // namespace silofactor
