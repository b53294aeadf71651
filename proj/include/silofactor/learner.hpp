#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "silofactor/errors.hpp"
#include "silofactor/materialize.hpp"
#include "silofactor/matrix.hpp"
#include "silofactor/metadata.hpp"

namespace silofactor {

// A least-squares training job over target columns.  Feature and label
// columns are target column ids.
struct RegressionTask {
    std::vector<std::size_t> feature_cols;
    std::size_t label_col = 0;
    double learning_rate = 0.01;
    std::size_t iterations = 100;
};

// One participant of the federated run: its slice of the feature columns and
// its local weights.  Columns are target ids, ascending; `features` has one
// column per entry of `feature_cols`.
struct PartyState {
    int source_id = 0;
    std::vector<std::size_t> feature_cols;
    DataMatrix features;
    std::vector<double> theta;
};

struct FederatedMessage {
    std::size_t iteration = 0;
    int from = 0;  // source_id; 0 = coordinator
    int to = 0;
    std::string kind;  // "partial_prediction" or "residual"
    std::size_t payload_len = 0;
};

struct TrainResult {
    std::vector<double> loss;  // loss before each update, plus the final loss
    std::vector<std::size_t> feature_cols;
    std::vector<double> weights;  // aligned with feature_cols
    std::vector<PartyState> parties;
    std::vector<FederatedMessage> messages;
    std::size_t messages_exchanged = 0;

    double final_loss() const { return loss.back(); }
};

namespace detail {

// Who answers for each target column: the first source in conflict order
// that maps it; nothing if no source does.
inline std::vector<std::optional<std::size_t>> column_owners(const IntegrationMetadata& meta) {
    std::vector<std::optional<std::size_t>> owner(meta.c_T);
    for (std::size_t k : precedence_order(meta.n_sources(), meta.base_index))
        for (std::size_t j = 0; j < meta.c_T; ++j)
            if (!owner[j] && meta.maps_col(k, j)) owner[j] = k;
    return owner;
}

// Builds each party's feature block over `cols` (owned columns only, so a
// column's values enter through exactly one party).  Rows align with target
// rows; a row the party does not cover contributes zeros.
inline std::vector<PartyState> make_parties(const IntegrationMetadata& meta,
                                            const std::vector<DataMatrix>& data,
                                            const std::vector<std::size_t>& cols) {
    const auto owner = column_owners(meta);
    std::vector<PartyState> parties(meta.n_sources());
    for (std::size_t k = 0; k < meta.n_sources(); ++k) {
        parties[k].source_id = meta.source_ids[k];
        for (std::size_t j : cols)
            if (owner[j] && *owner[j] == k) parties[k].feature_cols.push_back(j);
        const auto& ci = meta.indicators[k].entries;
        const auto& cm = meta.mappings[k].cm.entries;
        DataMatrix block(meta.r_T, parties[k].feature_cols.size());
        for (std::size_t i = 0; i < meta.r_T; ++i) {
            if (ci[i] < 0) continue;
            const std::size_t src_row = static_cast<std::size_t>(ci[i]);
            for (std::size_t c = 0; c < parties[k].feature_cols.size(); ++c) {
                const std::size_t j = parties[k].feature_cols[c];
                block(i, c) = data[k](src_row, static_cast<std::size_t>(cm[j]));
            }
        }
        parties[k].features = std::move(block);
        parties[k].theta.assign(parties[k].feature_cols.size(), 0.0);
    }
    return parties;
}

inline std::vector<double> party_prediction(const PartyState& p) {
    std::vector<double> pred(p.features.rows(), 0.0);
    for (std::size_t i = 0; i < p.features.rows(); ++i) {
        const double* row = p.features.row_data(i);
        double s = 0.0;
        for (std::size_t c = 0; c < p.theta.size(); ++c) s += row[c] * p.theta[c];
        pred[i] = s;
    }
    return pred;
}

inline std::vector<double> party_gradient(const PartyState& p,
                                          const std::vector<double>& residual) {
    std::vector<double> grad(p.theta.size(), 0.0);
    for (std::size_t i = 0; i < p.features.rows(); ++i) {
        const double* row = p.features.row_data(i);
        for (std::size_t c = 0; c < p.theta.size(); ++c) grad[c] += row[c] * residual[i];
    }
    for (double& g : grad) g *= 2.0;
    return grad;
}

inline double squared_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

inline void require_inner_join(const IntegrationMetadata& meta, const char* what) {
    if (meta.scenario.kind != Scenario::InnerJoin)
        throw UnsupportedScenario(std::string(what) + " runs on inner joins only; target is " +
                                  to_string(meta.scenario.kind));
}

}  // namespace detail

// Squared-error objective of the split model: each party k holds weights
// over the feature columns it owns, and the prediction for a row is the sum
// of the parties' linear scores.  `thetas[k]` must match party k's owned
// mapped columns (ascending target order).
inline double flr_objective(const IntegrationMetadata& meta, const std::vector<DataMatrix>& data,
                            const std::vector<std::vector<double>>& thetas,
                            const std::vector<double>& y) {
    detail::require_inner_join(meta, "the split objective");
    validate_source_data(meta, data);
    if (y.size() != meta.r_T)
        throw ShapeError("objective: y has " + std::to_string(y.size()) + " entries, target has " +
                         std::to_string(meta.r_T) + " rows");
    if (thetas.size() != meta.n_sources())
        throw ShapeError("objective: expected " + std::to_string(meta.n_sources()) +
                         " weight blocks, got " + std::to_string(thetas.size()));

    std::vector<std::size_t> mapped_cols;
    for (std::size_t j = 0; j < meta.c_T; ++j) {
        bool mapped = false;
        for (std::size_t k = 0; k < meta.n_sources() && !mapped; ++k) mapped = meta.maps_col(k, j);
        if (mapped) mapped_cols.push_back(j);
    }
    std::vector<PartyState> parties = detail::make_parties(meta, data, mapped_cols);
    for (std::size_t k = 0; k < parties.size(); ++k) {
        if (thetas[k].size() != parties[k].feature_cols.size())
            throw ShapeError("objective: party " + std::to_string(meta.source_ids[k]) + " owns " +
                             std::to_string(parties[k].feature_cols.size()) +
                             " columns, got " + std::to_string(thetas[k].size()) + " weights");
        parties[k].theta = thetas[k];
    }

    std::vector<double> residual(meta.r_T, 0.0);
    for (const auto& p : parties) {
        const std::vector<double> pred = detail::party_prediction(p);
        for (std::size_t i = 0; i < meta.r_T; ++i) residual[i] += pred[i];
    }
    for (std::size_t i = 0; i < meta.r_T; ++i) residual[i] -= y[i];
    return detail::squared_norm(residual);
}

// Analytic gradient of flr_objective with respect to each party's weights:
// 2 X_k^T (sum_j X_j theta_j - y).
inline std::vector<std::vector<double>> flr_gradient(const IntegrationMetadata& meta,
                                                     const std::vector<DataMatrix>& data,
                                                     const std::vector<std::vector<double>>& thetas,
                                                     const std::vector<double>& y) {
    detail::require_inner_join(meta, "the split gradient");
    validate_source_data(meta, data);

    std::vector<std::size_t> mapped_cols;
    for (std::size_t j = 0; j < meta.c_T; ++j) {
        bool mapped = false;
        for (std::size_t k = 0; k < meta.n_sources() && !mapped; ++k) mapped = meta.maps_col(k, j);
        if (mapped) mapped_cols.push_back(j);
    }
    std::vector<PartyState> parties = detail::make_parties(meta, data, mapped_cols);
    for (std::size_t k = 0; k < parties.size(); ++k) parties[k].theta = thetas[k];

    std::vector<double> residual(meta.r_T, 0.0);
    for (const auto& p : parties) {
        const std::vector<double> pred = detail::party_prediction(p);
        for (std::size_t i = 0; i < meta.r_T; ++i) residual[i] += pred[i];
    }
    for (std::size_t i = 0; i < meta.r_T; ++i) residual[i] -= y[i];

    std::vector<std::vector<double>> grads;
    grads.reserve(parties.size());
    for (const auto& p : parties) grads.push_back(detail::party_gradient(p, residual));
    return grads;
}

namespace detail {

inline void validate_task(const RegressionTask& task, std::size_t c_T) {
    if (!(task.learning_rate > 0.0) || !std::isfinite(task.learning_rate))
        throw SpecError("learning rate must be positive and finite");
    if (task.label_col >= c_T)
        throw SpecError("label column " + std::to_string(task.label_col) + " out of range");
    std::vector<std::size_t> cols = task.feature_cols;
    std::sort(cols.begin(), cols.end());
    if (std::adjacent_find(cols.begin(), cols.end()) != cols.end())
        throw SpecError("duplicate feature column");
    for (std::size_t j : cols) {
        if (j >= c_T) throw SpecError("feature column " + std::to_string(j) + " out of range");
        if (j == task.label_col)
            throw SpecError("label column " + std::to_string(j) + " listed among features");
    }
}

inline void check_finite_loss(double loss, std::size_t iteration) {
    if (!std::isfinite(loss))
        throw DivergenceError("loss became non-finite at iteration " + std::to_string(iteration) +
                              "; lower the learning rate");
}

}  // namespace detail

// Full-batch gradient descent on the assembled target:
//   theta <- theta - lr * 2 X^T (X theta - y),  theta_0 = 0.
// Records the loss before every update plus the final loss, so `loss` has
// iterations + 1 entries.
inline TrainResult train_centralized(const RegressionTask& task,
                                     const MaterializedTarget& target) {
    detail::validate_task(task, target.matrix.cols());

    std::vector<std::size_t> cols = task.feature_cols;
    std::sort(cols.begin(), cols.end());
    const std::size_t n_rows = target.matrix.rows();

    DataMatrix x(n_rows, cols.size());
    std::vector<double> y(n_rows);
    for (std::size_t i = 0; i < n_rows; ++i) {
        for (std::size_t c = 0; c < cols.size(); ++c) x(i, c) = target.matrix(i, cols[c]);
        y[i] = target.matrix(i, task.label_col);
    }

    TrainResult result;
    result.feature_cols = cols;
    std::vector<double> theta(cols.size(), 0.0);
    std::vector<double> residual(n_rows);

    for (std::size_t t = 0; t <= task.iterations; ++t) {
        for (std::size_t i = 0; i < n_rows; ++i) {
            const double* row = x.row_data(i);
            double pred = 0.0;
            for (std::size_t c = 0; c < cols.size(); ++c) pred += row[c] * theta[c];
            residual[i] = pred - y[i];
        }
        const double loss = detail::squared_norm(residual);
        detail::check_finite_loss(loss, t);
        result.loss.push_back(loss);
        if (t == task.iterations) break;

        for (std::size_t c = 0; c < cols.size(); ++c) {
            double g = 0.0;
            for (std::size_t i = 0; i < n_rows; ++i) g += x(i, c) * residual[i];
            theta[c] -= task.learning_rate * 2.0 * g;
            if (!std::isfinite(theta[c]))
                throw DivergenceError("weight became non-finite at iteration " +
                                      std::to_string(t) + "; lower the learning rate");
        }
    }
    result.weights = std::move(theta);
    return result;
}

// The same descent run as a two-or-more-party protocol without assembling
// the target.  Per iteration every party sends its partial prediction
// X_k theta_k, the coordinator returns the shared residual, and each party
// updates its own block:  theta_k <- theta_k - lr * 2 X_k^T residual.  The
// trajectory matches train_centralized on the same task up to float
// reassociation.
//
// Preconditions: inner-join scenario, every party covers every target row
// (the parties share the sample space), and the base source holds the label.
inline TrainResult train_federated(const RegressionTask& task, const IntegrationMetadata& meta,
                                   const std::vector<DataMatrix>& data) {
    detail::require_inner_join(meta, "federated training");
    validate_source_data(meta, data);
    detail::validate_task(task, meta.c_T);
    for (std::size_t k = 0; k < meta.n_sources(); ++k)
        if (meta.indicators[k].mapped_count() != meta.r_T)
            throw UnsupportedScenario("federated training needs every party on every row; source " +
                                      std::to_string(meta.source_ids[k]) + " covers " +
                                      std::to_string(meta.indicators[k].mapped_count()) + " of " +
                                      std::to_string(meta.r_T));
    if (!meta.maps_col(meta.base_index, task.label_col))
        throw UnsupportedScenario("the base source must hold the label column");

    std::vector<std::size_t> cols = task.feature_cols;
    std::sort(cols.begin(), cols.end());

    // Labels live with the base party.
    std::vector<double> y(meta.r_T);
    {
        const auto& ci = meta.indicators[meta.base_index].entries;
        const auto d_col = static_cast<std::size_t>(
            meta.mappings[meta.base_index].cm.entries[task.label_col]);
        for (std::size_t i = 0; i < meta.r_T; ++i)
            y[i] = data[meta.base_index](static_cast<std::size_t>(ci[i]), d_col);
    }

    std::vector<PartyState> parties = detail::make_parties(meta, data, cols);

    TrainResult result;
    result.feature_cols = cols;
    const int coordinator = 0;
    std::vector<double> residual(meta.r_T);

    auto run_round = [&](std::size_t t, bool update) {
        std::fill(residual.begin(), residual.end(), 0.0);
        for (const auto& p : parties) {
            const std::vector<double> pred = detail::party_prediction(p);
            for (std::size_t i = 0; i < meta.r_T; ++i) residual[i] += pred[i];
            result.messages.push_back(
                {t, p.source_id, coordinator, "partial_prediction", meta.r_T});
        }
        for (std::size_t i = 0; i < meta.r_T; ++i) residual[i] -= y[i];
        const double loss = detail::squared_norm(residual);
        detail::check_finite_loss(loss, t);
        result.loss.push_back(loss);
        if (!update) return;
        for (auto& p : parties) {
            result.messages.push_back({t, coordinator, p.source_id, "residual", meta.r_T});
            const std::vector<double> grad = detail::party_gradient(p, residual);
            for (std::size_t c = 0; c < p.theta.size(); ++c) {
                p.theta[c] -= task.learning_rate * grad[c];
                if (!std::isfinite(p.theta[c]))
                    throw DivergenceError("weight became non-finite at iteration " +
                                          std::to_string(t) + "; lower the learning rate");
            }
        }
    };

    for (std::size_t t = 0; t < task.iterations; ++t) run_round(t, true);
    run_round(task.iterations, false);

    // Concatenated view, aligned with the sorted feature columns; columns no
    // party owns keep weight zero, matching the centralized run where an
    // all-null column's gradient is identically zero.
    result.weights.assign(cols.size(), 0.0);
    for (const auto& p : parties)
        for (std::size_t c = 0; c < p.feature_cols.size(); ++c) {
            const auto it = std::lower_bound(cols.begin(), cols.end(), p.feature_cols[c]);
            result.weights[static_cast<std::size_t>(it - cols.begin())] = p.theta[c];
        }
    result.parties = std::move(parties);
    result.messages_exchanged = result.messages.size();
    return result;
}

}  // namespace silofactor
