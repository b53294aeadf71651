#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "silofactor/errors.hpp"
#include "silofactor/matrix.hpp"
#include "silofactor/tgd.hpp"
#include "silofactor/types.hpp"

namespace silofactor {

// Everything the execution engine needs to know about how source tables
// assemble into the target, in compressed form.  Per-source vectors are
// ordered by ascending source_id.  `redundancies` holds the dense 0/1 masks
// (1 = this source's value is the surviving copy of the cell) and may be left
// empty when only the compressed forms are needed.
struct IntegrationMetadata {
    ScenarioKind scenario;
    std::vector<int> source_ids;
    std::vector<std::size_t> source_rows;
    std::vector<SourceMapping> mappings;
    std::vector<CompressedIndicator> indicators;
    std::vector<DataMatrix> redundancies;
    std::size_t r_T = 0;
    std::size_t c_T = 0;
    std::size_t base_index = 0;

    std::size_t n_sources() const noexcept { return source_ids.size(); }
    int base_source() const { return source_ids[base_index]; }
    std::size_t c_S(std::size_t k) const { return mappings[k].source_columns.size(); }

    bool covers_row(std::size_t k, std::size_t i) const {
        return indicators[k].entries[i] >= 0;
    }
    bool maps_col(std::size_t k, std::size_t j) const {
        return mappings[k].cm.entries[j] >= 0;
    }
};

// Conflict-resolution order between sources: the base source first, then the
// rest by ascending source_id.  A cell covered by several sources keeps the
// value of the earliest one in this order.
inline std::vector<std::size_t> precedence_order(std::size_t n_sources, std::size_t base_index) {
    std::vector<std::size_t> order;
    order.reserve(n_sources);
    order.push_back(base_index);
    for (std::size_t k = 0; k < n_sources; ++k)
        if (k != base_index) order.push_back(k);
    return order;
}

// Column mappings are fully determined by the rules; this is the same
// derivation the rule module exposes, re-exported under the name the
// metadata pipeline uses.
inline std::vector<SourceMapping> mapping_matrix_gen(const TgdSet& ts) {
    return derive_column_mappings(ts);
}

// ---------------------------------------------------------------------------
// Row indicators.
//
// Target rows are laid out in two bands: first one row per matching cluster
// (sorted by the smallest participating source_id, then by that source's row
// index), then, per source owning a single-source rule (ascending source_id),
// its rows that belong to no cluster, in row order.  All indicator vectors
// are padded with -1 to the final target length.
// ---------------------------------------------------------------------------
inline std::pair<std::vector<CompressedIndicator>, std::size_t> compressed_indicator_gen(
    const RowMatching& matching, const TgdSet& ts, const std::vector<std::size_t>& row_counts,
    const std::vector<int>& source_ids) {
    const std::size_t n = ts.sources.size();
    if (row_counts.size() != n || source_ids.size() != n)
        throw InvalidMetadata("row/source-id vectors do not match the rule set's source count");

    std::unordered_map<int, std::size_t> index_of_id;
    for (std::size_t k = 0; k < n; ++k) index_of_id.emplace(source_ids[k], k);

    validate_matching(matching, [&](int sid) -> std::size_t {
        auto it = index_of_id.find(sid);
        if (it == index_of_id.end())
            throw InvalidMatching("cluster references unknown source " + std::to_string(sid));
        return row_counts[it->second];
    });

    const std::vector<bool> joined = joined_sources(ts);
    const std::vector<bool> owners = singleton_owner_sources(ts);
    for (const auto& cluster : matching.clusters)
        for (const auto& [sid, row] : cluster.members)
            if (!joined[index_of_id.at(sid)])
                throw InvalidMatching("cluster references source " + std::to_string(sid) +
                                      ", which no multi-source rule joins");

    // Merged band: one target row per cluster.
    std::vector<std::size_t> cluster_order(matching.clusters.size());
    for (std::size_t c = 0; c < cluster_order.size(); ++c) cluster_order[c] = c;
    auto cluster_key = [&](std::size_t c) {
        int min_id = 0;
        std::size_t min_row = 0;
        bool first = true;
        for (const auto& [sid, row] : matching.clusters[c].members) {
            if (first || sid < min_id) {
                min_id = sid;
                min_row = row;
                first = false;
            }
        }
        return std::pair<int, std::size_t>(min_id, min_row);
    };
    std::sort(cluster_order.begin(), cluster_order.end(),
              [&](std::size_t a, std::size_t b) { return cluster_key(a) < cluster_key(b); });

    const std::size_t merged = matching.clusters.size();
    std::vector<CompressedIndicator> cis(n);
    for (auto& ci : cis) ci.entries.assign(merged, kUnmapped);

    std::vector<std::unordered_set<std::size_t>> clustered_rows(n);
    for (std::size_t pos = 0; pos < cluster_order.size(); ++pos) {
        for (const auto& [sid, row] : matching.clusters[cluster_order[pos]].members) {
            const std::size_t k = index_of_id.at(sid);
            cis[k].entries[pos] = static_cast<std::int64_t>(row);
            clustered_rows[k].insert(row);
        }
    }

    // Per-source band: unmatched rows of each single-source-rule owner.
    std::size_t length = merged;
    for (std::size_t k = 0; k < n; ++k) {
        if (!owners[k]) continue;
        cis[k].entries.resize(length, kUnmapped);
        for (std::size_t row = 0; row < row_counts[k]; ++row) {
            if (clustered_rows[k].count(row)) continue;
            cis[k].entries.push_back(static_cast<std::int64_t>(row));
            ++length;
        }
    }

    // Pad every vector to the final target length.
    for (auto& ci : cis) ci.entries.resize(length, kUnmapped);
    return {std::move(cis), length};
}

// Pairwise redundancy mask of source k against source b, computed by the
// closed form: a cell is redundant exactly when both its row and its column
// are covered by b as well, i.e.
//   R = not( (rowSums(I_b) . rowSums(I_k)) (x) (rowSums(M_b) . rowSums(M_k)) )
// with "." element-wise and "(x)" the outer product.  For k == b the mask is
// all ones.
inline DataMatrix redundancy_matrix_gen(const IntegrationMetadata& meta, std::size_t base,
                                        std::size_t k) {
    if (base >= meta.n_sources() || k >= meta.n_sources())
        throw InvalidMetadata("redundancy_matrix_gen: source index out of range");
    if (k == base) return DataMatrix(meta.r_T, meta.c_T, 1.0);

    const DataMatrix i_b = expand_indicator(meta.indicators[base], meta.source_rows[base]);
    const DataMatrix i_k = expand_indicator(meta.indicators[k], meta.source_rows[k]);
    const DataMatrix m_b = expand_mapping(meta.mappings[base].cm, meta.c_S(base));
    const DataMatrix m_k = expand_mapping(meta.mappings[k].cm, meta.c_S(k));

    const std::vector<double> rows_b = row_sums(i_b);
    const std::vector<double> rows_k = row_sums(i_k);
    const std::vector<double> cols_b = row_sums(m_b);
    const std::vector<double> cols_k = row_sums(m_k);

    std::vector<double> row_both(meta.r_T), col_both(meta.c_T);
    for (std::size_t i = 0; i < meta.r_T; ++i) row_both[i] = rows_b[i] * rows_k[i];
    for (std::size_t j = 0; j < meta.c_T; ++j) col_both[j] = cols_b[j] * cols_k[j];
    return logical_not(outer(row_both, col_both));
}

// Dense redundancy mask of source k against everything that precedes it in
// conflict order: the AND of the pairwise masks, so a cell goes redundant as
// soon as any earlier source covers it.  The base source's mask is all ones.
inline DataMatrix compose_redundancy(const IntegrationMetadata& meta, std::size_t k) {
    DataMatrix mask(meta.r_T, meta.c_T, 1.0);
    for (std::size_t b : precedence_order(meta.n_sources(), meta.base_index)) {
        if (b == k) break;
        mask = hadamard(mask, redundancy_matrix_gen(meta, b, k));
    }
    return mask;
}

struct MetadataOptions {
    // Conflict-winning source (by source_id).  Defaults to the surviving side
    // for LeftJoin and to the lowest source_id otherwise.
    std::optional<int> base_source;
    // Materialize the dense redundancy masks.  The execution engine only
    // needs the compressed forms, so benchmarks switch this off.
    bool dense_redundancy = true;
};

namespace detail {

inline IntegrationMetadata build_metadata_impl(const TgdSet& ts, const RowMatching& matching,
                                               const std::vector<std::size_t>& row_counts,
                                               const std::vector<int>& source_ids,
                                               const MetadataOptions& options) {
    for (std::size_t k = 1; k < source_ids.size(); ++k)
        if (source_ids[k - 1] >= source_ids[k])
            throw InvalidMetadata("sources must be ordered by strictly ascending source_id");

    IntegrationMetadata meta;
    meta.scenario = derive_scenario(ts);
    meta.source_ids = source_ids;
    meta.source_rows = row_counts;
    meta.mappings = derive_column_mappings(ts);
    meta.c_T = ts.target.column_count();

    auto [cis, r_T] = compressed_indicator_gen(matching, ts, row_counts, source_ids);
    meta.indicators = std::move(cis);
    meta.r_T = r_T;

    if (meta.scenario.kind == Scenario::LeftJoin) {
        meta.base_index = *meta.scenario.base_index;
        if (options.base_source && *options.base_source != source_ids[meta.base_index])
            throw InvalidMetadata("base_source " + std::to_string(*options.base_source) +
                                  " conflicts with the surviving side of the left join (source " +
                                  std::to_string(source_ids[meta.base_index]) + ")");
    } else if (options.base_source) {
        auto it = std::find(source_ids.begin(), source_ids.end(), *options.base_source);
        if (it == source_ids.end())
            throw InvalidMetadata("base_source " + std::to_string(*options.base_source) +
                                  " is not a declared source");
        meta.base_index = static_cast<std::size_t>(it - source_ids.begin());
    } else {
        meta.base_index = 0;
    }

    if (options.dense_redundancy) {
        meta.redundancies.reserve(meta.n_sources());
        for (std::size_t k = 0; k < meta.n_sources(); ++k)
            meta.redundancies.push_back(compose_redundancy(meta, k));
    }
    return meta;
}

}  // namespace detail

inline IntegrationMetadata build_metadata(const TgdSet& ts, const RowMatching& matching,
                                          const std::vector<SourceTable>& tables,
                                          const MetadataOptions& options = {}) {
    if (tables.size() != ts.sources.size())
        throw InvalidMetadata("rule set declares " + std::to_string(ts.sources.size()) +
                              " sources, got " + std::to_string(tables.size()) + " tables");
    std::vector<std::size_t> row_counts(tables.size());
    std::vector<int> source_ids(tables.size());
    for (std::size_t k = 0; k < tables.size(); ++k) {
        tables[k].validate();
        if (tables[k].name != ts.sources[k])
            throw InvalidMetadata("table " + std::to_string(k) + " is '" + tables[k].name +
                                  "', rule set expects '" + ts.sources[k] + "'");
        row_counts[k] = tables[k].n_rows();
        source_ids[k] = tables[k].source_id;
    }

    // Atoms list raw source columns positionally, so arities must agree with
    // the tables.
    for (const auto& t : ts.tgds)
        for (const auto& atom : t.lhs_atoms) {
            const std::size_t k = *ts.source_index(atom.relation);
            if (atom.variables.size() != tables[k].n_cols())
                throw InconsistentMapping("rule uses '" + atom.relation + "' with " +
                                          std::to_string(atom.variables.size()) +
                                          " columns, table has " +
                                          std::to_string(tables[k].n_cols()));
        }
    return detail::build_metadata_impl(ts, matching, row_counts, source_ids, options);
}

// Table-free entry point for generated workloads where only the shapes exist.
inline IntegrationMetadata build_metadata(const TgdSet& ts, const RowMatching& matching,
                                          const std::vector<std::size_t>& row_counts,
                                          const std::vector<int>& source_ids,
                                          const MetadataOptions& options = {}) {
    return detail::build_metadata_impl(ts, matching, row_counts, source_ids, options);
}

// Dense 0/1 matrix marking the target cells source k covers (its row
// intersected with its columns).  Reference helper for audits and tests.
inline DataMatrix presence_mask(const IntegrationMetadata& meta, std::size_t k) {
    DataMatrix mask(meta.r_T, meta.c_T);
    for (std::size_t i = 0; i < meta.r_T; ++i) {
        if (!meta.covers_row(k, i)) continue;
        for (std::size_t j = 0; j < meta.c_T; ++j)
            if (meta.maps_col(k, j)) mask(i, j) = 1.0;
    }
    return mask;
}

}  // namespace silofactor
