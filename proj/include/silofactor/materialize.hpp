#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "silofactor/errors.hpp"
#include "silofactor/matrix.hpp"
#include "silofactor/metadata.hpp"
#include "silofactor/tgd.hpp"
#include "silofactor/types.hpp"

namespace silofactor {

namespace detail {

inline double parse_numeric_cell(const std::string& s, const std::string& where) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw IngestError("non-numeric value '" + s + "' in numeric column " + where);
    return v;
}

// Stable dictionary key for a raw cell; numeric cells in categorical columns
// are keyed by their exact printed value.
inline std::string cell_key(const Cell& cell) {
    if (std::holds_alternative<std::string>(cell)) return std::get<std::string>(cell);
    return "num:" + std::to_string(std::get<double>(cell));
}

}  // namespace detail

// Projects a raw table onto its mapped columns, in the column order of the
// projected matrix D_k (ascending target column).  Numeric columns must
// parse; categorical columns are dictionary-encoded in order of first
// occurrence (first distinct label = 0.0, next = 1.0, ...).
inline DataMatrix project_source(const SourceTable& table, const SourceMapping& mapping) {
    table.validate();
    for (std::size_t raw : mapping.source_columns)
        if (raw >= table.n_cols())
            throw IngestError("source '" + table.name + "': mapped column " +
                              std::to_string(raw) + " out of range (" +
                              std::to_string(table.n_cols()) + " columns)");

    DataMatrix d(table.n_rows(), mapping.source_columns.size());
    for (std::size_t c = 0; c < mapping.source_columns.size(); ++c) {
        const std::size_t raw = mapping.source_columns[c];
        const ColumnDef& col = table.columns[raw];
        if (col.type == ColumnType::Numeric) {
            for (std::size_t i = 0; i < table.n_rows(); ++i) {
                const Cell& cell = table.rows[i][raw];
                const double v = std::holds_alternative<double>(cell)
                                     ? std::get<double>(cell)
                                     : detail::parse_numeric_cell(
                                           std::get<std::string>(cell),
                                           "'" + col.name + "' of '" + table.name + "'");
                if (!std::isfinite(v))
                    throw IngestError("non-finite value in column '" + col.name + "' of '" +
                                      table.name + "'");
                d(i, c) = v;
            }
        } else {
            std::unordered_map<std::string, double> codes;
            for (std::size_t i = 0; i < table.n_rows(); ++i) {
                const std::string key = detail::cell_key(table.rows[i][raw]);
                auto [it, inserted] = codes.emplace(key, static_cast<double>(codes.size()));
                d(i, c) = it->second;
            }
        }
    }
    return d;
}

// The assembled target: values plus a 0/1 presence mask (0 = the cell is
// null, stored as 0.0 in `matrix`).  `conflicts` lists cells where a source
// held a different value than the one that survived.
struct MaterializedTarget {
    DataMatrix matrix;
    DataMatrix presence;

    struct Conflict {
        std::size_t row = 0;
        std::size_t col = 0;
        double kept = 0.0;
        int dropped_source = 0;
        double dropped = 0.0;
    };
    std::vector<Conflict> conflicts;
};

inline void validate_source_data(const IntegrationMetadata& meta,
                                 const std::vector<DataMatrix>& data) {
    if (data.size() != meta.n_sources())
        throw ShapeError("expected " + std::to_string(meta.n_sources()) +
                         " source matrices, got " + std::to_string(data.size()));
    for (std::size_t k = 0; k < data.size(); ++k) {
        if (data[k].rows() != meta.source_rows[k] || data[k].cols() != meta.c_S(k))
            throw ShapeError("source " + std::to_string(meta.source_ids[k]) + ": matrix is " +
                             detail::shape_str(data[k]) + ", metadata expects " +
                             std::to_string(meta.source_rows[k]) + "x" +
                             std::to_string(meta.c_S(k)));
    }
}

// Assembles the target by scattering every source through its indicator and
// mapping vectors.  A cell covered by several sources keeps the first value
// in conflict order (base source first, then ascending source_id), which is
// exactly the masked sum of per-source contributions.
inline MaterializedTarget materialize(const IntegrationMetadata& meta,
                                      const std::vector<DataMatrix>& data) {
    validate_source_data(meta, data);

    MaterializedTarget out;
    out.matrix = DataMatrix(meta.r_T, meta.c_T);
    out.presence = DataMatrix(meta.r_T, meta.c_T);

    for (std::size_t k : precedence_order(meta.n_sources(), meta.base_index)) {
        // (target column, D_k column) pairs of this source.
        std::vector<std::pair<std::size_t, std::size_t>> cols;
        for (std::size_t j = 0; j < meta.c_T; ++j)
            if (meta.maps_col(k, j))
                cols.emplace_back(j, static_cast<std::size_t>(meta.mappings[k].cm.entries[j]));

        const auto& ci = meta.indicators[k].entries;
        for (std::size_t i = 0; i < meta.r_T; ++i) {
            if (ci[i] < 0) continue;
            const std::size_t src_row = static_cast<std::size_t>(ci[i]);
            for (const auto& [j, d] : cols) {
                const double v = data[k](src_row, d);
                if (out.presence(i, j) == 0.0) {
                    out.matrix(i, j) = v;
                    out.presence(i, j) = 1.0;
                } else if (out.matrix(i, j) != v) {
                    out.conflicts.push_back({i, j, out.matrix(i, j), meta.source_ids[k], v});
                }
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Tuple-level reference implementation.
//
// Assembles the target row by row with hash lookups on the matching clusters
// and its own reading of the rules — no metadata vectors, no matrix algebra.
// Kept as an independent cross-check for the pipeline above.
// ---------------------------------------------------------------------------
inline MaterializedTarget naive_join_oracle(const std::vector<SourceTable>& tables,
                                            const TgdSet& ts, const RowMatching& matching) {
    const std::size_t n = tables.size();
    const std::size_t c_T = ts.target.column_count();

    auto table_index = [&](const std::string& relation) -> std::size_t {
        for (std::size_t k = 0; k < n; ++k)
            if (tables[k].name == relation) return k;
        throw UnknownRelation("undeclared relation '" + relation + "'");
    };

    // Read the rules: which raw column feeds which target column, who joins,
    // who keeps their unmatched rows.
    std::vector<std::set<std::pair<std::size_t, std::size_t>>> col_pairs(n);  // (raw, target)
    std::vector<bool> owner(n, false);
    bool any_join = false;
    for (const auto& t : ts.tgds) {
        std::unordered_map<std::string, std::size_t> rhs_pos;
        for (std::size_t i = 0; i < t.rhs_atom.variables.size(); ++i)
            rhs_pos.emplace(t.rhs_atom.variables[i], i);
        if (t.lhs_atoms.size() == 1)
            owner[table_index(t.lhs_atoms.front().relation)] = true;
        else
            any_join = true;
        for (const auto& atom : t.lhs_atoms) {
            const std::size_t k = table_index(atom.relation);
            for (std::size_t p = 0; p < atom.variables.size(); ++p) {
                auto it = rhs_pos.find(atom.variables[p]);
                if (it != rhs_pos.end()) col_pairs[k].insert({p, it->second});
            }
        }
    }

    // Which source wins conflicts: the surviving side of a left join, else
    // the first table.
    std::size_t base = 0;
    if (any_join) {
        std::size_t owner_count = 0, owner_idx = 0;
        for (std::size_t k = 0; k < n; ++k)
            if (owner[k]) {
                ++owner_count;
                owner_idx = k;
            }
        if (owner_count == 1) base = owner_idx;
    }
    std::vector<std::size_t> fill_order;
    fill_order.push_back(base);
    for (std::size_t k = 0; k < n; ++k)
        if (k != base) fill_order.push_back(k);

    // Encode the mapped raw columns of each table up front, in source row
    // order, so categorical codes match a straight per-table projection.
    std::vector<std::unordered_map<std::size_t, std::vector<double>>> encoded(n);
    for (std::size_t k = 0; k < n; ++k) {
        for (const auto& [raw, target] : col_pairs[k]) {
            if (encoded[k].count(raw)) continue;
            std::vector<double> column(tables[k].n_rows());
            const ColumnDef& col = tables[k].columns.at(raw);
            std::unordered_map<std::string, double> codes;
            for (std::size_t i = 0; i < tables[k].n_rows(); ++i) {
                const Cell& cell = tables[k].rows[i][raw];
                if (col.type == ColumnType::Numeric) {
                    column[i] = std::holds_alternative<double>(cell)
                                    ? std::get<double>(cell)
                                    : detail::parse_numeric_cell(
                                          std::get<std::string>(cell),
                                          "'" + col.name + "' of '" + tables[k].name + "'");
                } else {
                    auto [it, ins] =
                        codes.emplace(detail::cell_key(cell), static_cast<double>(codes.size()));
                    column[i] = it->second;
                }
            }
            encoded[k].emplace(raw, std::move(column));
        }
    }

    // Hash every matched row to its cluster.
    auto row_key = [](int sid, std::size_t row) {
        return std::to_string(sid) + ":" + std::to_string(row);
    };
    std::unordered_map<std::string, std::size_t> cluster_of;
    for (std::size_t c = 0; c < matching.clusters.size(); ++c)
        for (const auto& [sid, row] : matching.clusters[c].members)
            cluster_of.emplace(row_key(sid, row), c);

    // Merged rows first, ordered by (smallest member source_id, its row).
    std::vector<std::size_t> cluster_order(matching.clusters.size());
    for (std::size_t c = 0; c < cluster_order.size(); ++c) cluster_order[c] = c;
    auto cluster_key = [&](std::size_t c) {
        std::pair<int, std::size_t> best{0, 0};
        bool first = true;
        for (const auto& [sid, row] : matching.clusters[c].members)
            if (first || sid < best.first) {
                best = {sid, row};
                first = false;
            }
        return best;
    };
    std::sort(cluster_order.begin(), cluster_order.end(),
              [&](std::size_t a, std::size_t b) { return cluster_key(a) < cluster_key(b); });

    std::vector<std::vector<double>> rows;
    std::vector<std::vector<double>> present;
    auto emit_row = [&]() -> std::size_t {
        rows.emplace_back(c_T, 0.0);
        present.emplace_back(c_T, 0.0);
        return rows.size() - 1;
    };
    auto fill_from = [&](std::size_t target_row, std::size_t k, std::size_t src_row) {
        for (const auto& [raw, target] : col_pairs[k]) {
            if (present[target_row][target] != 0.0) continue;
            rows[target_row][target] = encoded[k].at(raw)[src_row];
            present[target_row][target] = 1.0;
        }
    };

    for (std::size_t c : cluster_order) {
        const std::size_t target_row = emit_row();
        std::unordered_map<int, std::size_t> member_row;
        for (const auto& [sid, row] : matching.clusters[c].members) member_row.emplace(sid, row);
        for (std::size_t k : fill_order) {
            auto it = member_row.find(tables[k].source_id);
            if (it != member_row.end()) fill_from(target_row, k, it->second);
        }
    }

    // Then each owner's unmatched rows, tables in order, rows in order.
    for (std::size_t k = 0; k < n; ++k) {
        if (!owner[k]) continue;
        for (std::size_t row = 0; row < tables[k].n_rows(); ++row) {
            if (cluster_of.count(row_key(tables[k].source_id, row))) continue;
            fill_from(emit_row(), k, row);
        }
    }

    MaterializedTarget out;
    out.matrix = DataMatrix(rows.size(), c_T);
    out.presence = DataMatrix(rows.size(), c_T);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < c_T; ++j) {
            out.matrix(i, j) = rows[i][j];
            out.presence(i, j) = present[i][j];
        }
    return out;
}

}  // namespace silofactor
