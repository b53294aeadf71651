#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>
#include <variant>
#include <vector>

#include "silofactor/errors.hpp"
#include "silofactor/matrix.hpp"

namespace silofactor {

// Sentinel for "this target position has no counterpart in the source".
inline constexpr std::int64_t kUnmapped = -1;

enum class ColumnType { Numeric, Categorical };

struct ColumnDef {
    std::string name;
    ColumnType type = ColumnType::Numeric;
};

// A raw table cell: numeric value or categorical label.  Categorical labels
// are dictionary-encoded when the table is projected to a matrix.
using Cell = std::variant<double, std::string>;

// One silo's table, as ingested.  `source_id` is a positive integer that is
// unique within an integration spec; all per-source vectors elsewhere in the
// library are ordered by ascending source_id.
struct SourceTable {
    std::string name;
    int source_id = 0;
    std::vector<ColumnDef> columns;
    std::vector<std::vector<Cell>> rows;

    std::size_t n_rows() const noexcept { return rows.size(); }
    std::size_t n_cols() const noexcept { return columns.size(); }

    void validate() const {
        if (source_id < 1)
            throw InvalidMetadata("source '" + name + "': source_id must be >= 1");
        std::unordered_set<std::string> seen;
        for (const auto& c : columns)
            if (!seen.insert(c.name).second)
                throw InvalidMetadata("source '" + name + "': duplicate column '" + c.name + "'");
        for (std::size_t i = 0; i < rows.size(); ++i)
            if (rows[i].size() != columns.size())
                throw InvalidMetadata("source '" + name + "': row " + std::to_string(i) +
                                      " has " + std::to_string(rows[i].size()) +
                                      " cells, expected " + std::to_string(columns.size()));
    }
};

// Shape of the integrated table: ordered column names.  The position of a
// name in `columns` is that column's id (0-based) everywhere else.
struct TargetSchema {
    std::string name;
    std::vector<std::string> columns;

    std::size_t column_count() const noexcept { return columns.size(); }

    std::optional<std::size_t> column_index(const std::string& col) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == col) return i;
        return std::nullopt;
    }

    void validate() const {
        std::unordered_set<std::string> seen;
        for (const auto& c : columns)
            if (!seen.insert(c).second)
                throw InvalidMetadata("target '" + name + "': duplicate column '" + c + "'");
    }
};

// One group of source rows known to describe the same entity.
// Members are (source_id, row index) pairs.
struct RowCluster {
    std::vector<std::pair<int, std::size_t>> members;
};

// The full matching: disjoint clusters, each with rows from >= 2 sources and
// at most one row per source.
struct RowMatching {
    std::vector<RowCluster> clusters;
};

// ---------------------------------------------------------------------------
// Compressed metadata vectors.
//
// These are the canonical runtime representation of the mapping and
// indicator matrices: one integer per target position, -1 where the source
// contributes nothing.  The dense 0/1 matrices are only materialized for
// auditing and for reference computations.
// ---------------------------------------------------------------------------

// entries[i] = j means target column i is fed by column j of the source's
// projected matrix D_k; kUnmapped means no source column feeds it.
struct CompressedMapping {
    std::vector<std::int64_t> entries;

    std::size_t target_len() const noexcept { return entries.size(); }

    std::size_t mapped_count() const noexcept {
        std::size_t n = 0;
        for (auto e : entries) n += (e >= 0);
        return n;
    }

    bool is_mapped(std::size_t i) const { return entries[i] >= 0; }
};

// entries[i] = j means target row i comes from source row j; kUnmapped means
// the source contributes nothing to that target row.
struct CompressedIndicator {
    std::vector<std::int64_t> entries;

    std::size_t target_len() const noexcept { return entries.size(); }

    std::size_t mapped_count() const noexcept {
        std::size_t n = 0;
        for (auto e : entries) n += (e >= 0);
        return n;
    }

    bool is_mapped(std::size_t i) const { return entries[i] >= 0; }
};

namespace detail {

// Shared expansion logic: vec[i] = j becomes a 1 at (i, j) of a
// (vec.size() x width) binary matrix.  Non-negative entries must be unique
// and within [0, width).
inline DataMatrix expand_compressed(const std::vector<std::int64_t>& entries, std::size_t width,
                                    const char* what) {
    DataMatrix m(entries.size(), width);
    std::vector<bool> used(width, false);
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const std::int64_t e = entries[i];
        if (e == kUnmapped) continue;
        if (e < 0 || static_cast<std::size_t>(e) >= width)
            throw InvalidMetadata(std::string(what) + ": entry " + std::to_string(e) +
                                  " at position " + std::to_string(i) +
                                  " outside [0, " + std::to_string(width) + ")");
        if (used[static_cast<std::size_t>(e)])
            throw InvalidMetadata(std::string(what) + ": entry " + std::to_string(e) +
                                  " appears more than once");
        used[static_cast<std::size_t>(e)] = true;
        m(i, static_cast<std::size_t>(e)) = 1.0;
    }
    return m;
}

// Inverse of expand_compressed: reads the single 1 per row back into a
// vector, checking the matrix really is such a pattern.
inline std::vector<std::int64_t> compress_binary(const DataMatrix& m, const char* what) {
    std::vector<std::int64_t> entries(m.rows(), kUnmapped);
    std::vector<bool> used(m.cols(), false);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            const double v = m(i, j);
            if (v == 0.0) continue;
            if (v != 1.0)
                throw InvalidMetadata(std::string(what) + ": value " + std::to_string(v) +
                                      " at (" + std::to_string(i) + ", " + std::to_string(j) +
                                      ") is not 0/1");
            if (entries[i] != kUnmapped)
                throw InvalidMetadata(std::string(what) + ": row " + std::to_string(i) +
                                      " has more than one 1");
            if (used[j])
                throw InvalidMetadata(std::string(what) + ": column " + std::to_string(j) +
                                      " has more than one 1");
            entries[i] = static_cast<std::int64_t>(j);
            used[j] = true;
        }
    }
    return entries;
}

}  // namespace detail

// Dense c_T x c_Sk mapping matrix for a source with c_Sk projected columns.
inline DataMatrix expand_mapping(const CompressedMapping& cm, std::size_t c_Sk) {
    return detail::expand_compressed(cm.entries, c_Sk, "mapping");
}

// Dense r_T x r_Sk indicator matrix for a source with r_Sk rows.
inline DataMatrix expand_indicator(const CompressedIndicator& ci, std::size_t r_Sk) {
    return detail::expand_compressed(ci.entries, r_Sk, "indicator");
}

inline CompressedMapping compress_mapping(const DataMatrix& m) {
    return CompressedMapping{detail::compress_binary(m, "mapping")};
}

inline CompressedIndicator compress_indicator(const DataMatrix& m) {
    return CompressedIndicator{detail::compress_binary(m, "indicator")};
}

// Checks matching invariants against per-source row counts:
// clusters have >= 2 members, at most one row per source per cluster, rows in
// range, and no row is claimed by two clusters.  `row_count_of` maps
// source_id -> row count and throws InvalidMatching for unknown ids.
template <typename RowCountFn>
void validate_matching(const RowMatching& matching, RowCountFn&& row_count_of) {
    std::unordered_set<std::string> claimed;
    for (std::size_t c = 0; c < matching.clusters.size(); ++c) {
        const auto& cluster = matching.clusters[c];
        if (cluster.members.size() < 2)
            throw InvalidMatching("cluster " + std::to_string(c) + " has fewer than 2 members");
        std::unordered_set<int> sources_in_cluster;
        for (const auto& [sid, row] : cluster.members) {
            if (!sources_in_cluster.insert(sid).second)
                throw InvalidMatching("cluster " + std::to_string(c) +
                                      " references source " + std::to_string(sid) + " twice");
            const std::size_t n_rows = row_count_of(sid);
            if (row >= n_rows)
                throw InvalidMatching("cluster " + std::to_string(c) + ": row " +
                                      std::to_string(row) + " out of range for source " +
                                      std::to_string(sid) + " (" + std::to_string(n_rows) +
                                      " rows)");
            const std::string key = std::to_string(sid) + ":" + std::to_string(row);
            if (!claimed.insert(key).second)
                throw InvalidMatching("row " + std::to_string(row) + " of source " +
                                      std::to_string(sid) + " appears in two clusters");
        }
    }
}

}  // namespace silofactor
