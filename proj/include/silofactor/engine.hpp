#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <future>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "silofactor/errors.hpp"
#include "silofactor/materialize.hpp"
#include "silofactor/matrix.hpp"
#include "silofactor/metadata.hpp"

namespace silofactor {

// One multiplication workload: compute T * x without assembling T, where T
// is the target described by `meta` and assembled from `data`.
struct LmmRequest {
    const IntegrationMetadata& meta;
    const std::vector<DataMatrix>& data;
    const DataMatrix& x;  // c_T rows, c_X columns
};

struct EngineOptions {
    // Worker threads for per-source terms; 0 = take SILOFACTOR_THREADS from
    // the environment (default 1, i.e. sequential).
    unsigned threads = 0;
};

inline unsigned engine_thread_cap() {
    if (const char* env = std::getenv("SILOFACTOR_THREADS")) {
        unsigned v = 0;
        const char* end = env + std::string(env).size();
        if (std::from_chars(env, end, v).ec == std::errc() && v >= 1) return v;
    }
    return 1;
}

inline void validate_lmm_request(const LmmRequest& req) {
    validate_source_data(req.meta, req.data);
    if (req.x.rows() != req.meta.c_T)
        throw ShapeError("lmm: x has " + std::to_string(req.x.rows()) + " rows, target has " +
                         std::to_string(req.meta.c_T) + " columns");
}

// Source k's slice of the target as a dense r_T x c_T matrix (zero outside
// its rows and columns).  Reference helper; the engine itself never builds
// these.
inline DataMatrix local_contribution(std::size_t k, const IntegrationMetadata& meta,
                                     const std::vector<DataMatrix>& data) {
    validate_source_data(meta, data);
    DataMatrix t_k(meta.r_T, meta.c_T);
    const auto& ci = meta.indicators[k].entries;
    const auto& cm = meta.mappings[k].cm.entries;
    for (std::size_t i = 0; i < meta.r_T; ++i) {
        if (ci[i] < 0) continue;
        const std::size_t src_row = static_cast<std::size_t>(ci[i]);
        for (std::size_t j = 0; j < meta.c_T; ++j)
            if (cm[j] >= 0) t_k(i, j) = data[k](src_row, static_cast<std::size_t>(cm[j]));
    }
    return t_k;
}

namespace detail {

// Adds source k's masked term to `out`:
//
//   out += (T_k . R_k) x  computed as  T_k x - (T_k . not R_k) x
//
// T_k x itself never exists densely: rows of x are gathered through the
// column mapping, multiplied against the source matrix, and scattered through
// the row indicator.  The subtracted correction only touches rows a source in
// `earlier` also covers, and within them only the columns both sides map —
// the exact zero set of R_k.
inline void add_masked_source_term(const IntegrationMetadata& meta,
                                   const std::vector<DataMatrix>& data, const DataMatrix& x,
                                   std::size_t k, const std::vector<std::size_t>& earlier,
                                   DataMatrix& out) {
    const auto& cm = meta.mappings[k].cm.entries;
    const auto& ci = meta.indicators[k].entries;
    const std::size_t c_X = x.cols();

    // Gather: rows of x for the target columns this source feeds, in D_k
    // column order.
    DataMatrix gathered(meta.c_S(k), c_X);
    for (std::size_t j = 0; j < meta.c_T; ++j)
        if (cm[j] >= 0)
            std::copy(x.row_data(j), x.row_data(j) + c_X,
                      gathered.row_data(static_cast<std::size_t>(cm[j])));

    const DataMatrix product = matmul(data[k], gathered);

    // Columns shared with each earlier source; rows those sources also cover
    // get these columns' contribution taken back out.
    struct OverlapCols {
        std::size_t source;
        std::vector<std::size_t> cols;  // target column ids
    };
    std::vector<OverlapCols> overlaps;
    for (std::size_t b : earlier) {
        OverlapCols oc{b, {}};
        for (std::size_t j = 0; j < meta.c_T; ++j)
            if (meta.maps_col(b, j) && cm[j] >= 0) oc.cols.push_back(j);
        if (!oc.cols.empty()) overlaps.push_back(std::move(oc));
    }

    std::vector<std::uint32_t> stamp(meta.c_T, 0);
    std::uint32_t tick = 0;

    for (std::size_t i = 0; i < meta.r_T; ++i) {
        if (ci[i] < 0) continue;
        const std::size_t src_row = static_cast<std::size_t>(ci[i]);
        double* out_row = out.row_data(i);
        const double* p_row = product.row_data(src_row);
        for (std::size_t c = 0; c < c_X; ++c) out_row[c] += p_row[c];

        ++tick;
        for (const auto& oc : overlaps) {
            if (!meta.covers_row(oc.source, i)) continue;
            for (std::size_t j : oc.cols) {
                if (stamp[j] == tick) continue;  // column already credited to another source
                stamp[j] = tick;
                const double v = data[k](src_row, static_cast<std::size_t>(cm[j]));
                if (v == 0.0) continue;
                const double* x_row = x.row_data(j);
                for (std::size_t c = 0; c < c_X; ++c) out_row[c] -= v * x_row[c];
            }
        }
    }
}

// Sources whose values take priority over source k's on shared cells.
inline std::vector<std::size_t> earlier_sources(const IntegrationMetadata& meta, std::size_t k) {
    std::vector<std::size_t> earlier;
    for (std::size_t b : precedence_order(meta.n_sources(), meta.base_index)) {
        if (b == k) break;
        earlier.push_back(b);
    }
    return earlier;
}

}  // namespace detail

// T x over the factorized representation.  Equals materialize(meta, data)
// followed by a dense multiplication, bit for bit, but costs
// O(sum_k r_Sk c_Sk c_X) instead of O(r_T c_T c_X).  Per-source terms may run
// on separate threads; the final accumulation is always done in ascending
// source order, so results do not depend on the thread count.
inline DataMatrix factorized_lmm(const LmmRequest& req, const EngineOptions& options = {}) {
    validate_lmm_request(req);
    const IntegrationMetadata& meta = req.meta;
    const std::size_t n = meta.n_sources();

    unsigned threads = options.threads != 0 ? options.threads : engine_thread_cap();
    threads = std::min<unsigned>(threads, static_cast<unsigned>(n));

    DataMatrix out(meta.r_T, req.x.cols());
    if (threads <= 1 || n <= 1) {
        for (std::size_t k = 0; k < n; ++k)
            detail::add_masked_source_term(meta, req.data, req.x, k,
                                           detail::earlier_sources(meta, k), out);
        return out;
    }

    std::vector<std::future<DataMatrix>> partials;
    partials.reserve(n);
    for (std::size_t k = 0; k < n; ++k)
        partials.push_back(std::async(std::launch::async, [&, k] {
            DataMatrix term(meta.r_T, req.x.cols());
            detail::add_masked_source_term(meta, req.data, req.x, k,
                                           detail::earlier_sources(meta, k), term);
            return term;
        }));
    for (std::size_t k = 0; k < n; ++k) out = add(out, partials[k].get());
    return out;
}

// Source k's masked term alone, via the correction formulation.  Equals
// hadamard(local_contribution(k), R_k) * x.
inline DataMatrix masked_lmm_correction(std::size_t k, const IntegrationMetadata& meta,
                                        const std::vector<DataMatrix>& data,
                                        const DataMatrix& x) {
    validate_lmm_request(LmmRequest{meta, data, x});
    DataMatrix out(meta.r_T, x.cols());
    detail::add_masked_source_term(meta, data, x, k, detail::earlier_sources(meta, k), out);
    return out;
}

// Reference path that instantiates each source's dense target slice, applies
// the dense redundancy mask, and multiplies.  Same answer as factorized_lmm;
// kept only for cross-checking.
inline DataMatrix factorized_lmm_literal(const LmmRequest& req) {
    validate_lmm_request(req);
    const IntegrationMetadata& meta = req.meta;
    DataMatrix out(meta.r_T, req.x.cols());
    for (std::size_t k = 0; k < meta.n_sources(); ++k) {
        const DataMatrix masked = hadamard(local_contribution(k, meta, req.data),
                                           meta.redundancies.empty()
                                               ? compose_redundancy(meta, k)
                                               : meta.redundancies[k]);
        out = add(out, matmul(masked, req.x));
    }
    return out;
}

// Two-source fast path for mappings that split the target columns into two
// contiguous blocks: source 1 feeds columns [0, c_S1), source 2 feeds
// [c_S1, c_T), in order, with no overlap.  Then
//   T x = I_1 (D_1 x[0:c_S1]) + I_2 (D_2 x[c_S1:c_T])
// and no masking is needed.
inline DataMatrix baseline_lmm_disjoint(const LmmRequest& req) {
    validate_lmm_request(req);
    const IntegrationMetadata& meta = req.meta;
    if (meta.n_sources() != 2)
        throw NotDisjoint("the disjoint-column path handles exactly two sources, got " +
                          std::to_string(meta.n_sources()));
    const std::size_t c_1 = meta.c_S(0);
    const std::size_t c_2 = meta.c_S(1);
    if (c_1 + c_2 != meta.c_T)
        throw NotDisjoint("column counts " + std::to_string(c_1) + "+" + std::to_string(c_2) +
                          " do not partition " + std::to_string(meta.c_T) + " target columns");
    const auto& cm1 = meta.mappings[0].cm.entries;
    const auto& cm2 = meta.mappings[1].cm.entries;
    for (std::size_t j = 0; j < meta.c_T; ++j) {
        const bool first_block = j < c_1;
        const std::int64_t want1 = first_block ? static_cast<std::int64_t>(j) : kUnmapped;
        const std::int64_t want2 = first_block ? kUnmapped : static_cast<std::int64_t>(j - c_1);
        if (cm1[j] != want1 || cm2[j] != want2)
            throw NotDisjoint("target column " + std::to_string(j) +
                              " breaks the contiguous two-block mapping");
    }

    const DataMatrix p1 = matmul(req.data[0], slice_rows(req.x, 0, c_1));
    const DataMatrix p2 = matmul(req.data[1], slice_rows(req.x, c_1, meta.c_T));
    DataMatrix out(meta.r_T, req.x.cols());
    for (std::size_t i = 0; i < meta.r_T; ++i) {
        double* out_row = out.row_data(i);
        for (std::size_t k = 0; k < 2; ++k) {
            const std::int64_t src = meta.indicators[k].entries[i];
            if (src < 0) continue;
            const double* p_row =
                (k == 0 ? p1 : p2).row_data(static_cast<std::size_t>(src));
            for (std::size_t c = 0; c < out.cols(); ++c) out_row[c] += p_row[c];
        }
    }
    return out;
}

}  // namespace silofactor
