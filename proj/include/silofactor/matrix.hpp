#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "silofactor/errors.hpp"

namespace silofactor {

// Dense row-major matrix of doubles.  The only numeric container in the
// library; binary masks (mapping, indicator, redundancy) reuse it with
// values restricted to {0, 1}.
class DataMatrix {
public:
    DataMatrix() = default;

    DataMatrix(std::size_t n_rows, std::size_t n_cols, double fill = 0.0)
        : n_rows_(n_rows), n_cols_(n_cols), values_(n_rows * n_cols, fill) {}

    static DataMatrix from_rows(const std::vector<std::vector<double>>& rows) {
        DataMatrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != m.n_cols_)
                throw ShapeError("matrix literal: row " + std::to_string(i) + " has " +
                                 std::to_string(rows[i].size()) + " values, expected " +
                                 std::to_string(m.n_cols_));
            std::copy(rows[i].begin(), rows[i].end(), m.row_data(i));
        }
        return m;
    }

    static DataMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
        std::vector<std::vector<double>> tmp;
        tmp.reserve(rows.size());
        for (const auto& r : rows) tmp.emplace_back(r);
        return from_rows(tmp);
    }

    static DataMatrix identity(std::size_t n) {
        DataMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const noexcept { return n_rows_; }
    std::size_t cols() const noexcept { return n_cols_; }
    std::size_t size() const noexcept { return values_.size(); }

    double& operator()(std::size_t i, std::size_t j) { return values_[i * n_cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return values_[i * n_cols_ + j]; }

    double* row_data(std::size_t i) { return values_.data() + i * n_cols_; }
    const double* row_data(std::size_t i) const { return values_.data() + i * n_cols_; }

    const std::vector<double>& values() const noexcept { return values_; }

    bool all_finite() const {
        return std::all_of(values_.begin(), values_.end(),
                           [](double v) { return std::isfinite(v); });
    }

    bool is_binary() const {
        return std::all_of(values_.begin(), values_.end(),
                           [](double v) { return v == 0.0 || v == 1.0; });
    }

    friend bool operator==(const DataMatrix& a, const DataMatrix& b) {
        return a.n_rows_ == b.n_rows_ && a.n_cols_ == b.n_cols_ && a.values_ == b.values_;
    }

private:
    std::size_t n_rows_ = 0;
    std::size_t n_cols_ = 0;
    std::vector<double> values_;
};

namespace detail {
inline std::string shape_str(const DataMatrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}
}  // namespace detail

inline void require_same_shape(const DataMatrix& a, const DataMatrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeError(std::string(op) + ": shapes " + detail::shape_str(a) + " and " +
                         detail::shape_str(b) + " differ");
}

inline DataMatrix matmul(const DataMatrix& a, const DataMatrix& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: " + detail::shape_str(a) + " * " + detail::shape_str(b));
    DataMatrix out(a.rows(), b.cols());
    const std::size_t n_cols = b.cols();
    // Dense on purpose: the cost estimator prices this path as 2*r*c*n flops,
    // so the kernel must not silently exploit zeros (e.g. absent outer-join
    // cells) or its measured behavior drifts from the estimates that pick it.
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* out_row = out.row_data(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            const double* b_row = b.row_data(k);
            for (std::size_t j = 0; j < n_cols; ++j) out_row[j] += aik * b_row[j];
        }
    }
    return out;
}

inline DataMatrix hadamard(const DataMatrix& a, const DataMatrix& b) {
    require_same_shape(a, b, "hadamard");
    DataMatrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(i, j) * b(i, j);
    return out;
}

inline DataMatrix add(const DataMatrix& a, const DataMatrix& b) {
    require_same_shape(a, b, "add");
    DataMatrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(i, j) + b(i, j);
    return out;
}

inline std::vector<double> row_sums(const DataMatrix& a) {
    std::vector<double> sums(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* row = a.row_data(i);
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += row[j];
        sums[i] = s;
    }
    return sums;
}

inline DataMatrix outer(const std::vector<double>& u, const std::vector<double>& v) {
    DataMatrix out(u.size(), v.size());
    for (std::size_t i = 0; i < u.size(); ++i)
        for (std::size_t j = 0; j < v.size(); ++j) out(i, j) = u[i] * v[j];
    return out;
}

// Flips a binary matrix: 0 <-> 1.
inline DataMatrix logical_not(const DataMatrix& a) {
    if (!a.is_binary())
        throw InvalidMetadata("logical_not: matrix has values outside {0, 1}");
    DataMatrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = 1.0 - a(i, j);
    return out;
}

inline DataMatrix transpose(const DataMatrix& a) {
    DataMatrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

// Copy of rows [begin, end).
inline DataMatrix slice_rows(const DataMatrix& a, std::size_t begin, std::size_t end) {
    if (begin > end || end > a.rows())
        throw ShapeError("slice_rows: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") out of bounds for " + detail::shape_str(a));
    DataMatrix out(end - begin, a.cols());
    for (std::size_t i = begin; i < end; ++i)
        std::copy(a.row_data(i), a.row_data(i) + a.cols(), out.row_data(i - begin));
    return out;
}

}  // namespace silofactor
