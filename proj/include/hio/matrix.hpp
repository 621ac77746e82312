#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hio/errors.hpp"

namespace hio {

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
        if (rows.empty())
            return {};
        Matrix m(rows.size(), rows.front().size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != m.cols_)
                throw ShapeError("ragged rows in Matrix::from_rows");
            for (std::size_t c = 0; c < m.cols_; ++c)
                m(r, c) = rows[r][c];
        }
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    /// Rows selected by index, in the given order.
    Matrix select_rows(std::span<const std::size_t> indices) const {
        Matrix out(indices.size(), cols_);
        for (std::size_t i = 0; i < indices.size(); ++i) {
            const auto src = row(indices[i]);
            auto dst = out.row(i);
            for (std::size_t c = 0; c < cols_; ++c)
                dst[c] = src[c];
        }
        return out;
    }

    Matrix select_cols(std::span<const std::size_t> indices) const {
        Matrix out(rows_, indices.size());
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < indices.size(); ++c)
                out(r, c) = (*this)(r, indices[c]);
        return out;
    }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Horizontal concatenation; all blocks must share a row count.
inline Matrix hconcat(std::span<const Matrix> blocks) {
    if (blocks.empty())
        return {};
    const std::size_t rows = blocks.front().rows();
    std::size_t cols = 0;
    for (const auto& b : blocks) {
        if (b.rows() != rows)
            throw ShapeError("hconcat: row counts differ");
        cols += b.cols();
    }
    Matrix out(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        std::size_t offset = 0;
        for (const auto& b : blocks) {
            for (std::size_t c = 0; c < b.cols(); ++c)
                out(r, offset + c) = b(r, c);
            offset += b.cols();
        }
    }
    return out;
}

/// Columns [first, first + count) of m.
inline Matrix col_block(const Matrix& m, std::size_t first, std::size_t count) {
    if (first + count > m.cols())
        throw ShapeError("col_block out of range");
    Matrix out(m.rows(), count);
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < count; ++c)
            out(r, c) = m(r, first + c);
    return out;
}

inline std::string shape_string(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

} // namespace hio
