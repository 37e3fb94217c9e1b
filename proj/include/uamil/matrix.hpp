#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "uamil/errors.hpp"

namespace uamil {

/// Dense row-major matrix of doubles. Throughout the library rows are
/// channels and columns are timesteps.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
        if (rows.empty()) return {};
        Matrix m(rows.size(), rows.front().size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != m.cols_)
                throw ShapeError("from_rows: ragged row lengths");
            for (std::size_t c = 0; c < m.cols_; ++c) m.at(r, c) = rows[r][c];
        }
        return m;
    }

    double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double* row(std::size_t r) { return data_.data() + r * cols_; }
    const double* row(std::size_t r) const { return data_.data() + r * cols_; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    /// Columns [begin, begin + len) as a new matrix.
    Matrix slice_cols(std::size_t begin, std::size_t len) const {
        if (begin + len > cols_) throw ShapeError("slice_cols out of range");
        Matrix out(rows_, len);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < len; ++c) out.at(r, c) = at(r, begin + c);
        return out;
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

} // namespace uamil
