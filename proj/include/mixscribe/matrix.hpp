#pragma once

#include <cstddef>
#include <vector>

#include "mixscribe/errors.hpp"

namespace mixscribe {

// Dense column-major matrix of doubles. Column-major because everything in
// this library walks columns: spectrogram frames, activation columns, and
// the dot products of the multiplicative updates.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill)
    {
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[c * rows_ + r]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[c * rows_ + r]; }

    double* col(std::size_t c) { return data_.data() + c * rows_; }
    const double* col(std::size_t c) const { return data_.data() + c * rows_; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const Matrix& other) const
    {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    double sum() const
    {
        double s = 0.0;
        for (double v : data_) s += v;
        return s;
    }

    double max_value() const
    {
        double m = 0.0;
        for (double v : data_) m = v > m ? v : m;
        return m;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* what)
{
    if (!a.same_shape(b))
        throw InvalidInput(std::string(what) + ": shape mismatch (" + std::to_string(a.rows()) + "x"
                           + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x"
                           + std::to_string(b.cols()) + ")");
}

} // namespace mixscribe
