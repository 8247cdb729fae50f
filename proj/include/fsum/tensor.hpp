#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace fsum {

// Dense row-major matrix of doubles. All model math runs at double
// precision; checkpoints narrow to single precision on disk.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), 0.0) {}

    double& at(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
    double at(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }
    double* row(int i) { return data.data() + static_cast<std::size_t>(i) * cols; }
    const double* row(int i) const { return data.data() + static_cast<std::size_t>(i) * cols; }
    std::size_t size() const { return data.size(); }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    bool same_shape(const Matrix& other) const { return rows == other.rows && cols == other.cols; }
};

inline void check_shape(const Matrix& m, int rows, int cols, const char* what) {
    if (m.rows != rows || m.cols != cols) {
        throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(rows) + "x" +
                                    std::to_string(cols) + ", got " + std::to_string(m.rows) + "x" +
                                    std::to_string(m.cols));
    }
}

// c = a * b
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) {
        throw std::invalid_argument("matmul: inner dimensions differ");
    }
    Matrix c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        double* crow = c.row(i);
        for (int k = 0; k < a.cols; ++k) {
            const double aik = a.at(i, k);
            if (aik == 0.0) continue;
            const double* brow = b.row(k);
            for (int j = 0; j < b.cols; ++j) {
                crow[j] += aik * brow[j];
            }
        }
    }
    return c;
}

// c += a^T * b
inline void matmul_t1_acc(const Matrix& a, const Matrix& b, Matrix& c) {
    if (a.rows != b.rows || c.rows != a.cols || c.cols != b.cols) {
        throw std::invalid_argument("matmul_t1_acc: shape mismatch");
    }
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        const double* brow = b.row(i);
        for (int k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            double* crow = c.row(k);
            for (int j = 0; j < b.cols; ++j) {
                crow[j] += aik * brow[j];
            }
        }
    }
}

// c += a * b^T
inline void matmul_t2_acc(const Matrix& a, const Matrix& b, Matrix& c) {
    if (a.cols != b.cols || c.rows != a.rows || c.cols != b.rows) {
        throw std::invalid_argument("matmul_t2_acc: shape mismatch");
    }
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (int j = 0; j < b.rows; ++j) {
            const double* brow = b.row(j);
            double dot = 0.0;
            for (int k = 0; k < a.cols; ++k) {
                dot += arow[k] * brow[k];
            }
            crow[j] += dot;
        }
    }
}

inline Matrix matmul_t2(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows, b.rows);
    matmul_t2_acc(a, b, c);
    return c;
}

inline void add_inplace(Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("add_inplace: shape mismatch");
    }
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        a.data[i] += b.data[i];
    }
}

}  // namespace fsum
