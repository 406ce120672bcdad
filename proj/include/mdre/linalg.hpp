#pragma once

#include <cstddef>
#include <vector>

namespace mdre {

using Vec = std::vector<double>;

// Dense row-major matrix, sized for the small problems in this library
// (feature maps, layer weights, discrete experiments).
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vec data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }
    bool empty() const { return data.empty(); }
};

// Cholesky factorization of a symmetric matrix; returns false if the matrix
// is not positive definite (some pivot <= 0). L is lower triangular.
bool cholesky(const Matrix& a, Matrix& l);

bool is_symmetric(const Matrix& a, double tol = 1e-12);

double median(Vec values);  // takes a copy; empty input is a caller bug

}  // namespace mdre
