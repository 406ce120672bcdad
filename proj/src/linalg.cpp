#include "mdre/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace mdre {

bool cholesky(const Matrix& a, Matrix& l) {
    const std::size_t n = a.rows;
    if (a.cols != n) return false;
    l = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a.at(i, j);
            for (std::size_t p = 0; p < j; ++p) s -= l.at(i, p) * l.at(j, p);
            if (i == j) {
                if (s <= 0.0 || !std::isfinite(s)) return false;
                l.at(i, i) = std::sqrt(s);
            } else {
                l.at(i, j) = s / l.at(j, j);
            }
        }
    }
    return true;
}

bool is_symmetric(const Matrix& a, double tol) {
    if (a.rows != a.cols) return false;
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = i + 1; j < a.cols; ++j)
            if (std::fabs(a.at(i, j) - a.at(j, i)) > tol) return false;
    return true;
}

double median(Vec values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace mdre
