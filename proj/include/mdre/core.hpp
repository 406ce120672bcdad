#pragma once

#include <string>
#include <vector>

#include "mdre/errors.hpp"
#include "mdre/linalg.hpp"

// Domain conventions used throughout the library:
//   - k distributions over a common d-dimensional domain; group indices are
//     0-based in code, 1-based at the CLI and in labeled CSV files.
//   - the last group (index k-1) is the pivot, i.e. the common denominator
//     of the canonical ratio vector r = (p_0/p_{k-1}, ..., p_{k-2}/p_{k-1}).
//   - a "ratio vector" is a length k-1 vector of strictly positive doubles;
//     the pivot's own ratio is the implicit trailing 1.
//   - a "probability vector" is a length k vector summing to 1.

namespace mdre {

inline constexpr double kSimplexTol = 1e-12;

// Class prior: a strictly positive point in the k-simplex.
struct Prior {
    Vec w;

    explicit Prior(Vec weights);
    static Prior uniform(int k);
    static Prior from_counts(const std::vector<std::size_t>& counts);

    int k() const { return static_cast<int>(w.size()); }
};

// k groups of i.i.d. samples over a common domain; the empirical stand-in
// for (P_1, ..., P_k). Each group is an n_i x dim row-major matrix.
struct GroupedDataset {
    std::vector<Matrix> groups;
    int dim = 0;

    GroupedDataset() = default;
    GroupedDataset(std::vector<Matrix> g, int d);

    int k() const { return static_cast<int>(groups.size()); }
    std::size_t size(int g) const { return groups[g].rows; }
    std::size_t total() const;
    const double* point(int g, std::size_t i) const { return groups[g].row(i); }

    // Moves group `g` (0-based) to the pivot slot, preserving the relative
    // order of the remaining groups.
    void set_pivot(int g);

    void validate() const;
};

Prior estimate_prior(const GroupedDataset& ds);

enum class ZeroPolicy { Error, AllowZeroRatio };

// r_i = (pi_k / pi_i) * (eta_i / eta_k) for i < k. eta_k must be positive;
// an exactly zero eta_i is an error unless the caller opts into zero ratios.
Vec link_forward(const Vec& eta, const Prior& prior, ZeroPolicy zp = ZeroPolicy::Error);

// eta_i = pi_i r_i / sum_j pi_j r_j with the implicit r_k = 1. The output
// sums to 1 by construction for any positive input.
Vec link_inverse(const Vec& ratio, const Prior& prior);

bool is_probability_vector(const Vec& v, double tol = kSimplexTol);
bool is_ratio_vector(const Vec& v);

// CSV loaders. Per-group files: no header, one sample per row, d fields.
// Labeled file: leading integer column is the 1-based group index.
// Ragged rows are rejected.
GroupedDataset load_groups_csv(const std::vector<std::string>& paths);
GroupedDataset load_labeled_csv(const std::string& path);
Matrix load_matrix_csv(const std::string& path);
Vec load_vector_csv(const std::string& path);
void save_matrix_csv(const Matrix& m, const std::string& path);

}  // namespace mdre
