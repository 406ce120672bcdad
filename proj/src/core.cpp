#include "mdre/core.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace mdre {

Prior::Prior(Vec weights) : w(std::move(weights)) {
    if (w.size() < 2) throw ValidationError("prior needs k >= 2 weights");
    double s = 0.0;
    for (double x : w) {
        if (!(x > 0.0) || !std::isfinite(x))
            throw ValidationError("prior weights must be strictly positive and finite");
        s += x;
    }
    if (std::fabs(s - 1.0) > kSimplexTol)
        throw ValidationError("prior weights must sum to 1 within 1e-12");
}

Prior Prior::uniform(int k) {
    if (k < 2) throw ValidationError("prior needs k >= 2");
    Vec w(static_cast<std::size_t>(k), 1.0 / k);
    // renormalize exactly so the sum check cannot trip on k not a power of 2
    double s = 0.0;
    for (double x : w) s += x;
    for (double& x : w) x /= s;
    return Prior(std::move(w));
}

Prior Prior::from_counts(const std::vector<std::size_t>& counts) {
    if (counts.size() < 2) throw ValidationError("need at least two groups");
    std::size_t total = 0;
    for (std::size_t c : counts) {
        if (c == 0) throw ValidationError("invalid dataset: empty group");
        total += c;
    }
    Vec w(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i)
        w[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
    double s = 0.0;
    for (double x : w) s += x;
    for (double& x : w) x /= s;
    return Prior(std::move(w));
}

GroupedDataset::GroupedDataset(std::vector<Matrix> g, int d) : groups(std::move(g)), dim(d) {
    validate();
}

std::size_t GroupedDataset::total() const {
    std::size_t t = 0;
    for (const auto& g : groups) t += g.rows;
    return t;
}

void GroupedDataset::set_pivot(int g) {
    if (g < 0 || g >= k()) throw ValidationError("pivot group index out of range");
    if (g == k() - 1) return;
    Matrix m = std::move(groups[g]);
    groups.erase(groups.begin() + g);
    groups.push_back(std::move(m));
}

void GroupedDataset::validate() const {
    if (k() < 2) throw ValidationError("dataset needs k >= 2 groups");
    if (dim <= 0) throw ValidationError("dataset dimension must be positive");
    for (int g = 0; g < k(); ++g) {
        const Matrix& m = groups[g];
        if (m.rows == 0)
            throw ValidationError("invalid dataset: group " + std::to_string(g + 1) + " is empty");
        if (m.cols != static_cast<std::size_t>(dim))
            throw ValidationError("invalid dataset: group " + std::to_string(g + 1) +
                                  " has wrong dimension");
        for (double v : m.data)
            if (!std::isfinite(v)) throw ValidationError("invalid dataset: non-finite coordinate");
    }
}

Prior estimate_prior(const GroupedDataset& ds) {
    std::vector<std::size_t> counts(ds.groups.size());
    for (std::size_t i = 0; i < ds.groups.size(); ++i) counts[i] = ds.groups[i].rows;
    return Prior::from_counts(counts);
}

Vec link_forward(const Vec& eta, const Prior& prior, ZeroPolicy zp) {
    const int k = prior.k();
    if (static_cast<int>(eta.size()) != k)
        throw ValidationError("link_forward: eta has wrong length");
    const double eta_k = eta.back();
    if (!(eta_k > 0.0)) throw ValidationError("link_forward: eta_k must be positive");
    Vec r(static_cast<std::size_t>(k - 1));
    for (int i = 0; i < k - 1; ++i) {
        if (eta[i] == 0.0 && zp == ZeroPolicy::Error)
            throw ValidationError("link_forward: zero class probability (pass AllowZeroRatio to map to ratio 0)");
        if (eta[i] < 0.0) throw ValidationError("link_forward: negative class probability");
        r[i] = (prior.w[k - 1] / prior.w[i]) * (eta[i] / eta_k);
    }
    return r;
}

Vec link_inverse(const Vec& ratio, const Prior& prior) {
    const int k = prior.k();
    if (static_cast<int>(ratio.size()) != k - 1)
        throw ValidationError("link_inverse: ratio vector has wrong length");
    Vec eta(static_cast<std::size_t>(k));
    double denom = prior.w[k - 1];  // pi_k * r_k with r_k = 1
    for (int i = 0; i < k - 1; ++i) {
        if (!(ratio[i] >= 0.0) || !std::isfinite(ratio[i]))
            throw ValidationError("link_inverse: ratios must be finite and nonnegative");
        denom += prior.w[i] * ratio[i];
    }
    for (int i = 0; i < k - 1; ++i) eta[i] = prior.w[i] * ratio[i] / denom;
    eta[k - 1] = prior.w[k - 1] / denom;
    return eta;
}

bool is_probability_vector(const Vec& v, double tol) {
    double s = 0.0;
    for (double x : v) {
        if (x < 0.0 || !std::isfinite(x)) return false;
        s += x;
    }
    return std::fabs(s - 1.0) <= tol;
}

bool is_ratio_vector(const Vec& v) {
    for (double x : v)
        if (!(x > 0.0) || !std::isfinite(x)) return false;
    return true;
}

namespace {

std::vector<Vec> parse_csv_rows(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open file: " + path);
    std::vector<Vec> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        // skip blank lines
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        Vec row;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) {
            errno = 0;
            char* end = nullptr;
            double v = std::strtod(field.c_str(), &end);
            while (end && (*end == ' ' || *end == '\t')) ++end;
            if (end == field.c_str() || (end && *end != '\0') || errno == ERANGE)
                throw ValidationError(path + ":" + std::to_string(lineno) + ": bad number '" +
                                      field + "'");
            row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ValidationError(path + ": no data rows");
    for (const Vec& r : rows)
        if (r.size() != rows.front().size())
            throw ValidationError(path + ": ragged rows (expected " +
                                  std::to_string(rows.front().size()) + " fields)");
    return rows;
}

Matrix rows_to_matrix(const std::vector<Vec>& rows) {
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m.at(i, j) = rows[i][j];
    return m;
}

}  // namespace

GroupedDataset load_groups_csv(const std::vector<std::string>& paths) {
    if (paths.size() < 2) throw ValidationError("need at least two group files");
    std::vector<Matrix> groups;
    for (const std::string& p : paths) groups.push_back(rows_to_matrix(parse_csv_rows(p)));
    const int dim = static_cast<int>(groups.front().cols);
    for (const Matrix& g : groups)
        if (g.cols != static_cast<std::size_t>(dim))
            throw ValidationError("group files disagree on dimension");
    return GroupedDataset(std::move(groups), dim);
}

GroupedDataset load_labeled_csv(const std::string& path) {
    std::vector<Vec> rows = parse_csv_rows(path);
    if (rows.front().size() < 2)
        throw ValidationError(path + ": labeled format needs a group column plus coordinates");
    int kmax = 0;
    for (const Vec& r : rows) {
        double g = r.front();
        if (g != std::floor(g) || g < 1)
            throw ValidationError(path + ": group index must be a 1-based integer");
        kmax = std::max(kmax, static_cast<int>(g));
    }
    if (kmax < 2) throw ValidationError(path + ": need at least two groups");
    const std::size_t dim = rows.front().size() - 1;
    std::vector<std::vector<Vec>> buckets(static_cast<std::size_t>(kmax));
    for (const Vec& r : rows)
        buckets[static_cast<std::size_t>(r.front()) - 1].emplace_back(r.begin() + 1, r.end());
    std::vector<Matrix> groups;
    for (int g = 0; g < kmax; ++g) {
        if (buckets[g].empty())
            throw ValidationError(path + ": group " + std::to_string(g + 1) + " has no samples");
        groups.push_back(rows_to_matrix(buckets[g]));
    }
    return GroupedDataset(std::move(groups), static_cast<int>(dim));
}

Matrix load_matrix_csv(const std::string& path) { return rows_to_matrix(parse_csv_rows(path)); }

Vec load_vector_csv(const std::string& path) {
    Matrix m = load_matrix_csv(path);
    if (m.cols == 1) return m.data;
    if (m.rows == 1) return m.data;
    throw ValidationError(path + ": expected a single row or column");
}

void save_matrix_csv(const Matrix& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write file: " + path);
    out.precision(17);
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = 0; j < m.cols; ++j) {
            if (j) out << ',';
            out << m.at(i, j);
        }
        out << '\n';
    }
}

}  // namespace mdre
