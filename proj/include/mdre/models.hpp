#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mdre/core.hpp"
#include "mdre/rng.hpp"

namespace mdre {

// Basis-function front end for the log-linear model.
struct FeatureMap {
    enum class Kind { Identity, Polynomial, Rbf };

    Kind kind = Kind::Identity;
    int input_dim = 0;
    int degree = 1;        // Polynomial: per-coordinate powers 1..degree (no cross terms)
    Matrix centers;        // Rbf: one center per row
    double bandwidth = 1;  // Rbf: phi_j = exp(-|x - c_j|^2 / (2 h^2))

    static FeatureMap identity(int d);
    static FeatureMap polynomial(int d, int degree);
    static FeatureMap rbf(Matrix centers, double bandwidth);
    // Subsamples up to max_centers points from the pivot group and sets the
    // bandwidth by the median heuristic over the chosen centers.
    static FeatureMap rbf_from_pivot(const GroupedDataset& ds, std::size_t max_centers,
                                     RngStream& rng);

    int output_dim() const;
    void eval(const double* x, double* phi) const;
};

// Parametric ratio model r_theta: X -> R_+^{k-1}. Outputs are
// exp(clamp(g_i(x), -L, L)) where g is a linear map over features
// (LogLinear) or a rectifier MLP (Mlp), so they are strictly positive and
// bounded in [e^-L, e^L]. Parameters live in one flat vector; layer weight
// matrices are row-major views into it, each followed by its bias.
class RatioModel {
public:
    enum class Kind { LogLinear, Mlp };

    static RatioModel log_linear(FeatureMap fm, int k, double clamp = 30.0);
    static RatioModel mlp(int input_dim, std::vector<int> hidden, int k, double clamp = 30.0);

    // LogLinear starts at zero weights (r == 1 everywhere). Mlp hidden
    // layers get fan-in-scaled uniform weights from the "init" stream of
    // `seed`; the final layer starts at zero so r == 1 there too.
    void init(std::uint64_t seed);

    Kind kind() const { return kind_; }
    int input_dim() const { return input_dim_; }
    int k() const { return k_; }
    int out_dim() const { return k_ - 1; }
    double clamp_bound() const { return clamp_; }
    const FeatureMap& features() const { return fmap_; }
    const std::vector<int>& hidden() const { return hidden_; }

    std::size_t param_count() const { return params_.size(); }
    std::span<double> params() { return params_; }
    std::span<const double> params() const { return params_; }

    // Scratch for a paired forward/backward pass. Reusable across calls;
    // each thread needs its own.
    struct Trace {
        Vec phi;                // loglinear features
        std::vector<Vec> acts;  // mlp activations, acts[0] = input copy
        std::vector<Vec> zs;    // mlp pre-activations per layer
        Vec g;                  // final pre-activation
        Vec r;                  // outputs
    };

    void forward(const double* x, Trace& t) const;
    // grad += J_theta(r)^T w using the stored trace. Rows of the Jacobian
    // corresponding to clamped outputs are zero.
    void backward_acc(const Trace& t, const double* w, double* grad) const;

    void eval(const double* x, double* r) const;
    Vec eval_vec(const Vec& x) const;
    Matrix jacobian(const double* x) const;  // (k-1) x param_count

    std::string to_json_string() const;
    static RatioModel from_json_string(const std::string& text);
    void save(const std::string& path) const;
    static RatioModel load(const std::string& path);

private:
    RatioModel() = default;

    struct Layer {
        std::size_t rows = 0, cols = 0;  // W is rows x cols
        std::size_t w_off = 0, b_off = 0;
    };

    const double* w(const Layer& l) const { return params_.data() + l.w_off; }
    const double* b(const Layer& l) const { return params_.data() + l.b_off; }
    void build_layers(const std::vector<std::size_t>& in_sizes);

    Kind kind_ = Kind::LogLinear;
    int input_dim_ = 0;
    int k_ = 2;
    double clamp_ = 30.0;
    FeatureMap fmap_;
    std::vector<int> hidden_;
    std::vector<Layer> layers_;
    Vec params_;
};

}  // namespace mdre
