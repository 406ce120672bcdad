#include "mdre/models.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mdre/kernels.hpp"

namespace mdre {

using nlohmann::json;

FeatureMap FeatureMap::identity(int d) {
    if (d <= 0) throw ValidationError("feature map needs positive input dimension");
    FeatureMap fm;
    fm.kind = Kind::Identity;
    fm.input_dim = d;
    return fm;
}

FeatureMap FeatureMap::polynomial(int d, int degree) {
    if (d <= 0) throw ValidationError("feature map needs positive input dimension");
    if (degree < 1) throw ValidationError("polynomial degree must be >= 1");
    FeatureMap fm;
    fm.kind = Kind::Polynomial;
    fm.input_dim = d;
    fm.degree = degree;
    return fm;
}

FeatureMap FeatureMap::rbf(Matrix centers, double bandwidth) {
    if (centers.rows == 0) throw ValidationError("rbf needs at least one center");
    if (!(bandwidth > 0.0)) throw ValidationError("rbf bandwidth must be positive");
    FeatureMap fm;
    fm.kind = Kind::Rbf;
    fm.input_dim = static_cast<int>(centers.cols);
    fm.centers = std::move(centers);
    fm.bandwidth = bandwidth;
    return fm;
}

FeatureMap FeatureMap::rbf_from_pivot(const GroupedDataset& ds, std::size_t max_centers,
                                      RngStream& rng) {
    const Matrix& pivot = ds.groups.back();
    std::vector<std::size_t> idx(pivot.rows);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    rng.shuffle(idx);
    const std::size_t n = std::min(max_centers, pivot.rows);
    Matrix centers(n, pivot.cols);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < pivot.cols; ++j) centers.at(i, j) = pivot.at(idx[i], j);

    Vec dists;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            dists.push_back(std::sqrt(kern::sq_dist(centers.row(i), centers.row(j), centers.cols)));
    double h = dists.empty() ? 1.0 : median(std::move(dists));
    if (!(h > 0.0)) h = 1.0;  // all centers coincide
    return rbf(std::move(centers), h);
}

int FeatureMap::output_dim() const {
    switch (kind) {
        case Kind::Identity: return input_dim;
        case Kind::Polynomial: return input_dim * degree;
        case Kind::Rbf: return static_cast<int>(centers.rows);
    }
    return 0;
}

void FeatureMap::eval(const double* x, double* phi) const {
    switch (kind) {
        case Kind::Identity:
            for (int j = 0; j < input_dim; ++j) phi[j] = x[j];
            break;
        case Kind::Polynomial: {
            // [x_1..x_d, x_1^2..x_d^2, ...]
            for (int j = 0; j < input_dim; ++j) phi[j] = x[j];
            for (int p = 1; p < degree; ++p)
                for (int j = 0; j < input_dim; ++j)
                    phi[p * input_dim + j] = phi[(p - 1) * input_dim + j] * x[j];
            break;
        }
        case Kind::Rbf: {
            const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
            for (std::size_t c = 0; c < centers.rows; ++c)
                phi[c] = std::exp(-kern::sq_dist(x, centers.row(c), centers.cols) * inv);
            break;
        }
    }
}

RatioModel RatioModel::log_linear(FeatureMap fm, int k, double clamp) {
    if (k < 2) throw ValidationError("model needs k >= 2");
    if (!(clamp > 0.0)) throw ValidationError("clamp bound must be positive");
    RatioModel m;
    m.kind_ = Kind::LogLinear;
    m.input_dim_ = fm.input_dim;
    m.k_ = k;
    m.clamp_ = clamp;
    m.fmap_ = std::move(fm);
    m.build_layers({static_cast<std::size_t>(m.fmap_.output_dim())});
    return m;
}

RatioModel RatioModel::mlp(int input_dim, std::vector<int> hidden, int k, double clamp) {
    if (k < 2) throw ValidationError("model needs k >= 2");
    if (input_dim <= 0) throw ValidationError("model needs positive input dimension");
    if (!(clamp > 0.0)) throw ValidationError("clamp bound must be positive");
    for (int h : hidden)
        if (h <= 0) throw ValidationError("hidden layer sizes must be positive");
    RatioModel m;
    m.kind_ = Kind::Mlp;
    m.input_dim_ = input_dim;
    m.k_ = k;
    m.clamp_ = clamp;
    m.hidden_ = std::move(hidden);
    std::vector<std::size_t> ins;
    ins.push_back(static_cast<std::size_t>(input_dim));
    for (int h : m.hidden_) ins.push_back(static_cast<std::size_t>(h));
    m.build_layers(ins);
    return m;
}

void RatioModel::build_layers(const std::vector<std::size_t>& in_sizes) {
    // layer l maps in_sizes[l] -> in_sizes[l+1], last maps to k-1
    std::size_t off = 0;
    layers_.clear();
    for (std::size_t l = 0; l < in_sizes.size(); ++l) {
        Layer layer;
        layer.cols = in_sizes[l];
        layer.rows = (l + 1 < in_sizes.size()) ? in_sizes[l + 1]
                                               : static_cast<std::size_t>(k_ - 1);
        layer.w_off = off;
        off += layer.rows * layer.cols;
        layer.b_off = off;
        off += layer.rows;
        layers_.push_back(layer);
    }
    params_.assign(off, 0.0);
}

void RatioModel::init(std::uint64_t seed) {
    std::fill(params_.begin(), params_.end(), 0.0);
    if (kind_ == Kind::LogLinear) return;  // zeros: r == 1 everywhere
    RngStream rng(seed, "init");
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
        const Layer& layer = layers_[l];
        const double a = 1.0 / std::sqrt(static_cast<double>(layer.cols));
        for (std::size_t i = 0; i < layer.rows * layer.cols; ++i)
            params_[layer.w_off + i] = a * (2.0 * rng.uniform() - 1.0);
        // biases stay zero
    }
    // final layer stays zero so the initial model is the unit ratio
}

void RatioModel::forward(const double* x, Trace& t) const {
    const int m = out_dim();
    t.g.resize(m);
    t.r.resize(m);
    if (kind_ == Kind::LogLinear) {
        t.phi.resize(fmap_.output_dim());
        fmap_.eval(x, t.phi.data());
        const Layer& l = layers_[0];
        kern::matvec(w(l), l.rows, l.cols, t.phi.data(), t.g.data());
        for (int i = 0; i < m; ++i) t.g[i] += b(l)[i];
    } else {
        const std::size_t nl = layers_.size();
        t.acts.resize(nl);  // acts[l] = input to layer l
        t.zs.resize(nl - 1);
        t.acts[0].assign(x, x + input_dim_);
        for (std::size_t l = 0; l + 1 < nl; ++l) {
            const Layer& layer = layers_[l];
            t.zs[l].resize(layer.rows);
            kern::matvec(w(layer), layer.rows, layer.cols, t.acts[l].data(), t.zs[l].data());
            for (std::size_t i = 0; i < layer.rows; ++i) t.zs[l][i] += b(layer)[i];
            t.acts[l + 1].resize(layer.rows);
            for (std::size_t i = 0; i < layer.rows; ++i)
                t.acts[l + 1][i] = t.zs[l][i] > 0.0 ? t.zs[l][i] : 0.0;
        }
        const Layer& out = layers_.back();
        kern::matvec(w(out), out.rows, out.cols, t.acts[nl - 1].data(), t.g.data());
        for (int i = 0; i < m; ++i) t.g[i] += b(out)[i];
    }
    for (int i = 0; i < m; ++i) {
        double g = t.g[i];
        if (g > clamp_) g = clamp_;
        if (g < -clamp_) g = -clamp_;
        t.r[i] = std::exp(g);
    }
}

void RatioModel::backward_acc(const Trace& t, const double* wgt, double* grad) const {
    const int m = out_dim();
    // d r_i / d g_i = r_i on the active region, 0 where the clamp is hit
    Vec dg(m);
    for (int i = 0; i < m; ++i) {
        const bool active = t.g[i] > -clamp_ && t.g[i] < clamp_;
        dg[i] = active ? wgt[i] * t.r[i] : 0.0;
    }
    if (kind_ == Kind::LogLinear) {
        const Layer& l = layers_[0];
        kern::ger(1.0, dg.data(), l.rows, t.phi.data(), l.cols, grad + l.w_off);
        kern::axpy(1.0, dg.data(), grad + l.b_off, l.rows);
        return;
    }
    const std::size_t nl = layers_.size();
    Vec delta = dg;
    for (std::size_t li = nl; li-- > 0;) {
        const Layer& layer = layers_[li];
        kern::ger(1.0, delta.data(), layer.rows, t.acts[li].data(), layer.cols, grad + layer.w_off);
        kern::axpy(1.0, delta.data(), grad + layer.b_off, layer.rows);
        if (li == 0) break;
        Vec prev(layer.cols, 0.0);
        kern::matvec_t_acc(w(layer), layer.rows, layer.cols, delta.data(), prev.data());
        for (std::size_t i = 0; i < layer.cols; ++i)
            if (t.zs[li - 1][i] <= 0.0) prev[i] = 0.0;
        delta = std::move(prev);
    }
}

void RatioModel::eval(const double* x, double* r) const {
    thread_local Trace t;
    forward(x, t);
    for (int i = 0; i < out_dim(); ++i) r[i] = t.r[i];
}

Vec RatioModel::eval_vec(const Vec& x) const {
    if (static_cast<int>(x.size()) != input_dim_)
        throw ValidationError("model input has wrong dimension");
    Vec r(out_dim());
    eval(x.data(), r.data());
    return r;
}

Matrix RatioModel::jacobian(const double* x) const {
    Trace t;
    forward(x, t);
    Matrix j(out_dim(), param_count());
    Vec e(out_dim(), 0.0);
    for (int i = 0; i < out_dim(); ++i) {
        e[i] = 1.0;
        backward_acc(t, e.data(), j.row(i));
        e[i] = 0.0;
    }
    return j;
}

std::string RatioModel::to_json_string() const {
    json doc;
    doc["format"] = "multidre-model-v1";
    doc["kind"] = kind_ == Kind::LogLinear ? "loglinear" : "mlp";
    doc["k"] = k_;
    doc["input_dim"] = input_dim_;
    doc["clamp"] = clamp_;
    if (kind_ == Kind::LogLinear) {
        json f;
        switch (fmap_.kind) {
            case FeatureMap::Kind::Identity: f["kind"] = "identity"; break;
            case FeatureMap::Kind::Polynomial:
                f["kind"] = "polynomial";
                f["degree"] = fmap_.degree;
                break;
            case FeatureMap::Kind::Rbf: {
                f["kind"] = "rbf";
                f["bandwidth"] = fmap_.bandwidth;
                json rows = json::array();
                for (std::size_t i = 0; i < fmap_.centers.rows; ++i) {
                    json row = json::array();
                    for (std::size_t jj = 0; jj < fmap_.centers.cols; ++jj)
                        row.push_back(fmap_.centers.at(i, jj));
                    rows.push_back(row);
                }
                f["centers"] = rows;
                break;
            }
        }
        doc["features"] = f;
    } else {
        doc["hidden"] = hidden_;
    }
    doc["params"] = params_;
    return doc.dump(2);
}

RatioModel RatioModel::from_json_string(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad model json: ") + e.what());
    }
    if (doc.value("format", "") != "multidre-model-v1")
        throw ValidationError("unrecognized model format");
    const int k = doc.at("k").get<int>();
    const int d = doc.at("input_dim").get<int>();
    const double clamp = doc.at("clamp").get<double>();
    RatioModel m;
    if (doc.at("kind") == "loglinear") {
        const json& f = doc.at("features");
        FeatureMap fm;
        if (f.at("kind") == "identity") {
            fm = FeatureMap::identity(d);
        } else if (f.at("kind") == "polynomial") {
            fm = FeatureMap::polynomial(d, f.at("degree").get<int>());
        } else if (f.at("kind") == "rbf") {
            const json& rows = f.at("centers");
            Matrix centers(rows.size(), d);
            for (std::size_t i = 0; i < rows.size(); ++i)
                for (int jj = 0; jj < d; ++jj) centers.at(i, jj) = rows[i][jj].get<double>();
            fm = FeatureMap::rbf(std::move(centers), f.at("bandwidth").get<double>());
        } else {
            throw ValidationError("unknown feature map kind in model file");
        }
        m = log_linear(std::move(fm), k, clamp);
    } else if (doc.at("kind") == "mlp") {
        m = mlp(d, doc.at("hidden").get<std::vector<int>>(), k, clamp);
    } else {
        throw ValidationError("unknown model kind in model file");
    }
    Vec params = doc.at("params").get<Vec>();
    if (params.size() != m.param_count())
        throw ValidationError("model file has wrong parameter count");
    for (double p : params)
        if (!std::isfinite(p)) throw ValidationError("model file has non-finite parameter");
    std::copy(params.begin(), params.end(), m.params_.begin());
    return m;
}

void RatioModel::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write file: " + path);
    out << to_json_string() << '\n';
}

RatioModel RatioModel::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_string(ss.str());
}

}  // namespace mdre
