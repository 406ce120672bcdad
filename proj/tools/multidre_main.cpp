// Command-line front end: wires datasets, losses, models, training,
// verifiers and benchmarks into reproducible runs. Every successful run
// writes <out>/run.json with the fully resolved configuration; `rerun`
// replays such a file and reproduces the other outputs byte for byte in
// single-threaded mode (run.json itself carries the wall time and differs).

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mdre/applications.hpp"
#include "mdre/bench.hpp"
#include "mdre/config.hpp"
#include "mdre/kernels.hpp"
#include "mdre/theory.hpp"
#include "mdre/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mdre;

namespace {

constexpr const char* kVersion = "0.1.0";

struct LossFlags {
    std::string objective;
    double alpha = 1.5;
    std::string h_csv, q_csv;
    std::string rule;
    double ps_alpha = 1.8;

    void attach(CLI::App* cmd) {
        cmd->add_option("--objective", objective,
                        "convex objective: multi-lr|lsif|kliep|power|quadratic|logsumexp");
        cmd->add_option("--alpha", alpha, "power / logsumexp alpha");
        cmd->add_option("--H", h_csv, "quadratic objective H matrix (csv)");
        cmd->add_option("--q", q_csv, "quadratic objective q vector (csv)");
        cmd->add_option("--rule", rule, "scoring rule: log|brier|pseudospherical");
        cmd->add_option("--ps-alpha,--ps_alpha", ps_alpha, "pseudo-spherical alpha");
    }

    ConvexObjective make_objective(int k) const {
        if (objective == "multi-lr") return ConvexObjective::multi_lr(k);
        if (objective == "lsif") return ConvexObjective::lsif(k);
        if (objective == "kliep") return ConvexObjective::kliep(k);
        if (objective == "power") return ConvexObjective::power(k, alpha);
        if (objective == "logsumexp") return ConvexObjective::log_sum_exp(k, alpha);
        if (objective == "quadratic") {
            if (h_csv.empty() || q_csv.empty())
                throw ValidationError("quadratic objective needs --H and --q csv files");
            return ConvexObjective::quadratic(k, load_matrix_csv(h_csv), load_vector_csv(q_csv));
        }
        throw ValidationError("unknown objective: " + objective);
    }

    ScoringRule make_rule() const {
        if (rule == "log") return ScoringRule::log_score();
        if (rule == "brier") return ScoringRule::brier();
        if (rule == "pseudospherical") return ScoringRule::pseudo_spherical(ps_alpha);
        throw ValidationError("unknown rule: " + rule);
    }

    LossSpec make_loss(int k) const {
        const bool has_obj = !objective.empty();
        const bool has_rule = !rule.empty();
        if (has_obj == has_rule)
            throw ValidationError("exactly one of --objective and --rule is required");
        if (has_obj) return make_objective(k);
        return CpeLoss{make_rule(), {}};
    }

    json to_json() const {
        json j;
        j["objective"] = objective;
        j["alpha"] = alpha;
        j["H"] = h_csv;
        j["q"] = q_csv;
        j["rule"] = rule;
        j["ps_alpha"] = ps_alpha;
        return j;
    }
};

struct ModelFlags {
    std::string model = "loglinear";
    std::string features = "identity";
    int degree = 2;
    std::size_t rbf_centers = 100;
    std::vector<int> hidden = {32, 32};
    double clamp = 30.0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--model", model, "ratio model: loglinear|mlp")
            ->check(CLI::IsMember({"loglinear", "mlp"}));
        cmd->add_option("--features", features, "loglinear features: identity|poly|rbf")
            ->check(CLI::IsMember({"identity", "poly", "rbf"}));
        cmd->add_option("--degree", degree, "polynomial feature degree");
        cmd->add_option("--rbf-centers", rbf_centers, "max rbf centers from the pivot group");
        cmd->add_option("--hidden", hidden, "mlp hidden layer sizes")->delimiter(',');
        cmd->add_option("--clamp", clamp, "log-ratio clamp bound");
    }

    ModelSpec spec() const {
        ModelSpec ms;
        ms.kind = model == "mlp" ? RatioModel::Kind::Mlp : RatioModel::Kind::LogLinear;
        ms.features = features == "rbf"    ? FeatureMap::Kind::Rbf
                      : features == "poly" ? FeatureMap::Kind::Polynomial
                                           : FeatureMap::Kind::Identity;
        ms.poly_degree = degree;
        ms.rbf_centers = rbf_centers;
        ms.hidden = hidden;
        ms.clamp = clamp;
        return ms;
    }

    json to_json() const {
        json j;
        j["model"] = model;
        j["features"] = features;
        j["degree"] = degree;
        j["rbf_centers"] = rbf_centers;
        j["hidden"] = hidden;
        j["clamp"] = clamp;
        return j;
    }
};

struct OptFlags {
    std::string method = "adam";
    double lr = 1e-3;
    std::size_t batch = 128;
    int epochs = 200;

    void attach(CLI::App* cmd) {
        cmd->add_option("--opt", method, "optimizer: adam|sgd")
            ->check(CLI::IsMember({"adam", "sgd"}));
        cmd->add_option("--lr", lr, "step size");
        cmd->add_option("--batch", batch, "minibatch size per group");
        cmd->add_option("--epochs", epochs, "training epochs");
    }

    OptimizerConfig config(std::uint64_t seed) const {
        OptimizerConfig cfg;
        cfg.method = method == "sgd" ? OptimizerConfig::Method::Sgd
                                     : OptimizerConfig::Method::Adam;
        cfg.step_size = lr;
        cfg.batch = batch;
        cfg.epochs = epochs;
        cfg.seed = seed;
        return cfg;
    }

    json to_json() const {
        json j;
        j["opt"] = method;
        j["lr"] = lr;
        j["batch"] = batch;
        j["epochs"] = epochs;
        return j;
    }
};

struct DataFlags {
    std::vector<std::string> data;
    std::string labeled;
    int pivot = 0;  // 1-based; 0 = keep order

    void attach(CLI::App* cmd) {
        cmd->add_option("--data", data, "per-group csv files (one per distribution)")
            ->delimiter(',');
        cmd->add_option("--data-labeled", labeled, "single csv with a leading 1-based group column");
        cmd->add_option("--pivot", pivot,
                        "1-based group to use as the pivot (moved to the last slot)");
    }

    GroupedDataset load() const {
        if (data.empty() == labeled.empty())
            throw ValidationError("exactly one of --data and --data-labeled is required");
        GroupedDataset ds = labeled.empty() ? load_groups_csv(data) : load_labeled_csv(labeled);
        if (pivot > 0) ds.set_pivot(pivot - 1);
        return ds;
    }

    json to_json() const {
        json j;
        j["data"] = data;
        j["data_labeled"] = labeled;
        j["pivot"] = pivot;
        return j;
    }
};

void ensure_out_dir(const std::string& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw ValidationError("cannot create output directory: " + out);
}

void write_text(const std::string& path, const std::string& body) {
    std::ofstream f(path);
    if (!f) throw ValidationError("cannot write file: " + path);
    f << body;
}

void write_json_file(const std::string& path, const json& doc) {
    write_text(path, doc.dump(2) + "\n");
}

// resolved-config snapshot every subcommand stores in run.json; rebuilding
// the argv from it is what `rerun` replays
json run_record(const std::string& subcommand, const json& resolved, double wall_seconds) {
    json j;
    j["subcommand"] = subcommand;
    j["config"] = resolved;
    j["versions"] = {{"multidre", kVersion}, {"compiler", __VERSION__}};
    j["kernel_backend"] = kern::backend_name();
    j["wall_seconds"] = wall_seconds;
    return j;
}

std::vector<std::string> argv_from_record(const json& record) {
    std::vector<std::string> argv;
    argv.push_back(record.at("subcommand").get<std::string>());
    const json& cfg = record.at("config");
    for (auto it = cfg.begin(); it != cfg.end(); ++it) {
        const json& v = it.value();
        std::string flag = "--" + it.key();
        for (auto& c : flag)
            if (c == '_') c = '-';
        if (v.is_boolean()) {
            if (v.get<bool>()) argv.push_back(flag);
            continue;
        }
        if (v.is_array()) {
            if (v.empty()) continue;
            std::string joined;
            for (const auto& item : v) {
                if (!joined.empty()) joined += ',';
                joined += item.is_string() ? item.get<std::string>() : item.dump();
            }
            argv.push_back(flag);
            argv.push_back(joined);
            continue;
        }
        if (v.is_string()) {
            if (v.get<std::string>().empty()) continue;
            argv.push_back(flag);
            argv.push_back(v.get<std::string>());
            continue;
        }
        argv.push_back(flag);
        argv.push_back(v.dump());
    }
    return argv;
}

std::string canonical_flag(std::string flag) {
    for (char& c : flag)
        if (c == '_') c = '-';
    return flag;
}

std::string config_value_tokens(const ConfigValue& cv) {
    if (const auto* str = std::get_if<std::string>(&cv.v)) return *str;
    if (const auto* num = std::get_if<double>(&cv.v)) {
        char buf[48];
        std::snprintf(buf, sizeof(buf), "%.17g", *num);
        return buf;
    }
    if (const auto* darr = std::get_if<std::vector<double>>(&cv.v)) {
        std::string joined;
        for (double d : *darr) {
            if (!joined.empty()) joined += ',';
            char buf[48];
            std::snprintf(buf, sizeof(buf), "%.17g", d);
            joined += buf;
        }
        return joined;
    }
    const auto& sarr = std::get<std::vector<std::string>>(cv.v);
    std::string joined;
    for (const std::string& item : sarr) {
        if (!joined.empty()) joined += ',';
        joined += item;
    }
    return joined;
}

// Applies `--config file.toml`: flat keys become flags placed right after
// the subcommand; explicit command-line flags always win (a key whose flag
// already appears on the line is skipped). Unknown keys surface through the
// normal unknown-flag error.
std::vector<std::string> merge_config_args(std::vector<std::string> argv) {
    std::string path;
    std::vector<std::string> rest;
    for (std::size_t i = 0; i < argv.size(); ++i) {
        if (argv[i] == "--config") {
            if (i + 1 >= argv.size()) throw ValidationError("--config needs a file path");
            path = argv[++i];
        } else if (argv[i].rfind("--config=", 0) == 0) {
            path = argv[i].substr(9);
        } else {
            rest.push_back(argv[i]);
        }
    }
    if (path.empty()) return argv;
    if (rest.empty()) throw ValidationError("--config needs a subcommand");
    const Config cfg = Config::parse_file(path);

    std::vector<std::string> given;
    for (const std::string& a : rest)
        if (a.rfind("--", 0) == 0) given.push_back(canonical_flag(a.substr(0, a.find('='))));

    std::vector<std::string> merged;
    merged.push_back(rest.front());  // subcommand
    for (const auto& [key, value] : cfg.values()) {
        if (key.find('.') != std::string::npos)
            throw ValidationError("config sections are not accepted here: " + key);
        const std::string flag = canonical_flag("--" + key);
        bool overridden = false;
        for (const std::string& g : given) overridden = overridden || g == flag;
        if (overridden) continue;
        if (value.is_bool()) {
            if (std::get<bool>(value.v)) merged.push_back(flag);
            continue;
        }
        merged.push_back(flag);
        merged.push_back(config_value_tokens(value));
    }
    merged.insert(merged.end(), rest.begin() + 1, rest.end());
    return merged;
}

std::string format_mean_std(double mean, double sd) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f ± %.3f", mean, sd);
    return buf;
}

// ---------------------------------------------------------------------------
// subcommand payloads
// ---------------------------------------------------------------------------

struct TrainCmd {
    DataFlags data;
    LossFlags loss;
    ModelFlags model;
    OptFlags opt;
    std::uint64_t seed = 0;
    std::string out = ".";
    int log_every = 0;

    json resolved() const {
        json j = data.to_json();
        j.update(loss.to_json());
        j.update(model.to_json());
        j.update(opt.to_json());
        j["seed"] = seed;
        j["out"] = out;
        j["log-every"] = log_every;
        return j;
    }

    int run() const {
        ensure_out_dir(out);
        const GroupedDataset ds = data.load();
        const LossSpec spec = loss.make_loss(ds.k());
        RatioModel m = model.spec().build(ds, seed);
        const TrainReport rep =
            train(spec, m, ds, opt.config(seed), log_every > 0 ? &std::cout : nullptr, log_every);
        m.save(out + "/model.json");
        json jrep;
        jrep["loss"] = loss_spec_name(spec);
        jrep["loss_history"] = rep.loss_history;
        jrep["final_loss"] = rep.final_loss;
        jrep["steps"] = rep.steps;
        jrep["config"] = resolved();
        write_json_file(out + "/report.json", jrep);
        std::cout << "final_loss " << rep.final_loss << " steps " << rep.steps << "\n";
        return 0;
    }
};

std::vector<Vec> means_from_flags(const std::string& means_csv, int dims, bool fix_mean5) {
    if (!means_csv.empty()) {
        const Matrix m = load_matrix_csv(means_csv);
        std::vector<Vec> means;
        for (std::size_t i = 0; i < m.rows; ++i)
            means.emplace_back(m.row(i), m.row(i) + m.cols);
        return means;
    }
    return default_means(dims, 5, fix_mean5);
}

struct EvalMaeCmd {
    std::string checkpoint;
    std::string data_csv;
    std::string means_csv;
    int dims = 2;
    bool fix_mean5 = false;
    double clip = 50.0;
    std::string out = ".";

    json resolved() const {
        json j;
        j["checkpoint"] = checkpoint;
        j["data"] = data_csv;
        j["means"] = means_csv;
        j["dims"] = dims;
        j["fix-mean5"] = fix_mean5;
        j["clip"] = clip;
        j["out"] = out;
        return j;
    }

    int run() const {
        ensure_out_dir(out);
        const RatioModel model = RatioModel::load(checkpoint);
        const std::vector<Vec> means = means_from_flags(means_csv, dims, fix_mean5);
        if (static_cast<int>(means.size()) != model.k())
            throw ValidationError("checkpoint k does not match the mean family");
        const Matrix pts = load_matrix_csv(data_csv);
        const TruthFn truth = [&](int i, int j, const double* x) {
            return true_gaussian_ratio(means[i], means[j], x);
        };
        const MaeReport rep = mae_report(model, truth, pts, clip);
        json j;
        j["mae"] = rep.mae;
        j["clipped_mae"] = rep.clipped;
        j["clip"] = clip;
        j["points"] = rep.points;
        write_json_file(out + "/mae.json", j);
        std::cout << "mae " << rep.mae << " clipped " << rep.clipped << "\n";
        return 0;
    }
};

struct DivergenceCmd {
    DataFlags data;
    LossFlags loss;
    std::string checkpoint;
    std::string means_csv;
    int dims = 0;  // 0: no oracle plug-in
    bool fix_mean5 = false;
    std::string out = ".";

    json resolved() const {
        json j = data.to_json();
        j.update(loss.to_json());
        j["checkpoint"] = checkpoint;
        j["means"] = means_csv;
        j["dims"] = dims;
        j["fix-mean5"] = fix_mean5;
        j["out"] = out;
        return j;
    }

    int run() const {
        ensure_out_dir(out);
        const GroupedDataset ds = data.load();
        const ConvexObjective obj = loss.make_objective(ds.k());
        json j;
        j["objective"] = obj.describe();
        if (!checkpoint.empty()) {
            const RatioModel model = RatioModel::load(checkpoint);
            j["variational"] = fdiv_variational(obj, model, ds);
        }
        if (!means_csv.empty() || dims > 0) {
            const std::vector<Vec> means = means_from_flags(means_csv, dims, fix_mean5);
            if (static_cast<int>(means.size()) != ds.k())
                throw ValidationError("oracle mean family does not match the dataset k");
            const auto oracle = [&](const double* x) {
                Vec r(ds.k() - 1);
                for (int i = 0; i + 1 < ds.k(); ++i)
                    r[i] = true_gaussian_ratio(means[i], means[ds.k() - 1], x);
                return r;
            };
            j["plugin_oracle"] = fdiv_plugin(obj, oracle, ds.groups.back());
        }
        write_json_file(out + "/divergence.json", j);
        std::cout << j.dump(2) << "\n";
        return 0;
    }
};

ScalarFn make_phi(const std::string& phi) {
    if (phi == "one") return [](const double*) { return 1.0; };
    if (phi.rfind("coord:", 0) == 0) {
        const int c = std::stoi(phi.substr(6));
        if (c < 0) throw ValidationError("bad phi coordinate");
        return [c](const double* x) { return x[c]; };
    }
    if (phi.rfind("sqnorm:", 0) == 0) {
        const int d = std::stoi(phi.substr(7));
        return [d](const double* x) {
            double s = 0.0;
            for (int i = 0; i < d; ++i) s += x[i] * x[i];
            return s;
        };
    }
    throw ValidationError("unknown phi spec: " + phi + " (use one|coord:J|sqnorm:D)");
}

struct MisCmd {
    std::string checkpoint;
    std::vector<std::string> proposal_csvs;
    int target = 0;  // 1-based distribution index
    std::vector<double> weights;
    std::string phi = "one";
    std::string out = ".";

    json resolved() const {
        json j;
        j["checkpoint"] = checkpoint;
        j["proposals"] = proposal_csvs;
        j["target"] = target;
        j["weights"] = weights;
        j["phi"] = phi;
        j["out"] = out;
        return j;
    }

    int run() const {
        ensure_out_dir(out);
        const RatioModel model = RatioModel::load(checkpoint);
        const int k = model.k();
        if (target < 1 || target > k) throw ValidationError("--target must be in 1..k");
        if (proposal_csvs.empty()) throw ValidationError("--proposals csv files required");
        std::vector<Matrix> samples;
        for (const std::string& p : proposal_csvs) samples.push_back(load_matrix_csv(p));

        // proposals are the non-target distributions, in index order
        std::vector<int> proposal_ids;
        for (int i = 0; i < k; ++i)
            if (i != target - 1) proposal_ids.push_back(i);
        if (samples.size() != proposal_ids.size())
            throw ValidationError("need one proposal csv per non-target distribution (k-1 files)");

        Vec omega = weights;
        if (omega.empty())
            omega.assign(proposal_ids.size(), 1.0 / static_cast<double>(proposal_ids.size()));
        double osum = 0.0;
        for (double w : omega) osum += w;
        for (double& w : omega) w /= osum;  // tolerate unnormalized input

        std::vector<ScalarFn> ratios;
        for (int pid : proposal_ids)
            ratios.push_back([&model, pid, t = target - 1](const double* x) {
                return pairwise_ratio(model, x, t, pid);
            });
        const double estimate =
            mis_estimate(ratios, MisWeights(omega), make_phi(phi), samples);
        json j;
        j["estimate"] = estimate;
        j["weights"] = omega;
        j["target"] = target;
        j["phi"] = phi;
        json per = json::array();
        for (std::size_t i = 0; i < ratios.size(); ++i)
            per.push_back(importance_estimate(ratios[i], make_phi(phi), samples[i]));
        j["per_proposal"] = per;
        write_json_file(out + "/mis.json", j);
        std::cout << "estimate " << estimate << "\n";
        return 0;
    }
};

struct SirCmd {
    std::string weights_csv;
    std::string checkpoint;
    std::string data_csv;
    int target = 1;
    std::size_t m = 1000;
    std::uint64_t seed = 0;
    std::string out = ".";

    json resolved() const {
        json j;
        j["weights"] = weights_csv;
        j["checkpoint"] = checkpoint;
        j["data"] = data_csv;
        j["target"] = target;
        j["m"] = m;
        j["seed"] = seed;
        j["out"] = out;
        return j;
    }

    int run() const {
        ensure_out_dir(out);
        Vec w;
        if (!weights_csv.empty()) {
            w = load_vector_csv(weights_csv);
        } else {
            if (checkpoint.empty() || data_csv.empty())
                throw ValidationError("sir needs --weights or (--checkpoint and --data)");
            const RatioModel model = RatioModel::load(checkpoint);
            if (target < 1 || target > model.k())
                throw ValidationError("--target must be in 1..k");
            const Matrix pts = load_matrix_csv(data_csv);
            w.resize(pts.rows);
            Vec r(model.out_dim());
            for (std::size_t i = 0; i < pts.rows; ++i) {
                model.eval(pts.row(i), r.data());
                w[i] = target == model.k() ? 1.0 : r[target - 1];
            }
        }
        const auto idx = sir_resample(w, m, seed);
        json j;
        j["m"] = m;
        j["seed"] = seed;
        j["ess"] = sir_effective_sample_size(w);
        j["indices"] = idx;
        write_json_file(out + "/sir.json", j);
        std::cout << "drew " << m << " indices, ess " << sir_effective_sample_size(w) << "\n";
        return 0;
    }
};

struct AurocCmd {
    std::string scores_csv;
    std::string labels_csv;
    std::string out = ".";

    json resolved() const {
        json j;
        j["scores"] = scores_csv;
        j["labels"] = labels_csv;
        j["out"] = out;
        return j;
    }

    int run() const {
        ensure_out_dir(out);
        const Vec scores = load_vector_csv(scores_csv);
        const Vec raw = load_vector_csv(labels_csv);
        std::vector<int> labels;
        for (double v : raw) {
            if (v != 0.0 && v != 1.0) throw ValidationError("labels must be 0 or 1");
            labels.push_back(static_cast<int>(v));
        }
        const double a = auroc(scores, labels);
        json j;
        j["auroc"] = a;
        j["n"] = scores.size();
        write_json_file(out + "/auroc.json", j);
        std::cout << "auroc " << a << "\n";
        return 0;
    }
};

struct BenchGaussianCmd {
    std::vector<int> dims = {2};
    int seeds = 3;
    std::uint64_t seed = 0;
    std::size_t n = 2000;
    std::size_t n_eval = 1000;
    std::vector<std::string> methods;
    ModelFlags model;
    OptFlags opt;
    bool fix_mean5 = false;
    int jobs = 1;
    double power_alpha = 1.5;
    double lse_alpha = 5.0;
    double ps_alpha = 1.8;
    std::string out = ".";

    BenchGaussianCmd() { model.model = "mlp"; }

    json resolved() const {
        json j;
        j["dims"] = dims;
        j["seeds"] = seeds;
        j["seed"] = seed;
        j["n"] = n;
        j["n-eval"] = n_eval;
        j["methods"] = methods;
        j.update(model.to_json());
        j.update(opt.to_json());
        j["fix-mean5"] = fix_mean5;
        j["jobs"] = jobs;
        j["power-alpha"] = power_alpha;
        j["lse-alpha"] = lse_alpha;
        j["ps-alpha"] = ps_alpha;
        j["out"] = out;
        return j;
    }

    int run() const {
        ensure_out_dir(out);
        std::vector<MethodSpec> specs;
        if (methods.empty()) {
            specs = default_method_set(5);
        } else {
            for (const std::string& name : methods)
                specs.push_back(make_method(name, 5, power_alpha, lse_alpha, ps_alpha));
        }
        json jout;
        jout["config"] = resolved();
        json per_dim = json::object();
        std::ostringstream csv;
        csv << "method";
        for (int d : dims) csv << ",dim=" << d;
        csv << "\n";
        std::vector<std::vector<BenchRow>> all_rows;
        for (int d : dims) {
            GaussianSpec gspec;
            gspec.dim = d;
            gspec.means = default_means(d, 5, fix_mean5);
            gspec.n_train = n;
            gspec.n_eval = n_eval;
            const auto rows =
                run_gaussian_benchmark(gspec, specs, model.spec(), opt.config(seed), seeds,
                                       seed, jobs);
            all_rows.push_back(rows);
            json jrows = json::array();
            for (const BenchRow& row : rows) {
                json jr;
                jr["method"] = row.method;
                jr["mae_mean"] = row.mae_mean;
                jr["mae_std"] = row.mae_std;
                jr["mae_per_seed"] = row.mae_per_seed;
                jr["clipped_mean"] = row.clipped_mean;
                jr["clipped_std"] = row.clipped_std;
                jr["clipped_per_seed"] = row.clipped_per_seed;
                jr["failures"] = row.failures;
                jrows.push_back(jr);
            }
            per_dim["dim=" + std::to_string(d)] = jrows;
        }
        for (std::size_t mi = 0; mi < specs.size(); ++mi) {
            csv << specs[mi].name;
            for (std::size_t di = 0; di < dims.size(); ++di)
                csv << ',' << format_mean_std(all_rows[di][mi].mae_mean,
                                              all_rows[di][mi].mae_std);
            csv << "\n";
        }
        jout["results"] = per_dim;
        write_json_file(out + "/bench_gaussian.json", jout);
        write_text(out + "/bench_gaussian.csv", csv.str());
        std::cout << csv.str();
        return 0;
    }
};

struct BenchOodCmd {
    std::vector<double> components = {-3.0, 0.0, 3.0};
    std::vector<double> mix;
    int seeds = 3;
    std::uint64_t seed = 0;
    std::size_t n = 2000;
    std::size_t n_eval = 2000;
    std::vector<std::string> methods = {"random-init", "multi-lr"};
    ModelFlags model;
    OptFlags opt;
    int jobs = 1;
    std::string out = ".";

    BenchOodCmd() { model.model = "mlp"; }

    json resolved() const {
        json j;
        j["components"] = components;
        j["mix"] = mix;
        j["seeds"] = seeds;
        j["seed"] = seed;
        j["n"] = n;
        j["n-eval"] = n_eval;
        j["methods"] = methods;
        j.update(model.to_json());
        j.update(opt.to_json());
        j["jobs"] = jobs;
        j["out"] = out;
        return j;
    }

    int run() const {
        ensure_out_dir(out);
        OodSpec spec;
        spec.component_means = components;
        spec.mixture_weights = mix;
        spec.n_train = n;
        spec.n_eval = n_eval;
        const int k = static_cast<int>(components.size()) + 1;
        std::vector<MethodSpec> specs;
        for (const std::string& name : methods) specs.push_back(make_method(name, k));
        const auto rows =
            run_ood_benchmark(spec, specs, model.spec(), opt.config(seed), seeds, seed, jobs);
        json jout;
        jout["config"] = resolved();
        jout["oracle_auroc"] = ood_oracle_auroc(spec);
        json jrows = json::array();
        std::ostringstream csv;
        csv << "method,avg_auroc\n";
        for (const OodRow& row : rows) {
            json jr;
            jr["method"] = row.method;
            jr["auroc_mean"] = row.auroc_mean;
            jr["auroc_std"] = row.auroc_std;
            jr["per_seed"] = row.per_seed;
            jrows.push_back(jr);
            csv << row.method << ',' << format_mean_std(row.auroc_mean, row.auroc_std) << "\n";
        }
        jout["results"] = jrows;
        write_json_file(out + "/bench_ood.json", jout);
        write_text(out + "/bench_ood.csv", csv.str());
        std::cout << csv.str();
        return 0;
    }
};

struct VerifyTheoryCmd {
    long trials = 1000;
    std::uint64_t seed = 0;
    std::string out = ".";

    json resolved() const {
        json j;
        j["trials"] = trials;
        j["seed"] = seed;
        j["out"] = out;
        return j;
    }

    int run() const {
        ensure_out_dir(out);
        const TheoryReport report = run_theory_suite(seed, trials);
        json j;
        j["trials"] = trials;
        j["seed"] = seed;
        json checks = json::array();
        for (const TheoryCheck& c : report.checks) {
            json jc;
            jc["name"] = c.name;
            jc["max_residual"] = c.max_residual;
            jc["tolerance"] = c.tolerance;
            jc["trials"] = c.trials;
            jc["pass"] = c.pass;
            checks.push_back(jc);
            std::cout << (c.pass ? "PASS" : "FAIL") << ' ' << c.name << " max_residual "
                      << c.max_residual << " tol " << c.tolerance << "\n";
        }
        j["checks"] = checks;
        j["all_pass"] = report.all_pass();
        write_json_file(out + "/theory.json", j);
        return report.all_pass() ? 0 : 1;
    }
};

struct GradCheckCmd {
    DataFlags data;
    LossFlags loss;
    ModelFlags model;
    int synth_k = 3;
    int synth_dims = 2;
    std::size_t synth_n = 32;
    std::uint64_t seed = 0;
    double eps = 1e-5;
    double tol = 1e-4;
    std::string out = ".";

    json resolved() const {
        json j = data.to_json();
        j.update(loss.to_json());
        j.update(model.to_json());
        j["k"] = synth_k;
        j["dims"] = synth_dims;
        j["n"] = synth_n;
        j["seed"] = seed;
        j["eps"] = eps;
        j["tol"] = tol;
        j["out"] = out;
        return j;
    }

    int run() const {
        ensure_out_dir(out);
        GroupedDataset ds = [&] {
            if (!data.data.empty() || !data.labeled.empty()) return data.load();
            RngStream rng(seed, "gradcheck/data");
            std::vector<Matrix> groups;
            for (int g = 0; g < synth_k; ++g) {
                Matrix m(synth_n, synth_dims);
                for (double& x : m.data) x = rng.normal();
                groups.push_back(std::move(m));
            }
            return GroupedDataset(std::move(groups), synth_dims);
        }();
        const LossSpec spec = loss.make_loss(ds.k());
        RatioModel m = model.spec().build(ds, seed);
        // random but reproducible parameters so the check is not at a
        // stationary point
        RngStream prng(seed, "gradcheck/params");
        auto params = m.params();
        for (std::size_t i = 0; i < params.size(); ++i) params[i] += 0.3 * prng.normal();
        const double err = gradient_check(spec, m, ds, eps);
        json j;
        j["max_rel_error"] = err;
        j["eps"] = eps;
        j["tol"] = tol;
        j["loss"] = loss_spec_name(spec);
        j["pass"] = err <= tol;
        write_json_file(out + "/gradcheck.json", j);
        std::cout << (err <= tol ? "PASS" : "FAIL") << " max_rel_error " << err << "\n";
        return err <= tol ? 0 : 1;
    }
};

int dispatch(const std::vector<std::string>& argv);

struct RerunCmd {
    std::string record_path;
    std::string out_override;

    int run() const {
        std::ifstream in(record_path);
        if (!in) throw ValidationError("cannot open run record: " + record_path);
        json record;
        try {
            in >> record;
        } catch (const json::exception& e) {
            throw ValidationError(std::string("bad run record: ") + e.what());
        }
        std::vector<std::string> argv = argv_from_record(record);
        if (!out_override.empty()) {
            for (std::size_t i = 0; i + 1 < argv.size(); ++i)
                if (argv[i] == "--out") argv[i + 1] = out_override;
        }
        return dispatch(argv);
    }
};

int dispatch(const std::vector<std::string>& raw_argv) {
    const std::vector<std::string> argv = merge_config_args(raw_argv);
    CLI::App app{"multi-distribution density ratio estimation toolkit"};
    app.set_version_flag("--version", std::string("multidre ") + kVersion);
    app.require_subcommand(1);
    std::string config_help;  // value consumed before parsing; listed for --help

    TrainCmd train_cmd;
    auto* train_sub = app.add_subcommand("train", "fit a ratio model to grouped samples");
    train_sub->add_option("--config", config_help, "TOML config; explicit flags override it");
    train_cmd.data.attach(train_sub);
    train_cmd.loss.attach(train_sub);
    train_cmd.model.attach(train_sub);
    train_cmd.opt.attach(train_sub);
    train_sub->add_option("--seed", train_cmd.seed, "master seed");
    train_sub->add_option("--out", train_cmd.out, "output directory");
    train_sub->add_option("--log-every", train_cmd.log_every, "print epoch,loss every N epochs");

    EvalMaeCmd mae_cmd;
    auto* mae_sub = app.add_subcommand("eval-mae", "pairwise ratio error against gaussian truth");
    mae_sub->add_option("--config", config_help, "TOML config; explicit flags override it");
    mae_sub->add_option("--checkpoint", mae_cmd.checkpoint, "model checkpoint")->required();
    mae_sub->add_option("--data", mae_cmd.data_csv, "evaluation points csv")->required();
    mae_sub->add_option("--means", mae_cmd.means_csv, "true mean vectors csv (k rows)");
    mae_sub->add_option("--dims", mae_cmd.dims, "dimension of the default mean family");
    mae_sub->add_flag("--fix-mean5", mae_cmd.fix_mean5, "use the deduplicated fifth mean");
    mae_sub->add_option("--clip", mae_cmd.clip, "clip level for the tail diagnostic");
    mae_sub->add_option("--out", mae_cmd.out, "output directory");

    DivergenceCmd div_cmd;
    auto* div_sub = app.add_subcommand("divergence", "plug-in and variational divergence");
    div_sub->add_option("--config", config_help, "TOML config; explicit flags override it");
    div_cmd.data.attach(div_sub);
    div_cmd.loss.attach(div_sub);
    div_sub->add_option("--checkpoint", div_cmd.checkpoint, "model checkpoint (variational)");
    div_sub->add_option("--means", div_cmd.means_csv, "oracle mean vectors csv");
    div_sub->add_option("--dims", div_cmd.dims, "dimension of the default mean family (0 = off)");
    div_sub->add_flag("--fix-mean5", div_cmd.fix_mean5, "use the deduplicated fifth mean");
    div_sub->add_option("--out", div_cmd.out, "output directory");

    MisCmd mis_cmd;
    auto* mis_sub = app.add_subcommand("mis", "multiple importance sampling estimate");
    mis_sub->add_option("--config", config_help, "TOML config; explicit flags override it");
    mis_sub->add_option("--checkpoint", mis_cmd.checkpoint, "model checkpoint")->required();
    mis_sub->add_option("--proposals", mis_cmd.proposal_csvs,
                        "proposal sample csvs (non-target groups, in order)")
        ->delimiter(',');
    mis_sub->add_option("--target", mis_cmd.target, "1-based target distribution")->required();
    mis_sub->add_option("--weights", mis_cmd.weights, "proposal weights")->delimiter(',');
    mis_sub->add_option("--phi", mis_cmd.phi, "integrand: one|coord:J|sqnorm:D");
    mis_sub->add_option("--out", mis_cmd.out, "output directory");

    SirCmd sir_cmd;
    auto* sir_sub = app.add_subcommand("sir", "sampling-importance-resampling indices");
    sir_sub->add_option("--config", config_help, "TOML config; explicit flags override it");
    sir_sub->add_option("--weights", sir_cmd.weights_csv, "weights csv (one value per row)");
    sir_sub->add_option("--checkpoint", sir_cmd.checkpoint, "model checkpoint");
    sir_sub->add_option("--data", sir_cmd.data_csv, "pivot samples csv to weight");
    sir_sub->add_option("--target", sir_cmd.target, "1-based target distribution");
    sir_sub->add_option("--m", sir_cmd.m, "number of draws");
    sir_sub->add_option("--seed", sir_cmd.seed, "master seed");
    sir_sub->add_option("--out", sir_cmd.out, "output directory");

    AurocCmd auroc_cmd;
    auto* auroc_sub = app.add_subcommand("auroc", "rank-based auroc of scores vs labels");
    auroc_sub->add_option("--config", config_help, "TOML config; explicit flags override it");
    auroc_sub->add_option("--scores", auroc_cmd.scores_csv, "score csv")->required();
    auroc_sub->add_option("--labels", auroc_cmd.labels_csv, "0/1 label csv")->required();
    auroc_sub->add_option("--out", auroc_cmd.out, "output directory");

    BenchGaussianCmd bg_cmd;
    auto* bg_sub = app.add_subcommand("bench-gaussian", "five-gaussian ratio benchmark");
    bg_sub->add_option("--config", config_help, "TOML config; explicit flags override it");
    bg_sub->add_option("--dims", bg_cmd.dims, "dimensions to run")->delimiter(',');
    bg_sub->add_option("--seeds", bg_cmd.seeds, "number of seeds");
    bg_sub->add_option("--seed", bg_cmd.seed, "base seed");
    bg_sub->add_option("--n", bg_cmd.n, "training samples per group");
    bg_sub->add_option("--n-eval", bg_cmd.n_eval, "held-out samples per group");
    bg_sub->add_option("--methods", bg_cmd.methods, "method names (default: full battery)")
        ->delimiter(',');
    bg_cmd.model.attach(bg_sub);
    bg_cmd.opt.attach(bg_sub);
    bg_sub->add_flag("--fix-mean5", bg_cmd.fix_mean5, "use the deduplicated fifth mean");
    bg_sub->add_option("--jobs", bg_cmd.jobs, "parallel benchmark jobs");
    bg_sub->add_option("--power-alpha", bg_cmd.power_alpha, "alpha for the power method");
    bg_sub->add_option("--lse-alpha", bg_cmd.lse_alpha, "alpha for logsumexp");
    bg_sub->add_option("--ps-alpha", bg_cmd.ps_alpha, "alpha for spherical");
    bg_sub->add_option("--out", bg_cmd.out, "output directory");

    BenchOodCmd bo_cmd;
    auto* bo_sub = app.add_subcommand("bench-ood", "mixture out-of-distribution benchmark");
    bo_sub->add_option("--config", config_help, "TOML config; explicit flags override it");
    bo_sub->add_option("--components", bo_cmd.components, "component means")->delimiter(',');
    bo_sub->add_option("--mix", bo_cmd.mix, "mixture weights (default uniform)")->delimiter(',');
    bo_sub->add_option("--seeds", bo_cmd.seeds, "number of seeds");
    bo_sub->add_option("--seed", bo_cmd.seed, "base seed");
    bo_sub->add_option("--n", bo_cmd.n, "training samples per group");
    bo_sub->add_option("--n-eval", bo_cmd.n_eval, "held-out mixture samples");
    bo_sub->add_option("--methods", bo_cmd.methods, "method names")->delimiter(',');
    bo_cmd.model.attach(bo_sub);
    bo_cmd.opt.attach(bo_sub);
    bo_sub->add_option("--jobs", bo_cmd.jobs, "parallel benchmark jobs");
    bo_sub->add_option("--out", bo_cmd.out, "output directory");

    VerifyTheoryCmd vt_cmd;
    auto* vt_sub = app.add_subcommand("verify-theory", "numerical identity verifiers");
    vt_sub->add_option("--config", config_help, "TOML config; explicit flags override it");
    vt_sub->add_option("--trials", vt_cmd.trials, "random trials per check");
    vt_sub->add_option("--seed", vt_cmd.seed, "master seed");
    vt_sub->add_option("--out", vt_cmd.out, "output directory");

    GradCheckCmd gc_cmd;
    auto* gc_sub = app.add_subcommand("grad-check", "analytic vs numeric gradients");
    gc_sub->add_option("--config", config_help, "TOML config; explicit flags override it");
    gc_cmd.data.attach(gc_sub);
    gc_cmd.loss.attach(gc_sub);
    gc_cmd.model.attach(gc_sub);
    gc_sub->add_option("--k", gc_cmd.synth_k, "groups for the synthetic dataset");
    gc_sub->add_option("--dims", gc_cmd.synth_dims, "dimension of the synthetic dataset");
    gc_sub->add_option("--n", gc_cmd.synth_n, "samples per synthetic group");
    gc_sub->add_option("--seed", gc_cmd.seed, "master seed");
    gc_sub->add_option("--eps", gc_cmd.eps, "finite difference step");
    gc_sub->add_option("--tol", gc_cmd.tol, "pass threshold on the max relative error");
    gc_sub->add_option("--out", gc_cmd.out, "output directory");

    RerunCmd rerun_cmd;
    auto* rerun_sub = app.add_subcommand("rerun", "replay a run.json record");
    rerun_sub->add_option("record", rerun_cmd.record_path, "path to run.json")->required();
    rerun_sub->add_option("--out", rerun_cmd.out_override, "redirect outputs");

    std::vector<const char*> cargv;
    cargv.push_back("multidre");
    for (const std::string& a : argv) cargv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(cargv.size()), cargv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints the usage message
        return 1;
    }

    const auto t0 = std::chrono::steady_clock::now();
    int rc = 0;
    std::string sub_name;
    json resolved;
    std::string out_dir;
    if (train_sub->parsed()) {
        rc = train_cmd.run();
        sub_name = "train";
        resolved = train_cmd.resolved();
        out_dir = train_cmd.out;
    } else if (mae_sub->parsed()) {
        rc = mae_cmd.run();
        sub_name = "eval-mae";
        resolved = mae_cmd.resolved();
        out_dir = mae_cmd.out;
    } else if (div_sub->parsed()) {
        rc = div_cmd.run();
        sub_name = "divergence";
        resolved = div_cmd.resolved();
        out_dir = div_cmd.out;
    } else if (mis_sub->parsed()) {
        rc = mis_cmd.run();
        sub_name = "mis";
        resolved = mis_cmd.resolved();
        out_dir = mis_cmd.out;
    } else if (sir_sub->parsed()) {
        rc = sir_cmd.run();
        sub_name = "sir";
        resolved = sir_cmd.resolved();
        out_dir = sir_cmd.out;
    } else if (auroc_sub->parsed()) {
        rc = auroc_cmd.run();
        sub_name = "auroc";
        resolved = auroc_cmd.resolved();
        out_dir = auroc_cmd.out;
    } else if (bg_sub->parsed()) {
        rc = bg_cmd.run();
        sub_name = "bench-gaussian";
        resolved = bg_cmd.resolved();
        out_dir = bg_cmd.out;
    } else if (bo_sub->parsed()) {
        rc = bo_cmd.run();
        sub_name = "bench-ood";
        resolved = bo_cmd.resolved();
        out_dir = bo_cmd.out;
    } else if (vt_sub->parsed()) {
        rc = vt_cmd.run();
        sub_name = "verify-theory";
        resolved = vt_cmd.resolved();
        out_dir = vt_cmd.out;
    } else if (gc_sub->parsed()) {
        rc = gc_cmd.run();
        sub_name = "grad-check";
        resolved = gc_cmd.resolved();
        out_dir = gc_cmd.out;
    } else if (rerun_sub->parsed()) {
        return rerun_cmd.run();  // the replayed run writes its own record
    }

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_json_file(out_dir + "/run.json", run_record(sub_name, resolved, wall));
    return rc;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        return dispatch(args);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
