#pragma once

#include <chrono>
#include <cstdio>
#include <future>
#include <numeric>
#include <istream>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "descent/cnn.hpp"
#include "descent/config.hpp"
#include "descent/data.hpp"
#include "descent/error.hpp"
#include "descent/models.hpp"
#include "descent/optim.hpp"
#include "descent/rng.hpp"

namespace descent {

struct OptimizerEntry {
    std::string name; // kind string; doubles as the CSV/legend label
    OptimizerConfig cfg;
};

// Declarative description of one comparison run: a model, an optional
// dataset, and the optimizer lineup sharing one seed and batch plan.
struct ExperimentSpec {
    std::string model_kind = "quadratic"; // quadratic|rosenbrock|softmax|mlp|cnn
    std::size_t model_dim = 2;            // quadratic
    std::vector<std::size_t> mlp_hidden = {32};

    std::string data_kind = "none"; // none|cifar|synth
    std::string data_dir;
    CifarVariant variant = CifarVariant::c10;
    std::size_t subset_per_class = 0; // 0 keeps every record
    double val_ratio = 0.1;
    int synth_classes = 3;
    std::size_t synth_per_class = 200;
    std::size_t synth_dim = 8;
    std::size_t synth_test_per_class = 50;

    std::vector<OptimizerEntry> optimizers;
    long epochs = 10;
    std::size_t batch_size = 64;
    std::uint64_t seed = 7;
    long steps_per_epoch = 10; // analytic objectives only
    bool parallel = true;
    bool early_stop = false; // stop once val accuracy stalls
    long early_stop_patience = 3;
};

// One epoch-level record; final_row marks the test-set summary line written
// after training (epoch column rendered as "final").
struct MetricsRow {
    std::string optimizer;
    long epoch = 0;
    bool final_row = false;
    double train_loss = 0.0;
    double val_accuracy = 0.0;
    double elapsed_seconds = 0.0;
};

inline constexpr const char* kCsvHeader = "optimizer,epoch,train_loss,val_accuracy,elapsed_seconds";

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// Sub-stream tags hung off the run seed. Epoch e shuffles with tag
// kSeedEpoch + e so every optimizer sees the same batch order.
enum : std::uint64_t {
    kSeedInit = 1,
    kSeedSubset = 2,
    kSeedSplit = 3,
    kSeedSynthTrain = 4,
    kSeedSynthTest = 5,
    kSeedEpoch = 1000,
};

} // namespace detail

// ---- spec from flat config -------------------------------------------------

namespace detail {

inline const std::set<std::string>& known_config_keys() {
    static const std::set<std::string> keys = {
        "model.kind", "model.dim", "model.hidden",
        "data.kind", "data.dir", "data.variant", "data.subset_per_class", "data.val_ratio",
        "data.synth.classes", "data.synth.per_class", "data.synth.dim", "data.synth.test_per_class",
        "optimizers",
        "opt.w", "opt.seed",
        "opt.momentum.beta",
        "opt.adam.beta1", "opt.adam.beta2", "opt.adam.epsilon",
        "opt.rmsprop.rho", "opt.rmsprop.epsilon",
        "iagd.every_other",
        "guard.epsilon",
        "lr.eta0", "lr.alpha", "lr.s", "lr.staircase",
        "run.epochs", "run.batch_size", "run.seed", "run.steps_per_epoch",
        "run.parallel", "run.early_stop", "run.early_stop_patience",
    };
    return keys;
}

inline std::vector<std::size_t> parse_size_list(const std::vector<std::string>& items,
                                                const std::string& key) {
    std::vector<std::size_t> out;
    for (const auto& item : items) {
        try {
            std::size_t pos = 0;
            long long v = std::stoll(item, &pos);
            if (pos != item.size() || v <= 0)
                throw Error("config", key + ": bad entry '" + item + "'");
            out.push_back(static_cast<std::size_t>(v));
        } catch (const Error&) {
            throw;
        } catch (const std::exception&) {
            throw Error("config", key + ": bad entry '" + item + "'");
        }
    }
    return out;
}

inline OptimizerConfig optimizer_config_from(const Config& cfg, const std::string& name,
                                             std::uint64_t run_seed) {
    OptimizerConfig oc;
    oc.kind = parse_opt_kind(name);
    oc.schedule.eta0 = cfg.get_double("lr.eta0", oc.schedule.eta0);
    oc.schedule.alpha = cfg.get_double("lr.alpha", oc.schedule.alpha);
    oc.schedule.s = cfg.get_double("lr.s", oc.schedule.s);
    oc.schedule.staircase = cfg.get_bool("lr.staircase", oc.schedule.staircase);
    oc.w = cfg.get_double("opt.w", oc.w);
    oc.seed = cfg.has("opt.seed") ? cfg.get_u64("opt.seed", 0)
                                  : RngStream::mix(run_seed, fnv1a(name));
    oc.guard.epsilon = cfg.get_double("guard.epsilon", oc.guard.epsilon);
    oc.iagd_every_other = cfg.get_bool("iagd.every_other", oc.iagd_every_other);
    oc.momentum.beta = cfg.get_double("opt.momentum.beta", oc.momentum.beta);
    oc.adam.beta1 = cfg.get_double("opt.adam.beta1", oc.adam.beta1);
    oc.adam.beta2 = cfg.get_double("opt.adam.beta2", oc.adam.beta2);
    oc.adam.epsilon = cfg.get_double("opt.adam.epsilon", oc.adam.epsilon);
    oc.rmsprop.rho = cfg.get_double("opt.rmsprop.rho", oc.rmsprop.rho);
    oc.rmsprop.epsilon = cfg.get_double("opt.rmsprop.epsilon", oc.rmsprop.epsilon);
    validate(oc);
    return oc;
}

} // namespace detail

inline ExperimentSpec spec_from_config(const Config& cfg) {
    for (const auto& key : cfg.keys())
        if (detail::known_config_keys().count(key) == 0)
            throw Error("config", "unknown key '" + key + "'");

    ExperimentSpec spec;
    spec.model_kind = cfg.get("model.kind", spec.model_kind);
    if (spec.model_kind != "quadratic" && spec.model_kind != "rosenbrock" &&
        spec.model_kind != "softmax" && spec.model_kind != "mlp" && spec.model_kind != "cnn")
        throw Error("config", "model.kind: unknown model '" + spec.model_kind + "'");
    long dim = cfg.get_long("model.dim", static_cast<long>(spec.model_dim));
    if (dim <= 0) throw Error("config", "model.dim must be positive");
    spec.model_dim = static_cast<std::size_t>(dim);
    if (cfg.has("model.hidden"))
        spec.mlp_hidden = detail::parse_size_list(cfg.get_list("model.hidden"), "model.hidden");

    spec.data_kind = cfg.get("data.kind", spec.data_kind);
    if (spec.data_kind != "none" && spec.data_kind != "cifar" && spec.data_kind != "synth")
        throw Error("config", "data.kind: unknown source '" + spec.data_kind + "'");
    spec.data_dir = cfg.get("data.dir", "");
    std::string variant = cfg.get("data.variant", "c10");
    if (variant == "c10")
        spec.variant = CifarVariant::c10;
    else if (variant == "c100")
        spec.variant = CifarVariant::c100;
    else
        throw Error("config", "data.variant must be c10 or c100");
    long per_class = cfg.get_long("data.subset_per_class", 0);
    if (per_class < 0) throw Error("config", "data.subset_per_class must be >= 0");
    spec.subset_per_class = static_cast<std::size_t>(per_class);
    spec.val_ratio = cfg.get_double("data.val_ratio", spec.val_ratio);
    if (!(spec.val_ratio >= 0.0) || !(spec.val_ratio < 1.0))
        throw Error("config", "data.val_ratio must lie in [0, 1)");
    long sc = cfg.get_long("data.synth.classes", spec.synth_classes);
    if (sc < 2) throw Error("config", "data.synth.classes must be >= 2");
    spec.synth_classes = static_cast<int>(sc);
    spec.synth_per_class = static_cast<std::size_t>(cfg.get_long("data.synth.per_class",
                                                                 static_cast<long>(spec.synth_per_class)));
    spec.synth_dim = static_cast<std::size_t>(cfg.get_long("data.synth.dim",
                                                           static_cast<long>(spec.synth_dim)));
    spec.synth_test_per_class = static_cast<std::size_t>(
        cfg.get_long("data.synth.test_per_class", static_cast<long>(spec.synth_test_per_class)));

    spec.epochs = cfg.get_long("run.epochs", spec.epochs);
    if (spec.epochs <= 0) throw Error("config", "run.epochs must be positive");
    long bs = cfg.get_long("run.batch_size", static_cast<long>(spec.batch_size));
    if (bs <= 0) throw Error("config", "run.batch_size must be positive");
    spec.batch_size = static_cast<std::size_t>(bs);
    spec.seed = cfg.get_u64("run.seed", spec.seed);
    spec.steps_per_epoch = cfg.get_long("run.steps_per_epoch", spec.steps_per_epoch);
    if (spec.steps_per_epoch <= 0) throw Error("config", "run.steps_per_epoch must be positive");
    spec.parallel = cfg.get_bool("run.parallel", spec.parallel);
    spec.early_stop = cfg.get_bool("run.early_stop", spec.early_stop);
    spec.early_stop_patience = cfg.get_long("run.early_stop_patience", spec.early_stop_patience);
    if (spec.early_stop_patience <= 0)
        throw Error("config", "run.early_stop_patience must be positive");

    bool analytic = spec.model_kind == "quadratic" || spec.model_kind == "rosenbrock";
    if (analytic && spec.data_kind != "none")
        throw Error("config", "model.kind " + spec.model_kind + " takes no dataset");
    if (!analytic && spec.data_kind == "none")
        throw Error("config", "model.kind " + spec.model_kind + " needs data.kind cifar or synth");
    if (spec.model_kind == "cnn" && spec.data_kind != "cifar")
        throw Error("config", "model.kind cnn needs data.kind cifar");
    if (spec.data_kind == "cifar" && spec.data_dir.empty())
        throw Error("config", "data.kind cifar needs data.dir");

    std::vector<std::string> names = cfg.has("optimizers") ? cfg.get_list("optimizers")
                                                           : std::vector<std::string>{"sgd"};
    if (names.empty()) throw Error("config", "optimizers list is empty");
    std::set<std::string> seen;
    for (const auto& name : names) {
        if (!seen.insert(name).second)
            throw Error("config", "duplicate optimizer '" + name + "'");
        spec.optimizers.push_back({name, detail::optimizer_config_from(cfg, name, spec.seed)});
    }
    return spec;
}

// ---- run -------------------------------------------------------------------

namespace detail {

struct Prepared {
    std::shared_ptr<Objective> objective;
    Dataset train, val, test;
    bool has_data = false;
    std::vector<Tensor> init_params;
    // batch_plan[e][b] holds the record indices of batch b in epoch e.
    std::vector<std::vector<std::vector<std::size_t>>> batch_plan;
};

inline std::vector<std::vector<std::size_t>> chunk_order(const std::vector<std::size_t>& order,
                                                         std::size_t batch_size) {
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t at = 0; at < order.size(); at += batch_size) {
        std::size_t n = std::min(batch_size, order.size() - at);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(at),
                             order.begin() + static_cast<std::ptrdiff_t>(at + n));
    }
    return batches;
}

inline Prepared prepare(const ExperimentSpec& spec) {
    Prepared prep;
    if (spec.data_kind == "cifar") {
        auto [train0, test] = load_cifar(spec.data_dir, spec.variant);
        if (spec.subset_per_class > 0)
            train0 = subset(train0, spec.subset_per_class, RngStream::mix(spec.seed, kSeedSubset));
        auto [train, val] = split(train0, {spec.val_ratio, RngStream::mix(spec.seed, kSeedSplit)});
        prep.train = std::move(train);
        prep.val = std::move(val);
        prep.test = std::move(test);
        prep.has_data = true;
    } else if (spec.data_kind == "synth") {
        Dataset train0 = synth_blobs(spec.synth_classes, spec.synth_per_class, spec.synth_dim,
                                     RngStream::mix(spec.seed, kSeedSynthTrain));
        prep.test = synth_blobs(spec.synth_classes, spec.synth_test_per_class, spec.synth_dim,
                                RngStream::mix(spec.seed, kSeedSynthTest));
        auto [train, val] = split(train0, {spec.val_ratio, RngStream::mix(spec.seed, kSeedSplit)});
        prep.train = std::move(train);
        prep.val = std::move(val);
        prep.has_data = true;
    }

    if (prep.has_data && spec.model_kind != "cnn") {
        prep.train = flatten_inputs(prep.train);
        prep.val = flatten_inputs(prep.val);
        prep.test = flatten_inputs(prep.test);
    }

    if (spec.model_kind == "quadratic") {
        prep.objective = quadratic_bowl(spec.model_dim);
    } else if (spec.model_kind == "rosenbrock") {
        prep.objective = rosenbrock();
    } else if (spec.model_kind == "softmax") {
        prep.objective = softmax_classifier(prep.train.record_size(), prep.train.class_count);
    } else if (spec.model_kind == "mlp") {
        std::vector<std::size_t> layers;
        layers.push_back(prep.train.record_size());
        layers.insert(layers.end(), spec.mlp_hidden.begin(), spec.mlp_hidden.end());
        layers.push_back(static_cast<std::size_t>(prep.train.class_count));
        prep.objective = mlp(layers);
    } else {
        const Shape& s = prep.train.inputs.shape();
        prep.objective = small_cnn({s[1], s[2], s[3]}, prep.train.class_count);
    }

    RngStream init_rng(RngStream::mix(spec.seed, kSeedInit));
    prep.init_params = prep.objective->init_params(init_rng);

    std::size_t epochs = static_cast<std::size_t>(spec.epochs);
    prep.batch_plan.resize(epochs);
    if (prep.has_data) {
        for (std::size_t e = 0; e < epochs; ++e) {
            std::vector<std::size_t> order(prep.train.size());
            std::iota(order.begin(), order.end(), std::size_t{0});
            RngStream rng(RngStream::mix(spec.seed, kSeedEpoch + e));
            shuffle_indices(rng, order);
            prep.batch_plan[e] = chunk_order(order, spec.batch_size);
        }
    }
    return prep;
}

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
};

inline EvalResult evaluate(const Objective& objective, const std::vector<Tensor>& params,
                           const Dataset& ds, std::size_t batch_size) {
    EvalResult r;
    if (ds.size() == 0) return r;
    double loss_sum = 0.0;
    std::size_t hits = 0;
    std::vector<std::size_t> idx(batch_size);
    for (std::size_t at = 0; at < ds.size(); at += batch_size) {
        std::size_t n = std::min(batch_size, ds.size() - at);
        idx.resize(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = at + i;
        Batch b = make_batch(ds, idx);
        Forward fwd = objective.forward(params, b);
        loss_sum += fwd.loss * static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i)
            if (argmax_row(fwd.probs, i) == static_cast<std::size_t>(b.labels[i])) ++hits;
    }
    r.loss = loss_sum / static_cast<double>(ds.size());
    r.accuracy = static_cast<double>(hits) / static_cast<double>(ds.size());
    return r;
}

inline std::vector<MetricsRow> run_one(const ExperimentSpec& spec, const Prepared& prep,
                                       const OptimizerEntry& entry) {
    std::vector<MetricsRow> rows;
    std::vector<Tensor> params = prep.init_params;
    Optimizer opt(entry.cfg, prep.objective->param_shapes());
    Batch empty;

    auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&t0]() {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    double best_acc = -1.0;
    long best_epoch = 0;
    for (long epoch = 1; epoch <= spec.epochs; ++epoch) {
        double loss_sum = 0.0;
        double weight_sum = 0.0;
        if (prep.has_data) {
            for (const auto& idx : prep.batch_plan[static_cast<std::size_t>(epoch - 1)]) {
                Batch b = make_batch(prep.train, idx);
                auto [fwd, grads] = prep.objective->forward_backward(params, b);
                opt.step(params, grads);
                double n = static_cast<double>(idx.size());
                loss_sum += fwd.loss * n;
                weight_sum += n;
            }
        } else {
            for (long s = 0; s < spec.steps_per_epoch; ++s) {
                auto [fwd, grads] = prep.objective->forward_backward(params, empty);
                opt.step(params, grads);
                loss_sum += fwd.loss;
                weight_sum += 1.0;
            }
        }
        MetricsRow row;
        row.optimizer = entry.name;
        row.epoch = epoch;
        row.train_loss = loss_sum / weight_sum;
        if (prep.has_data)
            row.val_accuracy = evaluate(*prep.objective, params, prep.val, spec.batch_size).accuracy;
        row.elapsed_seconds = elapsed();
        rows.push_back(row);

        if (prep.has_data && spec.early_stop) {
            if (row.val_accuracy > best_acc) {
                best_acc = row.val_accuracy;
                best_epoch = epoch;
            } else if (epoch - best_epoch >= spec.early_stop_patience) {
                break;
            }
        }
    }

    MetricsRow last;
    last.optimizer = entry.name;
    last.epoch = rows.empty() ? 0 : rows.back().epoch;
    last.final_row = true;
    if (prep.has_data) {
        EvalResult r = evaluate(*prep.objective, params, prep.test, spec.batch_size);
        last.train_loss = r.loss;
        last.val_accuracy = r.accuracy;
    } else {
        last.train_loss = prep.objective->forward(params, empty).loss;
        last.val_accuracy = 0.0;
    }
    last.elapsed_seconds = elapsed();
    rows.push_back(last);
    return rows;
}

} // namespace detail

// Runs every optimizer in the spec from the same initial parameters over the
// same precomputed batch order, so trajectories differ only by update rule.
inline std::vector<MetricsRow> run(const ExperimentSpec& spec) {
    if (spec.optimizers.empty()) throw Error("config", "no optimizers configured");
    detail::Prepared prep = detail::prepare(spec);

    std::vector<std::vector<MetricsRow>> per_opt(spec.optimizers.size());
    if (spec.parallel && spec.optimizers.size() > 1) {
        std::vector<std::future<std::vector<MetricsRow>>> futures;
        futures.reserve(spec.optimizers.size());
        for (const auto& entry : spec.optimizers)
            futures.push_back(std::async(std::launch::async, [&spec, &prep, &entry] {
                return detail::run_one(spec, prep, entry);
            }));
        for (std::size_t i = 0; i < futures.size(); ++i) per_opt[i] = futures[i].get();
    } else {
        for (std::size_t i = 0; i < spec.optimizers.size(); ++i)
            per_opt[i] = detail::run_one(spec, prep, spec.optimizers[i]);
    }

    std::vector<MetricsRow> rows;
    for (auto& chunk : per_opt)
        for (auto& row : chunk) rows.push_back(std::move(row));
    return rows;
}

// ---- CSV io ----------------------------------------------------------------

namespace detail {

inline std::string format_double(const char* fmt, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

} // namespace detail

inline void write_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
    out << kCsvHeader << "\n";
    for (const auto& row : rows) {
        out << row.optimizer << ',';
        if (row.final_row)
            out << "final";
        else
            out << row.epoch;
        out << ',' << detail::format_double("%.17g", row.train_loss);
        out << ',' << detail::format_double("%.17g", row.val_accuracy);
        out << ',' << detail::format_double("%.3f", row.elapsed_seconds);
        out << '\n';
    }
}

inline std::string csv_string(const std::vector<MetricsRow>& rows) {
    std::ostringstream out;
    write_csv(out, rows);
    return out.str();
}

inline std::vector<MetricsRow> read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error("format", "empty metrics stream");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kCsvHeader)
        throw Error("format", "bad metrics header: '" + line + "'");
    std::vector<MetricsRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        for (std::size_t i = 0; i <= line.size(); ++i) {
            if (i == line.size() || line[i] == ',') {
                fields.push_back(line.substr(start, i - start));
                start = i + 1;
            }
        }
        if (fields.size() != 5)
            throw Error("format", "line " + std::to_string(lineno) + ": expected 5 fields, got " +
                                      std::to_string(fields.size()));
        MetricsRow row;
        row.optimizer = fields[0];
        if (row.optimizer.empty())
            throw Error("format", "line " + std::to_string(lineno) + ": empty optimizer");
        if (fields[1] == "final") {
            row.final_row = true;
        } else {
            try {
                std::size_t pos = 0;
                row.epoch = std::stol(fields[1], &pos);
                if (pos != fields[1].size() || row.epoch <= 0) throw std::invalid_argument("epoch");
            } catch (const std::exception&) {
                throw Error("format", "line " + std::to_string(lineno) + ": bad epoch '" +
                                          fields[1] + "'");
            }
        }
        try {
            std::size_t pos = 0;
            row.train_loss = std::stod(fields[2], &pos);
            if (pos != fields[2].size()) throw std::invalid_argument("loss");
            row.val_accuracy = std::stod(fields[3], &pos);
            if (pos != fields[3].size()) throw std::invalid_argument("acc");
            row.elapsed_seconds = std::stod(fields[4], &pos);
            if (pos != fields[4].size()) throw std::invalid_argument("time");
        } catch (const std::exception&) {
            throw Error("format", "line " + std::to_string(lineno) + ": bad numeric field");
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

// Plain-text recap of the final rows, one line per optimizer.
inline std::string summary_table(const std::vector<MetricsRow>& rows) {
    std::ostringstream out;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-12s %14s %12s %10s\n", "optimizer", "test_accuracy",
                  "test_loss", "time_s");
    out << buf;
    for (const auto& row : rows) {
        if (!row.final_row) continue;
        std::snprintf(buf, sizeof buf, "%-12s %14.4f %12.6f %10.3f\n", row.optimizer.c_str(),
                      row.val_accuracy, row.train_loss, row.elapsed_seconds);
        out << buf;
    }
    return out.str();
}

} // namespace descent
