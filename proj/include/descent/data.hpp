#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "descent/error.hpp"
#include "descent/models.hpp"
#include "descent/rng.hpp"
#include "descent/tensor.hpp"

namespace descent {

// Immutable labeled dataset. Image data is [N, 32, 32, 3] scaled to [0,1];
// synthetic data is [N, dim].
struct Dataset {
    Tensor inputs;
    std::vector<int> labels;
    int class_count = 0;

    std::size_t size() const noexcept { return labels.size(); }

    // Flat per-record feature count.
    std::size_t record_size() const noexcept {
        return labels.empty() ? 0 : inputs.size() / labels.size();
    }
};

struct SplitSpec {
    double val_ratio = 0.1;
    std::uint64_t seed = 0;
};

enum class CifarVariant { c10, c100 };

inline std::string to_string(CifarVariant v) { return v == CifarVariant::c10 ? "c10" : "c100"; }

namespace detail {

constexpr std::size_t kCifarPixels = 32 * 32 * 3;

// One CIFAR binary batch file: label byte(s) then 3072 pixel bytes laid out
// as full R, G, B planes, each 32x32 row-major. c100 records carry a coarse
// then a fine label byte; the fine one is used. The record count is derived
// from the file size, which must be an exact positive multiple of the
// record size.
inline void read_cifar_file(const std::string& path, CifarVariant variant, Dataset& out,
                            std::size_t& cursor) {
    std::ifstream file(path, std::ios::binary | std::ios::ate);
    if (!file) throw Error("io", "cannot open " + path);
    const std::streamoff bytes = file.tellg();
    file.seekg(0);

    const std::size_t label_bytes = variant == CifarVariant::c10 ? 1 : 2;
    const std::size_t record = label_bytes + kCifarPixels;
    if (bytes <= 0 || static_cast<std::size_t>(bytes) % record != 0)
        throw Error("format", path + ": size " + std::to_string(bytes) +
                                  " is not a multiple of the record size " + std::to_string(record));
    const std::size_t records = static_cast<std::size_t>(bytes) / record;

    std::vector<unsigned char> raw(record);
    const int classes = variant == CifarVariant::c10 ? 10 : 100;
    for (std::size_t r = 0; r < records; ++r) {
        if (!file.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(record)))
            throw Error("format", path + ": truncated record " + std::to_string(r));
        const int label = raw[label_bytes - 1]; // fine label for c100
        if (label >= classes)
            throw Error("format", path + ": label " + std::to_string(label) + " out of range");
        out.labels.push_back(label);
        double* px = out.inputs.data() + cursor * kCifarPixels;
        const unsigned char* planes = raw.data() + label_bytes;
        for (std::size_t row = 0; row < 32; ++row)
            for (std::size_t col = 0; col < 32; ++col)
                for (std::size_t ch = 0; ch < 3; ++ch)
                    px[(row * 32 + col) * 3 + ch] =
                        static_cast<double>(planes[ch * 1024 + row * 32 + col]) / 255.0;
        ++cursor;
    }
}

inline std::size_t file_records(const std::string& path, std::size_t record) {
    std::ifstream file(path, std::ios::binary | std::ios::ate);
    if (!file) throw Error("io", "cannot open " + path);
    const std::streamoff bytes = file.tellg();
    if (bytes <= 0 || static_cast<std::size_t>(bytes) % record != 0)
        throw Error("format", path + ": size " + std::to_string(bytes) +
                                  " is not a multiple of the record size " + std::to_string(record));
    return static_cast<std::size_t>(bytes) / record;
}

inline Dataset load_cifar_files(const std::vector<std::string>& paths, CifarVariant variant) {
    const std::size_t label_bytes = variant == CifarVariant::c10 ? 1 : 2;
    const std::size_t record = label_bytes + kCifarPixels;
    std::size_t total = 0;
    for (const auto& p : paths) total += file_records(p, record);

    Dataset ds;
    ds.class_count = variant == CifarVariant::c10 ? 10 : 100;
    ds.inputs = Tensor({total, 32, 32, 3});
    ds.labels.reserve(total);
    std::size_t cursor = 0;
    for (const auto& p : paths) read_cifar_file(p, variant, ds, cursor);
    return ds;
}

inline Dataset gather(const Dataset& ds, const std::vector<std::size_t>& indices) {
    const std::size_t rec = ds.record_size();
    Shape shape = ds.inputs.shape();
    shape[0] = indices.size();
    Dataset out;
    out.class_count = ds.class_count;
    out.inputs = Tensor(shape);
    out.labels.reserve(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const double* src = ds.inputs.data() + indices[i] * rec;
        double* dst = out.inputs.data() + i * rec;
        for (std::size_t k = 0; k < rec; ++k) dst[k] = src[k];
        out.labels.push_back(ds.labels[indices[i]]);
    }
    return out;
}

} // namespace detail

// Loads the standard binary batch files from dir: data_batch_1..5.bin plus
// test_batch.bin for c10, train.bin plus test.bin for c100. Never downloads.
inline std::pair<Dataset, Dataset> load_cifar(const std::string& dir, CifarVariant variant) {
    std::vector<std::string> train_files, test_files;
    if (variant == CifarVariant::c10) {
        for (int i = 1; i <= 5; ++i)
            train_files.push_back(dir + "/data_batch_" + std::to_string(i) + ".bin");
        test_files.push_back(dir + "/test_batch.bin");
    } else {
        train_files.push_back(dir + "/train.bin");
        test_files.push_back(dir + "/test.bin");
    }
    return {detail::load_cifar_files(train_files, variant),
            detail::load_cifar_files(test_files, variant)};
}

// Seeded shuffle, then partition: round(val_ratio * N) records go to the
// validation set, the rest stay in training. Together they are a permutation
// of the input.
inline std::pair<Dataset, Dataset> split(const Dataset& train, const SplitSpec& spec) {
    if (!(spec.val_ratio > 0.0 && spec.val_ratio < 1.0))
        throw Error("config", "split: val_ratio must be in (0,1)");
    std::vector<std::size_t> indices(train.size());
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    RngStream rng(spec.seed);
    shuffle_indices(rng, indices);

    const auto val_count = static_cast<std::size_t>(
        std::llround(spec.val_ratio * static_cast<double>(train.size())));
    const std::vector<std::size_t> val_idx(indices.begin(), indices.begin() + val_count);
    const std::vector<std::size_t> train_idx(indices.begin() + val_count, indices.end());
    return {detail::gather(train, train_idx), detail::gather(train, val_idx)};
}

// Class-balanced seeded sample: exactly per_class records of every class.
inline Dataset subset(const Dataset& ds, std::size_t per_class, std::uint64_t seed) {
    if (per_class == 0) throw Error("config", "subset: per_class must be >= 1");
    std::vector<std::size_t> indices(ds.size());
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    RngStream rng(seed);
    shuffle_indices(rng, indices);

    std::vector<std::size_t> taken(static_cast<std::size_t>(ds.class_count), 0);
    std::vector<std::size_t> picks;
    picks.reserve(per_class * static_cast<std::size_t>(ds.class_count));
    for (std::size_t idx : indices) {
        auto& count = taken[static_cast<std::size_t>(ds.labels[idx])];
        if (count < per_class) {
            ++count;
            picks.push_back(idx);
        }
    }
    for (int c = 0; c < ds.class_count; ++c)
        if (taken[static_cast<std::size_t>(c)] < per_class)
            throw Error("insufficient", "subset: class " + std::to_string(c) + " has only " +
                                            std::to_string(taken[static_cast<std::size_t>(c)]) +
                                            " records, need " + std::to_string(per_class));
    return detail::gather(ds, picks);
}

// Gaussian clusters with unit spread: class centers sit on a circle of
// radius 4 in the first two coordinates (evenly spaced angles), or at 4*c on
// the line when dim == 1.
inline Dataset synth_blobs(int classes, std::size_t per_class, std::size_t dim,
                           std::uint64_t seed) {
    if (classes < 2) throw Error("config", "synth_blobs: classes must be >= 2");
    if (per_class == 0) throw Error("config", "synth_blobs: per_class must be >= 1");
    if (dim == 0) throw Error("config", "synth_blobs: dim must be >= 1");

    const std::size_t n = static_cast<std::size_t>(classes) * per_class;
    Dataset ds;
    ds.class_count = classes;
    ds.inputs = Tensor({n, dim});
    ds.labels.reserve(n);
    RngStream rng(seed);
    constexpr double radius = 4.0;
    std::size_t row = 0;
    for (int c = 0; c < classes; ++c) {
        std::vector<double> center(dim, 0.0);
        if (dim == 1) {
            center[0] = radius * c;
        } else {
            const double angle = 2.0 * 3.14159265358979323846 * c / classes;
            center[0] = radius * std::cos(angle);
            center[1] = radius * std::sin(angle);
        }
        for (std::size_t k = 0; k < per_class; ++k, ++row) {
            double* px = ds.inputs.data() + row * dim;
            for (std::size_t d = 0; d < dim; ++d) px[d] = center[d] + rng.next_normal();
            ds.labels.push_back(c);
        }
    }
    return ds;
}

// Reshape image records to flat feature rows for the dense classifiers.
inline Dataset flatten_inputs(const Dataset& ds) {
    Dataset out;
    out.class_count = ds.class_count;
    out.labels = ds.labels;
    out.inputs = Tensor({ds.size(), ds.record_size()},
                        std::vector<double>(ds.inputs.data(), ds.inputs.data() + ds.inputs.size()));
    return out;
}

// Gather dataset rows into a minibatch.
inline Batch make_batch(const Dataset& ds, const std::vector<std::size_t>& indices) {
    const std::size_t rec = ds.record_size();
    Shape shape = ds.inputs.shape();
    shape[0] = indices.size();
    Batch batch;
    batch.inputs = Tensor(shape);
    batch.labels.reserve(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const double* src = ds.inputs.data() + indices[i] * rec;
        double* dst = batch.inputs.data() + i * rec;
        for (std::size_t k = 0; k < rec; ++k) dst[k] = src[k];
        batch.labels.push_back(ds.labels[indices[i]]);
    }
    return batch;
}

} // namespace descent
