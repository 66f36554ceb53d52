#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <vector>

#include "descent/data.hpp"

using namespace descent;
namespace fs = std::filesystem;

namespace {

// Scratch directory removed at scope exit; unique per instantiation.
struct TempDir {
    fs::path path;

    TempDir() {
        static int counter = 0;
        const auto stamp =
            std::chrono::steady_clock::now().time_since_epoch().count();
        path = fs::temp_directory_path() /
               ("descent_test_" + std::to_string(stamp) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

void write_bytes(const fs::path& p, const std::vector<unsigned char>& bytes) {
    std::ofstream f(p, std::ios::binary);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    REQUIRE(f.good());
}

// One c10 record: label byte, then constant R, G, B planes of 1024 bytes each.
std::vector<unsigned char> c10_record(unsigned char label, unsigned char r, unsigned char g,
                                      unsigned char b) {
    std::vector<unsigned char> rec(1 + 3072);
    rec[0] = label;
    for (std::size_t i = 0; i < 1024; ++i) {
        rec[1 + i] = r;
        rec[1 + 1024 + i] = g;
        rec[1 + 2048 + i] = b;
    }
    return rec;
}

std::vector<unsigned char> c100_record(unsigned char coarse, unsigned char fine,
                                       unsigned char fill) {
    std::vector<unsigned char> rec(2 + 3072, fill);
    rec[0] = coarse;
    rec[1] = fine;
    return rec;
}

void write_c10_dir(const fs::path& dir, const std::vector<std::vector<unsigned char>>& train,
                   const std::vector<unsigned char>& test) {
    REQUIRE(train.size() == 5);
    for (int i = 1; i <= 5; ++i)
        write_bytes(dir / ("data_batch_" + std::to_string(i) + ".bin"),
                    train[static_cast<std::size_t>(i - 1)]);
    write_bytes(dir / "test_batch.bin", test);
}

auto code_is(const std::string& code) {
    return Catch::Matchers::Predicate<Error>(
        [code](const Error& e) { return e.code() == code; });
}

} // namespace

TEST_CASE("binary image records load with planar channel layout") {
    TempDir tmp;
    std::vector<std::vector<unsigned char>> train;
    for (int i = 0; i < 5; ++i)
        train.push_back(c10_record(static_cast<unsigned char>(i), 255, 255, 255));
    // distinct plane values pin the R,G,B-planes-to-interleaved mapping
    train[1] = c10_record(7, 10, 20, 30);
    write_c10_dir(tmp.path, train, c10_record(3, 0, 128, 255));

    const auto [ds_train, ds_test] = load_cifar(tmp.path.string(), CifarVariant::c10);

    REQUIRE(ds_train.size() == 5);
    REQUIRE(ds_test.size() == 1);
    CHECK(ds_train.class_count == 10);
    CHECK(ds_train.inputs.shape() == Shape{5, 32, 32, 3});
    CHECK(ds_train.record_size() == 3072);

    CHECK(ds_train.labels[0] == 0);
    CHECK(ds_train.labels[1] == 7);
    CHECK(ds_train.inputs[0] == 1.0); // 255 scales to exactly 1

    const double* rec1 = ds_train.inputs.data() + 3072;
    CHECK(rec1[0] == 10.0 / 255.0);
    CHECK(rec1[1] == 20.0 / 255.0);
    CHECK(rec1[2] == 30.0 / 255.0);
    CHECK(rec1[3071] == 30.0 / 255.0);

    CHECK(ds_test.labels[0] == 3);
    CHECK(ds_test.inputs[0] == 0.0);
    CHECK(ds_test.inputs[1] == 128.0 / 255.0);
    CHECK(ds_test.inputs[2] == 1.0);
}

TEST_CASE("two-byte label records use the fine label") {
    TempDir tmp;
    std::vector<unsigned char> train = c100_record(5, 42, 100);
    const auto extra = c100_record(1, 99, 7);
    train.insert(train.end(), extra.begin(), extra.end());
    write_bytes(tmp.path / "train.bin", train);
    write_bytes(tmp.path / "test.bin", c100_record(0, 0, 0));

    const auto [ds_train, ds_test] = load_cifar(tmp.path.string(), CifarVariant::c100);
    REQUIRE(ds_train.size() == 2);
    CHECK(ds_train.class_count == 100);
    CHECK(ds_train.labels[0] == 42);
    CHECK(ds_train.labels[1] == 99);
    CHECK(ds_train.inputs[0] == 100.0 / 255.0);
    CHECK(ds_test.size() == 1);
}

TEST_CASE("loader failure modes") {
    TempDir tmp;

    SECTION("missing files") {
        CHECK_THROWS_MATCHES(load_cifar((tmp.path / "nowhere").string(), CifarVariant::c10),
                             Error, code_is("io"));
    }

    SECTION("truncated file") {
        std::vector<std::vector<unsigned char>> train;
        for (int i = 0; i < 5; ++i) train.push_back(c10_record(0, 1, 2, 3));
        train[4].pop_back();
        write_c10_dir(tmp.path, train, c10_record(0, 0, 0, 0));
        CHECK_THROWS_MATCHES(load_cifar(tmp.path.string(), CifarVariant::c10), Error,
                             code_is("format"));
    }

    SECTION("empty file") {
        std::vector<std::vector<unsigned char>> train;
        for (int i = 0; i < 5; ++i) train.push_back(c10_record(0, 1, 2, 3));
        train[0].clear();
        write_c10_dir(tmp.path, train, c10_record(0, 0, 0, 0));
        CHECK_THROWS_MATCHES(load_cifar(tmp.path.string(), CifarVariant::c10), Error,
                             code_is("format"));
    }

    SECTION("label out of range") {
        std::vector<std::vector<unsigned char>> train;
        for (int i = 0; i < 5; ++i) train.push_back(c10_record(0, 1, 2, 3));
        train[2][0] = 10;
        write_c10_dir(tmp.path, train, c10_record(0, 0, 0, 0));
        CHECK_THROWS_MATCHES(load_cifar(tmp.path.string(), CifarVariant::c10), Error,
                             code_is("format"));
    }
}

TEST_CASE("validation split partitions by rounded ratio") {
    const Dataset ds = synth_blobs(2, 5, 1, 17); // N = 10

    const auto [train, val] = split(ds, {0.1, 5});
    CHECK(train.size() == 9);
    CHECK(val.size() == 1);
    CHECK(train.class_count == 2);
    CHECK(val.class_count == 2);

    const auto [t2, v2] = split(ds, {0.25, 5});
    CHECK(v2.size() == 3); // round(2.5) rounds half away from zero
    CHECK(t2.size() == 7);
}

TEST_CASE("validation split is a seeded permutation of its input") {
    const Dataset ds = synth_blobs(3, 8, 4, 23); // N = 24

    const auto [train, val] = split(ds, {0.25, 9});
    REQUIRE(train.size() + val.size() == ds.size());

    // every input row appears exactly once across the two halves
    auto rows_of = [](const Dataset& d) {
        std::vector<std::vector<double>> rows;
        const std::size_t rec = d.record_size();
        for (std::size_t r = 0; r < d.size(); ++r) {
            const double* p = d.inputs.data() + r * rec;
            rows.emplace_back(p, p + rec);
        }
        return rows;
    };
    std::vector<std::vector<double>> got = rows_of(train);
    const auto val_rows = rows_of(val);
    got.insert(got.end(), val_rows.begin(), val_rows.end());
    std::vector<std::vector<double>> want = rows_of(ds);
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    CHECK(got == want);

    // same seed reproduces the split bit for bit; another seed reorders
    const auto [t2, v2] = split(ds, {0.25, 9});
    REQUIRE(t2.size() == train.size());
    bool same = t2.labels == train.labels;
    for (std::size_t i = 0; i < train.inputs.size() && same; ++i)
        same = t2.inputs[i] == train.inputs[i];
    CHECK(same);

    const auto [t3, v3] = split(ds, {0.25, 10});
    bool differs = t3.labels != train.labels;
    for (std::size_t i = 0; i < train.inputs.size() && !differs; ++i)
        differs = t3.inputs[i] != train.inputs[i];
    CHECK(differs);

    CHECK_THROWS_MATCHES(split(ds, {0.0, 1}), Error, code_is("config"));
    CHECK_THROWS_MATCHES(split(ds, {1.0, 1}), Error, code_is("config"));
}

TEST_CASE("balanced subsets draw the same count from every class") {
    const Dataset ds = synth_blobs(3, 30, 2, 31); // 90 records

    const Dataset sub = subset(ds, 10, 41);
    REQUIRE(sub.size() == 30);
    std::vector<int> counts(3, 0);
    for (int label : sub.labels) ++counts[static_cast<std::size_t>(label)];
    CHECK(counts == std::vector<int>{10, 10, 10});

    const Dataset again = subset(ds, 10, 41);
    CHECK(again.labels == sub.labels);

    CHECK_THROWS_MATCHES(subset(ds, 31, 41), Error, code_is("insufficient"));
    CHECK_THROWS_MATCHES(subset(ds, 0, 41), Error, code_is("config"));
}

TEST_CASE("synthetic clusters sit near their circle centers") {
    const Dataset ds = synth_blobs(3, 50, 2, 4);
    REQUIRE(ds.size() == 150);
    CHECK(ds.class_count == 3);
    CHECK(ds.inputs.shape() == Shape{150, 2});

    constexpr double pi = 3.14159265358979323846;
    for (int c = 0; c < 3; ++c) {
        double mx = 0.0, my = 0.0;
        int n = 0;
        for (std::size_t r = 0; r < ds.size(); ++r) {
            if (ds.labels[r] != c) continue;
            mx += ds.inputs[r * 2];
            my += ds.inputs[r * 2 + 1];
            ++n;
        }
        REQUIRE(n == 50);
        // sample means of 50 unit-variance draws: 4 standard errors is 0.57
        CHECK_THAT(mx / n, Catch::Matchers::WithinAbs(4.0 * std::cos(2.0 * pi * c / 3), 0.6));
        CHECK_THAT(my / n, Catch::Matchers::WithinAbs(4.0 * std::sin(2.0 * pi * c / 3), 0.6));
    }

    const Dataset same = synth_blobs(3, 50, 2, 4);
    CHECK(same.labels == ds.labels);
    CHECK(same.inputs[0] == ds.inputs[0]);

    CHECK_THROWS_MATCHES(synth_blobs(1, 5, 2, 0), Error, code_is("config"));
    CHECK_THROWS_MATCHES(synth_blobs(2, 0, 2, 0), Error, code_is("config"));
    CHECK_THROWS_MATCHES(synth_blobs(2, 5, 0, 0), Error, code_is("config"));
}

TEST_CASE("flattening image records preserves values and is idempotent") {
    TempDir tmp;
    std::vector<std::vector<unsigned char>> train;
    for (int i = 0; i < 5; ++i)
        train.push_back(c10_record(static_cast<unsigned char>(i), 11, 22, 33));
    write_c10_dir(tmp.path, train, c10_record(0, 0, 0, 0));
    const auto [ds, test] = load_cifar(tmp.path.string(), CifarVariant::c10);

    const Dataset flat = flatten_inputs(ds);
    CHECK(flat.inputs.shape() == Shape{5, 3072});
    CHECK(flat.labels == ds.labels);
    CHECK(flat.record_size() == ds.record_size());
    for (std::size_t i = 0; i < flat.inputs.size(); ++i)
        REQUIRE(flat.inputs[i] == ds.inputs[i]);

    const Dataset twice = flatten_inputs(flat);
    CHECK(twice.inputs.shape() == flat.inputs.shape());
    for (std::size_t i = 0; i < flat.inputs.size(); ++i)
        REQUIRE(twice.inputs[i] == flat.inputs[i]);
}

TEST_CASE("minibatch gathering copies rows and labels") {
    const Dataset ds = synth_blobs(2, 4, 3, 77); // 8 records of 3 features

    const Batch batch = make_batch(ds, {3, 7, 1});
    REQUIRE(batch.size() == 3);
    CHECK(batch.inputs.shape() == Shape{3, 3});
    CHECK(batch.labels[0] == ds.labels[3]);
    CHECK(batch.labels[1] == ds.labels[7]);
    CHECK(batch.labels[2] == ds.labels[1]);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(batch.inputs[k] == ds.inputs[3 * 3 + k]);
        CHECK(batch.inputs[3 + k] == ds.inputs[7 * 3 + k]);
        CHECK(batch.inputs[6 + k] == ds.inputs[1 * 3 + k]);
    }

    const Batch none = make_batch(ds, {});
    CHECK(none.size() == 0);
}

TEST_CASE("empty dataset bookkeeping") {
    Dataset empty;
    CHECK(empty.size() == 0);
    CHECK(empty.record_size() == 0);
}
