#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "lowrank/dataset.hpp"
#include "lowrank/error.hpp"
#include "lowrank/svd.hpp"
#include "oracles.hpp"

using namespace lowrank;
namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& header, std::initializer_list<int> payload) {
    std::vector<std::uint8_t> out(header.begin(), header.end());
    for (int v : payload) out.push_back(static_cast<std::uint8_t>(v));
    return out;
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 3; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("lowrank_test_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("ppm: single white pixel") {
    const ImageTensor img = parse_ppm(bytes_of("P6\n1 1\n255\n", {255, 255, 255}));
    CHECK(img.channels() == 3);
    for (const Matrix& ch : img.planes()) CHECK(ch(0, 0) == 1.0);
}

TEST_CASE("ppm: hand-encoded 2x2 with a comment") {
    const ImageTensor img =
        parse_ppm(bytes_of("P6\n# hand made\n2 2\n255\n", {0, 51, 102, 255, 0, 0, 0, 255, 0, 0, 0, 255}));
    CHECK(img.channel(0) == Matrix::from_rows({{0.0, 1.0}, {0.0, 0.0}}));
    CHECK(img.channel(1) == Matrix::from_rows({{0.2, 0.0}, {1.0, 0.0}}));
    CHECK(img.channel(2) == Matrix::from_rows({{0.4, 0.0}, {0.0, 1.0}}));
}

TEST_CASE("ppm: round trip stays within one quantization step") {
    Rng rng(3);
    Planes planes;
    for (int c = 0; c < 3; ++c) planes.push_back(oracle::random_matrix(rng, 5, 7, 0.0, 1.0));
    const ImageTensor x(planes);
    const auto path = scratch("roundtrip.ppm");
    write_ppm(x, path);
    const ImageTensor back = read_ppm(path);
    CHECK(max_abs_diff(back.planes(), x.planes()) <= 1.0 / 255.0);
    fs::remove(path);

    // Portrait rasters keep their orientation on disk.
    const ImageTensor tall = ImageTensor::from_raster(Planes{oracle::random_matrix(rng, 6, 3, 0.0, 1.0)});
    const ImageTensor tall_back = parse_ppm(encode_ppm(tall));
    CHECK(tall_back.transposed());
    CHECK(max_abs_diff(tall_back.planes(), tall.planes()) <= 1.0 / 255.0);
}

TEST_CASE("ppm: malformed inputs report byte offsets") {
    CHECK_THROWS_AS(parse_ppm(bytes_of("P3\n1 1\n255\n", {})), ParseError);
    CHECK_THROWS_AS(parse_ppm(bytes_of("P6\n1 x\n255\n", {})), ParseError);
    CHECK_THROWS_AS(parse_ppm(bytes_of("P6\n2 2\n65535\n", {})), ParseError);
    try {
        (void)parse_ppm(bytes_of("P6\n2 1\n255\n", {1, 2, 3, 4}));
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.offset() == 15);
    }
}

TEST_CASE("idx: empty pair and hand-built samples") {
    std::vector<std::uint8_t> images, labels;
    put_be32(images, 0x803);
    put_be32(images, 0);
    put_be32(images, 2);
    put_be32(images, 3);
    put_be32(labels, 0x801);
    put_be32(labels, 0);
    CHECK(parse_idx(images, labels).empty());

    images.clear();
    labels.clear();
    put_be32(images, 0x803);
    put_be32(images, 2);
    put_be32(images, 2);
    put_be32(images, 3);
    for (int v : {0, 255, 51, 102, 0, 0, 255, 255, 255, 0, 0, 0}) images.push_back(static_cast<std::uint8_t>(v));
    put_be32(labels, 0x801);
    put_be32(labels, 2);
    labels.push_back(7);
    labels.push_back(3);

    const LabeledDataset d = parse_idx(images, labels);
    REQUIRE(d.size() == 2);
    CHECK(d[0].label == 7);
    CHECK(d[1].label == 3);
    CHECK(d[0].image.channel(0) == Matrix::from_rows({{0.0, 1.0, 0.2}, {0.4, 0.0, 0.0}}));
    CHECK(d[1].image.channel(0) == Matrix::from_rows({{1.0, 1.0, 1.0}, {0.0, 0.0, 0.0}}));

    auto bad_label = labels;
    bad_label[8] = 10;
    CHECK_THROWS_AS(parse_idx(images, bad_label, 10), RangeError);
    auto bad_magic = images;
    bad_magic[3] = 0x01;
    CHECK_THROWS_AS(parse_idx(bad_magic, labels), ParseError);
    auto short_images = images;
    short_images.pop_back();
    CHECK_THROWS_AS(parse_idx(short_images, labels), ParseError);
    auto count_mismatch = labels;
    count_mismatch[7] = 3;
    count_mismatch.push_back(1);
    CHECK_THROWS_AS(parse_idx(images, count_mismatch), ParseError);
}

TEST_CASE("synthetic: noiseless samples repeat the prototype") {
    SyntheticSpec spec;
    spec.num_classes = 3;
    spec.samples_per_class = 4;
    spec.size = 8;
    spec.noise_sigma = 0.0;
    const LabeledDataset d = make_synthetic(spec);
    REQUIRE(d.size() == 12);
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(d[i].label == i % 3);
        CHECK(d[i].image == d[i % 3].image);
    }
}

TEST_CASE("synthetic: prototypes have the requested rank") {
    SyntheticSpec spec;
    spec.size = 12;
    spec.prototype_rank = 1;
    for (const Matrix& p : make_prototypes(spec)) CHECK(numerical_rank(p) == 1);
    spec.prototype_rank = 5;
    for (const Matrix& p : make_prototypes(spec)) {
        CHECK(numerical_rank(p) == 5);
        Matrix centered = p;
        for (double& v : centered.data()) v -= 0.5;
        CHECK(max_abs(centered) == doctest::Approx(spec.contrast).epsilon(1e-12));
    }
}

TEST_CASE("synthetic: deterministic and validated") {
    SyntheticSpec spec;
    spec.samples_per_class = 3;
    const LabeledDataset a = make_synthetic(spec);
    const LabeledDataset b = make_synthetic(spec);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].image == b[i].image);

    spec.prototype_rank = 0;
    CHECK_THROWS_AS(make_synthetic(spec), ConfigError);
    spec.prototype_rank = 5;
    spec.noise_sigma = -1.0;
    CHECK_THROWS_AS(make_synthetic(spec), ConfigError);
    spec.noise_sigma = 0.05;
    spec.contrast = 0.6;
    CHECK_THROWS_AS(make_synthetic(spec), ConfigError);
}

TEST_CASE("synthetic: classes are separable by nearest prototype") {
    SyntheticSpec spec;  // 10 classes, r=5, n=16, sigma=0.05, 200 per class
    const LabeledDataset d = make_synthetic(spec);
    const auto protos = make_prototypes(spec);
    std::size_t hits = 0;
    for (const Sample& s : d.samples()) {
        std::size_t best = 0;
        double best_dist = INFINITY;
        for (std::size_t c = 0; c < protos.size(); ++c) {
            const double dist = frobenius_norm(s.image.channel(0) - protos[c]);
            if (dist < best_dist) {
                best_dist = dist;
                best = c;
            }
        }
        hits += best == s.label ? 1 : 0;
    }
    CHECK(static_cast<double>(hits) / static_cast<double>(d.size()) >= 0.95);
}

TEST_CASE("truncate_dataset: endpoints, labels, and rank-5 prototypes") {
    SyntheticSpec spec;
    spec.samples_per_class = 2;
    spec.noise_sigma = 0.0;
    const LabeledDataset d = make_synthetic(spec);

    const LabeledDataset same = truncate_dataset(d, 16);
    const LabeledDataset gone = truncate_dataset(d, 16, true);
    const LabeledDataset five = truncate_dataset(d, 5);
    const auto protos = make_prototypes(spec);
    REQUIRE(five.size() == d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(max_abs_diff(same[i].image.planes(), d[i].image.planes()) < 1e-9);
        CHECK(gone[i].image == ImageTensor::zeros(16, 16, 1));
        CHECK(gone[i].label == d[i].label);
        CHECK(five[i].label == d[i].label);
        CHECK(max_abs_diff(five[i].image.channel(0), protos[d[i].label]) < 1e-9);
    }
    CHECK_THROWS_AS(truncate_dataset(d, 17), RangeError);
}

TEST_CASE("cache: save and load preserve samples") {
    SyntheticSpec spec;
    spec.samples_per_class = 2;
    spec.num_classes = 3;
    spec.size = 6;
    const LabeledDataset d = make_synthetic(spec);
    const auto dir = scratch("cache");
    save_cache(d, dir);
    CHECK(fs::exists(dir / "manifest.jsonl"));
    const LabeledDataset back = load_cache(dir);
    REQUIRE(back.size() == d.size());
    CHECK(back.num_classes() == 3);
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(back[i].label == d[i].label);
        CHECK(back[i].image == d[i].image);
    }
    fs::remove_all(dir);
    CHECK_THROWS_AS(load_cache(dir), IoError);
}

TEST_CASE("dataset: invariants") {
    CHECK_THROWS_AS(LabeledDataset("bad", 2, {{ImageTensor::zeros(2, 2, 1), 2}}), RangeError);
    CHECK_THROWS_AS(LabeledDataset("mixed", 2, {{ImageTensor::zeros(2, 2, 1), 0}, {ImageTensor::zeros(2, 3, 1), 1}}),
                    ShapeError);
}
