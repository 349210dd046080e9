#include "doctest.h"
#include "lowrank/error.hpp"
#include "lowrank/spectrum.hpp"
#include "lowrank/svd.hpp"
#include "oracles.hpp"

using namespace lowrank;

namespace {

LabeledDataset noisy_images(std::uint64_t seed, std::size_t n, std::size_t w, std::size_t classes) {
    Rng rng(seed);
    std::vector<Sample> samples;
    for (std::size_t i = 0; i < n; ++i)
        samples.push_back({ImageTensor(Planes{oracle::random_matrix(rng, w, w + 2, 0.0, 1.0)}), i % classes});
    return LabeledDataset("noise", classes, std::move(samples));
}

Model trained_looking_model(std::size_t w, std::size_t classes, std::uint64_t seed) {
    Model m = Model::reference(w, w + 2, 1, classes);
    m.initialize(seed);
    return m;
}

}  // namespace

TEST_CASE("spectrum: agreement ends at exactly one and lies in [0,1]") {
    const auto d = noisy_images(1, 12, 8, 3);
    const Model m = trained_looking_model(8, 3, 2);
    const RankSpectrum s = compute_spectrum(m, d, SpectrumMode::Agreement, "m");
    REQUIRE(s.values.size() == 9);
    CHECK(s.width() == 8);
    CHECK(s.values[8] == 1.0);
    for (double v : s.values) CHECK((v >= 0.0 && v <= 1.0));
    CHECK(s.model_id == "m");
}

TEST_CASE("spectrum: rank zero agrees where the zero-image prediction does") {
    const auto d = noisy_images(3, 15, 6, 4);
    const Model m = trained_looking_model(6, 4, 5);
    const std::size_t zero_pred = forward(m, ImageTensor::zeros(6, 8, 1)).top_class;
    std::size_t expected = 0;
    for (const Sample& s : d.samples()) expected += forward(m, s.image).top_class == zero_pred ? 1 : 0;
    const RankSpectrum s = compute_spectrum(m, d, SpectrumMode::Agreement);
    CHECK(s.values[0] == static_cast<double>(expected) / 15.0);
}

TEST_CASE("spectrum: matches the literal per-rank loop") {
    const auto d = noisy_images(4, 10, 6, 3);
    const Model m = trained_looking_model(6, 3, 6);
    for (SpectrumMode mode : {SpectrumMode::Agreement, SpectrumMode::Accuracy}) {
        const RankSpectrum s = compute_spectrum(m, d, mode);
        for (std::size_t k = 0; k <= 6; ++k) {
            std::size_t hits = 0;
            for (const Sample& smp : d.samples()) {
                const std::size_t ref = mode == SpectrumMode::Agreement ? forward(m, smp.image).top_class : smp.label;
                hits += forward(m, image_rank_k(smp.image, k)).top_class == ref ? 1 : 0;
            }
            CHECK(s.values[k] == static_cast<double>(hits) / 10.0);
        }
    }
    CHECK(compute_spectrum(m, d, SpectrumMode::Accuracy).values ==
          compute_spectrum(m, d, SpectrumMode::Accuracy).values);
}

TEST_CASE("spectrum_gap: zero on itself, antisymmetric, validated") {
    const auto d = noisy_images(7, 8, 5, 2);
    const RankSpectrum a = compute_spectrum(trained_looking_model(5, 2, 1), d, SpectrumMode::Accuracy);
    const RankSpectrum b = compute_spectrum(trained_looking_model(5, 2, 2), d, SpectrumMode::Accuracy);
    for (double g : spectrum_gap(a, a)) CHECK(g == 0.0);
    const auto ab = spectrum_gap(a, b);
    const auto ba = spectrum_gap(b, a);
    for (std::size_t k = 0; k < ab.size(); ++k) CHECK(ab[k] == -ba[k]);

    RankSpectrum other_mode = b;
    other_mode.mode = SpectrumMode::Agreement;
    CHECK_THROWS_AS(spectrum_gap(a, other_mode), ConfigError);
    RankSpectrum shorter = b;
    shorter.values.pop_back();
    CHECK_THROWS_AS(spectrum_gap(a, shorter), ShapeError);
    CHECK_THROWS_AS(compute_spectrum(trained_looking_model(5, 2, 1), LabeledDataset("e", 2, {}),
                                     SpectrumMode::Accuracy),
                    ConfigError);
    CHECK(parse_spectrum_mode("accuracy") == SpectrumMode::Accuracy);
    CHECK_THROWS_AS(parse_spectrum_mode("top5"), ConfigError);
}
