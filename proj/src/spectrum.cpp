#include "lowrank/spectrum.hpp"

#include "lowrank/error.hpp"
#include "lowrank/parallel.hpp"
#include "lowrank/svd.hpp"

namespace lowrank {

SpectrumMode parse_spectrum_mode(const std::string& text) {
    if (text == "agreement") return SpectrumMode::Agreement;
    if (text == "accuracy") return SpectrumMode::Accuracy;
    throw ConfigError("unknown spectrum mode '" + text + "' (expected agreement or accuracy)");
}

std::string to_string(SpectrumMode mode) { return mode == SpectrumMode::Agreement ? "agreement" : "accuracy"; }

RankSpectrum compute_spectrum(const Model& m, const LabeledDataset& data, SpectrumMode mode, std::string model_id) {
    if (data.empty()) throw ConfigError("cannot compute a spectrum on an empty dataset");
    const std::size_t w = data[0].image.width();

    // hits[i][k]: whether sample i counts at rank k.
    std::vector<std::vector<char>> hits(data.size());
    parallel_for(data.size(), [&](std::size_t i) {
        const Sample& s = data[i];
        const ImageFactors factors(s.image);
        const std::size_t reference = mode == SpectrumMode::Agreement ? forward(m, s.image).top_class : s.label;
        auto& row = hits[i];
        row.resize(w + 1);
        for (std::size_t k = 0; k <= w; ++k) row[k] = forward(m, factors.rank_k(k)).top_class == reference;
    });

    RankSpectrum out{std::vector<double>(w + 1, 0.0), mode, std::move(model_id)};
    for (std::size_t k = 0; k <= w; ++k) {
        std::size_t count = 0;
        for (const auto& row : hits) count += row[k] ? 1 : 0;
        out.values[k] = static_cast<double>(count) / static_cast<double>(data.size());
    }
    return out;
}

std::vector<double> spectrum_gap(const RankSpectrum& a, const RankSpectrum& b) {
    if (a.values.size() != b.values.size()) {
        throw ShapeError("spectrum_gap: widths differ (" + std::to_string(a.width()) + " vs " +
                         std::to_string(b.width()) + ")");
    }
    if (a.mode != b.mode) throw ConfigError("spectrum_gap: modes differ");
    std::vector<double> gap(a.values.size());
    for (std::size_t k = 0; k < gap.size(); ++k) gap[k] = a.values[k] - b.values[k];
    return gap;
}

}  // namespace lowrank
