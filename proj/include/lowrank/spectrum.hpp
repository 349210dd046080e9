#pragma once

#include <string>
#include <vector>

#include "lowrank/dataset.hpp"
#include "lowrank/model.hpp"

namespace lowrank {

enum class SpectrumMode {
    Agreement,  // prediction on the rank-k image equals the full-rank prediction
    Accuracy,   // prediction on the rank-k image equals the label
};

SpectrumMode parse_spectrum_mode(const std::string& text);
std::string to_string(SpectrumMode mode);

/// values[k] for every input rank k = 0..w.
struct RankSpectrum {
    std::vector<double> values;
    SpectrumMode mode;
    std::string model_id;

    std::size_t width() const noexcept { return values.size() - 1; }
};

/// Evaluates the model on rank-k copies of every sample. Each image is
/// factorized once and truncated at every rank.
RankSpectrum compute_spectrum(const Model& m, const LabeledDataset& data, SpectrumMode mode,
                              std::string model_id = "model");

/// a.values - b.values, rank by rank.
std::vector<double> spectrum_gap(const RankSpectrum& a, const RankSpectrum& b);

}  // namespace lowrank
