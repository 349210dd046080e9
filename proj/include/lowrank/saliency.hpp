#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "lowrank/model.hpp"
#include "lowrank/svd.hpp"

namespace lowrank {

enum class SaliencyMethod : std::uint32_t { Vanilla = 1, Rig = 2 };

/// Per-pixel attribution, already reduced over channels. `values` is w x h
/// like the image channels; `transposed` mirrors the source image.
struct SaliencyMap {
    Matrix values;
    SaliencyMethod method;
    std::size_t class_index;
    bool transposed = false;
};

/// Gradient of a fixed class score with respect to an image.
using GradientSource = std::function<Planes(const ImageTensor&)>;

/// Weight of the rank-k term for an image of width w.
using WeightSchedule = std::function<double(std::size_t k, std::size_t w)>;

/// (w - k) / w.
double descending_weight(std::size_t k, std::size_t w);

/// Per-pixel maximum over channels.
Matrix channel_max(const Planes& planes);

/// sum_j weights[j] * channel_max(source(inputs[j])), accumulated in order.
/// Terms with zero weight are skipped.
Matrix weighted_saliency(const std::vector<ImageTensor>& inputs, const std::vector<double>& weights,
                         const GradientSource& source);

GradientSource model_gradient(const Model& m, std::size_t class_index,
                              GradientTarget target = GradientTarget::Softmax);

SaliencyMap vanilla_gradient(const Model& m, const ImageTensor& x, std::size_t class_index,
                             GradientTarget target = GradientTarget::Softmax);

/// Sum over k = 1..w of schedule(k, w) * channel_max(grad at the rank-k image).
Matrix rig_values(const ImageFactors& factors, const GradientSource& source,
                  const WeightSchedule& schedule = descending_weight);

/// Rank-integrated gradients. The class defaults to the full-rank top class.
SaliencyMap rig(const Model& m, const ImageTensor& x, std::optional<std::size_t> class_index = std::nullopt,
                GradientTarget target = GradientTarget::Softmax, const WeightSchedule& schedule = descending_weight);

/// Min-max normalized raster in [0,1]; a constant map renders as 0.5.
Matrix normalized_raster(const SaliencyMap& map);

void write_saliency_pgm(const SaliencyMap& map, const std::filesystem::path& path);

/// "RSAL", u32 w, u32 h, u32 method code, then w*h float64, all little-endian.
std::vector<std::uint8_t> encode_saliency_raw(const SaliencyMap& map);
void write_saliency_raw(const SaliencyMap& map, const std::filesystem::path& path);

}  // namespace lowrank
