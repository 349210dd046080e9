#include "lowrank/saliency.hpp"

#include <algorithm>
#include <bit>

#include "lowrank/dataset.hpp"
#include "lowrank/error.hpp"
#include "lowrank/parallel.hpp"

namespace lowrank {

double descending_weight(std::size_t k, std::size_t w) {
    return static_cast<double>(w - k) / static_cast<double>(w);
}

Matrix channel_max(const Planes& planes) {
    require_uniform(planes);
    Matrix out = planes.front();
    for (std::size_t c = 1; c < planes.size(); ++c) {
        auto dst = out.data();
        auto src = planes[c].data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = std::max(dst[i], src[i]);
    }
    return out;
}

Matrix weighted_saliency(const std::vector<ImageTensor>& inputs, const std::vector<double>& weights,
                         const GradientSource& source) {
    if (inputs.size() != weights.size()) throw ShapeError("weighted_saliency: inputs and weights differ in length");
    if (inputs.empty()) throw ConfigError("weighted_saliency: no terms");
    std::vector<std::optional<Matrix>> terms(inputs.size());
    parallel_for(inputs.size(), [&](std::size_t j) {
        if (weights[j] != 0.0) terms[j] = channel_max(source(inputs[j]));
    });
    Matrix acc(inputs.front().width(), inputs.front().height());
    for (std::size_t j = 0; j < terms.size(); ++j) {
        if (!terms[j]) continue;
        if (terms[j]->rows() != acc.rows() || terms[j]->cols() != acc.cols()) {
            throw ShapeError("weighted_saliency: gradient shape " + terms[j]->shape_string() + " does not match " +
                             acc.shape_string());
        }
        auto dst = acc.data();
        auto src = terms[j]->data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += weights[j] * src[i];
    }
    return acc;
}

GradientSource model_gradient(const Model& m, std::size_t class_index, GradientTarget target) {
    if (class_index >= m.num_classes()) {
        throw RangeError("class " + std::to_string(class_index) + " out of range for " +
                         std::to_string(m.num_classes()) + " classes");
    }
    return [&m, class_index, target](const ImageTensor& x) { return input_gradient(m, x, class_index, target); };
}

SaliencyMap vanilla_gradient(const Model& m, const ImageTensor& x, std::size_t class_index, GradientTarget target) {
    return {weighted_saliency({x}, {1.0}, model_gradient(m, class_index, target)), SaliencyMethod::Vanilla,
            class_index, x.transposed()};
}

Matrix rig_values(const ImageFactors& factors, const GradientSource& source, const WeightSchedule& schedule) {
    const std::size_t w = factors.max_rank();
    std::vector<double> weights(w);
    for (std::size_t k = 1; k <= w; ++k) weights[k - 1] = schedule(k, w);
    std::vector<ImageTensor> inputs;
    inputs.reserve(w);
    for (std::size_t k = 1; k <= w; ++k) {
        // Zero-weight terms never reach the gradient source; skip their truncation too.
        inputs.push_back(weights[k - 1] != 0.0 ? factors.rank_k(k) : factors.image());
    }
    return weighted_saliency(inputs, weights, source);
}

SaliencyMap rig(const Model& m, const ImageTensor& x, std::optional<std::size_t> class_index, GradientTarget target,
                const WeightSchedule& schedule) {
    const std::size_t cls = class_index ? *class_index : forward(m, x).top_class;
    const ImageFactors factors(x);
    return {rig_values(factors, model_gradient(m, cls, target), schedule), SaliencyMethod::Rig, cls, x.transposed()};
}

Matrix normalized_raster(const SaliencyMap& map) {
    const Matrix& v = map.values;
    if (!all_finite(v)) throw NumericError("saliency map has non-finite values");
    const auto [lo, hi] = std::minmax_element(v.data().begin(), v.data().end());
    Matrix out(v.rows(), v.cols());
    const double range = *hi - *lo;
    auto dst = out.data();
    auto src = v.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = range > 0.0 ? (src[i] - *lo) / range : 0.5;
    return map.transposed ? out.transposed() : out;
}

void write_saliency_pgm(const SaliencyMap& map, const std::filesystem::path& path) {
    write_pgm(normalized_raster(map), path);
}

std::vector<std::uint8_t> encode_saliency_raw(const SaliencyMap& map) {
    std::vector<std::uint8_t> out{'R', 'S', 'A', 'L'};
    auto put = [&out](std::uint64_t v, int bytes) {
        for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    };
    put(map.values.rows(), 4);
    put(map.values.cols(), 4);
    put(static_cast<std::uint32_t>(map.method), 4);
    for (double v : map.values.data()) put(std::bit_cast<std::uint64_t>(v), 8);
    return out;
}

void write_saliency_raw(const SaliencyMap& map, const std::filesystem::path& path) {
    write_bytes_atomic(path, encode_saliency_raw(map));
}

}  // namespace lowrank
