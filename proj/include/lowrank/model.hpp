#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "lowrank/image.hpp"

namespace lowrank {

// Layer descriptors. Convolutions are 3x3, stride 1, zero padding 1;
// pooling is 2x2 with stride 2 (odd trailing rows/cols are dropped).
struct Conv {
    std::size_t out_channels;
    bool operator==(const Conv&) const = default;
};
struct Relu {
    bool operator==(const Relu&) const = default;
};
struct MaxPool {
    bool operator==(const MaxPool&) const = default;
};
struct Flatten {
    bool operator==(const Flatten&) const = default;
};
struct Dense {
    std::size_t out_features;
    bool operator==(const Dense&) const = default;
};
struct Softmax {
    bool operator==(const Softmax&) const = default;
};

using Layer = std::variant<Conv, Relu, MaxPool, Flatten, Dense, Softmax>;

struct TensorShape {
    std::size_t channels;
    std::size_t rows;
    std::size_t cols;

    std::size_t size() const noexcept { return channels * rows * cols; }
    bool operator==(const TensorShape&) const = default;
};

/// Channel-major activation tensor.
struct Tensor {
    TensorShape shape;
    std::vector<double> data;
};

Tensor to_tensor(const ImageTensor& image);
Tensor to_tensor(const Planes& planes);
Planes to_planes(const Tensor& t);

struct LayerInfo {
    TensorShape input;
    TensorShape output;
    std::size_t param_offset;
    std::size_t param_count;
    bool operator==(const LayerInfo&) const = default;
};

/// A feed-forward CNN ending in Dense(num_classes) -> Softmax, with all
/// parameters in one flat vector.
class Model {
public:
    /// `input` is (channels, w, h) of the images the model accepts.
    Model(TensorShape input, std::vector<Layer> layers, std::size_t num_classes);

    /// Conv(8)-ReLU-MaxPool-Conv(16)-ReLU-MaxPool-Flatten-Dense(C)-Softmax.
    static Model reference(std::size_t width, std::size_t height, std::size_t channels,
                           std::size_t num_classes);

    const TensorShape& input_shape() const noexcept { return input_; }
    const std::vector<Layer>& layers() const noexcept { return layers_; }
    const std::vector<LayerInfo>& layer_info() const noexcept { return info_; }
    std::size_t num_classes() const noexcept { return num_classes_; }

    std::span<const double> params() const noexcept { return params_; }
    std::span<double> params() noexcept { return params_; }
    void set_params(std::vector<double> params);

    /// He-style init: weights uniform in +-sqrt(6 / fan_in), biases zero.
    void initialize(std::uint64_t seed);

    bool operator==(const Model&) const = default;

private:
    TensorShape input_;
    std::vector<Layer> layers_;
    std::size_t num_classes_;
    std::vector<LayerInfo> info_;
    std::vector<double> params_;
};

struct Prediction {
    std::vector<double> probs;
    std::size_t top_class;  // first index of the maximum
};

/// Which network output a gradient is taken of.
enum class GradientTarget { Softmax, Logit };

Prediction forward(const Model& m, const ImageTensor& x);
Prediction forward(const Model& m, const Tensor& x);

/// Pre-softmax outputs.
std::vector<double> logits(const Model& m, const Tensor& x);

/// d f(x)_class / dx by backpropagation, shaped like x.
Planes input_gradient(const Model& m, const ImageTensor& x, std::size_t class_index,
                      GradientTarget target = GradientTarget::Softmax);
Tensor input_gradient(const Model& m, const Tensor& x, std::size_t class_index,
                      GradientTarget target = GradientTarget::Softmax);

/// d f(x)_class / d params.
std::vector<double> param_gradient(const Model& m, const Tensor& x, std::size_t class_index,
                                   GradientTarget target = GradientTarget::Softmax);

/// Cross-entropy -log softmax(x)_label. Parameter gradients are added into
/// `param_grad` when non-null; the input gradient is written to
/// `input_grad` when non-null.
double cross_entropy(const Model& m, const Tensor& x, std::size_t label,
                     std::vector<double>* param_grad = nullptr, Tensor* input_grad = nullptr);

}  // namespace lowrank
