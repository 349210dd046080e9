#pragma once

// Finite-difference checks of the model's analytic gradients, shared by the
// unit tests and the acceptance suite.

#include <string>
#include <vector>

#include "lowrank/model.hpp"
#include "lowrank/rng.hpp"
#include "oracles.hpp"

namespace gradcheck {

using namespace lowrank;

struct Result {
    std::string name;
    std::size_t probes = 0;
    double max_relative_error = 0.0;
};

inline double output_of(const Model& m, const Tensor& x, std::size_t cls, GradientTarget target) {
    if (target == GradientTarget::Logit) return logits(m, x)[cls];
    return forward(m, x).probs[cls];
}

inline Tensor random_input(const Model& m, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor x{m.input_shape(), std::vector<double>(m.input_shape().size())};
    for (double& v : x.data) v = rng.uniform(lo, hi);
    return x;
}

inline Result input_gradient(const std::string& name, const Model& m, const Tensor& x, std::size_t cls,
                             GradientTarget target, std::size_t probes, Rng& rng) {
    const Tensor analytic = lowrank::input_gradient(m, x, cls, target);
    auto f = [&](const std::vector<double>& data) { return output_of(m, Tensor{x.shape, data}, cls, target); };
    Result r{name, probes, 0.0};
    for (std::size_t p = 0; p < probes; ++p) {
        const std::size_t i = rng.index(x.data.size());
        const double fd = oracle::central_difference(f, x.data, i);
        r.max_relative_error = std::max(r.max_relative_error, oracle::relative_error(fd, analytic.data[i]));
    }
    return r;
}

/// Probes parameters belonging to layer `layer` only.
inline Result param_gradient(const std::string& name, const Model& m, const Tensor& x, std::size_t cls,
                             GradientTarget target, std::size_t layer, std::size_t probes, Rng& rng) {
    const std::vector<double> analytic = lowrank::param_gradient(m, x, cls, target);
    const LayerInfo& info = m.layer_info().at(layer);
    Model probe = m;
    auto f = [&](const std::vector<double>& params) {
        probe.set_params(params);
        return output_of(probe, x, cls, target);
    };
    const std::vector<double> base(m.params().begin(), m.params().end());
    Result r{name, probes, 0.0};
    for (std::size_t p = 0; p < probes; ++p) {
        const std::size_t i = info.param_offset + rng.index(info.param_count);
        const double fd = oracle::central_difference(f, base, i);
        r.max_relative_error = std::max(r.max_relative_error, oracle::relative_error(fd, analytic[i]));
    }
    return r;
}

/// Small models that isolate each layer type in front of a Dense head.
inline std::vector<std::pair<std::string, Model>> layer_models(std::size_t classes = 4) {
    const TensorShape in{2, 6, 8};
    std::vector<std::pair<std::string, Model>> models;
    models.emplace_back("conv", Model(in, {Conv{3}, Flatten{}, Dense{classes}, Softmax{}}, classes));
    models.emplace_back("relu", Model(in, {Relu{}, Flatten{}, Dense{classes}, Softmax{}}, classes));
    models.emplace_back("maxpool", Model(in, {MaxPool{}, Flatten{}, Dense{classes}, Softmax{}}, classes));
    models.emplace_back("flatten+dense+softmax", Model(in, {Flatten{}, Dense{classes}, Softmax{}}, classes));
    models.emplace_back("dense-hidden", Model(in, {Flatten{}, Dense{5}, Relu{}, Dense{classes}, Softmax{}}, classes));
    models.emplace_back("reference", Model::reference(8, 8, 1, classes));
    return models;
}

/// Every gradient check the acceptance criterion asks for: input gradients
/// through each layer-isolating model, parameter gradients of every
/// parametric layer, under both softmax and logit targets.
inline std::vector<Result> run_all(std::size_t probes, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Result> results;
    for (auto& [name, model] : layer_models()) {
        model.initialize(rng.next());
        // Jitter everything so biases start away from zero.
        for (double& v : model.params()) v += rng.uniform(-0.1, 0.1);
        for (GradientTarget target : {GradientTarget::Softmax, GradientTarget::Logit}) {
            const std::string suffix = target == GradientTarget::Softmax ? "/softmax" : "/logit";
            const Tensor x = random_input(model, rng);
            const std::size_t cls = rng.index(model.num_classes());
            results.push_back(input_gradient(name + "/input" + suffix, model, x, cls, target, probes, rng));
            for (std::size_t li = 0; li < model.layers().size(); ++li) {
                if (model.layer_info()[li].param_count == 0) continue;
                results.push_back(param_gradient(name + "/params[" + std::to_string(li) + "]" + suffix, model, x,
                                                 cls, target, li, probes, rng));
            }
        }
    }
    return results;
}

}  // namespace gradcheck
