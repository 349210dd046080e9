#include "lowrank/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lowrank/error.hpp"
#include "lowrank/rng.hpp"

namespace lowrank {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string shape_text(const TensorShape& s) {
    return "(" + std::to_string(s.channels) + "," + std::to_string(s.rows) + "," + std::to_string(s.cols) + ")";
}

// Activations of one forward pass. acts[i] is the input of layer i; the
// final entry is the logits (the softmax layer itself is not recorded).
struct Tape {
    std::vector<Tensor> acts;
    std::vector<std::vector<std::size_t>> argmax;  // per layer, MaxPool only
};

void conv_forward(const Tensor& in, const LayerInfo& info, std::span<const double> params, Tensor& out) {
    const auto [ic_n, rows, cols] = in.shape;
    const std::size_t oc_n = info.output.channels;
    const double* w = params.data() + info.param_offset;
    const double* b = w + oc_n * ic_n * 9;
    out.shape = info.output;
    out.data.assign(info.output.size(), 0.0);
    for (std::size_t o = 0; o < oc_n; ++o) {
        double* plane = out.data.data() + o * rows * cols;
        std::fill(plane, plane + rows * cols, b[o]);
        for (std::size_t ic = 0; ic < ic_n; ++ic) {
            const double* src = in.data.data() + ic * rows * cols;
            const double* kern = w + (o * ic_n + ic) * 9;
            for (std::size_t dr = 0; dr < 3; ++dr) {
                for (std::size_t dc = 0; dc < 3; ++dc) {
                    const double k = kern[dr * 3 + dc];
                    // Output (r, c) reads input (r + dr - 1, c + dc - 1).
                    const std::size_t r0 = dr == 0 ? 1 : 0;
                    const std::size_t r1 = dr == 2 ? rows - 1 : rows;
                    const std::size_t c0 = dc == 0 ? 1 : 0;
                    const std::size_t c1 = dc == 2 ? cols - 1 : cols;
                    for (std::size_t r = r0; r < r1; ++r) {
                        const double* srow = src + (r + dr - 1) * cols;
                        double* orow = plane + r * cols;
                        for (std::size_t c = c0; c < c1; ++c) orow[c] += k * srow[c + dc - 1];
                    }
                }
            }
        }
    }
}

void conv_backward(const Tensor& in, const LayerInfo& info, std::span<const double> params,
                   const std::vector<double>& grad_out, double* grad_params, std::vector<double>* grad_in) {
    const auto [ic_n, rows, cols] = in.shape;
    const std::size_t oc_n = info.output.channels;
    const double* w = params.data() + info.param_offset;
    double* gw = grad_params ? grad_params + info.param_offset : nullptr;
    double* gb = gw ? gw + oc_n * ic_n * 9 : nullptr;
    if (grad_in) grad_in->assign(in.shape.size(), 0.0);

    for (std::size_t o = 0; o < oc_n; ++o) {
        const double* go = grad_out.data() + o * rows * cols;
        if (gb) {
            double s = 0.0;
            for (std::size_t i = 0; i < rows * cols; ++i) s += go[i];
            gb[o] += s;
        }
        for (std::size_t ic = 0; ic < ic_n; ++ic) {
            const double* src = in.data.data() + ic * rows * cols;
            double* gsrc = grad_in ? grad_in->data() + ic * rows * cols : nullptr;
            const double* kern = w + (o * ic_n + ic) * 9;
            double* gkern = gw ? gw + (o * ic_n + ic) * 9 : nullptr;
            for (std::size_t dr = 0; dr < 3; ++dr) {
                for (std::size_t dc = 0; dc < 3; ++dc) {
                    const double k = kern[dr * 3 + dc];
                    const std::size_t r0 = dr == 0 ? 1 : 0;
                    const std::size_t r1 = dr == 2 ? rows - 1 : rows;
                    const std::size_t c0 = dc == 0 ? 1 : 0;
                    const std::size_t c1 = dc == 2 ? cols - 1 : cols;
                    double acc = 0.0;
                    for (std::size_t r = r0; r < r1; ++r) {
                        const std::size_t base = (r + dr - 1) * cols + dc;
                        const double* grow = go + r * cols;
                        for (std::size_t c = c0; c < c1; ++c) {
                            acc += src[base + c - 1] * grow[c];
                            if (gsrc) gsrc[base + c - 1] += k * grow[c];
                        }
                    }
                    if (gkern) gkern[dr * 3 + dc] += acc;
                }
            }
        }
    }
}

void pool_forward(const Tensor& in, const LayerInfo& info, Tensor& out, std::vector<std::size_t>& argmax) {
    const auto [ch, rows, cols] = in.shape;
    const auto [och, orows, ocols] = info.output;
    (void)och;
    out.shape = info.output;
    out.data.assign(info.output.size(), 0.0);
    argmax.assign(info.output.size(), 0);
    for (std::size_t c = 0; c < ch; ++c) {
        for (std::size_t r = 0; r < orows; ++r) {
            for (std::size_t q = 0; q < ocols; ++q) {
                // Row-major scan of the window; strict > keeps the first maximum.
                std::size_t best = (c * rows + 2 * r) * cols + 2 * q;
                for (std::size_t dr = 0; dr < 2; ++dr) {
                    for (std::size_t dq = 0; dq < 2; ++dq) {
                        const std::size_t idx = (c * rows + 2 * r + dr) * cols + 2 * q + dq;
                        if (in.data[idx] > in.data[best]) best = idx;
                    }
                }
                const std::size_t o = (c * orows + r) * ocols + q;
                out.data[o] = in.data[best];
                argmax[o] = best;
            }
        }
    }
}

void dense_forward(const Tensor& in, const LayerInfo& info, std::span<const double> params, Tensor& out) {
    const std::size_t n_in = in.shape.size();
    const std::size_t n_out = info.output.channels;
    const double* w = params.data() + info.param_offset;
    const double* b = w + n_out * n_in;
    out.shape = info.output;
    out.data.resize(n_out);
    for (std::size_t o = 0; o < n_out; ++o) {
        double s = b[o];
        const double* row = w + o * n_in;
        for (std::size_t i = 0; i < n_in; ++i) s += row[i] * in.data[i];
        out.data[o] = s;
    }
}

void dense_backward(const Tensor& in, const LayerInfo& info, std::span<const double> params,
                    const std::vector<double>& grad_out, double* grad_params, std::vector<double>* grad_in) {
    const std::size_t n_in = in.shape.size();
    const std::size_t n_out = info.output.channels;
    const double* w = params.data() + info.param_offset;
    if (grad_in) grad_in->assign(n_in, 0.0);
    for (std::size_t o = 0; o < n_out; ++o) {
        const double g = grad_out[o];
        if (grad_params) {
            double* gw = grad_params + info.param_offset + o * n_in;
            for (std::size_t i = 0; i < n_in; ++i) gw[i] += g * in.data[i];
            grad_params[info.param_offset + n_out * n_in + o] += g;
        }
        if (grad_in && g != 0.0) {
            const double* row = w + o * n_in;
            for (std::size_t i = 0; i < n_in; ++i) (*grad_in)[i] += g * row[i];
        }
    }
}

Tape run_forward(const Model& m, const Tensor& x) {
    if (!(x.shape == m.input_shape())) {
        throw ShapeError("model expects input " + shape_text(m.input_shape()) + ", got " + shape_text(x.shape));
    }
    const auto& layers = m.layers();
    const auto& info = m.layer_info();
    Tape tape;
    tape.acts.reserve(layers.size());
    tape.argmax.resize(layers.size());
    tape.acts.push_back(x);
    for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
        const Tensor& in = tape.acts.back();
        Tensor out;
        std::visit(overloaded{
                       [&](const Conv&) { conv_forward(in, info[i], m.params(), out); },
                       [&](const Relu&) {
                           out = in;
                           for (double& v : out.data) v = std::max(v, 0.0);
                       },
                       [&](const MaxPool&) { pool_forward(in, info[i], out, tape.argmax[i]); },
                       [&](const Flatten&) { out = Tensor{info[i].output, in.data}; },
                       [&](const Dense&) { dense_forward(in, info[i], m.params(), out); },
                       [&](const Softmax&) { throw ShapeError("softmax must be the final layer"); },
                   },
                   layers[i]);
        tape.acts.push_back(std::move(out));
    }
    return tape;
}

// Propagates d(output)/d(logits) back through every layer.
void run_backward(const Model& m, const Tape& tape, std::vector<double> grad, double* grad_params,
                  std::vector<double>* grad_input) {
    const auto& layers = m.layers();
    const auto& info = m.layer_info();
    for (std::size_t li = layers.size() - 1; li-- > 0;) {
        const Tensor& in = tape.acts[li];
        const bool need_input = li > 0 || grad_input != nullptr;
        std::vector<double> next;
        std::visit(overloaded{
                       [&](const Conv&) {
                           conv_backward(in, info[li], m.params(), grad, grad_params, need_input ? &next : nullptr);
                       },
                       [&](const Relu&) {
                           next = std::move(grad);
                           for (std::size_t i = 0; i < next.size(); ++i)
                               if (!(in.data[i] > 0.0)) next[i] = 0.0;
                       },
                       [&](const MaxPool&) {
                           next.assign(in.shape.size(), 0.0);
                           const auto& am = tape.argmax[li];
                           for (std::size_t o = 0; o < am.size(); ++o) next[am[o]] += grad[o];
                       },
                       [&](const Flatten&) { next = std::move(grad); },
                       [&](const Dense&) {
                           dense_backward(in, info[li], m.params(), grad, grad_params, need_input ? &next : nullptr);
                       },
                       [&](const Softmax&) {},
                   },
                   layers[li]);
        grad = std::move(next);
    }
    if (grad_input) *grad_input = std::move(grad);
}

std::vector<double> softmax(const std::vector<double>& z) {
    const double mx = *std::max_element(z.begin(), z.end());
    std::vector<double> p(z.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) sum += (p[i] = std::exp(z[i] - mx));
    for (double& v : p) v /= sum;
    return p;
}

// d f(x)_class / d logits for the requested output.
std::vector<double> output_seed(const std::vector<double>& z, std::size_t class_index, GradientTarget target) {
    std::vector<double> seed(z.size(), 0.0);
    if (target == GradientTarget::Logit) {
        seed[class_index] = 1.0;
        return seed;
    }
    const auto p = softmax(z);
    for (std::size_t j = 0; j < z.size(); ++j) seed[j] = p[class_index] * ((j == class_index ? 1.0 : 0.0) - p[j]);
    return seed;
}

void require_class(const Model& m, std::size_t class_index) {
    if (class_index >= m.num_classes()) {
        throw RangeError("class index " + std::to_string(class_index) + " outside 0.." +
                         std::to_string(m.num_classes() - 1));
    }
}

}  // namespace

Tensor to_tensor(const Planes& planes) {
    require_uniform(planes);
    Tensor t{{planes.size(), planes.front().rows(), planes.front().cols()}, {}};
    t.data.reserve(t.shape.size());
    for (const Matrix& p : planes) t.data.insert(t.data.end(), p.data().begin(), p.data().end());
    return t;
}

Tensor to_tensor(const ImageTensor& image) { return to_tensor(image.planes()); }

Planes to_planes(const Tensor& t) {
    Planes out;
    const std::size_t plane = t.shape.rows * t.shape.cols;
    for (std::size_t c = 0; c < t.shape.channels; ++c) {
        out.emplace_back(t.shape.rows, t.shape.cols,
                         std::vector<double>(t.data.begin() + static_cast<std::ptrdiff_t>(c * plane),
                                             t.data.begin() + static_cast<std::ptrdiff_t>((c + 1) * plane)));
    }
    return out;
}

Model::Model(TensorShape input, std::vector<Layer> layers, std::size_t num_classes)
    : input_(input), layers_(std::move(layers)), num_classes_(num_classes) {
    if (input_.size() == 0) throw ShapeError("model input shape must be non-empty");
    if (num_classes_ < 2) throw ConfigError("a classifier needs at least 2 classes");
    if (layers_.empty() || !std::holds_alternative<Softmax>(layers_.back())) {
        throw ConfigError("model must end with a Softmax layer");
    }

    TensorShape shape = input_;
    std::size_t offset = 0;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        LayerInfo li{shape, shape, offset, 0};
        std::visit(overloaded{
                       [&](const Conv& c) {
                           if (c.out_channels == 0) throw ConfigError("Conv needs at least one output channel");
                           li.output = {c.out_channels, shape.rows, shape.cols};
                           li.param_count = c.out_channels * shape.channels * 9 + c.out_channels;
                       },
                       [&](const Relu&) {},
                       [&](const MaxPool&) {
                           if (shape.rows < 2 || shape.cols < 2)
                               throw ShapeError("MaxPool input " + shape_text(shape) + " is smaller than 2x2");
                           li.output = {shape.channels, shape.rows / 2, shape.cols / 2};
                       },
                       [&](const Flatten&) { li.output = {shape.size(), 1, 1}; },
                       [&](const Dense& d) {
                           if (shape.rows != 1 || shape.cols != 1)
                               throw ShapeError("Dense needs a flattened input, got " + shape_text(shape));
                           if (d.out_features == 0) throw ConfigError("Dense needs at least one output");
                           li.output = {d.out_features, 1, 1};
                           li.param_count = d.out_features * shape.channels + d.out_features;
                       },
                       [&](const Softmax&) {
                           if (i + 1 != layers_.size()) throw ConfigError("Softmax must be the final layer");
                           if (shape.size() != num_classes_ || shape.rows != 1 || shape.cols != 1)
                               throw ShapeError("softmax input " + shape_text(shape) + " does not match " +
                                                std::to_string(num_classes_) + " classes");
                       },
                   },
                   layers_[i]);
        offset += li.param_count;
        shape = li.output;
        info_.push_back(li);
    }
    params_.assign(offset, 0.0);
}

Model Model::reference(std::size_t width, std::size_t height, std::size_t channels, std::size_t num_classes) {
    return Model({channels, width, height},
                 {Conv{8}, Relu{}, MaxPool{}, Conv{16}, Relu{}, MaxPool{}, Flatten{}, Dense{num_classes}, Softmax{}},
                 num_classes);
}

void Model::set_params(std::vector<double> params) {
    if (params.size() != params_.size()) {
        throw ShapeError("parameter vector has " + std::to_string(params.size()) + " entries, model needs " +
                         std::to_string(params_.size()));
    }
    params_ = std::move(params);
}

void Model::initialize(std::uint64_t seed) {
    Rng rng(seed);
    std::fill(params_.begin(), params_.end(), 0.0);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const LayerInfo& li = info_[i];
        std::size_t fan_in = 0;
        std::size_t weights = 0;
        if (const auto* c = std::get_if<Conv>(&layers_[i])) {
            fan_in = li.input.channels * 9;
            weights = c->out_channels * fan_in;
        } else if (const auto* d = std::get_if<Dense>(&layers_[i])) {
            fan_in = li.input.size();
            weights = d->out_features * fan_in;
        }
        if (weights == 0) continue;
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (std::size_t k = 0; k < weights; ++k) params_[li.param_offset + k] = rng.uniform(-bound, bound);
    }
}

std::vector<double> logits(const Model& m, const Tensor& x) { return run_forward(m, x).acts.back().data; }

Prediction forward(const Model& m, const Tensor& x) {
    Prediction p{softmax(logits(m, x)), 0};
    p.top_class = static_cast<std::size_t>(std::max_element(p.probs.begin(), p.probs.end()) - p.probs.begin());
    for (double v : p.probs) {
        if (!std::isfinite(v)) throw NumericError("forward produced a non-finite probability");
    }
    return p;
}

Prediction forward(const Model& m, const ImageTensor& x) { return forward(m, to_tensor(x)); }

Tensor input_gradient(const Model& m, const Tensor& x, std::size_t class_index, GradientTarget target) {
    require_class(m, class_index);
    const Tape tape = run_forward(m, x);
    Tensor g{x.shape, {}};
    run_backward(m, tape, output_seed(tape.acts.back().data, class_index, target), nullptr, &g.data);
    return g;
}

Planes input_gradient(const Model& m, const ImageTensor& x, std::size_t class_index, GradientTarget target) {
    return to_planes(input_gradient(m, to_tensor(x), class_index, target));
}

std::vector<double> param_gradient(const Model& m, const Tensor& x, std::size_t class_index, GradientTarget target) {
    require_class(m, class_index);
    const Tape tape = run_forward(m, x);
    std::vector<double> g(m.params().size(), 0.0);
    run_backward(m, tape, output_seed(tape.acts.back().data, class_index, target), g.data(), nullptr);
    return g;
}

double cross_entropy(const Model& m, const Tensor& x, std::size_t label, std::vector<double>* param_grad,
                     Tensor* input_grad) {
    require_class(m, label);
    const Tape tape = run_forward(m, x);
    const auto& z = tape.acts.back().data;
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - mx);
    const double loss = mx + std::log(sum) - z[label];

    if (param_grad || input_grad) {
        if (param_grad && param_grad->size() != m.params().size()) {
            throw ShapeError("gradient buffer does not match parameter count");
        }
        std::vector<double> seed = softmax(z);
        seed[label] -= 1.0;
        std::vector<double> gi;
        run_backward(m, tape, std::move(seed), param_grad ? param_grad->data() : nullptr,
                     input_grad ? &gi : nullptr);
        if (input_grad) *input_grad = Tensor{x.shape, std::move(gi)};
    }
    return loss;
}

}  // namespace lowrank
