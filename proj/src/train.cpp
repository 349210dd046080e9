#include "lowrank/train.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "lowrank/error.hpp"
#include "lowrank/parallel.hpp"
#include "lowrank/rng.hpp"

namespace lowrank {

namespace {

void require_labels_fit(const Model& m, const LabeledDataset& data) {
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data[i].label >= m.num_classes()) {
            throw RangeError("label " + std::to_string(data[i].label) + " of sample " + std::to_string(i) +
                             " exceeds the model's " + std::to_string(m.num_classes()) + " classes");
        }
    }
}

}  // namespace

void TrainConfig::validate() const {
    if (!(lr >= 0.0)) throw ConfigError("learning rate must be non-negative");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
    if (!(lr_drop_factor > 0.0)) throw ConfigError("lr drop factor must be positive");
    if (batch_size == 0) throw ConfigError("batch size must be positive");
}

double TrainConfig::lr_at(std::size_t epoch) const {
    double rate = lr;
    for (std::size_t drop : lr_drop_epochs)
        if (drop < epoch) rate *= lr_drop_factor;
    return rate;
}

TrainResult train(Model model, const LabeledDataset& data, const TrainConfig& cfg, const LabeledDataset* test) {
    cfg.validate();
    if (data.empty()) throw ConfigError("cannot train on an empty dataset");
    require_labels_fit(model, data);

    std::vector<Tensor> inputs;
    inputs.reserve(data.size());
    for (const Sample& s : data.samples()) inputs.push_back(to_tensor(s.image));

    Rng rng(cfg.seed);
    const std::size_t n_params = model.params().size();
    std::vector<double> velocity(n_params, 0.0);
    std::vector<double> grad(n_params);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    TrainResult result{std::move(model), {}};
    Model& m = result.model;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const double lr = cfg.lr_at(epoch);
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);

        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t b = start; b < stop; ++b) {
                loss_sum += cross_entropy(m, inputs[order[b]], data[order[b]].label, &grad);
            }
            const double inv = 1.0 / static_cast<double>(stop - start);
            auto params = m.params();
            for (std::size_t p = 0; p < n_params; ++p) {
                velocity[p] = cfg.momentum * velocity[p] - lr * (grad[p] * inv + cfg.weight_decay * params[p]);
                params[p] += velocity[p];
            }
        }
        if (!std::all_of(m.params().begin(), m.params().end(), [](double v) { return std::isfinite(v); })) {
            throw NumericError("training diverged in epoch " + std::to_string(epoch));
        }

        EpochMetrics metrics{epoch, lr, loss_sum / static_cast<double>(data.size()), std::nullopt};
        if (test != nullptr && !test->empty()) metrics.test_accuracy = evaluate(m, *test);
        result.history.push_back(metrics);
    }
    return result;
}

std::vector<std::size_t> predict_all(const Model& m, const LabeledDataset& data) {
    std::vector<std::size_t> preds(data.size());
    parallel_for(data.size(), [&](std::size_t i) { preds[i] = forward(m, data[i].image).top_class; });
    return preds;
}

double evaluate(const Model& m, const LabeledDataset& data) {
    if (data.empty()) throw ConfigError("cannot evaluate on an empty dataset");
    const auto preds = predict_all(m, data);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == data[i].label ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

// ---- checkpoints ------------------------------------------------------------

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& b) : b_(b) {}

    std::uint64_t get(int width) {
        if (pos_ + width > b_.size()) throw ParseError("checkpoint truncated", pos_);
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i) v |= std::uint64_t{b_[pos_ + i]} << (8 * i);
        pos_ += width;
        return v;
    }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    std::size_t offset() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return b_.size() - pos_; }

private:
    const std::vector<std::uint8_t>& b_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Model& m) {
    std::vector<std::uint8_t> out{'R', 'S', 'C', 'K'};
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<std::uint32_t>(m.input_shape().channels));
    put_u32(out, static_cast<std::uint32_t>(m.input_shape().rows));
    put_u32(out, static_cast<std::uint32_t>(m.input_shape().cols));
    put_u32(out, static_cast<std::uint32_t>(m.num_classes()));
    put_u32(out, static_cast<std::uint32_t>(m.layers().size()));
    for (const Layer& layer : m.layers()) {
        std::uint32_t width = 0;
        if (const auto* c = std::get_if<Conv>(&layer)) width = static_cast<std::uint32_t>(c->out_channels);
        if (const auto* d = std::get_if<Dense>(&layer)) width = static_cast<std::uint32_t>(d->out_features);
        put_u32(out, static_cast<std::uint32_t>(layer.index()));
        put_u32(out, width);
    }
    put_u64(out, m.params().size());
    for (double v : m.params()) put_u64(out, std::bit_cast<std::uint64_t>(v));
    return out;
}

Model decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4 || !std::equal(bytes.begin(), bytes.begin() + 4, "RSCK")) {
        throw ParseError("checkpoint: bad magic", 0);
    }
    Reader r(bytes);
    (void)r.u32();
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw ParseError("checkpoint: version " + std::to_string(version) + " not supported (expected " +
                             std::to_string(kCheckpointVersion) + ")",
                         4);
    }
    TensorShape input{};
    input.channels = r.u32();
    input.rows = r.u32();
    input.cols = r.u32();
    const std::size_t classes = r.u32();
    const std::size_t n_layers = r.u32();
    std::vector<Layer> layers;
    for (std::size_t i = 0; i < n_layers; ++i) {
        const std::size_t at = r.offset();
        const std::uint32_t kind = r.u32();
        const std::uint32_t width = r.u32();
        switch (kind) {
            case 0: layers.emplace_back(Conv{width}); break;
            case 1: layers.emplace_back(Relu{}); break;
            case 2: layers.emplace_back(MaxPool{}); break;
            case 3: layers.emplace_back(Flatten{}); break;
            case 4: layers.emplace_back(Dense{width}); break;
            case 5: layers.emplace_back(Softmax{}); break;
            default: throw ParseError("checkpoint: unknown layer kind " + std::to_string(kind), at);
        }
    }
    Model m(input, std::move(layers), classes);
    const std::size_t count_at = r.offset();
    const std::uint64_t count = r.u64();
    if (count != m.params().size()) throw ParseError("checkpoint: parameter count does not match layers", count_at);
    if (r.remaining() != count * 8) throw ParseError("checkpoint: parameter payload length mismatch", r.offset());
    std::vector<double> params(count);
    for (double& v : params) v = std::bit_cast<double>(r.u64());
    m.set_params(std::move(params));
    return m;
}

void save_checkpoint(const Model& m, const std::filesystem::path& path) {
    write_bytes_atomic(path, encode_checkpoint(m));
}

Model load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_bytes(path)); }

}  // namespace lowrank
