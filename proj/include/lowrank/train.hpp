#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "lowrank/dataset.hpp"
#include "lowrank/model.hpp"

namespace lowrank {

/// SGD with momentum and L2 weight decay; lr is multiplied by
/// `lr_drop_factor` after each (1-based) epoch listed in `lr_drop_epochs`.
struct TrainConfig {
    std::size_t epochs = 10;
    double lr = 0.1;
    double momentum = 0.9;
    double weight_decay = 0.0005;
    std::vector<std::size_t> lr_drop_epochs;
    double lr_drop_factor = 0.1;
    std::size_t batch_size = 32;
    std::uint64_t seed = 42;

    void validate() const;
    /// Learning rate used during 1-based epoch `epoch`.
    double lr_at(std::size_t epoch) const;
};

struct EpochMetrics {
    std::size_t epoch;
    double lr;
    double train_loss;
    std::optional<double> test_accuracy;
};

struct TrainResult {
    Model model;
    std::vector<EpochMetrics> history;
};

/// Mini-batch training on mean cross-entropy. Shuffling uses cfg.seed;
/// the model is trained from whatever parameters it carries.
TrainResult train(Model model, const LabeledDataset& data, const TrainConfig& cfg,
                  const LabeledDataset* test = nullptr);

/// Fraction of samples whose top class equals the label.
double evaluate(const Model& m, const LabeledDataset& data);

/// Predicted class for every sample, in order.
std::vector<std::size_t> predict_all(const Model& m, const LabeledDataset& data);

/// Checkpoint layout (all little-endian): "RSCK", u32 version, u32 input
/// channels/rows/cols, u32 num_classes, u32 layer count, then per layer a
/// u32 kind code (0 Conv, 1 ReLU, 2 MaxPool, 3 Flatten, 4 Dense, 5 Softmax)
/// and a u32 width field (out channels/features, else 0), then u64 parameter
/// count and the float64 parameters.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Model& m);
Model decode_checkpoint(const std::vector<std::uint8_t>& bytes);
void save_checkpoint(const Model& m, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace lowrank
