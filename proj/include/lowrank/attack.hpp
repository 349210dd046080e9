#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lowrank/dataset.hpp"
#include "lowrank/model.hpp"

namespace lowrank {

enum class Norm { Linf, L2 };

Norm parse_norm(const std::string& text);
std::string to_string(Norm norm);

struct AttackConfig {
    Norm norm = Norm::Linf;
    double epsilon = 8.0 / 255.0;
    std::size_t steps = 20;
    /// Defaults to 2.5 * epsilon / steps.
    std::optional<double> step_size;
    bool targeted = false;
    bool random_start = true;
    std::uint64_t seed = 42;

    void validate() const;
    double effective_step_size() const;
};

/// Projected gradient descent on the cross-entropy loss.
///
/// Untargeted attacks ascend the loss of `label`; targeted ones descend the
/// loss of `target`. Each iterate is projected onto the epsilon-ball around
/// x and clamped to [0,1]. The random start draws from Rng(cfg.seed).
ImageTensor pgd_attack(const Model& m, const ImageTensor& x, std::size_t label, std::optional<std::size_t> target,
                       const AttackConfig& cfg);

struct AttackRecord {
    std::size_t sample_id;
    std::size_t label;
    std::optional<std::size_t> target;
    std::size_t pred_clean;
    std::size_t pred_adv;
    double linf;
    double l2;
    bool success;
    bool recovered;
};

struct AttackReport {
    double attack_success_rate;
    double recovery_rate;
    double mean_linf;
    double mean_l2;
    std::size_t n_samples;
    std::vector<AttackRecord> records;
};

/// Attacks every sample. Sample i draws its target (uniform over classes
/// other than its label) and its random start from Rng::for_stream(seed, i).
/// Success means hitting the target when targeted, leaving the label
/// otherwise; recovery means the adversarial prediction is still the label.
AttackReport evaluate_attack(const Model& m, const LabeledDataset& data, const AttackConfig& cfg);

/// Adversarial copies of every sample with their original labels, suitable
/// as a training batch.
LabeledDataset adversarial_dataset(const Model& m, const LabeledDataset& data, const AttackConfig& cfg);

double linf_distance(const ImageTensor& a, const ImageTensor& b);
double l2_distance(const ImageTensor& a, const ImageTensor& b);

}  // namespace lowrank
