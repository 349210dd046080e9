#include "lowrank/attack.hpp"

#include <algorithm>
#include <cmath>

#include "lowrank/error.hpp"
#include "lowrank/parallel.hpp"
#include "lowrank/rng.hpp"

namespace lowrank {

Norm parse_norm(const std::string& text) {
    if (text == "linf" || text == "Linf") return Norm::Linf;
    if (text == "l2" || text == "L2") return Norm::L2;
    throw ConfigError("unknown norm '" + text + "' (expected linf or l2)");
}

std::string to_string(Norm norm) { return norm == Norm::Linf ? "linf" : "l2"; }

void AttackConfig::validate() const {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ConfigError("epsilon must be finite and non-negative");
    if (step_size && steps > 0 && !(*step_size > 0.0)) throw ConfigError("step size must be positive");
}

double AttackConfig::effective_step_size() const {
    if (step_size) return *step_size;
    return steps == 0 ? 0.0 : 2.5 * epsilon / static_cast<double>(steps);
}

namespace {

double l2_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double e : v) s += e * e;
    return std::sqrt(s);
}

// Projects cur onto the ball around x, then into the unit box.
void project(std::vector<double>& cur, const std::vector<double>& x, Norm norm, double eps) {
    if (norm == Norm::Linf) {
        for (std::size_t i = 0; i < cur.size(); ++i) cur[i] = x[i] + std::clamp(cur[i] - x[i], -eps, eps);
    } else {
        double s = 0.0;
        for (std::size_t i = 0; i < cur.size(); ++i) s += (cur[i] - x[i]) * (cur[i] - x[i]);
        const double len = std::sqrt(s);
        if (len > eps) {
            const double scale = eps / len;
            for (std::size_t i = 0; i < cur.size(); ++i) cur[i] = x[i] + (cur[i] - x[i]) * scale;
        }
    }
    for (double& v : cur) v = std::clamp(v, 0.0, 1.0);
}

void random_start(std::vector<double>& cur, const std::vector<double>& x, Norm norm, double eps, Rng& rng) {
    if (norm == Norm::Linf) {
        for (std::size_t i = 0; i < cur.size(); ++i) cur[i] = x[i] + rng.uniform(-eps, eps);
    } else {
        std::vector<double> dir(cur.size());
        for (double& d : dir) d = rng.normal();
        const double len = l2_norm(dir);
        const double radius = eps * std::pow(rng.uniform(), 1.0 / static_cast<double>(cur.size()));
        for (std::size_t i = 0; i < cur.size(); ++i) cur[i] = x[i] + (len > 0.0 ? dir[i] / len * radius : 0.0);
    }
    project(cur, x, norm, eps);
}

ImageTensor attack_with(const Model& m, const ImageTensor& x, std::size_t label, std::optional<std::size_t> target,
                        const AttackConfig& cfg, Rng& rng) {
    if (label >= m.num_classes()) throw RangeError("label " + std::to_string(label) + " out of range");
    if (cfg.targeted != target.has_value()) {
        throw ConfigError(cfg.targeted ? "targeted attack needs a target class" : "target given for an untargeted attack");
    }
    if (target) {
        if (*target == label) throw ConfigError("target class equals the true label");
        if (*target >= m.num_classes()) throw RangeError("target " + std::to_string(*target) + " out of range");
    }
    if (cfg.epsilon == 0.0) return x;

    const Tensor clean = to_tensor(x);
    Tensor cur = clean;
    if (cfg.random_start) random_start(cur.data, clean.data, cfg.norm, cfg.epsilon, rng);

    const double step = cfg.effective_step_size();
    const std::size_t loss_class = target ? *target : label;
    const double direction = target ? -1.0 : 1.0;
    Tensor grad;
    for (std::size_t it = 0; it < cfg.steps; ++it) {
        (void)cross_entropy(m, cur, loss_class, nullptr, &grad);
        if (cfg.norm == Norm::Linf) {
            for (std::size_t i = 0; i < cur.data.size(); ++i) {
                const double g = grad.data[i];
                const double sign = g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0);
                cur.data[i] += direction * step * sign;
            }
        } else {
            const double len = l2_norm(grad.data);
            if (len > 0.0) {
                for (std::size_t i = 0; i < cur.data.size(); ++i) cur.data[i] += direction * step * grad.data[i] / len;
            }
        }
        project(cur.data, clean.data, cfg.norm, cfg.epsilon);
    }
    return ImageTensor(to_planes(cur), x.transposed());
}

std::optional<std::size_t> draw_target(std::size_t label, std::size_t classes, Rng& rng) {
    if (classes < 2) throw ConfigError("targeted attacks need at least two classes");
    std::size_t t = rng.index(classes - 1);
    if (t >= label) ++t;
    return t;
}

}  // namespace

ImageTensor pgd_attack(const Model& m, const ImageTensor& x, std::size_t label, std::optional<std::size_t> target,
                       const AttackConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    return attack_with(m, x, label, target, cfg, rng);
}

double linf_distance(const ImageTensor& a, const ImageTensor& b) { return max_abs_diff(a.planes(), b.planes()); }

double l2_distance(const ImageTensor& a, const ImageTensor& b) {
    if (a.channels() != b.channels()) throw ShapeError("l2_distance: channel counts differ");
    double s = 0.0;
    for (std::size_t c = 0; c < a.channels(); ++c) {
        const double f = frobenius_norm(a.channel(c) - b.channel(c));
        s += f * f;
    }
    return std::sqrt(s);
}

AttackReport evaluate_attack(const Model& m, const LabeledDataset& data, const AttackConfig& cfg) {
    cfg.validate();
    if (data.empty()) throw ConfigError("cannot attack an empty dataset");
    std::vector<AttackRecord> records(data.size());
    parallel_for(data.size(), [&](std::size_t i) {
        const Sample& s = data[i];
        Rng rng = Rng::for_stream(cfg.seed, i);
        const auto target = cfg.targeted ? draw_target(s.label, m.num_classes(), rng) : std::nullopt;
        const ImageTensor adv = attack_with(m, s.image, s.label, target, cfg, rng);
        AttackRecord& r = records[i];
        r.sample_id = i;
        r.label = s.label;
        r.target = target;
        r.pred_clean = forward(m, s.image).top_class;
        r.pred_adv = forward(m, adv).top_class;
        r.linf = linf_distance(adv, s.image);
        r.l2 = l2_distance(adv, s.image);
        r.success = target ? r.pred_adv == *target : r.pred_adv != s.label;
        r.recovered = r.pred_adv == s.label;
    });

    AttackReport report{0.0, 0.0, 0.0, 0.0, data.size(), {}};
    for (const AttackRecord& r : records) {
        report.attack_success_rate += r.success ? 1.0 : 0.0;
        report.recovery_rate += r.recovered ? 1.0 : 0.0;
        report.mean_linf += r.linf;
        report.mean_l2 += r.l2;
    }
    const double n = static_cast<double>(data.size());
    report.attack_success_rate /= n;
    report.recovery_rate /= n;
    report.mean_linf /= n;
    report.mean_l2 /= n;
    report.records = std::move(records);
    return report;
}

LabeledDataset adversarial_dataset(const Model& m, const LabeledDataset& data, const AttackConfig& cfg) {
    cfg.validate();
    std::vector<Sample> out(data.size(), Sample{ImageTensor::zeros(1, 1, 1), 0});
    parallel_for(data.size(), [&](std::size_t i) {
        Rng rng = Rng::for_stream(cfg.seed, i);
        const Sample& s = data[i];
        const auto target = cfg.targeted ? draw_target(s.label, m.num_classes(), rng) : std::nullopt;
        out[i] = Sample{attack_with(m, s.image, s.label, target, cfg, rng), s.label};
    });
    return LabeledDataset(data.name() + "-adv", data.num_classes(), std::move(out));
}

}  // namespace lowrank
