#include <charconv>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lowrank/attack.hpp"
#include "lowrank/csv.hpp"
#include "lowrank/dataset.hpp"
#include "lowrank/error.hpp"
#include "lowrank/fourier.hpp"
#include "lowrank/parallel.hpp"
#include "lowrank/saliency.hpp"
#include "lowrank/spectrum.hpp"
#include "lowrank/svd.hpp"
#include "lowrank/train.hpp"

namespace fs = std::filesystem;
using namespace lowrank;

namespace {

constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;

struct Global {
    std::uint64_t seed = 42;
    std::size_t threads = 0;
};

/// Accepts "0.03" or "8/255".
double parse_amount(const std::string& text) {
    auto number = [&text](std::string_view s) {
        double v = 0.0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
            throw ConfigError("cannot parse number '" + text + "'");
        }
        return v;
    };
    const auto slash = text.find('/');
    if (slash == std::string::npos) return number(text);
    const double den = number(std::string_view(text).substr(slash + 1));
    if (den == 0.0) throw ConfigError("zero denominator in '" + text + "'");
    return number(std::string_view(text).substr(0, slash)) / den;
}

std::string flag(bool b) { return b ? "1" : "0"; }

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
    const std::string text = j.dump(2) + "\n";
    write_bytes_atomic(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

// ---- truncate ---------------------------------------------------------------

struct TruncateOpts {
    std::string input, output, manifest, out;
    std::size_t rank = 0;
    bool reverse = false;
};

void cmd_truncate(const TruncateOpts& o) {
    if (!o.input.empty()) {
        if (o.output.empty()) throw ConfigError("truncate: --input needs --output");
        const ImageTensor x = read_ppm(o.input);
        if (o.rank > x.width()) {
            throw RangeError("rank " + std::to_string(o.rank) + " exceeds image width " + std::to_string(x.width()));
        }
        write_ppm(image_rank_k(x, o.rank, o.reverse), o.output);
        std::cout << "wrote " << o.output << "\n";
        return;
    }
    if (o.manifest.empty() || o.out.empty()) throw ConfigError("truncate: give --input/--output or --manifest/--out");
    const LabeledDataset d = load_cache(o.manifest);
    save_cache(truncate_dataset(d, o.rank, o.reverse), o.out);
    std::cout << "wrote " << d.size() << " samples to " << o.out << "\n";
}

// ---- synth ------------------------------------------------------------------

struct SynthOpts {
    std::string out;
    SyntheticSpec spec;
    std::size_t test_count = 0;
};

void cmd_synth(SynthOpts o, const Global& g) {
    o.spec.seed = g.seed;
    const LabeledDataset d = make_synthetic(o.spec);
    if (o.test_count == 0) {
        save_cache(d, o.out);
        std::cout << "wrote " << d.size() << " samples to " << o.out << "\n";
        return;
    }
    if (o.test_count >= d.size()) throw ConfigError("synth: --test-count must be smaller than the dataset");
    auto [train, test] = split_dataset(d, d.size() - o.test_count);
    save_cache(train, fs::path(o.out) / "train");
    save_cache(test, fs::path(o.out) / "test");
    std::cout << "wrote " << train.size() << " train and " << test.size() << " test samples to " << o.out << "\n";
}

// ---- train ------------------------------------------------------------------

struct TrainOpts {
    std::string manifest, test_manifest, out;
    TrainConfig cfg;
    std::size_t classes = 0;
    std::optional<std::size_t> truncate_rank;
    bool reverse = false;
};

void cmd_train(TrainOpts o, const Global& g) {
    o.cfg.seed = g.seed;
    o.cfg.validate();
    LabeledDataset data = load_cache(o.manifest, o.classes);
    std::optional<LabeledDataset> test;
    if (!o.test_manifest.empty()) test = load_cache(o.test_manifest, data.num_classes());
    if (o.truncate_rank) data = truncate_dataset(data, *o.truncate_rank, o.reverse);
    if (data.empty()) throw ConfigError("train: dataset is empty");

    const ImageTensor& first = data[0].image;
    Model model = Model::reference(first.width(), first.height(), first.channels(), data.num_classes());
    model.initialize(g.seed);
    const TrainResult r = train(model, data, o.cfg, test ? &*test : nullptr);

    ensure_dir(o.out);
    save_checkpoint(r.model, fs::path(o.out) / "model.rsck");
    std::vector<CsvRow> rows;
    for (const EpochMetrics& e : r.history) {
        rows.push_back({std::to_string(e.epoch), format_number(e.lr), format_number(e.train_loss),
                        e.test_accuracy ? format_number(*e.test_accuracy) : ""});
    }
    write_csv(fs::path(o.out) / "metrics.csv", {"epoch", "lr", "train_loss", "test_accuracy"}, rows);
    if (!r.history.empty()) {
        const EpochMetrics& last = r.history.back();
        std::cout << "epoch " << last.epoch << " loss " << last.train_loss;
        if (last.test_accuracy) std::cout << " test_accuracy " << *last.test_accuracy;
        std::cout << "\n";
    }
}

// ---- spectrum ---------------------------------------------------------------

struct SpectrumOpts {
    std::string model, manifest, out, mode = "accuracy", model_id = "model";
};

void cmd_spectrum(const SpectrumOpts& o) {
    const SpectrumMode mode = parse_spectrum_mode(o.mode);
    const Model m = load_checkpoint(o.model);
    const LabeledDataset d = load_cache(o.manifest, m.num_classes());
    const RankSpectrum s = compute_spectrum(m, d, mode, o.model_id);
    std::vector<CsvRow> rows;
    for (std::size_t k = 0; k < s.values.size(); ++k) {
        rows.push_back({std::to_string(k), format_number(s.values[k]), to_string(s.mode), s.model_id});
    }
    ensure_dir(o.out);
    write_csv(fs::path(o.out) / "spectrum.csv", {"rank", "value", "mode", "model_id"}, rows);
    std::cout << "rank 0: " << s.values.front() << "  rank " << s.width() << ": " << s.values.back() << "\n";
}

// ---- rig --------------------------------------------------------------------

struct RigOpts {
    std::string model, input, manifest, out, method = "rig", target = "softmax";
    std::size_t index = 0;
    std::optional<std::size_t> class_index;
};

void cmd_rig(const RigOpts& o) {
    const Model m = load_checkpoint(o.model);
    ImageTensor x = ImageTensor::zeros(1, 1, 1);
    if (!o.input.empty()) {
        x = read_ppm(o.input);
    } else if (!o.manifest.empty()) {
        const LabeledDataset d = load_cache(o.manifest, m.num_classes());
        if (o.index >= d.size()) throw RangeError("--index " + std::to_string(o.index) + " past end of dataset");
        x = d[o.index].image;
    } else {
        throw ConfigError("rig: give --input or --manifest");
    }
    if (o.target != "softmax" && o.target != "logit") throw ConfigError("rig: --target must be softmax or logit");
    const GradientTarget target = o.target == "logit" ? GradientTarget::Logit : GradientTarget::Softmax;

    if (o.method != "rig" && o.method != "vanilla") throw ConfigError("rig: --method must be rig or vanilla");
    const SaliencyMap map =
        o.method == "rig" ? rig(m, x, o.class_index, target)
                          : vanilla_gradient(m, x, o.class_index ? *o.class_index : forward(m, x).top_class, target);
    ensure_dir(o.out);
    write_saliency_pgm(map, fs::path(o.out) / "saliency.pgm");
    write_saliency_raw(map, fs::path(o.out) / "saliency.raw");
    std::cout << o.method << " map for class " << map.class_index << " written to " << o.out << "\n";
}

// ---- attack -----------------------------------------------------------------

struct AttackOpts {
    std::string model, manifest, out, norm = "linf", eps = "8/255";
    std::optional<std::string> step_size;
    std::size_t steps = 20;
    std::size_t limit = 0;
    bool targeted = false;
    bool no_random_start = false;
};

void cmd_attack(const AttackOpts& o, const Global& g) {
    AttackConfig cfg;
    cfg.norm = parse_norm(o.norm);
    cfg.epsilon = parse_amount(o.eps);
    cfg.steps = o.steps;
    if (o.step_size) cfg.step_size = parse_amount(*o.step_size);
    cfg.targeted = o.targeted;
    cfg.random_start = !o.no_random_start;
    cfg.seed = g.seed;
    cfg.validate();

    const Model m = load_checkpoint(o.model);
    LabeledDataset d = load_cache(o.manifest, m.num_classes());
    if (o.limit > 0 && o.limit < d.size()) d = split_dataset(d, o.limit).first;
    const AttackReport r = evaluate_attack(m, d, cfg);

    std::vector<CsvRow> rows;
    for (const AttackRecord& a : r.records) {
        rows.push_back({std::to_string(a.sample_id), std::to_string(a.label),
                        a.target ? std::to_string(*a.target) : "", std::to_string(a.pred_clean),
                        std::to_string(a.pred_adv), format_number(a.linf), format_number(a.l2), flag(a.success),
                        flag(a.recovered)});
    }
    ensure_dir(o.out);
    write_csv(fs::path(o.out) / "attack.csv",
              {"sample_id", "label", "target", "pred_clean", "pred_adv", "linf", "l2", "success", "recovered"}, rows);
    nlohmann::ordered_json summary{{"norm", to_string(cfg.norm)},
                                   {"epsilon", cfg.epsilon},
                                   {"steps", cfg.steps},
                                   {"step_size", cfg.effective_step_size()},
                                   {"targeted", cfg.targeted},
                                   {"random_start", cfg.random_start},
                                   {"seed", cfg.seed},
                                   {"n_samples", r.n_samples},
                                   {"attack_success_rate", r.attack_success_rate},
                                   {"recovery_rate", r.recovery_rate},
                                   {"mean_linf", r.mean_linf},
                                   {"mean_l2", r.mean_l2}};
    write_json(fs::path(o.out) / "attack_summary.json", summary);
    std::cout << "success " << r.attack_success_rate << " recovery " << r.recovery_rate << " over " << r.n_samples
              << " samples\n";
}

// ---- fourier-check ----------------------------------------------------------

struct FourierOpts {
    std::string out;
    std::size_t n = 16;
    std::size_t trials = 100;
};

void cmd_fourier(const FourierOpts& o, const Global& g) {
    const auto reports = verify_bound(o.n, o.trials, g.seed);
    std::vector<CsvRow> rows;
    std::size_t violations = 0;
    for (const LowPassReport& r : reports) {
        rows.push_back({std::to_string(r.trial), std::to_string(r.k), std::to_string(r.numerical_rank),
                        flag(r.bound_satisfied)});
        violations += r.bound_satisfied ? 0 : 1;
    }
    ensure_dir(o.out);
    write_csv(fs::path(o.out) / "fourier.csv", {"trial", "k", "numerical_rank", "bound_satisfied"}, rows);
    std::cout << reports.size() << " checks, " << violations << " violations\n";
}

// ---- bench-svd --------------------------------------------------------------

struct BenchOpts {
    std::string out;
    std::size_t width = 32, height = 32, channels = 3, trials = 10;
};

void cmd_bench(const BenchOpts& o, const Global& g) {
    const auto timings = benchmark_truncation(o.width, o.height, o.channels, o.trials, g.seed);
    std::vector<CsvRow> rows;
    for (const TruncationTiming& t : timings) rows.push_back({std::to_string(t.rank), format_number(t.seconds)});
    ensure_dir(o.out);
    write_csv(fs::path(o.out) / "bench.csv", {"rank", "mean_seconds"}, rows);
    std::cout << timings.size() << " ranks timed\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Low-rank image toolkit: truncation, rank spectra, saliency and attacks"};
    app.require_subcommand(1);
    Global g;
    app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker thread cap (0 = hardware count)")->capture_default_str();

    TruncateOpts tr;
    auto* truncate = app.add_subcommand("truncate", "Rank-k truncation of a PPM image or a cached dataset");
    truncate->add_option("--input", tr.input, "Input PPM");
    truncate->add_option("--output", tr.output, "Output PPM");
    truncate->add_option("--manifest", tr.manifest, "Input dataset cache directory");
    truncate->add_option("--out", tr.out, "Output dataset cache directory");
    truncate->add_option("--rank", tr.rank, "Rank k")->required();
    truncate->add_flag("--reverse", tr.reverse, "Drop the k largest singular values instead");

    SynthOpts sy;
    auto* synth = app.add_subcommand("synth", "Generate the synthetic rank-structured dataset");
    synth->add_option("--out", sy.out, "Output cache directory")->required();
    synth->add_option("--classes", sy.spec.num_classes)->capture_default_str();
    synth->add_option("--per-class", sy.spec.samples_per_class)->capture_default_str();
    synth->add_option("--size", sy.spec.size)->capture_default_str();
    synth->add_option("--prototype-rank", sy.spec.prototype_rank)->capture_default_str();
    synth->add_option("--noise", sy.spec.noise_sigma)->capture_default_str();
    synth->add_option("--contrast", sy.spec.contrast, "Peak deviation of a class pattern from mid-grey")->capture_default_str();
    synth->add_option("--test-count", sy.test_count, "Hold out the last N samples under test/")->capture_default_str();

    TrainOpts tn;
    auto* trainc = app.add_subcommand("train", "Train the reference CNN");
    trainc->add_option("--manifest", tn.manifest, "Training cache directory")->required();
    trainc->add_option("--test-manifest", tn.test_manifest, "Test cache directory");
    trainc->add_option("--out", tn.out, "Output directory")->required();
    trainc->add_option("--classes", tn.classes, "Class count (0 = infer)")->capture_default_str();
    trainc->add_option("--epochs", tn.cfg.epochs)->capture_default_str();
    trainc->add_option("--lr", tn.cfg.lr)->capture_default_str();
    trainc->add_option("--momentum", tn.cfg.momentum)->capture_default_str();
    trainc->add_option("--weight-decay", tn.cfg.weight_decay)->capture_default_str();
    trainc->add_option("--lr-drops", tn.cfg.lr_drop_epochs, "Epochs after which the rate drops");
    trainc->add_option("--lr-drop-factor", tn.cfg.lr_drop_factor)->capture_default_str();
    trainc->add_option("--batch-size", tn.cfg.batch_size)->capture_default_str();
    trainc->add_option("--truncate-rank", tn.truncate_rank, "Train on rank-k copies");
    trainc->add_flag("--reverse", tn.reverse, "With --truncate-rank, drop the top k values instead");

    SpectrumOpts sp;
    auto* spectrum = app.add_subcommand("spectrum", "Accuracy or agreement at every input rank");
    spectrum->add_option("--model", sp.model, "Checkpoint")->required();
    spectrum->add_option("--manifest", sp.manifest, "Dataset cache directory")->required();
    spectrum->add_option("--out", sp.out, "Output directory")->required();
    spectrum->add_option("--mode", sp.mode, "accuracy or agreement")->capture_default_str();
    spectrum->add_option("--model-id", sp.model_id)->capture_default_str();

    RigOpts rg;
    auto* rigc = app.add_subcommand("rig", "Rank-integrated or vanilla gradient saliency");
    rigc->add_option("--model", rg.model, "Checkpoint")->required();
    rigc->add_option("--input", rg.input, "Input PPM");
    rigc->add_option("--manifest", rg.manifest, "Dataset cache directory");
    rigc->add_option("--index", rg.index, "Sample index within --manifest")->capture_default_str();
    rigc->add_option("--class", rg.class_index, "Class to explain (default: top class)");
    rigc->add_option("--method", rg.method, "rig or vanilla")->capture_default_str();
    rigc->add_option("--target", rg.target, "softmax or logit")->capture_default_str();
    rigc->add_option("--out", rg.out, "Output directory")->required();

    AttackOpts at;
    auto* attack = app.add_subcommand("attack", "PGD attack over a dataset");
    attack->add_option("--model", at.model, "Checkpoint")->required();
    attack->add_option("--manifest", at.manifest, "Dataset cache directory")->required();
    attack->add_option("--out", at.out, "Output directory")->required();
    attack->add_option("--norm", at.norm, "linf or l2")->capture_default_str();
    attack->add_option("--eps", at.eps, "Radius, e.g. 0.03 or 8/255")->capture_default_str();
    attack->add_option("--steps", at.steps)->capture_default_str();
    attack->add_option("--step-size", at.step_size, "Default 2.5*eps/steps");
    attack->add_option("--limit", at.limit, "Attack only the first N samples")->capture_default_str();
    attack->add_flag("--targeted", at.targeted);
    attack->add_flag("--no-random-start", at.no_random_start);

    FourierOpts fo;
    auto* fourier = app.add_subcommand("fourier-check", "Check the low-pass rank bound on random inputs");
    fourier->add_option("--n", fo.n)->capture_default_str();
    fourier->add_option("--trials", fo.trials)->capture_default_str();
    fourier->add_option("--out", fo.out, "Output directory")->required();

    BenchOpts bo;
    auto* bench = app.add_subcommand("bench-svd", "Time rank-k truncation at every rank");
    bench->add_option("--width", bo.width)->capture_default_str();
    bench->add_option("--height", bo.height)->capture_default_str();
    bench->add_option("--channels", bo.channels)->capture_default_str();
    bench->add_option("--trials", bo.trials)->capture_default_str();
    bench->add_option("--out", bo.out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        set_thread_limit(g.threads);
        if (*truncate) cmd_truncate(tr);
        else if (*synth) cmd_synth(sy, g);
        else if (*trainc) cmd_train(tn, g);
        else if (*spectrum) cmd_spectrum(sp);
        else if (*rigc) cmd_rig(rg);
        else if (*attack) cmd_attack(at, g);
        else if (*fourier) cmd_fourier(fo, g);
        else if (*bench) cmd_bench(bo, g);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDomain;
    }
    return 0;
}
