#include "lowrank/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "lowrank/error.hpp"
#include "lowrank/parallel.hpp"
#include "lowrank/rng.hpp"
#include "lowrank/svd.hpp"

namespace lowrank {

namespace fs = std::filesystem;

namespace {

// Cursor over a netpbm header: tokens separated by whitespace, '#' comments.
class HeaderReader {
public:
    explicit HeaderReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    std::size_t offset() const noexcept { return pos_; }

    std::string token() {
        skip_space_and_comments();
        const std::size_t start = pos_;
        while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_]) && bytes_[pos_] != '#') ++pos_;
        if (start == pos_) throw ParseError("netpbm: unexpected end of header", pos_);
        return std::string(bytes_.begin() + static_cast<std::ptrdiff_t>(start),
                           bytes_.begin() + static_cast<std::ptrdiff_t>(pos_));
    }

    std::size_t number() {
        const std::size_t at = [&] {
            skip_space_and_comments();
            return pos_;
        }();
        const std::string t = token();
        if (t.empty() || !std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; }) ||
            t.size() > 9) {
            throw ParseError("netpbm: expected a positive integer, got '" + t + "'", at);
        }
        return std::stoul(t);
    }

    // Exactly one whitespace byte separates the header from the raster.
    void end_of_header() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
            throw ParseError("netpbm: missing whitespace after maxval", pos_);
        }
        ++pos_;
    }

private:
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t at, const char* what) {
    if (at + 4 > b.size()) throw ParseError(std::string("idx: truncated ") + what, at);
    return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
           std::uint32_t{b[at + 3]};
}

void put_le32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_le32(const std::vector<std::uint8_t>& b, std::size_t at) {
    if (at + 4 > b.size()) throw ParseError("tensor file: truncated header", at);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{b[at + i]} << (8 * i);
    return v;
}

void put_le_f64(std::vector<std::uint8_t>& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

double get_le_f64(const std::vector<std::uint8_t>& b, std::size_t at) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= std::uint64_t{b[at + i]} << (8 * i);
    return std::bit_cast<double>(bits);
}

std::vector<std::uint8_t> encode_tensor(const ImageTensor& image) {
    std::vector<std::uint8_t> out;
    out.reserve(12 + 8 * image.width() * image.height() * image.channels());
    put_le32(out, static_cast<std::uint32_t>(image.width()));
    put_le32(out, static_cast<std::uint32_t>(image.height()));
    put_le32(out, static_cast<std::uint32_t>(image.channels()));
    for (const Matrix& p : image.planes())
        for (double v : p.data()) put_le_f64(out, v);
    return out;
}

ImageTensor decode_tensor(const std::vector<std::uint8_t>& bytes) {
    const std::size_t w = get_le32(bytes, 0);
    const std::size_t h = get_le32(bytes, 4);
    const std::size_t c = get_le32(bytes, 8);
    if (w == 0 || h == 0 || (c != 1 && c != 3)) throw ParseError("tensor file: bad dimensions", 0);
    const std::size_t need = 12 + 8 * w * h * c;
    if (bytes.size() != need) throw ParseError("tensor file: payload length mismatch", std::min(bytes.size(), need));
    Planes planes;
    std::size_t at = 12;
    for (std::size_t ch = 0; ch < c; ++ch) {
        Matrix m(w, h);
        for (double& v : m.data()) {
            v = get_le_f64(bytes, at);
            at += 8;
        }
        planes.push_back(std::move(m));
    }
    return ImageTensor(std::move(planes));
}

std::uint8_t quantize(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

}  // namespace

LabeledDataset::LabeledDataset(std::string name, std::size_t num_classes, std::vector<Sample> samples)
    : name_(std::move(name)), num_classes_(num_classes), samples_(std::move(samples)) {
    if (num_classes_ == 0) throw ConfigError("dataset needs at least one class");
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        const Sample& s = samples_[i];
        if (s.label >= num_classes_) {
            throw RangeError("sample " + std::to_string(i) + " has label " + std::to_string(s.label) +
                             " outside 0.." + std::to_string(num_classes_ - 1));
        }
        const ImageTensor& first = samples_.front().image;
        if (s.image.width() != first.width() || s.image.height() != first.height() ||
            s.image.channels() != first.channels()) {
            throw ShapeError("sample " + std::to_string(i) + " differs in shape from sample 0");
        }
    }
}

std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& d, std::size_t count) {
    if (count > d.size()) throw RangeError("split point beyond dataset size");
    const auto& s = d.samples();
    const auto mid = s.begin() + static_cast<std::ptrdiff_t>(count);
    return {LabeledDataset(d.name() + "-a", d.num_classes(), {s.begin(), mid}),
            LabeledDataset(d.name() + "-b", d.num_classes(), {mid, s.end()})};
}

void SyntheticSpec::validate() const {
    if (num_classes < 2) throw ConfigError("synthetic data needs at least 2 classes");
    if (size < 1) throw ConfigError("synthetic image size must be positive");
    if (prototype_rank < 1 || prototype_rank > size) {
        throw ConfigError("prototype rank must be in 1.." + std::to_string(size));
    }
    if (!(noise_sigma >= 0.0)) throw ConfigError("noise sigma must be non-negative");
    if (!(contrast > 0.0 && contrast <= 0.5)) throw ConfigError("contrast must be in (0, 0.5]");
}

std::vector<Matrix> make_prototypes(const SyntheticSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const std::size_t n = spec.size;
    auto centered_normal = [&rng, n] {
        std::vector<double> v(n);
        double mean = 0.0;
        for (double& e : v) mean += (e = rng.normal());
        mean /= static_cast<double>(n);
        for (double& e : v) e -= mean;
        return v;
    };
    std::vector<Matrix> protos;
    protos.reserve(spec.num_classes);
    for (std::size_t cls = 0; cls < spec.num_classes; ++cls) {
        // Zero-mean factors keep the class pattern orthogonal to the constant
        // background, so background plus pattern has rank exactly r.
        Matrix q(n, n);
        for (std::size_t m = 1; m < spec.prototype_rank; ++m) {
            const auto a = centered_normal();
            const auto b = centered_normal();
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) q(i, j) += a[i] * b[j];
        }
        const double peak = max_abs(q);
        Matrix p(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) p(i, j) = 0.5 + (peak > 0.0 ? spec.contrast * q(i, j) / peak : 0.0);
        protos.push_back(std::move(p));
    }
    return protos;
}

LabeledDataset make_synthetic(const SyntheticSpec& spec) {
    const std::vector<Matrix> protos = make_prototypes(spec);
    // Noise comes from a stream separate from the prototype draws.
    Rng noise = Rng::for_stream(spec.seed, 1);
    std::vector<Sample> samples;
    samples.reserve(spec.num_classes * spec.samples_per_class);
    for (std::size_t s = 0; s < spec.samples_per_class; ++s) {
        for (std::size_t cls = 0; cls < spec.num_classes; ++cls) {
            Matrix x = protos[cls];
            if (spec.noise_sigma > 0.0) {
                for (double& v : x.data()) v += spec.noise_sigma * noise.normal();
            }
            samples.push_back({clamp_unit(Planes{std::move(x)}), cls});
        }
    }
    return LabeledDataset("synthetic", spec.num_classes, std::move(samples));
}

LabeledDataset truncate_dataset(const LabeledDataset& d, std::size_t k, bool reverse) {
    std::vector<Sample> out(d.size(), Sample{ImageTensor::zeros(1, 1, 1), 0});
    if (!d.empty() && k > d[0].image.width()) {
        throw RangeError("rank " + std::to_string(k) + " outside 0.." + std::to_string(d[0].image.width()));
    }
    parallel_for(d.size(), [&](std::size_t i) {
        out[i] = Sample{image_rank_k(d[i].image, k, reverse), d[i].label};
    });
    return LabeledDataset(d.name() + (reverse ? "-rev" : "-rank") + std::to_string(k), d.num_classes(),
                          std::move(out));
}

// ---- netpbm ---------------------------------------------------------------

ImageTensor parse_ppm(const std::vector<std::uint8_t>& bytes) {
    HeaderReader header(bytes);
    const std::string magic = header.token();
    std::size_t channels = 0;
    if (magic == "P6") {
        channels = 3;
    } else if (magic == "P5") {
        channels = 1;
    } else {
        throw ParseError("netpbm: unsupported magic '" + magic + "'", 0);
    }
    const std::size_t width = header.number();
    const std::size_t height = header.number();
    const std::size_t maxval_at = header.offset();
    const std::size_t maxval = header.number();
    if (width == 0 || height == 0) throw ParseError("netpbm: zero image dimension", maxval_at);
    if (maxval != 255) throw ParseError("netpbm: only maxval 255 is supported", maxval_at);
    header.end_of_header();

    const std::size_t start = header.offset();
    const std::size_t need = width * height * channels;
    if (bytes.size() - start < need) {
        throw ParseError("netpbm: raster truncated, expected " + std::to_string(need) + " bytes", bytes.size());
    }
    Planes raster(channels, Matrix(height, width));
    for (std::size_t r = 0; r < height; ++r) {
        for (std::size_t c = 0; c < width; ++c) {
            for (std::size_t ch = 0; ch < channels; ++ch) {
                raster[ch](r, c) = bytes[start + (r * width + c) * channels + ch] / 255.0;
            }
        }
    }
    return ImageTensor::from_raster(std::move(raster));
}

std::vector<std::uint8_t> encode_ppm(const ImageTensor& image) {
    const Planes raster = image.to_raster();
    const std::size_t height = raster.front().rows();
    const std::size_t width = raster.front().cols();
    const std::size_t channels = raster.size();
    const std::string header =
        std::string(channels == 3 ? "P6" : "P5") + "\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + width * height * channels);
    for (std::size_t r = 0; r < height; ++r)
        for (std::size_t c = 0; c < width; ++c)
            for (std::size_t ch = 0; ch < channels; ++ch) out.push_back(quantize(raster[ch](r, c)));
    return out;
}

ImageTensor read_ppm(const fs::path& path) { return parse_ppm(read_bytes(path)); }

void write_ppm(const ImageTensor& image, const fs::path& path) { write_bytes_atomic(path, encode_ppm(image)); }

void write_pgm(const Matrix& raster, const fs::path& path) {
    const std::string header =
        "P5\n" + std::to_string(raster.cols()) + " " + std::to_string(raster.rows()) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    for (double v : raster.data()) out.push_back(quantize(v));
    write_bytes_atomic(path, out);
}

// ---- IDX --------------------------------------------------------------------

LabeledDataset parse_idx(const std::vector<std::uint8_t>& images, const std::vector<std::uint8_t>& labels,
                         std::size_t num_classes, std::string name) {
    if (read_be32(images, 0, "image magic") != 0x00000803) throw ParseError("idx: bad image magic", 0);
    if (read_be32(labels, 0, "label magic") != 0x00000801) throw ParseError("idx: bad label magic", 0);
    const std::size_t n = read_be32(images, 4, "image count");
    const std::size_t rows = read_be32(images, 8, "row count");
    const std::size_t cols = read_be32(images, 12, "column count");
    const std::size_t n_labels = read_be32(labels, 4, "label count");
    if (n != n_labels) {
        throw ParseError("idx: " + std::to_string(n) + " images but " + std::to_string(n_labels) + " labels", 4);
    }
    const std::size_t plane = rows * cols;
    if (n > 0 && plane == 0) throw ParseError("idx: zero image dimension", 8);
    if (images.size() < 16 + n * plane) throw ParseError("idx: image payload truncated", images.size());
    if (labels.size() < 8 + n) throw ParseError("idx: label payload truncated", labels.size());

    std::vector<Sample> samples;
    samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Matrix m(rows, cols);
        auto d = m.data();
        for (std::size_t p = 0; p < plane; ++p) d[p] = images[16 + i * plane + p] / 255.0;
        const std::size_t label = labels[8 + i];
        if (label >= num_classes) {
            throw RangeError("idx: label " + std::to_string(label) + " at item " + std::to_string(i) +
                             " outside 0.." + std::to_string(num_classes - 1));
        }
        samples.push_back({ImageTensor::from_raster(Planes{std::move(m)}), label});
    }
    return LabeledDataset(std::move(name), num_classes, std::move(samples));
}

LabeledDataset read_idx(const fs::path& images, const fs::path& labels, std::size_t num_classes) {
    return parse_idx(read_bytes(images), read_bytes(labels), num_classes, images.stem().string());
}

// ---- cache ------------------------------------------------------------------

void save_cache(const LabeledDataset& d, const fs::path& dir) {
    fs::create_directories(dir);
    std::ostringstream manifest;
    for (std::size_t i = 0; i < d.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "%06zu.bin", i);
        write_bytes_atomic(dir / name, encode_tensor(d[i].image));
        nlohmann::ordered_json line{{"index", i}, {"label", d[i].label}, {"file", name}};
        manifest << line.dump() << "\n";
    }
    const std::string text = manifest.str();
    write_bytes_atomic(dir / "manifest.jsonl", std::vector<std::uint8_t>(text.begin(), text.end()));
}

LabeledDataset load_cache(const fs::path& dir, std::size_t num_classes) {
    const auto bytes = read_bytes(dir / "manifest.jsonl");
    const std::string text(bytes.begin(), bytes.end());
    std::istringstream in(text);
    std::string line;
    std::vector<Sample> samples;
    std::size_t offset = 0;
    std::size_t max_label = 0;
    while (std::getline(in, line)) {
        const std::size_t line_at = offset;
        offset += line.size() + 1;
        if (line.empty()) continue;
        nlohmann::json row;
        try {
            row = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("manifest: ") + e.what(), line_at);
        }
        if (!row.contains("index") || !row.contains("label") || !row.contains("file")) {
            throw ParseError("manifest: line lacks index/label/file", line_at);
        }
        const auto index = row["index"].get<std::size_t>();
        if (index != samples.size()) throw ParseError("manifest: indices must be consecutive from 0", line_at);
        const auto label = row["label"].get<std::size_t>();
        max_label = std::max(max_label, label);
        samples.push_back({decode_tensor(read_bytes(dir / row["file"].get<std::string>())), label});
    }
    if (num_classes == 0) num_classes = samples.empty() ? 1 : max_label + 1;
    return LabeledDataset(dir.filename().string(), num_classes, std::move(samples));
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_bytes_atomic(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

}  // namespace lowrank
