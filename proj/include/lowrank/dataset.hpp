#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "lowrank/image.hpp"

namespace lowrank {

struct Sample {
    ImageTensor image;
    std::size_t label;
};

/// Labelled images sharing one shape, labels in [0, num_classes).
class LabeledDataset {
public:
    LabeledDataset(std::string name, std::size_t num_classes, std::vector<Sample> samples);

    const std::string& name() const noexcept { return name_; }
    std::size_t num_classes() const noexcept { return num_classes_; }
    std::size_t size() const noexcept { return samples_.size(); }
    bool empty() const noexcept { return samples_.empty(); }

    const Sample& operator[](std::size_t i) const { return samples_.at(i); }
    const std::vector<Sample>& samples() const noexcept { return samples_; }

private:
    std::string name_;
    std::size_t num_classes_;
    std::vector<Sample> samples_;
};

/// First `count` samples and the remainder, order preserved.
std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& d, std::size_t count);

/// Parameters of the synthetic rank-structured benchmark.
struct SyntheticSpec {
    std::size_t num_classes = 10;
    std::size_t samples_per_class = 200;
    std::size_t size = 16;            // images are size x size, one channel
    std::size_t prototype_rank = 5;
    double noise_sigma = 0.05;
    double contrast = 0.2;            // peak deviation of a prototype from mid-grey
    std::uint64_t seed = 42;

    void validate() const;
};

/// Class prototypes in [0,1] with rank exactly `prototype_rank`: a shared
/// mid-grey background plus a class pattern built from prototype_rank - 1
/// outer products of zero-mean Gaussian vectors, scaled so its peak
/// magnitude is `contrast`.
std::vector<Matrix> make_prototypes(const SyntheticSpec& spec);

/// Noisy copies of the prototypes, clamped to [0,1]. Samples cycle through
/// the classes (sample i has label i mod num_classes).
LabeledDataset make_synthetic(const SyntheticSpec& spec);

/// Applies image_rank_k to every sample; labels and order are preserved.
LabeledDataset truncate_dataset(const LabeledDataset& d, std::size_t k, bool reverse = false);

// Netpbm: P6 (3 channels) and P5 (1 channel), maxval 255.
ImageTensor read_ppm(const std::filesystem::path& path);
ImageTensor parse_ppm(const std::vector<std::uint8_t>& bytes);
void write_ppm(const ImageTensor& image, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_ppm(const ImageTensor& image);

/// 8-bit grayscale P5 from a single raster matrix with values in [0,1].
void write_pgm(const Matrix& raster, const std::filesystem::path& path);

// IDX (MNIST) image/label pairs, big-endian.
LabeledDataset parse_idx(const std::vector<std::uint8_t>& images, const std::vector<std::uint8_t>& labels,
                         std::size_t num_classes = 10, std::string name = "idx");
LabeledDataset read_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                        std::size_t num_classes = 10);

/// Dataset cache: `manifest.jsonl` with one {"index","label","file"} object
/// per line, plus one raw tensor file per sample (u32 w, h, c little-endian,
/// then w*h*c little-endian float64 values, channel-major). Files are written
/// to a temporary name and renamed into place.
void save_cache(const LabeledDataset& d, const std::filesystem::path& dir);

/// Loads a cache written by save_cache. num_classes = 0 infers max label + 1.
LabeledDataset load_cache(const std::filesystem::path& dir, std::size_t num_classes = 0);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace lowrank
