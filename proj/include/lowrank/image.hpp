#pragma once

#include <cstddef>
#include <vector>

#include "lowrank/matrix.hpp"

namespace lowrank {

/// Unconstrained stack of equally shaped channel matrices: gradients,
/// unclamped reconstructions, perturbations.
using Planes = std::vector<Matrix>;

/// A c-channel image with intensities in [0,1].
///
/// Each channel is a w x h matrix with w <= h, i.e. the short image side
/// indexes matrix rows. Rasters whose height exceeds their width are
/// transposed on the way in (`from_raster`) and back on the way out
/// (`to_raster`); `transposed()` records which case applies.
class ImageTensor {
public:
    explicit ImageTensor(Planes channels, bool transposed = false);

    static ImageTensor zeros(std::size_t width, std::size_t height, std::size_t channels);

    /// Builds from raster planes (rows = raster height, cols = raster width).
    static ImageTensor from_raster(Planes raster);

    Planes to_raster() const;

    std::size_t width() const noexcept { return channels_.front().rows(); }
    std::size_t height() const noexcept { return channels_.front().cols(); }
    std::size_t channels() const noexcept { return channels_.size(); }
    bool transposed() const noexcept { return transposed_; }

    const Matrix& channel(std::size_t i) const { return channels_.at(i); }
    const Planes& planes() const noexcept { return channels_; }

    bool operator==(const ImageTensor&) const = default;

private:
    Planes channels_;
    bool transposed_;
};

/// Clips every entry to [0,1] and wraps the result as an image.
ImageTensor clamp_unit(const Planes& planes, bool transposed = false);
ImageTensor clamp_unit(const ImageTensor& image);

/// Throws ShapeError unless all planes share one shape.
void require_uniform(const Planes& planes);

double max_abs_diff(const Planes& a, const Planes& b);
Planes zeros_like(const Planes& planes);

}  // namespace lowrank
