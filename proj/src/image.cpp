#include "lowrank/image.hpp"

#include <algorithm>
#include <string>

#include "lowrank/error.hpp"

namespace lowrank {

void require_uniform(const Planes& planes) {
    if (planes.empty()) throw ShapeError("image needs at least one channel");
    for (const Matrix& p : planes) {
        if (p.rows() != planes.front().rows() || p.cols() != planes.front().cols()) {
            throw ShapeError("channel shapes differ: " + planes.front().shape_string() + " vs " +
                             p.shape_string());
        }
    }
}

ImageTensor::ImageTensor(Planes channels, bool transposed)
    : channels_(std::move(channels)), transposed_(transposed) {
    require_uniform(channels_);
    if (channels_.size() != 1 && channels_.size() != 3) {
        throw ShapeError("images have 1 or 3 channels, got " + std::to_string(channels_.size()));
    }
    if (width() > height()) {
        throw ShapeError("image channels must be w x h with w <= h, got " +
                         channels_.front().shape_string());
    }
    for (const Matrix& p : channels_) {
        for (double v : p.data()) {
            if (!(v >= 0.0 && v <= 1.0)) throw RangeError("image intensity outside [0,1]");
        }
    }
}

ImageTensor ImageTensor::zeros(std::size_t width, std::size_t height, std::size_t channels) {
    return ImageTensor(Planes(channels, Matrix(width, height)));
}

ImageTensor ImageTensor::from_raster(Planes raster) {
    require_uniform(raster);
    if (raster.front().rows() <= raster.front().cols()) return ImageTensor(std::move(raster), false);
    Planes t;
    t.reserve(raster.size());
    for (const Matrix& p : raster) t.push_back(p.transposed());
    return ImageTensor(std::move(t), true);
}

Planes ImageTensor::to_raster() const {
    if (!transposed_) return channels_;
    Planes out;
    out.reserve(channels_.size());
    for (const Matrix& p : channels_) out.push_back(p.transposed());
    return out;
}

ImageTensor clamp_unit(const Planes& planes, bool transposed) {
    Planes out = planes;
    for (Matrix& p : out)
        for (double& v : p.data()) v = std::clamp(v, 0.0, 1.0);
    return ImageTensor(std::move(out), transposed);
}

ImageTensor clamp_unit(const ImageTensor& image) { return clamp_unit(image.planes(), image.transposed()); }

double max_abs_diff(const Planes& a, const Planes& b) {
    if (a.size() != b.size()) throw ShapeError("channel counts differ");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, max_abs_diff(a[i], b[i]));
    return m;
}

Planes zeros_like(const Planes& planes) {
    Planes out;
    out.reserve(planes.size());
    for (const Matrix& p : planes) out.emplace_back(p.rows(), p.cols());
    return out;
}

}  // namespace lowrank
