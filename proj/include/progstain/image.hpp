#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace progstain {

/// Thrown when an argument breaks an operation's contract (shape, range,
/// channel count). Distinct from I/O failures so callers can map it to a
/// usage error.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Row-major H x W x C image with intensities in [0,1]. Channels are
/// interleaved per pixel. Immutable once constructed.
class Image {
public:
    Image() = default;
    Image(int height, int width, int channels, std::vector<double> data);

    /// Constant-valued image.
    static Image filled(int height, int width, int channels, double value);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    int channels() const noexcept { return channels_; }
    std::size_t pixel_count() const noexcept {
        return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
    }
    bool empty() const noexcept { return data_.empty(); }

    double operator()(int row, int col, int ch = 0) const noexcept {
        return data_[(static_cast<std::size_t>(row) * width_ + col) * channels_ + ch];
    }
    std::span<const double> data() const noexcept { return data_; }

    bool same_shape(const Image& other) const noexcept {
        return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
    }

    friend bool operator==(const Image&, const Image&) = default;

private:
    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

/// Per-pixel scalar field with no range restriction. Used for concentration
/// maps, soft weights, signed derivatives and gradient magnitudes.
struct Plane {
    int height = 0;
    int width = 0;
    std::vector<double> values;

    Plane() = default;
    Plane(int h, int w, double fill = 0.0)
        : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}
    Plane(int h, int w, std::vector<double> v);

    std::size_t size() const noexcept { return values.size(); }
    double& operator()(int row, int col) noexcept {
        return values[static_cast<std::size_t>(row) * width + col];
    }
    double operator()(int row, int col) const noexcept {
        return values[static_cast<std::size_t>(row) * width + col];
    }

    friend bool operator==(const Plane&, const Plane&) = default;
};

/// Min-max normalized weight in [0,1].
using WeightMap = Plane;
/// Nonnegative Sobel gradient magnitude.
using GradientMap = Plane;

/// Unconstrained H x W x C field shaped like an Image; holds per-pixel
/// derivatives of a loss with respect to image intensities.
struct PixelField {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> values;

    PixelField() = default;
    PixelField(int h, int w, int c)
        : height(h), width(w), channels(c), values(static_cast<std::size_t>(h) * w * c, 0.0) {}

    static PixelField zeros_like(const Image& img) {
        return PixelField(img.height(), img.width(), img.channels());
    }

    double& operator()(int row, int col, int ch) noexcept {
        return values[(static_cast<std::size_t>(row) * width + col) * channels + ch];
    }
    double operator()(int row, int col, int ch) const noexcept {
        return values[(static_cast<std::size_t>(row) * width + col) * channels + ch];
    }
};

/// Throws InvalidArgument unless both images share height, width and channels.
void require_same_shape(const Image& a, const Image& b, const char* what);

/// Image with each value clamped into [0,1]; the input may hold any finite values.
Image clamp_to_image(int height, int width, int channels, std::vector<double> data);

} // namespace progstain
