#include "progstain/image.hpp"

#include <algorithm>
#include <cmath>

namespace progstain {

Image::Image(int height, int width, int channels, std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
    if (height <= 0 || width <= 0)
        throw InvalidArgument("image dimensions must be positive");
    if (channels != 1 && channels != 3)
        throw InvalidArgument("unsupported channel count: " + std::to_string(channels));
    if (data_.size() != static_cast<std::size_t>(height) * width * channels)
        throw InvalidArgument("image data length does not match height*width*channels");
    for (double v : data_) {
        // NaN fails both comparisons.
        if (!(v >= 0.0 && v <= 1.0))
            throw InvalidArgument("image intensity outside [0,1]");
    }
}

Image Image::filled(int height, int width, int channels, double value) {
    return Image(height, width, channels,
                 std::vector<double>(static_cast<std::size_t>(height) * width * channels, value));
}

Plane::Plane(int h, int w, std::vector<double> v) : height(h), width(w), values(std::move(v)) {
    if (values.size() != static_cast<std::size_t>(h) * w)
        throw InvalidArgument("plane data length does not match height*width");
}

void require_same_shape(const Image& a, const Image& b, const char* what) {
    if (!a.same_shape(b)) {
        throw InvalidArgument(std::string(what) + ": dimension mismatch (" +
                              std::to_string(a.height()) + "x" + std::to_string(a.width()) + "x" +
                              std::to_string(a.channels()) + " vs " + std::to_string(b.height()) +
                              "x" + std::to_string(b.width()) + "x" + std::to_string(b.channels()) +
                              ")");
    }
}

Image clamp_to_image(int height, int width, int channels, std::vector<double> data) {
    for (double& v : data) v = std::clamp(v, 0.0, 1.0);
    return Image(height, width, channels, std::move(data));
}

} // namespace progstain
