#include "progstain/gradients.hpp"

#include <algorithm>
#include <cmath>

namespace progstain {
namespace {

// Sobel Gx taps indexed [dr + 1][dc + 1]; Gy is the transpose.
constexpr double kSobelX[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};

inline int clamp_index(int i, int n) noexcept { return std::clamp(i, 0, n - 1); }

void require_kernel_fit(int height, int width) {
    if (height < 3 || width < 3) throw InvalidArgument("sobel: image smaller than the 3x3 kernel");
}

} // namespace

Plane luminance(const Image& img, const GrayWeights& w) {
    if (img.channels() != 3) throw InvalidArgument("to_gray: expected a 3-channel image");
    Plane out(img.height(), img.width());
    const auto in = img.data();
    for (std::size_t p = 0; p < out.size(); ++p)
        out.values[p] = w.r * in[3 * p] + w.g * in[3 * p + 1] + w.b * in[3 * p + 2];
    return out;
}

Image to_gray(const Image& img, const GrayWeights& w) {
    if (img.channels() == 1) return img;
    // Rounding can land a hair above 1 for white pixels.
    return clamp_to_image(img.height(), img.width(), 1, luminance(img, w).values);
}

SobelResponse sobel(const Plane& gray) {
    require_kernel_fit(gray.height, gray.width);
    const int h = gray.height;
    const int w = gray.width;
    SobelResponse s{Plane(h, w), Plane(h, w)};
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const int up = clamp_index(r - 1, h);
            const int down = clamp_index(r + 1, h);
            const int left = clamp_index(c - 1, w);
            const int right = clamp_index(c + 1, w);
            // Opposite sides are summed separately and then subtracted, so
            // symmetric neighborhoods cancel exactly.
            const double gx = (gray(up, right) + 2.0 * gray(r, right) + gray(down, right)) -
                              (gray(up, left) + 2.0 * gray(r, left) + gray(down, left));
            const double gy = (gray(down, left) + 2.0 * gray(down, c) + gray(down, right)) -
                              (gray(up, left) + 2.0 * gray(up, c) + gray(up, right));
            s.gx(r, c) = gx;
            s.gy(r, c) = gy;
        }
    }
    return s;
}

SobelResponse sobel(const Image& gray) {
    if (gray.channels() != 1) throw InvalidArgument("sobel: expected a 1-channel image");
    require_kernel_fit(gray.height(), gray.width());
    return sobel(Plane(gray.height(), gray.width(), {gray.data().begin(), gray.data().end()}));
}

GradientMap gradient_magnitude(const SobelResponse& s) {
    GradientMap d(s.gx.height, s.gx.width);
    for (std::size_t i = 0; i < d.size(); ++i) d.values[i] = std::hypot(s.gx.values[i], s.gy.values[i]);
    return d;
}

GradientMap gradient_magnitude(const Image& gray) { return gradient_magnitude(sobel(gray)); }

Plane sobel_adjoint(const Plane& d_gx, const Plane& d_gy) {
    const int h = d_gx.height;
    const int w = d_gx.width;
    require_kernel_fit(h, w);
    Plane d_gray(h, w);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const double ax = d_gx(r, c);
            const double ay = d_gy(r, c);
            if (ax == 0.0 && ay == 0.0) continue;
            for (int dr = -1; dr <= 1; ++dr) {
                const int rr = clamp_index(r + dr, h);
                for (int dc = -1; dc <= 1; ++dc) {
                    d_gray(rr, clamp_index(c + dc, w)) +=
                        kSobelX[dr + 1][dc + 1] * ax + kSobelX[dc + 1][dr + 1] * ay;
                }
            }
        }
    }
    return d_gray;
}

} // namespace progstain
