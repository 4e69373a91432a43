#pragma once

#include "progstain/image.hpp"

namespace progstain {

/// Luminance weights for RGB -> gray.
struct GrayWeights {
    double r = 0.299;
    double g = 0.587;
    double b = 0.114;
};

/// Weighted channel sum of a 3-channel image, unclamped.
Plane luminance(const Image& img, const GrayWeights& w = {});

/// luminance() clamped into [0,1] as a 1-channel image. Gray input is
/// returned as is.
Image to_gray(const Image& img, const GrayWeights& w = {});

/// Signed first derivatives. gx is positive for intensity increasing with
/// column index, gy for intensity increasing with row index.
struct SobelResponse {
    Plane gx;
    Plane gy;
};

/// 3x3 Sobel cross-correlation with replicate (edge-clamp) padding.
/// Requires a single-channel image of at least 3x3.
SobelResponse sobel(const Image& gray);

/// Same as sobel() on a raw field, without the [0,1] restriction.
SobelResponse sobel(const Plane& gray);

/// sqrt(gx^2 + gy^2) per pixel.
GradientMap gradient_magnitude(const Image& gray);
GradientMap gradient_magnitude(const SobelResponse& s);

/// Adjoint of sobel(): accumulates dL/dgray given dL/dgx and dL/dgy,
/// including the replicate-padding fold at the borders.
Plane sobel_adjoint(const Plane& d_gx, const Plane& d_gy);

} // namespace progstain
