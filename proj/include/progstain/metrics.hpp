#pragma once

#include <array>
#include <string>

#include "progstain/image.hpp"

namespace progstain {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;
inline constexpr double kPsnrCap = 100.0;

/// Normalized 1-D Gaussian taps (length kSsimWindow) used by ssim().
std::array<double, kSsimWindow> ssim_window_taps();

/// Mean SSIM over every fully contained 11x11 Gaussian window (sigma 1.5,
/// dynamic range 1). Color inputs are compared on luminance.
double ssim(const Image& a, const Image& b);

/// 10 log10(1 / MSE), capped at 100 dB when MSE < 1e-10.
double psnr(const Image& a, const Image& b);

/// Mean squared difference of Sobel gradient magnitudes of the gray images.
double gradient_mse(const Image& a, const Image& b);

inline constexpr std::array<int, 4> kHashScales = {32, 16, 8, 4};

/// Bits of a DCT perceptual hash at one scale: the gray image is box-averaged
/// to scale x scale, transformed with an orthonormal 2-D DCT-II, and the
/// low-frequency block (8x8, or the whole block when smaller) minus DC is
/// thresholded at its median.
std::vector<bool> perceptual_hash(const Image& img, int scale);

/// Normalized Hamming distances between the hashes at each of kHashScales.
std::array<double, 4> phash_distance(const Image& a, const Image& b);

struct MetricReport {
    double ssim = 0.0;
    double psnr = 0.0;
    double gradient_mse = 0.0;
    std::array<double, 4> phash{};
};

MetricReport evaluate_pair(const Image& real, const Image& gen);

/// Single-line JSON object: ssim, psnr, gradient_mse, phash.layer1..layer4.
std::string to_json(const MetricReport& r);

/// Box (area) averaging to an arbitrary smaller or equal size.
Plane box_resize(const Plane& src, int height, int width);

} // namespace progstain
