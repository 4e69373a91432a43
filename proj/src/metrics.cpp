#include "progstain/metrics.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "progstain/gradients.hpp"

namespace progstain {
namespace {

Plane gray_plane(const Image& img) {
    if (img.channels() == 1) return Plane(img.height(), img.width(), {img.data().begin(), img.data().end()});
    const Image g = to_gray(img);
    return Plane(g.height(), g.width(), {g.data().begin(), g.data().end()});
}

// Valid-mode separable correlation with a symmetric 1-D kernel.
Plane filter_valid(const Plane& src, const std::array<double, kSsimWindow>& k) {
    const int oh = src.height - kSsimWindow + 1;
    const int ow = src.width - kSsimWindow + 1;
    Plane horiz(src.height, ow);
    for (int r = 0; r < src.height; ++r)
        for (int c = 0; c < ow; ++c) {
            double s = 0.0;
            for (int i = 0; i < kSsimWindow; ++i) s += k[i] * src(r, c + i);
            horiz(r, c) = s;
        }
    Plane out(oh, ow);
    for (int r = 0; r < oh; ++r)
        for (int c = 0; c < ow; ++c) {
            double s = 0.0;
            for (int i = 0; i < kSsimWindow; ++i) s += k[i] * horiz(r + i, c);
            out(r, c) = s;
        }
    return out;
}

Plane product(const Plane& a, const Plane& b) {
    Plane p(a.height, a.width);
    for (std::size_t i = 0; i < p.size(); ++i) p.values[i] = a.values[i] * b.values[i];
    return p;
}

// Overlap weights of `n` output bins over `src` input samples.
std::vector<std::vector<double>> box_weights(int src, int n) {
    std::vector<std::vector<double>> w(n, std::vector<double>(src, 0.0));
    const double bin = static_cast<double>(src) / n;
    for (int o = 0; o < n; ++o) {
        const double lo = o * bin;
        const double hi = (o + 1) * bin;
        for (int i = static_cast<int>(std::floor(lo)); i < src && i < hi; ++i) {
            const double overlap = std::min<double>(hi, i + 1) - std::max<double>(lo, i);
            if (overlap > 0.0) w[o][i] = overlap / bin;
        }
    }
    return w;
}

std::vector<double> dct_matrix(int n) {
    std::vector<double> d(static_cast<std::size_t>(n) * n);
    for (int u = 0; u < n; ++u) {
        const double alpha = u == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
        for (int x = 0; x < n; ++x)
            d[static_cast<std::size_t>(u) * n + x] = alpha * std::cos(std::numbers::pi * (2 * x + 1) * u / (2.0 * n));
    }
    return d;
}

} // namespace

std::array<double, kSsimWindow> ssim_window_taps() {
    std::array<double, kSsimWindow> k{};
    double sum = 0.0;
    const int half = kSsimWindow / 2;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double x = i - half;
        k[i] = std::exp(-x * x / (2.0 * kSsimSigma * kSsimSigma));
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
}

double ssim(const Image& a, const Image& b) {
    require_same_shape(a, b, "ssim");
    if (a.height() < kSsimWindow || a.width() < kSsimWindow)
        throw InvalidArgument("ssim: image smaller than the 11x11 window");
    const Plane x = gray_plane(a);
    const Plane y = gray_plane(b);
    const auto k = ssim_window_taps();

    const Plane mu_x = filter_valid(x, k);
    const Plane mu_y = filter_valid(y, k);
    const Plane xx = filter_valid(product(x, x), k);
    const Plane yy = filter_valid(product(y, y), k);
    const Plane xy = filter_valid(product(x, y), k);

    const double c1 = (kSsimK1 * 1.0) * (kSsimK1 * 1.0);
    const double c2 = (kSsimK2 * 1.0) * (kSsimK2 * 1.0);
    double total = 0.0;
    for (std::size_t i = 0; i < mu_x.size(); ++i) {
        const double mx = mu_x.values[i];
        const double my = mu_y.values[i];
        const double vx = xx.values[i] - mx * mx;
        const double vy = yy.values[i] - my * my;
        const double cov = xy.values[i] - mx * my;
        total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    return total / static_cast<double>(mu_x.size());
}

double psnr(const Image& a, const Image& b) {
    require_same_shape(a, b, "psnr");
    const auto x = a.data();
    const auto y = b.data();
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
    const double mse = s / static_cast<double>(x.size());
    if (mse < 1e-10) return kPsnrCap;
    return 10.0 * std::log10(1.0 / mse);
}

double gradient_mse(const Image& a, const Image& b) {
    require_same_shape(a, b, "gradient_mse");
    const GradientMap da = gradient_magnitude(sobel(gray_plane(a)));
    const GradientMap db = gradient_magnitude(sobel(gray_plane(b)));
    double s = 0.0;
    for (std::size_t i = 0; i < da.size(); ++i) s += (da.values[i] - db.values[i]) * (da.values[i] - db.values[i]);
    return s / static_cast<double>(da.size());
}

Plane box_resize(const Plane& src, int height, int width) {
    if (height < 1 || width < 1 || height > src.height || width > src.width)
        throw InvalidArgument("box_resize: target must be nonempty and no larger than the source");
    const auto wr = box_weights(src.height, height);
    const auto wc = box_weights(src.width, width);
    Plane rows(height, src.width);
    for (int o = 0; o < height; ++o)
        for (int i = 0; i < src.height; ++i) {
            if (wr[o][i] == 0.0) continue;
            for (int c = 0; c < src.width; ++c) rows(o, c) += wr[o][i] * src(i, c);
        }
    Plane out(height, width);
    for (int r = 0; r < height; ++r)
        for (int o = 0; o < width; ++o) {
            double s = 0.0;
            for (int c = 0; c < src.width; ++c) s += wc[o][c] * rows(r, c);
            out(r, o) = s;
        }
    return out;
}

std::vector<bool> perceptual_hash(const Image& img, int scale) {
    if (img.height() < 32 || img.width() < 32) throw InvalidArgument("phash: image smaller than 32x32");
    if (scale < 2 || scale > 32) throw InvalidArgument("phash: scale must lie in [2, 32]");
    const Plane small = box_resize(gray_plane(img), scale, scale);

    // coeffs = D * small * D^T
    const std::vector<double> d = dct_matrix(scale);
    const int n = scale;
    std::vector<double> tmp(static_cast<std::size_t>(n) * n, 0.0);
    for (int u = 0; u < n; ++u)
        for (int y = 0; y < n; ++y) {
            double s = 0.0;
            for (int x = 0; x < n; ++x) s += d[static_cast<std::size_t>(u) * n + x] * small(x, y);
            tmp[static_cast<std::size_t>(u) * n + y] = s;
        }
    const int block = std::min(8, n);
    std::vector<double> coeffs;
    coeffs.reserve(static_cast<std::size_t>(block) * block - 1);
    for (int u = 0; u < block; ++u)
        for (int v = 0; v < block; ++v) {
            if (u == 0 && v == 0) continue;
            double s = 0.0;
            for (int y = 0; y < n; ++y) s += tmp[static_cast<std::size_t>(u) * n + y] * d[static_cast<std::size_t>(v) * n + y];
            coeffs.push_back(s);
        }

    std::vector<double> sorted = coeffs;
    const std::size_t mid = sorted.size() / 2;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid), sorted.end());
    double median = sorted[mid];
    if (sorted.size() % 2 == 0) {
        const double lower = *std::max_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid));
        median = 0.5 * (median + lower);
    }
    std::vector<bool> bits(coeffs.size());
    for (std::size_t i = 0; i < coeffs.size(); ++i) bits[i] = coeffs[i] > median;
    return bits;
}

std::array<double, 4> phash_distance(const Image& a, const Image& b) {
    std::array<double, 4> out{};
    for (std::size_t i = 0; i < kHashScales.size(); ++i) {
        const auto ha = perceptual_hash(a, kHashScales[i]);
        const auto hb = perceptual_hash(b, kHashScales[i]);
        std::size_t diff = 0;
        for (std::size_t j = 0; j < ha.size(); ++j) diff += ha[j] != hb[j];
        out[i] = static_cast<double>(diff) / static_cast<double>(ha.size());
    }
    return out;
}

MetricReport evaluate_pair(const Image& real, const Image& gen) {
    require_same_shape(real, gen, "evaluate_pair");
    return {ssim(real, gen), psnr(real, gen), gradient_mse(real, gen), phash_distance(real, gen)};
}

std::string to_json(const MetricReport& r) {
    nlohmann::ordered_json j;
    j["ssim"] = r.ssim;
    j["psnr"] = r.psnr;
    j["gradient_mse"] = r.gradient_mse;
    nlohmann::ordered_json ph;
    for (std::size_t i = 0; i < r.phash.size(); ++i) ph["layer" + std::to_string(i + 1)] = r.phash[i];
    j["phash"] = ph;
    return j.dump();
}

} // namespace progstain
