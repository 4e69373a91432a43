#include "progstain/fixture.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace progstain {
namespace {

struct Cell {
    double row;
    double col;
    int nucleus_radius;
    double dab;

    double outer_radius(int ring) const noexcept { return nucleus_radius + ring; }
};

constexpr int kPlacementAttempts = 2000;

} // namespace

Fixture synth_fixture(std::uint64_t seed, int height, int width, int n_cells,
                      const StainMatrix& stains, const FixtureLayout& layout) {
    if (n_cells < 0) throw InvalidArgument("synth_fixture: n_cells must be nonnegative");
    if (height < 32 || width < 32)
        throw InvalidArgument("synth_fixture: height and width must be at least 32");

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> radius_dist(layout.nucleus_radius_min, layout.nucleus_radius_max);
    std::uniform_real_distribution<double> dab_dist(layout.dab_min, layout.dab_max);

    // Rejection sampling with a one-pixel gap between rings.
    std::vector<Cell> cells;
    for (int i = 0; i < n_cells; ++i) {
        const int radius = radius_dist(rng);
        const double outer = radius + layout.ring_width;
        std::uniform_real_distribution<double> row_dist(outer + 1, height - outer - 2);
        std::uniform_real_distribution<double> col_dist(outer + 1, width - outer - 2);
        bool placed = false;
        for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
            const Cell c{std::floor(row_dist(rng)) + 0.5, std::floor(col_dist(rng)) + 0.5, radius, 0.0};
            placed = true;
            for (const Cell& other : cells) {
                const double gap = std::hypot(c.row - other.row, c.col - other.col);
                if (gap < c.outer_radius(layout.ring_width) + other.outer_radius(layout.ring_width) + 1.5) {
                    placed = false;
                    break;
                }
            }
            if (placed) cells.push_back(c);
        }
        if (!placed)
            throw InvalidArgument("synth_fixture: no room to place cell " + std::to_string(i + 1) +
                                  " of " + std::to_string(n_cells));
        cells.back().dab = dab_dist(rng);
    }

    FixtureTruth truth{Plane(height, width), Plane(height, width), Plane(height, width)};
    Plane he_eosin(height, width, layout.he_background_eosin);
    Plane zero(height, width);

    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            const double pr = r + 0.5;
            const double pc = c + 0.5;
            for (const Cell& cell : cells) {
                const double d = std::hypot(pr - cell.row, pc - cell.col);
                if (d <= cell.nucleus_radius) {
                    truth.hema_truth(r, c) = layout.nucleus_hematoxylin;
                    he_eosin(r, c) = layout.he_cytoplasm_eosin;
                } else if (d <= cell.outer_radius(layout.ring_width)) {
                    truth.dab_truth(r, c) = cell.dab;
                    truth.membrane_mask(r, c) = 1.0;
                    he_eosin(r, c) = layout.he_cytoplasm_eosin;
                }
            }
        }
    }

    Fixture fx;
    fx.ihc_like = compose_image(truth.hema_truth, zero, truth.dab_truth, stains);
    fx.he_like = compose_image(truth.hema_truth, he_eosin, zero, stains);
    fx.truth = std::move(truth);
    return fx;
}

Image compose_with_dab_offset(const FixtureTruth& truth, double dab_offset, const StainMatrix& stains) {
    Plane dab = truth.dab_truth;
    for (double& v : dab.values) v += dab_offset;
    return compose_image(truth.hema_truth, Plane(dab.height, dab.width), dab, stains);
}

Image gaussian_blur(const Image& img, double sigma) {
    if (!(sigma > 0.0)) return img;
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> taps(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) sum += taps[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    for (double& t : taps) t /= sum;

    const int h = img.height();
    const int w = img.width();
    const int ch = img.channels();
    std::vector<double> horiz(img.data().size());
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            for (int k = 0; k < ch; ++k) {
                double s = 0.0;
                for (int d = -radius; d <= radius; ++d)
                    s += taps[d + radius] * img(r, std::clamp(c + d, 0, w - 1), k);
                horiz[(static_cast<std::size_t>(r) * w + c) * ch + k] = s;
            }
    std::vector<double> out(horiz.size());
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            for (int k = 0; k < ch; ++k) {
                double s = 0.0;
                for (int d = -radius; d <= radius; ++d)
                    s += taps[d + radius] * horiz[(static_cast<std::size_t>(std::clamp(r + d, 0, h - 1)) * w + c) * ch + k];
                out[(static_cast<std::size_t>(r) * w + c) * ch + k] = s;
            }
    return clamp_to_image(h, w, ch, std::move(out));
}

Image random_image(std::uint64_t seed, int height, int width, int channels, double lo, double hi) {
    if (!(lo >= 0.0 && hi <= 1.0 && lo <= hi)) throw InvalidArgument("random_image: bounds must satisfy 0 <= lo <= hi <= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> data(static_cast<std::size_t>(height) * width * channels);
    for (double& v : data) v = dist(rng);
    return Image(height, width, channels, std::move(data));
}

std::string fixture_truth_json(const FixtureTruth& truth) {
    nlohmann::json j;
    j["height"] = truth.dab_truth.height;
    j["width"] = truth.dab_truth.width;
    j["dab_truth"] = truth.dab_truth.values;
    j["hema_truth"] = truth.hema_truth.values;
    return j.dump();
}

} // namespace progstain
