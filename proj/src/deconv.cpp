#include "progstain/deconv.hpp"

#include <algorithm>
#include <cmath>

namespace progstain {
namespace {

// H-E-DAB absorbance signatures from the color deconvolution literature.
constexpr Mat3 kDefaultRows = {{
    {0.650, 0.704, 0.286},
    {0.072, 0.990, 0.105},
    {0.268, 0.570, 0.776},
}};

Mat3 transpose(const Mat3& m) noexcept {
    Mat3 t{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) t[i][j] = m[j][i];
    return t;
}

// Adjugate inverse; caller has already checked the determinant.
Mat3 inverse(const Mat3& m) noexcept {
    const double det = determinant(m);
    Mat3 inv{};
    inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
    inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
    inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
    inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
    inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
    inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
    inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
    inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
    inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
    return inv;
}

Vec3 multiply(const Mat3& m, const Vec3& v) noexcept {
    return {m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2]};
}

} // namespace

const char* stain_name(Stain s) noexcept {
    switch (s) {
    case Stain::hematoxylin: return "hematoxylin";
    case Stain::eosin: return "eosin";
    case Stain::dab: return "dab";
    }
    return "unknown";
}

double determinant(const Mat3& m) noexcept {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

StainMatrix::StainMatrix() : StainMatrix(kDefaultRows) {}

Mat3 StainMatrix::default_rows() noexcept { return kDefaultRows; }

StainMatrix::StainMatrix(const Mat3& rows) {
    for (int i = 0; i < 3; ++i) {
        const double norm = std::hypot(rows[i][0], rows[i][1], rows[i][2]);
        if (!(norm > 0.0) || !std::isfinite(norm))
            throw InvalidArgument("stain matrix row " + std::to_string(i) + " has zero or non-finite norm");
        for (int j = 0; j < 3; ++j) rows_[i][j] = rows[i][j] / norm;
    }
    const double det = determinant(rows_);
    if (!(std::abs(det) > kSingularThreshold))
        throw InvalidArgument("stain matrix is singular (|det| = " + std::to_string(std::abs(det)) + ")");
    unmixing_ = inverse(transpose(rows_));
}

Vec3 StainMatrix::compose(const Vec3& c) const noexcept {
    Vec3 od{};
    for (int k = 0; k < 3; ++k)
        od[k] = rows_[0][k] * c[0] + rows_[1][k] * c[1] + rows_[2][k] * c[2];
    return od;
}

Vec3 StainMatrix::separate(const Vec3& od) const noexcept { return multiply(unmixing_, od); }

OdImage rgb_to_od(const Image& img, double i0, double eps) {
    if (img.channels() != 3) throw InvalidArgument("rgb_to_od: expected a 3-channel image");
    if (!(i0 > 0.0)) throw InvalidArgument("rgb_to_od: i0 must be positive");
    if (!(eps >= 0.0)) throw InvalidArgument("rgb_to_od: eps must be nonnegative");
    OdImage od{img.height(), img.width(), std::vector<double>(img.data().size())};
    const auto in = img.data();
    for (std::size_t i = 0; i < in.size(); ++i) {
        const double v = -std::log10((in[i] + eps) / i0);
        if (!std::isfinite(v)) throw InvalidArgument("rgb_to_od: zero intensity with eps = 0");
        od.values[i] = v;
    }
    return od;
}

Image od_to_rgb(const OdImage& od, double i0, double eps) {
    std::vector<double> out(od.values.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = i0 * std::pow(10.0, -od.values[i]) - eps;
    return clamp_to_image(od.height, od.width, 3, std::move(out));
}

StainConcentrations separate_stains(const OdImage& od, const StainMatrix& m) {
    StainConcentrations c{{Stain::hematoxylin, Plane(od.height, od.width)},
                          {Stain::eosin, Plane(od.height, od.width)},
                          {Stain::dab, Plane(od.height, od.width)}};
    for (std::size_t p = 0; p < od.pixel_count(); ++p) {
        const Vec3 conc = m.separate(od.at(p));
        c.hematoxylin.plane.values[p] = conc[0];
        c.eosin.plane.values[p] = conc[1];
        c.dab.plane.values[p] = conc[2];
    }
    return c;
}

OdImage recompose(const StainConcentrations& c, const StainMatrix& m) {
    const Plane& h = c.hematoxylin.plane;
    OdImage od{h.height, h.width, std::vector<double>(3 * h.size())};
    for (std::size_t p = 0; p < h.size(); ++p) {
        const Vec3 v = m.compose({h.values[p], c.eosin.plane.values[p], c.dab.plane.values[p]});
        std::copy(v.begin(), v.end(), od.values.begin() + 3 * p);
    }
    return od;
}

Image compose_image(const Plane& hematoxylin, const Plane& eosin, const Plane& dab,
                    const StainMatrix& m, double i0, double eps) {
    if (hematoxylin.height != eosin.height || hematoxylin.width != eosin.width ||
        hematoxylin.height != dab.height || hematoxylin.width != dab.width)
        throw InvalidArgument("compose_image: concentration planes differ in size");
    StainConcentrations c{{Stain::hematoxylin, hematoxylin}, {Stain::eosin, eosin}, {Stain::dab, dab}};
    return od_to_rgb(recompose(c, m), i0, eps);
}

ConcentrationMap dab_concentration(const Image& img, const StainMatrix& m, double i0, double eps) {
    const OdImage od = rgb_to_od(img, i0, eps);
    const Vec3& row = m.unmixing()[static_cast<int>(Stain::dab)];
    Plane out(od.height, od.width);
    for (std::size_t p = 0; p < od.pixel_count(); ++p) {
        out.values[p] = row[0] * od.values[3 * p] + row[1] * od.values[3 * p + 1] +
                        row[2] * od.values[3 * p + 2];
    }
    return {Stain::dab, std::move(out)};
}

WeightMap normalize_weight(const Plane& map) {
    WeightMap eta(map.height, map.width);
    if (map.values.empty()) return eta;
    const auto [lo, hi] = std::minmax_element(map.values.begin(), map.values.end());
    const double range = *hi - *lo;
    if (range < 1e-12) return eta;
    for (std::size_t i = 0; i < map.size(); ++i)
        eta.values[i] = std::clamp((map.values[i] - *lo) / range, 0.0, 1.0);
    return eta;
}

} // namespace progstain
