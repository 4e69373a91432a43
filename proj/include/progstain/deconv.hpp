#pragma once

#include <array>

#include "progstain/image.hpp"

namespace progstain {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<Vec3, 3>;

enum class Stain { hematoxylin = 0, eosin = 1, dab = 2 };

const char* stain_name(Stain s) noexcept;

/// Rows are the RGB absorbance signatures of hematoxylin, eosin and DAB,
/// normalized to unit length on construction.
///
/// Optical density and concentrations relate as OD = M^T c, so separation
/// solves c = (M^T)^{-1} OD per pixel.
class StainMatrix {
public:
    /// Default H-E-DAB absorbance rows.
    StainMatrix();
    /// Throws InvalidArgument for a zero row or |det| <= 1e-6 after normalization.
    explicit StainMatrix(const Mat3& rows);

    static constexpr double kSingularThreshold = 1e-6;

    /// Unnormalized default rows: H (0.650, 0.704, 0.286),
    /// E (0.072, 0.990, 0.105), DAB (0.268, 0.570, 0.776).
    static Mat3 default_rows() noexcept;

    const Mat3& rows() const noexcept { return rows_; }
    const Vec3& row(Stain s) const noexcept { return rows_[static_cast<int>(s)]; }
    /// (M^T)^{-1}. Row k maps an OD triple to the concentration of stain k.
    const Mat3& unmixing() const noexcept { return unmixing_; }

    /// M^T c
    Vec3 compose(const Vec3& concentrations) const noexcept;
    /// (M^T)^{-1} od
    Vec3 separate(const Vec3& od) const noexcept;

private:
    Mat3 rows_{};
    Mat3 unmixing_{};
};

double determinant(const Mat3& m) noexcept;

/// Three OD values per pixel, interleaved.
struct OdImage {
    int height = 0;
    int width = 0;
    std::vector<double> values;

    std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(height) * width; }
    Vec3 at(std::size_t pixel) const noexcept {
        return {values[3 * pixel], values[3 * pixel + 1], values[3 * pixel + 2]};
    }
};

struct ConcentrationMap {
    Stain stain = Stain::dab;
    Plane plane;
};

struct StainConcentrations {
    ConcentrationMap hematoxylin;
    ConcentrationMap eosin;
    ConcentrationMap dab;
};

inline constexpr double kDefaultI0 = 1.0;
inline constexpr double kDefaultEps = 1e-6;

/// OD = -log10((I + eps) / i0) per channel. Requires i0 > 0 and eps >= 0;
/// eps = 0 is accepted for exact-arithmetic checks but zero intensities
/// then produce an error instead of an infinite density.
OdImage rgb_to_od(const Image& img, double i0 = kDefaultI0, double eps = kDefaultEps);

/// I = clamp(i0 * 10^-OD - eps, 0, 1).
Image od_to_rgb(const OdImage& od, double i0 = kDefaultI0, double eps = kDefaultEps);

StainConcentrations separate_stains(const OdImage& od, const StainMatrix& m);

/// Inverse of separate_stains: OD = M^T c per pixel.
OdImage recompose(const StainConcentrations& c, const StainMatrix& m);

/// Forward model: OD from concentration planes, then back to intensities.
Image compose_image(const Plane& hematoxylin, const Plane& eosin, const Plane& dab,
                    const StainMatrix& m, double i0 = kDefaultI0, double eps = kDefaultEps);

ConcentrationMap dab_concentration(const Image& img, const StainMatrix& m,
                                   double i0 = kDefaultI0, double eps = kDefaultEps);

/// Min-max normalization of raw concentrations into [0,1]. Negative
/// deconvolution artifacts participate in the min. A range below 1e-12
/// yields an all-zero map.
WeightMap normalize_weight(const Plane& map);
inline WeightMap normalize_weight(const ConcentrationMap& map) { return normalize_weight(map.plane); }

} // namespace progstain
