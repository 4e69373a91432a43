#pragma once

#include <cstdint>
#include <string>

#include "progstain/deconv.hpp"

namespace progstain {

struct FixtureTruth {
    Plane dab_truth;
    Plane hema_truth;
    /// 1 on membrane ring pixels, 0 elsewhere.
    Plane membrane_mask;
};

struct Fixture {
    Image he_like;
    Image ihc_like;
    FixtureTruth truth;
};

/// Parameters of the synthetic cell model.
struct FixtureLayout {
    double nucleus_hematoxylin = 0.8;
    double dab_min = 0.3;
    double dab_max = 1.0;
    int ring_width = 2;
    int nucleus_radius_min = 3;
    int nucleus_radius_max = 5;
    /// Eosin counterstain for the H&E rendering only.
    double he_background_eosin = 0.15;
    double he_cytoplasm_eosin = 0.45;
};

/// Deterministic synthetic H&E / IHC pair with known stain ground truth.
///
/// Each cell is a filled nucleus disk carrying hematoxylin, wrapped in an
/// annular membrane ring carrying a per-cell uniform DAB concentration.
/// The IHC rendering is composed in OD space with `stains` so that
/// deconvolving it recovers `truth.dab_truth`. Cells never overlap; the
/// call throws InvalidArgument if `n_cells` cannot be placed.
Fixture synth_fixture(std::uint64_t seed, int height, int width, int n_cells,
                      const StainMatrix& stains = StainMatrix(), const FixtureLayout& layout = {});

/// IHC rendering of `truth` with a uniform DAB concentration offset added
/// at every pixel.
Image compose_with_dab_offset(const FixtureTruth& truth, double dab_offset,
                              const StainMatrix& stains = StainMatrix());

/// Separable Gaussian blur with radius ceil(3 sigma) and replicate padding.
/// sigma <= 0 returns the input unchanged.
Image gaussian_blur(const Image& img, double sigma);

/// Independent uniform intensities in [lo, hi].
Image random_image(std::uint64_t seed, int height, int width, int channels, double lo = 0.0, double hi = 1.0);

/// JSON sidecar with row-major "dab_truth" and "hema_truth" arrays.
std::string fixture_truth_json(const FixtureTruth& truth);

} // namespace progstain
