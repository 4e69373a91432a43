#pragma once

#include <span>
#include <string>
#include <vector>

#include "progstain/deconv.hpp"
#include "progstain/gradients.hpp"

namespace progstain {

// ---------------------------------------------------------------------------
// Contrastive losses
// ---------------------------------------------------------------------------

struct Embedding {
    std::vector<double> values;
    bool unit_norm = false;

    std::size_t dim() const noexcept { return values.size(); }
    /// L2-normalized copy; a zero vector stays zero and is not flagged unit.
    static Embedding normalized(std::vector<double> v);
};

/// Throws InvalidArgument on dimension mismatch.
double dot(const Embedding& a, const Embedding& b);

/// One spatial location of one layer: matched generated / real embeddings
/// and the negatives drawn from non-matching locations.
struct PatchSample {
    Embedding generated;
    Embedding real;
    std::vector<Embedding> negatives;
};

using EmbeddingLayer = std::vector<PatchSample>;

struct EmbeddingPyramid {
    std::vector<EmbeddingLayer> layers;
};

/// Schedule ramp g(u), u = t/T. Both choices satisfy g(0) = 0, g(1) = 1.
enum class RampKind { linear, cosine };
/// Similarity map h(s). Both choices are monotone with h(1) = 1.
enum class SimilarityKind { affine, positive };

const char* to_string(RampKind k) noexcept;
const char* to_string(SimilarityKind k) noexcept;
RampKind parse_ramp(const std::string& name);
SimilarityKind parse_similarity(const std::string& name);

struct LossConfig {
    double tau = 0.07;
    double t = 0.0;
    double T = 100.0;
    double lambda_patchnce = 10.0;
    double lambda_asp = 10.0;
    double lambda_gp = 10.0;
    double lambda_dab = 0.5;
    double lambda_grad = 1.0;
    int pyramid_levels = 3;
    RampKind ramp = RampKind::linear;
    SimilarityKind similarity = SimilarityKind::affine;

    /// Throws InvalidArgument when tau <= 0, T <= 0, t outside [0,T],
    /// any weight negative, or pyramid_levels < 1.
    void validate() const;

    friend bool operator==(const LossConfig&, const LossConfig&) = default;
};

/// -log softmax of the positive logit against the negatives, with logits
/// scaled by 1/tau. Zero when there are no negatives.
double info_nce(const Embedding& generated, const Embedding& real,
                std::span<const Embedding> negatives, double tau);

double ramp(RampKind kind, double u) noexcept;
double similarity_weight(SimilarityKind kind, double sim) noexcept;

/// (1 - g(t/T)) + g(t/T) * h(sim); equals 1 at t = 0 and h(sim) at t = T.
double adaptive_weight(double sim, double t, double T, RampKind g = RampKind::linear,
                       SimilarityKind h = SimilarityKind::affine);

/// Per-location weights w / W for one layer, summing to 1. If every raw
/// weight is zero the layer falls back to uniform weights.
std::vector<double> layer_weights(const EmbeddingLayer& layer, const LossConfig& cfg);

/// Sum over layers of the weighted per-layer InfoNCE average.
double asp_loss(const EmbeddingPyramid& pyr, const LossConfig& cfg);

/// Sum over layers of the plain per-layer InfoNCE mean.
double patchnce_loss(const EmbeddingPyramid& pyr, double tau);

// ---------------------------------------------------------------------------
// Image-space losses
// ---------------------------------------------------------------------------

/// One 5-tap (1,4,6,4,1)/16 blur with replicate padding followed by taking
/// every second row and column.
Image pyramid_down(const Image& img);

/// Sum over levels of the mean absolute difference between matching
/// Gaussian pyramid levels.
double gaussian_pyramid_loss(const Image& a, const Image& b, int levels);

double mean_absolute_error(const Image& a, const Image& b);

/// Photometric constants shared by the stain-aware losses.
struct StainContext {
    StainMatrix stains;
    double i0 = kDefaultI0;
    double eps = kDefaultEps;
};

/// Mean squared difference of DAB concentration maps.
double dab_cf_loss(const Image& real, const Image& gen, const StainContext& ctx = {});

/// DAB-weighted squared difference of Sobel gradient magnitudes. The
/// weight derives from `real` only; zero when that weight sums below 1e-12.
double gcbr_loss(const Image& real, const Image& gen, const StainContext& ctx = {});

// ---------------------------------------------------------------------------
// Stage objectives
// ---------------------------------------------------------------------------

/// Raw (unweighted) loss terms. The adversarial term is supplied by the caller.
struct LossTerms {
    double adv = 0.0;
    double patchnce = 0.0;
    double asp = 0.0;
    double gp = 0.0;
    double dab_cf = 0.0;
    double gcbr = 0.0;
};

struct LossBreakdown {
    int stage = 1;
    LossTerms terms;
    double total = 0.0;
};

/// Stage 1: adv + patchnce/asp/gp weighted; stage 2: lambda_dab * dab_cf;
/// stage 3: lambda_grad * gcbr. Throws InvalidArgument for other stages.
LossBreakdown total_loss(int stage, const LossTerms& terms, const LossConfig& cfg);

/// JSON object with the active stage's terms and the total.
std::string to_json(const LossBreakdown& b);

} // namespace progstain
