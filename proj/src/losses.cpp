#include "progstain/losses.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace progstain {

Embedding Embedding::normalized(std::vector<double> v) {
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (!(norm > 0.0)) return {std::move(v), false};
    for (double& x : v) x /= norm;
    return {std::move(v), true};
}

double dot(const Embedding& a, const Embedding& b) {
    if (a.dim() != b.dim())
        throw InvalidArgument("embedding dimension mismatch (" + std::to_string(a.dim()) + " vs " +
                              std::to_string(b.dim()) + ")");
    double s = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) s += a.values[i] * b.values[i];
    return s;
}

const char* to_string(RampKind k) noexcept { return k == RampKind::linear ? "linear" : "cosine"; }
const char* to_string(SimilarityKind k) noexcept {
    return k == SimilarityKind::affine ? "affine" : "positive";
}

RampKind parse_ramp(const std::string& name) {
    if (name == "linear") return RampKind::linear;
    if (name == "cosine") return RampKind::cosine;
    throw InvalidArgument("unknown schedule ramp '" + name + "' (expected linear|cosine)");
}

SimilarityKind parse_similarity(const std::string& name) {
    if (name == "affine") return SimilarityKind::affine;
    if (name == "positive") return SimilarityKind::positive;
    throw InvalidArgument("unknown similarity map '" + name + "' (expected affine|positive)");
}

void LossConfig::validate() const {
    if (!(tau > 0.0)) throw InvalidArgument("tau must be positive");
    if (!(T > 0.0)) throw InvalidArgument("total steps T must be positive");
    if (!(t >= 0.0 && t <= T)) throw InvalidArgument("step t must lie in [0, T]");
    for (double l : {lambda_patchnce, lambda_asp, lambda_gp, lambda_dab, lambda_grad}) {
        if (!(l >= 0.0) || !std::isfinite(l)) throw InvalidArgument("loss weights must be nonnegative");
    }
    if (pyramid_levels < 1) throw InvalidArgument("pyramid_levels must be at least 1");
}

double info_nce(const Embedding& generated, const Embedding& real,
                std::span<const Embedding> negatives, double tau) {
    if (!(tau > 0.0)) throw InvalidArgument("info_nce: tau must be positive");
    const double positive = dot(generated, real) / tau;
    if (negatives.empty()) return 0.0;

    std::vector<double> logits;
    logits.reserve(negatives.size());
    double peak = positive;
    for (const Embedding& n : negatives) {
        logits.push_back(dot(generated, n) / tau);
        peak = std::max(peak, logits.back());
    }
    // Log-sum-exp shifted by the largest logit.
    double sum = std::exp(positive - peak);
    for (double l : logits) sum += std::exp(l - peak);
    const double loss = std::log(sum) + (peak - positive);
    return std::max(loss, 0.0);
}

double ramp(RampKind kind, double u) noexcept {
    u = std::clamp(u, 0.0, 1.0);
    if (kind == RampKind::cosine) return 0.5 * (1.0 - std::cos(std::numbers::pi * u));
    return u;
}

double similarity_weight(SimilarityKind kind, double sim) noexcept {
    if (kind == SimilarityKind::positive) return std::clamp(sim, 0.0, 1.0);
    return std::clamp((1.0 + sim) / 2.0, 0.0, 1.0);
}

double adaptive_weight(double sim, double t, double T, RampKind g, SimilarityKind h) {
    if (!(T > 0.0)) throw InvalidArgument("adaptive_weight: total steps T must be positive");
    if (!(t >= 0.0 && t <= T)) throw InvalidArgument("adaptive_weight: step t must lie in [0, T]");
    const double progress = ramp(g, t / T);
    return (1.0 - progress) * 1.0 + progress * similarity_weight(h, sim);
}

namespace {

double weighted_layer_loss(const EmbeddingLayer& layer, std::span<const double> weights, double tau) {
    double sum = 0.0;
    for (std::size_t s = 0; s < layer.size(); ++s) {
        const PatchSample& p = layer[s];
        sum += weights[s] * info_nce(p.generated, p.real, p.negatives, tau);
    }
    return sum;
}

std::vector<double> normalize_weights(std::vector<double> w) {
    double total = 0.0;
    for (double x : w) total += x;
    if (!(total > 0.0)) {
        std::fill(w.begin(), w.end(), 1.0);
        total = static_cast<double>(w.size());
    }
    for (double& x : w) x /= total;
    return w;
}

void require_nonempty(const EmbeddingPyramid& pyr) {
    if (pyr.layers.empty()) throw InvalidArgument("embedding pyramid has no layers");
    for (std::size_t l = 0; l < pyr.layers.size(); ++l) {
        if (pyr.layers[l].empty())
            throw InvalidArgument("embedding pyramid layer " + std::to_string(l) + " has no locations");
    }
}

} // namespace

std::vector<double> layer_weights(const EmbeddingLayer& layer, const LossConfig& cfg) {
    std::vector<double> w;
    w.reserve(layer.size());
    for (const PatchSample& p : layer)
        w.push_back(adaptive_weight(dot(p.generated, p.real), cfg.t, cfg.T, cfg.ramp, cfg.similarity));
    return normalize_weights(std::move(w));
}

double asp_loss(const EmbeddingPyramid& pyr, const LossConfig& cfg) {
    require_nonempty(pyr);
    double total = 0.0;
    for (const EmbeddingLayer& layer : pyr.layers)
        total += weighted_layer_loss(layer, layer_weights(layer, cfg), cfg.tau);
    return total;
}

double patchnce_loss(const EmbeddingPyramid& pyr, double tau) {
    require_nonempty(pyr);
    double total = 0.0;
    for (const EmbeddingLayer& layer : pyr.layers)
        total += weighted_layer_loss(layer, normalize_weights(std::vector<double>(layer.size(), 1.0)), tau);
    return total;
}

Image pyramid_down(const Image& img) {
    constexpr double taps[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
    const int h = img.height();
    const int w = img.width();
    const int ch = img.channels();
    auto at = [&](int r, int c, int k) {
        return img(std::clamp(r, 0, h - 1), std::clamp(c, 0, w - 1), k);
    };

    // Horizontal pass on even columns, then vertical pass on even rows.
    const int out_w = (w + 1) / 2;
    const int out_h = (h + 1) / 2;
    std::vector<double> horiz(static_cast<std::size_t>(h) * out_w * ch);
    for (int r = 0; r < h; ++r)
        for (int oc = 0; oc < out_w; ++oc)
            for (int k = 0; k < ch; ++k) {
                double s = 0.0;
                for (int d = -2; d <= 2; ++d) s += taps[d + 2] * at(r, 2 * oc + d, k);
                horiz[(static_cast<std::size_t>(r) * out_w + oc) * ch + k] = s;
            }

    std::vector<double> out(static_cast<std::size_t>(out_h) * out_w * ch);
    for (int orow = 0; orow < out_h; ++orow)
        for (int oc = 0; oc < out_w; ++oc)
            for (int k = 0; k < ch; ++k) {
                double s = 0.0;
                for (int d = -2; d <= 2; ++d) {
                    const int r = std::clamp(2 * orow + d, 0, h - 1);
                    s += taps[d + 2] * horiz[(static_cast<std::size_t>(r) * out_w + oc) * ch + k];
                }
                out[(static_cast<std::size_t>(orow) * out_w + oc) * ch + k] = s;
            }
    return clamp_to_image(out_h, out_w, ch, std::move(out));
}

double mean_absolute_error(const Image& a, const Image& b) {
    require_same_shape(a, b, "mean_absolute_error");
    const auto x = a.data();
    const auto y = b.data();
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - y[i]);
    return s / static_cast<double>(x.size());
}

double gaussian_pyramid_loss(const Image& a, const Image& b, int levels) {
    require_same_shape(a, b, "gaussian_pyramid_loss");
    if (levels < 1) throw InvalidArgument("gaussian_pyramid_loss: levels must be at least 1");
    if (levels > 30 || std::min(a.height(), a.width()) < (1 << (levels - 1)))
        throw InvalidArgument("gaussian_pyramid_loss: too many levels for image size");

    Image la = a;
    Image lb = b;
    double total = mean_absolute_error(la, lb);
    for (int level = 1; level < levels; ++level) {
        la = pyramid_down(la);
        lb = pyramid_down(lb);
        total += mean_absolute_error(la, lb);
    }
    return total;
}

namespace {

void require_stain_pair(const Image& real, const Image& gen, const char* what) {
    require_same_shape(real, gen, what);
    if (real.channels() != 3) throw InvalidArgument(std::string(what) + ": expected 3-channel images");
}

} // namespace

double dab_cf_loss(const Image& real, const Image& gen, const StainContext& ctx) {
    require_stain_pair(real, gen, "dab_cf_loss");
    const Plane c_real = dab_concentration(real, ctx.stains, ctx.i0, ctx.eps).plane;
    const Plane c_gen = dab_concentration(gen, ctx.stains, ctx.i0, ctx.eps).plane;
    double s = 0.0;
    for (std::size_t i = 0; i < c_real.size(); ++i) {
        const double d = c_real.values[i] - c_gen.values[i];
        s += d * d;
    }
    return s / static_cast<double>(c_real.size());
}

double gcbr_loss(const Image& real, const Image& gen, const StainContext& ctx) {
    require_stain_pair(real, gen, "gcbr_loss");
    if (real.height() < 3 || real.width() < 3) throw InvalidArgument("gcbr_loss: images smaller than 3x3");
    const WeightMap eta = normalize_weight(dab_concentration(real, ctx.stains, ctx.i0, ctx.eps));
    double eta_sum = 0.0;
    for (double e : eta.values) eta_sum += e;
    if (eta_sum < 1e-12) return 0.0;

    const GradientMap d_real = gradient_magnitude(sobel(luminance(real)));
    const GradientMap d_gen = gradient_magnitude(sobel(luminance(gen)));
    double s = 0.0;
    for (std::size_t i = 0; i < eta.size(); ++i) {
        const double d = d_gen.values[i] - d_real.values[i];
        s += eta.values[i] * d * d;
    }
    return s / eta_sum;
}

LossBreakdown total_loss(int stage, const LossTerms& terms, const LossConfig& cfg) {
    LossBreakdown b{stage, terms, 0.0};
    switch (stage) {
    case 1:
        b.total = terms.adv + cfg.lambda_patchnce * terms.patchnce + cfg.lambda_asp * terms.asp +
                  cfg.lambda_gp * terms.gp;
        break;
    case 2: b.total = cfg.lambda_dab * terms.dab_cf; break;
    case 3: b.total = cfg.lambda_grad * terms.gcbr; break;
    default: throw InvalidArgument("invalid stage " + std::to_string(stage) + " (expected 1, 2 or 3)");
    }
    return b;
}

std::string to_json(const LossBreakdown& b) {
    nlohmann::ordered_json j;
    j["stage"] = b.stage;
    switch (b.stage) {
    case 1:
        j["adv"] = b.terms.adv;
        j["patchnce"] = b.terms.patchnce;
        j["asp"] = b.terms.asp;
        j["gp"] = b.terms.gp;
        break;
    case 2: j["dab_cf"] = b.terms.dab_cf; break;
    case 3: j["gcbr"] = b.terms.gcbr; break;
    default: break;
    }
    j["total"] = b.total;
    return j.dump();
}

} // namespace progstain
