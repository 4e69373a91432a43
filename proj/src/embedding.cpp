#include "progstain/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace progstain {

namespace {
constexpr double kFlatPatchTolerance = 1e-12;
}

PatchEmbeddings patch_embed(const Image& img, std::uint64_t seed, int patch, int dim, int stride) {
    if (patch < 1 || dim < 1 || stride < 1)
        throw InvalidArgument("patch_embed: patch, dim and stride must be positive");
    if (patch > std::min(img.height(), img.width()))
        throw InvalidArgument("patch_embed: empty patch grid (patch larger than image)");

    const int ch = img.channels();
    const std::size_t in_dim = static_cast<std::size_t>(patch) * patch * ch;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> projection(static_cast<std::size_t>(dim) * in_dim);
    for (double& p : projection) p = normal(rng);

    PatchEmbeddings out;
    out.rows = (img.height() - patch) / stride + 1;
    out.cols = (img.width() - patch) / stride + 1;
    out.embeddings.reserve(static_cast<std::size_t>(out.rows) * out.cols);

    std::vector<double> flat(in_dim);
    for (int pr = 0; pr < out.rows; ++pr) {
        for (int pc = 0; pc < out.cols; ++pc) {
            std::size_t i = 0;
            for (int r = 0; r < patch; ++r)
                for (int c = 0; c < patch; ++c)
                    for (int k = 0; k < ch; ++k) flat[i++] = img(pr * stride + r, pc * stride + c, k);
            const double mean = std::accumulate(flat.begin(), flat.end(), 0.0) / static_cast<double>(in_dim);
            double spread = 0.0;
            for (double& f : flat) {
                f -= mean;
                spread = std::max(spread, std::abs(f));
            }
            // Rounding in the mean leaves ~1e-17 residue on flat patches.
            if (spread < kFlatPatchTolerance) std::fill(flat.begin(), flat.end(), 0.0);

            std::vector<double> z(dim, 0.0);
            for (int d = 0; d < dim; ++d) {
                const double* row = projection.data() + static_cast<std::size_t>(d) * in_dim;
                double s = 0.0;
                for (std::size_t j = 0; j < in_dim; ++j) s += row[j] * flat[j];
                z[d] = s;
            }
            out.embeddings.push_back(Embedding::normalized(std::move(z)));
        }
    }
    return out;
}

EmbeddingLayer contrastive_layer(const PatchEmbeddings& query, const PatchEmbeddings& key,
                                 std::uint64_t seed, int max_negatives) {
    if (query.embeddings.size() != key.embeddings.size())
        throw InvalidArgument("contrastive_layer: query and key grids differ");
    const std::size_t n = key.embeddings.size();
    std::mt19937_64 rng(seed);
    EmbeddingLayer layer;
    layer.reserve(n);
    std::vector<std::size_t> others;
    for (std::size_t s = 0; s < n; ++s) {
        others.clear();
        for (std::size_t j = 0; j < n; ++j)
            if (j != s) others.push_back(j);
        std::shuffle(others.begin(), others.end(), rng);
        if (max_negatives > 0 && others.size() > static_cast<std::size_t>(max_negatives))
            others.resize(max_negatives);

        PatchSample sample{query.embeddings[s], key.embeddings[s], {}};
        sample.negatives.reserve(others.size());
        for (std::size_t j : others) sample.negatives.push_back(key.embeddings[j]);
        layer.push_back(std::move(sample));
    }
    return layer;
}

EmbeddingPyramid embedding_pyramid(const Image& query, const Image& key, const EmbedParams& params) {
    require_same_shape(query, key, "embedding_pyramid");
    if (params.layers < 1) throw InvalidArgument("embedding_pyramid: need at least one layer");
    EmbeddingPyramid pyr;
    Image q = query;
    Image k = key;
    for (int l = 0; l < params.layers; ++l) {
        if (l > 0) {
            q = pyramid_down(q);
            k = pyramid_down(k);
        }
        if (params.patch > std::min(q.height(), q.width())) break;
        const std::uint64_t seed = params.seed + static_cast<std::uint64_t>(l);
        const PatchEmbeddings eq = patch_embed(q, seed, params.patch, params.dim, params.stride);
        const PatchEmbeddings ek = patch_embed(k, seed, params.patch, params.dim, params.stride);
        pyr.layers.push_back(contrastive_layer(eq, ek, seed, params.max_negatives));
    }
    if (pyr.layers.empty()) throw InvalidArgument("embedding_pyramid: image smaller than one patch");
    return pyr;
}

} // namespace progstain
