#pragma once

#include <cstdint>

#include "progstain/losses.hpp"

namespace progstain {

struct EmbedParams {
    std::uint64_t seed = 0;
    int patch = 8;
    int dim = 64;
    int stride = 4;
    /// Number of pyramid scales contributing a layer.
    int layers = 2;
    /// Cap on negatives per location; 0 keeps every other location.
    int max_negatives = 64;

    friend bool operator==(const EmbedParams&, const EmbedParams&) = default;
};

/// Patch embeddings of one image at one scale, in raster order of patch
/// origins.
struct PatchEmbeddings {
    int rows = 0;
    int cols = 0;
    std::vector<Embedding> embeddings;
};

/// Stand-in encoder: every patch at `stride` is flattened, centered on its
/// own mean, multiplied by a fixed Gaussian projection drawn from `seed`,
/// and L2-normalized. Constant patches map to the zero vector.
PatchEmbeddings patch_embed(const Image& img, std::uint64_t seed, int patch, int dim, int stride);

/// Pairs location s of `query` with location s of `key`; negatives are the
/// key embeddings of other locations, taken in a seeded random order and
/// capped at max_negatives (0 = no cap).
EmbeddingLayer contrastive_layer(const PatchEmbeddings& query, const PatchEmbeddings& key,
                                 std::uint64_t seed, int max_negatives);

/// Multi-scale pyramid: layer l embeds Gaussian-pyramid level l of both
/// images with seed + l. Scales whose size drops below the patch are skipped.
EmbeddingPyramid embedding_pyramid(const Image& query, const Image& key, const EmbedParams& params);

} // namespace progstain
