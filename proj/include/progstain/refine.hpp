#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "progstain/losses.hpp"

namespace progstain {

// ---------------------------------------------------------------------------
// Analytic gradients with respect to the generated image's intensities
// ---------------------------------------------------------------------------

/// dL_DAB-CF / dI_gen. Only the DAB unmixing row contributes:
///   dL/dI_k = (2/N)(c_gen - c_real) * U[dab][k] * (-1 / (ln10 (I_k + eps)))
PixelField grad_dab_cf(const Image& real, const Image& gen, const StainContext& ctx = {});

/// dL_GCBR / dI_gen, back-propagated through the magnitude, the Sobel
/// correlation (with its replicate-padding fold) and the luminance weights.
/// The DAB weight is held constant. Pixels with D_gen = 0 contribute a zero
/// subgradient.
PixelField grad_gcbr(const Image& real, const Image& gen, const StainContext& ctx = {});

enum class LossId { dab_cf, gcbr };

const char* to_string(LossId id) noexcept;
LossId parse_loss_id(const std::string& name);

double evaluate_loss(LossId id, const Image& real, const Image& gen, const StainContext& ctx = {});
PixelField analytic_grad(LossId id, const Image& real, const Image& gen, const StainContext& ctx = {});

/// Central differences (L(I + h e) - L(I - h e)) / 2h for every pixel and
/// channel of `at`. Where a step would leave [0,1] the one-sided
/// difference on the admissible side is used instead.
PixelField finite_diff_grad(const std::function<double(const Image&)>& loss, const Image& at, double h);

PixelField finite_diff_grad(LossId id, const Image& real, const Image& gen, const StainContext& ctx,
                            double h = 1e-5);

/// Largest entrywise relative error |a - f| / max(|a|, |f|, floor), where
/// floor = 1e-6 * max|f| (plus a tiny absolute term) keeps entries that are
/// zero in both fields from dividing by zero. Entries with mask == 0 are
/// skipped when a mask is supplied.
double max_relative_error(const PixelField& analytic, const PixelField& numeric,
                          const std::vector<unsigned char>* mask = nullptr);

/// Entries of `gen` whose GCBR gradient is smooth: every pixel whose Sobel
/// footprint includes the entry has D_gen above `threshold`.
std::vector<unsigned char> gcbr_smooth_mask(const Image& gen, double threshold = 1e-3);

inline constexpr double kDabCfGradTolerance = 1e-4;
inline constexpr double kGcbrGradTolerance = 1e-3;

struct GradientCheck {
    LossId loss = LossId::dab_cf;
    double max_relative_error = 0.0;
    double tolerance = 0.0;
    /// Entries compared (GCBR skips entries next to D_gen <= 1e-3).
    std::size_t checked = 0;
    bool passed = false;
};

/// Compares analytic and central-difference gradients on a random
/// size x size pair drawn from `seed` (intensities in [0.05, 0.95]).
GradientCheck gradient_check(LossId id, std::uint64_t seed, int size, const StainContext& ctx = {},
                             double h = 1e-5);

// ---------------------------------------------------------------------------
// Pixel-space stage optimizer
// ---------------------------------------------------------------------------

enum class OptimizerKind { gradient_descent, adam };

const char* to_string(OptimizerKind k) noexcept;
OptimizerKind parse_optimizer(const std::string& name);

struct StageConfig {
    int stage = 2;
    double learning_rate = 2e-3;
    int max_iters = 500;
    OptimizerKind optimizer = OptimizerKind::adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double stop_tol = 1e-8;

    /// Throws InvalidArgument unless stage is 2 or 3, learning_rate > 0,
    /// max_iters >= 1, betas in [0,1), adam_eps > 0 and stop_tol >= 0.
    void validate() const;

    friend bool operator==(const StageConfig&, const StageConfig&) = default;
};

struct RefineTrace {
    int stage = 2;
    /// Raw stage loss before each update, plus one entry for the final iterate.
    std::vector<double> losses;
    LossBreakdown initial;
    LossBreakdown final;
    int iterations = 0;
    /// Index into `losses` of the iterate that was returned.
    std::size_t best_index = 0;
};

/// One object per recorded loss: {"iter": n, "loss": v}.
std::string trace_to_jsonl(const RefineTrace& trace);

class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RefineResult {
    Image image;
    RefineTrace trace;
};

/// Losses at or below this are treated as converged; no update is taken.
inline constexpr double kConvergedLoss = 1e-20;

/// Minimizes the stage's own weighted loss over the pixels of `init`,
/// projecting onto [0,1] after every step. Stops after max_iters updates,
/// once the loss reaches kConvergedLoss, or once the relative decrease
/// between consecutive losses falls into [0, stop_tol). Returns the
/// lowest-loss iterate seen. Throws DivergenceError if the loss exceeds 10x
/// its initial value.
RefineResult refine_stage(const Image& init, const Image& real, const StageConfig& cfg,
                          const LossConfig& loss_cfg, const StainContext& ctx = {});

struct ProgressiveResult {
    Image stage2_output;
    Image image;
    RefineTrace stage2;
    RefineTrace stage3;
    /// L_DAB-CF of the stage-3 input and of the final image.
    double dab_cf_before_stage3 = 0.0;
    double dab_cf_after_stage3 = 0.0;
};

/// Stage 2 (color) followed by stage 3 (boundary); stage 3 starts from the
/// exact stage-2 output.
ProgressiveResult run_progressive(const Image& init, const Image& real, const StageConfig& stage2,
                                  const StageConfig& stage3, const LossConfig& loss_cfg,
                                  const StainContext& ctx = {});

} // namespace progstain
