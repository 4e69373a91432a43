#include "progstain/refine.hpp"

#include "json.hpp"

#include "progstain/fixture.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace progstain {

PixelField grad_dab_cf(const Image& real, const Image& gen, const StainContext& ctx) {
    require_same_shape(real, gen, "grad_dab_cf");
    if (real.channels() != 3) throw InvalidArgument("grad_dab_cf: expected 3-channel images");
    const Plane c_real = dab_concentration(real, ctx.stains, ctx.i0, ctx.eps).plane;
    const Plane c_gen = dab_concentration(gen, ctx.stains, ctx.i0, ctx.eps).plane;
    const Vec3& unmix = ctx.stains.unmixing()[static_cast<int>(Stain::dab)];
    const double n = static_cast<double>(gen.pixel_count());

    PixelField grad = PixelField::zeros_like(gen);
    const auto in = gen.data();
    for (std::size_t p = 0; p < gen.pixel_count(); ++p) {
        const double d_conc = 2.0 / n * (c_gen.values[p] - c_real.values[p]);
        if (d_conc == 0.0) continue;
        for (int k = 0; k < 3; ++k) {
            const double d_od = -1.0 / (std::numbers::ln10 * (in[3 * p + k] + ctx.eps));
            grad.values[3 * p + k] = d_conc * unmix[k] * d_od;
        }
    }
    return grad;
}

PixelField grad_gcbr(const Image& real, const Image& gen, const StainContext& ctx) {
    require_same_shape(real, gen, "grad_gcbr");
    if (real.channels() != 3) throw InvalidArgument("grad_gcbr: expected 3-channel images");
    if (real.height() < 3 || real.width() < 3) throw InvalidArgument("grad_gcbr: images smaller than 3x3");

    PixelField grad = PixelField::zeros_like(gen);
    const WeightMap eta = normalize_weight(dab_concentration(real, ctx.stains, ctx.i0, ctx.eps));
    double eta_sum = 0.0;
    for (double e : eta.values) eta_sum += e;
    if (eta_sum < 1e-12) return grad;

    const GradientMap d_real = gradient_magnitude(sobel(luminance(real)));
    const SobelResponse s_gen = sobel(luminance(gen));
    const GradientMap d_gen = gradient_magnitude(s_gen);

    Plane d_gx(gen.height(), gen.width());
    Plane d_gy(gen.height(), gen.width());
    for (std::size_t i = 0; i < eta.size(); ++i) {
        const double d = d_gen.values[i];
        if (d == 0.0) continue;
        const double d_mag = 2.0 * eta.values[i] * (d - d_real.values[i]) / eta_sum;
        d_gx.values[i] = d_mag * s_gen.gx.values[i] / d;
        d_gy.values[i] = d_mag * s_gen.gy.values[i] / d;
    }
    const Plane d_gray = sobel_adjoint(d_gx, d_gy);

    const GrayWeights w;
    for (std::size_t p = 0; p < d_gray.size(); ++p) {
        grad.values[3 * p] = w.r * d_gray.values[p];
        grad.values[3 * p + 1] = w.g * d_gray.values[p];
        grad.values[3 * p + 2] = w.b * d_gray.values[p];
    }
    return grad;
}

const char* to_string(LossId id) noexcept { return id == LossId::dab_cf ? "dab_cf" : "gcbr"; }

LossId parse_loss_id(const std::string& name) {
    if (name == "dab_cf") return LossId::dab_cf;
    if (name == "gcbr") return LossId::gcbr;
    throw InvalidArgument("unknown loss '" + name + "' (expected dab_cf|gcbr)");
}

double evaluate_loss(LossId id, const Image& real, const Image& gen, const StainContext& ctx) {
    return id == LossId::dab_cf ? dab_cf_loss(real, gen, ctx) : gcbr_loss(real, gen, ctx);
}

PixelField analytic_grad(LossId id, const Image& real, const Image& gen, const StainContext& ctx) {
    return id == LossId::dab_cf ? grad_dab_cf(real, gen, ctx) : grad_gcbr(real, gen, ctx);
}

PixelField finite_diff_grad(const std::function<double(const Image&)>& loss, const Image& at, double h) {
    if (!(h > 0.0)) throw InvalidArgument("finite_diff_grad: step must be positive");
    PixelField grad = PixelField::zeros_like(at);
    std::vector<double> buf(at.data().begin(), at.data().end());
    auto eval = [&](std::size_t i, double v) {
        const double saved = buf[i];
        buf[i] = v;
        const double l = loss(Image(at.height(), at.width(), at.channels(), buf));
        buf[i] = saved;
        return l;
    };
    for (std::size_t i = 0; i < buf.size(); ++i) {
        const double x = buf[i];
        const bool up = x + h <= 1.0;
        const bool down = x - h >= 0.0;
        if (up && down) {
            grad.values[i] = (eval(i, x + h) - eval(i, x - h)) / (2.0 * h);
        } else if (up) {
            grad.values[i] = (eval(i, x + h) - loss(at)) / h;
        } else {
            grad.values[i] = (loss(at) - eval(i, x - h)) / h;
        }
    }
    return grad;
}

PixelField finite_diff_grad(LossId id, const Image& real, const Image& gen, const StainContext& ctx,
                            double h) {
    return finite_diff_grad([&](const Image& g) { return evaluate_loss(id, real, g, ctx); }, gen, h);
}

double max_relative_error(const PixelField& analytic, const PixelField& numeric,
                          const std::vector<unsigned char>* mask) {
    if (analytic.values.size() != numeric.values.size())
        throw InvalidArgument("max_relative_error: field size mismatch");
    double scale = 0.0;
    for (double f : numeric.values) scale = std::max(scale, std::abs(f));
    const double floor = 1e-6 * scale + 1e-300;
    double worst = 0.0;
    for (std::size_t i = 0; i < numeric.values.size(); ++i) {
        if (mask && !(*mask)[i]) continue;
        const double a = analytic.values[i];
        const double f = numeric.values[i];
        worst = std::max(worst, std::abs(a - f) / std::max({std::abs(a), std::abs(f), floor}));
    }
    return worst;
}

std::vector<unsigned char> gcbr_smooth_mask(const Image& gen, double threshold) {
    const GradientMap d = gradient_magnitude(sobel(luminance(gen)));
    const int h = gen.height();
    const int w = gen.width();
    // A gray pixel feeds the Sobel outputs of its clamped 3x3 neighborhood.
    Plane rough(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            if (d(r, c) > threshold) continue;
            for (int dr = -1; dr <= 1; ++dr)
                for (int dc = -1; dc <= 1; ++dc)
                    rough(std::clamp(r + dr, 0, h - 1), std::clamp(c + dc, 0, w - 1)) = 1.0;
        }
    std::vector<unsigned char> mask(gen.data().size(), 1);
    for (std::size_t p = 0; p < rough.size(); ++p)
        if (rough.values[p] != 0.0)
            for (int k = 0; k < gen.channels(); ++k) mask[p * gen.channels() + k] = 0;
    return mask;
}

GradientCheck gradient_check(LossId id, std::uint64_t seed, int size, const StainContext& ctx, double h) {
    if (size < 3) throw InvalidArgument("gradient_check: size must be at least 3");
    const Image real = random_image(seed, size, size, 3, 0.05, 0.95);
    const Image gen = random_image(seed ^ 0x9e3779b97f4a7c15ULL, size, size, 3, 0.05, 0.95);
    const PixelField analytic = analytic_grad(id, real, gen, ctx);
    const PixelField numeric = finite_diff_grad(id, real, gen, ctx, h);

    GradientCheck out;
    out.loss = id;
    out.tolerance = id == LossId::dab_cf ? kDabCfGradTolerance : kGcbrGradTolerance;
    if (id == LossId::gcbr) {
        const auto mask = gcbr_smooth_mask(gen);
        out.checked = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
        out.max_relative_error = max_relative_error(analytic, numeric, &mask);
    } else {
        out.checked = analytic.values.size();
        out.max_relative_error = max_relative_error(analytic, numeric);
    }
    out.passed = out.max_relative_error < out.tolerance;
    return out;
}

const char* to_string(OptimizerKind k) noexcept {
    return k == OptimizerKind::adam ? "adam" : "gradient_descent";
}

OptimizerKind parse_optimizer(const std::string& name) {
    if (name == "adam") return OptimizerKind::adam;
    if (name == "gradient_descent" || name == "gd" || name == "sgd") return OptimizerKind::gradient_descent;
    throw InvalidArgument("unknown optimizer '" + name + "' (expected adam|gradient_descent)");
}

void StageConfig::validate() const {
    if (stage != 2 && stage != 3) throw InvalidArgument("refinement stage must be 2 or 3");
    if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be positive");
    if (max_iters < 1) throw InvalidArgument("max_iters must be at least 1");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        throw InvalidArgument("adam betas must lie in [0, 1)");
    if (!(adam_eps > 0.0)) throw InvalidArgument("adam_eps must be positive");
    if (!(stop_tol >= 0.0)) throw InvalidArgument("stop_tol must be nonnegative");
}

std::string trace_to_jsonl(const RefineTrace& trace) {
    std::ostringstream out;
    for (std::size_t i = 0; i < trace.losses.size(); ++i) {
        nlohmann::ordered_json j;
        j["iter"] = i;
        j["loss"] = trace.losses[i];
        out << j.dump() << '\n';
    }
    return out.str();
}

namespace {

LossBreakdown stage_breakdown(int stage, double raw, const LossConfig& cfg) {
    LossTerms terms;
    (stage == 2 ? terms.dab_cf : terms.gcbr) = raw;
    return total_loss(stage, terms, cfg);
}

} // namespace

RefineResult refine_stage(const Image& init, const Image& real, const StageConfig& cfg,
                          const LossConfig& loss_cfg, const StainContext& ctx) {
    cfg.validate();
    require_same_shape(init, real, "refine_stage");
    const LossId id = cfg.stage == 2 ? LossId::dab_cf : LossId::gcbr;
    const double weight = cfg.stage == 2 ? loss_cfg.lambda_dab : loss_cfg.lambda_grad;

    RefineTrace trace;
    trace.stage = cfg.stage;
    Image current = init;
    Image best = init;
    double loss = evaluate_loss(id, real, current, ctx);
    const double initial = loss;
    double best_loss = loss;
    trace.losses.push_back(loss);
    trace.initial = stage_breakdown(cfg.stage, loss, loss_cfg);

    std::vector<double> x(init.data().begin(), init.data().end());
    std::vector<double> m(x.size(), 0.0);
    std::vector<double> v(x.size(), 0.0);
    double beta1_pow = 1.0;
    double beta2_pow = 1.0;

    for (int it = 1; it <= cfg.max_iters && loss > kConvergedLoss; ++it) {
        const PixelField grad = analytic_grad(id, real, current, ctx);
        if (cfg.optimizer == OptimizerKind::adam) {
            beta1_pow *= cfg.beta1;
            beta2_pow *= cfg.beta2;
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double g = weight * grad.values[i];
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
                const double m_hat = m[i] / (1.0 - beta1_pow);
                const double v_hat = v[i] / (1.0 - beta2_pow);
                x[i] = std::clamp(x[i] - cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_eps), 0.0, 1.0);
            }
        } else {
            for (std::size_t i = 0; i < x.size(); ++i)
                x[i] = std::clamp(x[i] - cfg.learning_rate * weight * grad.values[i], 0.0, 1.0);
        }
        current = Image(init.height(), init.width(), init.channels(), x);

        const double previous = loss;
        loss = evaluate_loss(id, real, current, ctx);
        trace.losses.push_back(loss);
        trace.iterations = it;
        if (!std::isfinite(loss) || loss > 10.0 * initial) {
            throw DivergenceError("stage " + std::to_string(cfg.stage) + " diverged at iteration " +
                                  std::to_string(it) + ": loss " + std::to_string(loss) +
                                  " exceeds 10x the initial " + std::to_string(initial));
        }
        if (loss < best_loss) {
            best_loss = loss;
            best = current;
            trace.best_index = trace.losses.size() - 1;
        }
        const double decrease = (previous - loss) / previous;
        if (decrease >= 0.0 && decrease < cfg.stop_tol) break;
    }

    trace.final = stage_breakdown(cfg.stage, best_loss, loss_cfg);
    return {std::move(best), std::move(trace)};
}

ProgressiveResult run_progressive(const Image& init, const Image& real, const StageConfig& stage2,
                                  const StageConfig& stage3, const LossConfig& loss_cfg,
                                  const StainContext& ctx) {
    if (stage2.stage != 2 || stage3.stage != 3)
        throw InvalidArgument("run_progressive: expected a stage-2 then a stage-3 configuration");
    RefineResult color = refine_stage(init, real, stage2, loss_cfg, ctx);
    RefineResult boundary = refine_stage(color.image, real, stage3, loss_cfg, ctx);

    ProgressiveResult out;
    out.dab_cf_before_stage3 = dab_cf_loss(real, color.image, ctx);
    out.dab_cf_after_stage3 = dab_cf_loss(real, boundary.image, ctx);
    out.stage2_output = std::move(color.image);
    out.image = std::move(boundary.image);
    out.stage2 = std::move(color.trace);
    out.stage3 = std::move(boundary.trace);
    return out;
}

} // namespace progstain
