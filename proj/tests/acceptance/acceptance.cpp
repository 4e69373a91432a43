// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "progstain/cli.hpp"
#include "progstain/deconv.hpp"
#include "progstain/fixture.hpp"
#include "progstain/gradients.hpp"
#include "progstain/image_io.hpp"
#include "progstain/losses.hpp"
#include "progstain/metrics.hpp"
#include "progstain/refine.hpp"

using namespace progstain;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome deconv_round_trip() {
    const StainMatrix m;
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        OdImage od{16, 16, std::vector<double>(16 * 16 * 3)};
        for (double& v : od.values) v = u(rng);
        worst = std::max(worst, max_abs_diff(od.values, recompose(separate_stains(od, m), m).values));
    }
    return {worst < 1e-9, fmt("100 random 16x16 OD images, max abs error %.3e (tol 1e-9)", worst)};
}

Outcome od_inverse_pair() {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const Image img = random_image(seed, 16, 16, 3, 0.01, 0.99);
        worst = std::max(worst, max_abs_diff(img.data(), od_to_rgb(rgb_to_od(img)).data()));
    }
    return {worst < 1e-12, fmt("50 random images in [0.01,0.99], max abs error %.3e (tol 1e-12)", worst)};
}

Outcome dab_invariance() {
    const StainMatrix m;
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const Fixture fx = synth_fixture(seed, 64, 64, 3);
        std::mt19937_64 rng(seed + 1000);
        std::uniform_real_distribution<double> u(0.0, 0.8);
        Plane h = fx.truth.hema_truth, e(64, 64);
        for (double& v : h.values) v += u(rng);
        for (double& v : e.values) v = u(rng);
        const Image real = compose_image(fx.truth.hema_truth, Plane(64, 64, 0.0), fx.truth.dab_truth, m);
        const Image gen = compose_image(h, e, fx.truth.dab_truth, m);
        worst = std::max(worst, dab_cf_loss(real, gen));
    }
    return {worst < 1e-12, fmt("50 fixtures with H/E-only changes, max L_DAB-CF %.3e (tol 1e-12)", worst)};
}

Outcome known_offset() {
    const Fixture fx = synth_fixture(7, 64, 64, 3);
    const Image real = compose_with_dab_offset(fx.truth, 0.0);
    const Image gen = compose_with_dab_offset(fx.truth, 0.2);
    const double l = dab_cf_loss(real, gen);
    LossTerms terms;
    terms.dab_cf = l;
    const double total = total_loss(2, terms, LossConfig{}).total;
    const bool ok = std::abs(l - 0.04) < 1e-9 && std::abs(total - 0.02) < 1e-9;
    return {ok, fmt("delta 0.2: L_DAB-CF %.12f (want 0.04 +- 1e-9), stage-2 total %.12f (want 0.02)", l, total)};
}

Outcome gradient_checks() {
    double worst_dab = 0.0, worst_gcbr = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        worst_dab = std::max(worst_dab, gradient_check(LossId::dab_cf, seed, 8).max_relative_error);
        worst_gcbr = std::max(worst_gcbr, gradient_check(LossId::gcbr, seed, 8).max_relative_error);
    }
    return {worst_dab < kDabCfGradTolerance && worst_gcbr < kGcbrGradTolerance,
            fmt("20 random 8x8 pairs, dab_cf max rel err %.3e (tol 1e-4), gcbr %.3e (tol 1e-3)", worst_dab,
                worst_gcbr)};
}

Outcome progressive_convergence() {
    const Fixture fx = synth_fixture(7, 64, 64, 3);
    const Image gen = gaussian_blur(compose_with_dab_offset(fx.truth, 0.2), 1.0);
    const ProgressiveResult r =
        run_progressive(gen, fx.ihc_like, StageConfig{.stage = 2}, StageConfig{.stage = 3}, LossConfig{});
    const double d0 = r.stage2.initial.terms.dab_cf, d1 = r.stage2.final.terms.dab_cf;
    const double g0 = r.stage3.initial.terms.gcbr, g1 = r.stage3.final.terms.gcbr;
    const double dab_red = 1.0 - d1 / d0, gcbr_red = 1.0 - g1 / g0;
    const bool handoff = r.stage3.losses.front() == gcbr_loss(fx.ihc_like, r.stage2_output);
    const bool ok = r.stage2.iterations <= 500 && dab_red >= 0.9 && gcbr_red >= 0.5 && handoff;
    return {ok, fmt("stage 2 L_DAB-CF %.3e -> %.3e (-%.1f%%, need 90%%), stage 3 L_GCBR %.3e -> %.3e (-%.1f%%, "
                    "need 50%%), stage-3 input is stage-2 output: %s",
                    d0, d1, 100 * dab_red, g0, g1, 100 * gcbr_red, handoff ? "yes" : "no")};
}

Outcome contrastive_identities() {
    bool ok = true;
    const Embedding x = Embedding::normalized({1.0, 0.0, 0.0});
    ok &= info_nce(x, x, {}, 0.07) == 0.0;
    double worst_uniform = 0.0;
    for (int n : {1, 4, 16}) {
        const std::vector<Embedding> negs(n, x);
        worst_uniform = std::max(worst_uniform, std::abs(info_nce(x, x, negs, 0.07) - std::log(n + 1.0)));
    }
    ok &= worst_uniform < 1e-12;

    std::mt19937_64 rng(99);
    std::normal_distribution<double> nd;
    auto rnd = [&] {
        std::vector<double> v(16);
        for (double& c : v) c = nd(rng);
        return Embedding::normalized(v);
    };
    int exact = 0;
    double worst_sum = 0.0;
    for (int k = 0; k < 10; ++k) {
        EmbeddingPyramid pyr;
        for (int l = 0; l < 3; ++l) {
            EmbeddingLayer layer;
            for (int s = 0; s < 12; ++s) {
                PatchSample p{rnd(), rnd(), {}};
                for (int q = 0; q < 6; ++q) p.negatives.push_back(rnd());
                layer.push_back(p);
            }
            pyr.layers.push_back(layer);
        }
        LossConfig cfg;
        exact += asp_loss(pyr, cfg) == patchnce_loss(pyr, cfg.tau);
        for (double t : {0.0, 37.0, 100.0}) {
            cfg.t = t;
            for (const auto& layer : pyr.layers) {
                double sum = 0.0;
                for (double w : layer_weights(layer, cfg)) sum += w;
                worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
            }
        }
    }
    ok &= exact == 10 && worst_sum < 1e-12;
    return {ok, fmt("empty negatives -> 0, ln(N+1) err %.1e, asp==patchnce at t=0 on %d/10 pyramids, "
                    "weight-sum err %.1e",
                    worst_uniform, exact, worst_sum)};
}

Outcome adaptive_endpoints() {
    bool ok = true;
    for (double sim = -1.0; sim <= 1.0; sim += 0.25) {
        ok &= adaptive_weight(sim, 0.0, 100.0) == 1.0;
        ok &= std::abs(adaptive_weight(sim, 100.0, 100.0) - similarity_weight(SimilarityKind::affine, sim)) < 1e-15;
    }
    const double mid = adaptive_weight(0.0, 50.0, 100.0);
    ok &= std::abs(mid - 0.75) < 1e-15;
    return {ok, fmt("w(t=0)=1, w(t=T)=h(sim) for sim in [-1,1], midpoint %.15f (want 0.75)", mid)};
}

double brute_ssim(const Image& a, const Image& b) {
    std::vector<double> g(11);
    double gs = 0.0;
    for (int i = 0; i < 11; ++i) gs += g[i] = std::exp(-(i - 5.0) * (i - 5.0) / 4.5);
    const double c1 = 1e-4, c2 = 9e-4;
    double total = 0.0;
    int n = 0;
    for (int r0 = 0; r0 + 11 <= a.height(); ++r0)
        for (int c0 = 0; c0 + 11 <= a.width(); ++c0) {
            double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
            for (int i = 0; i < 11; ++i)
                for (int j = 0; j < 11; ++j) {
                    const double w = g[i] * g[j] / (gs * gs);
                    mx += w * a(r0 + i, c0 + j);
                    my += w * b(r0 + i, c0 + j);
                }
            for (int i = 0; i < 11; ++i)
                for (int j = 0; j < 11; ++j) {
                    const double w = g[i] * g[j] / (gs * gs);
                    const double dx = a(r0 + i, c0 + j) - mx, dy = b(r0 + i, c0 + j) - my;
                    sxx += w * dx * dx;
                    syy += w * dy * dy;
                    sxy += w * dx * dy;
                }
            total += (2 * mx * my + c1) * (2 * sxy + c2) / ((mx * mx + my * my + c1) * (sxx + syy + c2));
            ++n;
        }
    return total / n;
}

Outcome ssim_oracle() {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Image a = random_image(seed, 32, 32, 1), b = random_image(seed + 100, 32, 32, 1);
        worst = std::max(worst, std::abs(ssim(a, b) - brute_ssim(a, b)));
    }
    const double c = ssim(Image::filled(16, 16, 1, 0.2), Image::filled(16, 16, 1, 0.8));
    const Image z = Image::filled(4, 4, 1, 0.0);
    const double p20 = psnr(z, Image::filled(4, 4, 1, 0.1)), p0 = psnr(z, Image::filled(4, 4, 1, 1.0));
    const bool ok = worst < 1e-9 && std::abs(c - 0.47075) < 1e-4 && std::abs(p20 - 20.0) < 1e-12 && p0 == 0.0;
    return {ok, fmt("brute-force max diff %.3e (tol 1e-9), constant case %.6f (want 0.47075), PSNR %.12f / %.1f dB",
                    worst, c, p20, p0)};
}

Outcome metric_monotonicity() {
    int ordered = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Fixture fx = synth_fixture(seed, 64, 64, 3);
        const MetricReport r1 = evaluate_pair(fx.ihc_like, gaussian_blur(fx.ihc_like, 1.0));
        const MetricReport r2 = evaluate_pair(fx.ihc_like, gaussian_blur(fx.ihc_like, 2.0));
        ordered += r1.ssim > r2.ssim && r1.gradient_mse < r2.gradient_mse;
    }
    return {ordered == 5, fmt("blur sigma 1 vs 2: SSIM falls and gradient MSE rises on %d/5 fixtures", ordered)};
}

Outcome sobel_hand_cases() {
    bool ok = true;
    const int w = 9;
    std::vector<double> ramp(w * w), step(w * w);
    for (int r = 0; r < w; ++r)
        for (int c = 0; c < w; ++c) {
            ramp[r * w + c] = double(c) / (w - 1);
            step[r * w + c] = c < 4 ? 0.0 : 1.0;
        }
    const SobelResponse sr = sobel(Image(w, w, 1, ramp));
    for (int r = 1; r < w - 1; ++r)
        for (int c = 1; c < w - 1; ++c) ok &= std::abs(sr.gx(r, c) - 8.0 / (w - 1)) < 1e-14 && sr.gy(r, c) == 0.0;
    const SobelResponse ss = sobel(Image(w, w, 1, step));
    for (int r = 0; r < w; ++r) ok &= ss.gx(r, 3) == 4.0 && ss.gy(r, 3) == 0.0;
    const SobelResponse sc = sobel(Image::filled(w, w, 1, 0.37));
    for (std::size_t i = 0; i < sc.gx.size(); ++i) ok &= sc.gx.values[i] == 0.0 && sc.gy.values[i] == 0.0;
    return {ok, "ramp interior gx = 8/(w-1), step edge gx = 4, constant -> zero maps"};
}

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / ("progstain_accept_" + std::to_string(std::random_device{}()));
    fs::create_directories(root);
    auto run = [&](const std::string& tag) {
        std::ostringstream out, err;
        const fs::path d = root / tag;
        fs::create_directories(d);
        int code = run_cli({"synth", "--seed", "7", "--size", "64", "--cells", "3", "--out", (d / "fx").string()},
                           out, err);
        const Fixture fx = synth_fixture(7, 64, 64, 3);
        save_image(gaussian_blur(compose_with_dab_offset(fx.truth, 0.2), 1.0), d / "init.png");
        code |= run_cli({"refine", (d / "init.png").string(), (d / "fx_ihc.png").string(), "--out",
                         (d / "out.png").string(), "--trace", (d / "trace").string()},
                        out, err);
        // Summaries name the output paths; only the directory differs.
        std::string blob = out.str();
        for (std::size_t pos; (pos = blob.find(d.string())) != std::string::npos;) blob.replace(pos, d.string().size(), "<dir>");
        for (const char* f : {"fx_he.png", "fx_ihc.png", "fx_truth.json", "out.png", "trace_stage2.jsonl",
                              "trace_stage3.jsonl"})
            blob += "|" + read_bytes(d / f);
        return std::pair{code, blob};
    };
    const auto a = run("a"), b = run("b");
    std::error_code ec;
    fs::remove_all(root, ec);
    const bool ok = a.first == 0 && b.first == 0 && a.second == b.second;
    return {ok, fmt("synth + refine twice: exit codes %d/%d, outputs %s", a.first, b.first,
                    a.second == b.second ? "byte-identical" : "DIFFER")};
}

struct Criterion {
    const char* name;
    std::function<Outcome()> run;
    double time_limit_s;
};

} // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {"deconvolution round trip", deconv_round_trip, 1.0},
        {"OD inverse pair", od_inverse_pair, 0.0},
        {"DAB invariance", dab_invariance, 0.0},
        {"known-offset loss", known_offset, 0.0},
        {"gradient checks", gradient_checks, 30.0},
        {"progressive convergence", progressive_convergence, 120.0},
        {"contrastive-loss identities", contrastive_identities, 0.0},
        {"adaptive-weight endpoints", adaptive_endpoints, 0.0},
        {"SSIM/PSNR oracle", ssim_oracle, 0.0},
        {"metric monotonicity", metric_monotonicity, 0.0},
        {"Sobel hand cases", sobel_hand_cases, 0.0},
        {"determinism", determinism, 0.0},
    };

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const Criterion& c = criteria[i];
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::string timing = fmt("%.2fs", secs);
        if (c.time_limit_s > 0.0) {
            timing += fmt(" (limit %.0fs)", c.time_limit_s);
            if (secs >= c.time_limit_s) o.pass = false;
        }
        std::printf("%s %2zu %-28s %s [%s]\n", o.pass ? "PASS" : "FAIL", i + 1, c.name, o.detail.c_str(),
                    timing.c_str());
        failed += !o.pass;
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
