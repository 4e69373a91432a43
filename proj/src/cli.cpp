#include "progstain/cli.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>

#include "progstain/config.hpp"
#include "progstain/embedding.hpp"
#include "progstain/fixture.hpp"
#include "progstain/image_io.hpp"
#include "progstain/losses.hpp"
#include "progstain/metrics.hpp"
#include "progstain/refine.hpp"

namespace progstain {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

/// Bad invocation: missing inputs, mismatched images, invalid selectors.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

Image load_input(const fs::path& path) {
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) throw UsageError("input file '" + path.string() + "' does not exist");
    return load_image(path);
}

ToolkitConfig load_toolkit_config(const std::string& path) {
    if (path.empty()) return load_config();
    return load_config(fs::path(path));
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
    f << text;
    f.flush();
    if (!f) throw IoError("'" + path.string() + "': write failed");
}

fs::path with_suffix(const std::string& prefix, const std::string& suffix) { return fs::path(prefix + suffix); }

Image plane_to_image(const Plane& p) { return Image(p.height, p.width, 1, p.values); }

int guarded(std::ostream& err, const std::function<void()>& body) {
    try {
        body();
        return kExitOk;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DivergenceError& e) {
        err << "diverged: " << e.what() << '\n';
        return kExitFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

json stain_summary(const Plane& p) {
    double sum = 0.0;
    double peak = p.values.empty() ? 0.0 : p.values.front();
    for (double v : p.values) {
        sum += v;
        peak = std::max(peak, v);
    }
    return json{{"mean", p.values.empty() ? 0.0 : sum / static_cast<double>(p.size())}, {"max", peak}};
}

void cmd_deconvolve(const std::string& input, const std::string& prefix, const std::string& config,
                    std::ostream& out, std::ostream& err) {
    const ToolkitConfig cfg = load_toolkit_config(config);
    const Image img = load_input(input);
    if (img.channels() != 3) throw UsageError("deconvolve needs a 3-channel image");
    const StainConcentrations c = separate_stains(rgb_to_od(img, cfg.i0, cfg.eps), cfg.stain_matrix());

    json summary;
    json files = json::array();
    for (const ConcentrationMap* map : {&c.hematoxylin, &c.eosin, &c.dab}) {
        const fs::path path = with_suffix(prefix, std::string("_") + stain_name(map->stain) + ".png");
        save_image(plane_to_image(normalize_weight(*map)), path);
        summary[stain_name(map->stain)] = stain_summary(map->plane);
        files.push_back(path.string());
    }
    summary["outputs"] = files;
    out << summary.dump() << '\n';
    err << "wrote " << files.size() << " concentration maps with prefix " << prefix << '\n';
}

void cmd_loss(const std::string& real_path, const std::string& gen_path, int stage, const std::string& input_path,
              double adv, const std::string& config, std::ostream& out) {
    const ToolkitConfig cfg = load_toolkit_config(config);
    const Image real = load_input(real_path);
    const Image gen = load_input(gen_path);
    require_same_shape(real, gen, "loss");

    LossTerms terms;
    const StainContext ctx = cfg.stain_context();
    switch (stage) {
    case 1: {
        const Image source = input_path.empty() ? real : load_input(input_path);
        require_same_shape(source, gen, "loss --input");
        terms.adv = adv;
        terms.asp = asp_loss(embedding_pyramid(gen, real, cfg.embed), cfg.loss);
        terms.patchnce = patchnce_loss(embedding_pyramid(gen, source, cfg.embed), cfg.loss.tau);
        terms.gp = gaussian_pyramid_loss(gen, real, cfg.loss.pyramid_levels);
        break;
    }
    case 2: terms.dab_cf = dab_cf_loss(real, gen, ctx); break;
    case 3: terms.gcbr = gcbr_loss(real, gen, ctx); break;
    default: throw UsageError("stage must be 1, 2 or 3");
    }
    out << to_json(total_loss(stage, terms, cfg.loss)) << '\n';
}

json stage_summary(const RefineTrace& t) {
    return json{{"initial", t.initial.terms.dab_cf + t.initial.terms.gcbr},
                {"final", t.final.terms.dab_cf + t.final.terms.gcbr},
                {"initial_total", t.initial.total},
                {"final_total", t.final.total},
                {"iterations", t.iterations}};
}

void cmd_refine(const std::string& init_path, const std::string& real_path, const std::string& out_path,
                const std::string& trace_prefix, const std::string& config, std::ostream& out, std::ostream& err) {
    const ToolkitConfig cfg = load_toolkit_config(config);
    const Image init = load_input(init_path);
    const Image real = load_input(real_path);
    require_same_shape(init, real, "refine");
    if (init.channels() != 3) throw UsageError("refine needs 3-channel images");

    const ProgressiveResult result =
        run_progressive(init, real, cfg.stage2, cfg.stage3, cfg.loss, cfg.stain_context());
    save_image(result.image, out_path);
    const fs::path trace2 = with_suffix(trace_prefix, "_stage2.jsonl");
    const fs::path trace3 = with_suffix(trace_prefix, "_stage3.jsonl");
    write_text(trace2, trace_to_jsonl(result.stage2));
    write_text(trace3, trace_to_jsonl(result.stage3));

    json summary;
    summary["stage2"] = stage_summary(result.stage2);
    summary["stage3"] = stage_summary(result.stage3);
    summary["dab_cf_before_stage3"] = result.dab_cf_before_stage3;
    summary["dab_cf_after_stage3"] = result.dab_cf_after_stage3;
    summary["output"] = out_path;
    summary["traces"] = json::array({trace2.string(), trace3.string()});
    out << summary.dump() << '\n';

    err << "stage 2 (dab_cf): " << result.stage2.initial.terms.dab_cf << " -> "
        << result.stage2.final.terms.dab_cf << " in " << result.stage2.iterations << " iterations\n"
        << "stage 3 (gcbr):   " << result.stage3.initial.terms.gcbr << " -> " << result.stage3.final.terms.gcbr
        << " in " << result.stage3.iterations << " iterations\n"
        << "dab_cf drift across stage 3: " << result.dab_cf_before_stage3 << " -> " << result.dab_cf_after_stage3
        << '\n';
}

void cmd_metrics(const std::vector<std::string>& paths, std::ostream& out) {
    if (paths.size() < 2 || paths.size() % 2 != 0)
        throw UsageError("metrics expects image pairs: <real> <gen> [<real> <gen> ...]");
    for (std::size_t i = 0; i < paths.size(); i += 2) {
        const Image real = load_input(paths[i]);
        const Image gen = load_input(paths[i + 1]);
        out << to_json(evaluate_pair(real, gen)) << '\n';
    }
}

bool cmd_gradcheck(std::uint64_t seed, int size, const std::string& which, const std::string& config,
                   std::ostream& out, std::ostream& err) {
    const ToolkitConfig cfg = load_toolkit_config(config);
    std::vector<LossId> ids;
    if (which == "all") ids = {LossId::dab_cf, LossId::gcbr};
    else ids = {parse_loss_id(which)};

    bool ok = true;
    for (LossId id : ids) {
        const GradientCheck g = gradient_check(id, seed, size, cfg.stain_context());
        json j{{"loss", to_string(id)},
               {"seed", seed},
               {"size", size},
               {"max_relative_error", g.max_relative_error},
               {"tolerance", g.tolerance},
               {"checked", g.checked},
               {"passed", g.passed}};
        out << j.dump() << '\n';
        err << to_string(id) << ": max relative error " << g.max_relative_error
            << (g.passed ? " (ok)" : " (EXCEEDS TOLERANCE)") << '\n';
        ok = ok && g.passed;
    }
    return ok;
}

void cmd_synth(std::uint64_t seed, int height, int width, int cells, int depth, const std::string& prefix,
               const std::string& config, std::ostream& out, std::ostream& err) {
    const ToolkitConfig cfg = load_toolkit_config(config);
    const Fixture fx = synth_fixture(seed, height, width, cells, cfg.stain_matrix());
    const fs::path he = with_suffix(prefix, "_he.png");
    const fs::path ihc = with_suffix(prefix, "_ihc.png");
    const fs::path truth = with_suffix(prefix, "_truth.json");
    save_image(fx.he_like, he, depth);
    save_image(fx.ihc_like, ihc, depth);
    write_text(truth, fixture_truth_json(fx.truth) + "\n");
    out << json{{"he_like", he.string()}, {"ihc_like", ihc.string()}, {"truth", truth.string()}}.dump() << '\n';
    err << "synthesized " << cells << " cells at " << height << "x" << width << " (seed " << seed << ")\n";
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Stain-aware losses, metrics and progressive pixel-space refinement for virtual IHC"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    std::string config;
    auto add_config = [&](CLI::App* sub) {
        sub->add_option("--config", config, "Config file (key = value); defaults to $PROGSTAIN_CONFIG");
    };

    std::string prefix;
    std::string out_path;
    std::string trace_prefix;
    std::string input;
    std::string real_path;
    std::string gen_path;
    std::string source_path;
    int stage = 0;
    double adv = 0.0;
    std::vector<std::string> pairs;
    std::uint64_t check_seed = 1;
    int check_size = 8;
    std::uint64_t synth_seed = 0;
    int synth_size = 64;
    int cells = 3;
    int depth = 8;
    int height = 0;
    int width = 0;
    std::string which = "all";

    auto* deconvolve = app.add_subcommand("deconvolve", "Separate an RGB image into H, E and DAB concentration maps");
    deconvolve->add_option("image", input, "Input image")->required();
    deconvolve->add_option("--out", prefix, "Output prefix for <prefix>_{hematoxylin,eosin,dab}.png")->required();
    add_config(deconvolve);

    auto* loss = app.add_subcommand("loss", "Print the stage objective for a real/generated pair as JSON");
    loss->add_option("real", real_path, "Reference IHC image")->required();
    loss->add_option("gen", gen_path, "Generated image")->required();
    loss->add_option("--stage", stage, "1 (structure), 2 (color) or 3 (boundary)")->required()->check(CLI::Range(1, 3));
    loss->add_option("--input", source_path, "Source H&E image for PatchNCE (stage 1); defaults to the reference");
    loss->add_option("--adv", adv, "Externally computed adversarial term (stage 1)");
    add_config(loss);

    auto* refine = app.add_subcommand("refine", "Run stage-2 then stage-3 pixel refinement");
    refine->add_option("init", input, "Initial image (stage-1 output)")->required();
    refine->add_option("real", real_path, "Reference IHC image")->required();
    refine->add_option("--out", out_path, "Refined image path")->required();
    refine->add_option("--trace", trace_prefix, "Trace prefix for <prefix>_stage{2,3}.jsonl")->required();
    add_config(refine);

    auto* metrics = app.add_subcommand("metrics", "SSIM, PSNR, gradient MSE and multi-scale hash distance");
    metrics->add_option("images", pairs, "<real> <gen> [<real> <gen> ...]")->required();

    auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic and finite-difference loss gradients");
    gradcheck->add_option("--seed", check_seed, "Random instance seed");
    gradcheck->add_option("--size", check_size, "Square instance size (8..64)")->check(CLI::Range(8, 64));
    gradcheck->add_option("--loss", which, "dab_cf, gcbr or all")
        ->check(CLI::IsMember({"dab_cf", "gcbr", "all"}));
    add_config(gradcheck);

    auto* synth = app.add_subcommand("synth", "Write a synthetic H&E/IHC fixture with ground truth");
    synth->add_option("--seed", synth_seed, "Fixture seed");
    synth->add_option("--size", synth_size, "Square size in pixels (>= 32)")->check(CLI::Range(32, 8192));
    synth->add_option("--height", height, "Height override")->check(CLI::Range(32, 8192));
    synth->add_option("--width", width, "Width override")->check(CLI::Range(32, 8192));
    synth->add_option("--cells", cells, "Number of cells")->check(CLI::NonNegativeNumber);
    synth->add_option("--depth", depth, "PNG bit depth (8 or 16)")->check(CLI::IsMember({8, 16}));
    synth->add_option("--out", prefix, "Output prefix for <prefix>_{he,ihc}.png and <prefix>_truth.json")->required();
    add_config(synth);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        if (const CLI::App* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front())
            err << sub->help();
        else
            err << app.help();
        return kExitUsage;
    }

    if (*deconvolve) return guarded(err, [&] { cmd_deconvolve(input, prefix, config, out, err); });
    if (*loss)
        return guarded(err, [&] { cmd_loss(real_path, gen_path, stage, source_path, adv, config, out); });
    if (*refine)
        return guarded(err, [&] { cmd_refine(input, real_path, out_path, trace_prefix, config, out, err); });
    if (*metrics) return guarded(err, [&] { cmd_metrics(pairs, out); });
    if (*gradcheck) {
        bool passed = false;
        const int code = guarded(err, [&] { passed = cmd_gradcheck(check_seed, check_size, which, config, out, err); });
        if (code != kExitOk) return code;
        return passed ? kExitOk : kExitFailure;
    }
    if (*synth) {
        const int h = height > 0 ? height : synth_size;
        const int w = width > 0 ? width : synth_size;
        return guarded(err, [&] { cmd_synth(synth_seed, h, w, cells, depth, prefix, config, out, err); });
    }
    return kExitUsage;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv{"progstain"};
    for (const std::string& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

} // namespace progstain
