#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "progstain/config.hpp"
#include "progstain/deconv.hpp"
#include "progstain/fixture.hpp"
#include "progstain/gradients.hpp"
#include "progstain/losses.hpp"
#include "progstain/metrics.hpp"
#include "progstain/refine.hpp"

namespace py = pybind11;
using namespace progstain;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// (H, W) arrays become 1-channel images, (H, W, C) arrays C-channel ones.
Image to_image(const Array& a) {
    if (a.ndim() != 2 && a.ndim() != 3) throw InvalidArgument("expected an (H, W) or (H, W, C) array");
    const int h = static_cast<int>(a.shape(0));
    const int w = static_cast<int>(a.shape(1));
    const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
    return Image(h, w, c, std::vector<double>(a.data(), a.data() + a.size()));
}

Array from_values(const std::vector<double>& v, int h, int w, int c) {
    std::vector<py::ssize_t> shape{h, w};
    if (c > 1) shape.push_back(c);
    Array out(shape);
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

Array from_image(const Image& img) {
    return from_values({img.data().begin(), img.data().end()}, img.height(), img.width(), img.channels());
}
Array from_plane(const Plane& p) { return from_values(p.values, p.height, p.width, 1); }
Array from_field(const PixelField& f) { return from_values(f.values, f.height, f.width, f.channels); }

Plane to_plane(const Array& a) {
    if (a.ndim() != 2) throw InvalidArgument("expected an (H, W) array");
    return Plane(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
                 std::vector<double>(a.data(), a.data() + a.size()));
}

ToolkitConfig config_from(const std::optional<std::string>& text) {
    return text ? parse_config(*text, "<python>") : ToolkitConfig{};
}

Embedding to_embedding(const std::vector<double>& v) { return Embedding::normalized(v); }

py::dict trace_dict(const RefineTrace& t) {
    py::dict d;
    d["losses"] = t.losses;
    d["initial_total"] = t.initial.total;
    d["final_total"] = t.final.total;
    d["iterations"] = t.iterations;
    return d;
}

} // namespace

PYBIND11_MODULE(_progstain, m) {
    m.doc() = "Stain-aware losses, refinement and metrics for virtual IHC staining";

    py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_RuntimeError);

    m.def("default_config", [] { return serialize_config(ToolkitConfig{}); },
          "Default configuration in the key = value format.");
    m.def("check_config", [](const std::string& text) { return serialize_config(parse_config(text, "<python>")); },
          py::arg("text"), "Validates a configuration and returns it with all keys filled in.");

    m.def(
        "rgb_to_od",
        [](const Array& img, double i0, double eps) {
            const OdImage od = rgb_to_od(to_image(img), i0, eps);
            return from_values(od.values, od.height, od.width, 3);
        },
        py::arg("image"), py::arg("i0") = kDefaultI0, py::arg("eps") = kDefaultEps);
    m.def(
        "od_to_rgb",
        [](const Array& od, double i0, double eps) {
            if (od.ndim() != 3 || od.shape(2) != 3) throw InvalidArgument("expected an (H, W, 3) array");
            OdImage in{static_cast<int>(od.shape(0)), static_cast<int>(od.shape(1)),
                       std::vector<double>(od.data(), od.data() + od.size())};
            return from_image(od_to_rgb(in, i0, eps));
        },
        py::arg("od"), py::arg("i0") = kDefaultI0, py::arg("eps") = kDefaultEps);
    m.def(
        "separate_stains",
        [](const Array& img, const std::optional<std::string>& config) {
            const ToolkitConfig cfg = config_from(config);
            const StainConcentrations c =
                separate_stains(rgb_to_od(to_image(img), cfg.i0, cfg.eps), cfg.stain_matrix());
            py::dict d;
            d["hematoxylin"] = from_plane(c.hematoxylin.plane);
            d["eosin"] = from_plane(c.eosin.plane);
            d["dab"] = from_plane(c.dab.plane);
            return d;
        },
        py::arg("image"), py::arg("config") = py::none());
    m.def("normalize_weight", [](const Array& a) { return from_plane(normalize_weight(to_plane(a))); },
          py::arg("map"));

    m.def("to_gray", [](const Array& img) { return from_image(to_gray(to_image(img))); }, py::arg("image"));
    m.def(
        "sobel",
        [](const Array& gray) {
            const SobelResponse s = sobel(to_image(gray));
            return py::make_tuple(from_plane(s.gx), from_plane(s.gy));
        },
        py::arg("gray"));
    m.def("gradient_magnitude", [](const Array& gray) { return from_plane(gradient_magnitude(to_image(gray))); },
          py::arg("gray"));

    m.def(
        "info_nce",
        [](const std::vector<double>& gen, const std::vector<double>& real,
           const std::vector<std::vector<double>>& negatives, double tau) {
            std::vector<Embedding> negs;
            for (const auto& n : negatives) negs.push_back(to_embedding(n));
            return info_nce(to_embedding(gen), to_embedding(real), negs, tau);
        },
        py::arg("generated"), py::arg("real"), py::arg("negatives"), py::arg("tau") = 0.07);
    m.def(
        "adaptive_weight",
        [](double sim, double t, double T, const std::string& ramp_kind, const std::string& similarity) {
            return adaptive_weight(sim, t, T, parse_ramp(ramp_kind), parse_similarity(similarity));
        },
        py::arg("sim"), py::arg("t"), py::arg("T"), py::arg("ramp") = "linear", py::arg("similarity") = "affine");

    auto ctx_of = [](const std::optional<std::string>& config) { return config_from(config).stain_context(); };
    m.def(
        "dab_cf_loss",
        [ctx_of](const Array& real, const Array& gen, const std::optional<std::string>& config) {
            return dab_cf_loss(to_image(real), to_image(gen), ctx_of(config));
        },
        py::arg("real"), py::arg("gen"), py::arg("config") = py::none());
    m.def(
        "gcbr_loss",
        [ctx_of](const Array& real, const Array& gen, const std::optional<std::string>& config) {
            return gcbr_loss(to_image(real), to_image(gen), ctx_of(config));
        },
        py::arg("real"), py::arg("gen"), py::arg("config") = py::none());
    m.def(
        "gaussian_pyramid_loss",
        [](const Array& a, const Array& b, int levels) {
            return gaussian_pyramid_loss(to_image(a), to_image(b), levels);
        },
        py::arg("a"), py::arg("b"), py::arg("levels") = 3);
    m.def(
        "total_loss",
        [](int stage, const std::map<std::string, double>& terms, const std::optional<std::string>& config) {
            LossTerms t;
            for (const auto& [k, v] : terms) {
                if (k == "adv") t.adv = v;
                else if (k == "patchnce") t.patchnce = v;
                else if (k == "asp") t.asp = v;
                else if (k == "gp") t.gp = v;
                else if (k == "dab_cf") t.dab_cf = v;
                else if (k == "gcbr") t.gcbr = v;
                else throw InvalidArgument("unknown loss term '" + k + "'");
            }
            return total_loss(stage, t, config_from(config).loss).total;
        },
        py::arg("stage"), py::arg("terms"), py::arg("config") = py::none());

    m.def(
        "loss_gradient",
        [ctx_of](const std::string& loss, const Array& real, const Array& gen, const std::optional<std::string>& config) {
            return from_field(analytic_grad(parse_loss_id(loss), to_image(real), to_image(gen), ctx_of(config)));
        },
        py::arg("loss"), py::arg("real"), py::arg("gen"), py::arg("config") = py::none(),
        "Analytic gradient of 'dab_cf' or 'gcbr' with respect to the generated image.");
    m.def(
        "gradient_check",
        [](const std::string& loss, std::uint64_t seed, int size) {
            const GradientCheck gc = gradient_check(parse_loss_id(loss), seed, size);
            py::dict d;
            d["max_relative_error"] = gc.max_relative_error;
            d["tolerance"] = gc.tolerance;
            d["checked"] = gc.checked;
            d["passed"] = gc.passed;
            return d;
        },
        py::arg("loss"), py::arg("seed") = 1, py::arg("size") = 8);
    m.def(
        "run_progressive",
        [](const Array& init, const Array& real, const std::optional<std::string>& config) {
            const ToolkitConfig cfg = config_from(config);
            ProgressiveResult r;
            {
                const Image i = to_image(init), re = to_image(real);
                py::gil_scoped_release release;
                r = run_progressive(i, re, cfg.stage2, cfg.stage3, cfg.loss, cfg.stain_context());
            }
            py::dict d;
            d["image"] = from_image(r.image);
            d["stage2_output"] = from_image(r.stage2_output);
            d["stage2"] = trace_dict(r.stage2);
            d["stage3"] = trace_dict(r.stage3);
            d["dab_cf_before_stage3"] = r.dab_cf_before_stage3;
            d["dab_cf_after_stage3"] = r.dab_cf_after_stage3;
            return d;
        },
        py::arg("init"), py::arg("real"), py::arg("config") = py::none(),
        "Colour (stage 2) then boundary (stage 3) pixel-space refinement.");

    m.def("ssim", [](const Array& a, const Array& b) { return ssim(to_image(a), to_image(b)); });
    m.def("psnr", [](const Array& a, const Array& b) { return psnr(to_image(a), to_image(b)); });
    m.def("gradient_mse", [](const Array& a, const Array& b) { return gradient_mse(to_image(a), to_image(b)); });
    m.def("phash_distance", [](const Array& a, const Array& b) { return phash_distance(to_image(a), to_image(b)); });
    m.def(
        "evaluate_pair",
        [](const Array& real, const Array& gen) {
            const MetricReport r = evaluate_pair(to_image(real), to_image(gen));
            py::dict d;
            d["ssim"] = r.ssim;
            d["psnr"] = r.psnr;
            d["gradient_mse"] = r.gradient_mse;
            d["phash"] = r.phash;
            return d;
        },
        py::arg("real"), py::arg("gen"));

    m.def(
        "synth_fixture",
        [](std::uint64_t seed, int height, int width, int n_cells) {
            const Fixture fx = synth_fixture(seed, height, width, n_cells);
            py::dict d;
            d["he_like"] = from_image(fx.he_like);
            d["ihc_like"] = from_image(fx.ihc_like);
            d["dab_truth"] = from_plane(fx.truth.dab_truth);
            d["hema_truth"] = from_plane(fx.truth.hema_truth);
            d["membrane_mask"] = from_plane(fx.truth.membrane_mask);
            return d;
        },
        py::arg("seed") = 0, py::arg("height") = 64, py::arg("width") = 64, py::arg("n_cells") = 3);
    m.def(
        "compose_with_dab_offset",
        [](std::uint64_t seed, int height, int width, int n_cells, double offset) {
            const Fixture fx = synth_fixture(seed, height, width, n_cells);
            return from_image(compose_with_dab_offset(fx.truth, offset));
        },
        py::arg("seed"), py::arg("height"), py::arg("width"), py::arg("n_cells"), py::arg("offset"),
        "IHC rendering of synth_fixture(seed, ...) with its DAB shifted by `offset`.");
    m.def("gaussian_blur", [](const Array& img, double sigma) { return from_image(gaussian_blur(to_image(img), sigma)); },
          py::arg("image"), py::arg("sigma"));
}
