#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"

#include <sstream>

#include "progstain/cli.hpp"
#include "progstain/deconv.hpp"
#include "progstain/fixture.hpp"
#include "progstain/image_io.hpp"

using namespace progstain;
using nlohmann::json;
using testutil::TempDir;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

} // namespace

TEST_CASE("help and usage errors") {
    CHECK(cli({"--help"}).code == kExitOk);
    CHECK(cli({}).code == kExitUsage);
    CHECK(cli({"frobnicate"}).code == kExitUsage);
    CHECK(cli({"loss", "only_one.png"}).code == kExitUsage);
}

TEST_CASE("synth writes three deterministic files") {
    TempDir dir;
    const std::string a = dir.file("a"), b = dir.file("b");
    REQUIRE(cli({"synth", "--seed", "7", "--size", "64", "--cells", "3", "--out", a}).code == kExitOk);
    REQUIRE(cli({"synth", "--seed", "7", "--size", "64", "--cells", "3", "--out", b}).code == kExitOk);
    for (const char* suffix : {"_he.png", "_ihc.png", "_truth.json"}) {
        REQUIRE(std::filesystem::exists(a + suffix));
        CHECK(testutil::read_bytes(a + suffix) == testutil::read_bytes(b + suffix));
    }
    const Image ihc = load_image(a + "_ihc.png");
    CHECK(ihc.height() == 64);
    CHECK(ihc.channels() == 3);
}

TEST_CASE("synth with no cells gives a white IHC image") {
    TempDir dir;
    REQUIRE(cli({"synth", "--cells", "0", "--size", "32", "--out", dir.file("w")}).code == kExitOk);
    for (double v : load_image(dir.file("w_ihc.png")).data()) CHECK(v == 1.0);
    CHECK(cli({"synth", "--size", "32", "--out", dir.file("nope/x")}).code == kExitFailure);
}

TEST_CASE("deconvolve recovers membrane rings") {
    TempDir dir;
    const Fixture fx = synth_fixture(7, 64, 64, 3);
    save_image(fx.ihc_like, dir.file("ihc.png"), 16);
    const Run r = cli({"deconvolve", dir.file("ihc.png"), "--out", dir.file("dec")});
    REQUIRE(r.code == kExitOk);
    const json summary = json::parse(r.out);
    CHECK(summary.at("dab").at("max").get<double>() > 0.25);

    const Image dab = load_image(dir.file("dec_dab.png"));
    std::size_t agree = 0;
    for (std::size_t i = 0; i < fx.truth.membrane_mask.size(); ++i) {
        const bool predicted = dab.data()[i] > 0.5;
        const bool truth = fx.truth.membrane_mask.values[i] > 0.0;
        agree += predicted == truth;
    }
    CHECK(agree >= static_cast<std::size_t>(0.99 * fx.truth.membrane_mask.size()));
    CHECK(std::filesystem::exists(dir.file("dec_hematoxylin.png")));
    CHECK(std::filesystem::exists(dir.file("dec_eosin.png")));
}

TEST_CASE("deconvolve edge cases") {
    TempDir dir;
    save_image(Image::filled(16, 16, 3, 1.0), dir.file("white.png"));
    const Run r = cli({"deconvolve", dir.file("white.png"), "--out", dir.file("w")});
    REQUIRE(r.code == kExitOk);
    const json s = json::parse(r.out);
    for (const char* stain : {"hematoxylin", "eosin", "dab"}) CHECK(std::abs(s.at(stain).at("mean").get<double>()) < 1e-5);

    CHECK(cli({"deconvolve", dir.file("missing.png"), "--out", dir.file("m")}).code == kExitUsage);
    save_image(Image::filled(16, 16, 1, 0.5), dir.file("gray.png"));
    CHECK(cli({"deconvolve", dir.file("gray.png"), "--out", dir.file("g")}).code == kExitUsage);
}

TEST_CASE("loss reports the stage breakdown") {
    TempDir dir;
    REQUIRE(cli({"synth", "--seed", "7", "--size", "64", "--depth", "16", "--out", dir.file("fx")}).code == kExitOk);
    const Fixture fx = synth_fixture(7, 64, 64, 3);
    save_image(compose_with_dab_offset(fx.truth, 0.2), dir.file("shift.png"), 16);

    const Run same = cli({"loss", dir.file("fx_ihc.png"), dir.file("fx_ihc.png"), "--stage", "2"});
    REQUIRE(same.code == kExitOk);
    const json js = json::parse(same.out);
    CHECK(js.at("dab_cf") == 0.0);
    CHECK(js.at("total") == 0.0);

    const Run shifted = cli({"loss", dir.file("fx_ihc.png"), dir.file("shift.png"), "--stage", "2"});
    REQUIRE(shifted.code == kExitOk);
    CHECK(std::abs(json::parse(shifted.out).at("total").get<double>() - 0.02) < 1e-6);

    const Run s1 = cli({"loss", dir.file("fx_ihc.png"), dir.file("shift.png"), "--stage", "1"});
    REQUIRE(s1.code == kExitOk);
    const json j1 = json::parse(s1.out);
    CHECK(j1.at("adv") == 0.0);
    CHECK(j1.at("total").get<double>() > 0.0);

    const Run s3 = cli({"loss", dir.file("fx_ihc.png"), dir.file("shift.png"), "--stage", "3"});
    REQUIRE(s3.code == kExitOk);
    CHECK(json::parse(s3.out).contains("gcbr"));

    CHECK(cli({"loss", dir.file("fx_ihc.png"), dir.file("shift.png"), "--stage", "4"}).code == kExitUsage);
    save_image(Image::filled(32, 32, 3, 1.0), dir.file("small.png"));
    CHECK(cli({"loss", dir.file("fx_ihc.png"), dir.file("small.png"), "--stage", "2"}).code == kExitUsage);
}

TEST_CASE("config errors map to usage errors") {
    TempDir dir;
    REQUIRE(cli({"synth", "--size", "32", "--out", dir.file("fx")}).code == kExitOk);
    testutil::write_text(dir.path() / "bad.cfg", "lamda_dab = 1\n");
    testutil::write_text(dir.path() / "good.cfg", "lambda_dab = 2\n");
    CHECK(cli({"loss", dir.file("fx_ihc.png"), dir.file("fx_he.png"), "--stage", "2", "--config",
               dir.file("bad.cfg")})
              .code == kExitUsage);
    const Run base = cli({"loss", dir.file("fx_ihc.png"), dir.file("fx_he.png"), "--stage", "2"});
    const Run scaled = cli({"loss", dir.file("fx_ihc.png"), dir.file("fx_he.png"), "--stage", "2", "--config",
                            dir.file("good.cfg")});
    REQUIRE(base.code == kExitOk);
    REQUIRE(scaled.code == kExitOk);
    CHECK(json::parse(scaled.out).at("total").get<double>() ==
          doctest::Approx(4.0 * json::parse(base.out).at("total").get<double>()));
}

TEST_CASE("refine writes an image, traces and a summary") {
    TempDir dir;
    const Fixture fx = synth_fixture(7, 48, 48, 3);
    save_image(fx.ihc_like, dir.file("real.png"), 16);
    save_image(gaussian_blur(compose_with_dab_offset(fx.truth, 0.2), 1.0), dir.file("init.png"), 16);

    const Run r = cli({"refine", dir.file("init.png"), dir.file("real.png"), "--out", dir.file("out.png"),
                       "--trace", dir.file("trace")});
    REQUIRE(r.code == kExitOk);
    const json s = json::parse(r.out);
    const double s2_initial = s.at("stage2").at("initial").get<double>();
    const double s2_final = s.at("stage2").at("final").get<double>();
    CHECK(s.at("stage2").at("final_total").get<double>() == doctest::Approx(0.5 * s2_final));
    CHECK(s2_final < 0.01 * s2_initial);
    CHECK(std::filesystem::exists(dir.file("out.png")));
    CHECK(!r.err.empty());

    std::ifstream trace(dir.file("trace_stage2.jsonl"));
    std::string line;
    int lines = 0;
    while (std::getline(trace, line)) {
        const json j = json::parse(line);
        CHECK(j.at("iter") == lines);
        ++lines;
    }
    CHECK(lines >= 2);
    CHECK(std::filesystem::exists(dir.file("trace_stage3.jsonl")));
}

TEST_CASE("refine edge cases") {
    TempDir dir;
    const Fixture fx = synth_fixture(2, 32, 32, 2);
    save_image(fx.ihc_like, dir.file("real.png"));
    REQUIRE(cli({"refine", dir.file("real.png"), dir.file("real.png"), "--out", dir.file("same.png"), "--trace",
                 dir.file("t")})
                .code == kExitOk);
    const Image a = load_image(dir.file("real.png")), b = load_image(dir.file("same.png"));
    CHECK(testutil::max_abs_diff(a.data(), b.data()) <= 1.0 / 255.0);

    CHECK(cli({"refine", dir.file("real.png"), dir.file("real.png"), "--out", dir.file("nodir/x.png"), "--trace",
               dir.file("t")})
              .code == kExitFailure);

    testutil::write_text(dir.path() / "wild.cfg", "stage3.optimizer = gd\nstage3.learning_rate = 1e6\n");
    save_image(compose_with_dab_offset(fx.truth, 0.2), dir.file("shift.png"));
    const Run wild = cli({"refine", dir.file("shift.png"), dir.file("real.png"), "--out", dir.file("w.png"),
                          "--trace", dir.file("w"), "--config", dir.file("wild.cfg")});
    CHECK(wild.code == kExitFailure);
    CHECK(wild.err.find("diverged") != std::string::npos);
}

TEST_CASE("metrics command") {
    TempDir dir;
    const Fixture fx = synth_fixture(3, 48, 48, 3);
    save_image(fx.ihc_like, dir.file("a.png"));
    save_image(gaussian_blur(fx.ihc_like, 1.5), dir.file("b.png"));
    save_image(Image::filled(48, 48, 1, 0.5), dir.file("gray.png"));

    const json same = json::parse(cli({"metrics", dir.file("a.png"), dir.file("a.png")}).out);
    CHECK(same.at("ssim") == 1.0);
    CHECK(same.at("gradient_mse") == 0.0);

    const Run blur = cli({"metrics", dir.file("a.png"), dir.file("b.png")});
    REQUIRE(blur.code == kExitOk);
    const json jb = json::parse(blur.out);
    CHECK(jb.at("ssim").get<double>() < 1.0);
    CHECK(std::isfinite(jb.at("psnr").get<double>()));

    CHECK(cli({"metrics", dir.file("a.png"), dir.file("gray.png")}).code == kExitUsage);
}

TEST_CASE("gradcheck command") {
    const Run d = cli({"gradcheck", "--seed", "1", "--size", "8", "--loss", "dab_cf"});
    REQUIRE(d.code == kExitOk);
    CHECK(json::parse(d.out).at("max_relative_error").get<double>() < 1e-4);
    const Run g = cli({"gradcheck", "--seed", "1", "--size", "8", "--loss", "gcbr"});
    REQUIRE(g.code == kExitOk);
    CHECK(json::parse(g.out).at("max_relative_error").get<double>() < 1e-3);
    CHECK(cli({"gradcheck", "--size", "4"}).code == kExitUsage);
    CHECK(cli({"gradcheck", "--loss", "l2"}).code == kExitUsage);
}
