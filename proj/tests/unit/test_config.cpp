#include "doctest.h"
#include "helpers.hpp"

#include <cstdlib>

#include "progstain/config.hpp"

using namespace progstain;
using testutil::TempDir;

namespace {

// Sets an environment variable for the lifetime of the guard.
class EnvGuard {
public:
    EnvGuard(const char* name, const std::string& value) : name_(name) {
        if (const char* old = std::getenv(name)) old_ = old;
        ::setenv(name, value.c_str(), 1);
    }
    ~EnvGuard() {
        if (old_) ::setenv(name_, old_->c_str(), 1);
        else ::unsetenv(name_);
    }

private:
    const char* name_;
    std::optional<std::string> old_;
};

} // namespace

TEST_CASE("defaults carry the published loss weights") {
    ::unsetenv(kConfigEnvVar);
    const ToolkitConfig cfg = load_config();
    CHECK(cfg.loss.lambda_patchnce == 10.0);
    CHECK(cfg.loss.lambda_asp == 10.0);
    CHECK(cfg.loss.lambda_gp == 10.0);
    CHECK(cfg.loss.lambda_dab == 0.5);
    CHECK(cfg.loss.lambda_grad == 1.0);
    CHECK(cfg.stage2.optimizer == OptimizerKind::adam);
    CHECK(cfg.stage2.learning_rate == 2e-3);
    CHECK(cfg.stage2.max_iters == 500);
    CHECK(cfg.stage3.stage == 3);
    CHECK(cfg == ToolkitConfig{});
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("a file overrides only what it names") {
    const ToolkitConfig cfg = parse_config("# colour stage\nlambda_dab = 1.5\n\n");
    ToolkitConfig expected;
    expected.loss.lambda_dab = 1.5;
    CHECK(cfg == expected);

    const ToolkitConfig more = parse_config(
        "stage3.optimizer = gradient_descent\nstage3.learning_rate=0.01   # inline\nembed.dim = 32\n"
        "schedule_ramp = cosine\nstain_matrix = 1 0 0  0 1 0  0 0 1\n");
    CHECK(more.stage3.optimizer == OptimizerKind::gradient_descent);
    CHECK(more.stage3.learning_rate == 0.01);
    CHECK(more.embed.dim == 32);
    CHECK(more.loss.ramp == RampKind::cosine);
    CHECK(more.stain_rows[1] == Vec3{0, 1, 0});
}

TEST_CASE("unknown, repeated and malformed keys are rejected") {
    CHECK_THROWS_WITH_AS(parse_config("lamda_dab = 0.5\n"), doctest::Contains("unknown key"), ConfigError);
    CHECK_THROWS_AS(parse_config("tau = 0.1\ntau = 0.2\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("tau 0.1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("tau = fast\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("tau = 0.1 0.2\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("stain_matrix = 1 2 3\n"), ConfigError);
}

TEST_CASE("invariant violations are rejected") {
    CHECK_THROWS_AS(parse_config("tau = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("eps = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("lambda_grad = -1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("stain_matrix = 1 0 0  2 0 0  0 0 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("step = 200\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("stage2.max_iters = 0\n"), ConfigError);
}

TEST_CASE("serialize then parse round-trips exactly") {
    ToolkitConfig cfg;
    cfg.loss.tau = 0.1 + 0.2;
    cfg.loss.lambda_dab = 1.0 / 3.0;
    cfg.eps = 3e-7;
    cfg.stain_rows[2] = Vec3{0.1234567890123, 0.5, 0.7};
    cfg.stage3.optimizer = OptimizerKind::gradient_descent;
    cfg.loss.similarity = SimilarityKind::positive;
    cfg.embed.seed = 123456789012345ULL;
    CHECK(parse_config(serialize_config(cfg)) == cfg);
    CHECK(parse_config(serialize_config(ToolkitConfig{})) == ToolkitConfig{});
}

TEST_CASE("load_config resolves path, then environment, then defaults") {
    TempDir dir;
    testutil::write_text(dir.path() / "env.cfg", "lambda_grad = 2.5\n");
    testutil::write_text(dir.path() / "explicit.cfg", "lambda_grad = 4\n");
    {
        EnvGuard env(kConfigEnvVar, (dir.path() / "env.cfg").string());
        CHECK(load_config().loss.lambda_grad == 2.5);
        CHECK(load_config(dir.path() / "explicit.cfg").loss.lambda_grad == 4.0);
    }
    CHECK_THROWS_AS(load_config(dir.path() / "absent.cfg"), ConfigError);
}
