#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "progstain/deconv.hpp"
#include "progstain/embedding.hpp"
#include "progstain/losses.hpp"
#include "progstain/refine.hpp"

namespace progstain {

inline constexpr const char* kConfigEnvVar = "PROGSTAIN_CONFIG";

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Every tunable of the toolkit. Stain rows are kept as written; they are
/// normalized when the StainMatrix is built.
struct ToolkitConfig {
    Mat3 stain_rows = StainMatrix::default_rows();
    double i0 = kDefaultI0;
    double eps = kDefaultEps;
    LossConfig loss;
    StageConfig stage2 = StageConfig{.stage = 2};
    StageConfig stage3 = StageConfig{.stage = 3};
    EmbedParams embed;

    /// Throws ConfigError when any invariant fails.
    void validate() const;

    StainMatrix stain_matrix() const { return StainMatrix(stain_rows); }
    StainContext stain_context() const { return {stain_matrix(), i0, eps}; }

    friend bool operator==(const ToolkitConfig&, const ToolkitConfig&) = default;
};

/// Parses the flat `key = value` format (`#` starts a comment). Missing
/// keys keep their defaults; unknown or repeated keys are errors.
ToolkitConfig parse_config(std::string_view text, const std::string& origin = "<config>");

/// Reads `path` if given, else the file named by PROGSTAIN_CONFIG if set,
/// else returns the defaults.
ToolkitConfig load_config(const std::optional<std::filesystem::path>& path = std::nullopt);

/// Full config in the same format, one key per line, with round-trip exact
/// numbers.
std::string serialize_config(const ToolkitConfig& cfg);

} // namespace progstain
