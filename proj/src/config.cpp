#include "progstain/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace progstain {
namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double to_double(std::string_view v, const std::string& key) {
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw ConfigError("key '" + key + "': expected a number, got '" + std::string(v) + "'");
    return out;
}

long long to_integer(std::string_view v, const std::string& key) {
    long long out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw ConfigError("key '" + key + "': expected an integer, got '" + std::string(v) + "'");
    return out;
}

int to_int(std::string_view v, const std::string& key) {
    const long long x = to_integer(v, key);
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
        throw ConfigError("key '" + key + "': value out of range");
    return static_cast<int>(x);
}

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

using Setter = std::function<void(ToolkitConfig&, std::string_view, const std::string&)>;
using Getter = std::function<std::string(const ToolkitConfig&)>;

struct Field {
    Setter set;
    Getter get;
};

template <class T>
Field number(T ToolkitConfig::*member) {
    return {[member](ToolkitConfig& c, std::string_view v, const std::string& k) { c.*member = to_double(v, k); },
            [member](const ToolkitConfig& c) { return format_double(c.*member); }};
}

template <class Ref>
Field real_at(Ref ref) {
    return {[ref](ToolkitConfig& c, std::string_view v, const std::string& k) { ref(c) = to_double(v, k); },
            [ref](const ToolkitConfig& c) { return format_double(ref(const_cast<ToolkitConfig&>(c))); }};
}

template <class Ref>
Field int_at(Ref ref) {
    return {[ref](ToolkitConfig& c, std::string_view v, const std::string& k) { ref(c) = to_int(v, k); },
            [ref](const ToolkitConfig& c) { return std::to_string(ref(const_cast<ToolkitConfig&>(c))); }};
}

void add_stage_fields(std::map<std::string, Field>& f, const std::string& prefix,
                      StageConfig ToolkitConfig::*stage) {
    f[prefix + ".optimizer"] = {
        [stage](ToolkitConfig& c, std::string_view v, const std::string&) {
            try {
                (c.*stage).optimizer = parse_optimizer(std::string(v));
            } catch (const InvalidArgument& e) {
                throw ConfigError(e.what());
            }
        },
        [stage](const ToolkitConfig& c) { return std::string(to_string((c.*stage).optimizer)); }};
    f[prefix + ".learning_rate"] = real_at([stage](ToolkitConfig& c) -> double& { return (c.*stage).learning_rate; });
    f[prefix + ".max_iters"] = int_at([stage](ToolkitConfig& c) -> int& { return (c.*stage).max_iters; });
    f[prefix + ".beta1"] = real_at([stage](ToolkitConfig& c) -> double& { return (c.*stage).beta1; });
    f[prefix + ".beta2"] = real_at([stage](ToolkitConfig& c) -> double& { return (c.*stage).beta2; });
    f[prefix + ".adam_eps"] = real_at([stage](ToolkitConfig& c) -> double& { return (c.*stage).adam_eps; });
    f[prefix + ".stop_tol"] = real_at([stage](ToolkitConfig& c) -> double& { return (c.*stage).stop_tol; });
}

const std::map<std::string, Field>& fields() {
    static const std::map<std::string, Field> table = [] {
        std::map<std::string, Field> f;
        f["stain_matrix"] = {
            [](ToolkitConfig& c, std::string_view v, const std::string& k) {
                std::istringstream in{std::string(v)};
                std::string tok;
                std::vector<double> nums;
                while (in >> tok) {
                    if (!tok.empty() && tok.back() == ',') tok.pop_back();
                    if (!tok.empty()) nums.push_back(to_double(tok, k));
                }
                if (nums.size() != 9)
                    throw ConfigError("key 'stain_matrix': expected 9 numbers, got " + std::to_string(nums.size()));
                for (int i = 0; i < 9; ++i) c.stain_rows[i / 3][i % 3] = nums[i];
            },
            [](const ToolkitConfig& c) {
                std::string s;
                for (int i = 0; i < 9; ++i) {
                    if (i) s += ' ';
                    s += format_double(c.stain_rows[i / 3][i % 3]);
                }
                return s;
            }};
        f["i0"] = number(&ToolkitConfig::i0);
        f["eps"] = number(&ToolkitConfig::eps);
        f["tau"] = real_at([](ToolkitConfig& c) -> double& { return c.loss.tau; });
        f["step"] = real_at([](ToolkitConfig& c) -> double& { return c.loss.t; });
        f["total_steps"] = real_at([](ToolkitConfig& c) -> double& { return c.loss.T; });
        f["lambda_patchnce"] = real_at([](ToolkitConfig& c) -> double& { return c.loss.lambda_patchnce; });
        f["lambda_asp"] = real_at([](ToolkitConfig& c) -> double& { return c.loss.lambda_asp; });
        f["lambda_gp"] = real_at([](ToolkitConfig& c) -> double& { return c.loss.lambda_gp; });
        f["lambda_dab"] = real_at([](ToolkitConfig& c) -> double& { return c.loss.lambda_dab; });
        f["lambda_grad"] = real_at([](ToolkitConfig& c) -> double& { return c.loss.lambda_grad; });
        f["pyramid_levels"] = int_at([](ToolkitConfig& c) -> int& { return c.loss.pyramid_levels; });
        f["schedule_ramp"] = {
            [](ToolkitConfig& c, std::string_view v, const std::string&) {
                try {
                    c.loss.ramp = parse_ramp(std::string(v));
                } catch (const InvalidArgument& e) {
                    throw ConfigError(e.what());
                }
            },
            [](const ToolkitConfig& c) { return std::string(to_string(c.loss.ramp)); }};
        f["similarity_map"] = {
            [](ToolkitConfig& c, std::string_view v, const std::string&) {
                try {
                    c.loss.similarity = parse_similarity(std::string(v));
                } catch (const InvalidArgument& e) {
                    throw ConfigError(e.what());
                }
            },
            [](const ToolkitConfig& c) { return std::string(to_string(c.loss.similarity)); }};
        add_stage_fields(f, "stage2", &ToolkitConfig::stage2);
        add_stage_fields(f, "stage3", &ToolkitConfig::stage3);
        f["embed.seed"] = {
            [](ToolkitConfig& c, std::string_view v, const std::string& k) {
                const long long x = to_integer(v, k);
                if (x < 0) throw ConfigError("key 'embed.seed': must be nonnegative");
                c.embed.seed = static_cast<std::uint64_t>(x);
            },
            [](const ToolkitConfig& c) { return std::to_string(c.embed.seed); }};
        f["embed.patch"] = int_at([](ToolkitConfig& c) -> int& { return c.embed.patch; });
        f["embed.dim"] = int_at([](ToolkitConfig& c) -> int& { return c.embed.dim; });
        f["embed.stride"] = int_at([](ToolkitConfig& c) -> int& { return c.embed.stride; });
        f["embed.layers"] = int_at([](ToolkitConfig& c) -> int& { return c.embed.layers; });
        f["embed.max_negatives"] = int_at([](ToolkitConfig& c) -> int& { return c.embed.max_negatives; });
        return f;
    }();
    return table;
}

} // namespace

void ToolkitConfig::validate() const {
    try {
        (void)stain_matrix();
        loss.validate();
        stage2.validate();
        stage3.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
    if (!(i0 > 0.0)) throw ConfigError("i0 must be positive");
    if (!(eps > 0.0)) throw ConfigError("eps must be positive");
    if (stage2.stage != 2 || stage3.stage != 3) throw ConfigError("stage configs out of order");
    if (embed.patch < 1 || embed.dim < 1 || embed.stride < 1 || embed.layers < 1 || embed.max_negatives < 0)
        throw ConfigError("embedding parameters must be positive");
}

ToolkitConfig parse_config(std::string_view text, const std::string& origin) {
    ToolkitConfig cfg;
    std::set<std::string> seen;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto end = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        const std::string where = origin + ":" + std::to_string(line_no) + ": ";
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError(where + "expected 'key = value'");
        const std::string key(trim(line.substr(0, eq)));
        const std::string_view value = trim(line.substr(eq + 1));
        const auto it = fields().find(key);
        if (it == fields().end()) throw ConfigError(where + "unknown key '" + key + "'");
        if (!seen.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
        if (value.empty()) throw ConfigError(where + "missing value for '" + key + "'");
        try {
            it->second.set(cfg, value, key);
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
    }
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    return cfg;
}

ToolkitConfig load_config(const std::optional<std::filesystem::path>& path) {
    std::optional<std::filesystem::path> source = path;
    if (!source) {
        if (const char* env = std::getenv(kConfigEnvVar); env && *env) source = env;
    }
    if (!source) return ToolkitConfig{};
    std::ifstream in(*source);
    if (!in) throw ConfigError("cannot read config file '" + source->string() + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), source->string());
}

std::string serialize_config(const ToolkitConfig& cfg) {
    std::string out;
    for (const auto& [key, field] : fields()) out += key + " = " + field.get(cfg) + "\n";
    return out;
}

} // namespace progstain
