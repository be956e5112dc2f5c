#include "eqsr/config.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <algorithm>
#include <functional>
#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "eqsr/bench.hpp"
#include "eqsr/errors.hpp"

namespace eqsr {

namespace {

std::string fmt(double v) {
    std::array<char, 32> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

std::string fmt(bool v) { return v ? "true" : "false"; }

template <class T>
T parse_integer(const std::string& key, const std::string& s) {
    T v{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ConfigError(key + ": expected an integer, got '" + s + "'");
    }
    return v;
}

double parse_real(const std::string& key, const std::string& s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw ConfigError(key + ": expected a number, got '" + s + "'");
    }
    return v;
}

bool parse_flag(const std::string& key, const std::string& s) {
    if (s == "true") return true;
    if (s == "false") return false;
    throw ConfigError(key + ": expected true or false, got '" + s + "'");
}

struct Entry {
    std::string key;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <class M>
Entry integer(std::string key, M member) {
    return {key,
            [key, member](RunConfig& c, const std::string& v) {
                auto& field = std::invoke(member, c);
                field = parse_integer<std::remove_reference_t<decltype(field)>>(key, v);
            },
            [member](const RunConfig& c) { return std::to_string(std::invoke(member, const_cast<RunConfig&>(c))); }};
}

template <class M>
Entry real(std::string key, M member) {
    return {key, [key, member](RunConfig& c, const std::string& v) { std::invoke(member, c) = parse_real(key, v); },
            [member](const RunConfig& c) { return fmt(std::invoke(member, const_cast<RunConfig&>(c))); }};
}

template <class M>
Entry flag(std::string key, M member) {
    return {key, [key, member](RunConfig& c, const std::string& v) { std::invoke(member, c) = parse_flag(key, v); },
            [member](const RunConfig& c) { return fmt(static_cast<bool>(std::invoke(member, const_cast<RunConfig&>(c)))); }};
}

template <class M>
Entry text(std::string key, M member) {
    return {key, [member](RunConfig& c, const std::string& v) { std::invoke(member, c) = v; },
            [member](const RunConfig& c) { return std::string(std::invoke(member, const_cast<RunConfig&>(c))); }};
}

template <class E, std::size_t N>
Entry choice(std::string key, E& (*field)(RunConfig&), const std::array<std::pair<const char*, E>, N>& names) {
    return {key,
            [key, field, names](RunConfig& c, const std::string& v) {
                for (const auto& [n, e] : names) {
                    if (v == n) {
                        field(c) = e;
                        return;
                    }
                }
                std::string allowed;
                for (const auto& [n, e] : names) allowed += (allowed.empty() ? "" : ", ") + std::string(n);
                throw ConfigError(key + ": expected one of " + allowed + ", got '" + v + "'");
            },
            [field, names](const RunConfig& c) {
                const E cur = field(const_cast<RunConfig&>(c));
                for (const auto& [n, e] : names) {
                    if (e == cur) return std::string(n);
                }
                return std::string();
            }};
}

const std::vector<Entry>& entries() {
    static const std::vector<Entry> table = [] {
        std::vector<Entry> t;
        t.push_back(text("run.benchmark", &RunConfig::benchmark));
        t.push_back({"run.data_dir", [](RunConfig& c, const std::string& v) { c.data_dir = v; },
                     [](const RunConfig& c) { return c.data_dir.string(); }});
        t.push_back({"run.out_dir", [](RunConfig& c, const std::string& v) { c.out_dir = v; },
                     [](const RunConfig& c) { return c.out_dir.string(); }});
        t.push_back(integer("run.seed", &RunConfig::seed));
        t.push_back(integer("run.iterations", &RunConfig::iterations));
        t.push_back(integer("run.demos", &RunConfig::demos));
        t.push_back(integer("run.evaluators", &RunConfig::evaluators));
        t.push_back(integer("run.reset_period", &RunConfig::reset_period));
        t.push_back(integer("run.checkpoint_period", &RunConfig::checkpoint_period));
        t.push_back(flag("run.discard_on_budget", &RunConfig::discard_on_budget));
        t.push_back(integer("run.prompt_chars", &RunConfig::prompt_chars));
        t.push_back(integer("run.log_every", &RunConfig::log_every));

        t.push_back(choice("generator.kind", +[](RunConfig& c) -> GeneratorKind& { return c.generator.kind; },
                           std::array<std::pair<const char*, GeneratorKind>, 2>{
                               {{"mock", GeneratorKind::Mock}, {"remote", GeneratorKind::Remote}}}));
        t.push_back(integer("generator.samples", [](RunConfig& c) -> int& { return c.generator.samples; }));
        t.push_back(real("generator.mock.w_replace", [](RunConfig& c) -> double& { return c.generator.mock.w_replace; }));
        t.push_back(real("generator.mock.w_add", [](RunConfig& c) -> double& { return c.generator.mock.w_add; }));
        t.push_back(
            real("generator.mock.w_crossover", [](RunConfig& c) -> double& { return c.generator.mock.w_crossover; }));
        t.push_back(real("generator.mock.w_hoist", [](RunConfig& c) -> double& { return c.generator.mock.w_hoist; }));
        t.push_back(text("generator.mock.inject_program",
                         [](RunConfig& c) -> std::string& { return c.generator.mock.inject_program; }));
        t.push_back(integer("generator.mock.inject_iteration",
                            [](RunConfig& c) -> int& { return c.generator.mock.inject_iteration; }));
        t.push_back(
            text("generator.remote.base_url", [](RunConfig& c) -> std::string& { return c.generator.remote.base_url; }));
        t.push_back(text("generator.remote.model", [](RunConfig& c) -> std::string& { return c.generator.remote.model; }));
        t.push_back(text("generator.remote.api_key_env",
                         [](RunConfig& c) -> std::string& { return c.generator.remote.api_key_env; }));
        t.push_back(real("generator.remote.temperature",
                         [](RunConfig& c) -> double& { return c.generator.remote.temperature; }));
        t.push_back(
            integer("generator.remote.max_tokens", [](RunConfig& c) -> int& { return c.generator.remote.max_tokens; }));
        t.push_back(
            real("generator.remote.timeout_s", [](RunConfig& c) -> double& { return c.generator.remote.timeout_s; }));
        t.push_back(
            integer("generator.remote.max_retries", [](RunConfig& c) -> int& { return c.generator.remote.max_retries; }));
        t.push_back(
            real("generator.remote.backoff_s", [](RunConfig& c) -> double& { return c.generator.remote.backoff_s; }));
        t.push_back(integer("generator.remote.max_in_flight",
                            [](RunConfig& c) -> int& { return c.generator.remote.max_in_flight; }));

        t.push_back(choice("fit.method", +[](RunConfig& c) -> FitMethod& { return c.fit.method; },
                           std::array<std::pair<const char*, FitMethod>, 2>{
                               {{"bfgs", FitMethod::Bfgs}, {"adam", FitMethod::Adam}}}));
        t.push_back(integer("fit.restarts", [](RunConfig& c) -> int& { return c.fit.restarts; }));
        t.push_back(choice("fit.init", +[](RunConfig& c) -> InitScheme& { return c.fit.init; },
                           std::array<std::pair<const char*, InitScheme>, 2>{
                               {{"standard_normal", InitScheme::StandardNormal}, {"all_ones", InitScheme::AllOnes}}}));
        t.push_back(real("fit.budget_seconds", [](RunConfig& c) -> double& { return c.fit.budget_seconds; }));
        t.push_back(real("fit.adam_learning_rate", [](RunConfig& c) -> double& { return c.fit.adam_learning_rate; }));
        t.push_back(integer("fit.adam_steps", [](RunConfig& c) -> int& { return c.fit.adam_steps; }));
        t.push_back(real("fit.gradient_tolerance", [](RunConfig& c) -> double& { return c.fit.gradient_tolerance; }));
        t.push_back(integer("fit.bfgs_max_iterations", [](RunConfig& c) -> int& { return c.fit.bfgs_max_iterations; }));

        t.push_back(integer("buffer.islands", [](RunConfig& c) -> int& { return c.buffer.islands; }));
        t.push_back(real("buffer.t0", [](RunConfig& c) -> double& { return c.buffer.t0; }));
        t.push_back(integer("buffer.period", [](RunConfig& c) -> std::size_t& { return c.buffer.period; }));
        t.push_back(real("buffer.tau_p", [](RunConfig& c) -> double& { return c.buffer.tau_p; }));
        t.push_back(choice("buffer.mode", +[](RunConfig& c) -> SamplingMode& { return c.buffer.mode; },
                           std::array<std::pair<const char*, SamplingMode>, 2>{
                               {{"two_stage", SamplingMode::TwoStage}, {"top_k", SamplingMode::TopK}}}));

        t.push_back(flag("ablation.no_prior", [](RunConfig& c) -> bool& { return c.ablation.no_prior; }));
        t.push_back(flag("ablation.no_program", [](RunConfig& c) -> bool& { return c.ablation.no_program; }));
        t.push_back(flag("ablation.no_refinement", [](RunConfig& c) -> bool& { return c.ablation.no_refinement; }));
        t.push_back(flag("ablation.no_skeleton_optimizer",
                         [](RunConfig& c) -> bool& { return c.ablation.no_skeleton_optimizer; }));
        t.push_back(flag("ablation.single_island", [](RunConfig& c) -> bool& { return c.ablation.single_island; }));
        return t;
    }();
    return table;
}

void flatten(const YAML::Node& node, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& out) {
    if (node.IsMap()) {
        for (const auto& kv : node) {
            const auto key = kv.first.as<std::string>();
            flatten(kv.second, prefix.empty() ? key : prefix + "." + key, out);
        }
    } else if (node.IsScalar()) {
        out.emplace_back(prefix, node.Scalar());
    } else if (node.IsNull()) {
        throw ConfigError(prefix + ": missing value");
    } else {
        throw ConfigError(prefix + ": lists are not supported");
    }
}

} // namespace

void RunConfig::validate() const {
    const auto& names = benchmark_names();
    if (std::find(names.begin(), names.end(), benchmark) == names.end()) {
        throw ConfigError("run.benchmark: unknown benchmark '" + benchmark + "'");
    }
    if (iterations < 1) throw ConfigError("run.iterations must be at least 1");
    if (demos < 1) throw ConfigError("run.demos must be at least 1");
    if (evaluators < 1) throw ConfigError("run.evaluators must be at least 1");
    if (reset_period < 1) throw ConfigError("run.reset_period must be at least 1");
    if (checkpoint_period < 0) throw ConfigError("run.checkpoint_period must be non-negative");
    if (prompt_chars < 1) throw ConfigError("run.prompt_chars must be positive");
    if (ablation.no_refinement && ablation.single_island) {
        throw ConfigError("ablation.no_refinement and ablation.single_island cannot be combined");
    }
    generator.validate();
    try {
        eqsr::validate(fit);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("fit: ") + e.what());
    }
    const auto b = effective_buffer();
    if (b.mode == SamplingMode::TwoStage && (b.islands < 2 || b.islands % 2 != 0)) {
        throw ConfigError("buffer.islands must be even and at least 2");
    }
    if (b.islands < 1 || !(b.t0 > 0.0) || b.period == 0 || !(b.tau_p > 0.0)) {
        throw ConfigError("buffer hyperparameters must be positive");
    }
}

BufferConfig RunConfig::effective_buffer() const {
    BufferConfig b = buffer;
    if (ablation.single_island) {
        b.islands = 1;
        b.mode = SamplingMode::TopK;
    }
    return b;
}

ParseOptions RunConfig::parse_options() const {
    ParseOptions o;
    o.allow_lines = !ablation.no_program;
    o.allow_params = !ablation.no_skeleton_optimizer;
    return o;
}

PromptOptions RunConfig::prompt_options() const {
    PromptOptions o;
    o.no_prior = ablation.no_prior;
    o.no_program = ablation.no_program;
    o.literal_constants = ablation.no_skeleton_optimizer;
    o.max_chars = prompt_chars;
    return o;
}

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& e : entries()) {
        if (e.key == key) {
            e.set(cfg, value);
            return;
        }
    }
    throw ConfigError("unknown configuration key '" + key + "'");
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override must look like key=value, got '" + assignment + "'");
    }
    apply_override(cfg, assignment.substr(0, eq), assignment.substr(eq + 1));
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& e : entries()) keys.push_back(e.key);
    return keys;
}

std::map<std::string, std::string> config_values(const RunConfig& cfg) {
    std::map<std::string, std::string> out;
    for (const auto& e : entries()) out[e.key] = e.get(cfg);
    return out;
}

RunConfig parse_config(const std::string& yaml_text) {
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("config syntax: ") + e.what());
    }
    RunConfig cfg;
    if (root.IsNull()) {
        return cfg;
    }
    if (!root.IsMap()) {
        throw ConfigError("config must be a mapping of sections");
    }
    std::vector<std::pair<std::string, std::string>> flat;
    flatten(root, "", flat);
    for (const auto& [k, v] : flat) {
        apply_override(cfg, k, v);
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config file " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

} // namespace eqsr
