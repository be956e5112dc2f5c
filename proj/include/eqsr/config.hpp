#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "eqsr/buffer.hpp"
#include "eqsr/hypothesis.hpp"
#include "eqsr/optimize.hpp"

namespace eqsr {

struct Ablations {
    bool no_prior{false};
    bool no_program{false};
    bool no_refinement{false};
    bool no_skeleton_optimizer{false};
    bool single_island{false};
};

struct RunConfig {
    /// osc1, osc2, ecoli or stress.
    std::string benchmark{"osc1"};
    /// Directory holding train.csv, id_valid.csv, ood_valid.csv.
    std::filesystem::path data_dir;
    /// Empty: nothing is written.
    std::filesystem::path out_dir;
    std::uint64_t seed{0};
    int iterations{2500};
    /// k in-context demos per prompt.
    int demos{2};
    /// e concurrent evaluations.
    int evaluators{4};
    int reset_period{500};
    /// Defaults to reset_period when 0.
    int checkpoint_period{0};
    /// Discard candidates whose fit ran out of time instead of keeping the
    /// best iterate.
    bool discard_on_budget{false};
    std::size_t prompt_chars{16000};
    /// Progress line on stderr every this many iterations (0 = quiet).
    int log_every{0};

    GeneratorConfig generator;
    FitConfig fit;
    BufferConfig buffer;
    Ablations ablation;

    /// Throws ConfigError.
    void validate() const;
    /// Buffer settings after the single_island switch.
    [[nodiscard]] BufferConfig effective_buffer() const;
    [[nodiscard]] ParseOptions parse_options() const;
    [[nodiscard]] PromptOptions prompt_options() const;
};

/// Sets one dotted key (e.g. "buffer.islands") from its text value. Throws
/// ConfigError for unknown keys and malformed values.
void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);
/// "key=value" form.
void apply_override(RunConfig& cfg, const std::string& assignment);

/// Every key accepted by apply_override, in documentation order.
[[nodiscard]] std::vector<std::string> config_keys();
/// Current value of every key as text.
[[nodiscard]] std::map<std::string, std::string> config_values(const RunConfig& cfg);

/// YAML file whose nested mappings flatten to the dotted keys.
[[nodiscard]] RunConfig load_config(const std::filesystem::path& path);
[[nodiscard]] RunConfig parse_config(const std::string& yaml_text);

} // namespace eqsr
