#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eqsr/buffer.hpp"
#include "eqsr/dsl.hpp"

namespace eqsr {

struct Variable {
    std::string name;
    std::string meaning;
};

/// Natural-language description of a benchmark plus its seed skeleton.
struct ProblemSpec {
    std::string benchmark;
    std::string title;
    std::string description;
    std::vector<Variable> inputs;
    Variable target;
    std::string seed_text;

    [[nodiscard]] std::vector<std::string> input_names() const;
    /// Throws ConfigError when the seed does not parse against the inputs.
    void validate() const;
};

/// Built-in specs for osc1, osc2, ecoli and stress.
[[nodiscard]] ProblemSpec builtin_problem(const std::string& benchmark);

struct PromptOptions {
    /// Replace the description and variable meanings by bare names.
    bool no_prior{false};
    /// Ask for a single `return` expression without helper lines.
    bool no_program{false};
    /// Ask for numeric constants instead of params[i] placeholders.
    bool literal_constants{false};
    /// Character budget; the oldest demos are dropped first to meet it.
    std::size_t max_chars{16000};
};

/// Demos must be sorted by ascending fitness. Deterministic.
[[nodiscard]] std::string build_prompt(const ProblemSpec& spec, std::span<const Candidate> demos,
                                       const PromptOptions& opts = {});

struct ParseOutcome {
    std::optional<SkeletonProgram> program;
    /// Empty on success, otherwise e.g. "no program found" or
    /// "validation: param index".
    std::string reason;
};

/// Takes the first fenced block, or failing that the first `return` line
/// with the assignment lines directly above it.
[[nodiscard]] std::string extract_program_text(std::string_view raw);
[[nodiscard]] ParseOutcome parse_response(std::string_view raw, const std::vector<std::string>& inputs,
                                          const ParseOptions& opts = {});

struct GenerationRequest {
    std::string prompt;
    std::vector<Candidate> demos;
    int iteration{0};
    int samples{4};
    ParseOptions parse;
};

struct GenerationResult {
    std::vector<std::string> responses;
    /// Requests that failed after all retries.
    int failures{0};
    std::string last_error;
};

class Generator {
public:
    virtual ~Generator() = default;
    virtual GenerationResult generate(const GenerationRequest& request) = 0;
    [[nodiscard]] virtual std::string id() const = 0;
};

struct MockConfig {
    std::uint64_t seed{0};
    double w_replace{0.35};
    double w_add{0.35};
    double w_crossover{0.2};
    double w_hoist{0.1};
    /// When set, one of the samples at inject_iteration is this program.
    std::string inject_program;
    int inject_iteration{-1};
};

struct RemoteConfig {
    /// OpenAI-compatible base, e.g. http://localhost:8000/v1.
    std::string base_url;
    std::string model;
    /// Name of the environment variable holding the API key.
    std::string api_key_env{"OPENAI_API_KEY"};
    double temperature{0.8};
    int max_tokens{1024};
    double timeout_s{120.0};
    int max_retries{3};
    double backoff_s{1.0};
    int max_in_flight{4};
};

enum class GeneratorKind { Mock, Remote };

struct GeneratorConfig {
    GeneratorKind kind{GeneratorKind::Mock};
    int samples{4};
    MockConfig mock;
    RemoteConfig remote;

    void validate() const;
};

/// Offline stand-in for the language model: mutates and recombines demo
/// programs. Every output parses under the request's ParseOptions.
class MockGenerator final : public Generator {
public:
    MockGenerator(MockConfig cfg, std::vector<std::string> inputs);
    GenerationResult generate(const GenerationRequest& request) override;
    [[nodiscard]] std::string id() const override { return "mock"; }

private:
    MockConfig cfg_;
    std::vector<std::string> inputs_;
};

/// Chat-completions client. Requests b samples with `n`, falling back to
/// single-sample requests if the endpoint rejects n > 1.
class RemoteGenerator final : public Generator {
public:
    explicit RemoteGenerator(RemoteConfig cfg);
    GenerationResult generate(const GenerationRequest& request) override;
    [[nodiscard]] std::string id() const override { return "remote:" + cfg_.model; }

private:
    RemoteConfig cfg_;
    bool single_requests_{false};
};

[[nodiscard]] std::unique_ptr<Generator> make_generator(const GeneratorConfig& cfg,
                                                        const std::vector<std::string>& inputs);

} // namespace eqsr
