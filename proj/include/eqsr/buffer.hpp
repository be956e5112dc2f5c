#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "eqsr/dsl.hpp"
#include "eqsr/errors.hpp"
#include "eqsr/rng.hpp"

namespace eqsr {

/// A scored program. `order` is assigned by the buffer on insertion and
/// orders candidates by age (smaller is older).
struct Candidate {
    SkeletonProgram program;
    std::string text;
    std::vector<double> params;
    double fitness{0.0};
    std::optional<double> train_nmse;
    bool discarded{false};
    int iteration{0};
    int source_island{-1};
    std::string generator;
    std::uint64_t order{0};

    [[nodiscard]] std::size_t length() const noexcept { return text.size(); }
};

/// Cluster key: fitness rounded to 6 significant digits.
[[nodiscard]] double signature(double fitness);

/// Boltzmann temperature T0 (1 - (u mod N)/N), floored at 1e-6.
[[nodiscard]] double cluster_temperature(std::size_t u, double t0, std::size_t period);

/// Softmax of cluster mean scores at the scheduled temperature.
[[nodiscard]] std::vector<double> cluster_probabilities(std::span<const double> mean_scores, std::size_t u,
                                                        double t0 = 0.1, std::size_t period = 10000);

/// Length preference within a cluster. With l_i the negative character
/// length, l~_i = (l_i - min l) / (max l + 1e-6) and P_i ∝ exp(-l~_i / tau_p).
/// Since max l < 0 the normaliser is negative, which makes shorter programs
/// the more likely ones.
[[nodiscard]] std::vector<double> length_probabilities(std::span<const std::size_t> lengths, double tau_p = 1.0);

struct Cluster {
    double key{0.0};
    std::vector<Candidate> members; // oldest first

    [[nodiscard]] double mean_score() const;
};

struct Island {
    std::map<double, Cluster> clusters;
    double best{0.0};
    /// Programs currently stored (the u of the temperature schedule).
    std::size_t programs{0};

    /// Highest fitness, oldest on ties.
    [[nodiscard]] const Candidate& best_candidate() const;
};

enum class SamplingMode {
    /// Uniform island, Boltzmann cluster, length-biased member.
    TwoStage,
    /// Deterministic k best of the single island.
    TopK,
};

struct BufferConfig {
    int islands{10};
    double t0{0.1};
    std::size_t period{10000};
    double tau_p{1.0};
    SamplingMode mode{SamplingMode::TwoStage};
};

struct Sample {
    /// Ascending fitness: demos[0] is rendered as equation_v0.
    std::vector<Candidate> demos;
    int island{0};
};

/// Multi-island store of scored programs. All mutation goes through
/// register_candidate() and reset_islands(); callers serialise them.
class ExperienceBuffer {
public:
    /// Every island starts with one copy of `seed`. Throws ConfigError for a
    /// discarded seed, an odd or too small island count (two-stage mode), or
    /// non-positive hyperparameters.
    static ExperienceBuffer init_population(const Candidate& seed, const BufferConfig& cfg, std::uint64_t rng_seed);

    /// Accepts iff fitness strictly beats the island's best.
    bool register_candidate(Candidate cand, int island);
    [[nodiscard]] Sample sample(int k);
    /// Replaces the floor(m/2) worst islands by copies of survivors' bests.
    /// Returns the reset island indices in ascending order.
    std::vector<int> reset_islands();

    [[nodiscard]] const std::vector<Island>& islands() const noexcept { return islands_; }
    [[nodiscard]] const BufferConfig& config() const noexcept { return cfg_; }
    /// Seeds placed at init plus accepted registrations.
    [[nodiscard]] std::uint64_t registrations() const noexcept { return registrations_; }

    /// Throws std::logic_error when an island invariant is broken.
    void validate() const;

    [[nodiscard]] nlohmann::ordered_json snapshot() const;
    [[nodiscard]] static ExperienceBuffer restore(const nlohmann::json& snap, const std::vector<std::string>& inputs);

private:
    ExperienceBuffer() = default;
    void insert(Island& island, Candidate cand);

    BufferConfig cfg_;
    std::vector<Island> islands_;
    Rng rng_;
    std::uint64_t next_order_{0};
    std::uint64_t registrations_{0};
};

[[nodiscard]] nlohmann::ordered_json candidate_to_json(const Candidate& c);
[[nodiscard]] Candidate candidate_from_json(const nlohmann::json& j, const std::vector<std::string>& inputs);

} // namespace eqsr
