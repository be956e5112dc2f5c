#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "eqsr/buffer.hpp"
#include "eqsr/config.hpp"
#include "eqsr/dataset.hpp"
#include "eqsr/hypothesis.hpp"
#include "eqsr/score.hpp"

namespace eqsr {

/// Fatal run failure (corrupt checkpoint, unwritable output, ...).
class RunError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class CandidateStatus { Accepted, Rejected, Unparsed, Invalid };
[[nodiscard]] std::string_view to_string(CandidateStatus s) noexcept;

struct CandidateRecord {
    CandidateStatus status{CandidateStatus::Unparsed};
    /// Canonical text, empty when the response did not parse.
    std::string program;
    std::string reason;
    std::optional<double> fitness;
    std::optional<double> train_nmse;
    std::vector<double> params;
    std::string fit_status;
};

struct TrajectoryRecord {
    int iteration{0};
    /// -1 when no buffer sampling happened (no_refinement).
    int island{-1};
    std::vector<CandidateRecord> candidates;
    int responses{0};
    int parsed{0};
    int discarded{0};
    int generator_failures{0};
    double best_fitness{0.0};
    std::optional<double> best_train_nmse;
    std::string best_program;
    bool reset{false};
};

[[nodiscard]] nlohmann::ordered_json to_json(const TrajectoryRecord& r);

struct RunCounters {
    std::uint64_t iterations{0};
    std::uint64_t responses{0};
    std::uint64_t parsed{0};
    std::uint64_t discarded{0};
    std::uint64_t invalid{0};
    std::uint64_t fit_calls{0};
    std::uint64_t budget_exhausted{0};
    std::uint64_t accepted{0};
    std::uint64_t generator_failures{0};
    std::uint64_t resets{0};
};

struct SplitScores {
    Score train;
    Score id_valid;
    Score ood_valid;
};

struct RunResult {
    Candidate best;
    SplitScores scores;
    RunCounters counters;
    std::vector<TrajectoryRecord> trajectory;
    std::uint64_t registrations{0};
    nlohmann::ordered_json buffer_snapshot;
};

/// Runs the evolutionary loop over preloaded splits. When out_dir is set it
/// writes trajectory.jsonl, timing.csv, checkpoint.json, report.json and
/// best_curve.csv there.
class Engine {
public:
    Engine(RunConfig cfg, SplitSet data, std::unique_ptr<Generator> generator = nullptr);
    ~Engine();
    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    /// Runs iterations [0, T).
    RunResult run();
    /// Continues from a checkpoint written by an earlier run with the same
    /// configuration up to T.
    RunResult resume(const std::filesystem::path& checkpoint);

    /// Called after each iteration, for progress display.
    std::function<void(const TrajectoryRecord&)> on_iteration;

private:
    struct State;
    RunResult loop(int start);
    std::unique_ptr<State> st_;
};

/// Loads the splits from cfg.data_dir and runs.
[[nodiscard]] RunResult run_from_config(const RunConfig& cfg);

/// Evaluates a fixed program on all three splits after fitting on train.
[[nodiscard]] std::pair<Candidate, SplitScores> evaluate_program(const SkeletonProgram& program, const SplitSet& data,
                                                                  const FitConfig& fit_cfg);

[[nodiscard]] nlohmann::ordered_json report_json(const RunResult& r, const RunConfig& cfg);

} // namespace eqsr
