#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "eqsr/dataset.hpp"
#include "eqsr/dsl.hpp"

namespace eqsr {

enum class FitMethod { Bfgs, Adam };
enum class InitScheme { StandardNormal, AllOnes };
enum class FitStatus { Converged, BudgetExhausted, InvalidProgram };
enum class StopReason { GradientTolerance, MaxIterations, LineSearchFailure, InvalidEvaluation, NoParameters };

[[nodiscard]] std::string_view to_string(FitMethod m) noexcept;
[[nodiscard]] std::string_view to_string(InitScheme s) noexcept;
[[nodiscard]] std::string_view to_string(FitStatus s) noexcept;
[[nodiscard]] std::string_view to_string(StopReason r) noexcept;

struct FitConfig {
    FitMethod method{FitMethod::Bfgs};
    int restarts{10};
    /// Restart 0 always starts from all ones; later restarts follow the scheme.
    InitScheme init{InitScheme::StandardNormal};
    /// Wall-clock budget for all restarts of one fit, checked between restarts.
    double budget_seconds{30.0};
    double adam_learning_rate{0.05};
    int adam_steps{2000};
    double gradient_tolerance{1e-8};
    int bfgs_max_iterations{500};
    std::uint64_t seed{0};
};

/// Throws std::invalid_argument when restarts < 1 or budget <= 0.
void validate(const FitConfig& cfg);

struct RestartDiagnostics {
    std::vector<double> start;
    bool valid_start{false};
    double final_mse{0.0};
    int iterations{0};
    StopReason stop{StopReason::InvalidEvaluation};
};

struct FitResult {
    std::vector<double> params;
    double mse{0.0};
    FitStatus status{FitStatus::Converged};
    std::vector<RestartDiagnostics> restarts;
};

/// Smooth objective: value only, and value with gradient. Either returns
/// nullopt when the point is not evaluable.
struct Objective {
    std::function<std::optional<double>(std::span<const double>)> value;
    std::function<std::optional<double>(std::span<const double>, std::vector<double>&)> value_grad;
};

// ---------------------------------------------------------------- BFGS

struct BfgsOptions {
    double gradient_tolerance{1e-8};
    int max_iterations{500};
    /// Armijo sufficient-decrease constant.
    double armijo{1e-4};
    int max_backtracks{60};
};

/// Dense inverse-Hessian BFGS iterate.
struct BfgsState {
    std::vector<double> x;
    std::vector<double> g;
    double f{0.0};
    std::vector<double> inv_hessian; // row-major n x n
    int iteration{0};
    bool scaled{false};
};

[[nodiscard]] std::optional<BfgsState> bfgs_init(const Objective& obj, std::vector<double> x0);
/// One quasi-Newton step with backtracking Armijo line search. Returns false
/// when no acceptable step exists; the state is then left unchanged.
bool bfgs_step(BfgsState& state, const Objective& obj, const BfgsOptions& options);

// ---------------------------------------------------------------- Adam

struct AdamOptions {
    double learning_rate{0.05};
    double beta1{0.9};
    double beta2{0.999};
    double epsilon{1e-8};
    int max_steps{2000};
    double gradient_tolerance{1e-8};
};

struct AdamState {
    std::vector<double> x;
    std::vector<double> g;
    double f{0.0};
    std::vector<double> m;
    std::vector<double> v;
    int t{0};
};

[[nodiscard]] std::optional<AdamState> adam_init(const Objective& obj, std::vector<double> x0);
/// Bias-corrected Adam update followed by re-evaluation at the new point.
/// Returns false when the new point is not evaluable (state unchanged).
bool adam_step(AdamState& state, const Objective& obj, const AdamOptions& options);

struct MinimizeResult {
    std::vector<double> x;
    double f{0.0};
    int iterations{0};
    StopReason stop{StopReason::MaxIterations};
};

/// Best iterate seen; nullopt when x0 is not evaluable.
[[nodiscard]] std::optional<MinimizeResult> bfgs_minimize(const Objective& obj, std::vector<double> x0,
                                                          const BfgsOptions& options);
[[nodiscard]] std::optional<MinimizeResult> adam_minimize(const Objective& obj, std::vector<double> x0,
                                                          const AdamOptions& options);

/// Multi-start least-squares fit of the program's parameters to `train`.
/// Throws DataError on shape mismatch; numeric failure is reported in status.
[[nodiscard]] FitResult fit(const SkeletonProgram& program, const Dataset& train, const FitConfig& cfg);

} // namespace eqsr
