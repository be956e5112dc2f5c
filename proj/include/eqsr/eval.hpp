#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eqsr/dataset.hpp"
#include "eqsr/dsl.hpp"

namespace eqsr {

/// Predictions for every row, or the reason the program was rejected.
struct EvalOutcome {
    std::vector<double> predictions;
    std::optional<std::string> invalid;

    [[nodiscard]] bool ok() const noexcept { return !invalid.has_value(); }
};

struct GradientOutcome {
    double mse{0.0};
    std::vector<double> grad;
    std::optional<std::string> invalid;

    [[nodiscard]] bool ok() const noexcept { return !invalid.has_value(); }
};

struct EvalOptions {
    /// Work bound: node_count * rows * step_factor elementary operations.
    std::size_t step_factor{16};
};

/// A program compiled against one dataset, which must outlive it.
/// Construction checks shapes and
/// throws DataError on mismatch; evaluation itself never throws.
///
/// Subgradient convention: abs'(0) = +1; min/max on ties take the right
/// operand. sigmoid clamps its argument to [-50, 50] before exp (the only
/// silent clamp), with zero derivative outside that band.
class Evaluator {
public:
    Evaluator(const SkeletonProgram& program, const Dataset& data, EvalOptions options = {});

    [[nodiscard]] int param_count() const noexcept { return param_count_; }
    [[nodiscard]] std::size_t rows() const noexcept { return data_->rows(); }

    [[nodiscard]] EvalOutcome predict(std::span<const double> params) const;
    /// MSE only; nullopt when any prediction is non-finite.
    [[nodiscard]] std::optional<double> mse(std::span<const double> params) const;
    /// MSE and its exact gradient by forward-mode dual numbers.
    [[nodiscard]] GradientOutcome mse_gradient(std::span<const double> params) const;

    struct Instr {
        Op op;
        int a{-1};
        int b{-1};
        int index{0};
        double value{0.0};
    };

private:
    void check_params(std::span<const double> params) const;

    const Dataset* data_;
    std::vector<Instr> tape_;
    int result_slot_{0};
    int param_count_{0};
    std::optional<std::string> static_invalid_;
};

[[nodiscard]] EvalOutcome evaluate(const SkeletonProgram& program, std::span<const double> params,
                                   const Dataset& data, const EvalOptions& options = {});

[[nodiscard]] GradientOutcome evaluate_with_gradient(const SkeletonProgram& program, std::span<const double> params,
                                                     const Dataset& data, const EvalOptions& options = {});

} // namespace eqsr
