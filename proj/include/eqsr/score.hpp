#pragma once

#include <optional>
#include <span>
#include <stdexcept>

#include "eqsr/dataset.hpp"
#include "eqsr/dsl.hpp"
#include "eqsr/eval.hpp"

namespace eqsr {

/// Raised by nmse() when the targets have zero variance.
class NormalizationError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Fitness s = -mse (higher is better) plus NMSE for reporting. A
/// discarded score never enters the experience buffer.
struct Score {
    double fitness{0.0};
    /// Absent when the split's targets are constant.
    std::optional<double> nmse;
    Split split{Split::Train};
    bool discarded{false};

    static Score discard(Split s) {
        Score r;
        r.split = s;
        r.discarded = true;
        return r;
    }
};

/// (1/n) sum (yhat - y)^2. Throws std::invalid_argument on length mismatch
/// or empty input.
[[nodiscard]] double mse(std::span<const double> predicted, std::span<const double> target);

/// sum (yhat - y)^2 / sum (y - mean(y))^2, normalised by the variance of the
/// split being evaluated. The mean predictor scores exactly 1.
[[nodiscard]] double nmse(std::span<const double> predicted, std::span<const double> target);

[[nodiscard]] Score fitness(const SkeletonProgram& program, std::span<const double> params, const Dataset& data);

} // namespace eqsr
