#include "eqsr/score.hpp"

#include <cmath>
#include <stdexcept>

namespace eqsr {

namespace {

void check_lengths(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("prediction and target lengths differ");
    }
    if (a.empty()) {
        throw std::invalid_argument("empty prediction vector");
    }
}

} // namespace

double mse(std::span<const double> predicted, std::span<const double> target) {
    check_lengths(predicted, target);
    double sse = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const double r = predicted[i] - target[i];
        sse += r * r;
    }
    return sse / static_cast<double>(predicted.size());
}

double nmse(std::span<const double> predicted, std::span<const double> target) {
    check_lengths(predicted, target);
    double mean = 0.0;
    for (double y : target) {
        mean += y;
    }
    mean /= static_cast<double>(target.size());
    double sse = 0.0;
    double sst = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const double r = predicted[i] - target[i];
        const double c = target[i] - mean;
        sse += r * r;
        sst += c * c;
    }
    if (!(sst > 0.0)) {
        throw NormalizationError("nmse undefined: targets are constant");
    }
    return sse / sst;
}

Score fitness(const SkeletonProgram& program, std::span<const double> params, const Dataset& data) {
    const auto outcome = evaluate(program, params, data);
    if (!outcome.ok()) {
        return Score::discard(data.split());
    }
    Score s;
    s.split = data.split();
    const double m = mse(outcome.predictions, data.targets());
    if (!std::isfinite(m)) {
        return Score::discard(data.split());
    }
    s.fitness = -m;
    try {
        s.nmse = nmse(outcome.predictions, data.targets());
    } catch (const NormalizationError&) {
        s.nmse.reset();
    }
    return s;
}

} // namespace eqsr
