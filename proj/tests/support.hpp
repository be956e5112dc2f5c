#pragma once

// Test-only helpers: a random program generator independent of the mock
// hypothesis generator, and small dataset builders.

#include <cmath>
#include <algorithm>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "eqsr/dataset.hpp"
#include "eqsr/dsl.hpp"

namespace eqsr::testing {

/// Random expression over `inputs`, params[0..max_param) and small literals.
/// Avoids nothing: callers that need finite values pick safe operators.
struct ProgramGen {
    std::mt19937_64 rng;
    int inputs;
    int max_param;
    bool smooth_only{false};
    bool allow_literals{true};
    int bound_lines{0};

    explicit ProgramGen(std::uint64_t seed, int n_inputs = 2, int params = 4)
        : rng(seed), inputs(n_inputs), max_param(params) {}

    int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); }

    Expr leaf() {
        const int kind = pick(allow_literals ? 4 : 3);
        if (kind == 0 || kind == 1) {
            return expr::param(pick(max_param));
        }
        if (kind == 2) {
            if (bound_lines > 0 && pick(2) == 0) {
                return expr::bound(pick(bound_lines));
            }
            return expr::input(pick(inputs));
        }
        return expr::literal(static_cast<double>(pick(20)) / 4.0);
    }

    Expr tree(int depth) {
        if (depth <= 0 || pick(4) == 0) {
            return leaf();
        }
        static const Op smooth_unary[] = {Op::Neg, Op::Sin, Op::Cos, Op::Tanh, Op::Sigmoid};
        static const Op all_unary[] = {Op::Neg, Op::Sin, Op::Cos, Op::Tan, Op::Tanh, Op::Exp,
                                       Op::Log, Op::Sqrt, Op::Abs, Op::Sigmoid};
        static const Op smooth_binary[] = {Op::Add, Op::Sub, Op::Mul};
        static const Op all_binary[] = {Op::Add, Op::Sub, Op::Mul, Op::Div, Op::Pow, Op::Min, Op::Max};
        if (pick(3) == 0) {
            const Op op = smooth_only ? smooth_unary[pick(5)] : all_unary[pick(10)];
            return expr::unary(op, tree(depth - 1));
        }
        const Op op = smooth_only ? smooth_binary[pick(3)] : all_binary[pick(7)];
        return expr::binary(op, tree(depth - 1), tree(depth - 1));
    }

    /// Random valid program; parameters renumbered densely by construction.
    SkeletonProgram program(const std::vector<std::string>& names, int lines = 0, int depth = 3) {
        for (int attempt = 0; attempt < 1000; ++attempt) {
            std::vector<Binding> bindings;
            bound_lines = 0;
            for (int i = 0; i < lines; ++i) {
                bindings.push_back(Binding{"t" + std::to_string(i), tree(depth)});
                ++bound_lines;
            }
            Expr ret = tree(depth);
            bound_lines = 0;
            try {
                return SkeletonProgram::make(names, std::move(bindings), std::move(ret));
            } catch (const ValidationError&) {
                // unreferenced parameter or cap; draw again
            }
        }
        throw std::runtime_error("ProgramGen: no valid program drawn");
    }
};

inline Dataset make_dataset(std::vector<std::string> names, std::vector<std::vector<double>> rows,
                            std::vector<double> y) {
    std::vector<double> flat;
    for (const auto& r : rows) {
        flat.insert(flat.end(), r.begin(), r.end());
    }
    return Dataset(std::move(names), std::move(flat), std::move(y));
}

/// n rows with inputs drawn uniformly in [lo, hi].
inline Dataset random_dataset(std::uint64_t seed, const std::vector<std::string>& names, std::size_t n,
                              double lo = 0.2, double hi = 1.5) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> x;
    std::vector<double> y;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < names.size(); ++c) {
            x.push_back(u(rng));
        }
        y.push_back(u(rng));
    }
    return Dataset(names, std::move(x), std::move(y));
}

} // namespace eqsr::testing

namespace eqsr::testing {

/// Direct tree-walking interpreter in extended precision. Shares nothing
/// with the compiled evaluator; used as the finite-difference oracle.
inline long double oracle_node(const Node& e, std::span<const double> row, std::span<const long double> params,
                               const std::vector<long double>& bound) {
    auto a = [&] { return oracle_node(*e.lhs, row, params, bound); };
    auto b = [&] { return oracle_node(*e.rhs, row, params, bound); };
    switch (e.op) {
    case Op::Input: return row[static_cast<std::size_t>(e.index)];
    case Op::Bound: return bound[static_cast<std::size_t>(e.index)];
    case Op::Param: return params[static_cast<std::size_t>(e.index)];
    case Op::Literal: return e.value;
    case Op::Add: return a() + b();
    case Op::Sub: return a() - b();
    case Op::Mul: return a() * b();
    case Op::Div: return a() / b();
    case Op::Pow: return std::pow(a(), b());
    case Op::Min: return std::min(a(), b());
    case Op::Max: return std::max(a(), b());
    case Op::Neg: return -a();
    case Op::Sin: return std::sin(a());
    case Op::Cos: return std::cos(a());
    case Op::Tan: return std::tan(a());
    case Op::Tanh: return std::tanh(a());
    case Op::Exp: return std::exp(a());
    case Op::Log: return std::log(a());
    case Op::Sqrt: return std::sqrt(a());
    case Op::Abs: return std::fabs(a());
    case Op::Sigmoid: {
        const long double z = std::clamp(a(), -50.0L, 50.0L);
        return 1.0L / (1.0L + std::exp(-z));
    }
    }
    return 0.0L;
}

inline long double oracle_mse(const SkeletonProgram& p, std::span<const long double> params, const Dataset& data) {
    long double sse = 0.0L;
    for (std::size_t r = 0; r < data.rows(); ++r) {
        std::vector<long double> bound;
        for (const auto& line : p.lines()) {
            bound.push_back(oracle_node(*line.value, data.row(r), params, bound));
        }
        const long double res = oracle_node(*p.ret(), data.row(r), params, bound) - data.targets()[r];
        sse += res * res;
    }
    return sse / static_cast<long double>(data.rows());
}

/// Central differences with h = 1e-6 * max(1, |p_j|).
inline std::vector<double> finite_difference_gradient(const SkeletonProgram& p, std::span<const double> params,
                                                      const Dataset& data) {
    std::vector<long double> x(params.begin(), params.end());
    std::vector<double> g(params.size());
    for (std::size_t j = 0; j < params.size(); ++j) {
        const long double h = 1e-6L * std::max(1.0L, std::fabs(x[j]));
        const long double keep = x[j];
        x[j] = keep + h;
        const long double fp = oracle_mse(p, x, data);
        x[j] = keep - h;
        const long double fm = oracle_mse(p, x, data);
        x[j] = keep;
        g[j] = static_cast<double>((fp - fm) / (2.0L * h));
    }
    return g;
}

} // namespace eqsr::testing

namespace eqsr::testing {

struct GradientCheckReport {
    int triples{0};
    int coordinates{0};
    int failures{0};
    double worst_relative_error{0.0};
};

/// Compares evaluate_with_gradient against the extended-precision central
/// difference oracle over `count` random (program, params, data) triples.
/// Coordinates with |g| <= 1e-8 are skipped; tolerance is relative 1e-5.
template <class GradientFn>
GradientCheckReport gradient_check(std::uint64_t seed, int count, GradientFn&& gradient) {
    GradientCheckReport rep;
    const std::vector<std::string> names{"x", "v", "t"};
    ProgramGen gen(seed, 3, 6);
    gen.smooth_only = true;
    std::mt19937_64 rng(seed ^ 0x5eedULL);
    std::normal_distribution<double> normal(0.0, 1.0);
    int attempts = 0;
    while (rep.triples < count && attempts < 50 * count) {
        ++attempts;
        const auto program = gen.program(names, rep.triples % 3, 4);
        const auto data = random_dataset(rng(), names, 25, -1.5, 1.5);
        std::vector<double> params(static_cast<std::size_t>(program.param_count()));
        for (double& p : params) {
            p = normal(rng);
        }
        std::vector<double> g;
        if (!gradient(program, params, data, g)) {
            continue;
        }
        const auto fd = finite_difference_gradient(program, params, data);
        ++rep.triples;
        for (std::size_t j = 0; j < g.size(); ++j) {
            if (std::fabs(g[j]) <= 1e-8) {
                continue;
            }
            ++rep.coordinates;
            const double rel = std::fabs(g[j] - fd[j]) / std::fabs(g[j]);
            rep.worst_relative_error = std::max(rep.worst_relative_error, rel);
            if (!(rel <= 1e-5)) {
                ++rep.failures;
            }
        }
    }
    return rep;
}

} // namespace eqsr::testing
