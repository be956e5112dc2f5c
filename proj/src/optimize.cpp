#include "eqsr/optimize.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "eqsr/eval.hpp"
#include "eqsr/rng.hpp"

namespace eqsr {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

double inf_norm(std::span<const double> a) {
    double m = 0.0;
    for (double v : a) {
        m = std::max(m, std::fabs(v));
    }
    return m;
}

std::vector<double> identity(std::size_t n) {
    std::vector<double> h(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        h[i * n + i] = 1.0;
    }
    return h;
}

} // namespace

std::string_view to_string(FitMethod m) noexcept { return m == FitMethod::Bfgs ? "bfgs" : "adam"; }

std::string_view to_string(InitScheme s) noexcept {
    return s == InitScheme::StandardNormal ? "standard_normal" : "all_ones";
}

std::string_view to_string(FitStatus s) noexcept {
    switch (s) {
    case FitStatus::Converged: return "converged";
    case FitStatus::BudgetExhausted: return "budget_exhausted";
    case FitStatus::InvalidProgram: return "invalid_program";
    }
    return "?";
}

std::string_view to_string(StopReason r) noexcept {
    switch (r) {
    case StopReason::GradientTolerance: return "gradient_tolerance";
    case StopReason::MaxIterations: return "max_iterations";
    case StopReason::LineSearchFailure: return "line_search_failure";
    case StopReason::InvalidEvaluation: return "invalid_evaluation";
    case StopReason::NoParameters: return "no_parameters";
    }
    return "?";
}

void validate(const FitConfig& cfg) {
    if (cfg.restarts < 1) {
        throw std::invalid_argument("fit.restarts must be >= 1");
    }
    if (!(cfg.budget_seconds > 0.0)) {
        throw std::invalid_argument("fit.budget_seconds must be > 0");
    }
    if (!(cfg.adam_learning_rate > 0.0) || cfg.adam_steps < 0 || cfg.bfgs_max_iterations < 0 ||
        cfg.gradient_tolerance < 0.0) {
        throw std::invalid_argument("fit: optimizer settings out of range");
    }
}

// ---------------------------------------------------------------- BFGS

std::optional<BfgsState> bfgs_init(const Objective& obj, std::vector<double> x0) {
    BfgsState s;
    s.x = std::move(x0);
    auto f = obj.value_grad(s.x, s.g);
    if (!f) {
        return std::nullopt;
    }
    s.f = *f;
    s.inv_hessian = identity(s.x.size());
    return s;
}

bool bfgs_step(BfgsState& s, const Objective& obj, const BfgsOptions& options) {
    const std::size_t n = s.x.size();
    auto& h = s.inv_hessian;
    std::vector<double> d(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            d[i] -= h[i * n + j] * s.g[j];
        }
    }
    double slope = dot(s.g, d);
    if (!(slope < 0.0)) {
        h = identity(n);
        s.scaled = false;
        for (std::size_t i = 0; i < n; ++i) {
            d[i] = -s.g[i];
        }
        slope = -dot(s.g, s.g);
        if (!(slope < 0.0)) {
            return false;
        }
    }

    std::vector<double> trial(n);
    double alpha = 1.0;
    bool accepted = false;
    double f_new = 0.0;
    for (int k = 0; k <= options.max_backtracks; ++k, alpha *= 0.5) {
        for (std::size_t i = 0; i < n; ++i) {
            trial[i] = s.x[i] + alpha * d[i];
        }
        auto f = obj.value(trial);
        if (f && *f <= s.f + options.armijo * alpha * slope) {
            f_new = *f;
            accepted = true;
            break;
        }
    }
    if (!accepted) {
        return false;
    }
    std::vector<double> g_new;
    auto f_check = obj.value_grad(trial, g_new);
    if (!f_check) {
        return false;
    }
    f_new = *f_check;

    std::vector<double> sv(n);
    std::vector<double> yv(n);
    for (std::size_t i = 0; i < n; ++i) {
        sv[i] = trial[i] - s.x[i];
        yv[i] = g_new[i] - s.g[i];
    }
    const double sy = dot(sv, yv);
    if (sy > 1e-12 * std::sqrt(dot(sv, sv) * dot(yv, yv)) && sy > 0.0) {
        if (!s.scaled) {
            const double gamma = sy / dot(yv, yv);
            for (double& v : h) {
                v *= gamma;
            }
            s.scaled = true;
        }
        std::vector<double> hy(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                hy[i] += h[i * n + j] * yv[j];
            }
        }
        const double yhy = dot(yv, hy);
        const double a = (sy + yhy) / (sy * sy);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                h[i * n + j] += a * sv[i] * sv[j] - (hy[i] * sv[j] + sv[i] * hy[j]) / sy;
            }
        }
    }
    s.x = std::move(trial);
    s.g = std::move(g_new);
    s.f = f_new;
    ++s.iteration;
    return true;
}

std::optional<MinimizeResult> bfgs_minimize(const Objective& obj, std::vector<double> x0, const BfgsOptions& options) {
    auto state = bfgs_init(obj, std::move(x0));
    if (!state) {
        return std::nullopt;
    }
    MinimizeResult r;
    r.stop = StopReason::MaxIterations;
    while (true) {
        if (inf_norm(state->g) <= options.gradient_tolerance) {
            r.stop = StopReason::GradientTolerance;
            break;
        }
        if (state->iteration >= options.max_iterations) {
            r.stop = StopReason::MaxIterations;
            break;
        }
        if (!bfgs_step(*state, obj, options)) {
            r.stop = StopReason::LineSearchFailure;
            break;
        }
    }
    // Armijo acceptance makes f strictly decreasing, so the last iterate is the best.
    r.x = std::move(state->x);
    r.f = state->f;
    r.iterations = state->iteration;
    return r;
}

// ---------------------------------------------------------------- Adam

std::optional<AdamState> adam_init(const Objective& obj, std::vector<double> x0) {
    AdamState s;
    s.x = std::move(x0);
    auto f = obj.value_grad(s.x, s.g);
    if (!f) {
        return std::nullopt;
    }
    s.f = *f;
    s.m.assign(s.x.size(), 0.0);
    s.v.assign(s.x.size(), 0.0);
    return s;
}

bool adam_step(AdamState& s, const Objective& obj, const AdamOptions& o) {
    const std::size_t n = s.x.size();
    std::vector<double> m = s.m;
    std::vector<double> v = s.v;
    std::vector<double> x = s.x;
    const int t = s.t + 1;
    const double c1 = 1.0 - std::pow(o.beta1, t);
    const double c2 = 1.0 - std::pow(o.beta2, t);
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * s.g[i];
        v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * s.g[i] * s.g[i];
        x[i] -= o.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + o.epsilon);
    }
    std::vector<double> g;
    auto f = obj.value_grad(x, g);
    if (!f) {
        return false;
    }
    s.x = std::move(x);
    s.g = std::move(g);
    s.f = *f;
    s.m = std::move(m);
    s.v = std::move(v);
    s.t = t;
    return true;
}

std::optional<MinimizeResult> adam_minimize(const Objective& obj, std::vector<double> x0, const AdamOptions& options) {
    auto state = adam_init(obj, std::move(x0));
    if (!state) {
        return std::nullopt;
    }
    MinimizeResult best{state->x, state->f, 0, StopReason::MaxIterations};
    StopReason stop = StopReason::MaxIterations;
    while (true) {
        if (inf_norm(state->g) <= options.gradient_tolerance) {
            stop = StopReason::GradientTolerance;
            break;
        }
        if (state->t >= options.max_steps) {
            stop = StopReason::MaxIterations;
            break;
        }
        if (!adam_step(*state, obj, options)) {
            stop = StopReason::InvalidEvaluation;
            break;
        }
        if (state->f < best.f) {
            best.x = state->x;
            best.f = state->f;
        }
    }
    best.iterations = state->t;
    best.stop = stop;
    return best;
}

// ----------------------------------------------------------------- fit

FitResult fit(const SkeletonProgram& program, const Dataset& train, const FitConfig& cfg) {
    validate(cfg);
    const Evaluator evaluator(program, train);
    const auto p = static_cast<std::size_t>(program.param_count());

    FitResult result;
    if (p == 0) {
        RestartDiagnostics diag;
        diag.stop = StopReason::NoParameters;
        auto m = evaluator.mse({});
        diag.valid_start = m.has_value();
        diag.final_mse = m.value_or(std::numeric_limits<double>::infinity());
        result.restarts.push_back(diag);
        result.mse = diag.final_mse;
        result.status = m ? FitStatus::Converged : FitStatus::InvalidProgram;
        return result;
    }

    Objective obj;
    obj.value = [&](std::span<const double> x) { return evaluator.mse(x); };
    obj.value_grad = [&](std::span<const double> x, std::vector<double>& g) -> std::optional<double> {
        auto out = evaluator.mse_gradient(x);
        if (!out.ok()) {
            return std::nullopt;
        }
        g = std::move(out.grad);
        return out.mse;
    };

    const BfgsOptions bfgs{cfg.gradient_tolerance, cfg.bfgs_max_iterations};
    AdamOptions adam;
    adam.learning_rate = cfg.adam_learning_rate;
    adam.max_steps = cfg.adam_steps;
    adam.gradient_tolerance = cfg.gradient_tolerance;

    const auto started = std::chrono::steady_clock::now();
    bool have_best = false;
    bool out_of_time = false;
    result.mse = std::numeric_limits<double>::infinity();
    for (int r = 0; r < cfg.restarts; ++r) {
        if (r > 0) {
            const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
            if (elapsed.count() >= cfg.budget_seconds) {
                out_of_time = true;
                break;
            }
        }
        RestartDiagnostics diag;
        diag.start.assign(p, 1.0);
        if (r > 0 && cfg.init == InitScheme::StandardNormal) {
            Rng rng(derive_seed(cfg.seed, "fit-restart", static_cast<std::uint64_t>(r)));
            for (double& v : diag.start) {
                v = standard_normal(rng);
            }
        }
        auto run = cfg.method == FitMethod::Bfgs ? bfgs_minimize(obj, diag.start, bfgs)
                                                 : adam_minimize(obj, diag.start, adam);
        if (run) {
            diag.valid_start = true;
            diag.final_mse = run->f;
            diag.iterations = run->iterations;
            diag.stop = run->stop;
            if (!have_best || run->f < result.mse) {
                result.mse = run->f;
                result.params = run->x;
                have_best = true;
            }
        } else {
            diag.final_mse = std::numeric_limits<double>::infinity();
            diag.stop = StopReason::InvalidEvaluation;
        }
        result.restarts.push_back(std::move(diag));
    }
    if (!have_best) {
        result.params = result.restarts.front().start;
        result.status = FitStatus::InvalidProgram;
    } else {
        result.status = out_of_time ? FitStatus::BudgetExhausted : FitStatus::Converged;
    }
    return result;
}

} // namespace eqsr
