#include "eqsr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "eqsr/dual.hpp"

namespace eqsr {

namespace {

constexpr double kSigmoidClamp = 50.0;

inline double value_of(double x) { return x; }
template <int N>
inline double value_of(const Dual<N>& x) {
    return x.v;
}

inline double sigmoid(double z) {
    const double c = std::clamp(z, -kSigmoidClamp, kSigmoidClamp);
    return 1.0 / (1.0 + std::exp(-c));
}

template <int N>
inline Dual<N> sigmoid(const Dual<N>& z) {
    const double s = sigmoid(z.v);
    const double slope = std::fabs(z.v) < kSigmoidClamp ? s * (1.0 - s) : 0.0;
    return dual_detail::chain(z, s, slope);
}

inline double abs_of(double x) { return std::fabs(x); }
template <int N>
inline Dual<N> abs_of(const Dual<N>& x) {
    return abs(x);
}

template <class T>
inline T apply(Op op, const T& a, const T& b) {
    using std::cos;
    using std::exp;
    using std::log;
    using std::pow;
    using std::sin;
    using std::sqrt;
    using std::tan;
    using std::tanh;
    switch (op) {
    case Op::Add: return a + b;
    case Op::Sub: return a - b;
    case Op::Mul: return a * b;
    case Op::Div: return a / b;
    case Op::Pow: return pow(a, b);
    case Op::Min: return value_of(a) < value_of(b) ? a : b;
    case Op::Max: return value_of(a) > value_of(b) ? a : b;
    case Op::Neg: return -a;
    case Op::Sin: return sin(a);
    case Op::Cos: return cos(a);
    case Op::Tan: return tan(a);
    case Op::Tanh: return tanh(a);
    case Op::Exp: return exp(a);
    case Op::Log: return log(a);
    case Op::Sqrt: return sqrt(a);
    case Op::Abs: return abs_of(a);
    case Op::Sigmoid: return sigmoid(a);
    default: return a;
    }
}

template <class T>
inline T load_param(std::span<const double> params, int i) {
    if constexpr (std::is_same_v<T, double>) {
        return params[static_cast<std::size_t>(i)];
    } else {
        return T::variable(params[static_cast<std::size_t>(i)], i);
    }
}

int emit(const Expr& e, std::vector<Evaluator::Instr>& tape, const std::vector<int>& line_slots) {
    using Instr = Evaluator::Instr;
    switch (e->op) {
    case Op::Bound: return line_slots[static_cast<std::size_t>(e->index)];
    case Op::Input:
    case Op::Param: tape.push_back(Instr{e->op, -1, -1, e->index, 0.0}); return static_cast<int>(tape.size()) - 1;
    case Op::Literal: tape.push_back(Instr{e->op, -1, -1, 0, e->value}); return static_cast<int>(tape.size()) - 1;
    default: break;
    }
    const int a = emit(e->lhs, tape, line_slots);
    const int b = is_binary(e->op) ? emit(e->rhs, tape, line_slots) : -1;
    tape.push_back(Instr{e->op, a, b, 0, 0.0});
    return static_cast<int>(tape.size()) - 1;
}

constexpr std::size_t kBlock = 64;

template <Op O, class T>
void apply_block(const T* a, const T* b, T* out, std::size_t m) {
    for (std::size_t i = 0; i < m; ++i) {
        out[i] = apply<T>(O, a[i], b[i]);
    }
}

template <class T>
void apply_block(Op op, const T* a, const T* b, T* out, std::size_t m) {
    switch (op) {
    case Op::Add: return apply_block<Op::Add>(a, b, out, m);
    case Op::Sub: return apply_block<Op::Sub>(a, b, out, m);
    case Op::Mul: return apply_block<Op::Mul>(a, b, out, m);
    case Op::Div: return apply_block<Op::Div>(a, b, out, m);
    case Op::Pow: return apply_block<Op::Pow>(a, b, out, m);
    case Op::Min: return apply_block<Op::Min>(a, b, out, m);
    case Op::Max: return apply_block<Op::Max>(a, b, out, m);
    case Op::Neg: return apply_block<Op::Neg>(a, b, out, m);
    case Op::Sin: return apply_block<Op::Sin>(a, b, out, m);
    case Op::Cos: return apply_block<Op::Cos>(a, b, out, m);
    case Op::Tan: return apply_block<Op::Tan>(a, b, out, m);
    case Op::Tanh: return apply_block<Op::Tanh>(a, b, out, m);
    case Op::Exp: return apply_block<Op::Exp>(a, b, out, m);
    case Op::Log: return apply_block<Op::Log>(a, b, out, m);
    case Op::Sqrt: return apply_block<Op::Sqrt>(a, b, out, m);
    case Op::Abs: return apply_block<Op::Abs>(a, b, out, m);
    case Op::Sigmoid: return apply_block<Op::Sigmoid>(a, b, out, m);
    default: return;
    }
}

/// Runs the tape over blocks of rows; `sink(row, value)` is called in row
/// order and returns false to stop early.
template <class T, class Sink>
void run_tape(const std::vector<Evaluator::Instr>& tape, int result, const Dataset& data,
              std::span<const double> params, Sink&& sink) {
    const std::size_t width = tape.size();
    std::vector<T> slots(width * kBlock);
    std::vector<T> param_values(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        param_values[i] = load_param<T>(params, static_cast<int>(i));
    }
    const std::size_t n = data.rows();
    const std::size_t cols = data.cols();
    const double* inputs = data.inputs().data();
    for (std::size_t start = 0; start < n; start += kBlock) {
        const std::size_t m = std::min(kBlock, n - start);
        for (std::size_t k = 0; k < width; ++k) {
            const auto& in = tape[k];
            T* out = slots.data() + k * kBlock;
            switch (in.op) {
            case Op::Input: {
                const double* col = inputs + start * cols + static_cast<std::size_t>(in.index);
                for (std::size_t i = 0; i < m; ++i) {
                    out[i] = T(col[i * cols]);
                }
                break;
            }
            case Op::Param: std::fill_n(out, m, param_values[static_cast<std::size_t>(in.index)]); break;
            case Op::Literal: std::fill_n(out, m, T(in.value)); break;
            default: {
                const T* a = slots.data() + static_cast<std::size_t>(in.a) * kBlock;
                const T* b = in.b >= 0 ? slots.data() + static_cast<std::size_t>(in.b) * kBlock : a;
                apply_block<T>(in.op, a, b, out, m);
            }
            }
        }
        const T* res = slots.data() + static_cast<std::size_t>(result) * kBlock;
        for (std::size_t i = 0; i < m; ++i) {
            if (!sink(start + i, res[i])) {
                return;
            }
        }
    }
}

template <int N>
GradientOutcome gradient_impl(const std::vector<Evaluator::Instr>& tape, int result, const Dataset& data,
                              std::span<const double> params) {
    GradientOutcome out;
    double sse = 0.0;
    std::array<double, N> acc{};
    bool finite = true;
    const auto& y = data.targets();
    run_tape<Dual<N>>(tape, result, data, params, [&](std::size_t r, const Dual<N>& yhat) {
        if (!std::isfinite(yhat.v)) {
            finite = false;
            return false;
        }
        const double res = yhat.v - y[r];
        sse += res * res;
        for (int j = 0; j < N; ++j) {
            acc[static_cast<std::size_t>(j)] += res * yhat.d[static_cast<std::size_t>(j)];
        }
        return true;
    });
    if (!finite) {
        out.invalid = "non-finite";
        return out;
    }
    const double n = static_cast<double>(data.rows());
    out.mse = sse / n;
    out.grad.resize(static_cast<std::size_t>(N));
    for (int j = 0; j < N; ++j) {
        out.grad[static_cast<std::size_t>(j)] = 2.0 * acc[static_cast<std::size_t>(j)] / n;
    }
    const bool grad_finite =
        std::all_of(out.grad.begin(), out.grad.end(), [](double g) { return std::isfinite(g); });
    if (!std::isfinite(out.mse) || !grad_finite) {
        out.invalid = "non-finite";
    }
    return out;
}

} // namespace

Evaluator::Evaluator(const SkeletonProgram& program, const Dataset& data, EvalOptions options)
    : data_(&data), param_count_(program.param_count()) {
    if (program.inputs() != data.input_names()) {
        throw DataError("program inputs do not match dataset columns");
    }
    if (!program.ret()) {
        throw DataError("empty program");
    }
    std::vector<int> line_slots;
    for (const auto& line : program.lines()) {
        line_slots.push_back(emit(line.value, tape_, line_slots));
    }
    result_slot_ = emit(program.ret(), tape_, line_slots);

    const std::size_t nodes = std::max<std::size_t>(complexity(program).node_count, 1);
    const std::size_t n = data.rows();
    const auto max = std::numeric_limits<std::size_t>::max();
    const std::size_t cap = (nodes > max / n / std::max<std::size_t>(options.step_factor, 1))
                                ? max
                                : nodes * n * options.step_factor;
    if (options.step_factor == 0 || tape_.size() > cap / n) {
        static_invalid_ = "step cap exceeded";
    }
}

void Evaluator::check_params(std::span<const double> params) const {
    if (params.size() != static_cast<std::size_t>(param_count_)) {
        throw DataError("parameter vector has length " + std::to_string(params.size()) + ", program expects " +
                        std::to_string(param_count_));
    }
}

EvalOutcome Evaluator::predict(std::span<const double> params) const {
    check_params(params);
    EvalOutcome out;
    if (static_invalid_) {
        out.invalid = static_invalid_;
        return out;
    }
    out.predictions.resize(data_->rows());
    bool finite = true;
    run_tape<double>(tape_, result_slot_, *data_, params, [&](std::size_t r, double v) {
        if (!std::isfinite(v)) {
            finite = false;
            return false;
        }
        out.predictions[r] = v;
        return true;
    });
    if (!finite) {
        out.predictions.clear();
        out.invalid = "non-finite";
    }
    return out;
}

std::optional<double> Evaluator::mse(std::span<const double> params) const {
    check_params(params);
    if (static_invalid_) {
        return std::nullopt;
    }
    double sse = 0.0;
    bool finite = true;
    const auto& y = data_->targets();
    run_tape<double>(tape_, result_slot_, *data_, params, [&](std::size_t r, double v) {
        if (!std::isfinite(v)) {
            finite = false;
            return false;
        }
        sse += (v - y[r]) * (v - y[r]);
        return true;
    });
    const double m = sse / static_cast<double>(data_->rows());
    if (!finite || !std::isfinite(m)) {
        return std::nullopt;
    }
    return m;
}

GradientOutcome Evaluator::mse_gradient(std::span<const double> params) const {
    check_params(params);
    if (static_invalid_) {
        GradientOutcome out;
        out.invalid = static_invalid_;
        return out;
    }
    switch (param_count_) {
    case 0: {
        GradientOutcome out;
        if (auto m = mse(params)) {
            out.mse = *m;
        } else {
            out.invalid = "non-finite";
        }
        return out;
    }
    case 1: return gradient_impl<1>(tape_, result_slot_, *data_, params);
    case 2: return gradient_impl<2>(tape_, result_slot_, *data_, params);
    case 3: return gradient_impl<3>(tape_, result_slot_, *data_, params);
    case 4: return gradient_impl<4>(tape_, result_slot_, *data_, params);
    case 5: return gradient_impl<5>(tape_, result_slot_, *data_, params);
    case 6: return gradient_impl<6>(tape_, result_slot_, *data_, params);
    case 7: return gradient_impl<7>(tape_, result_slot_, *data_, params);
    case 8: return gradient_impl<8>(tape_, result_slot_, *data_, params);
    case 9: return gradient_impl<9>(tape_, result_slot_, *data_, params);
    case 10: return gradient_impl<10>(tape_, result_slot_, *data_, params);
    default: throw DataError("parameter count above " + std::to_string(kMaxParams));
    }
}

EvalOutcome evaluate(const SkeletonProgram& program, std::span<const double> params, const Dataset& data,
                     const EvalOptions& options) {
    return Evaluator(program, data, options).predict(params);
}

GradientOutcome evaluate_with_gradient(const SkeletonProgram& program, std::span<const double> params,
                                       const Dataset& data, const EvalOptions& options) {
    return Evaluator(program, data, options).mse_gradient(params);
}

} // namespace eqsr
