#include <algorithm>
#include <cmath>
#include <map>

#include "eqsr/hypothesis.hpp"
#include "eqsr/rng.hpp"

namespace eqsr {

namespace {

constexpr int kFreshParam = 1000;
constexpr int kAttempts = 20;

constexpr Op kUnary[] = {Op::Neg, Op::Sin, Op::Cos, Op::Tan, Op::Tanh, Op::Exp, Op::Log, Op::Sqrt, Op::Abs, Op::Sigmoid};
constexpr Op kBinary[] = {Op::Add, Op::Sub, Op::Mul, Op::Div, Op::Pow, Op::Min, Op::Max};

void collect(const Expr& e, std::vector<Expr>& out) {
    out.push_back(e);
    if (e->lhs) collect(e->lhs, out);
    if (e->rhs) collect(e->rhs, out);
}

/// Copy of `e` with the n-th node in preorder replaced by `repl`.
Expr replace_nth(const Expr& e, std::size_t& n, const Expr& repl) {
    if (n == 0) {
        n = static_cast<std::size_t>(-1);
        return repl;
    }
    --n;
    if (is_leaf(e->op)) {
        return e;
    }
    Expr lhs = replace_nth(e->lhs, n, repl);
    if (is_unary(e->op)) {
        return lhs == e->lhs ? e : expr::unary(e->op, lhs);
    }
    Expr rhs = replace_nth(e->rhs, n, repl);
    return lhs == e->lhs && rhs == e->rhs ? e : expr::binary(e->op, lhs, rhs);
}

Expr replace_at(const Expr& e, std::size_t index, const Expr& repl) {
    std::size_t n = index;
    return replace_nth(e, n, repl);
}

/// Maps every parameter slot through `f`.
template <class F>
Expr map_params(const Expr& e, F&& f) {
    switch (e->op) {
    case Op::Param: return expr::param(f(e->index));
    case Op::Input:
    case Op::Bound:
    case Op::Literal: return e;
    default: break;
    }
    if (is_unary(e->op)) {
        return expr::unary(e->op, map_params(e->lhs, f));
    }
    return expr::binary(e->op, map_params(e->lhs, f), map_params(e->rhs, f));
}

class Mutator {
public:
    Mutator(Rng& rng, int inputs, bool literals) : rng_(rng), inputs_(inputs), literals_(literals) {}

    Expr constant() {
        if (literals_) {
            static constexpr double kValues[] = {0.5, 1.0, 2.0, 3.0};
            if (uniform01(rng_) < 0.5) {
                return expr::literal(kValues[uniform_index(rng_, 4)]);
            }
            return expr::literal(std::round(uniform01(rng_) * 5000.0) / 1000.0);
        }
        return expr::param(next_param_++);
    }

    Expr leaf() {
        const double u = uniform01(rng_);
        if (u < 0.55) {
            return expr::input(static_cast<int>(uniform_index(rng_, static_cast<std::size_t>(inputs_))));
        }
        if (u < 0.9) {
            return constant();
        }
        return expr::literal(static_cast<double>(1 + uniform_index(rng_, 3)));
    }

    Expr term(int depth) {
        const double u = uniform01(rng_);
        if (depth <= 0 || u < 0.3) {
            return leaf();
        }
        if (u < 0.6) {
            const Op op = kUnary[uniform_index(rng_, std::size(kUnary))];
            // scaled argument keeps the function's shape adjustable
            Expr arg = uniform01(rng_) < 0.5 ? expr::binary(Op::Mul, constant(), term(depth - 1)) : term(depth - 1);
            return expr::unary(op, arg);
        }
        const Op op = kBinary[uniform_index(rng_, std::size(kBinary))];
        if (op == Op::Pow) {
            return expr::binary(Op::Pow, term(depth - 1), expr::literal(static_cast<double>(2 + uniform_index(rng_, 2))));
        }
        return expr::binary(op, term(depth - 1), term(depth - 1));
    }

    Expr scaled_term(int depth) { return expr::binary(Op::Mul, constant(), term(depth)); }

    int fresh_offset() {
        const int base = next_param_;
        next_param_ += 100;
        return base;
    }

private:
    Rng& rng_;
    int inputs_;
    bool literals_;
    int next_param_{kFreshParam};
};

/// Params renumbered densely by first appearance (lines first, then the return).
bool renumber(std::vector<Binding>& lines, Expr& ret) {
    std::map<int, int> slots;
    std::vector<Expr> order;
    for (const auto& l : lines) collect(l.value, order);
    collect(ret, order);
    for (const auto& n : order) {
        if (n->op == Op::Param && !slots.count(n->index)) {
            const int next = static_cast<int>(slots.size());
            slots[n->index] = next;
        }
    }
    if (slots.size() > static_cast<std::size_t>(kMaxParams)) {
        return false;
    }
    auto f = [&](int i) { return slots.at(i); };
    for (auto& l : lines) l.value = map_params(l.value, f);
    ret = map_params(ret, f);
    return true;
}

std::string fenced(const std::string& program) { return "Here is the next version.\n```\n" + program + "\n```\n"; }

} // namespace

MockGenerator::MockGenerator(MockConfig cfg, std::vector<std::string> inputs)
    : cfg_(std::move(cfg)), inputs_(std::move(inputs)) {}

GenerationResult MockGenerator::generate(const GenerationRequest& req) {
    GenerationResult out;
    if (req.demos.empty()) {
        out.failures = 1;
        out.last_error = "no demonstrations";
        return out;
    }
    Rng rng(derive_seed(cfg_.seed, "mock", static_cast<std::uint64_t>(req.iteration)));
    const bool literals = !req.parse.allow_params;
    const double weights[] = {cfg_.w_replace, cfg_.w_add, cfg_.w_crossover, req.parse.allow_lines ? cfg_.w_hoist : 0.0};
    double total = 0.0;
    for (double w : weights) total += w;
    std::vector<double> probs;
    for (double w : weights) probs.push_back(w / total);

    for (int s = 0; s < req.samples; ++s) {
        std::string text;
        for (int attempt = 0; attempt < kAttempts && text.empty(); ++attempt) {
            Mutator mut(rng, static_cast<int>(inputs_.size()), literals);
            const auto& base = req.demos[uniform_index(rng, req.demos.size())];
            Expr e = inline_bindings(base.program);
            std::vector<Expr> nodes;
            collect(e, nodes);
            std::vector<Binding> lines;
            switch (categorical(rng, probs)) {
            case 0: {
                const auto at = uniform_index(rng, nodes.size());
                e = replace_at(e, at, mut.term(2));
                break;
            }
            case 1: {
                e = expr::binary(uniform01(rng) < 0.7 ? Op::Add : Op::Sub, e, mut.scaled_term(2));
                break;
            }
            case 2: {
                const auto& donor = req.demos[uniform_index(rng, req.demos.size())];
                const int offset = mut.fresh_offset();
                Expr d = map_params(inline_bindings(donor.program), [&](int i) { return offset + i; });
                std::vector<Expr> dnodes;
                collect(d, dnodes);
                e = replace_at(e, uniform_index(rng, nodes.size()), dnodes[uniform_index(rng, dnodes.size())]);
                break;
            }
            default: {
                std::vector<std::size_t> inner;
                for (std::size_t i = 0; i < nodes.size(); ++i) {
                    if (!is_leaf(nodes[i]->op)) inner.push_back(i);
                }
                if (inner.empty()) {
                    continue;
                }
                const auto at = inner[uniform_index(rng, inner.size())];
                std::string name = "term";
                while (std::find(inputs_.begin(), inputs_.end(), name) != inputs_.end()) name += "_";
                lines.push_back({name, nodes[at]});
                e = replace_at(e, at, expr::bound(0));
                break;
            }
            }
            if (!renumber(lines, e)) {
                continue;
            }
            try {
                const auto program = SkeletonProgram::make(inputs_, lines, e, req.parse.limits);
                auto rendered = render(program);
                (void)parse(rendered, inputs_, req.parse);
                text = std::move(rendered);
            } catch (const std::exception&) {
                text.clear();
            }
        }
        if (text.empty()) {
            text = req.demos[uniform_index(rng, req.demos.size())].text;
        }
        out.responses.push_back(fenced(text));
    }
    if (req.iteration == cfg_.inject_iteration && !cfg_.inject_program.empty() && !out.responses.empty()) {
        out.responses.front() = fenced(cfg_.inject_program);
    }
    return out;
}

} // namespace eqsr
