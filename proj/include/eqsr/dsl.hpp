#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

/// \file dsl.hpp
///
/// The equation-skeleton language: a closed expression grammar with
/// indexed parameter placeholders and optional let-bindings.
///
///     # comment
///     a = params[0] * sin(params[1] * x)
///     return a - params[2] * v ** 3
///
/// Precedence (high to low): `**`/`^` (right assoc), unary minus, `*` `/`,
/// `+` `-`. Whitespace (including newlines) is insignificant.

namespace eqsr {

inline constexpr int kMaxParams = 10;
inline constexpr std::size_t kMaxNodes = 200;
inline constexpr std::size_t kMaxLines = 20;

enum class Op : std::uint8_t {
    // binary
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Min,
    Max,
    // unary
    Neg,
    Sin,
    Cos,
    Tan,
    Tanh,
    Exp,
    Log,
    Sqrt,
    Abs,
    Sigmoid,
    // leaves
    Input,
    Bound,
    Param,
    Literal,
};

[[nodiscard]] constexpr bool is_binary(Op op) noexcept { return op <= Op::Max; }
[[nodiscard]] constexpr bool is_unary(Op op) noexcept { return op >= Op::Neg && op <= Op::Sigmoid; }
[[nodiscard]] constexpr bool is_leaf(Op op) noexcept { return op >= Op::Input; }

/// Function-call spelling of an operator (`sin`, `min`, ...), or empty for
/// infix operators and leaves.
[[nodiscard]] std::string_view function_name(Op op) noexcept;

struct Node;
using Expr = std::shared_ptr<const Node>;

/// Immutable expression node. `index` addresses the input column, the bound
/// line, or the parameter slot depending on `op`; `value` is the literal.
struct Node {
    Op op{Op::Literal};
    int index{0};
    double value{0.0};
    Expr lhs;
    Expr rhs;
};

namespace expr {
Expr input(int column);
Expr bound(int line);
Expr param(int slot);
Expr literal(double v);
Expr unary(Op op, Expr arg);
Expr binary(Op op, Expr lhs, Expr rhs);

[[nodiscard]] std::size_t size(const Node& e) noexcept;
[[nodiscard]] bool equal(const Node& a, const Node& b) noexcept;
} // namespace expr

struct Binding {
    std::string name;
    Expr value;
};

/// A validated equation program. Construct through parse() or
/// SkeletonProgram::make(); both enforce every invariant.
class SkeletonProgram {
public:
    struct Limits {
        int max_params{kMaxParams};
        std::size_t max_nodes{kMaxNodes};
        std::size_t max_lines{kMaxLines};
    };

    SkeletonProgram() = default;

    /// Validates and builds. Throws ValidationError.
    static SkeletonProgram make(std::vector<std::string> inputs, std::vector<Binding> lines, Expr ret,
                                const Limits& limits);
    static SkeletonProgram make(std::vector<std::string> inputs, std::vector<Binding> lines, Expr ret) {
        return make(std::move(inputs), std::move(lines), std::move(ret), Limits{});
    }

    [[nodiscard]] const std::vector<std::string>& inputs() const noexcept { return inputs_; }
    [[nodiscard]] const std::vector<Binding>& lines() const noexcept { return lines_; }
    [[nodiscard]] const Expr& ret() const noexcept { return ret_; }
    [[nodiscard]] int param_count() const noexcept { return param_count_; }
    /// Nodes stored across all lines and the return expression.
    [[nodiscard]] std::size_t stored_node_count() const noexcept { return stored_nodes_; }

    friend bool operator==(const SkeletonProgram& a, const SkeletonProgram& b) noexcept;

private:
    std::vector<std::string> inputs_;
    std::vector<Binding> lines_;
    Expr ret_;
    int param_count_{0};
    std::size_t stored_nodes_{0};
};

struct SourcePosition {
    std::size_t offset{0};
    std::size_t line{1};
    std::size_t column{1};
};

class SyntaxError : public std::runtime_error {
public:
    SyntaxError(const std::string& message, SourcePosition pos, std::vector<std::string> expected);
    [[nodiscard]] const SourcePosition& position() const noexcept { return pos_; }
    [[nodiscard]] const std::vector<std::string>& expected() const noexcept { return expected_; }

private:
    SourcePosition pos_;
    std::vector<std::string> expected_;
};

enum class ValidationKind {
    UnknownIdentifier,
    ParamIndex,
    UnreferencedParam,
    NodeCap,
    LineCap,
    LetLinesForbidden,
    ParamsForbidden,
    DuplicateBinding,
    InvalidLiteral,
    EmptyInputs,
};

[[nodiscard]] std::string_view to_string(ValidationKind kind) noexcept;

class ValidationError : public std::runtime_error {
public:
    ValidationError(ValidationKind kind, const std::string& message);
    [[nodiscard]] ValidationKind kind() const noexcept { return kind_; }

private:
    ValidationKind kind_;
};

struct ParseOptions {
    SkeletonProgram::Limits limits{};
    /// Reject programs containing `name = expr` lines.
    bool allow_lines{true};
    /// Reject programs referencing `params[i]` (literal-constant mode).
    bool allow_params{true};
};

/// Parses and validates. Throws SyntaxError or ValidationError, never
/// anything else for any input text.
[[nodiscard]] SkeletonProgram parse(std::string_view text, const std::vector<std::string>& inputs,
                                    const ParseOptions& options = {});

/// Canonical, fully parenthesised text. parse(render(p)) == p.
[[nodiscard]] std::string render(const SkeletonProgram& program);
[[nodiscard]] std::string render(const Expr& e, const SkeletonProgram& context);

struct Complexity {
    /// Size of the return expression with every bound name expanded in place
    /// (saturates at SIZE_MAX).
    std::size_t node_count{0};
    /// Character count of the canonical rendering.
    std::size_t char_length{0};
};

[[nodiscard]] Complexity complexity(const SkeletonProgram& program);

/// The canonical linear seed: params[0]*in0 + params[1]*in1 + ... .
[[nodiscard]] std::string linear_seed_text(const std::vector<std::string>& inputs);

/// Return expression with all bindings substituted. Used by the mock
/// generator to recombine programs that do not share binding names.
[[nodiscard]] Expr inline_bindings(const SkeletonProgram& program);

} // namespace eqsr
