#include "eqsr/dsl.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <unordered_map>

namespace eqsr {

namespace {

struct FunctionEntry {
    std::string_view name;
    Op op;
    int arity;
};

constexpr std::array<FunctionEntry, 12> kFunctions{{
    {"sin", Op::Sin, 1},
    {"cos", Op::Cos, 1},
    {"tan", Op::Tan, 1},
    {"tanh", Op::Tanh, 1},
    {"exp", Op::Exp, 1},
    {"log", Op::Log, 1},
    {"sqrt", Op::Sqrt, 1},
    {"abs", Op::Abs, 1},
    {"sigmoid", Op::Sigmoid, 1},
    {"min", Op::Min, 2},
    {"max", Op::Max, 2},
    {"pow", Op::Pow, 2},
}};

const FunctionEntry* find_function(std::string_view name) {
    for (const auto& f : kFunctions) {
        if (f.name == name) {
            return &f;
        }
    }
    return nullptr;
}

bool is_reserved(std::string_view name) {
    return name == "return" || name == "params" || name == "param" || find_function(name) != nullptr;
}

// ----------------------------------------------------------------- lexer

enum class Tok {
    Number,
    Ident,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Plus,
    Minus,
    Star,
    Slash,
    Pow,
    Assign,
    End,
};

std::string_view describe(Tok t) {
    switch (t) {
    case Tok::Number: return "number";
    case Tok::Ident: return "identifier";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::LBracket: return "'['";
    case Tok::RBracket: return "']'";
    case Tok::Comma: return "','";
    case Tok::Plus: return "'+'";
    case Tok::Minus: return "'-'";
    case Tok::Star: return "'*'";
    case Tok::Slash: return "'/'";
    case Tok::Pow: return "'**'";
    case Tok::Assign: return "'='";
    case Tok::End: return "end of input";
    }
    return "?";
}

struct Token {
    Tok kind{Tok::End};
    std::string_view text;
    SourcePosition pos;
};

SourcePosition position_of(std::string_view src, std::size_t offset) {
    SourcePosition p;
    p.offset = offset;
    for (std::size_t i = 0; i < offset && i < src.size(); ++i) {
        if (src[i] == '\n') {
            ++p.line;
            p.column = 1;
        } else {
            ++p.column;
        }
    }
    return p;
}

bool ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool digit(char c) { return c >= '0' && c <= '9'; }

std::vector<Token> lex(std::string_view src) {
    std::vector<Token> out;
    std::size_t i = 0;
    const auto n = src.size();
    SourcePosition cursor;
    auto advance_to = [&](std::size_t offset) {
        for (; cursor.offset < offset; ++cursor.offset) {
            if (src[cursor.offset] == '\n') {
                ++cursor.line;
                cursor.column = 1;
            } else {
                ++cursor.column;
            }
        }
        return cursor;
    };
    auto push = [&](Tok k, std::size_t start, std::size_t len) {
        out.push_back(Token{k, src.substr(start, len), advance_to(start)});
    };
    while (i < n) {
        const char c = src[i];
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
            ++i;
            continue;
        }
        if (c == '#') {
            while (i < n && src[i] != '\n') {
                ++i;
            }
            continue;
        }
        if (ident_start(c)) {
            std::size_t j = i + 1;
            while (j < n && (ident_start(src[j]) || digit(src[j]))) {
                ++j;
            }
            push(Tok::Ident, i, j - i);
            i = j;
            continue;
        }
        if (digit(c) || (c == '.' && i + 1 < n && digit(src[i + 1]))) {
            std::size_t j = i;
            while (j < n && digit(src[j])) {
                ++j;
            }
            if (j < n && src[j] == '.') {
                ++j;
                while (j < n && digit(src[j])) {
                    ++j;
                }
            }
            if (j < n && (src[j] == 'e' || src[j] == 'E')) {
                std::size_t k = j + 1;
                if (k < n && (src[k] == '+' || src[k] == '-')) {
                    ++k;
                }
                if (k < n && digit(src[k])) {
                    while (k < n && digit(src[k])) {
                        ++k;
                    }
                    j = k;
                }
            }
            push(Tok::Number, i, j - i);
            i = j;
            continue;
        }
        switch (c) {
        case '(': push(Tok::LParen, i, 1); break;
        case ')': push(Tok::RParen, i, 1); break;
        case '[': push(Tok::LBracket, i, 1); break;
        case ']': push(Tok::RBracket, i, 1); break;
        case ',': push(Tok::Comma, i, 1); break;
        case '+': push(Tok::Plus, i, 1); break;
        case '-': push(Tok::Minus, i, 1); break;
        case '/': push(Tok::Slash, i, 1); break;
        case '^': push(Tok::Pow, i, 1); break;
        case '=': push(Tok::Assign, i, 1); break;
        case '*':
            if (i + 1 < n && src[i + 1] == '*') {
                push(Tok::Pow, i, 2);
                ++i;
            } else {
                push(Tok::Star, i, 1);
            }
            break;
        default: {
            std::string shown = (static_cast<unsigned char>(c) >= 0x20 && static_cast<unsigned char>(c) < 0x7f)
                                    ? std::string(1, c)
                                    : "byte 0x" + [&] {
                                          std::ostringstream os;
                                          os << std::hex << static_cast<int>(static_cast<unsigned char>(c));
                                          return os.str();
                                      }();
            throw SyntaxError("unexpected character '" + shown + "'", position_of(src, i), {});
        }
        }
        ++i;
    }
    out.push_back(Token{Tok::End, {}, advance_to(n)});
    return out;
}

// ---------------------------------------------------------------- parser

constexpr int kMaxDepth = 256;

class Parser {
public:
    Parser(std::string_view src, const std::vector<std::string>& inputs, const ParseOptions& opts)
        : tokens_(lex(src)), inputs_(inputs), opts_(opts) {}

    SkeletonProgram run() {
        std::vector<Binding> lines;
        while (!(peek().kind == Tok::Ident && peek().text == "return")) {
            if (peek().kind != Tok::Ident) {
                fail({"identifier", "'return'"});
            }
            const Token name = next();
            expect(Tok::Assign);
            if (!opts_.allow_lines) {
                throw ValidationError(ValidationKind::LetLinesForbidden,
                                      "binding '" + std::string(name.text) + "' not allowed: single expression required");
            }
            const std::string id(name.text);
            if (is_reserved(id) || std::find(inputs_.begin(), inputs_.end(), id) != inputs_.end()) {
                throw ValidationError(ValidationKind::DuplicateBinding, "cannot bind reserved or input name '" + id + "'");
            }
            for (const auto& b : lines_) {
                if (b == id) {
                    throw ValidationError(ValidationKind::DuplicateBinding, "name '" + id + "' bound twice");
                }
            }
            Expr value = expression(0);
            lines_.push_back(id);
            lines.push_back(Binding{id, std::move(value)});
        }
        next(); // return
        Expr ret = expression(0);
        if (peek().kind != Tok::End) {
            fail({"operator", "end of input"});
        }
        auto program = SkeletonProgram::make(inputs_, std::move(lines), std::move(ret), opts_.limits);
        if (!opts_.allow_params && program.param_count() > 0) {
            throw ValidationError(ValidationKind::ParamsForbidden, "params[] not allowed: numeric constants required");
        }
        return program;
    }

private:
    const Token& peek() const { return tokens_[pos_]; }
    Token next() {
        Token t = tokens_[pos_];
        if (pos_ + 1 < tokens_.size()) {
            ++pos_;
        }
        return t;
    }

    [[noreturn]] void fail(std::vector<std::string> expected) const {
        const Token& t = peek();
        std::string msg = "unexpected " + std::string(describe(t.kind));
        if (t.kind != Tok::End) {
            msg += " '" + std::string(t.text) + "'";
        }
        if (!expected.empty()) {
            msg += ", expected ";
            for (std::size_t i = 0; i < expected.size(); ++i) {
                msg += (i ? " or " : "") + expected[i];
            }
        }
        throw SyntaxError(msg, t.pos, std::move(expected));
    }

    Token expect(Tok k) {
        if (peek().kind != k) {
            fail({std::string(describe(k))});
        }
        return next();
    }

    void count_node() {
        if (++nodes_ > opts_.limits.max_nodes) {
            throw ValidationError(ValidationKind::NodeCap,
                                  "program exceeds " + std::to_string(opts_.limits.max_nodes) + " nodes");
        }
    }

    struct DepthGuard {
        explicit DepthGuard(Parser& p) : parser(p) {
            if (++parser.depth_ > kMaxDepth) {
                throw SyntaxError("expression nested too deeply", parser.peek().pos, {});
            }
        }
        ~DepthGuard() { --parser.depth_; }
        Parser& parser;
    };

    // additive / multiplicative levels by precedence climbing
    Expr expression(int level) {
        DepthGuard guard(*this);
        if (level == 0) {
            Expr lhs = expression(1);
            while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
                const Op op = next().kind == Tok::Plus ? Op::Add : Op::Sub;
                Expr rhs = expression(1);
                count_node();
                lhs = expr::binary(op, std::move(lhs), std::move(rhs));
            }
            return lhs;
        }
        Expr lhs = unary();
        while (peek().kind == Tok::Star || peek().kind == Tok::Slash) {
            const Op op = next().kind == Tok::Star ? Op::Mul : Op::Div;
            Expr rhs = unary();
            count_node();
            lhs = expr::binary(op, std::move(lhs), std::move(rhs));
        }
        return lhs;
    }

    Expr unary() {
        DepthGuard guard(*this);
        if (peek().kind == Tok::Minus) {
            next();
            Expr arg = unary();
            count_node();
            return expr::unary(Op::Neg, std::move(arg));
        }
        if (peek().kind == Tok::Plus) {
            next();
            return unary();
        }
        return power();
    }

    Expr power() {
        Expr base = primary();
        if (peek().kind == Tok::Pow) {
            next();
            Expr exponent = unary(); // right associative, admits 2 ** -1
            count_node();
            return expr::binary(Op::Pow, std::move(base), std::move(exponent));
        }
        return base;
    }

    Expr primary() {
        DepthGuard guard(*this);
        const Token& t = peek();
        switch (t.kind) {
        case Tok::Number: {
            next();
            double v = 0.0;
            const auto* first = t.text.data();
            const auto* last = first + t.text.size();
            auto [ptr, ec] = std::from_chars(first, last, v);
            if (ec != std::errc{} || ptr != last || !std::isfinite(v)) {
                throw ValidationError(ValidationKind::InvalidLiteral,
                                      "numeric literal out of range: " + std::string(t.text));
            }
            count_node();
            return expr::literal(v);
        }
        case Tok::LParen: {
            next();
            Expr inner = expression(0);
            expect(Tok::RParen);
            return inner;
        }
        case Tok::Ident: return identifier();
        default: fail({"number", "identifier", "'('", "'-'"});
        }
    }

    Expr identifier() {
        const Token t = next();
        const std::string_view name = t.text;
        if (name == "params" || name == "param") {
            expect(Tok::LBracket);
            if (peek().kind != Tok::Number) {
                fail({"parameter index"});
            }
            const Token idx = next();
            int slot = 0;
            for (char c : idx.text) {
                if (!digit(c)) {
                    throw SyntaxError("parameter index must be a non-negative integer", idx.pos, {"integer"});
                }
                slot = std::min(slot * 10 + (c - '0'), 1'000'000);
            }
            expect(Tok::RBracket);
            if (slot >= opts_.limits.max_params) {
                throw ValidationError(ValidationKind::ParamIndex,
                                      "param index " + std::string(idx.text) + " exceeds maximum of " +
                                          std::to_string(opts_.limits.max_params) + " parameters");
            }
            count_node();
            return expr::param(slot);
        }
        if (peek().kind == Tok::LParen) {
            const FunctionEntry* fn = find_function(name);
            if (fn == nullptr) {
                throw ValidationError(ValidationKind::UnknownIdentifier, "unknown function '" + std::string(name) + "'");
            }
            next();
            Expr a = expression(0);
            Expr b;
            if (fn->arity == 2) {
                expect(Tok::Comma);
                b = expression(0);
            }
            expect(Tok::RParen);
            count_node();
            return fn->arity == 2 ? expr::binary(fn->op, std::move(a), std::move(b)) : expr::unary(fn->op, std::move(a));
        }
        for (std::size_t i = 0; i < inputs_.size(); ++i) {
            if (inputs_[i] == name) {
                count_node();
                return expr::input(static_cast<int>(i));
            }
        }
        for (std::size_t i = 0; i < lines_.size(); ++i) {
            if (lines_[i] == name) {
                count_node();
                return expr::bound(static_cast<int>(i));
            }
        }
        throw ValidationError(ValidationKind::UnknownIdentifier, "unknown identifier '" + std::string(name) + "'");
    }

    std::vector<Token> tokens_;
    std::size_t pos_{0};
    const std::vector<std::string>& inputs_;
    const ParseOptions& opts_;
    std::vector<std::string> lines_;
    std::size_t nodes_{0};
    int depth_{0};
};

// ---------------------------------------------------------- validation

struct Walk {
    std::size_t nodes{0};
    int max_param{-1};
    std::vector<bool> used;
};

void check(const Expr& e, std::size_t inputs, std::size_t visible_lines, int max_params, Walk& w) {
    if (!e) {
        throw ValidationError(ValidationKind::UnknownIdentifier, "null expression node");
    }
    ++w.nodes;
    switch (e->op) {
    case Op::Input:
        if (e->index < 0 || static_cast<std::size_t>(e->index) >= inputs) {
            throw ValidationError(ValidationKind::UnknownIdentifier, "input column out of range");
        }
        return;
    case Op::Bound:
        if (e->index < 0 || static_cast<std::size_t>(e->index) >= visible_lines) {
            throw ValidationError(ValidationKind::UnknownIdentifier, "reference to a binding that is not yet defined");
        }
        return;
    case Op::Param:
        if (e->index < 0 || e->index >= max_params) {
            throw ValidationError(ValidationKind::ParamIndex,
                                  "param index " + std::to_string(e->index) + " exceeds maximum of " +
                                      std::to_string(max_params) + " parameters");
        }
        w.used[static_cast<std::size_t>(e->index)] = true;
        w.max_param = std::max(w.max_param, e->index);
        return;
    case Op::Literal:
        if (!std::isfinite(e->value) || std::signbit(e->value)) {
            throw ValidationError(ValidationKind::InvalidLiteral, "literals must be finite and non-negative");
        }
        return;
    default: break;
    }
    check(e->lhs, inputs, visible_lines, max_params, w);
    if (is_binary(e->op)) {
        check(e->rhs, inputs, visible_lines, max_params, w);
    }
}

// ------------------------------------------------------------- rendering

void render_literal(std::string& out, double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    out.append(buf.data(), ptr);
}

std::string_view infix(Op op) {
    switch (op) {
    case Op::Add: return " + ";
    case Op::Sub: return " - ";
    case Op::Mul: return " * ";
    case Op::Div: return " / ";
    case Op::Pow: return " ** ";
    default: return {};
    }
}

void render_into(std::string& out, const Node& e, const SkeletonProgram& ctx) {
    switch (e.op) {
    case Op::Input: out += ctx.inputs()[static_cast<std::size_t>(e.index)]; return;
    case Op::Bound: out += ctx.lines()[static_cast<std::size_t>(e.index)].name; return;
    case Op::Param:
        out += "params[";
        out += std::to_string(e.index);
        out += ']';
        return;
    case Op::Literal: render_literal(out, e.value); return;
    case Op::Neg:
        out += "(-";
        render_into(out, *e.lhs, ctx);
        out += ')';
        return;
    default: break;
    }
    if (auto sym = infix(e.op); !sym.empty()) {
        out += '(';
        render_into(out, *e.lhs, ctx);
        out += sym;
        render_into(out, *e.rhs, ctx);
        out += ')';
        return;
    }
    out += function_name(e.op);
    out += '(';
    render_into(out, *e.lhs, ctx);
    if (is_binary(e.op)) {
        out += ", ";
        render_into(out, *e.rhs, ctx);
    }
    out += ')';
}

std::size_t sat_add(std::size_t a, std::size_t b) {
    return a > std::numeric_limits<std::size_t>::max() - b ? std::numeric_limits<std::size_t>::max() : a + b;
}

std::size_t expanded_size(const Node& e, const std::vector<std::size_t>& line_sizes) {
    switch (e.op) {
    case Op::Bound: return line_sizes[static_cast<std::size_t>(e.index)];
    case Op::Input:
    case Op::Param:
    case Op::Literal: return 1;
    default: break;
    }
    std::size_t n = sat_add(1, expanded_size(*e.lhs, line_sizes));
    if (is_binary(e.op)) {
        n = sat_add(n, expanded_size(*e.rhs, line_sizes));
    }
    return n;
}

Expr substitute(const Expr& e, const std::vector<Expr>& lines) {
    switch (e->op) {
    case Op::Bound: return lines[static_cast<std::size_t>(e->index)];
    case Op::Input:
    case Op::Param:
    case Op::Literal: return e;
    default: break;
    }
    if (is_binary(e->op)) {
        return expr::binary(e->op, substitute(e->lhs, lines), substitute(e->rhs, lines));
    }
    return expr::unary(e->op, substitute(e->lhs, lines));
}

} // namespace

std::string_view function_name(Op op) noexcept {
    for (const auto& f : kFunctions) {
        if (f.op == op) {
            return f.name;
        }
    }
    return {};
}

namespace expr {

Expr input(int column) { return std::make_shared<const Node>(Node{Op::Input, column, 0.0, nullptr, nullptr}); }
Expr bound(int line) { return std::make_shared<const Node>(Node{Op::Bound, line, 0.0, nullptr, nullptr}); }
Expr param(int slot) { return std::make_shared<const Node>(Node{Op::Param, slot, 0.0, nullptr, nullptr}); }
Expr literal(double v) { return std::make_shared<const Node>(Node{Op::Literal, 0, v, nullptr, nullptr}); }

Expr unary(Op op, Expr arg) {
    if (!is_unary(op)) {
        throw std::invalid_argument("expr::unary: not a unary operator");
    }
    return std::make_shared<const Node>(Node{op, 0, 0.0, std::move(arg), nullptr});
}

Expr binary(Op op, Expr lhs, Expr rhs) {
    if (!is_binary(op)) {
        throw std::invalid_argument("expr::binary: not a binary operator");
    }
    return std::make_shared<const Node>(Node{op, 0, 0.0, std::move(lhs), std::move(rhs)});
}

std::size_t size(const Node& e) noexcept {
    if (is_leaf(e.op)) {
        return 1;
    }
    return 1 + size(*e.lhs) + (is_binary(e.op) ? size(*e.rhs) : 0);
}

bool equal(const Node& a, const Node& b) noexcept {
    if (&a == &b) {
        return true;
    }
    if (a.op != b.op) {
        return false;
    }
    switch (a.op) {
    case Op::Input:
    case Op::Bound:
    case Op::Param: return a.index == b.index;
    case Op::Literal: return a.value == b.value;
    default: break;
    }
    if (!equal(*a.lhs, *b.lhs)) {
        return false;
    }
    return !is_binary(a.op) || equal(*a.rhs, *b.rhs);
}

} // namespace expr

SyntaxError::SyntaxError(const std::string& message, SourcePosition pos, std::vector<std::string> expected)
    : std::runtime_error("syntax error at " + std::to_string(pos.line) + ":" + std::to_string(pos.column) + ": " +
                         message),
      pos_(pos), expected_(std::move(expected)) {}

std::string_view to_string(ValidationKind kind) noexcept {
    switch (kind) {
    case ValidationKind::UnknownIdentifier: return "unknown identifier";
    case ValidationKind::ParamIndex: return "param index";
    case ValidationKind::UnreferencedParam: return "unreferenced param";
    case ValidationKind::NodeCap: return "node cap";
    case ValidationKind::LineCap: return "line cap";
    case ValidationKind::LetLinesForbidden: return "let lines forbidden";
    case ValidationKind::ParamsForbidden: return "params forbidden";
    case ValidationKind::DuplicateBinding: return "duplicate binding";
    case ValidationKind::InvalidLiteral: return "invalid literal";
    case ValidationKind::EmptyInputs: return "empty inputs";
    }
    return "validation";
}

ValidationError::ValidationError(ValidationKind kind, const std::string& message)
    : std::runtime_error("validation: " + std::string(to_string(kind)) + ": " + message), kind_(kind) {}

SkeletonProgram SkeletonProgram::make(std::vector<std::string> inputs, std::vector<Binding> lines, Expr ret,
                                      const Limits& limits) {
    if (inputs.empty()) {
        throw ValidationError(ValidationKind::EmptyInputs, "program needs at least one input variable");
    }
    if (lines.size() > limits.max_lines) {
        throw ValidationError(ValidationKind::LineCap,
                              "program exceeds " + std::to_string(limits.max_lines) + " lines");
    }
    Walk w;
    w.used.assign(static_cast<std::size_t>(std::max(limits.max_params, 0)), false);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto& name = lines[i].name;
        if (name.empty() || !ident_start(name[0]) || is_reserved(name) ||
            std::find(inputs.begin(), inputs.end(), name) != inputs.end()) {
            throw ValidationError(ValidationKind::DuplicateBinding, "invalid binding name '" + name + "'");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (lines[j].name == name) {
                throw ValidationError(ValidationKind::DuplicateBinding, "name '" + name + "' bound twice");
            }
        }
        check(lines[i].value, inputs.size(), i, limits.max_params, w);
    }
    check(ret, inputs.size(), lines.size(), limits.max_params, w);
    if (w.nodes > limits.max_nodes) {
        throw ValidationError(ValidationKind::NodeCap, "program exceeds " + std::to_string(limits.max_nodes) + " nodes");
    }
    for (int i = 0; i <= w.max_param; ++i) {
        if (!w.used[static_cast<std::size_t>(i)]) {
            throw ValidationError(ValidationKind::UnreferencedParam,
                                  "param[" + std::to_string(i) + "] is never referenced");
        }
    }
    SkeletonProgram p;
    p.inputs_ = std::move(inputs);
    p.lines_ = std::move(lines);
    p.ret_ = std::move(ret);
    p.param_count_ = w.max_param + 1;
    p.stored_nodes_ = w.nodes;
    return p;
}

bool operator==(const SkeletonProgram& a, const SkeletonProgram& b) noexcept {
    if (a.inputs_ != b.inputs_ || a.lines_.size() != b.lines_.size() || a.param_count_ != b.param_count_) {
        return false;
    }
    if (!a.ret_ || !b.ret_) {
        return a.ret_ == b.ret_;
    }
    for (std::size_t i = 0; i < a.lines_.size(); ++i) {
        if (a.lines_[i].name != b.lines_[i].name || !expr::equal(*a.lines_[i].value, *b.lines_[i].value)) {
            return false;
        }
    }
    return expr::equal(*a.ret_, *b.ret_);
}

SkeletonProgram parse(std::string_view text, const std::vector<std::string>& inputs, const ParseOptions& options) {
    return Parser(text, inputs, options).run();
}

std::string render(const Expr& e, const SkeletonProgram& context) {
    std::string out;
    render_into(out, *e, context);
    return out;
}

std::string render(const SkeletonProgram& program) {
    std::string out;
    for (const auto& line : program.lines()) {
        out += line.name;
        out += " = ";
        render_into(out, *line.value, program);
        out += '\n';
    }
    out += "return ";
    if (program.ret()) {
        render_into(out, *program.ret(), program);
    }
    return out;
}

Complexity complexity(const SkeletonProgram& program) {
    std::vector<std::size_t> line_sizes;
    line_sizes.reserve(program.lines().size());
    for (const auto& line : program.lines()) {
        line_sizes.push_back(expanded_size(*line.value, line_sizes));
    }
    return Complexity{program.ret() ? expanded_size(*program.ret(), line_sizes) : 0, render(program).size()};
}

std::string linear_seed_text(const std::vector<std::string>& inputs) {
    std::string out = "return ";
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (i) {
            out += " + ";
        }
        out += "params[" + std::to_string(i) + "] * " + inputs[i];
    }
    return out;
}

Expr inline_bindings(const SkeletonProgram& program) {
    std::vector<Expr> expanded;
    expanded.reserve(program.lines().size());
    for (const auto& line : program.lines()) {
        expanded.push_back(substitute(line.value, expanded));
    }
    return substitute(program.ret(), expanded);
}

} // namespace eqsr
