#include "isaacs/expr.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace isaacs {

std::string var_name(VarKind kind, int index) {
    switch (kind) {
    case VarKind::T: return "t";
    case VarKind::Y: return "y";
    case VarKind::X: return "x" + std::to_string(index + 1);
    case VarKind::Z: return "z" + std::to_string(index + 1);
    case VarKind::U: return "u" + std::to_string(index + 1);
    case VarKind::V: return "v" + std::to_string(index + 1);
    }
    return "?";
}

namespace {

int arity(ExprOp op) {
    switch (op) {
    case ExprOp::Const:
    case ExprOp::Var:
        return 0;
    case ExprOp::Neg:
    case ExprOp::Exp:
    case ExprOp::Log:
    case ExprOp::Sin:
    case ExprOp::Cos:
    case ExprOp::Sqrt:
    case ExprOp::Abs:
        return 1;
    default:
        return 2;
    }
}

struct FuncSpec {
    const char* name;
    ExprOp op;
    int args;
};

constexpr std::array<FuncSpec, 9> kFuncs{{
    {"exp", ExprOp::Exp, 1},
    {"log", ExprOp::Log, 1},
    {"sin", ExprOp::Sin, 1},
    {"cos", ExprOp::Cos, 1},
    {"sqrt", ExprOp::Sqrt, 1},
    {"abs", ExprOp::Abs, 1},
    {"min", ExprOp::Min, 2},
    {"max", ExprOp::Max, 2},
    {"pow", ExprOp::Pow, 2},
}};

} // namespace

// ============================================================================
// Parser: recursive descent, emits postfix directly.
// ============================================================================

class ExprParser {
public:
    explicit ExprParser(std::string_view text) : text_(text) {}

    Expr run() {
        Expr e;
        parse_sum(e.code_);
        skip_ws();
        if (pos_ != text_.size())
            throw ParseError("unexpected trailing input", pos_);
        if (e.code_.empty())
            throw ParseError("empty expression", 0);
        e.stack_depth_ = compute_depth(e.code_);
        if (e.stack_depth_ > 60) // eval uses a fixed 64-slot operand stack
            throw ParseError("expression too deeply nested", 0);
        return e;
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;

    static int compute_depth(const std::vector<ExprNode>& code) {
        int depth = 0, max_depth = 0;
        for (const auto& n : code) {
            depth += 1 - arity(n.op);
            if (depth > max_depth) max_depth = depth;
        }
        return max_depth;
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool eat(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) { ++pos_; return true; }
        return false;
    }

    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    void parse_sum(std::vector<ExprNode>& out) {
        parse_product(out);
        for (;;) {
            char c = peek();
            if (c != '+' && c != '-') return;
            ++pos_;
            parse_product(out);
            out.push_back({c == '+' ? ExprOp::Add : ExprOp::Sub, VarKind::T, 0, 0.0});
        }
    }

    void parse_product(std::vector<ExprNode>& out) {
        parse_power(out);
        for (;;) {
            char c = peek();
            if (c != '*' && c != '/') return;
            ++pos_;
            parse_power(out);
            out.push_back({c == '*' ? ExprOp::Mul : ExprOp::Div, VarKind::T, 0, 0.0});
        }
    }

    void parse_power(std::vector<ExprNode>& out) {
        parse_unary(out);
        while (peek() == '^') {
            ++pos_;
            parse_unary(out);
            out.push_back({ExprOp::Pow, VarKind::T, 0, 0.0});
        }
    }

    // Unary minus binds tighter than '^': -x^2 parses as (-x)^2.
    void parse_unary(std::vector<ExprNode>& out) {
        if (peek() == '-') {
            ++pos_;
            parse_unary(out);
            out.push_back({ExprOp::Neg, VarKind::T, 0, 0.0});
            return;
        }
        if (peek() == '+') { // tolerated no-op sign
            ++pos_;
            parse_unary(out);
            return;
        }
        parse_atom(out);
    }

    void parse_atom(std::vector<ExprNode>& out) {
        skip_ws();
        if (pos_ >= text_.size())
            throw ParseError("unexpected end of expression", pos_);
        char c = text_[pos_];

        if (c == '(') {
            std::size_t open = pos_;
            ++pos_;
            parse_sum(out);
            if (!eat(')'))
                throw ParseError("unbalanced parenthesis", open);
            return;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            parse_number(out);
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            parse_ident(out);
            return;
        }
        throw ParseError(std::string("unexpected character '") + c + "'", pos_);
    }

    void parse_number(std::vector<ExprNode>& out) {
        const char* begin = text_.data() + pos_;
        char* end = nullptr;
        double v = std::strtod(begin, &end);
        if (end == begin)
            throw ParseError("malformed number", pos_);
        pos_ += static_cast<std::size_t>(end - begin);
        out.push_back({ExprOp::Const, VarKind::T, 0, v});
    }

    void parse_ident(std::vector<ExprNode>& out) {
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        std::string_view ident = text_.substr(start, pos_ - start);

        for (const auto& f : kFuncs) {
            if (ident == f.name) {
                if (!eat('('))
                    throw ParseError("expected '(' after function '" + std::string(ident) + "'", pos_);
                parse_sum(out);
                for (int k = 1; k < f.args; ++k) {
                    if (!eat(','))
                        throw ParseError("function '" + std::string(ident) + "' expects " +
                                             std::to_string(f.args) + " arguments",
                                         pos_);
                    parse_sum(out);
                }
                if (eat(','))
                    throw ParseError("function '" + std::string(ident) + "' expects " +
                                         std::to_string(f.args) + " arguments",
                                     pos_ - 1);
                if (!eat(')'))
                    throw ParseError("unbalanced parenthesis in call to '" + std::string(ident) + "'",
                                     pos_);
                out.push_back({f.op, VarKind::T, 0, 0.0});
                return;
            }
        }

        // Variables: t, y, or one of x/z/u/v with a 1-based index.
        if (ident == "t") { out.push_back({ExprOp::Var, VarKind::T, 0, 0.0}); return; }
        if (ident == "y") { out.push_back({ExprOp::Var, VarKind::Y, 0, 0.0}); return; }
        if (ident.size() >= 2) {
            VarKind kind;
            switch (ident[0]) {
            case 'x': kind = VarKind::X; break;
            case 'z': kind = VarKind::Z; break;
            case 'u': kind = VarKind::U; break;
            case 'v': kind = VarKind::V; break;
            default: throw ParseError("unknown identifier '" + std::string(ident) + "'", start);
            }
            int idx = 0;
            for (std::size_t i = 1; i < ident.size(); ++i) {
                if (!std::isdigit(static_cast<unsigned char>(ident[i])))
                    throw ParseError("unknown identifier '" + std::string(ident) + "'", start);
                idx = idx * 10 + (ident[i] - '0');
                if (idx > 4096)
                    throw ParseError("variable index out of range in '" + std::string(ident) + "'", start);
            }
            if (idx < 1 || ident[1] == '0')
                throw ParseError("variable indices are 1-based: '" + std::string(ident) + "'", start);
            out.push_back({ExprOp::Var, kind, static_cast<std::uint16_t>(idx - 1), 0.0});
            return;
        }
        throw ParseError("unknown identifier '" + std::string(ident) + "'", start);
    }
};

Expr Expr::parse(std::string_view text) { return ExprParser(text).run(); }

// ============================================================================
// Evaluation
// ============================================================================

namespace {

[[noreturn]] void domain_error(const char* what, double a) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%s (operand %.17g)", what, a);
    throw EvalError(buf);
}

double apply_binary(ExprOp op, double a, double b) {
    switch (op) {
    case ExprOp::Add: return a + b;
    case ExprOp::Sub: return a - b;
    case ExprOp::Mul: return a * b;
    case ExprOp::Div:
        if (b == 0.0) domain_error("division by zero", a);
        return a / b;
    case ExprOp::Pow: {
        double r = std::pow(a, b);
        if (!std::isfinite(r)) domain_error("pow out of domain", a);
        return r;
    }
    case ExprOp::Min: return std::fmin(a, b);
    case ExprOp::Max: return std::fmax(a, b);
    default: throw EvalError("corrupt expression");
    }
}

double apply_unary(ExprOp op, double a) {
    switch (op) {
    case ExprOp::Neg: return -a;
    case ExprOp::Exp: {
        double r = std::exp(a);
        if (!std::isfinite(r)) domain_error("exp overflow", a);
        return r;
    }
    case ExprOp::Log:
        if (a <= 0.0) domain_error("log of non-positive value", a);
        return std::log(a);
    case ExprOp::Sin: return std::sin(a);
    case ExprOp::Cos: return std::cos(a);
    case ExprOp::Sqrt:
        if (a < 0.0) domain_error("sqrt of negative value", a);
        return std::sqrt(a);
    case ExprOp::Abs: return std::fabs(a);
    default: throw EvalError("corrupt expression");
    }
}

} // namespace

double Expr::eval(const VarLayout& layout, std::span<const double> slots) const {
    double stack[64];
    int sp = 0;
    for (const auto& node : code_) {
        switch (node.op) {
        case ExprOp::Const:
            stack[sp++] = node.value;
            break;
        case ExprOp::Var: {
            int s = layout.slot(node.var_kind, node.var_index);
            if (s >= static_cast<int>(slots.size()))
                throw EvalError("unbound variable " + var_name(node.var_kind, node.var_index));
            stack[sp++] = slots[s];
            break;
        }
        default:
            if (arity(node.op) == 1) {
                stack[sp - 1] = apply_unary(node.op, stack[sp - 1]);
            } else {
                --sp;
                stack[sp - 1] = apply_binary(node.op, stack[sp - 1], stack[sp]);
            }
        }
    }
    double r = stack[0];
    if (!std::isfinite(r)) throw EvalError("non-finite expression value");
    return r;
}

double Expr::eval(const std::map<std::string, double>& env) const {
    // The layout must cover the largest index of every variable family
    // across both the expression and the environment, or slots collide.
    VarLayout layout;
    layout.n = max_index(VarKind::X);
    layout.d = max_index(VarKind::Z);
    layout.cu = max_index(VarKind::U);
    layout.cv = max_index(VarKind::V);

    std::vector<std::pair<ExprNode, double>> bindings;
    for (const auto& [name, value] : env) {
        Expr probe; // reuse the identifier rules of the parser
        try {
            probe = Expr::parse(name);
        } catch (const ParseError&) {
            throw EvalError("invalid variable name '" + name + "' in environment");
        }
        if (probe.code_.size() != 1 || probe.code_[0].op != ExprOp::Var)
            throw EvalError("invalid variable name '" + name + "' in environment");
        const ExprNode& node = probe.code_[0];
        int needed = node.var_index + 1;
        switch (node.var_kind) {
        case VarKind::X: layout.n = std::max(layout.n, needed); break;
        case VarKind::Z: layout.d = std::max(layout.d, needed); break;
        case VarKind::U: layout.cu = std::max(layout.cu, needed); break;
        case VarKind::V: layout.cv = std::max(layout.cv, needed); break;
        default: break;
        }
        bindings.emplace_back(node, value);
    }

    std::vector<double> slots(static_cast<std::size_t>(layout.total()), 0.0);
    std::vector<bool> bound(slots.size(), false);
    for (const auto& [node, value] : bindings) {
        int s = layout.slot(node.var_kind, node.var_index);
        slots[static_cast<std::size_t>(s)] = value;
        bound[static_cast<std::size_t>(s)] = true;
    }
    for (const auto& node : code_) {
        if (node.op != ExprOp::Var) continue;
        int s = layout.slot(node.var_kind, node.var_index);
        if (!bound[static_cast<std::size_t>(s)])
            throw EvalError("unbound variable " + var_name(node.var_kind, node.var_index));
    }
    return eval(layout, slots);
}

std::set<std::string> Expr::free_vars() const {
    std::set<std::string> names;
    for (const auto& node : code_)
        if (node.op == ExprOp::Var)
            names.insert(var_name(node.var_kind, node.var_index));
    return names;
}

bool Expr::references(VarKind kind) const {
    for (const auto& node : code_)
        if (node.op == ExprOp::Var && node.var_kind == kind) return true;
    return false;
}

int Expr::max_index(VarKind kind) const {
    int m = 0;
    for (const auto& node : code_)
        if (node.op == ExprOp::Var && node.var_kind == kind)
            m = std::max(m, static_cast<int>(node.var_index) + 1);
    return m;
}

// ============================================================================
// Pretty printer
// ============================================================================

namespace {

int precedence(ExprOp op) {
    switch (op) {
    case ExprOp::Add:
    case ExprOp::Sub: return 1;
    case ExprOp::Mul:
    case ExprOp::Div: return 2;
    case ExprOp::Pow: return 3;
    case ExprOp::Neg: return 4;
    default: return 5; // atoms and function calls never need wrapping
    }
}

const char* func_name(ExprOp op) {
    for (const auto& f : kFuncs)
        if (f.op == op) return f.name;
    return nullptr;
}

std::string format_literal(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    // Trim to shortest representation that round-trips.
    for (int prec = 1; prec < 17; ++prec) {
        char shorter[32];
        std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
        if (std::strtod(shorter, nullptr) == v) return shorter;
    }
    return buf;
}

} // namespace

std::string Expr::pretty() const {
    struct Frame {
        std::string text;
        int prec;
    };
    std::vector<Frame> stack;
    for (const auto& node : code_) {
        switch (node.op) {
        case ExprOp::Const: {
            double v = node.value;
            if (v < 0) // render as unary minus so the printout re-parses identically
                stack.push_back({"-" + format_literal(-v), precedence(ExprOp::Neg)});
            else
                stack.push_back({format_literal(v), 5});
            break;
        }
        case ExprOp::Var:
            stack.push_back({var_name(node.var_kind, node.var_index), 5});
            break;
        case ExprOp::Neg: {
            Frame a = std::move(stack.back());
            stack.pop_back();
            std::string inner = a.prec < precedence(ExprOp::Neg) ? "(" + a.text + ")" : a.text;
            stack.push_back({"-" + inner, precedence(ExprOp::Neg)});
            break;
        }
        default: {
            if (const char* fn = func_name(node.op); fn && (node.op != ExprOp::Pow)) {
                if (arity(node.op) == 1) {
                    Frame a = std::move(stack.back());
                    stack.pop_back();
                    stack.push_back({std::string(fn) + "(" + a.text + ")", 5});
                } else {
                    Frame b = std::move(stack.back());
                    stack.pop_back();
                    Frame a = std::move(stack.back());
                    stack.pop_back();
                    stack.push_back({std::string(fn) + "(" + a.text + "," + b.text + ")", 5});
                }
                break;
            }
            Frame b = std::move(stack.back());
            stack.pop_back();
            Frame a = std::move(stack.back());
            stack.pop_back();
            int p = precedence(node.op);
            char sym = '?';
            switch (node.op) {
            case ExprOp::Add: sym = '+'; break;
            case ExprOp::Sub: sym = '-'; break;
            case ExprOp::Mul: sym = '*'; break;
            case ExprOp::Div: sym = '/'; break;
            case ExprOp::Pow: sym = '^'; break;
            default: break;
            }
            // Left-associative: left child may share precedence, right must bind tighter.
            std::string lhs = a.prec < p ? "(" + a.text + ")" : a.text;
            std::string rhs = b.prec <= p ? "(" + b.text + ")" : b.text;
            stack.push_back({lhs + sym + rhs, p});
        }
        }
    }
    return stack.empty() ? std::string() : stack.back().text;
}

} // namespace isaacs
