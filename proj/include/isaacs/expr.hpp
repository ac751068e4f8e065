#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "isaacs/errors.hpp"

namespace isaacs {

// ============================================================================
// Small arithmetic expression language for coefficient declarations.
//
// Grammar (full EBNF in docs/problem_format.md):
//   variables  t, x1..xn, y, z1..zd, u1.., v1..
//   operators  + - * / ^  and unary -
//   functions  exp log sin cos sqrt abs min max pow
//   precedence unary > ^ > * / > + -, all left-associative
//
// ASTs are stored in postfix order in a flat node vector; evaluation is an
// iterative stack walk, reentrant and allocation-free on the hot path.
// ============================================================================

enum class ExprOp : std::uint8_t {
    Const, Var,
    Add, Sub, Mul, Div, Pow, Neg,
    Exp, Log, Sin, Cos, Sqrt, Abs,
    Min, Max,
};

enum class VarKind : std::uint8_t { T, X, Y, Z, U, V };

/// Returns the canonical spelling, e.g. (X, 2) -> "x3" (indices are 0-based
/// internally, 1-based in source text).
std::string var_name(VarKind kind, int index);

struct ExprNode {
    ExprOp op = ExprOp::Const;
    VarKind var_kind = VarKind::T;
    std::uint16_t var_index = 0; // 0-based; unused for T and Y
    double value = 0.0;          // Const only

    bool operator==(const ExprNode&) const = default;
};

/// Slot layout binding variable names to positions in a flat evaluation
/// buffer. Layout: [t, x1..xn, y, z1..zd, u1..ucu, v1..vcv].
struct VarLayout {
    int n = 0;  // state dimension
    int d = 0;  // noise dimension
    int cu = 0; // control vector length, player 1
    int cv = 0; // control vector length, player 2

    int total() const { return 2 + n + d + cu + cv; }

    int slot(VarKind kind, int index) const {
        switch (kind) {
        case VarKind::T: return 0;
        case VarKind::X: return 1 + index;
        case VarKind::Y: return 1 + n;
        case VarKind::Z: return 2 + n + index;
        case VarKind::U: return 2 + n + d + index;
        case VarKind::V: return 2 + n + d + cu + index;
        }
        return 0;
    }
};

class Expr {
public:
    Expr() = default;

    /// Parses source text into an AST. Throws ParseError with the byte
    /// offset of the first offending character.
    static Expr parse(std::string_view text);

    /// Evaluates against a flat slot buffer laid out per `layout`.
    /// Throws EvalError on domain errors (div by zero, log/sqrt of a
    /// negative, non-finite result); never returns NaN or infinity.
    double eval(const VarLayout& layout, std::span<const double> slots) const;

    /// Convenience evaluation against a name -> value map. Throws EvalError
    /// for unbound variables.
    double eval(const std::map<std::string, double>& env) const;

    /// Exact set of variable names appearing in the expression.
    std::set<std::string> free_vars() const;

    bool references(VarKind kind) const;

    /// Largest 1-based index used for the given variable family (0 if unused).
    int max_index(VarKind kind) const;

    /// Canonical infix rendering; parse(pretty()) reproduces the same AST
    /// and pretty() of that AST is byte-identical (fixed point).
    std::string pretty() const;

    bool is_constant() const { return code_.size() == 1 && code_[0].op == ExprOp::Const; }
    bool empty() const { return code_.empty(); }

    /// Structural equality of ASTs.
    bool operator==(const Expr&) const = default;

    const std::vector<ExprNode>& nodes() const { return code_; }

    /// Maximum operand-stack depth needed by eval (small by construction).
    int stack_depth() const { return stack_depth_; }

private:
    std::vector<ExprNode> code_; // postfix order
    int stack_depth_ = 0;

    friend class ExprParser;
};

} // namespace isaacs
