#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace forge::ocl {

/// 1-based, end column exclusive.
struct SourceSpan {
    int line = 0;
    int column = 0;
    int end_line = 0;
    int end_column = 0;

    std::string str() const;
    friend bool operator==(const SourceSpan&, const SourceSpan&) = default;
};

enum class ContextType { Function, HardwareNode, Link, FlowEdge, Model };

std::string_view to_string(ContextType t) noexcept;
std::optional<ContextType> parse_context_type(std::string_view s) noexcept;

enum class BinaryOp { Implies, Or, And, Eq, Ne, Lt, Le, Gt, Ge, Add, Sub, Mul, Div };
enum class UnaryOp { Not, Negate };
enum class CollectionOp { ForAll, Exists, Select, Collect, Size, Sum, IsUnique, Includes };

std::string_view to_string(BinaryOp op) noexcept;
std::string_view to_string(CollectionOp op) noexcept;
std::optional<CollectionOp> parse_collection_op(std::string_view s) noexcept;

/// forAll, exists, select, collect, isUnique take a body with one binder.
bool takes_binder(CollectionOp op) noexcept;
bool is_comparison(BinaryOp op) noexcept;

/// Name used for the iterator when a body is written without "x |".
inline constexpr std::string_view implicit_binder = "_it";

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct IntLiteral { std::int64_t value; };
struct DecimalLiteral { double value; };
struct StringLiteral { std::string value; };
struct BoolLiteral { bool value; };
/// Type::value, e.g. Asil::D or SafetyMechanism::voting.
struct EnumLiteral { std::string type; std::string value; };
/// A bound variable; `self` is the variable named "self".
struct Variable { std::string name; };
struct Navigation { ExprPtr object; std::string attribute; };
struct Unary { UnaryOp op; ExprPtr operand; };
struct Binary { BinaryOp op; ExprPtr lhs; ExprPtr rhs; };
/// source->op(binder | argument), source->op(argument) or source->op().
struct CollectionCall {
    ExprPtr source;
    CollectionOp op;
    std::optional<std::string> binder;
    ExprPtr argument;
};

struct Expr {
    using Node = std::variant<IntLiteral, DecimalLiteral, StringLiteral, BoolLiteral, EnumLiteral, Variable,
                              Navigation, Unary, Binary, CollectionCall>;
    Node node;
    SourceSpan span;
};

template <typename T>
ExprPtr make_expr(T node, SourceSpan span = {}) {
    return std::make_shared<const Expr>(Expr{std::move(node), span});
}

/// Structural equality; spans are ignored.
bool same_structure(const Expr& a, const Expr& b);

struct Constraint {
    ContextType context;
    std::string name;
    ExprPtr body;
    SourceSpan span;
};

struct ConstraintSet {
    std::vector<Constraint> constraints;
};

bool same_structure(const ConstraintSet& a, const ConstraintSet& b);

/// Ordinals of the enum types that literals may name.
std::optional<int> enum_ordinal(std::string_view type, std::string_view value) noexcept;

} // namespace forge::ocl
