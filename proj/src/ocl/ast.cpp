#include "forge/ocl/ast.hpp"

namespace forge::ocl {

std::string SourceSpan::str() const {
    return std::to_string(line) + ":" + std::to_string(column) + "-" + std::to_string(end_line) + ":" +
           std::to_string(end_column);
}

std::string_view to_string(ContextType t) noexcept {
    switch (t) {
    case ContextType::Function: return "Function";
    case ContextType::HardwareNode: return "HardwareNode";
    case ContextType::Link: return "Link";
    case ContextType::FlowEdge: return "FlowEdge";
    case ContextType::Model: return "Model";
    }
    return "Model";
}

std::optional<ContextType> parse_context_type(std::string_view s) noexcept {
    if (s == "Function") return ContextType::Function;
    if (s == "HardwareNode") return ContextType::HardwareNode;
    if (s == "Link") return ContextType::Link;
    if (s == "FlowEdge") return ContextType::FlowEdge;
    if (s == "Model") return ContextType::Model;
    return std::nullopt;
}

std::string_view to_string(BinaryOp op) noexcept {
    switch (op) {
    case BinaryOp::Implies: return "implies";
    case BinaryOp::Or: return "or";
    case BinaryOp::And: return "and";
    case BinaryOp::Eq: return "=";
    case BinaryOp::Ne: return "<>";
    case BinaryOp::Lt: return "<";
    case BinaryOp::Le: return "<=";
    case BinaryOp::Gt: return ">";
    case BinaryOp::Ge: return ">=";
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
    }
    return "?";
}

std::string_view to_string(CollectionOp op) noexcept {
    switch (op) {
    case CollectionOp::ForAll: return "forAll";
    case CollectionOp::Exists: return "exists";
    case CollectionOp::Select: return "select";
    case CollectionOp::Collect: return "collect";
    case CollectionOp::Size: return "size";
    case CollectionOp::Sum: return "sum";
    case CollectionOp::IsUnique: return "isUnique";
    case CollectionOp::Includes: return "includes";
    }
    return "?";
}

std::optional<CollectionOp> parse_collection_op(std::string_view s) noexcept {
    for (auto op : {CollectionOp::ForAll, CollectionOp::Exists, CollectionOp::Select, CollectionOp::Collect,
                    CollectionOp::Size, CollectionOp::Sum, CollectionOp::IsUnique, CollectionOp::Includes})
        if (to_string(op) == s)
            return op;
    return std::nullopt;
}

bool takes_binder(CollectionOp op) noexcept {
    switch (op) {
    case CollectionOp::ForAll:
    case CollectionOp::Exists:
    case CollectionOp::Select:
    case CollectionOp::Collect:
    case CollectionOp::IsUnique:
        return true;
    default:
        return false;
    }
}

bool is_comparison(BinaryOp op) noexcept {
    switch (op) {
    case BinaryOp::Eq:
    case BinaryOp::Ne:
    case BinaryOp::Lt:
    case BinaryOp::Le:
    case BinaryOp::Gt:
    case BinaryOp::Ge:
        return true;
    default:
        return false;
    }
}

std::optional<int> enum_ordinal(std::string_view type, std::string_view value) noexcept {
    if (type == "Asil") {
        static constexpr std::string_view levels[] = {"QM", "A", "B", "C", "D"};
        for (int i = 0; i < 5; ++i)
            if (levels[i] == value)
                return i;
    } else if (type == "SafetyMechanism") {
        static constexpr std::string_view kinds[] = {"none", "hot_standby", "voting"};
        for (int i = 0; i < 3; ++i)
            if (kinds[i] == value)
                return i;
    }
    return std::nullopt;
}

namespace {

bool same_ptr(const ExprPtr& a, const ExprPtr& b) {
    if (!a || !b)
        return !a && !b;
    return same_structure(*a, *b);
}

struct SameVisitor {
    const Expr::Node& other;

    bool operator()(const IntLiteral& x) const { return std::get<IntLiteral>(other).value == x.value; }
    bool operator()(const DecimalLiteral& x) const { return std::get<DecimalLiteral>(other).value == x.value; }
    bool operator()(const StringLiteral& x) const { return std::get<StringLiteral>(other).value == x.value; }
    bool operator()(const BoolLiteral& x) const { return std::get<BoolLiteral>(other).value == x.value; }
    bool operator()(const EnumLiteral& x) const {
        const auto& o = std::get<EnumLiteral>(other);
        return o.type == x.type && o.value == x.value;
    }
    bool operator()(const Variable& x) const { return std::get<Variable>(other).name == x.name; }
    bool operator()(const Navigation& x) const {
        const auto& o = std::get<Navigation>(other);
        return o.attribute == x.attribute && same_ptr(o.object, x.object);
    }
    bool operator()(const Unary& x) const {
        const auto& o = std::get<Unary>(other);
        return o.op == x.op && same_ptr(o.operand, x.operand);
    }
    bool operator()(const Binary& x) const {
        const auto& o = std::get<Binary>(other);
        return o.op == x.op && same_ptr(o.lhs, x.lhs) && same_ptr(o.rhs, x.rhs);
    }
    bool operator()(const CollectionCall& x) const {
        const auto& o = std::get<CollectionCall>(other);
        return o.op == x.op && o.binder == x.binder && same_ptr(o.source, x.source) && same_ptr(o.argument, x.argument);
    }
};

} // namespace

bool same_structure(const Expr& a, const Expr& b) {
    if (a.node.index() != b.node.index())
        return false;
    return std::visit(SameVisitor{b.node}, a.node);
}

bool same_structure(const ConstraintSet& a, const ConstraintSet& b) {
    if (a.constraints.size() != b.constraints.size())
        return false;
    for (std::size_t i = 0; i < a.constraints.size(); ++i) {
        const auto& x = a.constraints[i];
        const auto& y = b.constraints[i];
        if (x.context != y.context || x.name != y.name || !same_ptr(x.body, y.body))
            return false;
    }
    return true;
}

} // namespace forge::ocl
