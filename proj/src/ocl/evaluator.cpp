#include "forge/ocl/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <variant>

#include "forge/canonical.hpp"
#include "forge/ocl/parser.hpp"

namespace forge::ocl {

std::string_view to_string(Verdict v) noexcept {
    switch (v) {
    case Verdict::holds: return "holds";
    case Verdict::violated: return "violated";
    case Verdict::invalid: return "invalid";
    }
    return "invalid";
}

bool EvaluationReport::clean() const noexcept {
    return std::all_of(entries.begin(), entries.end(), [](const EvaluationEntry& e) { return e.verdict == Verdict::holds; });
}

std::size_t EvaluationReport::count(Verdict v) const noexcept {
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [v](const EvaluationEntry& e) { return e.verdict == v; }));
}

namespace {

enum class Kind : std::uint8_t { Function, Node, Link, Edge, Port, Placement, Model };

struct ElemRef {
    Kind kind;
    std::uint32_t index;     // into the owning model collection
    std::uint32_t sub = 0;   // port: index in its list; bit 31 set for in-ports

    bool operator==(const ElemRef&) const = default;
};

struct EnumVal {
    int type; // 0 Asil, 1 SafetyMechanism
    int ordinal;
};

struct Value;
using Coll = std::shared_ptr<const std::vector<Value>>;

struct Value {
    std::variant<bool, std::int64_t, double, std::string, EnumVal, ElemRef, Coll> v;
};

struct Undefined {
    std::string reason;
    SourceSpan span;
};

[[noreturn]] void undefined(std::string reason, const SourceSpan& span) {
    throw Undefined{std::move(reason), span};
}

enum class Attr : std::uint8_t {
    id, cpu_req, mem_req, power_req, asil, redundancy, safety_mechanism, out_ports, in_ports,
    cpu_cap, mem_cap, base_power, cost, asil_cap,
    endpoint_a, endpoint_b, bandwidth_bps, latency_ms,
    src_fn, src_port, dst_fn, dst_port, rate_hz, msg_bytes, latency_budget_ms, source, target,
    name, datatype,
    instance, replica, function, node,
    functions, hardware, links, edges, allocation,
    unknown
};

Attr attr_from_name(std::string_view s) {
    static const std::map<std::string_view, Attr> table = {
        {"id", Attr::id}, {"cpu_req", Attr::cpu_req}, {"mem_req", Attr::mem_req}, {"power_req", Attr::power_req},
        {"asil", Attr::asil}, {"redundancy", Attr::redundancy}, {"safety_mechanism", Attr::safety_mechanism},
        {"out_ports", Attr::out_ports}, {"in_ports", Attr::in_ports}, {"cpu_cap", Attr::cpu_cap},
        {"mem_cap", Attr::mem_cap}, {"base_power", Attr::base_power}, {"cost", Attr::cost},
        {"asil_cap", Attr::asil_cap}, {"endpoint_a", Attr::endpoint_a}, {"endpoint_b", Attr::endpoint_b},
        {"bandwidth_bps", Attr::bandwidth_bps}, {"latency_ms", Attr::latency_ms}, {"src_fn", Attr::src_fn},
        {"src_port", Attr::src_port}, {"dst_fn", Attr::dst_fn}, {"dst_port", Attr::dst_port},
        {"rate_hz", Attr::rate_hz}, {"msg_bytes", Attr::msg_bytes}, {"latency_budget_ms", Attr::latency_budget_ms},
        {"source", Attr::source}, {"target", Attr::target}, {"name", Attr::name}, {"datatype", Attr::datatype},
        {"instance", Attr::instance}, {"replica", Attr::replica}, {"function", Attr::function}, {"node", Attr::node},
        {"functions", Attr::functions}, {"hardware", Attr::hardware}, {"links", Attr::links}, {"edges", Attr::edges},
        {"allocation", Attr::allocation}};
    auto it = table.find(s);
    return it == table.end() ? Attr::unknown : it->second;
}

std::string_view kind_name(Kind k) {
    switch (k) {
    case Kind::Function: return "Function";
    case Kind::Node: return "HardwareNode";
    case Kind::Link: return "Link";
    case Kind::Edge: return "FlowEdge";
    case Kind::Port: return "Port";
    case Kind::Placement: return "Placement";
    case Kind::Model: return "Model";
    }
    return "?";
}

enum class Op : std::uint8_t {
    constant, slot, attr, not_, negate, and_, or_, implies, compare, arith,
    for_all, exists, select, collect, size, sum, is_unique, includes
};

// Expression tree with variables resolved to frame slots and attribute names
// to Attr ids.
struct Node {
    Op op = Op::constant;
    BinaryOp bop = BinaryOp::Add;
    Attr attr = Attr::unknown;
    std::string attr_name;
    int slot = 0;
    Value constant{false};
    std::vector<Node> kids;
    SourceSpan span;
};

class Compiler {
public:
    Node compile(const Expr& e) {
        scopes_.assign({"self"});
        max_depth_ = 1;
        return walk(e);
    }
    int frame_size() const { return max_depth_; }

private:
    Node walk(const Expr& e) {
        Node n;
        n.span = e.span;
        std::visit(
            [&](const auto& x) {
                using T = std::decay_t<decltype(x)>;
                if constexpr (std::is_same_v<T, IntLiteral>) {
                    n.constant = Value{x.value};
                } else if constexpr (std::is_same_v<T, DecimalLiteral>) {
                    n.constant = Value{x.value};
                } else if constexpr (std::is_same_v<T, StringLiteral>) {
                    n.constant = Value{x.value};
                } else if constexpr (std::is_same_v<T, BoolLiteral>) {
                    n.constant = Value{x.value};
                } else if constexpr (std::is_same_v<T, EnumLiteral>) {
                    n.constant = Value{EnumVal{x.type == "Asil" ? 0 : 1, enum_ordinal(x.type, x.value).value_or(-1)}};
                } else if constexpr (std::is_same_v<T, Variable>) {
                    n.op = Op::slot;
                    auto it = std::find(scopes_.rbegin(), scopes_.rend(), x.name);
                    if (it == scopes_.rend())
                        undefined("unbound variable '" + x.name + "'", e.span);
                    n.slot = static_cast<int>(std::distance(it, scopes_.rend())) - 1;
                } else if constexpr (std::is_same_v<T, Navigation>) {
                    n.op = Op::attr;
                    n.attr = attr_from_name(x.attribute);
                    n.attr_name = x.attribute;
                    n.kids.push_back(walk(*x.object));
                } else if constexpr (std::is_same_v<T, Unary>) {
                    n.op = x.op == UnaryOp::Not ? Op::not_ : Op::negate;
                    n.kids.push_back(walk(*x.operand));
                } else if constexpr (std::is_same_v<T, Binary>) {
                    n.bop = x.op;
                    switch (x.op) {
                    case BinaryOp::And: n.op = Op::and_; break;
                    case BinaryOp::Or: n.op = Op::or_; break;
                    case BinaryOp::Implies: n.op = Op::implies; break;
                    default: n.op = is_comparison(x.op) ? Op::compare : Op::arith;
                    }
                    n.kids.push_back(walk(*x.lhs));
                    n.kids.push_back(walk(*x.rhs));
                } else if constexpr (std::is_same_v<T, CollectionCall>) {
                    switch (x.op) {
                    case CollectionOp::ForAll: n.op = Op::for_all; break;
                    case CollectionOp::Exists: n.op = Op::exists; break;
                    case CollectionOp::Select: n.op = Op::select; break;
                    case CollectionOp::Collect: n.op = Op::collect; break;
                    case CollectionOp::Size: n.op = Op::size; break;
                    case CollectionOp::Sum: n.op = Op::sum; break;
                    case CollectionOp::IsUnique: n.op = Op::is_unique; break;
                    case CollectionOp::Includes: n.op = Op::includes; break;
                    }
                    n.kids.push_back(walk(*x.source));
                    if (x.binder) {
                        scopes_.push_back(*x.binder);
                        n.attr_name = *x.binder;
                        n.slot = static_cast<int>(scopes_.size()) - 1;
                        max_depth_ = std::max(max_depth_, static_cast<int>(scopes_.size()));
                        n.kids.push_back(walk(*x.argument));
                        scopes_.pop_back();
                    } else if (x.argument) {
                        n.kids.push_back(walk(*x.argument));
                    }
                }
            },
            e.node);
        return n;
    }

    std::vector<std::string> scopes_;
    int max_depth_ = 1;
};

struct Frame {
    std::vector<Value> slots;
    std::vector<std::string> names;
    std::vector<bool> live;
};

class Machine {
public:
    explicit Machine(const InstanceModel& m) : model_(m) {
        for (std::uint32_t i = 0; i < m.functions.size(); ++i)
            fn_index_.emplace(m.functions[i].id, i);
        for (std::uint32_t i = 0; i < m.hardware.size(); ++i)
            node_index_.emplace(m.hardware[i].id, i);
        functions_ = make_coll(Kind::Function, m.functions.size());
        hardware_ = make_coll(Kind::Node, m.hardware.size());
        links_ = make_coll(Kind::Link, m.links.size());
        edges_ = make_coll(Kind::Edge, m.edges.size());
        allocation_ = make_coll(Kind::Placement, m.allocation ? m.allocation->size() : 0);
    }

    Value eval(const Node& n, Frame& f) {
        switch (n.op) {
        case Op::constant: return n.constant;
        case Op::slot: return f.slots[static_cast<std::size_t>(n.slot)];
        case Op::attr: return attribute(eval(n.kids[0], f), n);
        case Op::not_: {
            auto v = eval(n.kids[0], f);
            if (auto* b = std::get_if<bool>(&v.v))
                return Value{!*b};
            undefined("'not' applied to a non-boolean", n.span);
        }
        case Op::negate: {
            auto v = eval(n.kids[0], f);
            if (auto* i = std::get_if<std::int64_t>(&v.v)) {
                if (*i == INT64_MIN)
                    undefined("integer overflow in negation", n.span);
                return Value{-*i};
            }
            if (auto* d = std::get_if<double>(&v.v))
                return Value{-*d};
            undefined("negation of a non-number", n.span);
        }
        case Op::and_:
        case Op::or_:
        case Op::implies: {
            bool l = boolean(eval(n.kids[0], f), n);
            if (n.op == Op::and_ && !l)
                return Value{false};
            if (n.op == Op::or_ && l)
                return Value{true};
            if (n.op == Op::implies && !l)
                return Value{true};
            return Value{boolean(eval(n.kids[1], f), n)};
        }
        case Op::compare: {
            auto l = eval(n.kids[0], f);
            auto r = eval(n.kids[1], f);
            return Value{compare(l, r, n)};
        }
        case Op::arith: {
            auto l = eval(n.kids[0], f);
            auto r = eval(n.kids[1], f);
            return arith(l, r, n);
        }
        default: return collection_op(n, f);
        }
    }

    std::vector<std::pair<std::string, std::string>> witness;

    std::string element_id(const ElemRef& r) const {
        switch (r.kind) {
        case Kind::Function: return model_.functions[r.index].id;
        case Kind::Node: return model_.hardware[r.index].id;
        case Kind::Link: return model_.links[r.index].id;
        case Kind::Edge: return model_.edges[r.index].id;
        case Kind::Port: {
            const auto& fn = model_.functions[r.index];
            const auto& ports = (r.sub >> 31) ? fn.in_ports : fn.out_ports;
            return fn.id + "." + ports[r.sub & 0x7fffffffu].name;
        }
        case Kind::Placement: return (*model_.allocation)[r.index].instance.str();
        case Kind::Model: return std::string(model_element_id);
        }
        return {};
    }

    std::string render(const Value& v) const {
        return std::visit(
            [&](const auto& x) -> std::string {
                using T = std::decay_t<decltype(x)>;
                if constexpr (std::is_same_v<T, bool>)
                    return x ? "true" : "false";
                else if constexpr (std::is_same_v<T, std::int64_t>)
                    return std::to_string(x);
                else if constexpr (std::is_same_v<T, double>)
                    return format_decimal(x);
                else if constexpr (std::is_same_v<T, std::string>)
                    return "'" + x + "'";
                else if constexpr (std::is_same_v<T, EnumVal>)
                    return x.type == 0 ? "Asil::" + std::string(to_string(static_cast<Asil>(x.ordinal)))
                                       : "SafetyMechanism::" +
                                             std::string(to_string(static_cast<SafetyMechanism>(x.ordinal)));
                else if constexpr (std::is_same_v<T, ElemRef>)
                    return element_id(x);
                else
                    return "collection of " + std::to_string(x->size());
            },
            v.v);
    }

    Value self_for(ContextType t, std::uint32_t i) const {
        switch (t) {
        case ContextType::Function: return Value{ElemRef{Kind::Function, i}};
        case ContextType::HardwareNode: return Value{ElemRef{Kind::Node, i}};
        case ContextType::Link: return Value{ElemRef{Kind::Link, i}};
        case ContextType::FlowEdge: return Value{ElemRef{Kind::Edge, i}};
        case ContextType::Model: return Value{ElemRef{Kind::Model, 0}};
        }
        return Value{false};
    }

private:
    static Coll make_coll(Kind k, std::size_t n) {
        auto v = std::make_shared<std::vector<Value>>();
        v->reserve(n);
        for (std::uint32_t i = 0; i < n; ++i)
            v->push_back(Value{ElemRef{k, i}});
        return v;
    }

    static bool boolean(const Value& v, const Node& n) {
        if (auto* b = std::get_if<bool>(&v.v))
            return *b;
        undefined("'" + std::string(to_string(n.bop)) + "' operand is not a boolean", n.span);
    }

    static bool is_number(const Value& v) { return v.v.index() == 1 || v.v.index() == 2; }
    static double as_double(const Value& v) {
        if (auto* i = std::get_if<std::int64_t>(&v.v))
            return static_cast<double>(*i);
        return std::get<double>(v.v);
    }

    // -1 / 0 / 1, or nullopt when the pair is not comparable under `ordered`.
    static std::optional<int> order(const Value& l, const Value& r, bool ordered) {
        if (is_number(l) && is_number(r)) {
            if (l.v.index() == 1 && r.v.index() == 1) {
                auto a = std::get<std::int64_t>(l.v), b = std::get<std::int64_t>(r.v);
                return a < b ? -1 : (a > b ? 1 : 0);
            }
            double a = as_double(l), b = as_double(r);
            return a < b ? -1 : (a > b ? 1 : 0);
        }
        if (l.v.index() != r.v.index())
            return std::nullopt;
        if (auto* a = std::get_if<std::string>(&l.v)) {
            int c = a->compare(std::get<std::string>(r.v));
            return c < 0 ? -1 : (c > 0 ? 1 : 0);
        }
        if (auto* a = std::get_if<EnumVal>(&l.v)) {
            const auto& b = std::get<EnumVal>(r.v);
            if (a->type != b.type)
                return std::nullopt;
            return a->ordinal < b.ordinal ? -1 : (a->ordinal > b.ordinal ? 1 : 0);
        }
        if (ordered)
            return std::nullopt;
        if (auto* a = std::get_if<bool>(&l.v))
            return *a == std::get<bool>(r.v) ? 0 : 1;
        if (auto* a = std::get_if<ElemRef>(&l.v)) {
            const auto& b = std::get<ElemRef>(r.v);
            if (a->kind != b.kind)
                return std::nullopt;
            return *a == b ? 0 : 1;
        }
        return std::nullopt;
    }

    static bool compare(const Value& l, const Value& r, const Node& n) {
        bool ordered = n.bop != BinaryOp::Eq && n.bop != BinaryOp::Ne;
        auto c = order(l, r, ordered);
        if (!c)
            undefined("type mismatch in '" + std::string(to_string(n.bop)) + "'", n.span);
        switch (n.bop) {
        case BinaryOp::Eq: return *c == 0;
        case BinaryOp::Ne: return *c != 0;
        case BinaryOp::Lt: return *c < 0;
        case BinaryOp::Le: return *c <= 0;
        case BinaryOp::Gt: return *c > 0;
        case BinaryOp::Ge: return *c >= 0;
        default: return false;
        }
    }

    // Equality used by isUnique / includes: incomparable pairs are unequal.
    static bool same_value(const Value& l, const Value& r) {
        auto c = order(l, r, false);
        return c && *c == 0;
    }

    static Value arith(const Value& l, const Value& r, const Node& n) {
        if (!is_number(l) || !is_number(r))
            undefined("'" + std::string(to_string(n.bop)) + "' applied to a non-number", n.span);
        if (n.bop == BinaryOp::Div) {
            double d = as_double(r);
            if (d == 0.0)
                undefined("division by zero", n.span);
            double q = as_double(l) / d;
            if (!std::isfinite(q))
                undefined("non-finite result of '/'", n.span);
            return Value{q};
        }
        if (l.v.index() == 1 && r.v.index() == 1) {
            auto a = std::get<std::int64_t>(l.v), b = std::get<std::int64_t>(r.v);
            std::int64_t out = 0;
            bool overflow = n.bop == BinaryOp::Add   ? __builtin_add_overflow(a, b, &out)
                            : n.bop == BinaryOp::Sub ? __builtin_sub_overflow(a, b, &out)
                                                     : __builtin_mul_overflow(a, b, &out);
            if (overflow)
                undefined("integer overflow in '" + std::string(to_string(n.bop)) + "'", n.span);
            return Value{out};
        }
        double a = as_double(l), b = as_double(r);
        double out = n.bop == BinaryOp::Add ? a + b : n.bop == BinaryOp::Sub ? a - b : a * b;
        if (!std::isfinite(out))
            undefined("non-finite result of '" + std::string(to_string(n.bop)) + "'", n.span);
        return Value{out};
    }

    Value ports(std::uint32_t fn, bool in) const {
        const auto& list = in ? model_.functions[fn].in_ports : model_.functions[fn].out_ports;
        auto v = std::make_shared<std::vector<Value>>();
        for (std::uint32_t i = 0; i < list.size(); ++i)
            v->push_back(Value{ElemRef{Kind::Port, fn, i | (in ? 0x80000000u : 0u)}});
        return Value{Coll(std::move(v))};
    }

    [[noreturn]] static void no_attr(const ElemRef& r, const Node& n) {
        undefined("no attribute '" + n.attr_name + "' on " + std::string(kind_name(r.kind)), n.span);
    }

    Value attribute(const Value& obj, const Node& n) const {
        const auto* r = std::get_if<ElemRef>(&obj.v);
        if (!r)
            undefined("attribute '" + n.attr_name + "' of a non-element", n.span);
        switch (r->kind) {
        case Kind::Function: {
            const auto& x = model_.functions[r->index];
            switch (n.attr) {
            case Attr::id: return Value{x.id};
            case Attr::cpu_req: return Value{x.cpu_req};
            case Attr::mem_req: return Value{x.mem_req};
            case Attr::power_req: return Value{x.power_req};
            case Attr::asil: return Value{EnumVal{0, static_cast<int>(x.asil)}};
            case Attr::redundancy: return Value{static_cast<std::int64_t>(x.redundancy)};
            case Attr::safety_mechanism: return Value{EnumVal{1, static_cast<int>(x.safety_mechanism)}};
            case Attr::out_ports: return ports(r->index, false);
            case Attr::in_ports: return ports(r->index, true);
            default: no_attr(*r, n);
            }
        }
        case Kind::Node: {
            const auto& x = model_.hardware[r->index];
            switch (n.attr) {
            case Attr::id: return Value{x.id};
            case Attr::cpu_cap: return Value{x.cpu_cap};
            case Attr::mem_cap: return Value{x.mem_cap};
            case Attr::base_power: return Value{x.base_power};
            case Attr::cost: return Value{x.cost};
            case Attr::asil_cap: return Value{EnumVal{0, static_cast<int>(x.asil_cap)}};
            default: no_attr(*r, n);
            }
        }
        case Kind::Link: {
            const auto& x = model_.links[r->index];
            switch (n.attr) {
            case Attr::id: return Value{x.id};
            case Attr::endpoint_a: return Value{x.endpoint_a};
            case Attr::endpoint_b: return Value{x.endpoint_b};
            case Attr::bandwidth_bps: return Value{x.bandwidth_bps};
            case Attr::latency_ms: return Value{x.latency_ms};
            default: no_attr(*r, n);
            }
        }
        case Kind::Edge: {
            const auto& x = model_.edges[r->index];
            switch (n.attr) {
            case Attr::id: return Value{x.id};
            case Attr::src_fn: return Value{x.src_fn};
            case Attr::src_port: return Value{x.src_port};
            case Attr::dst_fn: return Value{x.dst_fn};
            case Attr::dst_port: return Value{x.dst_port};
            case Attr::rate_hz: return Value{x.rate_hz};
            case Attr::msg_bytes: return Value{x.msg_bytes};
            case Attr::latency_budget_ms:
                if (!x.latency_budget_ms)
                    undefined("edge '" + x.id + "' has no latency_budget_ms", n.span);
                return Value{*x.latency_budget_ms};
            case Attr::source: return Value{ElemRef{Kind::Function, fn_index_.at(x.src_fn)}};
            case Attr::target: return Value{ElemRef{Kind::Function, fn_index_.at(x.dst_fn)}};
            default: no_attr(*r, n);
            }
        }
        case Kind::Port: {
            const auto& fn = model_.functions[r->index];
            const auto& p = ((r->sub >> 31) ? fn.in_ports : fn.out_ports)[r->sub & 0x7fffffffu];
            switch (n.attr) {
            case Attr::name: return Value{p.name};
            case Attr::datatype: return Value{p.datatype};
            default: no_attr(*r, n);
            }
        }
        case Kind::Placement: {
            const auto& x = (*model_.allocation)[r->index];
            switch (n.attr) {
            case Attr::instance: return Value{x.instance.str()};
            case Attr::replica: return Value{static_cast<std::int64_t>(x.instance.replica)};
            case Attr::function: return Value{ElemRef{Kind::Function, fn_index_.at(x.instance.function)}};
            case Attr::node: return Value{ElemRef{Kind::Node, node_index_.at(x.node)}};
            default: no_attr(*r, n);
            }
        }
        case Kind::Model:
            switch (n.attr) {
            case Attr::functions: return Value{functions_};
            case Attr::hardware: return Value{hardware_};
            case Attr::links: return Value{links_};
            case Attr::edges: return Value{edges_};
            case Attr::allocation: return Value{allocation_};
            default: no_attr(*r, n);
            }
        }
        no_attr(*r, n);
    }

    void capture(const Frame& f, int depth) {
        if (!witness.empty())
            return;
        for (int i = 0; i <= depth; ++i) {
            const auto* r = std::get_if<ElemRef>(&f.slots[static_cast<std::size_t>(i)].v);
            if (r && f.live[static_cast<std::size_t>(i)])
                witness.emplace_back(f.names[static_cast<std::size_t>(i)], element_id(*r));
        }
    }

    Value collection_op(const Node& n, Frame& f) {
        auto src = eval(n.kids[0], f);
        const auto* cp = std::get_if<Coll>(&src.v);
        if (!cp)
            undefined("collection operation on a non-collection", n.span);
        const auto& items = **cp;
        auto slot = static_cast<std::size_t>(n.slot);
        auto body = [&](const Value& item) {
            f.slots[slot] = item;
            f.names[slot] = n.attr_name;
            f.live[slot] = true;
            auto out = eval(n.kids[1], f);
            return out;
        };
        auto body_bool = [&](const Value& item) {
            auto v = body(item);
            if (auto* b = std::get_if<bool>(&v.v))
                return *b;
            undefined("body of '" + std::string(n.op == Op::for_all ? "forAll" : n.op == Op::exists ? "exists" : "select") +
                          "' is not boolean",
                      n.kids[1].span);
        };
        Value result{false};
        switch (n.op) {
        case Op::size:
            return Value{static_cast<std::int64_t>(items.size())};
        case Op::sum: {
            bool all_int = true;
            for (const auto& it : items) {
                if (!is_number(it))
                    undefined("sum over a non-number", n.span);
                all_int = all_int && it.v.index() == 1;
            }
            if (all_int) {
                std::int64_t isum = 0;
                for (const auto& it : items)
                    if (__builtin_add_overflow(isum, std::get<std::int64_t>(it.v), &isum))
                        undefined("integer overflow in sum", n.span);
                return Value{isum};
            }
            double dsum = 0.0;
            for (const auto& it : items)
                dsum += as_double(it);
            if (!std::isfinite(dsum))
                undefined("non-finite sum", n.span);
            return Value{dsum};
        }
        case Op::includes: {
            auto needle = eval(n.kids[1], f);
            for (const auto& it : items)
                if (same_value(it, needle))
                    return Value{true};
            return Value{false};
        }
        case Op::for_all:
            result = Value{true};
            for (const auto& it : items)
                if (!body_bool(it)) {
                    capture(f, n.slot);
                    result = Value{false};
                    break;
                }
            break;
        case Op::exists:
            for (const auto& it : items)
                if (body_bool(it)) {
                    result = Value{true};
                    break;
                }
            break;
        case Op::select: {
            auto out = std::make_shared<std::vector<Value>>();
            for (const auto& it : items)
                if (body_bool(it))
                    out->push_back(it);
            result = Value{Coll(std::move(out))};
            break;
        }
        case Op::collect: {
            auto out = std::make_shared<std::vector<Value>>();
            out->reserve(items.size());
            for (const auto& it : items)
                out->push_back(body(it));
            result = Value{Coll(std::move(out))};
            break;
        }
        case Op::is_unique: {
            std::vector<Value> seen;
            seen.reserve(items.size());
            result = Value{true};
            for (const auto& it : items) {
                auto v = body(it);
                bool dup = std::any_of(seen.begin(), seen.end(), [&](const Value& s) { return same_value(s, v); });
                if (dup) {
                    capture(f, n.slot);
                    result = Value{false};
                    break;
                }
                seen.push_back(std::move(v));
            }
            break;
        }
        default:
            break;
        }
        f.live[slot] = false;
        return result;
    }

    const InstanceModel& model_;
    std::map<std::string, std::uint32_t, std::less<>> fn_index_;
    std::map<std::string, std::uint32_t, std::less<>> node_index_;
    Coll functions_, hardware_, links_, edges_, allocation_;
};

std::size_t context_size(ContextType t, const InstanceModel& m) {
    switch (t) {
    case ContextType::Function: return m.functions.size();
    case ContextType::HardwareNode: return m.hardware.size();
    case ContextType::Link: return m.links.size();
    case ContextType::FlowEdge: return m.edges.size();
    case ContextType::Model: return 1;
    }
    return 0;
}

const char* cmp_phrase(BinaryOp op) {
    switch (op) {
    case BinaryOp::Eq: return "equal to";
    case BinaryOp::Ne: return "different from";
    case BinaryOp::Lt: return "less than";
    case BinaryOp::Le: return "at most";
    case BinaryOp::Gt: return "greater than";
    case BinaryOp::Ge: return "at least";
    default: return "?";
    }
}

} // namespace

EvaluationReport evaluate(const ConstraintSet& cs, const InstanceModel& model) {
    EvaluationReport report;
    report.constraints = cs.constraints;
    Machine vm(model);

    for (std::size_t ci = 0; ci < cs.constraints.size(); ++ci) {
        const auto& c = cs.constraints[ci];
        Compiler compiler;
        std::optional<Node> program;
        std::optional<Undefined> compile_error;
        try {
            program = compiler.compile(*c.body);
        } catch (const Undefined& u) {
            compile_error = u;
        }
        auto n = context_size(c.context, model);
        for (std::uint32_t i = 0; i < n; ++i) {
            EvaluationEntry entry;
            entry.constraint_index = ci;
            entry.constraint = c.name;
            entry.context = c.context;
            Value self = vm.self_for(c.context, i);
            entry.element_id = vm.element_id(std::get<ElemRef>(self.v));
            if (compile_error) {
                entry.verdict = Verdict::invalid;
                entry.reason = compile_error->reason;
                entry.span = compile_error->span;
                report.entries.push_back(std::move(entry));
                continue;
            }
            Frame frame;
            frame.slots.assign(static_cast<std::size_t>(compiler.frame_size()), Value{false});
            frame.names.assign(frame.slots.size(), std::string());
            frame.names[0] = "self";
            frame.live.assign(frame.slots.size(), false);
            frame.slots[0] = self;
            frame.live[0] = true;
            vm.witness.clear();
            try {
                auto v = vm.eval(*program, frame);
                const auto* b = std::get_if<bool>(&v.v);
                if (!b) {
                    entry.verdict = Verdict::invalid;
                    entry.reason = "constraint body evaluated to " + vm.render(v) + ", not a boolean";
                    entry.span = c.body->span;
                } else if (*b) {
                    entry.verdict = Verdict::holds;
                } else {
                    entry.verdict = Verdict::violated;
                    entry.witness = vm.witness;
                    if (entry.witness.empty())
                        entry.witness.emplace_back("self", entry.element_id);
                    const auto* bin = std::get_if<Binary>(&c.body->node);
                    if (bin && is_comparison(bin->op)) {
                        // both sides are defined: the comparison already evaluated them
                        auto l = vm.eval(program->kids[0], frame);
                        auto r = vm.eval(program->kids[1], frame);
                        entry.reason = print_expr(*bin->lhs) + " is " + vm.render(l) + ", expected " +
                                       cmp_phrase(bin->op) + " " + vm.render(r);
                    } else {
                        entry.reason = print_expr(*c.body) + " is false";
                        if (entry.witness.size() > 1) {
                            entry.reason += " for ";
                            for (std::size_t k = 1; k < entry.witness.size(); ++k)
                                entry.reason += (k > 1 ? ", " : "") + entry.witness[k].first + " = " + entry.witness[k].second;
                        }
                    }
                }
            } catch (const Undefined& u) {
                entry.verdict = Verdict::invalid;
                entry.reason = u.reason;
                entry.span = u.span;
            }
            report.entries.push_back(std::move(entry));
        }
    }

    std::stable_sort(report.entries.begin(), report.entries.end(), [](const EvaluationEntry& a, const EvaluationEntry& b) {
        if (a.constraint != b.constraint)
            return a.constraint < b.constraint;
        if (a.context != b.context)
            return a.context < b.context;
        return a.element_id < b.element_id;
    });
    return report;
}

} // namespace forge::ocl
