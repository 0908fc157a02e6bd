#include "forge/ocl/diagnostics.hpp"

#include "forge/ocl/parser.hpp"

namespace forge::ocl {

std::string_view to_string(Severity) noexcept { return "error"; }

namespace {

// Attribute name when `e` is self.<attr>.
std::optional<std::string> self_attribute(const Expr& e) {
    const auto* nav = std::get_if<Navigation>(&e.node);
    if (!nav)
        return std::nullopt;
    const auto* var = std::get_if<Variable>(&nav->object->node);
    if (!var || var->name != "self")
        return std::nullopt;
    return nav->attribute;
}

BinaryOp mirror(BinaryOp op) {
    switch (op) {
    case BinaryOp::Lt: return BinaryOp::Gt;
    case BinaryOp::Le: return BinaryOp::Ge;
    case BinaryOp::Gt: return BinaryOp::Lt;
    case BinaryOp::Ge: return BinaryOp::Le;
    default: return op;
    }
}

std::string verb_for(BinaryOp op) {
    switch (op) {
    case BinaryOp::Gt:
    case BinaryOp::Ge: return "Increase";
    case BinaryOp::Lt:
    case BinaryOp::Le: return "Decrease";
    case BinaryOp::Eq: return "Set";
    default: return "Change";
    }
}

std::string witness_text(const EvaluationEntry& e) {
    std::string out;
    for (const auto& [var, id] : e.witness) {
        if (var == "self")
            continue;
        out += (out.empty() ? "" : ", ") + (var == implicit_binder ? std::string("element") : var) + " = " + id;
    }
    return out;
}

} // namespace

std::string suggest(const Constraint& c, const EvaluationEntry& e) {
    const std::string& elem = e.element_id;
    const std::string tail = " to satisfy " + c.name;
    if (e.verdict == Verdict::invalid)
        return "Fix the undefined operation (" + e.reason + ") at " + e.span.str() + " in " + c.name + " for " + elem;

    const Expr& body = *c.body;
    if (const auto* bin = std::get_if<Binary>(&body.node)) {
        if (is_comparison(bin->op)) {
            if (auto a = self_attribute(*bin->lhs))
                return verb_for(bin->op) + " " + *a + " of " + elem + tail;
            if (auto a = self_attribute(*bin->rhs))
                return verb_for(mirror(bin->op)) + " " + *a + " of " + elem + tail;
            if (const auto* call = std::get_if<CollectionCall>(&bin->lhs->node); call && call->op == CollectionOp::Size) {
                auto what = print_expr(*call->source);
                switch (bin->op) {
                case BinaryOp::Gt:
                case BinaryOp::Ge: return "Add elements to " + what + " of " + elem + tail;
                case BinaryOp::Lt:
                case BinaryOp::Le: return "Remove elements from " + what + " of " + elem + tail;
                default: return "Adjust the number of elements in " + what + " of " + elem + tail;
                }
            }
            return "Change " + elem + " so that " + print_expr(*bin->lhs) + " " + std::string(to_string(bin->op)) +
                   " " + print_expr(*bin->rhs) + tail;
        }
        if (bin->op == BinaryOp::Implies)
            return "Either make " + print_expr(*bin->lhs) + " false or ensure " + print_expr(*bin->rhs) + " for " +
                   elem + tail;
    }
    if (const auto* call = std::get_if<CollectionCall>(&body.node)) {
        auto src = print_expr(*call->source);
        auto w = witness_text(e);
        switch (call->op) {
        case CollectionOp::ForAll:
            return "Change " + (w.empty() ? "the offending element" : w) + " in " + src + " of " + elem +
                   " so that " + print_expr(*call->argument) + " holds" + tail;
        case CollectionOp::Exists:
            return "Add an element to " + src + " of " + elem + " for which " + print_expr(*call->argument) +
                   " holds" + tail;
        case CollectionOp::IsUnique:
            return "Make " + print_expr(*call->argument) + " unique across " + src + " of " + elem +
                   (w.empty() ? "" : " (duplicate at " + w + ")") + tail;
        case CollectionOp::Includes:
            return "Add " + print_expr(*call->argument) + " to " + src + " of " + elem + tail;
        default: break;
        }
    }
    return "Change " + elem + " so that " + print_expr(body) + " holds" + tail;
}

std::vector<Diagnostic> explain(const EvaluationReport& report, const InstanceModel&, const SuggestionRewriter& rewrite) {
    std::vector<Diagnostic> out;
    for (const auto& e : report.entries) {
        if (e.verdict == Verdict::holds)
            continue;
        const auto& c = report.constraints.at(e.constraint_index);
        Diagnostic d;
        d.constraint_id = c.name;
        d.element_id = e.element_id;
        std::string where = std::string(to_string(c.context)) + " " + e.element_id;
        if (e.verdict == Verdict::violated)
            d.message = "Constraint " + c.name + " is violated by " + where + ": " + e.reason + ".";
        else
            d.message = "Constraint " + c.name + " is undefined on " + where + ": " + e.reason + " at " +
                        e.span.str() + ".";
        d.suggestion = suggest(c, e) + ".";
        if (rewrite) {
            try {
                auto alt = rewrite(d);
                if (!alt.empty())
                    d.suggestion = std::move(alt);
            } catch (const std::exception&) {
            }
        }
        out.push_back(std::move(d));
    }
    return out;
}

} // namespace forge::ocl
