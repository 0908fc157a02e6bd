#pragma once

// Evaluation semantics (shared contract with the reference interpreter used
// in the test suite):
//
//  * self is bound to each element of the context type in id order; context
//    Model binds the whole model, exposing functions, hardware, links, edges
//    and allocation (empty when the model is not enhanced).
//  * Operands are evaluated left to right. `and`, `or` and `implies`
//    short-circuit on their left operand; forAll/exists stop at the first
//    deciding element. Any other anomaly (division by zero, missing
//    attribute, type mismatch, integer overflow, non-boolean condition) makes
//    the whole verdict invalid. Invalid never turns into holds.
//  * int op int stays int for + - *; `/` always yields a decimal; mixed
//    operands promote to decimal.
//  * forAll over an empty collection holds; exists over one is false.

#include <string>
#include <utility>
#include <vector>

#include "forge/model.hpp"
#include "forge/ocl/ast.hpp"

namespace forge::ocl {

enum class Verdict { holds, violated, invalid };

std::string_view to_string(Verdict v) noexcept;

struct EvaluationEntry {
    std::size_t constraint_index = 0; ///< into EvaluationReport::constraints
    std::string constraint;
    ContextType context = ContextType::Model;
    std::string element_id;
    Verdict verdict = Verdict::holds;
    /// variable -> element id, for non-holds verdicts
    std::vector<std::pair<std::string, std::string>> witness;
    std::string reason;
    /// sub-expression that went undefined (invalid verdicts only)
    SourceSpan span;
};

struct EvaluationReport {
    std::vector<Constraint> constraints;
    /// Sorted by (constraint name, context, element id).
    std::vector<EvaluationEntry> entries;

    bool clean() const noexcept;
    std::size_t count(Verdict v) const noexcept;
};

/// Id used for the single element of context Model.
inline constexpr std::string_view model_element_id = "model";

EvaluationReport evaluate(const ConstraintSet& cs, const InstanceModel& model);

} // namespace forge::ocl
