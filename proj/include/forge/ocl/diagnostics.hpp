#pragma once

#include <functional>
#include <string>
#include <vector>

#include "forge/model.hpp"
#include "forge/ocl/evaluator.hpp"

namespace forge::ocl {

enum class Severity { error };

std::string_view to_string(Severity s) noexcept;

struct Diagnostic {
    std::string constraint_id;
    std::string element_id;
    Severity severity = Severity::error;
    std::string message;
    std::string suggestion;
};

/// Optional hook that may rewrite a template suggestion (e.g. through an LLM).
/// An empty return or an exception keeps the template text.
using SuggestionRewriter = std::function<std::string(const Diagnostic&)>;

/// One diagnostic per non-holds entry, in report order.
std::vector<Diagnostic> explain(const EvaluationReport& report, const InstanceModel& model,
                                const SuggestionRewriter& rewrite = {});

/// Template suggestion for a single entry.
std::string suggest(const Constraint& c, const EvaluationEntry& e);

} // namespace forge::ocl
