#pragma once

#include <string_view>

#include "forge/ocl/ast.hpp"

namespace forge::ocl {

/// Source of the built-in rules: capacity, ASIL, uniqueness, anti-affinity.
/// The allocation rules are vacuous on a model without an allocation.
std::string_view builtin_rule_source() noexcept;

/// Parsed once and cached.
const ConstraintSet& builtin_rules();

} // namespace forge::ocl
