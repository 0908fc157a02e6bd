#pragma once

#include <set>
#include <string>
#include <string_view>

#include "forge/error.hpp"
#include "forge/ocl/ast.hpp"

namespace forge::ocl {

class ParseError : public Error {
public:
    ParseError(int line, int column, std::set<std::string> expected, const std::string& message);

    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }
    const std::set<std::string>& expected() const noexcept { return expected_; }

private:
    int line_;
    int column_;
    std::set<std::string> expected_;
};

/// Parse "context <Type> inv <Name>: <expr>" declarations. "--" starts a line
/// comment. Precedence, lowest first: implies, or, and, comparison
/// (non-associative), additive, multiplicative, unary.
ConstraintSet parse_constraints(std::string_view text);

/// Fully parenthesized source, one declaration per line.
std::string print_constraints(const ConstraintSet& cs);
std::string print_expr(const Expr& e);

/// Append `extra` to `base`; a declaration in `extra` replaces one in `base`
/// with the same (context, name).
ConstraintSet merge_constraint_sets(const ConstraintSet& base, const ConstraintSet& extra);

} // namespace forge::ocl
