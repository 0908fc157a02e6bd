#include "forge/ocl/parser.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <map>
#include <sstream>

namespace forge::ocl {

ParseError::ParseError(int line, int column, std::set<std::string> expected, const std::string& message)
    : Error([&] {
          std::ostringstream os;
          os << line << ":" << column << ": " << message;
          if (!expected.empty()) {
              os << " (expected ";
              bool first = true;
              for (const auto& e : expected) {
                  os << (first ? "" : ", ") << e;
                  first = false;
              }
              os << ")";
          }
          return os.str();
      }()),
      line_(line), column_(column), expected_(std::move(expected)) {}

namespace {

enum class Tok { Ident, Keyword, Int, Decimal, String, Punct, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;
    int line = 1;
    int column = 1;
    int end_line = 1;
    int end_column = 1;
    std::int64_t int_value = 0;
    double dec_value = 0.0;
};

constexpr std::array<std::string_view, 9> keywords = {"context", "inv", "self", "implies", "or", "and", "not", "true", "false"};

bool is_keyword(std::string_view s) {
    return std::find(keywords.begin(), keywords.end(), s) != keywords.end();
}

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        for (;;) {
            skip_space();
            Token t;
            t.line = line_;
            t.column = col_;
            if (pos_ >= src_.size()) {
                t.kind = Tok::End;
                t.text = "end of input";
                t.end_line = line_;
                t.end_column = col_;
                out.push_back(std::move(t));
                return out;
            }
            char c = src_[pos_];
            if (ident_start(c)) {
                std::size_t b = pos_;
                while (pos_ < src_.size() && ident_char(src_[pos_]))
                    advance();
                t.text = std::string(src_.substr(b, pos_ - b));
                t.kind = is_keyword(t.text) ? Tok::Keyword : Tok::Ident;
            } else if (c >= '0' && c <= '9') {
                lex_number(t);
            } else if (c == '\'') {
                lex_string(t);
            } else {
                lex_punct(t);
            }
            t.end_line = line_;
            t.end_column = col_;
            out.push_back(std::move(t));
        }
    }

private:
    static bool ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
    static bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }
    static bool digit(char c) { return c >= '0' && c <= '9'; }

    void advance() {
        if (src_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    char peek(std::size_t ahead = 0) const { return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0'; }

    void skip_space() {
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                advance();
            } else if (c == '-' && peek(1) == '-') {
                while (pos_ < src_.size() && src_[pos_] != '\n')
                    advance();
            } else {
                break;
            }
        }
    }

    [[noreturn]] void fail(const std::string& msg, std::set<std::string> expected = {}) const {
        throw ParseError(line_, col_, std::move(expected), msg);
    }

    void lex_number(Token& t) {
        int line = line_, col = col_;
        std::size_t b = pos_;
        bool decimal = false;
        while (digit(peek()))
            advance();
        if (peek() == '.' && digit(peek(1))) {
            decimal = true;
            advance();
            while (digit(peek()))
                advance();
        }
        if ((peek() == 'e' || peek() == 'E') &&
            (digit(peek(1)) || ((peek(1) == '+' || peek(1) == '-') && digit(peek(2))))) {
            decimal = true;
            advance();
            if (peek() == '+' || peek() == '-')
                advance();
            while (digit(peek()))
                advance();
        }
        t.text = std::string(src_.substr(b, pos_ - b));
        const char* first = t.text.data();
        const char* last = first + t.text.size();
        if (decimal) {
            t.kind = Tok::Decimal;
            auto [p, ec] = std::from_chars(first, last, t.dec_value);
            if (ec != std::errc{} || p != last)
                throw ParseError(line, col, {}, "decimal literal out of range '" + t.text + "'");
        } else {
            t.kind = Tok::Int;
            auto [p, ec] = std::from_chars(first, last, t.int_value);
            if (ec != std::errc{} || p != last)
                throw ParseError(line, col, {}, "integer literal out of range '" + t.text + "'");
        }
    }

    void lex_string(Token& t) {
        advance(); // opening quote
        std::string value;
        for (;;) {
            if (pos_ >= src_.size() || peek() == '\n')
                fail("unterminated string literal", {"'"});
            char c = peek();
            if (c == '\'') {
                advance();
                break;
            }
            if (c == '\\') {
                advance();
                char e = peek();
                if (e != '\\' && e != '\'')
                    fail("unknown escape sequence", {"\\\\", "\\'"});
                value.push_back(e);
                advance();
                continue;
            }
            value.push_back(c);
            advance();
        }
        t.kind = Tok::String;
        t.text = std::move(value);
    }

    void lex_punct(Token& t) {
        static constexpr std::array<std::string_view, 17> puncts = {"->", "::", "<>", "<=", ">=", "<", ">", "=", "+",
                                                                    "-",  "*",  "/",  "(",  ")",  "|", ":", "."};
        for (auto p : puncts) {
            if (src_.substr(pos_, p.size()) == p) {
                for (std::size_t i = 0; i < p.size(); ++i)
                    advance();
                t.kind = Tok::Punct;
                t.text = std::string(p);
                return;
            }
        }
        fail(std::string("unexpected character '") + src_[pos_] + "'");
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

const std::set<std::string> primary_start = {"identifier", "number", "string", "true", "false", "self", "(", "not", "-"};

class Parser {
public:
    explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

    ConstraintSet parse_all() {
        ConstraintSet cs;
        std::map<std::pair<ContextType, std::string>, bool> names;
        while (!at_end()) {
            auto c = parse_declaration();
            if (names.contains({c.context, c.name}))
                throw ParseError(c.span.line, c.span.column, {},
                                 "duplicate constraint name '" + c.name + "' for context " + std::string(to_string(c.context)));
            names[{c.context, c.name}] = true;
            cs.constraints.push_back(std::move(c));
        }
        return cs;
    }

private:
    const Token& cur() const { return toks_[pos_]; }
    const Token& next_tok() const { return toks_[std::min(pos_ + 1, toks_.size() - 1)]; }
    bool at_end() const { return cur().kind == Tok::End; }

    bool is_punct(std::string_view p) const { return cur().kind == Tok::Punct && cur().text == p; }
    bool is_kw(std::string_view k) const { return cur().kind == Tok::Keyword && cur().text == k; }

    [[noreturn]] void fail(std::set<std::string> expected, const std::string& msg) const {
        std::string found = at_end() ? "end of input" : "'" + cur().text + "'";
        throw ParseError(cur().line, cur().column, std::move(expected), msg.empty() ? "unexpected " + found : msg);
    }

    Token take() { return toks_[pos_++]; }

    Token expect_punct(std::string_view p) {
        if (!is_punct(p))
            fail({std::string(p)}, "");
        return take();
    }

    Token expect_kw(std::string_view k) {
        if (!is_kw(k))
            fail({std::string(k)}, "");
        return take();
    }

    Token expect_ident() {
        if (cur().kind != Tok::Ident)
            fail({"identifier"}, "");
        return take();
    }

    static SourceSpan span_of(const Token& a, const Token& b) { return {a.line, a.column, b.end_line, b.end_column}; }
    static SourceSpan join(const SourceSpan& a, const SourceSpan& b) { return {a.line, a.column, b.end_line, b.end_column}; }

    Constraint parse_declaration() {
        Token ctx = expect_kw("context");
        if (cur().kind != Tok::Ident || !parse_context_type(cur().text))
            fail({"Function", "HardwareNode", "Link", "FlowEdge", "Model"}, "");
        auto type = *parse_context_type(take().text);
        expect_kw("inv");
        Token name = expect_ident();
        expect_punct(":");
        scopes_.assign({"self"});
        implicit_depth_.clear();
        auto body = parse_expr();
        if (!at_end() && !is_kw("context"))
            fail({"context", "end of input", "operator"}, "");
        return Constraint{type, name.text, body, join(span_of(ctx, ctx), body->span)};
    }

    ExprPtr parse_expr() {
        auto lhs = parse_or();
        while (is_kw("implies")) {
            take();
            auto rhs = parse_or();
            lhs = make_expr(Binary{BinaryOp::Implies, lhs, rhs}, join(lhs->span, rhs->span));
        }
        return lhs;
    }

    ExprPtr parse_or() {
        auto lhs = parse_and();
        while (is_kw("or")) {
            take();
            auto rhs = parse_and();
            lhs = make_expr(Binary{BinaryOp::Or, lhs, rhs}, join(lhs->span, rhs->span));
        }
        return lhs;
    }

    ExprPtr parse_and() {
        auto lhs = parse_comparison();
        while (is_kw("and")) {
            take();
            auto rhs = parse_comparison();
            lhs = make_expr(Binary{BinaryOp::And, lhs, rhs}, join(lhs->span, rhs->span));
        }
        return lhs;
    }

    std::optional<BinaryOp> comparison_op() const {
        if (cur().kind != Tok::Punct)
            return std::nullopt;
        const auto& t = cur().text;
        if (t == "=") return BinaryOp::Eq;
        if (t == "<>") return BinaryOp::Ne;
        if (t == "<") return BinaryOp::Lt;
        if (t == "<=") return BinaryOp::Le;
        if (t == ">") return BinaryOp::Gt;
        if (t == ">=") return BinaryOp::Ge;
        return std::nullopt;
    }

    ExprPtr parse_comparison() {
        auto lhs = parse_additive();
        if (auto op = comparison_op()) {
            take();
            auto rhs = parse_additive();
            lhs = make_expr(Binary{*op, lhs, rhs}, join(lhs->span, rhs->span));
            if (comparison_op())
                fail({"and", "or", "implies", ")", "context", "end of input"}, "comparison operators are non-associative");
        }
        return lhs;
    }

    ExprPtr parse_additive() {
        auto lhs = parse_multiplicative();
        while (is_punct("+") || is_punct("-")) {
            auto op = take().text == "+" ? BinaryOp::Add : BinaryOp::Sub;
            auto rhs = parse_multiplicative();
            lhs = make_expr(Binary{op, lhs, rhs}, join(lhs->span, rhs->span));
        }
        return lhs;
    }

    ExprPtr parse_multiplicative() {
        auto lhs = parse_unary();
        while (is_punct("*") || is_punct("/")) {
            auto op = take().text == "*" ? BinaryOp::Mul : BinaryOp::Div;
            auto rhs = parse_unary();
            lhs = make_expr(Binary{op, lhs, rhs}, join(lhs->span, rhs->span));
        }
        return lhs;
    }

    ExprPtr parse_unary() {
        if (is_kw("not") || is_punct("-")) {
            Token op = take();
            auto operand = parse_unary();
            return make_expr(Unary{op.text == "not" ? UnaryOp::Not : UnaryOp::Negate, operand},
                             join(span_of(op, op), operand->span));
        }
        return parse_primary();
    }

    bool bound(std::string_view name) const {
        return std::find(scopes_.begin(), scopes_.end(), name) != scopes_.end();
    }

    ExprPtr parse_primary() {
        const Token& t = cur();
        switch (t.kind) {
        case Tok::Int: {
            Token tk = take();
            return make_expr(IntLiteral{tk.int_value}, span_of(tk, tk));
        }
        case Tok::Decimal: {
            Token tk = take();
            return make_expr(DecimalLiteral{tk.dec_value}, span_of(tk, tk));
        }
        case Tok::String: {
            Token tk = take();
            return make_expr(StringLiteral{tk.text}, span_of(tk, tk));
        }
        case Tok::Keyword:
            if (t.text == "true" || t.text == "false") {
                Token tk = take();
                return make_expr(BoolLiteral{tk.text == "true"}, span_of(tk, tk));
            }
            if (t.text == "self") {
                Token tk = take();
                return parse_postfix(make_expr(Variable{"self"}, span_of(tk, tk)));
            }
            fail(primary_start, "");
        case Tok::Ident: {
            Token tk = take();
            if (is_punct("::")) {
                take();
                Token value = cur();
                if (value.kind != Tok::Ident && value.kind != Tok::Keyword)
                    fail({"enum literal"}, "");
                take();
                if (!enum_ordinal(tk.text, value.text))
                    throw ParseError(tk.line, tk.column, {"Asil::<QM|A|B|C|D>", "SafetyMechanism::<none|hot_standby|voting>"},
                                     "unknown enum literal '" + tk.text + "::" + value.text + "'");
                return make_expr(EnumLiteral{tk.text, value.text}, span_of(tk, value));
            }
            ExprPtr base;
            if (bound(tk.text)) {
                base = make_expr(Variable{tk.text}, span_of(tk, tk));
            } else if (!implicit_depth_.empty()) {
                auto it = make_expr(Variable{std::string(implicit_binder)}, span_of(tk, tk));
                base = make_expr(Navigation{it, tk.text}, span_of(tk, tk));
            } else {
                std::set<std::string> vars(scopes_.begin(), scopes_.end());
                throw ParseError(tk.line, tk.column, vars, "unknown variable '" + tk.text + "'");
            }
            return parse_postfix(base);
        }
        case Tok::Punct:
            if (t.text == "(") {
                take();
                auto inner = parse_expr();
                expect_punct(")");
                return parse_postfix(inner);
            }
            [[fallthrough]];
        default:
            fail(primary_start, at_end() ? "unexpected end of input" : "");
        }
    }

    ExprPtr parse_postfix(ExprPtr base) {
        for (;;) {
            if (is_punct(".")) {
                take();
                Token attr = expect_ident();
                base = make_expr(Navigation{base, attr.text}, join(base->span, span_of(attr, attr)));
            } else if (is_punct("->")) {
                take();
                Token name = cur();
                if (name.kind != Tok::Ident || !parse_collection_op(name.text))
                    fail({"forAll", "exists", "select", "collect", "size", "sum", "isUnique", "includes"}, "");
                take();
                auto op = *parse_collection_op(name.text);
                expect_punct("(");
                CollectionCall call{base, op, std::nullopt, nullptr};
                if (takes_binder(op)) {
                    if (is_punct(")"))
                        fail({"identifier", "expression"}, "'" + name.text + "' needs a body");
                    if (cur().kind == Tok::Ident && next_tok().kind == Tok::Punct && next_tok().text == "|") {
                        call.binder = take().text;
                        take(); // |
                        scopes_.push_back(*call.binder);
                        call.argument = parse_expr();
                        scopes_.pop_back();
                    } else {
                        call.binder = std::string(implicit_binder);
                        scopes_.push_back(*call.binder);
                        implicit_depth_.push_back(scopes_.size());
                        call.argument = parse_expr();
                        implicit_depth_.pop_back();
                        scopes_.pop_back();
                    }
                } else if (op == CollectionOp::Includes) {
                    if (is_punct(")"))
                        fail({"expression"}, "'includes' needs an argument");
                    call.argument = parse_expr();
                }
                Token close = expect_punct(")");
                base = make_expr(std::move(call), join(base->span, span_of(close, close)));
            } else {
                return base;
            }
        }
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    std::vector<std::string> scopes_;
    std::vector<std::size_t> implicit_depth_;
};

std::string print_decimal(double v) {
    std::array<char, 512> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed);
    std::string s(buf.data(), ec == std::errc{} ? end : buf.data());
    if (s.empty()) {
        // out of fixed range; scientific still round-trips through the lexer
        auto [e2, ec2] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::scientific);
        return std::string(buf.data(), e2);
    }
    if (s.find('.') == std::string::npos)
        s += ".0";
    return s;
}

std::string quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\\' || c == '\'')
            out.push_back('\\');
        out.push_back(c);
    }
    out.push_back('\'');
    return out;
}

bool postfix_ok(const Expr& e) {
    return std::holds_alternative<Variable>(e.node) || std::holds_alternative<Navigation>(e.node) ||
           std::holds_alternative<CollectionCall>(e.node) || std::holds_alternative<Binary>(e.node) ||
           std::holds_alternative<Unary>(e.node);
}

struct Printer {
    std::string operator()(const IntLiteral& x) const {
        // the grammar has no negative literals; a negative value prints as negation
        if (x.value < 0)
            return "(-" + std::to_string(x.value).substr(1) + ")";
        return std::to_string(x.value);
    }
    std::string operator()(const DecimalLiteral& x) const { return print_decimal(x.value); }
    std::string operator()(const StringLiteral& x) const { return quote(x.value); }
    std::string operator()(const BoolLiteral& x) const { return x.value ? "true" : "false"; }
    std::string operator()(const EnumLiteral& x) const { return x.type + "::" + x.value; }
    std::string operator()(const Variable& x) const { return x.name; }
    std::string operator()(const Navigation& x) const { return object(*x.object) + "." + x.attribute; }
    std::string operator()(const Unary& x) const {
        return std::string("(") + (x.op == UnaryOp::Not ? "not " : "-") + print_expr(*x.operand) + ")";
    }
    std::string operator()(const Binary& x) const {
        return "(" + print_expr(*x.lhs) + " " + std::string(to_string(x.op)) + " " + print_expr(*x.rhs) + ")";
    }
    std::string operator()(const CollectionCall& x) const {
        std::string s = object(*x.source) + "->" + std::string(to_string(x.op)) + "(";
        if (x.binder)
            s += *x.binder + " | ";
        if (x.argument)
            s += print_expr(*x.argument);
        return s + ")";
    }

    static std::string object(const Expr& e) {
        auto s = print_expr(e);
        return postfix_ok(e) ? s : "(" + s + ")";
    }
};

} // namespace

ConstraintSet parse_constraints(std::string_view text) {
    Lexer lexer(text);
    Parser parser(lexer.run());
    return parser.parse_all();
}

std::string print_expr(const Expr& e) {
    return std::visit(Printer{}, e.node);
}

std::string print_constraints(const ConstraintSet& cs) {
    std::string out;
    for (const auto& c : cs.constraints)
        out += "context " + std::string(to_string(c.context)) + " inv " + c.name + ": " + print_expr(*c.body) + "\n";
    return out;
}

ConstraintSet merge_constraint_sets(const ConstraintSet& base, const ConstraintSet& extra) {
    ConstraintSet out;
    for (const auto& c : base.constraints) {
        bool replaced = std::any_of(extra.constraints.begin(), extra.constraints.end(), [&](const Constraint& e) {
            return e.context == c.context && e.name == c.name;
        });
        if (!replaced)
            out.constraints.push_back(c);
    }
    out.constraints.insert(out.constraints.end(), extra.constraints.begin(), extra.constraints.end());
    return out;
}

} // namespace forge::ocl
