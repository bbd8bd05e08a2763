#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>

#include "templar/ast.hpp"

namespace templar {

struct SourcePos {
  int line = 0;   // 1-based; 0 when unknown
  int column = 0; // 1-based
};

/// An error tied to a source position.
class SourceError : public Error {
public:
  SourceError(SourcePos pos, const std::string& message)
      : Error(format(pos, message)), pos_(pos), message_(message) {}

  SourcePos pos() const { return pos_; }
  const std::string& message() const { return message_; }

private:
  static std::string format(SourcePos pos, const std::string& message) {
    if (pos.line == 0) return message;
    return std::to_string(pos.line) + ":" + std::to_string(pos.column) + ": " + message;
  }
  SourcePos pos_;
  std::string message_;
};

class SyntaxError : public SourceError {
public:
  using SourceError::SourceError;
};

class ValidationError : public SourceError {
public:
  using SourceError::SourceError;
};

enum class ValueType { Any, Int, Bool };

namespace detail {

inline ValueType hole_value_type(const Exp& e, SourcePos pos) {
  if (const auto* h = std::get_if<OpHole>(&e.node))
    return h->kind == HoleKind::Logic || h->kind == HoleKind::Relation ? ValueType::Bool
                                                                         : ValueType::Int;
  if (std::holds_alternative<IntValHole>(e.node) || std::holds_alternative<IntIdHole>(e.node))
    return ValueType::Int;
  if (const auto* a = std::get_if<AltHole>(&e.node)) {
    ValueType t = ValueType::Any;
    for (const auto& c : a->cands) {
      ValueType ct = hole_value_type(*c, pos);
      if (ct == ValueType::Any) continue;
      if (t != ValueType::Any && t != ct)
        throw ValidationError(pos, "alt() mixes integer and boolean candidates");
      t = ct;
    }
    return t;
  }
  return ValueType::Any;
}

class Validator {
public:
  Validator(const Program& p, std::span<const SourcePos> decl_pos,
            std::span<const SourcePos> stmt_pos)
      : p_(p), decl_pos_(decl_pos), stmt_pos_(stmt_pos) {}

  void run() {
    for (std::size_t i = 0; i < p_.decls.size(); ++i) {
      const auto& d = p_.decls[i];
      const SourcePos pos = at(decl_pos_, i);
      if (!names_.insert(d.name).second)
        throw ValidationError(pos, "duplicate declaration of '" + d.name + "'");
      if (!d.init) throw ValidationError(pos, "declaration of '" + d.name + "' has no initializer");
      const bool literal = std::holds_alternative<Num>(d.init->node);
      const bool input = std::holds_alternative<IntValHole>(d.init->node) && d.init->eval;
      if (!literal && !input)
        throw ValidationError(pos, "initializer of '" + d.name +
                                       "' must be an integer literal or intVal(...).eval()");
      if (input) check_exp(*d.init, pos, false);
    }
    if (p_.stmts.empty()) throw ValidationError({}, "program has no statements");
    std::set<std::string> labels;
    for (std::size_t i = 0; i < p_.stmts.size(); ++i) {
      const auto& s = p_.stmts[i];
      if (s.label && !labels.insert(*s.label).second)
        throw ValidationError(at(stmt_pos_, i), "duplicate label '" + *s.label + "'");
    }
    for (std::size_t i = 0; i < p_.stmts.size(); ++i) {
      const auto& s = p_.stmts[i];
      const SourcePos pos = at(stmt_pos_, i);
      std::visit(
          [&](const auto& k) {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, Assign>) {
              require_declared(k.target, pos);
              check_exp(*k.value, pos, false);
            } else if constexpr (std::is_same_v<T, If>) {
              require_label(labels, k.label, pos);
              check_exp(*k.cond, pos, false);
            } else if constexpr (std::is_same_v<T, Goto>) {
              require_label(labels, k.label, pos);
            }
          },
          s.kind);
    }
  }

private:
  static SourcePos at(std::span<const SourcePos> v, std::size_t i) {
    return i < v.size() ? v[i] : SourcePos{};
  }

  void require_declared(const std::string& name, SourcePos pos) const {
    if (!names_.contains(name)) throw ValidationError(pos, "undeclared identifier '" + name + "'");
  }

  static void require_label(const std::set<std::string>& labels, const std::string& l,
                            SourcePos pos) {
    if (!labels.contains(l)) throw ValidationError(pos, "undefined label '" + l + "'");
  }

  // inside_hole: e is a (transitive) child of a hole root.
  void check_exp(const Exp& e, SourcePos pos, bool inside_hole) const {
    if (e.is_hole()) {
      if (inside_hole && e.eval)
        throw ValidationError(pos, ".eval() may only appear on the outermost node of a hole");
      if (!inside_hole && !e.eval)
        throw ValidationError(pos, "hole is missing .eval() on its outermost node");
    } else if (e.eval) {
      throw ValidationError(pos, ".eval() applied to a concrete expression");
    }
    const bool in_hole = inside_hole || e.is_hole();
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, Var>) {
            require_declared(n.name, pos);
          } else if constexpr (std::is_same_v<T, IntValHole>) {
            if (n.min > n.max) throw ValidationError(pos, "intVal() range has min > max");
          } else if constexpr (std::is_same_v<T, IntIdHole>) {
            for (const auto& name : n.names) require_declared(name, pos);
          } else if constexpr (std::is_same_v<T, OpHole>) {
            if (n.ops.empty() || !n.ops.subset_of(all_ops(n.kind)))
              throw ValidationError(pos, "invalid operator set for " + std::string(spelling(n.kind)));
            const ValueType want_not =
                n.kind == HoleKind::Logic ? ValueType::Int : ValueType::Bool;
            for (const ExpPtr* c : {&n.lhs, &n.rhs})
              if (hole_value_type(**c, pos) == want_not)
                throw ValidationError(pos, std::string(spelling(n.kind)) +
                                               "() operand has the wrong value type");
          } else if constexpr (std::is_same_v<T, AltHole>) {
            if (n.cands.empty()) throw ValidationError(pos, "alt() needs at least one candidate");
            (void)hole_value_type(e, pos);
          }
        },
        e.node);
    for_each_child(e, [&](const ExpPtr& c) {
      if (!c) throw ValidationError(pos, "null expression");
      check_exp(*c, pos, in_hole);
    });
  }

  const Program& p_;
  std::span<const SourcePos> decl_pos_;
  std::span<const SourcePos> stmt_pos_;
  std::unordered_set<std::string> names_;
};

} // namespace detail

/// Checks the well-formedness invariants of programs and templates.
/// Throws ValidationError on the first violation.
inline void validate(const Program& p, std::span<const SourcePos> decl_pos = {},
                     std::span<const SourcePos> stmt_pos = {}) {
  detail::Validator(p, decl_pos, stmt_pos).run();
}

namespace detail {

enum class Tok {
  Ident, Int, Semi, Colon, Assign, LParen, RParen, Comma, Dot,
  Plus, Minus, OrOr, AndAnd, EqEq, NotEq, Less, End
};

struct Token {
  Tok kind;
  std::string_view text;
  SourcePos pos;
};

class Lexer {
public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      const SourcePos pos{line_, col_};
      if (i_ >= src_.size()) {
        out.push_back({Tok::End, {}, pos});
        return out;
      }
      const char c = src_[i_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::size_t j = i_;
        while (j < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[j])) || src_[j] == '_'))
          ++j;
        out.push_back({Tok::Ident, take(j - i_), pos});
        continue;
      }
      if (std::isdigit(static_cast<unsigned char>(c))) {
        std::size_t j = i_;
        while (j < src_.size() && std::isdigit(static_cast<unsigned char>(src_[j]))) ++j;
        out.push_back({Tok::Int, take(j - i_), pos});
        continue;
      }
      auto two = [&](char a, char b) {
        return c == a && i_ + 1 < src_.size() && src_[i_ + 1] == b;
      };
      if (two('|', '|')) out.push_back({Tok::OrOr, take(2), pos});
      else if (two('&', '&')) out.push_back({Tok::AndAnd, take(2), pos});
      else if (two('=', '=')) out.push_back({Tok::EqEq, take(2), pos});
      else if (two('!', '=')) out.push_back({Tok::NotEq, take(2), pos});
      else {
        Tok k;
        switch (c) {
        case ';': k = Tok::Semi; break;
        case ':': k = Tok::Colon; break;
        case '=': k = Tok::Assign; break;
        case '(': k = Tok::LParen; break;
        case ')': k = Tok::RParen; break;
        case ',': k = Tok::Comma; break;
        case '.': k = Tok::Dot; break;
        case '+': k = Tok::Plus; break;
        case '-': k = Tok::Minus; break;
        case '<': k = Tok::Less; break;
        default:
          throw SyntaxError(pos, std::string("unexpected character '") + c + "'");
        }
        out.push_back({k, take(1), pos});
      }
    }
  }

private:
  std::string_view take(std::size_t n) {
    auto t = src_.substr(i_, n);
    for (std::size_t k = 0; k < n; ++k) advance();
    return t;
  }
  void advance() {
    if (src_[i_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++i_;
  }
  void skip_space() {
    while (i_ < src_.size()) {
      if (std::isspace(static_cast<unsigned char>(src_[i_]))) {
        advance();
      } else if (src_.substr(i_, 2) == "//") {
        while (i_ < src_.size() && src_[i_] != '\n') advance();
      } else {
        break;
      }
    }
  }

  std::string_view src_;
  std::size_t i_ = 0;
  int line_ = 1;
  int col_ = 1;
};

inline bool is_keyword(std::string_view s) {
  return s == "var" || s == "if" || s == "goto" || s == "halt";
}

class Parser {
public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  Program run(std::vector<SourcePos>& decl_pos, std::vector<SourcePos>& stmt_pos) {
    Program p;
    while (peek().kind == Tok::Ident && peek().text == "var") {
      decl_pos.push_back(peek().pos);
      next();
      Decl d;
      d.name = ident("variable name");
      expect(Tok::Assign, "'='");
      if (peek().kind == Tok::Int || peek().kind == Tok::Minus)
        d.init = num(integer());
      else
        d.init = primary();
      expect(Tok::Semi, "';'");
      p.decls.push_back(std::move(d));
    }
    while (peek().kind != Tok::End) {
      stmt_pos.push_back(peek().pos);
      p.stmts.push_back(statement());
    }
    if (p.stmts.empty()) throw SyntaxError(peek().pos, "expected at least one statement");
    return p;
  }

private:
  const Token& peek(std::size_t k = 0) const {
    return toks_[std::min(pos_ + k, toks_.size() - 1)];
  }
  const Token& next() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }
  [[noreturn]] void fail(const std::string& what) const {
    const Token& t = peek();
    const std::string got = t.kind == Tok::End ? "end of input" : "'" + std::string(t.text) + "'";
    throw SyntaxError(t.pos, "expected " + what + ", got " + got);
  }
  void expect(Tok k, const char* what) {
    if (peek().kind != k) fail(what);
    next();
  }
  std::string ident(const char* what) {
    if (peek().kind != Tok::Ident || is_keyword(peek().text)) fail(what);
    return std::string(next().text);
  }

  std::int64_t integer() {
    const bool neg = peek().kind == Tok::Minus;
    if (neg) next();
    if (peek().kind != Tok::Int) fail("integer literal");
    const Token& t = next();
    std::uint64_t mag = 0;
    auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), mag);
    const std::uint64_t limit = neg ? (std::uint64_t{1} << 63) : (std::uint64_t{1} << 63) - 1;
    if (ec != std::errc{} || mag > limit)
      throw SyntaxError(t.pos, "integer literal out of 64-bit range");
    return neg ? static_cast<std::int64_t>(std::uint64_t{0} - mag) : static_cast<std::int64_t>(mag);
  }

  Stmt statement() {
    Stmt s;
    if (peek().kind == Tok::Ident && !is_keyword(peek().text) && peek(1).kind == Tok::Colon) {
      s.label = std::string(next().text);
      next();
    }
    if (peek().kind != Tok::Ident) fail("statement");
    const std::string_view head = peek().text;
    if (head == "if") {
      next();
      expect(Tok::LParen, "'('");
      If i;
      i.cond = expression();
      expect(Tok::RParen, "')'");
      i.label = ident("label");
      s.kind = std::move(i);
    } else if (head == "goto") {
      next();
      s.kind = Goto{ident("label")};
    } else if (head == "halt") {
      next();
      s.kind = Halt{};
    } else {
      Assign a;
      a.target = ident("statement");
      expect(Tok::Assign, "'='");
      a.value = expression();
      s.kind = std::move(a);
    }
    expect(Tok::Semi, "';'");
    return s;
  }

  static std::optional<BinOp> binop(Tok k) {
    switch (k) {
    case Tok::Plus: return BinOp::Add;
    case Tok::Minus: return BinOp::Sub;
    case Tok::OrOr: return BinOp::Or;
    case Tok::AndAnd: return BinOp::And;
    case Tok::EqEq: return BinOp::Eq;
    case Tok::NotEq: return BinOp::Ne;
    case Tok::Less: return BinOp::Lt;
    default: return std::nullopt;
    }
  }

  ExpPtr expression(int min_prec = 1) {
    ExpPtr lhs = primary();
    for (;;) {
      auto op = binop(peek().kind);
      if (!op || precedence(*op) < min_prec) return lhs;
      next();
      ExpPtr rhs = expression(precedence(*op) + 1);
      lhs = bin(*op, std::move(lhs), std::move(rhs));
    }
  }

  ExpPtr primary() {
    const Token& t = peek();
    if (t.kind == Tok::Int || t.kind == Tok::Minus) return num(integer());
    if (t.kind == Tok::LParen) {
      next();
      ExpPtr e = expression();
      expect(Tok::RParen, "')'");
      return e;
    }
    if (t.kind == Tok::Ident && !is_keyword(t.text)) {
      if (peek(1).kind == Tok::LParen) return hole();
      return var(std::string(next().text));
    }
    fail("expression");
  }

  OpSet op_list(HoleKind kind) {
    OpSet ops;
    if (peek().kind != Tok::Semi) return all_ops(kind);
    next();
    do {
      const Token& t = peek();
      auto op = binop(t.kind);
      if (!op) fail("operator");
      next();
      if (!all_ops(kind).contains(*op))
        throw SyntaxError(t.pos, "operator '" + std::string(t.text) + "' not valid in " +
                                     std::string(spelling(kind)) + "()");
      ops.insert(*op);
    } while (peek().kind == Tok::Comma && (next(), true));
    return ops;
  }

  ExpPtr hole() {
    const Token& name = next();
    next(); // '('
    ExpPtr h;
    if (name.text == "intVal") {
      if (peek().kind == Tok::RParen) {
        h = int_val();
      } else {
        const std::int64_t lo = integer();
        expect(Tok::Comma, "','");
        const std::int64_t hi = integer();
        h = int_val(lo, hi);
      }
    } else if (name.text == "intId") {
      std::vector<std::string> names;
      if (peek().kind != Tok::RParen) {
        names.push_back(ident("identifier"));
        while (peek().kind == Tok::Comma) {
          next();
          names.push_back(ident("identifier"));
        }
      }
      h = int_id(std::move(names));
    } else if (name.text == "arithmetic" || name.text == "relation" || name.text == "logic") {
      const HoleKind kind = name.text == "arithmetic" ? HoleKind::Arithmetic
                            : name.text == "relation" ? HoleKind::Relation
                                                      : HoleKind::Logic;
      ExpPtr l = expression();
      expect(Tok::Comma, "','");
      ExpPtr r = expression();
      h = op_hole(kind, std::move(l), std::move(r), op_list(kind));
    } else if (name.text == "alt") {
      std::vector<ExpPtr> cands{expression()};
      while (peek().kind == Tok::Comma) {
        next();
        cands.push_back(expression());
      }
      h = alt(std::move(cands));
    } else {
      throw SyntaxError(name.pos, "unknown hole form '" + std::string(name.text) + "'");
    }
    expect(Tok::RParen, "')'");
    if (peek().kind == Tok::Dot) {
      next();
      if (peek().kind != Tok::Ident || peek().text != "eval") fail("'eval'");
      next();
      expect(Tok::LParen, "'('");
      expect(Tok::RParen, "')'");
      h = eval(std::move(h));
    }
    return h;
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

} // namespace detail

/// Parses and validates `.tj` source. The result is a template iff it has holes.
inline Program parse(std::string_view text) {
  std::vector<SourcePos> decl_pos, stmt_pos;
  Program p = detail::Parser(detail::Lexer(text).run()).run(decl_pos, stmt_pos);
  validate(p, decl_pos, stmt_pos);
  return p;
}

} // namespace templar
