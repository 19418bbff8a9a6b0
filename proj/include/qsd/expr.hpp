#pragma once

#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace qsd {

struct ParseError : std::runtime_error {
  int line, col;
  ParseError(int l, int c, const std::string& msg)
      : std::runtime_error("line " + std::to_string(l) + ", column " +
                           std::to_string(c) + ": " + msg),
        line(l),
        col(c) {}
};

struct EvalError : std::runtime_error {
  double at_x;
  EvalError(double x, const std::string& msg)
      : std::runtime_error(msg + " at x = " + std::to_string(x)), at_x(x) {}
};

// Arithmetic expressions over the free variable x: + - * / min max pow,
// literals and parentheses. Total over doubles except division by zero.
struct Expr {
  enum class Kind { Number, Var, Add, Sub, Mul, Div, Neg, Min, Max, Pow };
  Kind kind;
  double value = 0;
  std::shared_ptr<const Expr> a, b;
  int line = 0, col = 0;

  double eval(double x) const {
    switch (kind) {
      case Kind::Number: return value;
      case Kind::Var: return x;
      case Kind::Add: return a->eval(x) + b->eval(x);
      case Kind::Sub: return a->eval(x) - b->eval(x);
      case Kind::Mul: return a->eval(x) * b->eval(x);
      case Kind::Div: {
        double d = b->eval(x);
        if (d == 0.0) throw EvalError(x, "division by zero");
        return a->eval(x) / d;
      }
      case Kind::Neg: return -a->eval(x);
      case Kind::Min: return std::fmin(a->eval(x), b->eval(x));
      case Kind::Max: return std::fmax(a->eval(x), b->eval(x));
      case Kind::Pow: return std::pow(a->eval(x), b->eval(x));
    }
    return 0;
  }
};

using ExprPtr = std::shared_ptr<const Expr>;

inline bool structurally_equal(const Expr& a, const Expr& b) {
  if (a.kind != b.kind) return false;
  if (a.kind == Expr::Kind::Number) return a.value == b.value;
  if (static_cast<bool>(a.a) != static_cast<bool>(b.a)) return false;
  if (a.a && !structurally_equal(*a.a, *b.a)) return false;
  if (static_cast<bool>(a.b) != static_cast<bool>(b.b)) return false;
  if (a.b && !structurally_equal(*a.b, *b.b)) return false;
  return true;
}

// Deterministic printing: fully parenthesized, shortest round-trip literals.
inline std::string print_expr(const Expr& e) {
  auto num = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  switch (e.kind) {
    case Expr::Kind::Number: return num(e.value);
    case Expr::Kind::Var: return "x";
    case Expr::Kind::Add:
      return "(" + print_expr(*e.a) + " + " + print_expr(*e.b) + ")";
    case Expr::Kind::Sub:
      return "(" + print_expr(*e.a) + " - " + print_expr(*e.b) + ")";
    case Expr::Kind::Mul:
      return "(" + print_expr(*e.a) + " * " + print_expr(*e.b) + ")";
    case Expr::Kind::Div:
      return "(" + print_expr(*e.a) + " / " + print_expr(*e.b) + ")";
    case Expr::Kind::Neg: return "(-" + print_expr(*e.a) + ")";
    case Expr::Kind::Min:
      return "min(" + print_expr(*e.a) + ", " + print_expr(*e.b) + ")";
    case Expr::Kind::Max:
      return "max(" + print_expr(*e.a) + ", " + print_expr(*e.b) + ")";
    case Expr::Kind::Pow:
      return "pow(" + print_expr(*e.a) + ", " + print_expr(*e.b) + ")";
  }
  return "";
}

namespace detail {

struct Token {
  enum class Type { Number, Ident, Symbol, End };
  Type type = Type::End;
  double number = 0;
  std::string text;
  int line = 1, col = 1;
};

class Lexer {
 public:
  Lexer(std::string_view src, int line) : src_(src), line_(line) { advance(); }

  const Token& peek() const { return tok_; }

  Token take() {
    Token t = tok_;
    advance();
    return t;
  }

 private:
  void advance() {
    while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t'))
      ++pos_;
    tok_ = Token{};
    tok_.line = line_;
    tok_.col = static_cast<int>(pos_) + 1;
    if (pos_ >= src_.size()) {
      tok_.type = Token::Type::End;
      return;
    }
    char c = src_[pos_];
    if ((c >= '0' && c <= '9') || c == '.') {
      std::size_t end = pos_;
      while (end < src_.size() &&
             ((src_[end] >= '0' && src_[end] <= '9') || src_[end] == '.' ||
              src_[end] == 'e' || src_[end] == 'E' ||
              ((src_[end] == '+' || src_[end] == '-') && end > pos_ &&
               (src_[end - 1] == 'e' || src_[end - 1] == 'E'))))
        ++end;
      tok_.type = Token::Type::Number;
      tok_.text = std::string(src_.substr(pos_, end - pos_));
      try {
        std::size_t used = 0;
        tok_.number = std::stod(tok_.text, &used);
        if (used != tok_.text.size()) throw std::invalid_argument("");
      } catch (...) {
        throw ParseError(line_, tok_.col, "malformed number '" + tok_.text + "'");
      }
      pos_ = end;
      return;
    }
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_') {
      std::size_t end = pos_;
      while (end < src_.size() &&
             ((src_[end] >= 'a' && src_[end] <= 'z') ||
              (src_[end] >= 'A' && src_[end] <= 'Z') ||
              (src_[end] >= '0' && src_[end] <= '9') || src_[end] == '_'))
        ++end;
      tok_.type = Token::Type::Ident;
      tok_.text = std::string(src_.substr(pos_, end - pos_));
      pos_ = end;
      return;
    }
    tok_.type = Token::Type::Symbol;
    tok_.text = std::string(1, c);
    ++pos_;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_;
  Token tok_;
};

class ExprParser {
 public:
  explicit ExprParser(Lexer& lex) : lex_(lex) {}

  ExprPtr parse() { return sum(); }

 private:
  ExprPtr make(Expr::Kind k, const Token& at, ExprPtr a = nullptr,
               ExprPtr b = nullptr, double v = 0) {
    auto e = std::make_shared<Expr>();
    e->kind = k;
    e->value = v;
    e->a = std::move(a);
    e->b = std::move(b);
    e->line = at.line;
    e->col = at.col;
    return e;
  }

  ExprPtr sum() {
    ExprPtr left = product();
    while (lex_.peek().type == Token::Type::Symbol &&
           (lex_.peek().text == "+" || lex_.peek().text == "-")) {
      Token op = lex_.take();
      ExprPtr right = product(&op);
      left = make(op.text == "+" ? Expr::Kind::Add : Expr::Kind::Sub, op,
                  std::move(left), std::move(right));
    }
    return left;
  }

  ExprPtr product(const Token* owner = nullptr) {
    ExprPtr left = unary(owner);
    while (lex_.peek().type == Token::Type::Symbol &&
           (lex_.peek().text == "*" || lex_.peek().text == "/")) {
      Token op = lex_.take();
      ExprPtr right = unary(&op);
      left = make(op.text == "*" ? Expr::Kind::Mul : Expr::Kind::Div, op,
                  std::move(left), std::move(right));
    }
    return left;
  }

  ExprPtr unary(const Token* owner) {
    if (lex_.peek().type == Token::Type::Symbol && lex_.peek().text == "-") {
      Token op = lex_.take();
      return make(Expr::Kind::Neg, op, unary(&op));
    }
    return primary(owner);
  }

  ExprPtr primary(const Token* owner) {
    const Token& t = lex_.peek();
    if (t.type == Token::Type::Number) {
      Token tok = lex_.take();
      return make(Expr::Kind::Number, tok, nullptr, nullptr, tok.number);
    }
    if (t.type == Token::Type::Ident) {
      Token tok = lex_.take();
      if (tok.text == "x") return make(Expr::Kind::Var, tok);
      Expr::Kind k;
      if (tok.text == "min")
        k = Expr::Kind::Min;
      else if (tok.text == "max")
        k = Expr::Kind::Max;
      else if (tok.text == "pow")
        k = Expr::Kind::Pow;
      else
        throw ParseError(tok.line, tok.col,
                         "unknown identifier '" + tok.text + "'");
      expect_symbol("(");
      ExprPtr a = sum();
      expect_symbol(",");
      ExprPtr b = sum();
      expect_symbol(")");
      return make(k, tok, std::move(a), std::move(b));
    }
    if (t.type == Token::Type::Symbol && t.text == "(") {
      lex_.take();
      ExprPtr inner = sum();
      expect_symbol(")");
      return inner;
    }
    // a missing operand points at the operator that demanded it
    if (owner)
      throw ParseError(owner->line, owner->col,
                       "operator '" + owner->text + "' is missing an operand");
    throw ParseError(t.line, t.col, "expected an expression");
  }

  void expect_symbol(const std::string& s) {
    const Token& t = lex_.peek();
    if (t.type != Token::Type::Symbol || t.text != s)
      throw ParseError(t.line, t.col, "expected '" + s + "'");
    lex_.take();
  }

  Lexer& lex_;
};

}  // namespace detail

// Parse one standalone expression (used for the weight override flag).
inline ExprPtr parse_expr(const std::string& text, int line = 1) {
  detail::Lexer lex(text, line);
  detail::ExprParser parser(lex);
  ExprPtr e = parser.parse();
  const auto& t = lex.peek();
  if (t.type != detail::Token::Type::End)
    throw ParseError(t.line, t.col, "trailing input '" + t.text + "'");
  return e;
}

}  // namespace qsd
