#pragma once

#include <charconv>
#include <cmath>
#include <cstring>
#include <memory>
#include <string>
#include <utility>

#include "propnormal/common.hpp"

namespace propnormal {

/// Value, gradient, and Hessian of a scalar function at one point. The
/// Hessian is symmetric by construction: mirrored entries are assembled from
/// the same arithmetic, so they are bit-identical.
struct Jet2 {
  double value = 0.0;
  Vec grad;
  Mat hess;
};

namespace detail {

/// u v^T + v u^T with both triangles written from one computed product, so
/// the result is exactly symmetric.
inline Mat sym_rank2(const Vec& u, const Vec& v) {
  const Eigen::Index n = u.size();
  Mat s(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      double m = u[i] * v[j] + v[i] * u[j];
      s(i, j) = m;
      s(j, i) = m;
    }
  }
  return s;
}

/// u u^T, exactly symmetric.
inline Mat sym_rank1(const Vec& u) {
  const Eigen::Index n = u.size();
  Mat s(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      double m = u[i] * u[j];
      s(i, j) = m;
      s(j, i) = m;
    }
  }
  return s;
}

/// f(u) by the chain rule, given f, f', f'' at u.value.
inline Jet2 jet_chain(const Jet2& u, double f, double df, double ddf) {
  Jet2 r;
  r.value = f;
  r.grad = df * u.grad;
  r.hess = df * u.hess + ddf * sym_rank1(u.grad);
  return r;
}

}  // namespace detail

/// Immutable scalar expression over variables x1..xn.
///
/// Grammar (whitespace insignificant, numbers decimal with optional
/// exponent):
///
///   expr   := term (('+'|'-') term)*
///   term   := factor (('*'|'/') factor)*
///   factor := base ('^' base)?
///   base   := number | 'x'digits | func '(' expr ')' | '(' expr ')'
///           | '-' base
///   func   := sin | cos | exp | log | sqrt | abs
class Expr {
 public:
  enum class UnaryOp { Neg, Sin, Cos, Exp, Log, Sqrt, Abs };
  enum class BinaryOp { Add, Sub, Mul, Div, Pow };
  enum class Kind { Constant, Variable, Unary, Binary };

  struct Node;
  using NodePtr = std::shared_ptr<const Node>;

  struct Node {
    Kind kind;
    double constant = 0.0;
    int var_index = 0;  // 1-based
    UnaryOp uop = UnaryOp::Neg;
    BinaryOp bop = BinaryOp::Add;
    NodePtr lhs;
    NodePtr rhs;
  };

  Expr() = default;

  static Expr constant(double c, int dim) {
    check_dim(dim);
    auto n = std::make_shared<Node>();
    n->kind = Kind::Constant;
    n->constant = c;
    return Expr(std::move(n), dim);
  }

  static Expr variable(int index, int dim) {
    check_dim(dim);
    if (index < 1 || index > dim)
      throw ParseError("variable index x" + std::to_string(index) +
                           " out of range 1.." + std::to_string(dim),
                       0);
    auto n = std::make_shared<Node>();
    n->kind = Kind::Variable;
    n->var_index = index;
    return Expr(std::move(n), dim);
  }

  static Expr unary(UnaryOp op, const Expr& a) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Unary;
    n->uop = op;
    n->lhs = a.root_;
    return Expr(std::move(n), a.dim_);
  }

  static Expr binary(BinaryOp op, const Expr& a, const Expr& b) {
    if (a.dim_ != b.dim_) throw Error("operand dimension mismatch");
    auto n = std::make_shared<Node>();
    n->kind = Kind::Binary;
    n->bop = op;
    n->lhs = a.root_;
    n->rhs = b.root_;
    return Expr(std::move(n), a.dim_);
  }

  static Expr parse(const std::string& text, int dim);

  int dim() const { return dim_; }
  const NodePtr& root() const { return root_; }

  bool same_tree(const Expr& other) const {
    return dim_ == other.dim_ && node_equal(root_.get(), other.root_.get());
  }

  std::string unparse() const {
    std::string out;
    print(root_.get(), out);
    return out;
  }

  double eval(const Vec& x) const {
    check_point(x);
    double v = eval_node(root_.get(), x);
    if (!std::isfinite(v)) throw EvalError("expression value is non-finite");
    return v;
  }

  Jet2 eval_jet2(const Vec& x) const {
    check_point(x);
    Jet2 j = jet_node(root_.get(), x);
    bool ok = std::isfinite(j.value) && j.grad.allFinite() && j.hess.allFinite();
    if (!ok) throw EvalError("expression jet overflowed to a non-finite value");
    return j;
  }

 private:
  Expr(NodePtr root, int dim) : root_(std::move(root)), dim_(dim) {}

  static void check_dim(int dim) {
    if (dim < 2)
      throw ParseError("dimension must be at least 2, got " +
                           std::to_string(dim),
                       0);
  }

  void check_point(const Vec& x) const {
    if (static_cast<int>(x.size()) != dim_)
      throw EvalError("point dimension " + std::to_string(x.size()) +
                      " does not match expression dimension " +
                      std::to_string(dim_));
    if (!x.allFinite()) throw EvalError("evaluation point is not finite");
  }

  static bool node_equal(const Node* a, const Node* b) {
    if (a == b) return true;
    if (!a || !b || a->kind != b->kind) return false;
    switch (a->kind) {
      case Kind::Constant:
        return bits(a->constant) == bits(b->constant);
      case Kind::Variable:
        return a->var_index == b->var_index;
      case Kind::Unary:
        return a->uop == b->uop && node_equal(a->lhs.get(), b->lhs.get());
      case Kind::Binary:
        return a->bop == b->bop && node_equal(a->lhs.get(), b->lhs.get()) &&
               node_equal(a->rhs.get(), b->rhs.get());
    }
    return false;
  }

  static std::uint64_t bits(double v) {
    std::uint64_t u;
    static_assert(sizeof u == sizeof v);
    std::memcpy(&u, &v, sizeof u);
    return u;
  }

  // ---- printing ----------------------------------------------------------

  // A node prints as a grammar `base` without parentheses iff it is a
  // number, a variable, a function call, or a negation.
  static bool prints_as_base(const Node* n) {
    if (n->kind == Kind::Constant || n->kind == Kind::Variable) return true;
    return n->kind == Kind::Unary;
  }

  static void print_base(const Node* n, std::string& out) {
    if (prints_as_base(n)) {
      print(n, out);
    } else {
      out += "(";
      print(n, out);
      out += ")";
    }
  }

  static void print(const Node* n, std::string& out) {
    switch (n->kind) {
      case Kind::Constant:
        out += format_double(n->constant);
        return;
      case Kind::Variable:
        out += "x" + std::to_string(n->var_index);
        return;
      case Kind::Unary:
        switch (n->uop) {
          case UnaryOp::Neg:
            out += "-";
            print_base(n->lhs.get(), out);
            return;
          case UnaryOp::Sin: out += "sin("; break;
          case UnaryOp::Cos: out += "cos("; break;
          case UnaryOp::Exp: out += "exp("; break;
          case UnaryOp::Log: out += "log("; break;
          case UnaryOp::Sqrt: out += "sqrt("; break;
          case UnaryOp::Abs: out += "abs("; break;
        }
        print(n->lhs.get(), out);
        out += ")";
        return;
      case Kind::Binary:
        print_binary(n, out);
        return;
    }
  }

  static bool is_add_level(const Node* n) {
    return n->kind == Kind::Binary &&
           (n->bop == BinaryOp::Add || n->bop == BinaryOp::Sub);
  }

  static bool is_mul_level(const Node* n) {
    return n->kind == Kind::Binary &&
           (n->bop == BinaryOp::Mul || n->bop == BinaryOp::Div);
  }

  static void print_paren(const Node* n, std::string& out, bool paren) {
    if (paren) out += "(";
    print(n, out);
    if (!paren) return;
    out += ")";
  }

  static void print_binary(const Node* n, std::string& out) {
    const Node* l = n->lhs.get();
    const Node* r = n->rhs.get();
    switch (n->bop) {
      case BinaryOp::Add:
      case BinaryOp::Sub:
        // left-associative chain: only a right operand at the same level
        // needs parentheses to survive re-parsing
        print(l, out);
        out += n->bop == BinaryOp::Add ? " + " : " - ";
        print_paren(r, out, is_add_level(r));
        return;
      case BinaryOp::Mul:
      case BinaryOp::Div:
        print_paren(l, out, is_add_level(l));
        out += n->bop == BinaryOp::Mul ? "*" : "/";
        print_paren(r, out, is_add_level(r) || is_mul_level(r));
        return;
      case BinaryOp::Pow:
        print_base(l, out);
        out += "^";
        print_base(r, out);
        return;
    }
  }

  // ---- evaluation --------------------------------------------------------

  static const char* op_name(UnaryOp op) {
    switch (op) {
      case UnaryOp::Neg: return "neg";
      case UnaryOp::Sin: return "sin";
      case UnaryOp::Cos: return "cos";
      case UnaryOp::Exp: return "exp";
      case UnaryOp::Log: return "log";
      case UnaryOp::Sqrt: return "sqrt";
      case UnaryOp::Abs: return "abs";
    }
    return "?";
  }

  [[noreturn]] static void domain_error(const std::string& op, double arg) {
    throw EvalError("domain error in " + op +
                    ": argument = " + format_double(arg));
  }

  static double eval_node(const Node* n, const Vec& x) {
    switch (n->kind) {
      case Kind::Constant:
        return n->constant;
      case Kind::Variable:
        return x[n->var_index - 1];
      case Kind::Unary: {
        double u = eval_node(n->lhs.get(), x);
        switch (n->uop) {
          case UnaryOp::Neg: return -u;
          case UnaryOp::Sin: return std::sin(u);
          case UnaryOp::Cos: return std::cos(u);
          case UnaryOp::Exp: return std::exp(u);
          case UnaryOp::Log:
            if (u <= 0.0) domain_error("log", u);
            return std::log(u);
          case UnaryOp::Sqrt:
            if (u < 0.0) domain_error("sqrt", u);
            return std::sqrt(u);
          case UnaryOp::Abs: return std::fabs(u);
        }
        return 0.0;
      }
      case Kind::Binary: {
        double a = eval_node(n->lhs.get(), x);
        double b = eval_node(n->rhs.get(), x);
        switch (n->bop) {
          case BinaryOp::Add: return a + b;
          case BinaryOp::Sub: return a - b;
          case BinaryOp::Mul: return a * b;
          case BinaryOp::Div:
            if (b == 0.0) domain_error("division", b);
            return a / b;
          case BinaryOp::Pow:
            if (b == std::nearbyint(b)) {
              if (a == 0.0 && b < 0.0) domain_error("pow", a);
              return std::pow(a, b);
            }
            if (a <= 0.0)
              throw EvalError(
                  "domain error in pow: non-integer exponent " +
                  format_double(b) + " requires a positive base, got " +
                  format_double(a));
            return std::pow(a, b);
        }
        return 0.0;
      }
    }
    return 0.0;
  }

  static Jet2 jet_const(double c, int n) {
    Jet2 j;
    j.value = c;
    j.grad = Vec::Zero(n);
    j.hess = Mat::Zero(n, n);
    return j;
  }

  Jet2 jet_node(const Node* n, const Vec& x) const {
    const int d = dim_;
    switch (n->kind) {
      case Kind::Constant:
        return jet_const(n->constant, d);
      case Kind::Variable: {
        Jet2 j = jet_const(x[n->var_index - 1], d);
        j.grad[n->var_index - 1] = 1.0;
        return j;
      }
      case Kind::Unary: {
        Jet2 u = jet_node(n->lhs.get(), x);
        const double v = u.value;
        switch (n->uop) {
          case UnaryOp::Neg: {
            Jet2 r;
            r.value = -v;
            r.grad = -u.grad;
            r.hess = -u.hess;
            return r;
          }
          case UnaryOp::Sin:
            return detail::jet_chain(u, std::sin(v), std::cos(v), -std::sin(v));
          case UnaryOp::Cos:
            return detail::jet_chain(u, std::cos(v), -std::sin(v), -std::cos(v));
          case UnaryOp::Exp: {
            double e = std::exp(v);
            return detail::jet_chain(u, e, e, e);
          }
          case UnaryOp::Log:
            if (v <= 0.0) domain_error("log", v);
            return detail::jet_chain(u, std::log(v), 1.0 / v, -1.0 / (v * v));
          case UnaryOp::Sqrt: {
            // the derivative is unbounded at 0, so 0 is out of domain here
            if (v <= 0.0) domain_error("sqrt", v);
            double s = std::sqrt(v);
            return detail::jet_chain(u, s, 0.5 / s, -0.25 / (s * v));
          }
          case UnaryOp::Abs:
            // non-differentiable at 0: fail loudly instead of picking a
            // subgradient
            if (v == 0.0) domain_error("abs", v);
            if (v > 0.0) return u;
            return detail::jet_chain(u, -v, -1.0, 0.0);
        }
        return jet_const(0.0, d);
      }
      case Kind::Binary: {
        Jet2 a = jet_node(n->lhs.get(), x);
        Jet2 b = jet_node(n->rhs.get(), x);
        switch (n->bop) {
          case BinaryOp::Add: {
            Jet2 r;
            r.value = a.value + b.value;
            r.grad = a.grad + b.grad;
            r.hess = a.hess + b.hess;
            return r;
          }
          case BinaryOp::Sub: {
            Jet2 r;
            r.value = a.value - b.value;
            r.grad = a.grad - b.grad;
            r.hess = a.hess - b.hess;
            return r;
          }
          case BinaryOp::Mul:
            return jet_mul(a, b);
          case BinaryOp::Div:
            return jet_div(a, b);
          case BinaryOp::Pow:
            return jet_pow(a, b);
        }
        return jet_const(0.0, d);
      }
    }
    return jet_const(0.0, dim_);
  }

  static Jet2 jet_mul(const Jet2& a, const Jet2& b) {
    Jet2 r;
    r.value = a.value * b.value;
    r.grad = b.value * a.grad + a.value * b.grad;
    r.hess = b.value * a.hess + a.value * b.hess +
             detail::sym_rank2(a.grad, b.grad);
    return r;
  }

  static Jet2 jet_div(const Jet2& a, const Jet2& b) {
    if (b.value == 0.0) domain_error("division", b.value);
    Jet2 r;
    r.value = a.value / b.value;
    r.grad = (a.grad - r.value * b.grad) / b.value;
    r.hess = (a.hess - detail::sym_rank2(r.grad, b.grad) - r.value * b.hess) /
             b.value;
    return r;
  }

  static Jet2 jet_pow(const Jet2& a, const Jet2& b) {
    const bool const_exponent = b.grad.isZero(0.0) && b.hess.isZero(0.0);
    const bool integer_exponent =
        const_exponent && b.value == std::nearbyint(b.value) &&
        std::fabs(b.value) < 2147483647.0;
    if (integer_exponent) {
      const double m = b.value;
      const double av = a.value;
      if (av == 0.0 && m < 0.0) domain_error("pow", av);
      double f = std::pow(av, m);
      double df = m == 0.0 ? 0.0 : m * std::pow(av, m - 1.0);
      double ddf =
          (m == 0.0 || m == 1.0) ? 0.0 : m * (m - 1.0) * std::pow(av, m - 2.0);
      return detail::jet_chain(a, f, df, ddf);
    }
    if (a.value <= 0.0)
      throw EvalError("domain error in pow: non-integer exponent requires a "
                      "positive base, got " +
                      format_double(a.value));
    // a^b = exp(b log a), propagated through the already-symmetric jet ops
    Jet2 la = detail::jet_chain(a, std::log(a.value), 1.0 / a.value,
                                -1.0 / (a.value * a.value));
    Jet2 p = jet_mul(b, la);
    double e = std::exp(p.value);
    return detail::jet_chain(p, e, e, e);
  }

  NodePtr root_;
  int dim_ = 0;
};

namespace detail {

class Parser {
 public:
  Parser(const std::string& text, int dim) : text_(text), dim_(dim) {}

  Expr run() {
    Expr e = parse_expr();
    skip_ws();
    if (pos_ != text_.size())
      throw ParseError("unexpected trailing input", pos_);
    return e;
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() &&
           (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' ||
            text_[pos_] == '\r'))
      ++pos_;
  }

  bool peek(char c) {
    skip_ws();
    return pos_ < text_.size() && text_[pos_] == c;
  }

  bool accept(char c) {
    if (!peek(c)) return false;
    ++pos_;
    return true;
  }

  void expect(char c) {
    if (!accept(c))
      throw ParseError(std::string("expected '") + c + "'", pos_);
  }

  Expr parse_expr() {
    Expr e = parse_term();
    while (true) {
      if (accept('+'))
        e = Expr::binary(Expr::BinaryOp::Add, e, parse_term());
      else if (accept('-'))
        e = Expr::binary(Expr::BinaryOp::Sub, e, parse_term());
      else
        return e;
    }
  }

  Expr parse_term() {
    Expr e = parse_factor();
    while (true) {
      if (accept('*'))
        e = Expr::binary(Expr::BinaryOp::Mul, e, parse_factor());
      else if (accept('/'))
        e = Expr::binary(Expr::BinaryOp::Div, e, parse_factor());
      else
        return e;
    }
  }

  Expr parse_factor() {
    Expr e = parse_base();
    if (accept('^')) e = Expr::binary(Expr::BinaryOp::Pow, e, parse_base());
    return e;
  }

  Expr parse_base() {
    skip_ws();
    if (pos_ >= text_.size()) throw ParseError("unexpected end of input", pos_);
    char c = text_[pos_];
    if (c == '-') {
      ++pos_;
      return Expr::unary(Expr::UnaryOp::Neg, parse_base());
    }
    if (c == '(') {
      ++pos_;
      Expr e = parse_expr();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
      return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c))) return parse_name();
    throw ParseError(std::string("unexpected character '") + c + "'", pos_);
  }

  Expr parse_number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           std::isdigit(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      while (pos_ < text_.size() &&
             std::isdigit(static_cast<unsigned char>(text_[pos_])))
        ++pos_;
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t mark = pos_++;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-'))
        ++pos_;
      if (pos_ >= text_.size() ||
          !std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        pos_ = mark;  // 'e' belonged to something else; not a valid exponent
      } else {
        while (pos_ < text_.size() &&
               std::isdigit(static_cast<unsigned char>(text_[pos_])))
          ++pos_;
      }
    }
    double value = 0.0;
    auto res = std::from_chars(text_.data() + start, text_.data() + pos_, value);
    if (res.ec != std::errc() || res.ptr != text_.data() + pos_)
      throw ParseError("malformed number", start);
    return Expr::constant(value, dim_);
  }

  Expr parse_name() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           std::isalpha(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
    std::string name = text_.substr(start, pos_ - start);
    if (name == "x") {
      const std::size_t digit_start = pos_;
      while (pos_ < text_.size() &&
             std::isdigit(static_cast<unsigned char>(text_[pos_])))
        ++pos_;
      if (pos_ == digit_start)
        throw ParseError("expected variable index after 'x'", digit_start);
      int index = 0;
      auto res = std::from_chars(text_.data() + digit_start,
                                 text_.data() + pos_, index);
      if (res.ec != std::errc())
        throw ParseError("malformed variable index", digit_start);
      if (index < 1 || index > dim_)
        throw ParseError("variable index x" + std::to_string(index) +
                             " out of range 1.." + std::to_string(dim_),
                         start);
      return Expr::variable(index, dim_);
    }
    Expr::UnaryOp op;
    if (name == "sin") op = Expr::UnaryOp::Sin;
    else if (name == "cos") op = Expr::UnaryOp::Cos;
    else if (name == "exp") op = Expr::UnaryOp::Exp;
    else if (name == "log") op = Expr::UnaryOp::Log;
    else if (name == "sqrt") op = Expr::UnaryOp::Sqrt;
    else if (name == "abs") op = Expr::UnaryOp::Abs;
    else throw ParseError("unknown function '" + name + "'", start);
    expect('(');
    Expr arg = parse_expr();
    expect(')');
    return Expr::unary(op, arg);
  }

  const std::string& text_;
  int dim_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline Expr Expr::parse(const std::string& text, int dim) {
  check_dim(dim);
  return detail::Parser(text, dim).run();
}

}  // namespace propnormal
