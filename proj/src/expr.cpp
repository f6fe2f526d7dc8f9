#include "obscheck/expr.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "obscheck/errors.hpp"

namespace obscheck {

// ---------------------------------------------------------------------------
// Tree construction

Expr::Expr() : Expr(Literal{0.0}) {}
Expr::Expr(Node n) : node_(std::make_shared<const Node>(std::move(n))) {}

Expr Expr::literal(double v) { return Expr(Literal{v}); }
Expr Expr::param(std::string name) { return Expr(Param{std::move(name), -1}); }
Expr Expr::unary(UnaryFn fn, Expr arg) { return Expr(Unary{fn, std::move(arg)}); }
Expr Expr::binary(BinaryOp op, Expr lhs, Expr rhs) { return Expr(Binary{op, std::move(lhs), std::move(rhs)}); }

Expr Expr::bind(const std::vector<std::string>& names) const {
  return std::visit(
      [&](const auto& n) -> Expr {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Literal>) {
          return *this;
        } else if constexpr (std::is_same_v<T, Param>) {
          auto it = std::find(names.begin(), names.end(), n.name);
          if (it == names.end()) throw ConfigError("unknown parameter '" + n.name + "'");
          return Expr(Param{n.name, static_cast<int>(it - names.begin())});
        } else if constexpr (std::is_same_v<T, Unary>) {
          return unary(n.fn, n.arg.bind(names));
        } else {
          return binary(n.op, n.lhs.bind(names), n.rhs.bind(names));
        }
      },
      *node_);
}

bool Expr::is_bound() const {
  return std::visit(
      [](const auto& n) -> bool {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Literal>)
          return true;
        else if constexpr (std::is_same_v<T, Param>)
          return n.index >= 0;
        else if constexpr (std::is_same_v<T, Unary>)
          return n.arg.is_bound();
        else
          return n.lhs.is_bound() && n.rhs.is_bound();
      },
      *node_);
}

namespace {

void collect_params(const Expr& e, std::vector<std::string>& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Expr::Param>) {
          out.push_back(n.name);
        } else if constexpr (std::is_same_v<T, Expr::Unary>) {
          collect_params(n.arg, out);
        } else if constexpr (std::is_same_v<T, Expr::Binary>) {
          collect_params(n.lhs, out);
          collect_params(n.rhs, out);
        }
      },
      e.node());
}

}  // namespace

std::vector<std::string> Expr::parameters() const {
  std::vector<std::string> out;
  collect_params(*this, out);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool operator==(const Expr& a, const Expr& b) {
  const auto& na = a.node();
  const auto& nb = b.node();
  if (na.index() != nb.index()) return false;
  if (auto* la = std::get_if<Expr::Literal>(&na)) return la->value == std::get<Expr::Literal>(nb).value;
  if (auto* pa = std::get_if<Expr::Param>(&na)) return pa->name == std::get<Expr::Param>(nb).name;
  if (auto* ua = std::get_if<Expr::Unary>(&na)) {
    const auto& ub = std::get<Expr::Unary>(nb);
    return ua->fn == ub.fn && ua->arg == ub.arg;
  }
  const auto& ba = std::get<Expr::Binary>(na);
  const auto& bb = std::get<Expr::Binary>(nb);
  return ba.op == bb.op && ba.lhs == bb.lhs && ba.rhs == bb.rhs;
}

// ---------------------------------------------------------------------------
// Printing

namespace {

const char* fn_name(UnaryFn fn) {
  switch (fn) {
    case UnaryFn::Sqrt: return "sqrt";
    case UnaryFn::Log: return "log";
    case UnaryFn::Exp: return "exp";
    case UnaryFn::Abs: return "abs";
    case UnaryFn::Neg: return "neg";
  }
  return "?";
}

const char* op_symbol(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
    case BinaryOp::Pow: return "^";
  }
  return "?";
}

}  // namespace

std::string to_string(const Expr& e) {
  return std::visit(
      [](const auto& n) -> std::string {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Expr::Literal>) {
          char buf[32];
          std::snprintf(buf, sizeof buf, "%.17g", n.value);
          return buf;
        } else if constexpr (std::is_same_v<T, Expr::Param>) {
          return n.name;
        } else if constexpr (std::is_same_v<T, Expr::Unary>) {
          return std::string(fn_name(n.fn)) + "(" + to_string(n.arg) + ")";
        } else {
          return "(" + to_string(n.lhs) + " " + op_symbol(n.op) + " " + to_string(n.rhs) + ")";
        }
      },
      e.node());
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Expr parse() {
    Expr e = expression();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr expression() {
    Expr lhs = term();
    for (;;) {
      if (accept('+'))
        lhs = Expr::binary(BinaryOp::Add, lhs, term());
      else if (accept('-'))
        lhs = Expr::binary(BinaryOp::Sub, lhs, term());
      else
        return lhs;
    }
  }

  Expr term() {
    Expr lhs = signed_factor();
    for (;;) {
      if (accept('*'))
        lhs = Expr::binary(BinaryOp::Mul, lhs, signed_factor());
      else if (accept('/'))
        lhs = Expr::binary(BinaryOp::Div, lhs, signed_factor());
      else
        return lhs;
    }
  }

  Expr signed_factor() {
    if (accept('-')) return Expr::unary(UnaryFn::Neg, signed_factor());
    return power();
  }

  Expr power() {
    Expr lhs = primary();
    while (accept('^')) lhs = Expr::binary(BinaryOp::Pow, lhs, exponent());
    return lhs;
  }

  Expr exponent() {
    if (accept('-')) return Expr::unary(UnaryFn::Neg, exponent());
    return primary();
  }

  Expr primary() {
    skip_space();
    if (pos_ >= text_.size()) fail("expected operand");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expr inner = expression();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail("unexpected '" + std::string(1, c) + "'");
  }

  Expr number() {
    const std::string rest(text_.substr(pos_));
    char* end = nullptr;
    const double v = std::strtod(rest.c_str(), &end);
    if (end == rest.c_str()) fail("malformed number");
    pos_ += static_cast<std::size_t>(end - rest.c_str());
    return Expr::literal(v);
  }

  Expr identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    const std::string name(text_.substr(start, pos_ - start));
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == '(') {
      static const std::array<std::pair<const char*, UnaryFn>, 5> kFns{{{"sqrt", UnaryFn::Sqrt},
                                                                        {"log", UnaryFn::Log},
                                                                        {"exp", UnaryFn::Exp},
                                                                        {"abs", UnaryFn::Abs},
                                                                        {"neg", UnaryFn::Neg}}};
      auto it = std::find_if(kFns.begin(), kFns.end(), [&](const auto& f) { return name == f.first; });
      if (it == kFns.end()) throw ParseError("unknown function '" + name + "'", start);
      ++pos_;
      Expr arg = expression();
      if (!accept(')')) fail("expected ')'");
      return Expr::unary(it->second, arg);
    }
    return Expr::param(name);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse_expr(std::string_view text) { return Parser(text).parse(); }

// ---------------------------------------------------------------------------
// Evaluation

namespace {

// Forward-mode dual number with a fixed-capacity gradient.
struct Dual {
  double v = 0.0;
  std::array<double, kMaxParams> d{};
};

struct DualOps {
  int n;

  Dual constant(double c) const { return Dual{c, {}}; }
  Dual variable(double x, int index) const {
    Dual r{x, {}};
    r.d[index] = 1.0;
    return r;
  }
  static double value(const Dual& a) { return a.v; }

  // r = f(a) with f'(a) = slope
  Dual chain(double fv, double slope, const Dual& a) const {
    Dual r{fv, {}};
    for (int i = 0; i < n; ++i) r.d[i] = slope * a.d[i];
    return r;
  }
  Dual combine(double fv, double da, const Dual& a, double db, const Dual& b) const {
    Dual r{fv, {}};
    for (int i = 0; i < n; ++i) r.d[i] = da * a.d[i] + db * b.d[i];
    return r;
  }

  Dual add(const Dual& a, const Dual& b) const { return combine(a.v + b.v, 1.0, a, 1.0, b); }
  Dual sub(const Dual& a, const Dual& b) const { return combine(a.v - b.v, 1.0, a, -1.0, b); }
  Dual mul(const Dual& a, const Dual& b) const { return combine(a.v * b.v, b.v, a, a.v, b); }
  Dual div(const Dual& a, const Dual& b) const {
    const double q = a.v / b.v;
    return combine(q, 1.0 / b.v, a, -q / b.v, b);
  }
  Dual pow(const Dual& a, const Dual& b) const {
    const double p = std::pow(a.v, b.v);
    const double da = b.v == 0.0 ? 0.0 : b.v * std::pow(a.v, b.v - 1.0);
    bool exponent_varies = false;
    for (int i = 0; i < n; ++i) exponent_varies |= (b.d[i] != 0.0);
    const double db = exponent_varies && a.v > 0.0 ? p * std::log(a.v) : 0.0;
    return combine(p, da, a, db, b);
  }
  Dual sqrt(const Dual& a) const {
    const double s = std::sqrt(a.v);
    return chain(s, 0.5 / s, a);
  }
  Dual log(const Dual& a) const { return chain(std::log(a.v), 1.0 / a.v, a); }
  Dual exp(const Dual& a) const {
    const double e = std::exp(a.v);
    return chain(e, e, a);
  }
  Dual abs(const Dual& a) const {
    const double slope = a.v > 0.0 ? 1.0 : (a.v < 0.0 ? -1.0 : 0.0);
    return chain(std::abs(a.v), slope, a);
  }
  Dual neg(const Dual& a) const { return chain(-a.v, -1.0, a); }
};

struct PlainOps {
  double constant(double c) const { return c; }
  double variable(double x, int) const { return x; }
  static double value(double a) { return a; }
  double add(double a, double b) const { return a + b; }
  double sub(double a, double b) const { return a - b; }
  double mul(double a, double b) const { return a * b; }
  double div(double a, double b) const { return a / b; }
  double pow(double a, double b) const { return std::pow(a, b); }
  double sqrt(double a) const { return std::sqrt(a); }
  double log(double a) const { return std::log(a); }
  double exp(double a) const { return std::exp(a); }
  double abs(double a) const { return std::abs(a); }
  double neg(double a) const { return -a; }
};

template <typename Ops, typename S>
S eval_node(const Expr& e, std::span<const double> params, const Ops& ops) {
  auto check = [&](const S& r) -> S {
    if (!std::isfinite(Ops::value(r))) throw DomainError("non-finite value", to_string(e));
    return r;
  };
  return std::visit(
      [&](const auto& n) -> S {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Expr::Literal>) {
          return ops.constant(n.value);
        } else if constexpr (std::is_same_v<T, Expr::Param>) {
          if (n.index < 0) throw ConfigError("parameter '" + n.name + "' is not bound");
          if (static_cast<std::size_t>(n.index) >= params.size())
            throw ConfigError("parameter vector too short for '" + n.name + "'");
          return ops.variable(params[n.index], n.index);
        } else if constexpr (std::is_same_v<T, Expr::Unary>) {
          const S a = eval_node<Ops, S>(n.arg, params, ops);
          const double av = Ops::value(a);
          switch (n.fn) {
            case UnaryFn::Sqrt:
              if (!(av > 0.0)) throw DomainError("sqrt of non-positive value", to_string(e));
              return check(ops.sqrt(a));
            case UnaryFn::Log:
              if (!(av > 0.0)) throw DomainError("log of non-positive value", to_string(e));
              return check(ops.log(a));
            case UnaryFn::Exp: return check(ops.exp(a));
            case UnaryFn::Abs: return ops.abs(a);
            case UnaryFn::Neg: return ops.neg(a);
          }
          return a;
        } else {
          const S a = eval_node<Ops, S>(n.lhs, params, ops);
          const S b = eval_node<Ops, S>(n.rhs, params, ops);
          switch (n.op) {
            case BinaryOp::Add: return check(ops.add(a, b));
            case BinaryOp::Sub: return check(ops.sub(a, b));
            case BinaryOp::Mul: return check(ops.mul(a, b));
            case BinaryOp::Div:
              if (Ops::value(b) == 0.0) throw DomainError("division by zero", to_string(e));
              return check(ops.div(a, b));
            case BinaryOp::Pow: return check(ops.pow(a, b));
          }
          return a;
        }
      },
      e.node());
}

std::vector<double> ordered_values(const std::map<std::string, double>& params,
                                   std::vector<std::string>& names) {
  names.clear();
  std::vector<double> values;
  for (const auto& [k, v] : params) {
    names.push_back(k);
    values.push_back(v);
  }
  return values;
}

}  // namespace

double eval(const Expr& e, std::span<const double> params) {
  return eval_node<PlainOps, double>(e, params, PlainOps{});
}

ValueGrad eval_grad(const Expr& e, std::span<const double> params) {
  if (params.size() > static_cast<std::size_t>(kMaxParams))
    throw ConfigError("at most " + std::to_string(kMaxParams) + " parameters are supported");
  const DualOps ops{static_cast<int>(params.size())};
  const Dual r = eval_node<DualOps, Dual>(e, params, ops);
  return ValueGrad{r.v, std::vector<double>(r.d.begin(), r.d.begin() + params.size())};
}

double eval(const Expr& e, const std::map<std::string, double>& params) {
  std::vector<std::string> names;
  const auto values = ordered_values(params, names);
  return eval(e.bind(names), values);
}

ValueGrad eval_grad(const Expr& e, const std::map<std::string, double>& params) {
  std::vector<std::string> names;
  const auto values = ordered_values(params, names);
  return eval_grad(e.bind(names), values);
}

}  // namespace obscheck
