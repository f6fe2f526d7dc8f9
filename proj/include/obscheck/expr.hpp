#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace obscheck {

enum class UnaryFn { Sqrt, Log, Exp, Abs, Neg };
enum class BinaryOp { Add, Sub, Mul, Div, Pow };

/// Immutable expression tree over real literals, parameter references, five
/// unary functions and five binary operators.
class Expr {
 public:
  struct Literal {
    double value;
  };
  struct Param {
    std::string name;
    int index = -1;  ///< slot in the parameter vector once bound
  };
  struct Unary;
  struct Binary;
  using Node = std::variant<Literal, Param, Unary, Binary>;

  Expr();  ///< the literal 0
  static Expr literal(double v);
  static Expr param(std::string name);
  static Expr unary(UnaryFn fn, Expr arg);
  static Expr binary(BinaryOp op, Expr lhs, Expr rhs);

  const Node& node() const;

  /// Resolves parameter names to indices into `names`. Throws ConfigError on
  /// an unknown name.
  Expr bind(const std::vector<std::string>& names) const;
  bool is_bound() const;

  /// Names of all referenced parameters, sorted and unique.
  std::vector<std::string> parameters() const;

  /// Structural equality (parameter indices are ignored).
  friend bool operator==(const Expr& a, const Expr& b);

 private:
  explicit Expr(Node n);
  std::shared_ptr<const Node> node_;
};

struct Expr::Unary {
  UnaryFn fn;
  Expr arg;
};

struct Expr::Binary {
  BinaryOp op;
  Expr lhs, rhs;
};

inline const Expr::Node& Expr::node() const { return *node_; }

/// Parses the expression language. Precedence, tightest first: `^`, unary
/// minus, `* /`, `+ -`; binary operators associate to the left. Throws
/// ParseError with a byte offset.
Expr parse_expr(std::string_view text);

/// Fully parenthesized rendering that parses back to an identical tree.
std::string to_string(const Expr& e);

/// Largest supported parameter count for gradient evaluation.
inline constexpr int kMaxParams = 16;

/// Value and partial derivatives with respect to the bound parameter slots.
struct ValueGrad {
  double value = 0.0;
  std::vector<double> grad;
};

/// Evaluates a bound expression. Throws DomainError on sqrt/log of a
/// non-positive value, division by zero, or a non-finite result.
double eval(const Expr& e, std::span<const double> params);
/// Forward-mode evaluation of value and gradient (same code path as eval).
ValueGrad eval_grad(const Expr& e, std::span<const double> params);

/// Convenience overloads on an unbound expression and named values.
double eval(const Expr& e, const std::map<std::string, double>& params);
ValueGrad eval_grad(const Expr& e, const std::map<std::string, double>& params);

}  // namespace obscheck
