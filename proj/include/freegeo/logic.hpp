#pragma once

// Continuous-logic formulas over matrix tuples: trace-polynomial atoms,
// sup/inf quantifiers over operator-norm balls and real connectives.

#include <compare>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "freegeo/matcore.hpp"

namespace freegeo {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, std::size_t pos)
      : std::runtime_error(msg + " at position " + std::to_string(pos)), pos_(pos) {}
  std::size_t position() const { return pos_; }

 private:
  std::size_t pos_;
};

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A generator of the free *-algebra. Bound letters are indexed by the
// nesting level of the quantifier that binds them.
struct Letter {
  enum Kind : std::uint8_t { Free = 0, Bound = 1 };
  Kind kind = Free;
  int index = 0;
  bool adjoint = false;

  Letter star() const { return Letter{kind, index, !adjoint}; }
  auto operator<=>(const Letter&) const = default;
};

using Word = std::vector<Letter>;

Word adjoint_word(const Word& w);
// Lexicographically least cyclic rotation.
Word min_rotation(const Word& w);

// Finite sum of c_w * w kept in canonical form: sorted by word, like terms
// merged, zero coefficients dropped.
class NcPolynomial {
 public:
  using Term = std::pair<Word, cplx>;

  NcPolynomial() = default;
  explicit NcPolynomial(std::vector<Term> terms);

  static NcPolynomial constant(cplx c);
  static NcPolynomial letter(Letter l);

  const std::vector<Term>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  int degree() const;

  NcPolynomial adjoint() const;
  // True when tr(p) is real for every input, i.e. p and p* agree after
  // cyclic reduction of each word.
  bool trace_is_real() const;

  friend NcPolynomial operator+(const NcPolynomial& a, const NcPolynomial& b);
  friend NcPolynomial operator-(const NcPolynomial& a, const NcPolynomial& b);
  friend NcPolynomial operator*(const NcPolynomial& a, const NcPolynomial& b);
  friend NcPolynomial operator*(cplx s, const NcPolynomial& a);
  friend bool operator==(const NcPolynomial& a, const NcPolynomial& b) = default;

 private:
  void canonicalize();
  std::vector<Term> terms_;
};

// Matrix value of a word; bound[k] is the value of the level-k bound letter.
Matrix evaluate_word(const Word& w, const MatrixTuple& x, const std::vector<Matrix>& bound);
Matrix evaluate_polynomial(const NcPolynomial& p, const MatrixTuple& x,
                           const std::vector<Matrix>& bound = {});

enum class Connective { Add, Sub, Mul, Div, Neg, Pow, Max, Min, Abs, Sqrt, Exp, Log };
enum class QuantKind { Sup, Inf };

struct FormulaNode;
using FormulaPtr = std::shared_ptr<const FormulaNode>;

struct FormulaNode {
  enum Kind { Const, Atom, Quant, Conn };
  Kind kind = Const;
  double value = 0.0;          // Const value, or the exponent of Pow
  NcPolynomial poly;           // Atom: re tr(poly)
  bool explicit_re = true;     // Atom written as "re tr" rather than "tr"
  QuantKind quant = QuantKind::Sup;
  std::string var;             // Quant: bound variable name
  double radius = 0.0;         // Quant: ball radius
  Connective conn = Connective::Add;
  std::vector<FormulaPtr> children;
};

bool operator==(const FormulaNode& a, const FormulaNode& b);

class Formula {
 public:
  Formula() = default;
  explicit Formula(FormulaPtr root) : root_(std::move(root)) {}

  static Formula constant(double v);
  static Formula atom(NcPolynomial p, bool explicit_re = true);
  static Formula quantifier(QuantKind kind, std::string var, double radius, Formula body);
  static Formula connective(Connective c, std::vector<Formula> children, double exponent = 0.0);

  const FormulaNode& node() const { return *root_; }
  const FormulaPtr& ptr() const { return root_; }
  bool valid() const { return root_ != nullptr; }

  bool quantifier_free() const;
  // 1 + largest free variable index used, 0 for sentences.
  int free_arity() const;
  // Number of nested same-kind quantifier blocks on the deepest path.
  int quantifier_depth() const;
  std::string to_string() const;

  friend bool operator==(const Formula& a, const Formula& b);

 private:
  FormulaPtr root_;
};

Formula parse(std::string_view text);

struct EvalOptions {
  int starts = 8;
  int iters = 500;
  double step = 1.0;
  double tol = 1e-10;
  int depth_cap = 2;
  Seed seed{};
};

double evaluate(const Formula& f, const MatrixTuple& x, const EvalOptions& opts = {});

struct QuantResult {
  double value = 0.0;
  std::vector<Matrix> argopt;  // optimizer of the outermost quantifier block
};
// Evaluate a formula whose root is a quantifier and return the optimizer too.
QuantResult evaluate_quantifier(const Formula& f, const MatrixTuple& x, const EvalOptions& opts = {});

// Value and tr_n-gradient in the free variables of a quantifier-free formula.
// The tuple has the same shape as x.
std::pair<double, MatrixTuple> value_and_gradient(const Formula& f, const MatrixTuple& x);

class QfType {
 public:
  QfType() = default;
  QfType(int m, int max_degree, std::map<Word, cplx> moments)
      : m_(m), max_degree_(max_degree), moments_(std::move(moments)) {}

  int m() const { return m_; }
  int max_degree() const { return max_degree_; }
  cplx moment(const Word& w) const;
  const std::map<Word, cplx>& moments() const { return moments_; }

 private:
  int m_ = 0;
  int max_degree_ = 0;
  std::map<Word, cplx> moments_;
};

QfType qf_type(const MatrixTuple& x, int max_degree);
// Weighted sup over words of |a(w) - b(w)|; weights[k] scales words of
// length k (missing entries count as 1).
double qf_distance(const QfType& a, const QfType& b, const std::vector<double>& weights = {});

}  // namespace freegeo
