#include "freegeo/logic.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace freegeo {

// ---------------------------------------------------------------- words

Word adjoint_word(const Word& w) {
  Word r(w.rbegin(), w.rend());
  for (auto& l : r) l.adjoint = !l.adjoint;
  return r;
}

Word min_rotation(const Word& w) {
  Word best = w;
  Word rot = w;
  for (std::size_t k = 1; k < w.size(); ++k) {
    std::rotate(rot.begin(), rot.begin() + 1, rot.end());
    if (rot < best) best = rot;
  }
  return best;
}

// ---------------------------------------------------------- polynomials

NcPolynomial::NcPolynomial(std::vector<Term> terms) : terms_(std::move(terms)) { canonicalize(); }

void NcPolynomial::canonicalize() {
  std::stable_sort(terms_.begin(), terms_.end(),
                   [](const Term& a, const Term& b) { return a.first < b.first; });
  std::vector<Term> merged;
  for (auto& t : terms_) {
    if (!merged.empty() && merged.back().first == t.first) {
      merged.back().second += t.second;
    } else {
      merged.push_back(std::move(t));
    }
  }
  std::erase_if(merged, [](const Term& t) { return t.second == cplx(0.0, 0.0); });
  terms_ = std::move(merged);
}

NcPolynomial NcPolynomial::constant(cplx c) { return NcPolynomial({{Word{}, c}}); }

NcPolynomial NcPolynomial::letter(Letter l) { return NcPolynomial({{Word{l}, cplx(1.0, 0.0)}}); }

int NcPolynomial::degree() const {
  int d = 0;
  for (const auto& t : terms_) d = std::max(d, static_cast<int>(t.first.size()));
  return d;
}

NcPolynomial NcPolynomial::adjoint() const {
  std::vector<Term> t;
  t.reserve(terms_.size());
  for (const auto& [w, c] : terms_) t.emplace_back(adjoint_word(w), std::conj(c));
  return NcPolynomial(std::move(t));
}

bool NcPolynomial::trace_is_real() const {
  auto cyclic = [](const NcPolynomial& p) {
    std::map<Word, cplx> out;
    for (const auto& [w, c] : p.terms()) out[min_rotation(w)] += c;
    return out;
  };
  const auto a = cyclic(*this);
  const auto b = cyclic(adjoint());
  double scale = 1.0;
  for (const auto& [w, c] : a) scale = std::max(scale, std::abs(c));
  auto close = [&](const std::map<Word, cplx>& lhs, const std::map<Word, cplx>& rhs) {
    for (const auto& [w, c] : lhs) {
      auto it = rhs.find(w);
      const cplx other = it == rhs.end() ? cplx(0.0) : it->second;
      if (std::abs(c - other) > 1e-12 * scale) return false;
    }
    return true;
  };
  return close(a, b) && close(b, a);
}

NcPolynomial operator+(const NcPolynomial& a, const NcPolynomial& b) {
  std::vector<NcPolynomial::Term> t(a.terms_);
  t.insert(t.end(), b.terms_.begin(), b.terms_.end());
  return NcPolynomial(std::move(t));
}

NcPolynomial operator-(const NcPolynomial& a, const NcPolynomial& b) { return a + cplx(-1.0, 0.0) * b; }

NcPolynomial operator*(const NcPolynomial& a, const NcPolynomial& b) {
  std::vector<NcPolynomial::Term> t;
  t.reserve(a.terms_.size() * b.terms_.size());
  for (const auto& [wa, ca] : a.terms_) {
    for (const auto& [wb, cb] : b.terms_) {
      Word w(wa);
      w.insert(w.end(), wb.begin(), wb.end());
      t.emplace_back(std::move(w), ca * cb);
    }
  }
  return NcPolynomial(std::move(t));
}

NcPolynomial operator*(cplx s, const NcPolynomial& a) {
  std::vector<NcPolynomial::Term> t(a.terms_);
  for (auto& term : t) term.second *= s;
  return NcPolynomial(std::move(t));
}

namespace {

const Matrix& letter_base(const Letter& l, const MatrixTuple& x, const std::vector<Matrix>& bound) {
  if (l.kind == Letter::Free) {
    if (l.index < 0 || l.index >= x.m()) {
      throw DimensionError("free variable x" + std::to_string(l.index + 1) + " exceeds tuple length " +
                           std::to_string(x.m()));
    }
    return x[l.index];
  }
  if (l.index < 0 || l.index >= static_cast<int>(bound.size())) {
    throw EvalError("bound variable used outside its quantifier");
  }
  return bound[static_cast<std::size_t>(l.index)];
}

Matrix letter_value(const Letter& l, const MatrixTuple& x, const std::vector<Matrix>& bound) {
  const Matrix& b = letter_base(l, x, bound);
  return l.adjoint ? Matrix(b.adjoint()) : b;
}

int tuple_size(const MatrixTuple& x, const std::vector<Matrix>& bound) {
  if (!x.empty()) return x.n();
  if (!bound.empty()) return static_cast<int>(bound.front().rows());
  throw DimensionError("cannot infer matrix size");
}

}  // namespace

Matrix evaluate_word(const Word& w, const MatrixTuple& x, const std::vector<Matrix>& bound) {
  const int n = tuple_size(x, bound);
  if (w.empty()) return Matrix::Identity(n, n);
  Matrix acc = letter_value(w[0], x, bound);
  for (std::size_t k = 1; k < w.size(); ++k) {
    const Matrix& b = letter_base(w[k], x, bound);
    if (w[k].adjoint) {
      acc = acc * b.adjoint();
    } else {
      acc = acc * b;
    }
  }
  return acc;
}

Matrix evaluate_polynomial(const NcPolynomial& p, const MatrixTuple& x, const std::vector<Matrix>& bound) {
  const int n = tuple_size(x, bound);
  Matrix acc = Matrix::Zero(n, n);
  for (const auto& [w, c] : p.terms()) acc += c * evaluate_word(w, x, bound);
  return acc;
}

// -------------------------------------------------------------- formulas

bool operator==(const FormulaNode& a, const FormulaNode& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case FormulaNode::Const:
      return a.value == b.value;
    case FormulaNode::Atom:
      return a.poly == b.poly && a.explicit_re == b.explicit_re;
    case FormulaNode::Quant:
      return a.quant == b.quant && a.var == b.var && a.radius == b.radius && *a.children[0] == *b.children[0];
    case FormulaNode::Conn:
      if (a.conn != b.conn || a.children.size() != b.children.size()) return false;
      if (a.conn == Connective::Pow && a.value != b.value) return false;
      for (std::size_t i = 0; i < a.children.size(); ++i) {
        if (!(*a.children[i] == *b.children[i])) return false;
      }
      return true;
  }
  return false;
}

bool operator==(const Formula& a, const Formula& b) {
  if (!a.root_ || !b.root_) return a.root_ == b.root_;
  return *a.root_ == *b.root_;
}

Formula Formula::constant(double v) {
  auto n = std::make_shared<FormulaNode>();
  n->kind = FormulaNode::Const;
  n->value = v;
  return Formula(n);
}

Formula Formula::atom(NcPolynomial p, bool explicit_re) {
  auto n = std::make_shared<FormulaNode>();
  n->kind = FormulaNode::Atom;
  n->poly = std::move(p);
  n->explicit_re = explicit_re;
  return Formula(n);
}

Formula Formula::quantifier(QuantKind kind, std::string var, double radius, Formula body) {
  if (!(radius > 0.0) || !std::isfinite(radius)) throw std::invalid_argument("quantifier radius must be positive");
  auto n = std::make_shared<FormulaNode>();
  n->kind = FormulaNode::Quant;
  n->quant = kind;
  n->var = std::move(var);
  n->radius = radius;
  n->children.push_back(body.ptr());
  return Formula(n);
}

Formula Formula::connective(Connective c, std::vector<Formula> children, double exponent) {
  std::size_t arity = 1;
  switch (c) {
    case Connective::Add:
    case Connective::Sub:
    case Connective::Mul:
    case Connective::Div:
    case Connective::Max:
    case Connective::Min:
      arity = 2;
      break;
    default:
      break;
  }
  if (children.size() != arity) throw std::invalid_argument("wrong number of connective arguments");
  auto n = std::make_shared<FormulaNode>();
  n->kind = FormulaNode::Conn;
  n->conn = c;
  n->value = c == Connective::Pow ? exponent : 0.0;
  for (auto& ch : children) n->children.push_back(ch.ptr());
  return Formula(n);
}

namespace {

bool node_quantifier_free(const FormulaNode& n) {
  if (n.kind == FormulaNode::Quant) return false;
  return std::all_of(n.children.begin(), n.children.end(),
                     [](const FormulaPtr& c) { return node_quantifier_free(*c); });
}

int node_free_arity(const FormulaNode& n) {
  int r = 0;
  if (n.kind == FormulaNode::Atom) {
    for (const auto& [w, c] : n.poly.terms()) {
      for (const auto& l : w) {
        if (l.kind == Letter::Free) r = std::max(r, l.index + 1);
      }
    }
  }
  for (const auto& c : n.children) r = std::max(r, node_free_arity(*c));
  return r;
}

int node_depth(const FormulaNode& n, const FormulaNode* parent_quant) {
  if (n.kind == FormulaNode::Quant) {
    const bool continues = parent_quant != nullptr && parent_quant->quant == n.quant;
    return (continues ? 0 : 1) + node_depth(*n.children[0], &n);
  }
  int d = 0;
  for (const auto& c : n.children) d = std::max(d, node_depth(*c, nullptr));
  return d;
}

}  // namespace

bool Formula::quantifier_free() const { return node_quantifier_free(*root_); }
int Formula::free_arity() const { return node_free_arity(*root_); }
int Formula::quantifier_depth() const { return node_depth(*root_, nullptr); }

// --------------------------------------------------------------- printer

namespace {

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string format_complex(cplx c) {
  if (c.imag() == 0.0) return format_number(c.real());
  if (c.real() == 0.0) return format_number(c.imag()) + "i";
  return "(" + format_number(c.real()) + " + " + format_number(c.imag()) + "i)";
}

class Printer {
 public:
  std::string print(const FormulaNode& n, int parent_prec = 0, bool right = false) {
    const int p = precedence(n);
    const bool paren = p < parent_prec || (right && p == parent_prec && p < 5);
    std::string s = body(n);
    return paren ? "(" + s + ")" : s;
  }

 private:
  static int precedence(const FormulaNode& n) {
    switch (n.kind) {
      case FormulaNode::Const:
        return n.value < 0.0 || std::signbit(n.value) ? 3 : 5;
      case FormulaNode::Atom:
        return 5;
      case FormulaNode::Quant:
        return 0;
      case FormulaNode::Conn:
        switch (n.conn) {
          case Connective::Add:
          case Connective::Sub:
            return 1;
          case Connective::Mul:
          case Connective::Div:
            return 2;
          case Connective::Neg:
            return 3;
          case Connective::Pow:
            return 4;
          default:
            return 5;
        }
    }
    return 5;
  }

  std::string body(const FormulaNode& n) {
    switch (n.kind) {
      case FormulaNode::Const:
        return format_number(n.value);
      case FormulaNode::Atom:
        return (n.explicit_re ? "re tr(" : "tr(") + poly(n.poly) + ")";
      case FormulaNode::Quant: {
        std::string head = (n.quant == QuantKind::Sup ? "sup{" : "inf{") + n.var + ":" +
                           format_number(n.radius) + "} ";
        scope_.push_back(n.var);
        std::string inner = print(*n.children[0], 0);
        scope_.pop_back();
        return head + inner;
      }
      case FormulaNode::Conn:
        return connective(n);
    }
    return {};
  }

  std::string connective(const FormulaNode& n) {
    auto bin = [&](const char* op, int p) {
      return print(*n.children[0], p, false) + op + print(*n.children[1], p, true);
    };
    auto call = [&](const char* name) {
      std::string s = std::string(name) + "(";
      for (std::size_t i = 0; i < n.children.size(); ++i) {
        if (i) s += ", ";
        s += print(*n.children[i], 0);
      }
      return s + ")";
    };
    switch (n.conn) {
      case Connective::Add:
        return bin(" + ", 1);
      case Connective::Sub:
        return bin(" - ", 1);
      case Connective::Mul:
        return bin(" * ", 2);
      case Connective::Div:
        return bin(" / ", 2);
      case Connective::Neg:
        return "-" + print(*n.children[0], 3);
      case Connective::Pow:
        return print(*n.children[0], 5) + "^" + format_number(n.value);
      case Connective::Max:
        return call("max");
      case Connective::Min:
        return call("min");
      case Connective::Abs:
        return call("abs");
      case Connective::Sqrt:
        return call("sqrt");
      case Connective::Exp:
        return call("exp");
      case Connective::Log:
        return call("log");
    }
    return {};
  }

  std::string letter(const Letter& l) const {
    std::string s;
    if (l.kind == Letter::Free) {
      s = "x" + std::to_string(l.index + 1);
    } else {
      s = l.index < static_cast<int>(scope_.size()) ? scope_[static_cast<std::size_t>(l.index)]
                                                    : "?" + std::to_string(l.index);
    }
    return l.adjoint ? s + "'" : s;
  }

  std::string poly(const NcPolynomial& p) const {
    if (p.is_zero()) return "0";
    std::string out;
    bool first = true;
    for (const auto& [w, c] : p.terms()) {
      std::string t;
      std::string word;
      for (std::size_t k = 0; k < w.size(); ++k) {
        if (k) word += "*";
        word += letter(w[k]);
      }
      if (w.empty()) {
        t = format_complex(c);
      } else if (c == cplx(1.0, 0.0)) {
        t = word;
      } else if (c == cplx(-1.0, 0.0)) {
        t = "-" + word;
      } else {
        t = format_complex(c) + "*" + word;
      }
      if (first) {
        out = t;
      } else if (t[0] == '-') {
        out += " - " + t.substr(1);
      } else {
        out += " + " + t;
      }
      first = false;
    }
    return out;
  }

  std::vector<std::string> scope_;
};

}  // namespace

std::string Formula::to_string() const {
  Printer p;
  return p.print(*root_);
}

// ---------------------------------------------------------------- parser

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

class Parser {
 public:
  explicit Parser(std::string_view text) : s_(text) {}

  Formula run() {
    Formula f = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return f;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }
  [[noreturn]] void fail_at(const std::string& msg, std::size_t pos) const { throw ParseError(msg, pos); }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool peek(char c) {
    skip();
    return pos_ < s_.size() && s_[pos_] == c;
  }
  bool accept(char c) {
    if (peek(c)) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!accept(c)) {
      if (pos_ >= s_.size()) fail(std::string("expected '") + c + "' but reached end of input");
      fail(std::string("expected '") + c + "'");
    }
  }
  std::string peek_ident() {
    skip();
    std::size_t p = pos_;
    if (p >= s_.size() || !ident_start(s_[p])) return {};
    while (p < s_.size() && ident_char(s_[p])) ++p;
    return std::string(s_.substr(pos_, p - pos_));
  }
  std::string ident() {
    std::string id = peek_ident();
    if (id.empty()) fail("expected identifier");
    pos_ += id.size();
    return id;
  }
  bool at_number() {
    skip();
    return pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.');
  }
  double number() {
    skip();
    const std::size_t start = pos_;
    std::size_t p = pos_;
    while (p < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[p])) || s_[p] == '.')) ++p;
    if (p < s_.size() && (s_[p] == 'e' || s_[p] == 'E')) {
      std::size_t q = p + 1;
      if (q < s_.size() && (s_[q] == '+' || s_[q] == '-')) ++q;
      if (q < s_.size() && std::isdigit(static_cast<unsigned char>(s_[q]))) {
        p = q;
        while (p < s_.size() && std::isdigit(static_cast<unsigned char>(s_[p]))) ++p;
      }
    }
    double v = 0.0;
    auto res = std::from_chars(s_.data() + start, s_.data() + p, v);
    if (res.ec != std::errc() || res.ptr != s_.data() + p) fail_at("malformed number", start);
    pos_ = p;
    return v;
  }
  double signed_number() {
    skip();
    bool neg = accept('-');
    if (!at_number()) fail("expected number");
    double v = number();
    return neg ? -v : v;
  }

  Formula expr() {
    Formula lhs = term();
    for (;;) {
      if (accept('+')) {
        lhs = Formula::connective(Connective::Add, {lhs, term()});
      } else if (accept('-')) {
        lhs = Formula::connective(Connective::Sub, {lhs, term()});
      } else {
        return lhs;
      }
    }
  }

  Formula term() {
    Formula lhs = unary();
    for (;;) {
      if (accept('*')) {
        lhs = Formula::connective(Connective::Mul, {lhs, unary()});
      } else if (accept('/')) {
        lhs = Formula::connective(Connective::Div, {lhs, unary()});
      } else {
        return lhs;
      }
    }
  }

  Formula unary() {
    if (accept('-')) {
      Formula c = unary();
      if (c.node().kind == FormulaNode::Const) return Formula::constant(-c.node().value);
      return Formula::connective(Connective::Neg, {c});
    }
    return power();
  }

  Formula power() {
    Formula base = primary();
    if (accept('^')) return Formula::connective(Connective::Pow, {base}, signed_number());
    return base;
  }

  Formula primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    if (at_number()) return Formula::constant(number());
    if (accept('(')) {
      Formula f = expr();
      expect(')');
      return f;
    }
    const std::size_t start = pos_;
    std::string id = peek_ident();
    if (id.empty()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    pos_ += id.size();
    if (id == "re") {
      if (ident() != "tr") fail_at("expected 'tr' after 're'", start);
      return atom(true, start);
    }
    if (id == "tr") return atom(false, start);
    if (id == "sup" || id == "inf") return quantifier(id == "sup" ? QuantKind::Sup : QuantKind::Inf);
    static const std::map<std::string, Connective> functions = {
        {"max", Connective::Max}, {"min", Connective::Min}, {"abs", Connective::Abs},
        {"sqrt", Connective::Sqrt}, {"exp", Connective::Exp}, {"log", Connective::Log}};
    auto it = functions.find(id);
    if (it == functions.end()) fail_at("unknown identifier '" + id + "' outside a trace", start);
    expect('(');
    std::vector<Formula> args{expr()};
    while (accept(',')) args.push_back(expr());
    expect(')');
    const std::size_t want = (it->second == Connective::Max || it->second == Connective::Min) ? 2 : 1;
    if (args.size() != want) {
      fail_at(id + " expects " + std::to_string(want) + " argument" + (want == 1 ? "" : "s"), start);
    }
    return Formula::connective(it->second, std::move(args));
  }

  Formula atom(bool explicit_re, std::size_t start) {
    expect('(');
    NcPolynomial p = poly();
    expect(')');
    if (!explicit_re && !p.trace_is_real()) {
      fail_at("tr(...) of a polynomial with non-real trace; write re tr(...)", start);
    }
    return Formula::atom(std::move(p), explicit_re);
  }

  Formula quantifier(QuantKind kind) {
    expect('{');
    std::string var = ident();
    expect(':');
    const std::size_t rpos = pos_;
    double r = signed_number();
    if (!(r > 0.0) || !std::isfinite(r)) fail_at("quantifier radius must be positive", rpos);
    expect('}');
    scope_.push_back(var);
    Formula body = expr();
    scope_.pop_back();
    return Formula::quantifier(kind, std::move(var), r, std::move(body));
  }

  NcPolynomial poly() {
    NcPolynomial lhs = pterm();
    for (;;) {
      if (accept('+')) {
        lhs = lhs + pterm();
      } else if (accept('-')) {
        lhs = lhs - pterm();
      } else {
        return lhs;
      }
    }
  }

  NcPolynomial pterm() {
    NcPolynomial lhs = pfactor();
    while (accept('*')) lhs = lhs * pfactor();
    return lhs;
  }

  NcPolynomial pfactor() {
    if (accept('-')) return cplx(-1.0, 0.0) * pfactor();
    NcPolynomial p = pprimary();
    while (accept('\'')) p = p.adjoint();
    if (accept('^')) {
      skip();
      const std::size_t epos = pos_;
      double e = number();
      if (e < 0.0 || e != std::floor(e) || e > 64.0) fail_at("polynomial exponent must be a small integer", epos);
      NcPolynomial r = NcPolynomial::constant(1.0);
      for (int k = 0; k < static_cast<int>(e); ++k) r = r * p;
      return r;
    }
    return p;
  }

  NcPolynomial pprimary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    if (at_number()) {
      double v = number();
      if (pos_ < s_.size() && s_[pos_] == 'i' && (pos_ + 1 >= s_.size() || !ident_char(s_[pos_ + 1]))) {
        ++pos_;
        return NcPolynomial::constant(cplx(0.0, v));
      }
      return NcPolynomial::constant(cplx(v, 0.0));
    }
    if (accept('(')) {
      NcPolynomial p = poly();
      expect(')');
      return p;
    }
    const std::size_t start = pos_;
    std::string id = peek_ident();
    if (id.empty()) fail("unexpected '" + std::string(1, s_[pos_]) + "' in polynomial");
    pos_ += id.size();
    for (int k = static_cast<int>(scope_.size()) - 1; k >= 0; --k) {
      if (scope_[static_cast<std::size_t>(k)] == id) return NcPolynomial::letter(Letter{Letter::Bound, k, false});
    }
    if (id.size() >= 2 && id[0] == 'x' &&
        std::all_of(id.begin() + 1, id.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      int idx = 0;
      auto res = std::from_chars(id.data() + 1, id.data() + id.size(), idx);
      if (res.ec == std::errc() && idx >= 1) return NcPolynomial::letter(Letter{Letter::Free, idx - 1, false});
    }
    fail_at("unbound variable '" + id + "'", start);
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  std::vector<std::string> scope_;
};

}  // namespace

Formula parse(std::string_view text) { return Parser(text).run(); }

// ------------------------------------------------------------ evaluation

namespace {

double checked(double v, const char* what) {
  if (!std::isfinite(v)) throw EvalError(std::string("non-finite value in ") + what);
  return v;
}

double atom_value(const FormulaNode& n, const MatrixTuple& x, const std::vector<Matrix>& env) {
  const int dim = tuple_size(x, env);
  cplx s = 0.0;
  for (const auto& [w, c] : n.poly.terms()) s += c * evaluate_word(w, x, env).trace();
  return checked(s.real() / dim, "trace atom");
}

double apply_connective(const FormulaNode& n, double a, double b) {
  switch (n.conn) {
    case Connective::Add:
      return a + b;
    case Connective::Sub:
      return a - b;
    case Connective::Mul:
      return a * b;
    case Connective::Div:
      if (b == 0.0) throw EvalError("division by zero");
      return a / b;
    case Connective::Neg:
      return -a;
    case Connective::Pow:
      if (a < 0.0 && n.value != std::floor(n.value)) throw EvalError("fractional power of a negative value");
      if (a == 0.0 && n.value < 0.0) throw EvalError("negative power of zero");
      return std::pow(a, n.value);
    case Connective::Max:
      return std::max(a, b);
    case Connective::Min:
      return std::min(a, b);
    case Connective::Abs:
      return std::abs(a);
    case Connective::Sqrt:
      if (a < 0.0) throw EvalError("sqrt of a negative value");
      return std::sqrt(a);
    case Connective::Exp:
      return std::exp(a);
    case Connective::Log:
      if (a <= 0.0) throw EvalError("log of a nonpositive value");
      return std::log(a);
  }
  return 0.0;
}

struct Gradients {
  std::vector<Matrix> free;   // per free variable
  std::vector<Matrix> bound;  // per bound level
};

class Engine {
 public:
  Engine(const MatrixTuple& x, const EvalOptions& opts) : x_(x), opts_(opts), n_(x.n()) {}

  double value(const FormulaNode& f, std::vector<Matrix>& env, int blocks) {
    switch (f.kind) {
      case FormulaNode::Const:
        return f.value;
      case FormulaNode::Atom:
        return atom_value(f, x_, env);
      case FormulaNode::Conn: {
        const double a = value(*f.children[0], env, blocks);
        const double b = f.children.size() > 1 ? value(*f.children[1], env, blocks) : 0.0;
        return checked(apply_connective(f, a, b), "connective");
      }
      case FormulaNode::Quant:
        return optimize_block(f, env, blocks).value;
    }
    return 0.0;
  }

  QuantResult optimize_block(const FormulaNode& head, std::vector<Matrix>& env, int blocks) {
    if (blocks + 1 > opts_.depth_cap) {
      throw EvalError("quantifier nesting exceeds depth cap " + std::to_string(opts_.depth_cap));
    }
    std::vector<double> radii;
    const FormulaNode* body = &head;
    while (body->kind == FormulaNode::Quant && body->quant == head.quant) {
      radii.push_back(body->radius);
      body = body->children[0].get();
    }
    const std::size_t base = env.size();
    const std::size_t k = radii.size();
    const double sign = head.quant == QuantKind::Sup ? 1.0 : -1.0;
    const bool analytic = node_quantifier_free(*body);

    auto objective = [&](const std::vector<Matrix>& ys) {
      env.resize(base);
      env.insert(env.end(), ys.begin(), ys.end());
      double v = value(*body, env, blocks + 1);
      env.resize(base);
      return v;
    };

    auto gradient = [&](std::vector<Matrix>& ys) {
      std::vector<Matrix> g(k);
      if (analytic) {
        env.resize(base);
        env.insert(env.end(), ys.begin(), ys.end());
        Gradients acc;
        acc.bound.assign(base + k, Matrix::Zero(n_, n_));
        backprop(*body, env, 1.0, acc, false);
        env.resize(base);
        for (std::size_t i = 0; i < k; ++i) g[i] = std::move(acc.bound[base + i]);
        return g;
      }
      for (std::size_t i = 0; i < k; ++i) {
        const double h = 1e-5 * radii[i];
        g[i] = Matrix::Zero(n_, n_);
        for (int a = 0; a < n_; ++a) {
          for (int b = 0; b < n_; ++b) {
            double parts[2];
            for (int part = 0; part < 2; ++part) {
              const cplx e = part == 0 ? cplx(h, 0.0) : cplx(0.0, h);
              const cplx saved = ys[i](a, b);
              ys[i](a, b) = saved + e;
              const double fp = objective(ys);
              ys[i](a, b) = saved - e;
              const double fm = objective(ys);
              ys[i](a, b) = saved;
              parts[part] = (fp - fm) / (2.0 * h);
            }
            g[i](a, b) = static_cast<double>(n_) * cplx(parts[0], parts[1]);
          }
        }
      }
      return g;
    };

    auto project = [&](std::vector<Matrix>& ys) {
      for (std::size_t i = 0; i < k; ++i) ys[i] = clip_singular_values(ys[i], radii[i]);
    };

    QuantResult best;
    best.value = -sign * std::numeric_limits<double>::infinity();
    const int starts = std::max(1, opts_.starts);
    for (int s = 0; s < starts; ++s) {
      std::vector<Matrix> ys(k);
      for (std::size_t i = 0; i < k; ++i) {
        if (s == 0) {
          ys[i] = Matrix::Zero(n_, n_);
        } else if (s == 1) {
          ys[i] = radii[i] * Matrix::Identity(n_, n_);
        } else {
          const Seed sd = opts_.seed.child(static_cast<std::uint64_t>(base) * 1000003ULL + i * 7919ULL +
                                           static_cast<std::uint64_t>(s));
          Rng rng(sd.child(0));
          const double scale = 0.5 * radii[i] * (0.25 + rng.uniform());
          ys[i] = clip_singular_values(scale * sample_ginibre(n_, 1, sd.child(1))[0], radii[i]);
        }
      }
      double fcur = sign * objective(ys);
      double step = opts_.step;
      for (int it = 0; it < opts_.iters; ++it) {
        std::vector<Matrix> g = gradient(ys);
        bool accepted = false;
        std::vector<Matrix> trial(k);
        double ftrial = 0.0;
        for (int bt = 0; bt < 60; ++bt) {
          for (std::size_t i = 0; i < k; ++i) trial[i] = ys[i] + (sign * step) * g[i];
          project(trial);
          double lin = 0.0;
          double moved = 0.0;
          for (std::size_t i = 0; i < k; ++i) {
            const Matrix d = trial[i] - ys[i];
            lin += sign * (g[i].array().conjugate() * d.array()).sum().real() / n_;
            moved += d.squaredNorm();
          }
          if (moved == 0.0) break;
          ftrial = sign * objective(trial);
          if (ftrial >= fcur + 1e-4 * lin) {
            accepted = true;
            break;
          }
          step *= 0.5;
        }
        if (!accepted) break;
        const double gain = ftrial - fcur;
        ys = std::move(trial);
        fcur = ftrial;
        if (gain <= opts_.tol * (1.0 + std::abs(fcur))) break;
        step = std::min(2.0 * step, 1e3 * opts_.step);
      }
      const double v = sign * fcur;
      if (sign * v > sign * best.value) {
        best.value = v;
        best.argopt = ys;
      }
    }
    return best;
  }

  // Accumulates weight * d(node)/d(letters) into acc. Bound gradients are
  // always collected; free ones only when want_free.
  void backprop(const FormulaNode& f, const std::vector<Matrix>& env, double w, Gradients& acc, bool want_free) {
    if (w == 0.0) return;
    switch (f.kind) {
      case FormulaNode::Const:
        return;
      case FormulaNode::Quant:
        throw EvalError("gradient of a quantified formula is unsupported");
      case FormulaNode::Atom:
        atom_gradient(f, env, w, acc, want_free);
        return;
      case FormulaNode::Conn:
        break;
    }
    std::vector<Matrix> env_copy;  // value() may need a mutable env
    auto val = [&](const FormulaNode& c) {
      env_copy = env;
      return value(c, env_copy, 0);
    };
    const double a = val(*f.children[0]);
    const double b = f.children.size() > 1 ? val(*f.children[1]) : 0.0;
    double wa = 0.0;
    double wb = 0.0;
    switch (f.conn) {
      case Connective::Add:
        wa = w;
        wb = w;
        break;
      case Connective::Sub:
        wa = w;
        wb = -w;
        break;
      case Connective::Mul:
        wa = w * b;
        wb = w * a;
        break;
      case Connective::Div:
        if (b == 0.0) throw EvalError("division by zero");
        wa = w / b;
        wb = -w * a / (b * b);
        break;
      case Connective::Neg:
        wa = -w;
        break;
      case Connective::Pow:
        if (a == 0.0 && f.value < 1.0) throw EvalError("power not differentiable at zero");
        wa = w * f.value * std::pow(a, f.value - 1.0);
        break;
      case Connective::Max:
        (a >= b ? wa : wb) = w;
        break;
      case Connective::Min:
        (a <= b ? wa : wb) = w;
        break;
      case Connective::Abs:
        wa = a > 0.0 ? w : (a < 0.0 ? -w : 0.0);
        break;
      case Connective::Sqrt:
        if (a <= 0.0) throw EvalError("sqrt not differentiable at a nonpositive value");
        wa = w / (2.0 * std::sqrt(a));
        break;
      case Connective::Exp:
        wa = w * std::exp(a);
        break;
      case Connective::Log:
        if (a <= 0.0) throw EvalError("log of a nonpositive value");
        wa = w / a;
        break;
    }
    backprop(*f.children[0], env, checked(wa, "gradient"), acc, want_free);
    if (f.children.size() > 1) backprop(*f.children[1], env, checked(wb, "gradient"), acc, want_free);
  }

  void atom_gradient(const FormulaNode& f, const std::vector<Matrix>& env, double w, Gradients& acc,
                     bool want_free) {
    for (const auto& [word, c] : f.poly.terms()) {
      const std::size_t len = word.size();
      if (len == 0) continue;
      // prefix[i] = L_0 ... L_{i-1}, suffix[i] = L_i ... L_{len-1}
      std::vector<Matrix> prefix(len + 1), suffix(len + 1);
      prefix[0] = Matrix::Identity(n_, n_);
      for (std::size_t i = 0; i < len; ++i) prefix[i + 1] = prefix[i] * letter_value(word[i], x_, env);
      suffix[len] = Matrix::Identity(n_, n_);
      for (std::size_t i = len; i-- > 0;) suffix[i] = letter_value(word[i], x_, env) * suffix[i + 1];
      for (std::size_t p = 0; p < len; ++p) {
        const Letter& l = word[p];
        Matrix* target = nullptr;
        if (l.kind == Letter::Free) {
          if (!want_free) continue;
          target = &acc.free[static_cast<std::size_t>(l.index)];
        } else {
          if (l.index >= static_cast<int>(acc.bound.size())) continue;
          target = &acc.bound[static_cast<std::size_t>(l.index)];
        }
        const Matrix rest = suffix[p + 1] * prefix[p];
        if (l.adjoint) {
          *target += (w * c) * rest;
        } else {
          *target += (w * std::conj(c)) * rest.adjoint();
        }
      }
    }
  }

 private:
  const MatrixTuple& x_;
  const EvalOptions& opts_;
  int n_;
};

void check_options(const EvalOptions& opts) {
  if (opts.starts < 1 || opts.iters < 1 || !(opts.tol > 0.0) || !(opts.step > 0.0)) {
    throw std::invalid_argument("evaluation options need starts >= 1, iters >= 1, tol > 0, step > 0");
  }
}

void check_arity(const Formula& f, const MatrixTuple& x) {
  if (!f.valid()) throw std::invalid_argument("empty formula");
  if (x.empty()) throw DimensionError("evaluation needs a nonempty tuple");
  const int arity = f.free_arity();
  if (arity > x.m()) {
    throw DimensionError("formula uses x" + std::to_string(arity) + " but the tuple has " +
                         std::to_string(x.m()) + " entries");
  }
}

}  // namespace

double evaluate(const Formula& f, const MatrixTuple& x, const EvalOptions& opts) {
  check_options(opts);
  check_arity(f, x);
  Engine e(x, opts);
  std::vector<Matrix> env;
  return e.value(f.node(), env, 0);
}

QuantResult evaluate_quantifier(const Formula& f, const MatrixTuple& x, const EvalOptions& opts) {
  check_options(opts);
  check_arity(f, x);
  if (f.node().kind != FormulaNode::Quant) throw std::invalid_argument("formula is not a quantifier");
  Engine e(x, opts);
  std::vector<Matrix> env;
  return e.optimize_block(f.node(), env, 0);
}

std::pair<double, MatrixTuple> value_and_gradient(const Formula& f, const MatrixTuple& x) {
  check_arity(f, x);
  if (!f.quantifier_free()) throw EvalError("gradient of a quantified formula is unsupported");
  EvalOptions opts;
  Engine e(x, opts);
  std::vector<Matrix> env;
  const double v = e.value(f.node(), env, 0);
  Gradients acc;
  acc.free.assign(static_cast<std::size_t>(x.m()), Matrix::Zero(x.n(), x.n()));
  e.backprop(f.node(), env, 1.0, acc, true);
  return {v, MatrixTuple(std::move(acc.free))};
}

// ---------------------------------------------------------------- types

cplx QfType::moment(const Word& w) const {
  auto it = moments_.find(w);
  if (it == moments_.end()) throw std::out_of_range("word outside the type's degree range");
  return it->second;
}

QfType qf_type(const MatrixTuple& x, int max_degree) {
  if (max_degree < 0) throw std::invalid_argument("max_degree must be nonnegative");
  if (x.empty()) throw DimensionError("qf_type needs a nonempty tuple");
  const int m = x.m();
  std::vector<Letter> alphabet;
  for (int j = 0; j < m; ++j) {
    alphabet.push_back(Letter{Letter::Free, j, false});
    alphabet.push_back(Letter{Letter::Free, j, true});
  }
  std::map<Word, cplx> reps;  // trace of each canonical representative
  auto trace_of = [&](const Word& w) {
    auto it = reps.find(w);
    if (it != reps.end()) return it->second;
    const cplx v = normalized_trace(evaluate_word(w, x, {}));
    reps.emplace(w, v);
    return v;
  };
  std::map<Word, cplx> moments;
  std::vector<Word> level{Word{}};
  moments[Word{}] = 1.0;
  for (int d = 1; d <= max_degree; ++d) {
    std::vector<Word> next;
    next.reserve(level.size() * alphabet.size());
    for (const auto& w : level) {
      for (const auto& l : alphabet) {
        Word v(w);
        v.push_back(l);
        const Word r1 = min_rotation(v);
        const Word r2 = min_rotation(adjoint_word(v));
        cplx val;
        if (r1 < r2) {
          val = trace_of(r1);
        } else if (r2 < r1) {
          val = std::conj(trace_of(r2));
        } else {
          val = trace_of(r1).real();
        }
        moments[v] = val;
        next.push_back(std::move(v));
      }
    }
    level = std::move(next);
  }
  return QfType(m, max_degree, std::move(moments));
}

double qf_distance(const QfType& a, const QfType& b, const std::vector<double>& weights) {
  if (a.max_degree() != b.max_degree() || a.m() != b.m()) {
    throw DimensionError("qf_distance needs types of equal degree and arity");
  }
  double d = 0.0;
  for (const auto& [w, va] : a.moments()) {
    const double wt = w.size() < weights.size() ? weights[w.size()] : 1.0;
    d = std::max(d, wt * std::abs(va - b.moment(w)));
  }
  return d;
}

}  // namespace freegeo
