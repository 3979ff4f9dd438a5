#pragma once

// Minimal symbolic scalar algebra: enough to carry closed-form forward
// kinematics, end-effector velocity/acceleration, and the sum-angle
// shorthand (cos a cos b - sin a sin b -> cos(a+b)).
//
// Representation: every expression is kept in a canonical expanded form,
// a sum of terms; each term is an exact rational coefficient times a sorted
// product of integer powers of atoms (symbol, pi, sin(expr), cos(expr)).
// Negation lives in the coefficients.  Construction maintains canonicity,
// so structural equality is plain comparison.

#include <algorithm>
#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "armkit/prng.hpp"

namespace armkit::sym {

using Rat = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

enum class SymbolKind { JointAngle, JointDisplacement, LinkLength, GenericConstant };

inline SymbolKind classify_symbol(const std::string& base) {
  auto digits_after = [&](std::size_t n) {
    if (base.size() <= n) return false;
    for (std::size_t i = n; i < base.size(); ++i)
      if (!std::isdigit(static_cast<unsigned char>(base[i]))) return false;
    return true;
  };
  if (base.rfind("theta", 0) == 0 && digits_after(5)) return SymbolKind::JointAngle;
  if (base.size() >= 2 && base[0] == 'q' && digits_after(1)) return SymbolKind::JointAngle;
  if (base.size() >= 2 && base[0] == 'd' && digits_after(1)) return SymbolKind::JointDisplacement;
  if (base.size() >= 2 && base[0] == 'L' && digits_after(1)) return SymbolKind::LinkLength;
  return SymbolKind::GenericConstant;
}

struct Symbol {
  std::string base;
  SymbolKind kind = SymbolKind::GenericConstant;
  int deriv = 0;  // time-derivative order; only joint kinds may be > 0

  // Parses names like "theta1", "theta1_dot", "d2_ddot".  The derivative
  // suffix is only meaningful on joint variables; anything else is taken
  // verbatim as a generic constant.
  static Symbol make(const std::string& full) {
    Symbol s;
    std::string base = full;
    int order = 0;
    if (full.size() > 4 && full.compare(full.size() - 2, 2, "ot") == 0) {
      std::size_t i = full.size() - 2;  // points at 'o' of "ot"
      std::size_t d_end = i;
      while (i > 0 && full[i - 1] == 'd') --i;
      int dcount = static_cast<int>(d_end - i);
      if (dcount >= 1 && i > 0 && full[i - 1] == '_') {
        std::string cand = full.substr(0, i - 1);
        if (classify_symbol(cand) == SymbolKind::JointAngle ||
            classify_symbol(cand) == SymbolKind::JointDisplacement) {
          base = cand;
          order = dcount;
        }
      }
    }
    s.base = base;
    s.kind = classify_symbol(base);
    s.deriv = order;
    return s;
  }

  std::string full_name() const {
    if (deriv == 0) return base;
    return base + "_" + std::string(static_cast<std::size_t>(deriv) - 1, 'd') + "dot";
  }

  friend bool operator==(const Symbol& a, const Symbol& b) {
    return a.base == b.base && a.deriv == b.deriv;
  }
  friend bool operator<(const Symbol& a, const Symbol& b) {
    if (a.base != b.base) return a.base < b.base;
    return a.deriv < b.deriv;
  }
};

namespace detail {

struct Sum;
using SumPtr = std::shared_ptr<const Sum>;

struct Atom {
  enum class Tag { Sym, Pi, Sin, Cos };
  Tag tag = Tag::Pi;
  Symbol sym{};
  SumPtr arg{};  // Sin / Cos argument
};

struct Factor {
  Atom atom;
  int exp = 1;
};

struct Term {
  Rat coef;
  std::vector<Factor> factors;  // sorted by atom order, exps >= 1
};

struct Sum {
  std::vector<Term> terms;  // sorted by factor key, no zero coefficients
};

int cmp_sum(const Sum& a, const Sum& b);

inline int cmp_atom(const Atom& a, const Atom& b) {
  auto rank = [](Atom::Tag t) {
    switch (t) {
      case Atom::Tag::Sym: return 0;
      case Atom::Tag::Pi: return 1;
      case Atom::Tag::Sin: return 2;
      case Atom::Tag::Cos: return 3;
    }
    return 4;
  };
  if (rank(a.tag) != rank(b.tag)) return rank(a.tag) < rank(b.tag) ? -1 : 1;
  switch (a.tag) {
    case Atom::Tag::Sym: {
      if (a.sym.base != b.sym.base) return a.sym.base < b.sym.base ? -1 : 1;
      if (a.sym.deriv != b.sym.deriv) return a.sym.deriv < b.sym.deriv ? -1 : 1;
      return 0;
    }
    case Atom::Tag::Pi: return 0;
    default: return cmp_sum(*a.arg, *b.arg);
  }
}

inline int cmp_factors(const std::vector<Factor>& a, const std::vector<Factor>& b) {
  std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    int c = cmp_atom(a[i].atom, b[i].atom);
    if (c != 0) return c;
    if (a[i].exp != b[i].exp) return a[i].exp < b[i].exp ? -1 : 1;
  }
  if (a.size() != b.size()) return a.size() < b.size() ? -1 : 1;
  return 0;
}

inline int cmp_term(const Term& a, const Term& b) {
  int c = cmp_factors(a.factors, b.factors);
  if (c != 0) return c;
  if (a.coef != b.coef) return a.coef < b.coef ? -1 : 1;
  return 0;
}

inline int cmp_sum(const Sum& a, const Sum& b) {
  std::size_t n = std::min(a.terms.size(), b.terms.size());
  for (std::size_t i = 0; i < n; ++i) {
    int c = cmp_term(a.terms[i], b.terms[i]);
    if (c != 0) return c;
  }
  if (a.terms.size() != b.terms.size()) return a.terms.size() < b.terms.size() ? -1 : 1;
  return 0;
}

// Canonicalize a raw term list: sort by factor key, merge equal keys,
// drop zeros.
inline SumPtr make_sum(std::vector<Term> terms) {
  std::sort(terms.begin(), terms.end(),
            [](const Term& a, const Term& b) { return cmp_factors(a.factors, b.factors) < 0; });
  std::vector<Term> out;
  for (auto& t : terms) {
    if (t.coef == 0) continue;
    if (!out.empty() && cmp_factors(out.back().factors, t.factors) == 0) {
      out.back().coef += t.coef;
      if (out.back().coef == 0) out.pop_back();
    } else {
      out.push_back(std::move(t));
    }
  }
  auto s = std::make_shared<Sum>();
  s->terms = std::move(out);
  return s;
}

inline Term term_mul(const Term& a, const Term& b) {
  Term r;
  r.coef = a.coef * b.coef;
  r.factors.reserve(a.factors.size() + b.factors.size());
  std::size_t i = 0, j = 0;
  while (i < a.factors.size() && j < b.factors.size()) {
    int c = cmp_atom(a.factors[i].atom, b.factors[j].atom);
    if (c < 0) {
      r.factors.push_back(a.factors[i++]);
    } else if (c > 0) {
      r.factors.push_back(b.factors[j++]);
    } else {
      Factor f = a.factors[i++];
      f.exp += b.factors[j++].exp;
      r.factors.push_back(f);
    }
  }
  for (; i < a.factors.size(); ++i) r.factors.push_back(a.factors[i]);
  for (; j < b.factors.size(); ++j) r.factors.push_back(b.factors[j]);
  return r;
}

}  // namespace detail

class Expr;
Expr simplify(const Expr& e);
Expr parse_expr(const std::string& text);

class Expr {
 public:
  Expr() : _node(detail::make_sum({})) {}

  static Expr integer(long long v) { return rational(Rat(v)); }

  static Expr rational(const Rat& r) {
    if (r == 0) return Expr();
    detail::Term t;
    t.coef = r;
    return Expr(detail::make_sum({t}));
  }

  static Expr symbol(const Symbol& s) {
    detail::Atom a;
    a.tag = detail::Atom::Tag::Sym;
    a.sym = s;
    return from_atom(a);
  }

  static Expr symbol(const std::string& full_name) { return symbol(Symbol::make(full_name)); }

  static Expr pi() {
    detail::Atom a;
    a.tag = detail::Atom::Tag::Pi;
    return from_atom(a);
  }

  static Expr sin(const Expr& u);
  static Expr cos(const Expr& u);

  bool is_zero() const { return _node->terms.empty(); }

  // True when the expression is a bare rational constant.
  bool rational_value(Rat* out = nullptr) const {
    if (_node->terms.empty()) {
      if (out) *out = 0;
      return true;
    }
    if (_node->terms.size() == 1 && _node->terms[0].factors.empty()) {
      if (out) *out = _node->terms[0].coef;
      return true;
    }
    return false;
  }

  friend Expr operator+(const Expr& a, const Expr& b) {
    std::vector<detail::Term> ts = a._node->terms;
    ts.insert(ts.end(), b._node->terms.begin(), b._node->terms.end());
    return Expr(detail::make_sum(std::move(ts)));
  }

  friend Expr operator-(const Expr& a) {
    std::vector<detail::Term> ts = a._node->terms;
    for (auto& t : ts) t.coef = -t.coef;
    return Expr(detail::make_sum(std::move(ts)));
  }

  friend Expr operator-(const Expr& a, const Expr& b) { return a + (-b); }

  friend Expr operator*(const Expr& a, const Expr& b) {
    std::vector<detail::Term> ts;
    ts.reserve(a._node->terms.size() * b._node->terms.size());
    for (const auto& x : a._node->terms)
      for (const auto& y : b._node->terms) ts.push_back(detail::term_mul(x, y));
    return Expr(detail::make_sum(std::move(ts)));
  }

  Expr pow(int k) const {
    if (k < 0) throw std::invalid_argument("Expr::pow: negative exponent unsupported");
    Expr r = integer(1);
    for (int i = 0; i < k; ++i) r = r * (*this);
    return r;
  }

  bool same_as(const Expr& o) const { return detail::cmp_sum(*_node, *o._node) == 0; }

  double eval(const std::map<std::string, double>& bindings) const {
    return eval_sum(*_node, bindings);
  }

  Expr diff_time() const;

  std::set<Symbol> symbols() const {
    std::set<Symbol> out;
    collect_symbols(*_node, out);
    return out;
  }

  std::string str(bool shorthand = false) const { return sum_str(*_node, shorthand); }

  const detail::Sum& node() const { return *_node; }
  detail::SumPtr node_ptr() const { return _node; }
  static Expr wrap(detail::SumPtr p) { return Expr(std::move(p)); }

 private:
  explicit Expr(detail::SumPtr n) : _node(std::move(n)) {}

  static Expr from_atom(const detail::Atom& a) {
    detail::Term t;
    t.coef = 1;
    t.factors.push_back({a, 1});
    return Expr(detail::make_sum({t}));
  }

  // p such that expr == p * pi, when the expression is exactly that shape.
  static bool pi_multiple(const detail::Sum& s, Rat* out) {
    if (s.terms.size() != 1) return false;
    const detail::Term& t = s.terms[0];
    if (t.factors.size() != 1 || t.factors[0].exp != 1) return false;
    if (t.factors[0].atom.tag != detail::Atom::Tag::Pi) return false;
    *out = t.coef;
    return true;
  }

  static bool leading_negative(const detail::Sum& s) {
    return !s.terms.empty() && s.terms[0].coef < 0;
  }

  static double eval_sum(const detail::Sum& s, const std::map<std::string, double>& b) {
    double out = 0.0;
    for (const auto& t : s.terms) {
      double v = t.coef.convert_to<double>();
      for (const auto& f : t.factors) {
        double av;
        switch (f.atom.tag) {
          case detail::Atom::Tag::Sym: {
            auto it = b.find(f.atom.sym.full_name());
            if (it == b.end())
              throw std::runtime_error("eval: unbound symbol '" + f.atom.sym.full_name() + "'");
            av = it->second;
            break;
          }
          case detail::Atom::Tag::Pi: av = M_PI; break;
          case detail::Atom::Tag::Sin: av = std::sin(eval_sum(*f.atom.arg, b)); break;
          case detail::Atom::Tag::Cos: av = std::cos(eval_sum(*f.atom.arg, b)); break;
          default: av = 0; break;
        }
        double p = 1.0;
        for (int i = 0; i < f.exp; ++i) p *= av;
        v *= p;
      }
      out += v;
    }
    return out;
  }

  static void collect_symbols(const detail::Sum& s, std::set<Symbol>& out) {
    for (const auto& t : s.terms)
      for (const auto& f : t.factors) {
        if (f.atom.tag == detail::Atom::Tag::Sym) out.insert(f.atom.sym);
        if (f.atom.tag == detail::Atom::Tag::Sin || f.atom.tag == detail::Atom::Tag::Cos)
          collect_symbols(*f.atom.arg, out);
      }
  }

  static std::string rat_str(const Rat& r);
  static std::string atom_str(const detail::Atom& a, bool shorthand);
  static std::string term_str(const detail::Term& t, bool shorthand);
  static std::string sum_str(const detail::Sum& s, bool shorthand);

  detail::SumPtr _node;

  friend Expr simplify(const Expr&);
};

inline Expr Expr::sin(const Expr& u) {
  Rat p;
  if (u.is_zero()) return integer(0);
  if (pi_multiple(*u._node, &p)) {
    Rat twice = p * 2;
    if (boost::multiprecision::denominator(twice) == 1) {
      BigInt k = boost::multiprecision::numerator(twice) % 4;
      if (k < 0) k += 4;
      static const int table[4] = {0, 1, 0, -1};
      return integer(table[k.convert_to<int>()]);
    }
  }
  if (leading_negative(*u._node)) return -sin(-u);
  detail::Atom a;
  a.tag = detail::Atom::Tag::Sin;
  a.arg = u._node;
  return from_atom(a);
}

inline Expr Expr::cos(const Expr& u) {
  Rat p;
  if (u.is_zero()) return integer(1);
  if (pi_multiple(*u._node, &p)) {
    Rat twice = p * 2;
    if (boost::multiprecision::denominator(twice) == 1) {
      BigInt k = boost::multiprecision::numerator(twice) % 4;
      if (k < 0) k += 4;
      static const int table[4] = {1, 0, -1, 0};
      return integer(table[k.convert_to<int>()]);
    }
  }
  if (leading_negative(*u._node)) return cos(-u);
  detail::Atom a;
  a.tag = detail::Atom::Tag::Cos;
  a.arg = u._node;
  return from_atom(a);
}

inline Expr Expr::diff_time() const {
  Expr out;
  for (const auto& t : _node->terms) {
    for (std::size_t i = 0; i < t.factors.size(); ++i) {
      const detail::Factor& f = t.factors[i];
      Expr datom;
      switch (f.atom.tag) {
        case detail::Atom::Tag::Sym: {
          const Symbol& s = f.atom.sym;
          if (s.kind == SymbolKind::JointAngle || s.kind == SymbolKind::JointDisplacement) {
            Symbol d = s;
            d.deriv += 1;
            datom = symbol(d);
          }
          break;
        }
        case detail::Atom::Tag::Sin:
          datom = cos(Expr::wrap(f.atom.arg)) * Expr::wrap(f.atom.arg).diff_time();
          break;
        case detail::Atom::Tag::Cos:
          datom = -sin(Expr::wrap(f.atom.arg)) * Expr::wrap(f.atom.arg).diff_time();
          break;
        default: break;  // pi
      }
      if (datom.is_zero()) continue;
      Expr piece = rational(t.coef) * rational(Rat(f.exp));
      for (std::size_t j = 0; j < t.factors.size(); ++j) {
        const detail::Factor& g = t.factors[j];
        int e = g.exp - (j == i ? 1 : 0);
        if (e == 0) continue;
        detail::Term ft;
        ft.coef = 1;
        ft.factors.push_back({g.atom, e});
        piece = piece * Expr(detail::make_sum({ft}));
      }
      out = out + piece * datom;
    }
  }
  return out;
}

inline std::string Expr::rat_str(const Rat& r) {
  BigInt num = boost::multiprecision::numerator(r);
  BigInt den = boost::multiprecision::denominator(r);
  if (den == 1) return num.str();
  // exact decimal when the denominator divides a power of ten
  BigInt d = den;
  int twos = 0, fives = 0;
  while (d % 2 == 0) { d /= 2; ++twos; }
  while (d % 5 == 0) { d /= 5; ++fives; }
  if (d == 1) {
    int k = std::max(twos, fives);
    BigInt scale = 1;
    for (int i = 0; i < k; ++i) scale *= 10;
    BigInt scaled = num * scale / den;
    bool neg = scaled < 0;
    std::string digits = (neg ? -scaled : scaled).str();
    if (static_cast<int>(digits.size()) <= k)
      digits = std::string(static_cast<std::size_t>(k + 1 - digits.size()), '0') + digits;
    digits.insert(digits.size() - static_cast<std::size_t>(k), ".");
    return (neg ? "-" : "") + digits;
  }
  return num.str() + "/" + den.str();
}

inline std::string Expr::atom_str(const detail::Atom& a, bool shorthand) {
  switch (a.tag) {
    case detail::Atom::Tag::Sym: return a.sym.full_name();
    case detail::Atom::Tag::Pi: return "pi";
    case detail::Atom::Tag::Sin:
    case detail::Atom::Tag::Cos: {
      bool is_sin = a.tag == detail::Atom::Tag::Sin;
      if (shorthand) {
        // c1, s23 style: only when the argument is a plain sum of
        // unit-coefficient joint angles
        std::string idx;
        bool ok = !a.arg->terms.empty();
        for (const auto& t : a.arg->terms) {
          if (t.coef != 1 || t.factors.size() != 1 || t.factors[0].exp != 1 ||
              t.factors[0].atom.tag != detail::Atom::Tag::Sym ||
              t.factors[0].atom.sym.kind != SymbolKind::JointAngle ||
              t.factors[0].atom.sym.deriv != 0) {
            ok = false;
            break;
          }
          const std::string& nm = t.factors[0].atom.sym.base;
          std::size_t d = nm.find_first_of("0123456789");
          if (d == std::string::npos) { ok = false; break; }
          idx += nm.substr(d);
        }
        if (ok) return (is_sin ? "s" : "c") + idx;
      }
      return std::string(is_sin ? "sin(" : "cos(") + sum_str(*a.arg, shorthand) + ")";
    }
  }
  return "?";
}

inline std::string Expr::term_str(const detail::Term& t, bool shorthand) {
  Rat mag = t.coef < 0 ? Rat(-t.coef) : t.coef;
  std::vector<std::string> parts;
  if (t.factors.empty() || mag != 1) parts.push_back(rat_str(mag));
  for (const auto& f : t.factors) {
    std::string s = atom_str(f.atom, shorthand);
    if (f.exp > 1) s += "^" + std::to_string(f.exp);
    parts.push_back(s);
  }
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += "*";
    out += parts[i];
  }
  return out;
}

inline std::string Expr::sum_str(const detail::Sum& s, bool shorthand) {
  if (s.terms.empty()) return "0";
  std::string out;
  for (std::size_t i = 0; i < s.terms.size(); ++i) {
    const auto& t = s.terms[i];
    bool neg = t.coef < 0;
    if (i == 0)
      out += neg ? "-" : "";
    else
      out += neg ? " - " : " + ";
    out += term_str(t, shorthand);
  }
  return out;
}

// ---------------------------------------------------------------------------
// simplify: recursively canonicalize trig arguments, then collapse
// cos(x)cos(y) -+ sin(x)sin(y) and sin(x)cos(y) +- cos(x)sin(y) pairs to
// fixpoint.  Matching is leftmost-pair-first and restarts after each
// rewrite; every rewrite removes a term, so the loop terminates.

namespace detail {

inline std::optional<Term> term_remove_one(const Term& t, std::size_t idx) {
  Term r = t;
  if (r.factors[idx].exp > 1)
    r.factors[idx].exp -= 1;
  else
    r.factors.erase(r.factors.begin() + static_cast<std::ptrdiff_t>(idx));
  return r;
}

inline Term term_mul_atom(const Term& t, const Atom& a) {
  Term single;
  single.coef = 1;
  single.factors.push_back({a, 1});
  return term_mul(t, single);
}

inline bool term_identical(const Term& a, const Term& b) {
  return a.coef == b.coef && cmp_factors(a.factors, b.factors) == 0;
}

}  // namespace detail

inline Expr simplify(const Expr& e) {
  using detail::Atom;
  using detail::Term;

  // rebuild with simplified trig arguments (smart constructors fold
  // constants and normalize argument signs)
  Expr acc;
  for (const auto& t : e.node().terms) {
    Expr piece = Expr::rational(t.coef);
    for (const auto& f : t.factors) {
      Expr a;
      switch (f.atom.tag) {
        case Atom::Tag::Sym: a = Expr::symbol(f.atom.sym); break;
        case Atom::Tag::Pi: a = Expr::pi(); break;
        case Atom::Tag::Sin: a = Expr::sin(simplify(Expr::wrap(f.atom.arg))); break;
        case Atom::Tag::Cos: a = Expr::cos(simplify(Expr::wrap(f.atom.arg))); break;
      }
      piece = piece * a.pow(f.exp);
    }
    acc = acc + piece;
  }

  std::vector<Term> terms = acc.node().terms;

  auto arg_of = [](const Atom& a) { return Expr::wrap(a.arg); };

  // Try to combine terms A and B into a single sum-angle term.
  auto try_pair = [&](const Term& A, const Term& B) -> std::optional<Expr> {
    // cos(x)cos(y) - sin(x)sin(y) -> cos(x+y);  + variant gives cos(x-y)
    for (std::size_t i = 0; i < A.factors.size(); ++i) {
      if (A.factors[i].atom.tag != Atom::Tag::Cos) continue;
      for (std::size_t j = i; j < A.factors.size(); ++j) {
        if (A.factors[j].atom.tag != Atom::Tag::Cos) continue;
        if (j == i && A.factors[i].exp < 2) continue;
        Expr x = arg_of(A.factors[i].atom), y = arg_of(A.factors[j].atom);
        Term R = *detail::term_remove_one(A, i);
        // removing i first keeps j valid because j >= i
        std::size_t j2 = j;
        if (j != i && A.factors[i].exp == 1) j2 = j - 1;
        R = *detail::term_remove_one(R, j2);
        Atom sx, sy;
        sx.tag = Atom::Tag::Sin;
        sx.arg = x.node_ptr();
        sy.tag = Atom::Tag::Sin;
        sy.arg = y.node_ptr();
        Term sinsin = detail::term_mul_atom(detail::term_mul_atom(R, sx), sy);
        Term neg = sinsin;
        neg.coef = -neg.coef;
        Term Rt = R;
        Expr Rexpr = Expr::wrap(detail::make_sum({Rt}));
        if (detail::term_identical(B, neg)) return Rexpr * Expr::cos(x + y);
        if (detail::term_identical(B, sinsin)) return Rexpr * Expr::cos(x - y);
      }
    }
    // sin(x)cos(y) + cos(x)sin(y) -> sin(x+y);  - variant gives sin(x-y)
    for (std::size_t i = 0; i < A.factors.size(); ++i) {
      if (A.factors[i].atom.tag != Atom::Tag::Sin) continue;
      for (std::size_t j = 0; j < A.factors.size(); ++j) {
        if (A.factors[j].atom.tag != Atom::Tag::Cos) continue;
        Expr x = arg_of(A.factors[i].atom), y = arg_of(A.factors[j].atom);
        Term R = A;
        std::size_t first = std::min(i, j), second = std::max(i, j);
        Term R1 = *detail::term_remove_one(R, second);
        R = *detail::term_remove_one(R1, first);
        Atom cx, sy;
        cx.tag = Atom::Tag::Cos;
        cx.arg = x.node_ptr();
        sy.tag = Atom::Tag::Sin;
        sy.arg = y.node_ptr();
        Term cossin = detail::term_mul_atom(detail::term_mul_atom(R, cx), sy);
        Term neg = cossin;
        neg.coef = -neg.coef;
        Expr Rexpr = Expr::wrap(detail::make_sum({R}));
        if (detail::term_identical(B, cossin)) return Rexpr * Expr::sin(x + y);
        if (detail::term_identical(B, neg)) return Rexpr * Expr::sin(x - y);
      }
    }
    return std::nullopt;
  };

  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < terms.size() && !changed; ++i) {
      for (std::size_t j = 0; j < terms.size() && !changed; ++j) {
        if (i == j) continue;
        auto r = try_pair(terms[i], terms[j]);
        if (!r) continue;
        std::vector<Term> rest;
        rest.reserve(terms.size());
        for (std::size_t k = 0; k < terms.size(); ++k)
          if (k != i && k != j) rest.push_back(terms[k]);
        Expr rebuilt = Expr::wrap(detail::make_sum(std::move(rest))) + *r;
        terms = rebuilt.node().terms;
        changed = true;
      }
    }
  }
  return Expr::wrap(detail::make_sum(std::move(terms)));
}

// ---------------------------------------------------------------------------
// Parser.  Grammar:
//   expr   := term (('+'|'-') term)*
//   term   := factor ('*' factor)*
//   factor := number | symbol | 'pi' | '-' factor | 'sin(' expr ')'
//           | 'cos(' expr ')' | '(' expr ')'
// plus an integer '^' exponent suffix on factors (the printer emits it for
// squared derivatives, so printed text round-trips).

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, std::size_t offset)
      : std::runtime_error(msg + " at offset " + std::to_string(offset)), _offset(offset) {}
  std::size_t offset() const { return _offset; }

 private:
  std::size_t _offset;
};

namespace detail {

class Parser {
 public:
  explicit Parser(const std::string& s) : _s(s) {}

  Expr parse() {
    Expr e = parse_sum();
    skip_ws();
    if (_pos != _s.size()) throw ParseError("trailing input", _pos);
    return e;
  }

 private:
  Expr parse_sum() {
    Expr e = parse_term();
    for (;;) {
      skip_ws();
      if (peek() == '+') {
        ++_pos;
        e = e + parse_term();
      } else if (peek() == '-') {
        ++_pos;
        e = e - parse_term();
      } else {
        return e;
      }
    }
  }

  Expr parse_term() {
    Expr e = parse_factor();
    for (;;) {
      skip_ws();
      if (peek() == '*') {
        ++_pos;
        e = e * parse_factor();
      } else {
        return e;
      }
    }
  }

  Expr parse_factor() {
    skip_ws();
    char c = peek();
    Expr base;
    if (c == '\0') throw ParseError("unexpected end of input", _pos);
    if (c == '-') {
      ++_pos;
      return -parse_factor();
    }
    if (c == '(') {
      ++_pos;
      base = parse_sum();
      expect(')');
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      base = parse_number();
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = _pos;
      std::string id = parse_ident();
      skip_ws();
      if (peek() == '(') {
        if (id == "sin" || id == "cos") {
          ++_pos;
          Expr arg = parse_sum();
          expect(')');
          base = id == "sin" ? Expr::sin(arg) : Expr::cos(arg);
        } else {
          throw ParseError("unknown function '" + id + "'", start);
        }
      } else if (id == "pi") {
        base = Expr::pi();
      } else {
        base = Expr::symbol(id);
      }
    } else {
      throw ParseError(std::string("unexpected character '") + c + "'", _pos);
    }
    skip_ws();
    if (peek() == '^') {
      ++_pos;
      skip_ws();
      std::size_t start = _pos;
      if (!std::isdigit(static_cast<unsigned char>(peek())))
        throw ParseError("expected integer exponent", start);
      long long k = 0;
      while (std::isdigit(static_cast<unsigned char>(peek()))) k = k * 10 + (_s[_pos++] - '0');
      base = base.pow(static_cast<int>(k));
    }
    return base;
  }

  Expr parse_number() {
    // accumulate digit by digit; string constructors would read a leading
    // zero (as in ".0825") as a base prefix
    BigInt ipart = 0;
    while (std::isdigit(static_cast<unsigned char>(peek())))
      ipart = ipart * 10 + (_s[_pos++] - '0');
    Rat r(ipart);
    if (peek() == '.') {
      ++_pos;
      std::size_t fs = _pos;
      BigInt frac = 0, scale = 1;
      while (std::isdigit(static_cast<unsigned char>(peek()))) {
        frac = frac * 10 + (_s[_pos++] - '0');
        scale *= 10;
      }
      if (fs == _pos) throw ParseError("expected digits after decimal point", _pos);
      r += Rat(frac, scale);
    }
    return Expr::rational(r);
  }

  std::string parse_ident() {
    std::size_t start = _pos;
    while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_') ++_pos;
    return _s.substr(start, _pos - start);
  }

  void expect(char c) {
    skip_ws();
    if (peek() != c)
      throw ParseError(std::string("expected '") + c + "'", _pos);
    ++_pos;
  }

  char peek() const { return _pos < _s.size() ? _s[_pos] : '\0'; }
  void skip_ws() {
    while (_pos < _s.size() && std::isspace(static_cast<unsigned char>(_s[_pos]))) ++_pos;
  }

  const std::string& _s;
  std::size_t _pos = 0;
};

}  // namespace detail

inline Expr parse_expr(const std::string& text) { return detail::Parser(text).parse(); }

// Probabilistic equality oracle: seeded uniform samples of every symbol,
// joint angles in [-pi, pi], all other kinds in [0.1, 2].
inline bool equal_on_samples(const Expr& a, const Expr& b, int n, std::uint64_t seed) {
  std::set<Symbol> syms = a.symbols();
  for (const auto& s : b.symbols()) syms.insert(s);
  SplitMix64 rng(seed);
  for (int k = 0; k < n; ++k) {
    std::map<std::string, double> bind;
    for (const auto& s : syms) {
      double lo = 0.1, hi = 2.0;
      if (s.kind == SymbolKind::JointAngle) {
        lo = -M_PI;
        hi = M_PI;
      }
      bind[s.full_name()] = rng.uniform(lo, hi);
    }
    double va = a.eval(bind), vb = b.eval(bind);
    if (std::abs(va - vb) > 1e-9 * (1.0 + std::abs(va))) return false;
  }
  return true;
}

}  // namespace armkit::sym
