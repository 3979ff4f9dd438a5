#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <string>

#include "armkit/expr.hpp"
#include "armkit/prng.hpp"

using armkit::SplitMix64;
using namespace armkit::sym;

// ---------------------------------------------------------------------------
// Independent oracle: evaluates expression text directly during parsing,
// double arithmetic only, no tree is ever built.  Deliberately structured
// differently from the library parser so a shared bug is unlikely.

namespace {

struct OracleEval {
  const std::string& s;
  const std::map<std::string, double>& env;
  std::size_t p = 0;

  double run() {
    double v = sum();
    ws();
    if (p != s.size()) throw std::runtime_error("oracle: trailing input");
    return v;
  }

  double sum() {
    double v = prod();
    for (;;) {
      ws();
      if (p < s.size() && s[p] == '+') { ++p; v += prod(); }
      else if (p < s.size() && s[p] == '-') { ++p; v -= prod(); }
      else return v;
    }
  }

  double prod() {
    double v = fac();
    for (;;) {
      ws();
      if (p < s.size() && s[p] == '*') { ++p; v *= fac(); }
      else return v;
    }
  }

  double fac() {
    ws();
    double v;
    if (p >= s.size()) throw std::runtime_error("oracle: eof");
    char c = s[p];
    if (c == '-') { ++p; return -fac(); }
    if (c == '(') {
      ++p; v = sum(); ws();
      if (s.at(p) != ')') throw std::runtime_error("oracle: paren");
      ++p;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t start = p;
      while (p < s.size() && (std::isdigit(static_cast<unsigned char>(s[p])) || s[p] == '.')) ++p;
      v = std::stod(s.substr(start, p - start));
    } else {
      std::size_t start = p;
      while (p < s.size() && (std::isalnum(static_cast<unsigned char>(s[p])) || s[p] == '_')) ++p;
      std::string id = s.substr(start, p - start);
      ws();
      if (p < s.size() && s[p] == '(' && (id == "sin" || id == "cos")) {
        ++p;
        double a = sum();
        ws();
        if (s.at(p) != ')') throw std::runtime_error("oracle: paren");
        ++p;
        v = id == "sin" ? std::sin(a) : std::cos(a);
      } else if (id == "pi") {
        v = M_PI;
      } else {
        v = env.at(id);
      }
    }
    ws();
    if (p < s.size() && s[p] == '^') {
      ++p;
      ws();
      std::size_t start = p;
      while (p < s.size() && std::isdigit(static_cast<unsigned char>(s[p]))) ++p;
      int k = std::stoi(s.substr(start, p - start));
      double r = 1;
      for (int i = 0; i < k; ++i) r *= v;
      v = r;
    }
    return v;
  }

  void ws() {
    while (p < s.size() && std::isspace(static_cast<unsigned char>(s[p]))) ++p;
  }
};

double oracle(const std::string& text, const std::map<std::string, double>& env) {
  OracleEval e{text, env};
  return e.run();
}

// Random grammar-guided expression text for property tests.
std::string random_expr_text(SplitMix64& rng, int depth) {
  static const char* syms[] = {"theta1", "theta2", "q3", "d1", "L1", "L2", "a"};
  if (depth <= 0 || rng.u01() < 0.3) {
    switch (rng.next() % 4) {
      case 0: return syms[rng.next() % 7];
      case 1: return std::to_string(rng.next() % 9);
      case 2: return "0." + std::to_string(1 + rng.next() % 9);
      default: return "pi";
    }
  }
  switch (rng.next() % 6) {
    case 0: return random_expr_text(rng, depth - 1) + " + " + random_expr_text(rng, depth - 1);
    case 1: return random_expr_text(rng, depth - 1) + " - " + random_expr_text(rng, depth - 1);
    case 2: return random_expr_text(rng, depth - 1) + "*" + random_expr_text(rng, depth - 1);
    case 3: return "sin(" + random_expr_text(rng, depth - 1) + ")";
    case 4: return "cos(" + random_expr_text(rng, depth - 1) + ")";
    default: return "-(" + random_expr_text(rng, depth - 1) + ")";
  }
}

std::map<std::string, double> sample_env(SplitMix64& rng) {
  std::map<std::string, double> env;
  for (const char* n : {"theta1", "theta2", "q3"}) env[n] = rng.uniform(-M_PI, M_PI);
  for (const char* n : {"d1", "L1", "L2", "a"}) env[n] = rng.uniform(0.1, 2.0);
  return env;
}

}  // namespace

TEST_CASE("parse literals and simple forms") {
  CHECK(parse_expr("0").is_zero());
  Rat r;
  CHECK(parse_expr("0.333").rational_value(&r));
  CHECK(r == Rat(333, 1000));
  CHECK(parse_expr("L1 + L2*cos(theta2)").str() == "L1 + L2*cos(theta2)");
  CHECK(parse_expr("2*3").str() == "6");
  CHECK(parse_expr("-x").str() == "-x");
}

TEST_CASE("parse errors carry byte offsets") {
  CHECK_THROWS_AS(parse_expr("sin("), ParseError);
  try {
    parse_expr("sin(");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 4);
  }
  CHECK_THROWS_AS(parse_expr("tan(x)"), ParseError);
  CHECK_THROWS_AS(parse_expr("1 + "), ParseError);
  CHECK_THROWS_AS(parse_expr(")"), ParseError);
}

TEST_CASE("eval matches the direct oracle") {
  std::map<std::string, double> env{{"theta1", 0.5}, {"theta2", 0.25}, {"L1", 1.0}, {"L2", 2.0}};
  const std::string text = "(L1 + L2*cos(theta2))*cos(theta1)";
  CHECK(parse_expr(text).eval(env) == Catch::Approx(oracle(text, env)).epsilon(1e-13));

  CHECK(parse_expr("sin(theta1)").eval({{"theta1", 0.0}}) == 0.0);

  std::map<std::string, double> env2{{"a", 0.3}, {"b", 0.4}};
  CHECK(parse_expr("cos(a)*cos(b) - sin(a)*sin(b)").eval(env2) ==
        Catch::Approx(std::cos(0.7)).margin(1e-12));
}

TEST_CASE("eval on random expressions agrees with the oracle") {
  SplitMix64 rng(101);
  for (int it = 0; it < 300; ++it) {
    std::string text = random_expr_text(rng, 4);
    auto env = sample_env(rng);
    double got = parse_expr(text).eval(env);
    double want = oracle(text, env);
    REQUIRE(std::abs(got - want) <= 1e-9 * (1.0 + std::abs(want)));
  }
}

TEST_CASE("unbound symbol is named in the eval error") {
  try {
    parse_expr("L9 + 1").eval({});
    FAIL("expected eval to throw");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("L9") != std::string::npos);
  }
}

TEST_CASE("canonical ordering: permutations parse to identical trees") {
  CHECK(parse_expr("a + L1*cos(theta1)").same_as(parse_expr("cos(theta1)*L1 + a")));
  CHECK(parse_expr("L1*L2*cos(theta1)").same_as(parse_expr("cos(theta1)*L2*L1")));
  CHECK(parse_expr("a - a").is_zero());
  SplitMix64 rng(55);
  for (int it = 0; it < 100; ++it) {
    std::string x = random_expr_text(rng, 3), y = random_expr_text(rng, 3);
    CHECK(parse_expr(x + " + " + y).same_as(parse_expr(y + " + " + x)));
    CHECK(parse_expr("(" + x + ")*(" + y + ")").same_as(parse_expr("(" + y + ")*(" + x + ")")));
  }
}

TEST_CASE("printed canonical text re-parses to the same expression") {
  SplitMix64 rng(77);
  for (int it = 0; it < 200; ++it) {
    Expr e = parse_expr(random_expr_text(rng, 4));
    CHECK(parse_expr(e.str()).same_as(e));
    Expr s = simplify(e);
    CHECK(parse_expr(s.str()).same_as(s));
  }
}

TEST_CASE("sum-angle collapse") {
  CHECK(simplify(parse_expr("cos(t1)*cos(t2) - sin(t1)*sin(t2)")).str() == "cos(t1 + t2)");
  CHECK(simplify(parse_expr("sin(t1)*cos(t2) + cos(t1)*sin(t2)")).str() == "sin(t1 + t2)");
  CHECK(simplify(parse_expr("cos(t1)*cos(t2) + sin(t1)*sin(t2)"))
            .same_as(Expr::cos(parse_expr("t1 - t2"))));
  CHECK(simplify(parse_expr("sin(t1)*cos(t2) - cos(t1)*sin(t2)"))
            .same_as(Expr::sin(parse_expr("t1 - t2"))));

  // shared non-unit coefficient
  CHECK(simplify(parse_expr("2*L1*cos(a)*cos(b) - 2*L1*sin(a)*sin(b)")).str() ==
        "2*L1*cos(a + b)");

  // pythagorean identity falls out of the difference rule
  CHECK(simplify(parse_expr("cos(t)*cos(t) + sin(t)*sin(t)")).str() == "1");
  CHECK(simplify(parse_expr("cos(t)^2 - sin(t)^2")).str() == "cos(2*t)");

  // the (1,1) entry pattern of a 3R chain: c1c2c3 - c1s2s3 - s1s2c3 - s1c2s3
  Expr e = parse_expr(
      "cos(theta1)*cos(theta2)*cos(theta3) - cos(theta1)*sin(theta2)*sin(theta3)"
      " - sin(theta1)*sin(theta2)*cos(theta3) - sin(theta1)*cos(theta2)*sin(theta3)");
  CHECK(simplify(e).same_as(Expr::cos(parse_expr("theta1 + theta2 + theta3"))));
}

TEST_CASE("simplify is value-preserving and idempotent") {
  SplitMix64 rng(31);
  for (int it = 0; it < 150; ++it) {
    Expr e = parse_expr(random_expr_text(rng, 4));
    Expr s = simplify(e);
    CHECK(equal_on_samples(e, s, 25, 1000 + it));
    CHECK(simplify(s).same_as(s));
  }
}

TEST_CASE("pi multiples fold exactly") {
  CHECK(Expr::cos(Expr::pi()).str() == "-1");
  CHECK(Expr::sin(Expr::pi()).is_zero());
  CHECK(parse_expr("cos(pi)").str() == "-1");
  CHECK(parse_expr("sin(0.5*pi)").str() == "1");
  CHECK(parse_expr("cos(0.5*pi)").is_zero());
  CHECK(parse_expr("sin(-0.5*pi)").str() == "-1");
  CHECK(parse_expr("cos(2*pi)").str() == "1");
  // non-half multiples stay symbolic
  CHECK(parse_expr("cos(0.25*pi)").str() == "cos(0.25*pi)");
}

TEST_CASE("argument sign normalization") {
  CHECK(parse_expr("sin(-theta1)").same_as(-Expr::sin(Expr::symbol("theta1"))));
  CHECK(parse_expr("cos(-theta1)").same_as(Expr::cos(Expr::symbol("theta1"))));
  CHECK(parse_expr("sin(-theta1 - theta2)").str() == "-sin(theta1 + theta2)");
}

TEST_CASE("diff_time chain rule") {
  Expr e = Expr::sin(Expr::symbol("theta1"));
  CHECK(e.diff_time().str() == "theta1_dot*cos(theta1)");

  Expr f = parse_expr("L1*cos(theta1)");
  CHECK(f.diff_time().same_as(parse_expr("-L1*theta1_dot*sin(theta1)")));

  Expr g = f.diff_time().diff_time();
  CHECK(g.same_as(
      parse_expr("-L1*theta1_ddot*sin(theta1) - L1*theta1_dot^2*cos(theta1)")));

  // constants and lengths are time-invariant
  CHECK(parse_expr("L1 + pi + 3").diff_time().is_zero());
  // prismatic displacement
  CHECK(parse_expr("d1").diff_time().str() == "d1_dot");
}

TEST_CASE("diff_time is linear") {
  SplitMix64 rng(91);
  for (int it = 0; it < 60; ++it) {
    Expr a = parse_expr(random_expr_text(rng, 3));
    Expr b = parse_expr(random_expr_text(rng, 3));
    CHECK(equal_on_samples((a + b).diff_time(), a.diff_time() + b.diff_time(), 20, 500 + it));
  }
}

TEST_CASE("diff_time agrees with finite differences along a trajectory") {
  // theta1(t) = sin(w t); compare d/dt eval(e) against eval(diff_time(e))
  Expr e = parse_expr("L1*cos(theta1) + sin(theta1)*sin(theta1)");
  Expr de = e.diff_time();
  double w = 1.3, L1 = 0.8, h = 1e-4;
  for (double t : {0.2, 0.7, 1.9}) {
    auto at = [&](double tt) {
      return e.eval({{"theta1", std::sin(w * tt)}, {"L1", L1}});
    };
    double fd = (at(t + h) - at(t - h)) / (2 * h);
    double an = de.eval({{"theta1", std::sin(w * t)},
                         {"theta1_dot", w * std::cos(w * t)},
                         {"L1", L1}});
    CHECK(std::abs(fd - an) < 1e-5);
  }
}

TEST_CASE("equal_on_samples distinguishes unequal expressions") {
  CHECK(equal_on_samples(parse_expr("cos(t)*cos(t) + sin(t)*sin(t)"), parse_expr("1"), 100, 7));
  CHECK(equal_on_samples(parse_expr("cos(t1 + t2)"),
                         parse_expr("cos(t1)*cos(t2) - sin(t1)*sin(t2)"), 100, 7));
  CHECK_FALSE(equal_on_samples(parse_expr("cos(t1 + t2)"), parse_expr("cos(t1) + cos(t2)"),
                               100, 7));
}

TEST_CASE("derivative symbols print and re-parse") {
  Symbol s = Symbol::make("theta1_ddot");
  CHECK(s.base == "theta1");
  CHECK(s.deriv == 2);
  CHECK(s.full_name() == "theta1_ddot");
  CHECK(s.kind == SymbolKind::JointAngle);

  // non-joint bases never parse a derivative suffix
  Symbol t = Symbol::make("L1_dot");
  CHECK(t.deriv == 0);
  CHECK(t.kind == SymbolKind::GenericConstant);
}

TEST_CASE("shorthand printer emits the compact trig form") {
  Expr e = simplify(parse_expr("cos(theta1)*cos(theta2) - sin(theta1)*sin(theta2)"));
  CHECK(e.str(true) == "c12");
  CHECK(parse_expr("sin(theta2)").str(true) == "s2");
  // non-unit coefficients in the argument fall back to full text
  CHECK(parse_expr("cos(2*theta1)").str(true) == "cos(2*theta1)");
}
