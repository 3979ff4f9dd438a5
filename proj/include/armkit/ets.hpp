// Elementary transform sequences: the text grammar, the parsed data model,
// and the robot registry that hands out opaque ids for registered models.
//
// An ETS is an ordered product of elementary rotations and translations along
// the principal axes.  Each transform argument is either a joint variable
// (with an optional sign flip) or a constant expression such as a link length
// or a numeric offset.  Joint variables are renumbered to 0-based
// first-appearance order at parse time; the spelling in the input only
// determines the joint kind (q/theta revolute, d prismatic) and identity.

#pragma once

#include <cctype>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "armkit/expr.hpp"
#include "armkit/prng.hpp"

namespace armkit::ets {

enum class Axis { X, Y, Z };

inline char axis_char(Axis a) {
  switch (a) {
    case Axis::X: return 'x';
    case Axis::Y: return 'y';
    default: return 'z';
  }
}

struct JointRef {
  int index = 0;
  bool flipped = false;

  friend bool operator==(const JointRef&, const JointRef&) = default;
};

struct ET {
  Axis axis = Axis::X;
  bool rotation = false;
  std::variant<JointRef, sym::Expr> arg;

  bool is_joint() const { return std::holds_alternative<JointRef>(arg); }
  const JointRef& joint() const { return std::get<JointRef>(arg); }
  const sym::Expr& constant() const { return std::get<sym::Expr>(arg); }
};

inline bool structurally_equal(const ET& a, const ET& b) {
  if (a.axis != b.axis || a.rotation != b.rotation) return false;
  if (a.is_joint() != b.is_joint()) return false;
  if (a.is_joint()) return a.joint() == b.joint();
  return a.constant().same_as(b.constant());
}

struct ETS {
  std::vector<ET> transforms;
  int joint_count = 0;

  // true at index j when joint j drives a translation.
  std::vector<bool> prismatic() const {
    std::vector<bool> out(static_cast<std::size_t>(joint_count), false);
    for (const ET& t : transforms)
      if (t.is_joint()) out[static_cast<std::size_t>(t.joint().index)] = !t.rotation;
    return out;
  }
};

inline bool structurally_equal(const ETS& a, const ETS& b) {
  if (a.joint_count != b.joint_count || a.transforms.size() != b.transforms.size())
    return false;
  for (std::size_t i = 0; i < a.transforms.size(); ++i)
    if (!structurally_equal(a.transforms[i], b.transforms[i])) return false;
  return true;
}

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at offset " + std::to_string(offset)),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

namespace detail {

// A joint token is an optional '-', a kind prefix, and a run of digits
// spanning the whole argument text.  Returns the token without the sign.
inline std::optional<std::pair<std::string, bool>> joint_token(const std::string& arg) {
  std::size_t p = 0;
  bool flip = false;
  if (p < arg.size() && arg[p] == '-') {
    flip = true;
    ++p;
  }
  std::size_t body = p;
  if (arg.compare(p, 5, "theta") == 0)
    p += 5;
  else if (p < arg.size() && (arg[p] == 'q' || arg[p] == 'd'))
    p += 1;
  else
    return std::nullopt;
  if (p >= arg.size()) return std::nullopt;
  for (std::size_t i = p; i < arg.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(arg[i]))) return std::nullopt;
  return std::make_pair(arg.substr(body), flip);
}

}  // namespace detail

inline ETS parse_ets(const std::string& text) {
  ETS out;
  std::map<std::string, int> joints;
  std::size_t pos = 0;
  auto skip_ws = [&] {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  };

  skip_ws();
  if (pos == text.size()) throw ParseError("empty transform sequence", pos);
  while (pos < text.size()) {
    std::size_t et_start = pos;
    if (pos + 1 >= text.size() || (text[pos] != 'R' && text[pos] != 't') ||
        (text[pos + 1] != 'x' && text[pos + 1] != 'y' && text[pos + 1] != 'z'))
      throw ParseError("expected one of Rx Ry Rz tx ty tz", et_start);

    ET et;
    et.rotation = text[pos] == 'R';
    et.axis = text[pos + 1] == 'x' ? Axis::X : text[pos + 1] == 'y' ? Axis::Y : Axis::Z;
    pos += 2;
    if (pos >= text.size() || text[pos] != '(')
      throw ParseError("expected '('", pos);
    ++pos;

    std::size_t arg_start = pos;
    int depth = 1;
    while (pos < text.size() && depth > 0) {
      if (text[pos] == '(') ++depth;
      if (text[pos] == ')') --depth;
      ++pos;
    }
    if (depth != 0) throw ParseError("unbalanced parentheses", arg_start - 1);
    std::string arg = text.substr(arg_start, pos - 1 - arg_start);

    std::size_t trim_front = 0;
    while (trim_front < arg.size() && std::isspace(static_cast<unsigned char>(arg[trim_front])))
      ++trim_front;
    std::size_t trim_back = arg.size();
    while (trim_back > trim_front && std::isspace(static_cast<unsigned char>(arg[trim_back - 1])))
      --trim_back;
    std::string body = arg.substr(trim_front, trim_back - trim_front);
    if (body.empty()) throw ParseError("empty argument", arg_start);

    if (auto jt = detail::joint_token(body)) {
      const auto& [token, flip] = *jt;
      bool displacement = token[0] == 'd';
      if (et.rotation && displacement)
        throw ParseError("rotation uses displacement variable '" + token + "'",
                         arg_start + trim_front);
      if (!et.rotation && !displacement)
        throw ParseError("translation uses angle variable '" + token + "'",
                         arg_start + trim_front);
      if (joints.count(token))
        throw ParseError("duplicate joint variable '" + token + "'", arg_start + trim_front);
      int index = static_cast<int>(joints.size());
      joints[token] = index;
      et.arg = JointRef{index, flip};
    } else {
      sym::Expr value;
      try {
        value = sym::parse_expr(body);
      } catch (const sym::ParseError& e) {
        throw ParseError(e.what(), arg_start + trim_front + e.offset());
      }
      for (const sym::Symbol& s : value.symbols())
        if (s.kind == sym::SymbolKind::JointAngle ||
            s.kind == sym::SymbolKind::JointDisplacement)
          throw ParseError("joint variable '" + s.full_name() +
                               "' inside constant expression",
                           arg_start + trim_front);
      et.arg = value;
    }
    out.transforms.push_back(std::move(et));
    skip_ws();
  }
  out.joint_count = static_cast<int>(joints.size());
  return out;
}

// Canonical text: joint j prints as q{j+1} (revolute) or d{j+1} (prismatic),
// constants print in expression canonical form, transforms joined by one space.
inline std::string format_ets(const ETS& e) {
  std::string out;
  for (const ET& t : e.transforms) {
    if (!out.empty()) out += ' ';
    out += t.rotation ? 'R' : 't';
    out += axis_char(t.axis);
    out += '(';
    if (t.is_joint()) {
      const JointRef& j = t.joint();
      if (j.flipped) out += '-';
      out += t.rotation ? 'q' : 'd';
      out += std::to_string(j.index + 1);
    } else {
      out += t.constant().str();
    }
    out += ')';
  }
  return out;
}

struct RobotModel {
  std::string id;  // assigned by the registry; empty until registered
  std::string name;
  ETS ets;
  std::vector<bool> prismatic;
  std::map<std::string, std::vector<double>> configurations;
  std::map<std::string, double> constants;

  int njoints() const { return ets.joint_count; }
};

inline RobotModel make_robot(const std::string& name, const ETS& e,
                             std::map<std::string, double> constants = {}) {
  RobotModel m;
  m.name = name;
  m.ets = e;
  m.prismatic = e.prismatic();
  m.configurations["qz"] = std::vector<double>(static_cast<std::size_t>(e.joint_count), 0.0);
  m.constants = std::move(constants);
  return m;
}

class InvalidRobotId : public std::runtime_error {
 public:
  InvalidRobotId() : std::runtime_error("Invalid robot ID") {}
};

// Concurrent readers, serialized registration.  Ids are UUID-format strings
// drawn from the registry's own deterministic stream.
class RobotRegistry {
 public:
  explicit RobotRegistry(std::uint64_t seed = 0) : rng_(seed) {}

  std::string add(RobotModel model) {
    std::unique_lock lock(mu_);
    std::string id = uuid_from(rng_);
    model.id = id;
    models_.emplace(id, std::move(model));
    return id;
  }

  RobotModel find(const std::string& id) const {
    std::shared_lock lock(mu_);
    auto it = models_.find(id);
    if (it == models_.end()) throw InvalidRobotId();
    return it->second;
  }

  bool contains(const std::string& id) const {
    std::shared_lock lock(mu_);
    return models_.count(id) != 0;
  }

  std::vector<std::string> ids() const {
    std::shared_lock lock(mu_);
    std::vector<std::string> out;
    for (const auto& [id, m] : models_) out.push_back(id);
    return out;
  }

 private:
  mutable std::shared_mutex mu_;
  SplitMix64 rng_;
  std::map<std::string, RobotModel> models_;
};

inline std::string register_robot(RobotRegistry& registry, const std::string& name,
                                  const ETS& e, std::map<std::string, double> constants = {}) {
  return registry.add(make_robot(name, e, std::move(constants)));
}

// The two fully-specified built-in arms.  The returned model is a template;
// register it to obtain an id.
inline RobotModel builtin_model(const std::string& name) {
  if (name == "panda") {
    RobotModel m = make_robot(
        "panda",
        parse_ets("tz(0.333) Rz(q1) Ry(q2) tz(0.316) Rz(q3) tx(0.0825) Ry(-q4) "
                  "tx(-0.0825) tz(0.384) Rz(q5) Ry(-q6) tx(0.088) Rx(pi) tz(0.107) Rz(q7)"));
    m.configurations["qr"] = {0.0, -0.3, 0.0, -2.2, 0.0, 2.0, 0.79};
    return m;
  }
  if (name == "ur3") {
    RobotModel m = make_robot(
        "ur3",
        parse_ets("tz(0.1519) Rz(q1) ty(0.1198) Ry(q2) ty(-0.0925) tz(0.2437) Ry(q3) "
                  "tz(0.2132) Ry(q4) ty(0.08505) Rz(q5) tz(0.08535) Ry(q6) ty(0.0819)"));
    m.configurations["qr"] = {0.0, -1.5708, 1.5708, -1.5708, -1.5708, 0.0};
    return m;
  }
  throw std::invalid_argument("no parameter set is available for '" + name +
                              "'; available built-ins: panda, ur3");
}

}  // namespace armkit::ets
