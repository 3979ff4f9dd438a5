// Text-generation backends behind the agent pipeline.  The scripted backend
// answers from fixture tables and fixed rules, so every pipeline test runs
// offline and bit-for-bit reproducibly; the remote backend adapts the same
// role protocol onto an HTTP chat-completion endpoint.
//
// Roles and their context/response shapes:
//   route:   {text, retrieved, attachment_pending, extracted} -> {route}
//   extract: {description}                  -> {ets} | {error}
//   plan:    {goal, has_ets}                -> {goal_summary, tools} | {error}
//   react:   {query, attempt, step, feedback} -> {tool, arguments} | {final}
//   inspect: {plan_tools, calls, answer_quantities, answer_failure,
//             last_error, robot_id}         -> {accepted, feedback?}

#pragma once

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace armkit::agents {

using json = nlohmann::json;

struct UsageRecord {
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
  double runtime_seconds = 0;
  double cost = 0;

  long long total_tokens() const { return prompt_tokens + completion_tokens; }
};

class BackendError : public std::runtime_error {
 public:
  explicit BackendError(const std::string& what) : std::runtime_error(what) {}
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string name() const = 0;
  virtual json complete(const std::string& role, const json& context, UsageRecord& usage) = 0;
};

// Lowercase with runs of whitespace collapsed, for containment matching.
inline std::string normalize_text(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool in_space = true;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!in_space) out.push_back(' ');
      in_space = true;
    } else {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      in_space = false;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

inline bool contains_all(const std::string& normalized, const json& needles) {
  for (const json& n : needles)
    if (normalized.find(normalize_text(n.get<std::string>())) == std::string::npos) return false;
  return true;
}

// What each tool, once planned and executed, must contribute to the final
// answer; inspection rejects answers that drop a produced quantity.
inline const std::map<std::string, std::string>& tool_quantity_tokens() {
  static const std::map<std::string, std::string> m = {
      {"Symbolic_Forward_Kinematic_ET", "symbolic_fk"},
      {"Symbolic_EndEffector_Velocity", "velocity"},
      {"Symbolic_EndEffector_Acceleration", "acceleration"},
      {"Symbolic_Jacobian", "jacobian"},
      {"create_custom_userdefined_robot", "robot_id"},
      {"create_robotictoolbox_robot", "robot_id"},
      {"forward_kinematics_custom_userdefined_robot", "fk"},
      {"inverse_kinematics", "ik_solution"},
      {"compute_Jacobian", "jacobian"},
      {"plot_custom_robot_motion", "trajectory"},
      {"plot_robot_motion", "trajectory"},
      {"simulate_robot_motion_Position_based_Servoing", "trajectory"},
      {"simulate_joint_velocity", "trajectory"},
      {"simulate_ee_velocity", "trajectory"},
      {"quintic_joint_trajectory", "trajectory"},
      {"export_trajectory", "trajectory"},
  };
  return m;
}

class ScriptedBackend : public Backend {
 public:
  explicit ScriptedBackend(const std::string& fixtures_dir) {
    _extract_rules = load_rules(fixtures_dir + "/extract.json");
    _react_rules = load_rules(fixtures_dir + "/react.json");
  }

  std::string name() const override { return "scripted"; }

  json complete(const std::string& role, const json& ctx, UsageRecord&) override {
    if (role == "route") return decide_route(ctx);
    if (role == "extract") return decide_extract(ctx);
    if (role == "plan") return decide_plan(ctx);
    if (role == "react") return decide_react(ctx);
    if (role == "inspect") return decide_inspect(ctx);
    throw BackendError("unknown backend role '" + role + "'");
  }

 private:
  json _extract_rules;
  json _react_rules;

  static json load_rules(const std::string& path) {
    std::ifstream in(path);
    if (!in.good()) return json::array();
    json rules = json::parse(in, nullptr, true, true);
    if (!rules.is_array()) throw BackendError("rule file is not a JSON array: " + path);
    return rules;
  }

  static bool mentions_any(const std::string& s, std::initializer_list<const char*> keys) {
    for (const char* k : keys)
      if (s.find(k) != std::string::npos) return true;
    return false;
  }

  bool looks_structural(const std::string& normalized) const {
    for (const json& rule : _extract_rules)
      if (contains_all(normalized, rule.at("contains"))) return true;
    int hits = 0;
    for (const char* phrase : {"rotates about", "rotation of", "rotational motion",
                               "translates along", "translation of", "translational motion",
                               "revolute joint", "prismatic joint", "kinematic chain"})
      for (std::size_t at = normalized.find(phrase); at != std::string::npos;
           at = normalized.find(phrase, at + 1))
        ++hits;
    return hits >= 2;
  }

  json decide_route(const json& ctx) const {
    if (ctx.value("attachment_pending", false)) return {{"route", "retriever"}};
    std::string combined = normalize_text(ctx.value("text", ""));
    if (ctx.contains("retrieved") && ctx["retrieved"].is_string())
      combined += " " + normalize_text(ctx["retrieved"].get<std::string>());
    if (!ctx.value("extracted", false) && looks_structural(combined))
      return {{"route", "extractor"}};
    if (mentions_any(combined, {"search the web", "search online", "browse the internet",
                                "look up on the web", "latest news"}))
      return {{"route", "researcher"}};
    return {{"route", "planner"}};
  }

  json decide_extract(const json& ctx) const {
    std::string normalized = normalize_text(ctx.at("description").get<std::string>());
    for (const json& rule : _extract_rules)
      if (contains_all(normalized, rule.at("contains"))) return {{"ets", rule.at("ets")}};
    return {{"error", "no scripted extraction matches the description"}};
  }

  json decide_plan(const json& ctx) const {
    std::string g = normalize_text(ctx.at("goal").get<std::string>());
    bool has_ets = ctx.value("has_ets", false);
    std::vector<std::string> tools;
    if (has_ets) {
      if (g.find("velocity") != std::string::npos && g.find("acceleration") != std::string::npos)
        tools = {"Symbolic_Forward_Kinematic_ET", "Symbolic_EndEffector_Velocity",
                 "Symbolic_EndEffector_Acceleration"};
      else if (g.find("jacobian") != std::string::npos)
        tools = {"Symbolic_Jacobian"};
      else if (g.find("inverse kinematic") != std::string::npos)
        tools = {"create_custom_userdefined_robot", "inverse_kinematics",
                 "plot_custom_robot_motion"};
      else if (g.find("symbolic forward kinematic") != std::string::npos &&
               g.find("plot") != std::string::npos)
        tools = {"Symbolic_Forward_Kinematic_ET", "create_custom_userdefined_robot",
                 "plot_custom_robot_motion"};
      else if (g.find("symbolic forward kinematic") != std::string::npos)
        tools = {"Symbolic_Forward_Kinematic_ET"};
      else if (g.find("forward kinematic") != std::string::npos &&
               g.find("joint configuration") != std::string::npos)
        tools = {"create_custom_userdefined_robot",
                 "forward_kinematics_custom_userdefined_robot", "plot_custom_robot_motion"};
      else if (g.find("plot") != std::string::npos)
        tools = {"Symbolic_Forward_Kinematic_ET", "create_custom_userdefined_robot",
                 "plot_custom_robot_motion"};
      else
        tools = {"Symbolic_Forward_Kinematic_ET"};
    } else {
      if (g.find("jacobian") != std::string::npos)
        tools = {"create_robotictoolbox_robot", "plot_robot_motion", "compute_Jacobian"};
      else if (mentions_any(g, {"position controller", "position-based", "servo"}))
        tools = {"create_robotictoolbox_robot",
                 "simulate_robot_motion_Position_based_Servoing"};
      else if (mentions_any(g, {"end-effector velocity", "end effector velocity"}))
        tools = {"create_robotictoolbox_robot", "simulate_ee_velocity"};
      else if (g.find("inverse kinematic") != std::string::npos)
        tools = {"create_robotictoolbox_robot", "inverse_kinematics",
                 "quintic_joint_trajectory", "export_trajectory"};
      else if (mentions_any(g, {"joint velocity", "joint rates"}))
        tools = {"create_robotictoolbox_robot", "simulate_joint_velocity"};
      else if (g.find("plot") != std::string::npos && g.find("motion") != std::string::npos)
        tools = {"create_robotictoolbox_robot", "plot_robot_motion"};
      else
        return {{"error", "the request matches no planning rule for the available tools"}};
    }
    std::string summary = "Use";
    for (std::size_t i = 0; i < tools.size(); ++i)
      summary += (i ? ", then " : " ") + tools[i];
    summary += ".";
    return {{"goal_summary", summary}, {"tools", tools}};
  }

  json decide_react(const json& ctx) const {
    std::string normalized = normalize_text(ctx.at("query").get<std::string>());
    for (const json& rule : _react_rules) {
      if (!contains_all(normalized, rule.at("match"))) continue;
      const json& attempts = rule.at("attempts");
      std::size_t idx = static_cast<std::size_t>(ctx.value("attempt", 1)) - 1;
      if (idx >= attempts.size()) idx = attempts.size() - 1;
      const json& steps = attempts[idx];
      std::size_t step = static_cast<std::size_t>(ctx.value("step", 0));
      if (step >= steps.size())
        return {{"final", {{"text", "The script has no further steps."}, {"failure", true}}}};
      return steps[step];
    }
    return {{"final",
             {{"text", "The scripted backend has no playbook for this request."},
              {"failure", true}}}};
  }

  json decide_inspect(const json& ctx) const {
    const json& plan_tools = ctx.at("plan_tools");
    const json& calls = ctx.at("calls");

    // A tool whose most recent call failed counts as an unresolved error.
    std::map<std::string, bool> last_ok;
    std::map<std::string, bool> any_ok;
    for (const json& c : calls) {
      std::string tool = c.at("tool").get<std::string>();
      bool ok = c.at("ok").get<bool>();
      last_ok[tool] = ok;
      if (ok) any_ok[tool] = true;
    }
    for (const auto& [tool, ok] : last_ok) {
      if (ok) continue;
      std::string feedback = "The tool call " + tool + " failed";
      if (ctx.contains("last_error") && ctx["last_error"].is_object()) {
        std::string err = ctx["last_error"].value("error", "");
        feedback += " with '" + err + "'.";
        if (err == "Invalid robot ID" && ctx.contains("robot_id") &&
            ctx["robot_id"].is_string())
          feedback += " The robot was created under a generated Robot ID; the correct Robot"
                      " ID '" +
                      ctx["robot_id"].get<std::string>() +
                      "' should be used instead of the robot name.";
        else
          feedback += " Fix the arguments and try again.";
      } else {
        feedback += ".";
      }
      return {{"accepted", false}, {"feedback", feedback}};
    }
    if (ctx.value("answer_failure", false))
      return {{"accepted", false},
              {"feedback", "The attempt did not produce an answer to the request."}};
    for (const json& t : plan_tools) {
      std::string tool = t.get<std::string>();
      if (!any_ok.count(tool))
        return {{"accepted", false},
                {"feedback", "The planned tool " + tool + " was never executed."}};
    }
    const auto& tokens = tool_quantity_tokens();
    for (const json& t : plan_tools) {
      auto it = tokens.find(t.get<std::string>());
      if (it == tokens.end()) continue;
      bool present = false;
      for (const json& key : ctx.at("answer_quantities"))
        if (key.get<std::string>().find(it->second) != std::string::npos) present = true;
      if (!present)
        return {{"accepted", false},
                {"feedback", "The final answer must include the " + it->second +
                                 " produced by " + t.get<std::string>() + "."}};
    }
    return {{"accepted", true}};
  }
};

}  // namespace armkit::agents
