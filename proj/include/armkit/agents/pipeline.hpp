// Orchestration of one query through the agent stages: a supervisor routes
// between retrieval, structure extraction, web research and planning, then a
// solver agent works the planned tools step by step while an inspector
// accepts or rejects each attempt.  Every stage, tool call and verdict is
// captured in a RunLog that serializes to a stable JSON document.

#pragma once

#include <chrono>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "backend.hpp"
#include "tools.hpp"

namespace armkit::agents {

using ordered_json = nlohmann::ordered_json;

class PipelineError : public std::runtime_error {
 public:
  explicit PipelineError(const std::string& what) : std::runtime_error(what) {}
};

struct Query {
  std::string text;
  std::optional<std::string> attachment;  // path to a text file
  std::string session_id = "default";
};

struct ToolPlan {
  std::string goal_summary;
  std::vector<std::string> tools;
};

struct ToolCall {
  std::string tool;
  json arguments;
  json observation;
  bool ok = false;
};

struct Attempt {
  int index = 1;
  std::vector<ToolCall> calls;
  json answer;  // {text, quantities?, failure?}
  bool accepted = false;
  std::string feedback;
};

struct RunLog {
  Query query;
  std::vector<std::string> routes;
  std::optional<std::string> retrieved;
  std::optional<std::string> extracted_ets;
  std::optional<ToolPlan> plan;
  std::vector<Attempt> attempts;
  int tau = 0;  // number of inspector verdicts
  json final_answer;
  UsageRecord usage;

  ordered_json to_json() const {
    ordered_json j;
    j["query"] = {{"text", query.text},
                  {"attachment", query.attachment ? json(*query.attachment) : json()},
                  {"session_id", query.session_id}};
    j["routes"] = routes;
    j["retrieved"] = retrieved ? json(*retrieved) : json();
    j["extracted_ets"] = extracted_ets ? json(*extracted_ets) : json();
    if (plan)
      j["plan"] = {{"goal_summary", plan->goal_summary}, {"tools", plan->tools}};
    else
      j["plan"] = nullptr;
    j["attempts"] = ordered_json::array();
    for (const Attempt& a : attempts) {
      ordered_json calls = ordered_json::array();
      for (const ToolCall& c : a.calls)
        calls.push_back({{"tool", c.tool},
                         {"arguments", c.arguments},
                         {"observation", c.observation},
                         {"ok", c.ok}});
      j["attempts"].push_back({{"index", a.index},
                               {"tool_calls", std::move(calls)},
                               {"answer", a.answer},
                               {"accepted", a.accepted},
                               {"feedback", a.feedback}});
    }
    j["tau"] = tau;
    j["final_answer"] = final_answer;
    j["usage"] = {{"prompt_tokens", usage.prompt_tokens},
                  {"completion_tokens", usage.completion_tokens},
                  {"total_tokens", usage.total_tokens()},
                  {"runtime_seconds", usage.runtime_seconds},
                  {"cost", usage.cost}};
    return j;
  }

  static RunLog from_json(const json& j) {
    RunLog log;
    log.query.text = j.at("query").value("text", "");
    if (j.at("query").contains("attachment") && j["query"]["attachment"].is_string())
      log.query.attachment = j["query"]["attachment"].get<std::string>();
    log.query.session_id = j.at("query").value("session_id", "default");
    for (const json& r : j.value("routes", json::array()))
      log.routes.push_back(r.get<std::string>());
    if (j.contains("retrieved") && j["retrieved"].is_string())
      log.retrieved = j["retrieved"].get<std::string>();
    if (j.contains("extracted_ets") && j["extracted_ets"].is_string())
      log.extracted_ets = j["extracted_ets"].get<std::string>();
    if (j.contains("plan") && j["plan"].is_object()) {
      ToolPlan plan;
      plan.goal_summary = j["plan"].value("goal_summary", "");
      for (const json& t : j["plan"].value("tools", json::array()))
        plan.tools.push_back(t.get<std::string>());
      log.plan = std::move(plan);
    }
    for (const json& ja : j.value("attempts", json::array())) {
      Attempt a;
      a.index = ja.value("index", 1);
      for (const json& jc : ja.value("tool_calls", json::array())) {
        ToolCall c;
        c.tool = jc.value("tool", "");
        c.arguments = jc.value("arguments", json::object());
        c.observation = jc.value("observation", json());
        c.ok = jc.value("ok", false);
        a.calls.push_back(std::move(c));
      }
      a.answer = ja.value("answer", json::object());
      a.accepted = ja.value("accepted", false);
      a.feedback = ja.value("feedback", "");
      log.attempts.push_back(std::move(a));
    }
    log.tau = j.value("tau", 0);
    log.final_answer = j.value("final_answer", json());
    if (j.contains("usage")) {
      const json& u = j["usage"];
      log.usage.prompt_tokens = u.value("prompt_tokens", 0LL);
      log.usage.completion_tokens = u.value("completion_tokens", 0LL);
      log.usage.runtime_seconds = u.value("runtime_seconds", 0.0);
      log.usage.cost = u.value("cost", 0.0);
    }
    return log;
  }
};

// Per-session conversation history, grown by exactly one entry per run.
class SessionMemory {
 public:
  void append(const std::string& session_id, const std::string& query,
              const std::string& answer) {
    _turns[session_id].emplace_back(query, answer);
  }

  const std::vector<std::pair<std::string, std::string>>& history(
      const std::string& session_id) const {
    static const std::vector<std::pair<std::string, std::string>> empty;
    auto it = _turns.find(session_id);
    return it == _turns.end() ? empty : it->second;
  }

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& [sid, turns] : _turns) n += turns.size();
    return n;
  }

 private:
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> _turns;
};

struct RunOptions {
  int max_steps = 12;     // solver steps per attempt
  int max_attempts = 3;   // inspector-triggered retries
  bool zero_runtime = false;
  std::string outdir = ".";
};

namespace detail {

inline bool is_image_path(const std::string& path) {
  auto dot = path.rfind('.');
  if (dot == std::string::npos) return false;
  std::string ext = normalize_text(path.substr(dot));
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".gif" || ext == ".bmp";
}

inline std::string retrieve_attachment(const std::string& path) {
  if (is_image_path(path))
    throw PipelineError("the attachment '" + path +
                        "' is an image, which this pipeline cannot read yet");
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw PipelineError("could not read the attachment '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string content = buf.str();
  if (content.find('\0') != std::string::npos)
    throw PipelineError("the attachment '" + path +
                        "' is not a text file (unsupported format)");
  if (content.empty())
    throw PipelineError("the attachment '" + path + "' is empty, nothing to answer from");
  return content;
}

// Placeholder resolution over the run so far.  Supported forms:
//   {{extracted_ets}}            the structure produced by the extractor
//   {{robot_id}}                 robot id from the latest successful creation
//   {{last_error}}               observation of the latest failed call
//   {{obs:TOOL/ptr}}             field of TOOL's latest successful observation
//   {{obs:TOOL#k/ptr}}           same, k-th successful call of TOOL (0-based)
struct SubstState {
  const std::optional<std::string>* extracted_ets = nullptr;
  const std::vector<ToolCall>* calls = nullptr;
};

inline json resolve_placeholder(const std::string& name, const SubstState& state) {
  if (name == "extracted_ets") {
    if (state.extracted_ets && *state.extracted_ets) return **state.extracted_ets;
    throw PipelineError("placeholder '{{extracted_ets}}' used before extraction");
  }
  if (name == "robot_id") {
    for (auto it = state.calls->rbegin(); it != state.calls->rend(); ++it)
      if (it->ok && it->observation.is_object() && it->observation.contains("robot_id"))
        return it->observation["robot_id"];
    throw PipelineError("placeholder '{{robot_id}}' found no created robot");
  }
  if (name == "last_error") {
    for (auto it = state.calls->rbegin(); it != state.calls->rend(); ++it)
      if (!it->ok) return it->observation;
    throw PipelineError("placeholder '{{last_error}}' found no failed call");
  }
  if (name.rfind("obs:", 0) == 0) {
    std::string rest = name.substr(4);
    std::string pointer;
    auto slash = rest.find('/');
    if (slash != std::string::npos) {
      pointer = rest.substr(slash);
      rest = rest.substr(0, slash);
    }
    int occurrence = -1;  // -1 means latest
    auto hash = rest.find('#');
    if (hash != std::string::npos) {
      occurrence = std::stoi(rest.substr(hash + 1));
      rest = rest.substr(0, hash);
    }
    const json* found = nullptr;
    int seen = 0;
    for (const ToolCall& c : *state.calls) {
      if (!c.ok || c.tool != rest) continue;
      if (occurrence < 0 || seen == occurrence) found = &c.observation;
      ++seen;
    }
    if (!found)
      throw PipelineError("placeholder '{{" + name + "}}' matches no successful call");
    if (pointer.empty()) return *found;
    try {
      return found->at(json::json_pointer(pointer));
    } catch (const json::exception&) {
      throw PipelineError("placeholder '{{" + name + "}}' points at a missing field");
    }
  }
  throw PipelineError("unknown placeholder '{{" + name + "}}'");
}

inline json substitute(const json& tmpl, const SubstState& state) {
  if (tmpl.is_object() || tmpl.is_array()) {
    json out = tmpl.is_object() ? json::object() : json::array();
    if (tmpl.is_object()) {
      for (auto it = tmpl.begin(); it != tmpl.end(); ++it)
        out[it.key()] = substitute(it.value(), state);
    } else {
      for (const json& v : tmpl) out.push_back(substitute(v, state));
    }
    return out;
  }
  if (!tmpl.is_string()) return tmpl;
  std::string s = tmpl.get<std::string>();
  auto open = s.find("{{");
  if (open == std::string::npos) return tmpl;
  // a string that is exactly one placeholder keeps the resolved value's type
  if (open == 0 && s.size() > 4 && s.compare(s.size() - 2, 2, "}}") == 0 &&
      s.find("{{", 2) == std::string::npos && s.find("}}") == s.size() - 2)
    return resolve_placeholder(s.substr(2, s.size() - 4), state);
  std::string out;
  std::size_t at = 0;
  while (open != std::string::npos) {
    auto close = s.find("}}", open);
    if (close == std::string::npos) break;
    out += s.substr(at, open - at);
    json v = resolve_placeholder(s.substr(open + 2, close - open - 2), state);
    out += v.is_string() ? v.get<std::string>() : v.dump();
    at = close + 2;
    open = s.find("{{", at);
  }
  out += s.substr(at);
  return out;
}

inline json normalize_answer(json answer) {
  if (!answer.is_object()) answer = json{{"text", answer.dump()}};
  if (!answer.contains("text")) answer["text"] = "";
  if (answer.contains("quantities") && !answer["quantities"].is_object())
    answer.erase("quantities");
  return answer;
}

inline json build_inspect_context(const ToolPlan& plan, const std::vector<ToolCall>& run_calls,
                                  const json& answer) {
  json calls = json::array();
  const json* last_error = nullptr;
  json robot_id;
  for (const ToolCall& c : run_calls) {
    calls.push_back({{"tool", c.tool}, {"ok", c.ok}});
    if (!c.ok) last_error = &c.observation;
    if (c.ok && c.observation.is_object() && c.observation.contains("robot_id"))
      robot_id = c.observation["robot_id"];
  }
  json quantities = json::array();
  if (answer.contains("quantities"))
    for (auto it = answer["quantities"].begin(); it != answer["quantities"].end(); ++it)
      quantities.push_back(it.key());
  return {{"plan_tools", plan.tools},
          {"calls", calls},
          {"answer_quantities", quantities},
          {"answer_failure", answer.value("failure", false)},
          {"last_error", last_error ? *last_error : json()},
          {"robot_id", robot_id}};
}

}  // namespace detail

// One solver attempt: repeated react steps until a final answer or the step
// budget runs out.  Tool failures become observations, never exceptions, and
// a tool outside the plan is refused the same way.
inline Attempt react_solve(const std::string& task_text, const ToolPlan& plan,
                           ToolContext& tool_ctx, Backend& backend, UsageRecord& usage,
                           const RunOptions& opts, int attempt_index,
                           const std::string& feedback, std::vector<ToolCall>& run_calls,
                           const std::optional<std::string>& extracted_ets) {
  Attempt attempt;
  attempt.index = attempt_index;
  if (plan.tools.empty()) {
    attempt.answer = {{"text", "The plan contains no tools, nothing can be executed."},
                      {"failure", true}};
    return attempt;
  }
  detail::SubstState state{&extracted_ets, &run_calls};
  for (int step = 0; step < opts.max_steps; ++step) {
    json rctx = {{"query", task_text},
                 {"attempt", attempt_index},
                 {"step", step},
                 {"feedback", feedback.empty() ? json() : json(feedback)},
                 {"plan_tools", plan.tools}};
    json resp = backend.complete("react", rctx, usage);
    if (resp.contains("final")) {
      try {
        attempt.answer = detail::normalize_answer(detail::substitute(resp["final"], state));
      } catch (const std::exception& e) {
        attempt.answer = {{"text", std::string("the answer template failed: ") + e.what()},
                          {"failure", true}};
      }
      return attempt;
    }
    ToolCall call;
    call.tool = resp.value("tool", "");
    json raw_args = resp.value("arguments", json::object());
    bool in_plan = false;
    for (const std::string& t : plan.tools) in_plan |= (t == call.tool);
    try {
      call.arguments = detail::substitute(raw_args, state);
      if (!in_plan)
        throw PipelineError("tool '" + call.tool + "' is not part of the plan for this task");
      call.observation = call_tool(call.tool, call.arguments, tool_ctx);
      call.ok = true;
    } catch (const std::exception& e) {
      if (call.arguments.is_null()) call.arguments = raw_args;
      call.observation = {{"error", e.what()},
                          {"current_tool_name", call.tool},
                          {"current_tool_arg", call.arguments}};
      call.ok = false;
    }
    attempt.calls.push_back(call);
    run_calls.push_back(call);
  }
  attempt.answer = {{"text", "The solver ran out of steps before reaching an answer."},
                    {"failure", true}};
  return attempt;
}

namespace detail {

inline void fail_run(RunLog& log, const std::string& reason) {
  Attempt attempt;
  attempt.index = static_cast<int>(log.attempts.size()) + 1;
  attempt.answer = {{"text", reason}, {"failure", true}};
  attempt.accepted = true;  // the verdict of record: the pipeline cannot do better
  log.attempts.push_back(std::move(attempt));
  log.tau += 1;
  log.final_answer = log.attempts.back().answer;
}

inline void run_query_inner(RunLog& log, ets::RobotRegistry& registry, Backend& backend,
                            const RunOptions& opts) {
  const Query& query = log.query;
  if (query.text.empty()) throw PipelineError("the query is empty");

  bool attachment_pending = query.attachment.has_value();
  bool extracted = false;
  for (int hop = 0; hop < 6; ++hop) {
    json rctx = {{"text", query.text},
                 {"retrieved", log.retrieved ? json(*log.retrieved) : json()},
                 {"attachment_pending", attachment_pending},
                 {"extracted", extracted}};
    json route = backend.complete("route", rctx, log.usage);
    std::string name = route.at("route").get<std::string>();
    log.routes.push_back(name);
    if (name == "retriever") {
      if (!query.attachment) throw PipelineError("routed to retrieval without an attachment");
      log.retrieved = retrieve_attachment(*query.attachment);
      attachment_pending = false;
    } else if (name == "extractor") {
      std::string description = query.text;
      if (log.retrieved) description += "\n" + *log.retrieved;
      json resp = backend.complete("extract", {{"description", description}}, log.usage);
      if (resp.contains("error"))
        throw PipelineError(resp["error"].get<std::string>());
      std::string ets_text = resp.at("ets").get<std::string>();
      try {
        ets::parse_ets(ets_text);
      } catch (const std::exception& e) {
        throw PipelineError("the extracted transform sequence '" + ets_text +
                            "' does not parse: " + e.what());
      }
      log.extracted_ets = ets_text;
      extracted = true;
    } else if (name == "researcher") {
      throw PipelineError(
          "the question needs web research, which is not available in this environment");
    } else if (name == "planner") {
      break;
    } else {
      throw PipelineError("the supervisor chose an unknown route '" + name + "'");
    }
  }

  std::string goal = query.text;
  if (log.retrieved) goal += "\n" + *log.retrieved;
  json presp = backend.complete("plan", {{"goal", goal}, {"has_ets", extracted}}, log.usage);
  if (presp.contains("error")) throw PipelineError(presp["error"].get<std::string>());
  ToolPlan plan;
  plan.goal_summary = presp.value("goal_summary", "");
  for (const json& t : presp.at("tools")) plan.tools.push_back(t.get<std::string>());
  log.plan = plan;

  ToolContext tool_ctx{registry, opts.outdir};
  std::vector<ToolCall> run_calls;
  std::string feedback;
  for (int a = 1; a <= opts.max_attempts; ++a) {
    Attempt attempt = react_solve(goal, plan, tool_ctx, backend, log.usage, opts, a, feedback,
                                  run_calls, log.extracted_ets);
    json ictx = build_inspect_context(plan, run_calls, attempt.answer);
    json verdict = backend.complete("inspect", ictx, log.usage);
    attempt.accepted = verdict.value("accepted", false);
    attempt.feedback = verdict.value("feedback", "");
    log.attempts.push_back(attempt);
    log.tau += 1;
    if (attempt.accepted) break;
    feedback = attempt.feedback;
  }
  log.final_answer = log.attempts.back().answer;
}

}  // namespace detail

// Runs a query end to end.  Hard failures in any stage surface as a failure
// final answer, never as an exception; the session memory always grows by
// exactly one turn.
inline RunLog run_query(const Query& query, ets::RobotRegistry& registry, Backend& backend,
                        SessionMemory& memory, const RunOptions& opts = {}) {
  auto start = std::chrono::steady_clock::now();
  RunLog log;
  log.query = query;
  try {
    detail::run_query_inner(log, registry, backend, opts);
  } catch (const std::exception& e) {
    detail::fail_run(log, e.what());
  }
  if (!opts.zero_runtime) {
    std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    log.usage.runtime_seconds = elapsed.count();
  }
  memory.append(query.session_id, query.text,
                log.final_answer.is_object() ? log.final_answer.value("text", "") : "");
  return log;
}

}  // namespace armkit::agents
