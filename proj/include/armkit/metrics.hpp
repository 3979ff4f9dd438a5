// Scoring of pipeline runs against gold labels, and the aggregate report.
// Each stage of a run is graded with indicator functions: supervision is the
// average of an interaction and a routing indicator, extraction and planning
// are exact-match indicators, the solver and judge are graded per attempt,
// self-correction per rejection, and completion through declarative answer
// checks.  The total score averages whichever stage metrics were exercised.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "agents/pipeline.hpp"
#include "ets.hpp"
#include "expr.hpp"
#include "kinematics.hpp"

namespace armkit::metrics {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

class ScoringError : public std::runtime_error {
 public:
  explicit ScoringError(const std::string& what) : std::runtime_error(what) {}
};

// One declarative expectation on an answer quantity.  Kinds:
//   exists                   the key is present
//   equals                   exact JSON equality
//   numeric-matrix/-vector   entrywise |a - e| <= tolerance
//   symbolic-matrix/-vector  entrywise equivalence on random samples
//   symbolic-fk-of-ets       answer matrix equals the symbolic FK of `expected`
//   symbolic-jacobian-of-ets answer matrix equals the symbolic Jacobian of `expected`
struct AnswerCheck {
  std::string key;
  std::string kind;
  json expected;
  double tolerance = 0;
};

struct GoldLabel {
  std::string query_id;
  std::string expected_route;
  std::optional<std::string> expected_ets;
  std::optional<std::vector<std::string>> expected_tools;
  std::vector<AnswerCheck> checks;
  std::optional<double> interaction_override;  // manual grade for human evaluation

  static GoldLabel from_json(const json& j) {
    GoldLabel g;
    g.query_id = j.at("query_id").get<std::string>();
    g.expected_route = j.at("expected_route").get<std::string>();
    if (j.contains("expected_ets") && j["expected_ets"].is_string())
      g.expected_ets = j["expected_ets"].get<std::string>();
    if (j.contains("expected_tools") && j["expected_tools"].is_array()) {
      std::vector<std::string> tools;
      for (const json& t : j["expected_tools"]) tools.push_back(t.get<std::string>());
      g.expected_tools = std::move(tools);
    }
    for (const json& jc : j.value("checks", json::array())) {
      AnswerCheck c;
      c.key = jc.at("key").get<std::string>();
      c.kind = jc.at("kind").get<std::string>();
      c.expected = jc.value("expected", json());
      c.tolerance = jc.value("tolerance", 0.0);
      g.checks.push_back(std::move(c));
    }
    if (g.checks.empty())
      throw ScoringError("gold label '" + g.query_id + "' has no answer checks");
    if (j.contains("interaction_override"))
      g.interaction_override = j["interaction_override"].get<double>();
    return g;
  }

  static GoldLabel load(const std::string& path) {
    std::ifstream in(path);
    if (!in.good()) throw ScoringError("could not read gold label file: " + path);
    return from_json(json::parse(in, nullptr, true, true));
  }
};

struct RunScore {
  double sup_interaction = 0;
  double sup_routing = 0;
  std::optional<double> ets;
  std::optional<double> plan;
  std::vector<double> robosolver;                  // one indicator per attempt
  std::vector<double> judge;                       // one indicator per attempt
  std::optional<std::vector<double>> self_correct; // one indicator per rejection
  double completion = 0;

  double sup() const { return 0.5 * (sup_interaction + sup_routing); }
};

struct MetricReport {
  std::optional<double> m_sup, m_e, m_p, m_r, m_j, m_sc, m_c;
  double m_t = 0;
  int n = 0;
};

namespace detail {

inline bool ets_equivalent(const std::string& a, const std::string& b) {
  try {
    return ets::structurally_equal(ets::parse_ets(a), ets::parse_ets(b));
  } catch (const std::exception&) {
    return false;
  }
}

inline bool symbolic_entry_matches(const std::string& actual, const std::string& expected) {
  try {
    sym::Expr a = sym::parse_expr(actual);
    sym::Expr e = sym::parse_expr(expected);
    return a.same_as(e) || sym::equal_on_samples(a, e, 40, 0x5eedULL);
  } catch (const std::exception&) {
    return false;
  }
}

inline bool numeric_entries_match(const json& actual, const json& expected, double tol,
                                  int depth) {
  if (expected.is_array()) {
    if (!actual.is_array() || actual.size() != expected.size() || depth > 2) return false;
    for (std::size_t i = 0; i < expected.size(); ++i)
      if (!numeric_entries_match(actual[i], expected[i], tol, depth + 1)) return false;
    return true;
  }
  if (!expected.is_number() || !actual.is_number()) return false;
  return std::abs(actual.get<double>() - expected.get<double>()) <= tol;
}

inline bool symbolic_entries_match(const json& actual, const json& expected, int depth) {
  if (expected.is_array()) {
    if (!actual.is_array() || actual.size() != expected.size() || depth > 2) return false;
    for (std::size_t i = 0; i < expected.size(); ++i)
      if (!symbolic_entries_match(actual[i], expected[i], depth + 1)) return false;
    return true;
  }
  if (!expected.is_string() || !actual.is_string()) return false;
  return symbolic_entry_matches(actual.get<std::string>(), expected.get<std::string>());
}

inline json expected_symbolic_fk(const std::string& ets_text) {
  kin::SymPose fk = kin::fk_symbolic(ets::parse_ets(ets_text));
  json rows = json::array();
  for (int r = 0; r < 4; ++r) {
    json row = json::array();
    for (int c = 0; c < 4; ++c) row.push_back(fk.at(r, c).str());
    rows.push_back(row);
  }
  return rows;
}

inline json expected_symbolic_jacobian(const std::string& ets_text) {
  kin::SymJacobian jac = kin::jacobian_symbolic(ets::parse_ets(ets_text));
  json rows = json::array();
  for (int r = 0; r < 6; ++r) {
    json row = json::array();
    for (int c = 0; c < jac.cols; ++c) row.push_back(jac.at(r, c).str());
    rows.push_back(row);
  }
  return rows;
}

inline bool check_passes(const AnswerCheck& check, const json& answer) {
  if (!answer.is_object() || !answer.contains("quantities")) return false;
  const json& q = answer["quantities"];
  if (!q.is_object() || !q.contains(check.key) || q[check.key].is_null()) return false;
  const json& actual = q[check.key];
  if (check.kind == "exists") return true;
  if (check.kind == "equals") return actual == check.expected;
  if (check.kind == "numeric-matrix" || check.kind == "numeric-vector")
    return numeric_entries_match(actual, check.expected, check.tolerance, 0);
  if (check.kind == "symbolic-matrix" || check.kind == "symbolic-vector")
    return symbolic_entries_match(actual, check.expected, 0);
  if (check.kind == "symbolic-fk-of-ets")
    return symbolic_entries_match(actual,
                                  expected_symbolic_fk(check.expected.get<std::string>()), 0);
  if (check.kind == "symbolic-jacobian-of-ets")
    return symbolic_entries_match(
        actual, expected_symbolic_jacobian(check.expected.get<std::string>()), 0);
  throw ScoringError("unknown answer check kind '" + check.kind + "'");
}

inline bool answer_correct(const std::vector<AnswerCheck>& checks, const json& answer) {
  if (answer.is_object() && answer.value("failure", false)) return false;
  for (const AnswerCheck& c : checks)
    if (!check_passes(c, answer)) return false;
  return true;
}

inline bool route_contains(const agents::RunLog& log, const char* name) {
  for (const std::string& r : log.routes)
    if (r == name) return true;
  return false;
}

}  // namespace detail

inline RunScore score_run(const agents::RunLog& log, const GoldLabel& gold) {
  RunScore score;

  if (gold.interaction_override)
    score.sup_interaction = *gold.interaction_override;
  else
    score.sup_interaction = (log.final_answer.is_object() &&
                             !log.final_answer.value("text", std::string()).empty() &&
                             !log.final_answer.value("failure", false))
                                ? 1
                                : 0;
  score.sup_routing =
      (!log.routes.empty() && log.routes.front() == gold.expected_route) ? 1 : 0;

  if (detail::route_contains(log, "extractor")) {
    if (!gold.expected_ets)
      throw ScoringError("run '" + gold.query_id +
                         "' exercised extraction but the gold label has no expected-ets");
    score.ets = (log.extracted_ets &&
                 detail::ets_equivalent(*log.extracted_ets, *gold.expected_ets))
                    ? 1
                    : 0;
  }

  if (detail::route_contains(log, "planner")) {
    if (!gold.expected_tools)
      throw ScoringError("run '" + gold.query_id +
                         "' exercised planning but the gold label has no expected-tools");
    score.plan = (log.plan && log.plan->tools == *gold.expected_tools) ? 1 : 0;
  }

  for (const agents::Attempt& attempt : log.attempts) {
    bool correct = detail::answer_correct(gold.checks, attempt.answer);
    score.robosolver.push_back(correct ? 1 : 0);
    bool judged_right = attempt.accepted ? correct : !correct;
    score.judge.push_back(judged_right ? 1 : 0);
  }
  std::vector<double> corrections;
  for (std::size_t i = 0; i < log.attempts.size(); ++i) {
    if (log.attempts[i].accepted) continue;
    bool fixed = i + 1 < log.attempts.size() && score.robosolver[i + 1] == 1;
    corrections.push_back(fixed ? 1 : 0);
  }
  if (!corrections.empty()) score.self_correct = std::move(corrections);

  score.completion = detail::answer_correct(gold.checks, log.final_answer) ? 1 : 0;
  return score;
}

namespace detail {

inline double mean(const std::vector<double>& v) {
  double sum = 0;
  for (double x : v) sum += x;
  return v.empty() ? 0 : sum / static_cast<double>(v.size());
}

}  // namespace detail

inline double total_score(const MetricReport& report) {
  std::vector<double> defined;
  for (const std::optional<double>& m :
       {report.m_sup, report.m_e, report.m_p, report.m_r, report.m_j, report.m_sc})
    if (m) defined.push_back(*m);
  if (defined.empty()) throw ScoringError("no metric component is defined");
  return detail::mean(defined);
}

inline MetricReport aggregate(const std::vector<RunScore>& scores) {
  if (scores.empty()) throw ScoringError("cannot aggregate an empty score list");
  MetricReport report;
  report.n = static_cast<int>(scores.size());
  std::vector<double> sup, ets_v, plan_v, solver, judge, sc, completion;
  for (const RunScore& s : scores) {
    sup.push_back(s.sup());
    if (s.ets) ets_v.push_back(*s.ets);
    if (s.plan) plan_v.push_back(*s.plan);
    if (!s.robosolver.empty()) solver.push_back(detail::mean(s.robosolver));
    if (!s.judge.empty()) judge.push_back(detail::mean(s.judge));
    if (s.self_correct) sc.push_back(detail::mean(*s.self_correct));
    completion.push_back(s.completion);
  }
  report.m_sup = detail::mean(sup);
  if (!ets_v.empty()) report.m_e = detail::mean(ets_v);
  if (!plan_v.empty()) report.m_p = detail::mean(plan_v);
  if (!solver.empty()) report.m_r = detail::mean(solver);
  if (!judge.empty()) report.m_j = detail::mean(judge);
  if (!sc.empty()) report.m_sc = detail::mean(sc);
  report.m_c = detail::mean(completion);
  report.m_t = total_score(report);
  return report;
}

inline std::string round2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string cell(const std::optional<double>& m) { return m ? round2(*m) : "-"; }

inline ordered_json report_json(const MetricReport& r) {
  ordered_json j;
  j["n"] = r.n;
  auto put = [&](const char* key, const std::optional<double>& m) {
    j[key] = m ? ordered_json(*m) : ordered_json();
  };
  put("m_sup", r.m_sup);
  put("m_e", r.m_e);
  put("m_p", r.m_p);
  put("m_r", r.m_r);
  put("m_j", r.m_j);
  put("m_sc", r.m_sc);
  put("m_c", r.m_c);
  j["m_t"] = r.m_t;
  return j;
}

inline std::string report_table(const MetricReport& r, const std::string& label) {
  const char* names[] = {"M_Sup", "M_E", "M_P", "M_R", "M_J", "M_SC", "M_C", "M_T"};
  std::string cells[] = {cell(r.m_sup), cell(r.m_e),  cell(r.m_p), cell(r.m_r),
                         cell(r.m_j),   cell(r.m_sc), cell(r.m_c), round2(r.m_t)};
  std::size_t width = label.size();
  std::string out = label;
  for (int i = 0; i < 8; ++i) {
    std::string head = names[i];
    std::size_t w = std::max(head.size(), cells[i].size()) + 2;
    out += std::string(w - head.size(), ' ') + head;
  }
  out += "\n" + std::string(width, ' ');
  for (int i = 0; i < 8; ++i) {
    std::string head = names[i];
    std::size_t w = std::max(head.size(), cells[i].size()) + 2;
    out += std::string(w - cells[i].size(), ' ') + cells[i];
  }
  out += "\n";
  return out;
}

// Per-model prices in currency per 1000 tokens.
struct PriceEntry {
  double prompt_per_1k = 0;
  double completion_per_1k = 0;
};

struct PriceTable {
  std::map<std::string, PriceEntry> entries;

  static PriceTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in.good()) throw ScoringError("could not read price table: " + path);
    json j = json::parse(in, nullptr, true, true);
    PriceTable table;
    for (auto it = j.begin(); it != j.end(); ++it)
      table.entries[it.key()] = {it.value().value("prompt_per_1k", 0.0),
                                 it.value().value("completion_per_1k", 0.0)};
    return table;
  }

  const PriceEntry& lookup(const std::string& model) const {
    auto it = entries.find(model);
    if (it == entries.end())
      throw ScoringError("no price entry for model '" + model + "'");
    return it->second;
  }
};

struct UsageSummary {
  double prompt_tokens = 0;
  double completion_tokens = 0;
  double total_tokens = 0;
  double runtime_seconds = 0;
  double cost = 0;
  int n = 0;
};

inline UsageSummary usage_report(const std::vector<agents::RunLog>& logs,
                                 const std::string& model, const PriceTable& prices) {
  const PriceEntry& price = prices.lookup(model);
  UsageSummary summary;
  summary.n = static_cast<int>(logs.size());
  if (logs.empty()) return summary;
  for (const agents::RunLog& log : logs) {
    summary.prompt_tokens += static_cast<double>(log.usage.prompt_tokens);
    summary.completion_tokens += static_cast<double>(log.usage.completion_tokens);
    summary.runtime_seconds += log.usage.runtime_seconds;
    summary.cost += static_cast<double>(log.usage.prompt_tokens) / 1000.0 *
                        price.prompt_per_1k +
                    static_cast<double>(log.usage.completion_tokens) / 1000.0 *
                        price.completion_per_1k;
  }
  double n = static_cast<double>(summary.n);
  summary.prompt_tokens /= n;
  summary.completion_tokens /= n;
  summary.runtime_seconds /= n;
  summary.cost /= n;
  summary.total_tokens = summary.prompt_tokens + summary.completion_tokens;
  return summary;
}

inline ordered_json usage_json(const UsageSummary& u) {
  return {{"n", u.n},
          {"prompt_tokens", u.prompt_tokens},
          {"completion_tokens", u.completion_tokens},
          {"total_tokens", u.total_tokens},
          {"runtime_seconds", u.runtime_seconds},
          {"cost", u.cost}};
}

}  // namespace armkit::metrics
