// Scoring: per-run indicators, aggregation into the metric report, the
// rounded report cells, and usage accounting.

#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "armkit/agents/backend.hpp"
#include "armkit/agents/pipeline.hpp"
#include "armkit/metrics.hpp"

using namespace armkit;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

const std::string kFixtures = std::string(ARMKIT_SOURCE_ROOT) + "/fixtures";

metrics::RunScore perfect_run() {
  metrics::RunScore s;
  s.sup_interaction = 1;
  s.sup_routing = 1;
  s.ets = 1;
  s.plan = 1;
  s.robosolver = {1};
  s.judge = {1};
  s.completion = 1;
  return s;
}

agents::RunLog answered(const std::string& text, bool failure, const std::string& route) {
  agents::RunLog log;
  log.routes = {route};
  log.final_answer = {{"text", text}, {"failure", failure}};
  return log;
}

metrics::GoldLabel exists_gold(const std::string& route) {
  metrics::GoldLabel gold;
  gold.query_id = "synthetic";
  gold.expected_route = route;
  gold.checks.push_back({"result", "exists", json(), 0});
  return gold;
}

}  // namespace

TEST_CASE("aggregate totals round to the published values") {
  // 3 of 100 judged wrong, everything else clean, no rejections anywhere:
  // (1.00, 1.00, 1.00, 1.00, 0.97) averages to 0.994.
  std::vector<metrics::RunScore> a(100, perfect_run());
  for (int i = 0; i < 3; ++i) a[i].judge = {0};
  metrics::MetricReport ra = metrics::aggregate(a);
  CHECK(metrics::round2(ra.m_t) == "0.99");
  CHECK_FALSE(ra.m_sc.has_value());

  // (0.93, 1.00, 0.93, 0.93, 0.93) averages to 0.944.
  std::vector<metrics::RunScore> b(100, perfect_run());
  for (int i = 0; i < 7; ++i) {
    b[i].sup_interaction = 0;
    b[i].sup_routing = 0;
    b[i].plan = 0;
    b[i].robosolver = {0};
    b[i].judge = {0};
  }
  metrics::MetricReport rb = metrics::aggregate(b);
  CHECK(metrics::round2(*rb.m_sup) == "0.93");
  CHECK(metrics::round2(*rb.m_e) == "1.00");
  CHECK(metrics::round2(rb.m_t) == "0.94");

  // (1.00, 0.77, 0.77, 0.77, 1.00) averages to 0.862.
  std::vector<metrics::RunScore> c(100, perfect_run());
  for (int i = 0; i < 23; ++i) {
    c[i].ets = 0;
    c[i].plan = 0;
    c[i].robosolver = {0};
    c[i].completion = 0;
  }
  metrics::MetricReport rc = metrics::aggregate(c);
  CHECK(metrics::round2(rc.m_t) == "0.86");

  // All six components defined: (1.00, 1.00, 0.95, 0.95, 1.00, 0.86)
  // averages to 0.96 exactly.
  std::vector<metrics::RunScore> d(100, perfect_run());
  for (auto& s : d) s.self_correct = std::vector<double>{1};
  for (int i = 0; i < 5; ++i) {
    d[i].plan = 0;
    d[i].robosolver = {0};
  }
  for (int i = 0; i < 14; ++i) d[i].self_correct = std::vector<double>{0};
  metrics::MetricReport rd = metrics::aggregate(d);
  CHECK(metrics::round2(*rd.m_p) == "0.95");
  CHECK(metrics::round2(*rd.m_r) == "0.95");
  CHECK(metrics::round2(*rd.m_sc) == "0.86");
  CHECK(metrics::round2(rd.m_t) == "0.96");
}

TEST_CASE("supervision takes only the values 0, one half, and 1") {
  metrics::GoldLabel gold = exists_gold("researcher");

  CHECK(metrics::score_run(answered("done", false, "researcher"), gold).sup() == 1.0);
  CHECK(metrics::score_run(answered("done", false, "retriever"), gold).sup() == 0.5);
  CHECK(metrics::score_run(answered("it broke", true, "researcher"), gold).sup() == 0.5);
  CHECK(metrics::score_run(answered("it broke", true, "retriever"), gold).sup() == 0.0);
  CHECK(metrics::score_run(answered("", false, "researcher"), gold).sup() == 0.5);
}

TEST_CASE("a manual interaction grade overrides the automatic one") {
  metrics::GoldLabel gold = exists_gold("researcher");
  gold.interaction_override = 0.0;
  CHECK(metrics::score_run(answered("done", false, "researcher"), gold).sup() == 0.5);
}

TEST_CASE("stage indicators appear only for stages the run reached") {
  metrics::GoldLabel gold = exists_gold("researcher");
  metrics::RunScore s = metrics::score_run(answered("done", false, "researcher"), gold);
  CHECK_FALSE(s.ets.has_value());
  CHECK_FALSE(s.plan.has_value());
  CHECK_FALSE(s.self_correct.has_value());
  CHECK(s.robosolver.empty());

  metrics::MetricReport r = metrics::aggregate({s});
  CHECK_FALSE(r.m_e.has_value());
  CHECK_FALSE(r.m_p.has_value());
  CHECK_FALSE(r.m_r.has_value());
  CHECK_FALSE(r.m_j.has_value());
  CHECK_FALSE(r.m_sc.has_value());
  REQUIRE(r.m_sup.has_value());
  REQUIRE(r.m_c.has_value());
  CHECK(r.m_t == *r.m_sup);
}

TEST_CASE("scoring demands gold fields for the stages a run reached") {
  agents::RunLog extracted = answered("done", false, "extractor");
  extracted.routes = {"extractor", "planner"};
  extracted.extracted_ets = "Rz(q1) tx(L1)";
  metrics::GoldLabel gold = exists_gold("extractor");
  CHECK_THROWS_WITH(metrics::score_run(extracted, gold),
                    Catch::Matchers::ContainsSubstring("no expected-ets"));

  gold.expected_ets = "Rz(q1) tx(L1)";
  CHECK_THROWS_WITH(metrics::score_run(extracted, gold),
                    Catch::Matchers::ContainsSubstring("no expected-tools"));

  gold.expected_tools = std::vector<std::string>{"Symbolic_Forward_Kinematic_ET"};
  metrics::RunScore s = metrics::score_run(extracted, gold);
  REQUIRE(s.ets.has_value());
  CHECK(*s.ets == 1);
  REQUIRE(s.plan.has_value());
  CHECK(*s.plan == 0);  // routed to the planner but no plan materialized
}

TEST_CASE("extraction credit is invariant to joint renumbering") {
  CHECK(metrics::detail::ets_equivalent("Rz(q1) tx(L1) Ry(-q2)", "Rz(q7) tx(L1) Ry(-q3)"));
  CHECK_FALSE(metrics::detail::ets_equivalent("Rz(q1) tx(L1)", "Rz(q1) ty(L1)"));
  CHECK_FALSE(metrics::detail::ets_equivalent("Rz(q1", "Rz(q1)"));
}

TEST_CASE("answer checks compare by kind") {
  json rotation = json::array({json::array({"cos(theta1)", "-sin(theta1)"}),
                               json::array({"sin(theta1)", "cos(theta1)"})});
  json answer = {{"text", "done"},
                 {"quantities",
                  {{"flag", true},
                   {"pose", {{1.0, 0.0}, {0.004, 1.0}}},
                   {"fk", rotation},
                   {"hole", nullptr}}}};

  CHECK(metrics::detail::check_passes({"flag", "exists", json(), 0}, answer));
  CHECK_FALSE(metrics::detail::check_passes({"hole", "exists", json(), 0}, answer));
  CHECK_FALSE(metrics::detail::check_passes({"missing", "exists", json(), 0}, answer));
  CHECK(metrics::detail::check_passes({"flag", "equals", json(true), 0}, answer));
  CHECK_FALSE(metrics::detail::check_passes({"flag", "equals", json(false), 0}, answer));

  json pose = {{1.0, 0.0}, {0.0, 1.0}};
  CHECK(metrics::detail::check_passes({"pose", "numeric-matrix", pose, 0.01}, answer));
  CHECK_FALSE(metrics::detail::check_passes({"pose", "numeric-matrix", pose, 0.001}, answer));

  // Symbolic credit goes through equivalence, not string equality.
  json fk = json::array({json::array({"cos(theta1)", "-1*sin(theta1)"}),
                         json::array({"sin(theta1)", "cos(theta1)"})});
  CHECK(metrics::detail::check_passes({"fk", "symbolic-matrix", fk, 0}, answer));
  json wrong = json::array({json::array({"cos(theta1)", "sin(theta1)"}),
                            json::array({"sin(theta1)", "cos(theta1)"})});
  CHECK_FALSE(metrics::detail::check_passes({"fk", "symbolic-matrix", wrong, 0}, answer));

  CHECK_THROWS_WITH(
      metrics::detail::check_passes({"flag", "approximately", json(), 0}, answer),
      Catch::Matchers::ContainsSubstring("unknown answer check kind"));
}

TEST_CASE("computed expectations derive the matrices from a transform sequence") {
  // The kinematics engine names the first revolute joint variable theta1.
  json answer = {{"quantities",
                  {{"fk",
                    {{"cos(theta1)", "-sin(theta1)", "0", "L1*cos(theta1)"},
                     {"sin(theta1)", "cos(theta1)", "0", "L1*sin(theta1)"},
                     {"0", "0", "1", "0"},
                     {"0", "0", "0", "1"}}},
                   {"jac",
                    {{"-L1*sin(theta1)"}, {"L1*cos(theta1)"}, {"0"}, {"0"}, {"0"},
                     {"1"}}}}}};
  CHECK(metrics::detail::check_passes({"fk", "symbolic-fk-of-ets", "Rz(q1) tx(L1)", 0},
                                      answer));
  CHECK(metrics::detail::check_passes({"jac", "symbolic-jacobian-of-ets", "Rz(q1) tx(L1)", 0},
                                      answer));
  CHECK_FALSE(metrics::detail::check_passes({"fk", "symbolic-fk-of-ets", "Rz(q1) ty(L1)", 0},
                                            answer));
}

TEST_CASE("an answer flagged as a failure earns no credit even if checks pass") {
  json failed = {{"text", "partial"},
                 {"failure", true},
                 {"quantities", {{"result", 1}}}};
  CHECK_FALSE(metrics::detail::answer_correct(exists_gold("researcher").checks, failed));
}

TEST_CASE("a corrected retry earns solver, judge, and self-correction credit") {
  std::ifstream in(kFixtures + "/tasks/bench3/t13.txt");
  REQUIRE(in.good());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();

  ets::RobotRegistry registry(7);
  agents::ScriptedBackend backend(kFixtures + "/scripted");
  agents::SessionMemory memory;
  agents::RunOptions opts;
  opts.zero_runtime = true;
  opts.outdir = "metrics_test_out";
  agents::RunLog log =
      agents::run_query({text, std::nullopt, "t13"}, registry, backend, memory, opts);
  metrics::GoldLabel gold = metrics::GoldLabel::load(kFixtures + "/gold/bench3/t13.json");

  metrics::RunScore s = metrics::score_run(log, gold);
  CHECK(s.sup() == 1.0);
  CHECK(s.robosolver == std::vector<double>{0, 1});
  CHECK(s.judge == std::vector<double>{1, 1});
  REQUIRE(s.self_correct.has_value());
  CHECK(*s.self_correct == std::vector<double>{1});
  CHECK(s.completion == 1);

  metrics::MetricReport r = metrics::aggregate({s});
  CHECK(*r.m_r == 0.5);
  CHECK(*r.m_j == 1.0);
  CHECK(*r.m_sc == 1.0);
  CHECK(*r.m_c == 1.0);
}

TEST_CASE("gold labels demand at least one answer check") {
  json bare = {{"query_id", "x"}, {"expected_route", "planner"}};
  CHECK_THROWS_WITH(metrics::GoldLabel::from_json(bare),
                    Catch::Matchers::ContainsSubstring("no answer checks"));
  CHECK_THROWS_WITH(metrics::GoldLabel::load("no/such/gold.json"),
                    Catch::Matchers::ContainsSubstring("could not read gold label file"));
}

TEST_CASE("aggregation refuses an empty cohort and an all-absent report") {
  CHECK_THROWS_WITH(metrics::aggregate({}),
                    Catch::Matchers::ContainsSubstring("empty score list"));
  metrics::MetricReport hollow;
  CHECK_THROWS_WITH(metrics::total_score(hollow),
                    Catch::Matchers::ContainsSubstring("no metric component is defined"));
}

TEST_CASE("the report renders aligned columns with dashes for absent metrics") {
  metrics::RunScore s = perfect_run();
  s.judge = {1, 0};
  metrics::MetricReport r = metrics::aggregate({s});
  std::string table = metrics::report_table(r, "bench");
  CHECK(table.find("M_Sup") != std::string::npos);
  CHECK(table.find("M_SC") != std::string::npos);
  CHECK(table.find("0.50") != std::string::npos);  // judge average
  CHECK(table.find('-') != std::string::npos);     // self-correction column

  ordered_json j = metrics::report_json(r);
  CHECK(j["n"] == 1);
  CHECK(j["m_j"] == 0.5);
  CHECK(j["m_sc"].is_null());
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  CHECK(keys == std::vector<std::string>{"n", "m_sup", "m_e", "m_p", "m_r", "m_j", "m_sc",
                                         "m_c", "m_t"});
}

TEST_CASE("usage accounting averages runs and prices tokens per thousand") {
  metrics::PriceTable prices = metrics::PriceTable::load(kFixtures + "/prices.json");
  CHECK_THROWS_WITH(prices.lookup("gpt-9"),
                    Catch::Matchers::ContainsSubstring("no price entry for model 'gpt-9'"));

  agents::RunLog a, b;
  a.usage.prompt_tokens = 1000;
  a.usage.completion_tokens = 500;
  a.usage.runtime_seconds = 2.0;
  b.usage.prompt_tokens = 3000;
  b.usage.completion_tokens = 1500;
  b.usage.runtime_seconds = 4.0;

  metrics::UsageSummary scripted = metrics::usage_report({a, b}, "scripted", prices);
  CHECK(scripted.prompt_tokens == 2000.0);
  CHECK(scripted.completion_tokens == 1000.0);
  CHECK(scripted.total_tokens == 3000.0);
  CHECK(scripted.runtime_seconds == 3.0);
  CHECK(scripted.cost == 0.0);

  metrics::UsageSummary paid = metrics::usage_report({a, b}, "gpt-4o", prices);
  // (1000 * 0.0025 + 500 * 0.01) / 1000 = 0.0075; run b costs three times that.
  CHECK_THAT(paid.cost, Catch::Matchers::WithinAbs(0.015, 1e-12));

  ordered_json j = metrics::usage_json(paid);
  CHECK(j["n"] == 2);
  CHECK(j["total_tokens"] == 3000.0);
}
