// The scripted pipeline end to end: supervisor routing, attachment retrieval,
// structure extraction, planning rules, the solver's step loop with placeholder
// substitution, inspection verdicts with retry, and transcript determinism.

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "armkit/agents/backend.hpp"
#include "armkit/agents/pipeline.hpp"
#include "armkit/agents/tools.hpp"

using namespace armkit;
using nlohmann::json;

namespace {

const std::string kRoot = ARMKIT_SOURCE_ROOT;
const std::string kFixtures = kRoot + "/fixtures";

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  return text;
}

agents::ScriptedBackend scripted() {
  return agents::ScriptedBackend(kFixtures + "/scripted");
}

std::string task_text(const std::string& leaf) {
  return slurp(kFixtures + "/tasks/" + leaf);
}

agents::RunLog run(const agents::Query& query, std::uint64_t seed = 1,
                   agents::SessionMemory* memory = nullptr) {
  ets::RobotRegistry registry(seed);
  agents::ScriptedBackend backend = scripted();
  agents::SessionMemory local;
  agents::RunOptions opts;
  opts.zero_runtime = true;
  opts.outdir = "agents_test_out";
  return agents::run_query(query, registry, backend, memory ? *memory : local, opts);
}

// A throwaway fixtures directory for rules that the shipped script does not
// need, such as deliberately broken extractions.
struct TempRules {
  std::string dir;

  TempRules(const json& extract, const json& react) {
    dir = "agents_test_rules_" + std::to_string(counter());
    std::filesystem::create_directories(dir);
    std::ofstream(dir + "/extract.json") << extract.dump(2);
    std::ofstream(dir + "/react.json") << react.dump(2);
  }

  static int counter() {
    static int n = 0;
    return ++n;
  }
};

std::vector<std::string> plan_for(const std::string& goal, bool has_ets) {
  agents::ScriptedBackend backend = scripted();
  agents::UsageRecord usage;
  json resp = backend.complete("plan", {{"goal", goal}, {"has_ets", has_ets}}, usage);
  REQUIRE(resp.contains("tools"));
  return resp["tools"].get<std::vector<std::string>>();
}

}  // namespace

TEST_CASE("normalization lowercases and collapses whitespace") {
  CHECK(agents::normalize_text("  A  Robot\n\tARM ") == "a robot arm");
  CHECK(agents::normalize_text("") == "");
}

TEST_CASE("an attachment routes to retrieval before anything else") {
  agents::Query query{task_text("bench1/query.txt"), kFixtures + "/fig4/robot1.txt", "s1"};
  agents::RunLog log = run(query);
  REQUIRE(log.routes.size() == 3);
  CHECK(log.routes[0] == "retriever");
  CHECK(log.routes[1] == "extractor");
  CHECK(log.routes[2] == "planner");
  CHECK(log.retrieved.has_value());
  CHECK(log.final_answer.value("failure", false) == false);
}

TEST_CASE("non-structural requests go straight to the planner") {
  agents::RunLog log = run({task_text("bench3/t13.txt"), std::nullopt, "s1"});
  REQUIRE(log.routes.size() == 1);
  CHECK(log.routes[0] == "planner");
}

TEST_CASE("web questions are routed to research and fail cleanly") {
  agents::RunLog log =
      run({"Please search the web for the latest news about humanoid robots.", std::nullopt,
           "s1"});
  REQUIRE(log.routes.size() == 1);
  CHECK(log.routes[0] == "researcher");
  CHECK(log.final_answer.value("failure", false));
  CHECK(log.final_answer.value("text", std::string()).find("web research") !=
        std::string::npos);
}

TEST_CASE("an empty query is rejected with a failure answer") {
  agents::RunLog log = run({"", std::nullopt, "s1"});
  CHECK(log.final_answer.value("failure", false));
  CHECK(log.final_answer.value("text", std::string()).find("empty") != std::string::npos);
}

TEST_CASE("broken attachments fail with a specific reason and still take a memory turn") {
  agents::SessionMemory memory;
  std::string query = task_text("bench1/query.txt");

  agents::RunLog missing = run({query, "no-such-file.txt", "s"}, 1, &memory);
  CHECK(missing.final_answer.value("text", std::string()).find("could not read") !=
        std::string::npos);

  agents::RunLog image = run({query, "diagram.PNG", "s"}, 1, &memory);
  CHECK(image.final_answer.value("text", std::string()).find("image") != std::string::npos);

  std::filesystem::create_directories("agents_test_out");
  std::ofstream("agents_test_out/empty.txt").flush();
  agents::RunLog empty = run({query, "agents_test_out/empty.txt", "s"}, 1, &memory);
  CHECK(empty.final_answer.value("text", std::string()).find("empty") != std::string::npos);

  {
    std::ofstream out("agents_test_out/blob.bin", std::ios::binary);
    const char bytes[] = {'a', 'b', '\0', 'c', 'd'};
    out.write(bytes, sizeof(bytes));
  }
  agents::RunLog binary = run({query, "agents_test_out/blob.bin", "s"}, 1, &memory);
  CHECK(binary.final_answer.value("text", std::string()).find("not a text file") !=
        std::string::npos);

  for (const agents::RunLog* log : {&missing, &image, &empty, &binary}) {
    CHECK(log->final_answer.value("failure", false));
    CHECK(log->attempts.back().accepted);
  }
  CHECK(memory.total() == 4);
}

TEST_CASE("every catalog description extracts to its reference structure") {
  for (int n = 1; n <= 10; ++n) {
    std::string attachment = kFixtures + "/fig4/robot" + std::to_string(n) + ".txt";
    agents::RunLog log = run({task_text("bench1/query.txt"), attachment, "s1"});
    INFO("robot " << n);
    REQUIRE(log.extracted_ets.has_value());
    CHECK(*log.extracted_ets ==
          slurp(kFixtures + "/fig4/robot" + std::to_string(n) + ".ets"));
    REQUIRE(log.plan.has_value());
    CHECK(log.plan->tools ==
          std::vector<std::string>{"Symbolic_Forward_Kinematic_ET"});
    CHECK(log.tau == 1);
    REQUIRE(log.attempts.size() == 1);
    CHECK(log.attempts[0].accepted);
    CHECK(log.final_answer["quantities"]["ets"] == *log.extracted_ets);
    CHECK(log.final_answer["quantities"]["symbolic_fk"].size() == 4);
  }
}

TEST_CASE("an extraction that does not parse becomes a failure naming the raw text") {
  TempRules rules(json::array({{{"contains", {"purple robot"}}, {"ets", "Rz(z1 tx(L1)"}}}),
                  json::array());
  agents::ScriptedBackend backend(rules.dir);
  ets::RobotRegistry registry(1);
  agents::SessionMemory memory;
  agents::RunLog log = agents::run_query(
      {"The purple robot rotates about the z-axis.", std::nullopt, "s"}, registry, backend,
      memory, {});
  CHECK(log.routes.front() == "extractor");
  std::string text = log.final_answer.value("text", std::string());
  CHECK(text.find("Rz(z1 tx(L1)") != std::string::npos);
  CHECK(text.find("does not parse") != std::string::npos);
}

TEST_CASE("a structural description with no matching script fails in extraction") {
  TempRules rules(json::array(), json::array());
  agents::ScriptedBackend backend(rules.dir);
  ets::RobotRegistry registry(1);
  agents::SessionMemory memory;
  agents::RunLog log = agents::run_query(
      {"The first revolute joint rotates about the z-axis and a prismatic joint translates "
       "along the x-axis.",
       std::nullopt, "s"},
      registry, backend, memory, {});
  CHECK(log.routes.front() == "extractor");
  CHECK(log.final_answer.value("text", std::string()).find("no scripted extraction") !=
        std::string::npos);
}

TEST_CASE("planning picks tool chains by request shape") {
  using V = std::vector<std::string>;
  CHECK(plan_for("Compute the end-effector velocity and acceleration.", true) ==
        V{"Symbolic_Forward_Kinematic_ET", "Symbolic_EndEffector_Velocity",
          "Symbolic_EndEffector_Acceleration"});
  CHECK(plan_for("Give the symbolic Jacobian.", true) == V{"Symbolic_Jacobian"});
  CHECK(plan_for("Solve the inverse kinematics and plot the result.", true) ==
        V{"create_custom_userdefined_robot", "inverse_kinematics",
          "plot_custom_robot_motion"});
  CHECK(plan_for("Compute the symbolic forward kinematics and plot the motion.", true) ==
        V{"Symbolic_Forward_Kinematic_ET", "create_custom_userdefined_robot",
          "plot_custom_robot_motion"});
  CHECK(plan_for("Compute the symbolic forward kinematics.", true) ==
        V{"Symbolic_Forward_Kinematic_ET"});
  CHECK(plan_for("Compute the forward kinematics at the given joint configuration and plot "
                 "the motion.",
                 true) ==
        V{"create_custom_userdefined_robot", "forward_kinematics_custom_userdefined_robot",
          "plot_custom_robot_motion"});
  CHECK(plan_for("Describe this robot.", true) == V{"Symbolic_Forward_Kinematic_ET"});

  CHECK(plan_for("Compute the Jacobian matrix of a UR3.", false) ==
        V{"create_robotictoolbox_robot", "plot_robot_motion", "compute_Jacobian"});
  CHECK(plan_for("Drive the arm with a position-based controller.", false) ==
        V{"create_robotictoolbox_robot", "simulate_robot_motion_Position_based_Servoing"});
  CHECK(plan_for("Apply an end-effector velocity of 0.1 m/s.", false) ==
        V{"create_robotictoolbox_robot", "simulate_ee_velocity"});
  CHECK(plan_for("Solve the inverse kinematics of the Panda.", false) ==
        V{"create_robotictoolbox_robot", "inverse_kinematics", "quintic_joint_trajectory",
          "export_trajectory"});
  CHECK(plan_for("Simulate a constant joint velocity.", false) ==
        V{"create_robotictoolbox_robot", "simulate_joint_velocity"});
  CHECK(plan_for("Plot the motion of the robot.", false) ==
        V{"create_robotictoolbox_robot", "plot_robot_motion"});

  agents::ScriptedBackend backend = scripted();
  agents::UsageRecord usage;
  json resp = backend.complete("plan", {{"goal", "Tell me a joke."}, {"has_ets", false}},
                               usage);
  CHECK(resp.contains("error"));

  json summary = backend.complete(
      "plan", {{"goal", "Compute the symbolic forward kinematics."}, {"has_ets", true}},
      usage);
  CHECK(summary["goal_summary"] == "Use Symbolic_Forward_Kinematic_ET.");
}

TEST_CASE("a tool outside the plan is refused as an error observation") {
  TempRules rules(
      json::array({{{"contains", {"purple robot"}}, {"ets", "Rz(q1) tx(L1)"}}}),
      json::array(
          {{{"match", {"purple robot"}},
            {"attempts",
             json::array({json::array(
                 {{{"tool", "compute_Jacobian"}, {"arguments", json::object()}},
                  {{"final", {{"text", "gave up"}, {"failure", true}}}}})})}}}));
  agents::ScriptedBackend backend(rules.dir);
  ets::RobotRegistry registry(1);
  agents::SessionMemory memory;
  agents::RunLog log = agents::run_query(
      {"The purple robot rotates about the z-axis; compute the symbolic forward kinematics.",
       std::nullopt, "s"},
      registry, backend, memory, {});
  REQUIRE(log.plan.has_value());
  CHECK(log.plan->tools == std::vector<std::string>{"Symbolic_Forward_Kinematic_ET"});
  REQUIRE(!log.attempts.empty());
  REQUIRE(!log.attempts[0].calls.empty());
  const agents::ToolCall& call = log.attempts[0].calls[0];
  CHECK(call.ok == false);
  CHECK(call.observation["error"].get<std::string>().find("not part of the plan") !=
        std::string::npos);
  CHECK(log.attempts.size() == 3);  // rejected every time, retries exhausted
  CHECK(log.tau == 3);
  CHECK(log.final_answer.value("failure", false));
}

TEST_CASE("an unresolved placeholder turns the answer into a failure") {
  TempRules rules(
      json::array({{{"contains", {"purple robot"}}, {"ets", "Rz(q1) tx(L1)"}}}),
      json::array({{{"match", {"purple robot"}},
                    {"attempts",
                     json::array({json::array({{{"final",
                                                 {{"text",
                                                   "{{obs:inverse_kinematics/ik_solution}}"}}}}})})}}}));
  agents::ScriptedBackend backend(rules.dir);
  ets::RobotRegistry registry(1);
  agents::SessionMemory memory;
  agents::RunLog log = agents::run_query(
      {"The purple robot rotates about the z-axis; compute the symbolic forward kinematics.",
       std::nullopt, "s"},
      registry, backend, memory, {});
  std::string text = log.final_answer.value("text", std::string());
  CHECK(text.find("the answer template failed") != std::string::npos);
  CHECK(text.find("matches no successful call") != std::string::npos);
}

TEST_CASE("a solver that never answers runs out of steps") {
  json step = {{"tool", "Symbolic_Forward_Kinematic_ET"},
               {"arguments", {{"ets", "{{extracted_ets}}"}}}};
  TempRules rules(
      json::array({{{"contains", {"purple robot"}}, {"ets", "Rz(q1) tx(L1)"}}}),
      json::array({{{"match", {"purple robot"}},
                    {"attempts",
                     json::array({json::array({step, step, step, step, step, step})})}}}));
  agents::ScriptedBackend backend(rules.dir);
  ets::RobotRegistry registry(1);
  agents::SessionMemory memory;
  agents::RunOptions opts;
  opts.max_steps = 4;
  opts.max_attempts = 1;
  agents::RunLog log = agents::run_query(
      {"The purple robot rotates about the z-axis; compute the symbolic forward kinematics.",
       std::nullopt, "s"},
      registry, backend, memory, opts);
  CHECK(log.attempts.size() == 1);
  CHECK(log.attempts[0].calls.size() == 4);
  CHECK(log.final_answer.value("text", std::string()).find("ran out of steps") !=
        std::string::npos);
}

TEST_CASE("an answer that drops a produced quantity is rejected") {
  TempRules rules(
      json::array({{{"contains", {"purple robot"}}, {"ets", "Rz(q1) tx(L1)"}}}),
      json::array(
          {{{"match", {"purple robot"}},
            {"attempts",
             json::array({json::array(
                 {{{"tool", "Symbolic_Forward_Kinematic_ET"},
                   {"arguments", {{"ets", "{{extracted_ets}}"}}}},
                  {{"final",
                    {{"text", "done"},
                     {"quantities", {{"note", "left out the matrix"}}}}}}})})}}}));
  agents::ScriptedBackend backend(rules.dir);
  ets::RobotRegistry registry(1);
  agents::SessionMemory memory;
  agents::RunLog log = agents::run_query(
      {"The purple robot rotates about the z-axis; compute the symbolic forward kinematics.",
       std::nullopt, "s"},
      registry, backend, memory, {});
  CHECK(log.attempts.size() == 3);
  CHECK_FALSE(log.attempts[0].accepted);
  CHECK(log.attempts[0].feedback.find("symbolic_fk") != std::string::npos);
  CHECK_FALSE((log.final_answer.contains("quantities") &&
               log.final_answer["quantities"].contains("symbolic_fk")));
}

TEST_CASE("a wrong robot id is corrected on the second attempt") {
  agents::RunLog log = run({task_text("bench3/t13.txt"), std::nullopt, "s1"}, 99);

  REQUIRE(log.plan.has_value());
  CHECK(log.plan->tools ==
        std::vector<std::string>{"create_robotictoolbox_robot",
                                 "simulate_robot_motion_Position_based_Servoing"});
  REQUIRE(log.attempts.size() == 2);
  CHECK(log.tau == 2);

  const agents::Attempt& first = log.attempts[0];
  REQUIRE(first.calls.size() == 3);
  CHECK_FALSE(first.calls[0].ok);  // no parameter set for a "frankie"
  CHECK(first.calls[1].ok);
  CHECK_FALSE(first.calls[2].ok);
  CHECK(first.calls[2].observation["error"] == "Invalid robot ID");
  CHECK(first.calls[2].observation["current_tool_name"] ==
        "simulate_robot_motion_Position_based_Servoing");
  CHECK(first.calls[2].observation["current_tool_arg"]["robot_id_local"] == "frankie");
  CHECK_FALSE(first.accepted);
  CHECK(first.answer.value("failure", false));

  std::string created_id = first.calls[1].observation["robot_id"].get<std::string>();
  CHECK(first.feedback.find("Invalid robot ID") != std::string::npos);
  CHECK(first.feedback.find(created_id) != std::string::npos);

  const agents::Attempt& second = log.attempts[1];
  REQUIRE(second.calls.size() == 1);
  CHECK(second.calls[0].ok);
  CHECK(second.calls[0].arguments["robot_id_local"] == created_id);
  CHECK(second.accepted);
  CHECK(log.final_answer["quantities"]["robot_id"] == created_id);
  CHECK(log.final_answer["quantities"].contains("final_error"));
}

TEST_CASE("solved tasks chain observations through placeholders") {
  agents::RunLog log = run({task_text("bench3/t10.txt"), std::nullopt, "s1"}, 7);
  REQUIRE(log.attempts.size() == 1);
  const agents::Attempt& attempt = log.attempts[0];
  REQUIRE(attempt.calls.size() == 4);
  for (const agents::ToolCall& call : attempt.calls) CHECK(call.ok);
  std::string id = attempt.calls[0].observation["robot_id"].get<std::string>();
  CHECK(attempt.calls[1].arguments["robot_id"] == id);
  CHECK(attempt.calls[3].arguments["robot_id"] == id);
  const json& q = log.final_answer["quantities"];
  CHECK(q["fk_initial"] == attempt.calls[1].observation["fk"]);
  CHECK(q["fk_final"] == attempt.calls[2].observation["fk"]);
  CHECK(q["fk_initial"] != q["fk_final"]);
}

TEST_CASE("session memory grows by one turn per run, success or not") {
  agents::SessionMemory memory;
  run({task_text("bench3/t14.txt"), std::nullopt, "chat"}, 1, &memory);
  run({"Please search the web for raw benchmarks.", std::nullopt, "chat"}, 1, &memory);
  run({task_text("bench3/v9.txt"), std::nullopt, "other"}, 1, &memory);
  CHECK(memory.total() == 3);
  CHECK(memory.history("chat").size() == 2);
  CHECK(memory.history("other").size() == 1);
  CHECK(!memory.history("other")[0].second.empty());
}

TEST_CASE("identical seeds reproduce the transcript byte for byte") {
  for (const char* leaf : {"bench3/t13.txt", "bench3/v9.txt"}) {
    agents::Query query{task_text(leaf), std::nullopt, "s1"};
    std::string a = run(query, 1234).to_json().dump(2);
    std::string b = run(query, 1234).to_json().dump(2);
    INFO(leaf);
    CHECK(a == b);
  }
}

TEST_CASE("run logs round-trip through their JSON form") {
  agents::RunLog log = run({task_text("bench3/t13.txt"), std::nullopt, "s1"}, 42);
  agents::RunLog back = agents::RunLog::from_json(log.to_json());
  CHECK(back.to_json() == log.to_json());
  CHECK(back.to_json().dump(2) == log.to_json().dump(2));
}

TEST_CASE("the tool catalog dispatches by name and rejects strangers") {
  ets::RobotRegistry registry(5);
  agents::ToolContext ctx{registry, "agents_test_out"};
  CHECK(agents::tool_names().size() == 16);
  CHECK_THROWS_WITH(agents::call_tool("compute_everything", json::object(), ctx),
                    Catch::Matchers::ContainsSubstring("unknown tool"));

  json created = agents::call_tool("create_robotictoolbox_robot", {{"name", "ur3"}}, ctx);
  CHECK(created["njoints"] == 6);
  std::string id = created["robot_id"].get<std::string>();
  CHECK(registry.contains(id));

  CHECK_THROWS_WITH(
      agents::call_tool("forward_kinematics_custom_userdefined_robot",
                        {{"robot_id", id}, {"joint_values", {0, 0, 0}}}, ctx),
      Catch::Matchers::ContainsSubstring("expects 6 joint values, got 3"));
  CHECK_THROWS_WITH(
      agents::call_tool("forward_kinematics_custom_userdefined_robot",
                        {{"robot_id", id}, {"joint_values", "qqq"}}, ctx),
      Catch::Matchers::ContainsSubstring("unknown configuration 'qqq'"));
  CHECK_THROWS_WITH(agents::call_tool("export_trajectory",
                                      {{"trajectory_id", "traj-99"}, {"format", "csv"}}, ctx),
                    Catch::Matchers::ContainsSubstring("unknown trajectory id"));
  CHECK_THROWS_WITH(
      agents::call_tool("simulate_robot_motion_Position_based_Servoing",
                        {{"robot_id_local", id},
                         {"end_effector_desired_transformation_matrix",
                          {{1, 0, 0, 0.3}, {0, 1, 0, 0}, {0, 0, 1, 0.4}, {0, 0, 0, 1}}},
                         {"desired_position_frame", "base"}},
                        ctx),
      Catch::Matchers::ContainsSubstring("only the world frame"));

  json quintic = agents::call_tool("quintic_joint_trajectory",
                                   {{"robot_id", id},
                                    {"initial_joint_values", "qz"},
                                    {"final_joint_values", {0.3, -0.2, 0.4, 0.1, 0.2, -0.1}},
                                    {"duration", 2.0},
                                    {"dt", 0.1}},
                                   ctx);
  json exported = agents::call_tool(
      "export_trajectory", {{"trajectory_id", quintic["trajectory_id"]}, {"format", "csv"}},
      ctx);
  CHECK(std::filesystem::exists("agents_test_out/" +
                                exported["trajectory"].get<std::string>()));
}
