// armkit command line: transform-sequence parsing, forward and inverse
// kinematics, Jacobians, motion simulation, the agent pipeline, and the
// benchmark runner and scorer.
//
// Exit codes: 0 on success (including reported non-convergence), 1 on usage
// or input parse errors, 2 on runtime failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "armkit/agents/backend.hpp"
#include "armkit/agents/pipeline.hpp"
#include "armkit/agents/remote.hpp"
#include "armkit/bench.hpp"
#include "armkit/ets.hpp"
#include "armkit/ik.hpp"
#include "armkit/kinematics.hpp"
#include "armkit/metrics.hpp"
#include "armkit/motion.hpp"

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;
using namespace armkit;

class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

// "-" reads stdin, anything else is a file path.
std::string read_text(const std::string& source) {
  if (source == "-") {
    std::ostringstream buf;
    buf << std::cin.rdbuf();
    return buf.str();
  }
  std::ifstream in(source, std::ios::binary);
  if (!in.good()) throw UsageError("could not read '" + source + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string trimmed(std::string text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back())))
    text.pop_back();
  std::size_t start = 0;
  while (start < text.size() && std::isspace(static_cast<unsigned char>(text[start])))
    ++start;
  return text.substr(start);
}

std::vector<double> parse_csv(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      double v = std::stod(item, &used);
      while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used])))
        ++used;
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw UsageError("'" + item + "' is not a number in '" + text + "'");
    }
  }
  if (out.empty()) throw UsageError("expected a comma-separated list of numbers");
  return out;
}

std::map<std::string, double> parse_constants(const std::vector<std::string>& pairs) {
  std::map<std::string, double> out;
  for (const std::string& pair : pairs) {
    std::size_t eq = pair.find('=');
    if (eq == std::string::npos || eq == 0)
      throw UsageError("constant '" + pair + "' is not of the form name=value");
    try {
      out[pair.substr(0, eq)] = std::stod(pair.substr(eq + 1));
    } catch (const std::exception&) {
      throw UsageError("constant '" + pair + "' has a non-numeric value");
    }
  }
  return out;
}

// Row-major 4x4 JSON, inline or via "-"/file.
kin::Pose parse_pose(const std::string& spec) {
  std::string text = trimmed(spec);
  if (text == "-" || (!text.empty() && text[0] != '[')) text = read_text(spec);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw UsageError(std::string("target is not valid JSON: ") + e.what());
  }
  if (!j.is_array() || j.size() != 4)
    throw UsageError("target must be a row-major 4x4 JSON array");
  kin::Pose pose;
  for (int r = 0; r < 4; ++r) {
    if (!j[r].is_array() || j[r].size() != 4)
      throw UsageError("target must be a row-major 4x4 JSON array");
    for (int c = 0; c < 4; ++c) {
      if (!j[r][c].is_number())
        throw UsageError("target entries must be numbers");
      pose(r, c) = j[r][c].get<double>();
    }
  }
  return pose;
}

ets::RobotModel resolve_robot(const std::string& spec,
                              const std::map<std::string, double>& constants) {
  if (spec == "panda" || spec == "ur3") return ets::builtin_model(spec);
  try {
    return ets::make_robot("custom", ets::parse_ets(spec), constants);
  } catch (const std::exception& e) {
    throw UsageError("robot '" + spec +
                     "' is neither a built-in name (panda, ur3) nor a transform sequence: " +
                     e.what());
  }
}

// A joint configuration flag: a named configuration or a csv of values.
std::vector<double> resolve_config(const ets::RobotModel& model, const std::string& spec) {
  auto named = model.configurations.find(spec);
  if (named != model.configurations.end()) return named->second;
  if (spec.find_first_not_of("0123456789+-.eE, \t") != std::string::npos)
    throw UsageError("unknown configuration '" + spec + "' for robot " + model.name);
  std::vector<double> q = parse_csv(spec);
  if (static_cast<int>(q.size()) != model.njoints())
    throw UsageError("expected " + std::to_string(model.njoints()) + " joint values, got " +
                     std::to_string(q.size()));
  return q;
}

std::vector<double> default_start(const ets::RobotModel& model) {
  auto ready = model.configurations.find("qr");
  return ready != model.configurations.end() ? ready->second
                                             : model.configurations.at("qz");
}

ordered_json pose_rows(const kin::Pose& pose) {
  ordered_json rows = ordered_json::array();
  for (int r = 0; r < 4; ++r) {
    ordered_json row = ordered_json::array();
    for (int c = 0; c < 4; ++c) row.push_back(pose(r, c));
    rows.push_back(row);
  }
  return rows;
}

void print_numeric_rows(const ordered_json& rows) {
  for (const auto& row : rows) {
    std::string line = "[";
    for (std::size_t c = 0; c < row.size(); ++c) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.6g", row[c].get<double>());
      line += (c ? ", " : "") + std::string(buf);
    }
    std::cout << line << "]\n";
  }
}

void print_symbolic_rows(const ordered_json& rows) {
  for (const auto& row : rows) {
    std::string line = "[";
    for (std::size_t c = 0; c < row.size(); ++c)
      line += (c ? ", " : "") + row[c].get<std::string>();
    std::cout << line << "]\n";
  }
}

void write_file(const std::string& path, const std::string& content) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out.good()) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << content;
}

std::string export_format(const std::string& path) {
  return path.size() > 4 && path.substr(path.size() - 4) == ".svg" ? "svg" : "csv";
}

void export_to(const motion::Trajectory& traj, const std::string& path) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  motion::export_trajectory(traj, export_format(path), path);
}

std::unique_ptr<agents::Backend> make_backend(const std::string& kind,
                                              const std::string& fixtures) {
  if (kind == "scripted") return std::make_unique<agents::ScriptedBackend>(fixtures);
  try {
    return std::make_unique<agents::RemoteBackend>();
  } catch (const agents::BackendError& e) {
    throw UsageError(e.what());
  }
}

// ---------------------------------------------------------------- subcommands

struct EtsParseArgs {
  std::string source;
  bool as_json = false;
};

int run_ets_parse(const EtsParseArgs& args) {
  ets::ETS parsed;
  try {
    parsed = ets::parse_ets(trimmed(read_text(args.source)));
  } catch (const ets::ParseError& e) {
    throw UsageError(std::string("transform sequence does not parse: ") + e.what());
  }
  std::vector<bool> prismatic = parsed.prismatic();
  ordered_json joints = ordered_json::array();
  for (const ets::ET& t : parsed.transforms) {
    if (!t.is_joint()) continue;
    joints.push_back({{"index", t.joint().index + 1},
                      {"type", t.rotation ? "revolute" : "prismatic"},
                      {"axis", std::string(1, ets::axis_char(t.axis))},
                      {"flipped", t.joint().flipped}});
  }
  if (args.as_json) {
    ordered_json out{{"ets", ets::format_ets(parsed)},
                     {"transforms", parsed.transforms.size()},
                     {"joints", joints}};
    std::cout << out.dump(2) << "\n";
    return 0;
  }
  std::cout << "ets: " << ets::format_ets(parsed) << "\n"
            << "transforms: " << parsed.transforms.size() << "\n"
            << "joints: " << parsed.joint_count << "\n";
  for (const auto& jj : joints) {
    std::cout << "  joint " << jj["index"].get<int>() << ": "
              << jj["type"].get<std::string>() << " about "
              << jj["axis"].get<std::string>()
              << (jj["flipped"].get<bool>() ? " (flipped)" : "") << "\n";
  }
  return 0;
}

struct FkArgs {
  std::string ets_text;
  std::string q;
  std::vector<std::string> constants;
  bool symbolic = false;
  bool as_json = false;
};

int run_fk(const FkArgs& args) {
  if (args.symbolic && !args.q.empty())
    throw UsageError("--symbolic and --q cannot be combined");
  ets::ETS parsed;
  try {
    parsed = ets::parse_ets(args.ets_text);
  } catch (const ets::ParseError& e) {
    throw UsageError(std::string("transform sequence does not parse: ") + e.what());
  }
  ordered_json rows = ordered_json::array();
  bool symbolic = args.q.empty();
  if (symbolic) {
    kin::SymPose fk = kin::fk_symbolic(parsed);
    for (int r = 0; r < 4; ++r) {
      ordered_json row = ordered_json::array();
      for (int c = 0; c < 4; ++c) row.push_back(fk.at(r, c).str());
      rows.push_back(row);
    }
  } else {
    std::vector<double> q = parse_csv(args.q);
    rows = pose_rows(kin::fk_numeric(parsed, q, parse_constants(args.constants)));
  }
  if (args.as_json) {
    std::cout << ordered_json{{"symbolic", symbolic}, {"matrix", rows}}.dump(2) << "\n";
  } else if (symbolic) {
    print_symbolic_rows(rows);
  } else {
    print_numeric_rows(rows);
  }
  return 0;
}

struct JacArgs {
  std::string robot;
  std::string q;
  std::string frame = "world";
  std::vector<std::string> constants;
  bool as_json = false;
};

int run_jac(const JacArgs& args) {
  ets::RobotModel model = resolve_robot(args.robot, parse_constants(args.constants));
  std::vector<double> q = resolve_config(model, args.q);
  kin::Frame frame = args.frame == "ee" ? kin::Frame::EndEffector : kin::Frame::World;
  kin::Jacobian jac = kin::jacobian(model.ets, q, model.constants, frame);
  ordered_json rows = ordered_json::array();
  for (int r = 0; r < 6; ++r) {
    ordered_json row = ordered_json::array();
    for (int c = 0; c < model.njoints(); ++c) row.push_back(jac.matrix(r, c));
    rows.push_back(row);
  }
  if (args.as_json) {
    std::cout << ordered_json{{"robot", model.name}, {"frame", args.frame}, {"matrix", rows}}
                     .dump(2)
              << "\n";
  } else {
    print_numeric_rows(rows);
  }
  return 0;
}

struct IkArgs {
  std::string robot;
  std::string target;
  std::string method = "lm-chan";
  std::string q0;
  std::vector<std::string> constants;
  int max_iterations = 100;
  double tolerance = 1e-10;
  int restarts = 30;
  std::uint64_t seed = 0;
  bool as_json = false;
};

int run_ik(const IkArgs& args) {
  ets::RobotModel model = resolve_robot(args.robot, parse_constants(args.constants));
  kin::Pose target = parse_pose(args.target);
  ik::IKOptions opts;
  try {
    opts.method = ik::parse_method(args.method);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  opts.max_iterations = args.max_iterations;
  opts.tolerance = args.tolerance;
  opts.restarts = args.restarts;
  opts.seed = args.seed;
  std::optional<std::vector<double>> q0;
  if (!args.q0.empty()) q0 = resolve_config(model, args.q0);
  ik::IKResult result = ik::ik_solve(model, target, q0, opts);
  kin::Pose achieved = kin::fk_numeric(model.ets, result.q, model.constants);
  ordered_json out{{"success", result.success},
                   {"method", ik::method_name(opts.method)},
                   {"q", result.q},
                   {"residual", result.residual},
                   {"iterations", result.iterations},
                   {"restarts", result.restarts},
                   {"pose", pose_rows(achieved)}};
  if (args.as_json) {
    std::cout << out.dump(2) << "\n";
  } else {
    std::cout << (result.success ? "converged" : "did not converge")
              << " (method " << ik::method_name(opts.method) << ", residual "
              << result.residual << ", iterations " << result.iterations << ", restarts "
              << result.restarts << ")\n";
    print_numeric_rows(ordered_json::array({ordered_json(result.q)}));
  }
  return 0;
}

struct ServoArgs {
  std::string robot;
  std::string target;
  std::string q0;
  std::string gain = "1.0";
  std::string target_twist;
  double dt = 0.05;
  double max_time = 10.0;
  bool velocity_profile = false;
  std::string out;
  std::vector<std::string> constants;
  bool as_json = false;
};

int run_servo(const ServoArgs& args) {
  ets::RobotModel model = resolve_robot(args.robot, parse_constants(args.constants));
  kin::Pose target = parse_pose(args.target);
  std::vector<double> q0 =
      args.q0.empty() ? default_start(model) : resolve_config(model, args.q0);
  motion::ServoOptions opts;
  opts.gain = parse_csv(args.gain);
  opts.dt = args.dt;
  opts.max_time = args.max_time;
  opts.velocity_profile = args.velocity_profile;
  if (!args.target_twist.empty()) {
    std::vector<double> twist = parse_csv(args.target_twist);
    if (twist.size() != 6) throw UsageError("--target-twist expects 6 values");
    Vec6 v;
    for (int i = 0; i < 6; ++i) v[i] = twist[static_cast<std::size_t>(i)];
    opts.target_twist = v;
  }
  motion::Trajectory traj = motion::simulate_servo(model, q0, target, opts);
  export_to(traj, args.out);
  double final_error = traj.records.empty() ? 0.0 : traj.records.back().error_norm;
  ordered_json out{{"arrived", traj.arrived},
                   {"final_error", final_error},
                   {"records", traj.records.size()},
                   {"out", args.out}};
  if (args.as_json)
    std::cout << out.dump(2) << "\n";
  else
    std::cout << (traj.arrived ? "arrived" : "did not arrive") << " (final error "
              << final_error << ", " << traj.records.size() << " records) -> " << args.out
              << "\n";
  return 0;
}

struct QuinticArgs {
  std::string robot;
  std::string from;
  std::string to;
  double duration = 2.45;
  double dt = 0.05;
  std::string out;
  std::string svg;
  std::vector<std::string> constants;
  bool as_json = false;
};

int run_quintic(const QuinticArgs& args) {
  ets::RobotModel model = resolve_robot(args.robot, parse_constants(args.constants));
  std::vector<double> q0 = resolve_config(model, args.from);
  std::vector<double> q1 = resolve_config(model, args.to);
  motion::Trajectory traj = motion::quintic_joint_traj(model, q0, q1, args.duration, args.dt);
  export_to(traj, args.out);
  if (!args.svg.empty()) {
    std::filesystem::path p(args.svg);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    motion::export_trajectory(traj, "svg", args.svg);
  }
  ordered_json out{{"records", traj.records.size()},
                   {"duration", args.duration},
                   {"out", args.out}};
  if (!args.svg.empty()) out["svg"] = args.svg;
  if (args.as_json)
    std::cout << out.dump(2) << "\n";
  else
    std::cout << traj.records.size() << " records over " << args.duration << " s -> "
              << args.out << "\n";
  return 0;
}

struct AskArgs {
  std::string backend = "scripted";
  std::string query;
  std::string attach;
  std::string log_path;
  std::string fixtures = "fixtures/scripted";
  std::string outdir = ".";
  std::string session = "cli";
  std::uint64_t seed = 0;
  bool zero_runtime = false;
  bool as_json = false;
};

int run_ask(const AskArgs& args) {
  std::string text = trimmed(read_text(args.query));
  std::unique_ptr<agents::Backend> backend = make_backend(args.backend, args.fixtures);
  ets::RobotRegistry registry(args.seed);
  agents::SessionMemory memory;
  agents::RunOptions opts;
  opts.outdir = args.outdir;
  opts.zero_runtime = args.zero_runtime;
  agents::Query query{text, std::nullopt, args.session};
  if (!args.attach.empty()) query.attachment = args.attach;
  agents::RunLog log = agents::run_query(query, registry, *backend, memory, opts);
  if (!args.log_path.empty()) write_file(args.log_path, log.to_json().dump(2) + "\n");
  if (args.as_json) {
    std::cout << log.to_json().dump(2) << "\n";
    return 0;
  }
  std::string route_line;
  for (const std::string& r : log.routes) route_line += (route_line.empty() ? "" : " -> ") + r;
  std::cout << "route: " << route_line << "\n"
            << "attempts: " << log.tau << "\n"
            << "answer: " << log.final_answer.value("text", std::string()) << "\n";
  if (log.final_answer.value("failure", false)) std::cout << "failure: true\n";
  return 0;
}

struct BenchRunArgs {
  std::string suite;
  std::string backend = "scripted";
  std::string suites_dir = "fixtures/suites";
  std::string fixtures = "fixtures/scripted";
  std::string out;
  bool as_json = false;
};

int run_bench_run(const BenchRunArgs& args) {
  if (args.suite == "bench2-images")
    throw bench::BenchError("benchmark 'bench2-images' is reserved but not implemented");
  bench::BenchmarkSuite suite =
      bench::BenchmarkSuite::load(args.suites_dir + "/" + args.suite + ".json");
  std::unique_ptr<agents::Backend> backend = make_backend(args.backend, args.fixtures);
  std::vector<bench::RunRecord> records = bench::run_suite(suite, *backend, args.out);
  if (args.as_json)
    std::cout << ordered_json{{"suite", suite.id},
                              {"runs", records.size()},
                              {"out", args.out}}
                     .dump(2)
              << "\n";
  else
    std::cout << "suite " << suite.id << ": " << records.size() << " runs -> " << args.out
              << "\n";
  return 0;
}

struct BenchScoreArgs {
  std::string in;
  std::string suites_dir = "fixtures/suites";
  std::string report;
  bool table = false;
  bool as_json = false;
};

int run_bench_score(const BenchScoreArgs& args) {
  std::string suite_id;
  bench::load_results(args.in, &suite_id);
  if (suite_id.empty()) throw std::runtime_error("results manifest names no suite");
  bench::BenchmarkSuite suite =
      bench::BenchmarkSuite::load(args.suites_dir + "/" + suite_id + ".json");
  bench::SuiteScore score = bench::score_results(suite, args.in);
  ordered_json sj = bench::score_json(score, suite.id);
  if (!args.report.empty()) write_file(args.report, sj.dump(2) + "\n");
  if (args.as_json) {
    std::cout << sj.dump(2) << "\n";
    return 0;
  }
  if (args.table) std::cout << metrics::report_table(score.report, suite.id);
  std::cout << "suite " << suite.id << ": n=" << score.report.n
            << " m_t=" << metrics::round2(score.report.m_t) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"symbolic and numeric robot arm kinematics"};
  app.require_subcommand(1);

  EtsParseArgs ets_args;
  CLI::App* ets_cmd = app.add_subcommand("ets", "transform sequence utilities");
  ets_cmd->require_subcommand(1);
  CLI::App* ets_parse = ets_cmd->add_subcommand("parse", "parse and echo a sequence");
  ets_parse->add_option("source", ets_args.source, "sequence file, or - for stdin")
      ->required();
  ets_parse->add_flag("--json", ets_args.as_json, "machine-readable output");

  FkArgs fk_args;
  CLI::App* fk_cmd = app.add_subcommand("fk", "forward kinematics of a sequence");
  fk_cmd->add_option("--ets", fk_args.ets_text, "transform sequence")->required();
  fk_cmd->add_option("--q", fk_args.q, "joint values (csv); omit for symbolic form");
  fk_cmd->add_option("--const", fk_args.constants, "constant as name=value");
  fk_cmd->add_flag("--symbolic", fk_args.symbolic, "print the symbolic matrix");
  fk_cmd->add_flag("--json", fk_args.as_json, "machine-readable output");

  JacArgs jac_args;
  CLI::App* jac_cmd = app.add_subcommand("jac", "manipulator Jacobian");
  jac_cmd->add_option("--robot", jac_args.robot, "panda, ur3, or a transform sequence")
      ->required();
  jac_cmd->add_option("--q", jac_args.q, "joint values (csv) or configuration name")
      ->required();
  jac_cmd->add_option("--frame", jac_args.frame, "world or ee")
      ->check(CLI::IsMember({"world", "ee"}));
  jac_cmd->add_option("--const", jac_args.constants, "constant as name=value");
  jac_cmd->add_flag("--json", jac_args.as_json, "machine-readable output");

  IkArgs ik_args;
  CLI::App* ik_cmd = app.add_subcommand("ik", "inverse kinematics");
  ik_cmd->add_option("--robot", ik_args.robot, "panda, ur3, or a transform sequence")
      ->required();
  ik_cmd->add_option("--target", ik_args.target, "4x4 pose as JSON, file, or -")
      ->required();
  ik_cmd->add_option("--method", ik_args.method,
                     "newton-raphson, gauss-newton, lm-chan, lm-sugihara, lm-wampler")
      ->check(CLI::IsMember({"newton-raphson", "gauss-newton", "lm-chan", "lm-sugihara",
                             "lm-wampler"}));
  ik_cmd->add_option("--q0", ik_args.q0, "start configuration (csv or name)");
  ik_cmd->add_option("--const", ik_args.constants, "constant as name=value");
  ik_cmd->add_option("--max-iterations", ik_args.max_iterations, "per-start cap");
  ik_cmd->add_option("--tolerance", ik_args.tolerance, "squared-error tolerance");
  ik_cmd->add_option("--restarts", ik_args.restarts, "random restarts");
  ik_cmd->add_option("--seed", ik_args.seed, "restart seed");
  ik_cmd->add_flag("--json", ik_args.as_json, "machine-readable output");

  ServoArgs servo_args;
  CLI::App* servo_cmd = app.add_subcommand("servo", "position-based servo simulation");
  servo_cmd->add_option("--robot", servo_args.robot, "panda, ur3, or a transform sequence")
      ->required();
  servo_cmd->add_option("--target", servo_args.target, "4x4 pose as JSON, file, or -")
      ->required();
  servo_cmd->add_option("--q0", servo_args.q0, "start configuration (csv or name)");
  servo_cmd->add_option("--gain", servo_args.gain, "proportional gain (csv, broadcast to 6)");
  servo_cmd->add_option("--target-twist", servo_args.target_twist,
                        "target velocity, 6 csv values");
  servo_cmd->add_option("--dt", servo_args.dt, "time step");
  servo_cmd->add_option("--max-time", servo_args.max_time, "simulated time budget");
  servo_cmd->add_flag("--velocity-profile", servo_args.velocity_profile,
                      "ramp commands over the first half second");
  servo_cmd->add_option("--out", servo_args.out, "trajectory file (.csv or .svg)")
      ->required();
  servo_cmd->add_option("--const", servo_args.constants, "constant as name=value");
  servo_cmd->add_flag("--json", servo_args.as_json, "machine-readable output");

  QuinticArgs quintic_args;
  CLI::App* traj_cmd = app.add_subcommand("traj", "trajectory generation");
  traj_cmd->require_subcommand(1);
  CLI::App* quintic_cmd = traj_cmd->add_subcommand("quintic", "quintic joint trajectory");
  quintic_cmd->add_option("--robot", quintic_args.robot,
                          "panda, ur3, or a transform sequence")
      ->required();
  quintic_cmd->add_option("--from", quintic_args.from, "start configuration (csv or name)")
      ->required();
  quintic_cmd->add_option("--to", quintic_args.to, "end configuration (csv or name)")
      ->required();
  quintic_cmd->add_option("--duration", quintic_args.duration, "seconds");
  quintic_cmd->add_option("--dt", quintic_args.dt, "time step");
  quintic_cmd->add_option("--out", quintic_args.out, "trajectory file (.csv or .svg)")
      ->required();
  quintic_cmd->add_option("--svg", quintic_args.svg, "also write this svg plot");
  quintic_cmd->add_option("--const", quintic_args.constants, "constant as name=value");
  quintic_cmd->add_flag("--json", quintic_args.as_json, "machine-readable output");

  AskArgs ask_args;
  CLI::App* agent_cmd = app.add_subcommand("agent", "agent pipeline");
  agent_cmd->require_subcommand(1);
  CLI::App* ask_cmd = agent_cmd->add_subcommand("ask", "answer one query");
  ask_cmd->add_option("--backend", ask_args.backend, "scripted or remote")
      ->check(CLI::IsMember({"scripted", "remote"}));
  ask_cmd->add_option("--query", ask_args.query, "query file, or - for stdin")->required();
  ask_cmd->add_option("--attach", ask_args.attach, "attachment file");
  ask_cmd->add_option("--log", ask_args.log_path, "write the full run log here");
  ask_cmd->add_option("--fixtures", ask_args.fixtures, "scripted backend rules directory");
  ask_cmd->add_option("--outdir", ask_args.outdir, "directory for trajectory artifacts");
  ask_cmd->add_option("--session", ask_args.session, "session id");
  ask_cmd->add_option("--seed", ask_args.seed, "robot id seed");
  ask_cmd->add_flag("--zero-runtime", ask_args.zero_runtime,
                    "record zero runtime for reproducible logs");
  ask_cmd->add_flag("--json", ask_args.as_json, "print the full run log");

  BenchRunArgs brun_args;
  BenchScoreArgs bscore_args;
  CLI::App* bench_cmd = app.add_subcommand("bench", "benchmark runner and scorer");
  bench_cmd->require_subcommand(1);
  CLI::App* brun_cmd = bench_cmd->add_subcommand("run", "replay a suite");
  brun_cmd->add_option("--suite", brun_args.suite, "suite id")
      ->check(CLI::IsMember({"bench1-text", "bench2-images", "bench3-tasks"}))
      ->required();
  brun_cmd->add_option("--backend", brun_args.backend, "scripted or remote")
      ->check(CLI::IsMember({"scripted", "remote"}));
  brun_cmd->add_option("--suites-dir", brun_args.suites_dir, "suite definitions directory");
  brun_cmd->add_option("--fixtures", brun_args.fixtures, "scripted backend rules directory");
  brun_cmd->add_option("--out", brun_args.out, "results directory")->required();
  brun_cmd->add_flag("--json", brun_args.as_json, "machine-readable output");
  CLI::App* bscore_cmd = bench_cmd->add_subcommand("score", "grade replayed results");
  bscore_cmd->add_option("--in", bscore_args.in, "results directory")->required();
  bscore_cmd->add_option("--suites-dir", bscore_args.suites_dir,
                         "suite definitions directory");
  bscore_cmd->add_option("--report", bscore_args.report, "write the score report here");
  bscore_cmd->add_flag("--table", bscore_args.table, "print the metric table");
  bscore_cmd->add_flag("--json", bscore_args.as_json, "print the full score report");

  try {
    app.parse(argc, argv);
    if (ets_parse->parsed()) return run_ets_parse(ets_args);
    if (fk_cmd->parsed()) return run_fk(fk_args);
    if (jac_cmd->parsed()) return run_jac(jac_args);
    if (ik_cmd->parsed()) return run_ik(ik_args);
    if (servo_cmd->parsed()) return run_servo(servo_args);
    if (quintic_cmd->parsed()) return run_quintic(quintic_args);
    if (ask_cmd->parsed()) return run_ask(ask_args);
    if (brun_cmd->parsed()) return run_bench_run(brun_args);
    if (bscore_cmd->parsed()) return run_bench_score(bscore_args);
    return 0;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
