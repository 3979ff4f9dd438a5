// Benchmark harness: loads a suite definition, replays every case a fixed
// number of times through the agent pipeline, and persists each run as JSON
// together with a manifest.  Scoring reloads the persisted runs and grades
// them against the gold labels referenced by the suite.  Every run gets a
// registry seeded from the case id and repeat index, so robot ids, file
// names, and the serialized logs are reproducible byte for byte.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "agents/pipeline.hpp"
#include "metrics.hpp"

namespace armkit::bench {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

class BenchError : public std::runtime_error {
 public:
  explicit BenchError(const std::string& what) : std::runtime_error(what) {}
};

struct BenchCase {
  std::string id;
  std::string query;
  std::optional<std::string> attachment;  // resolved path
  metrics::GoldLabel gold;
};

namespace detail {

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw BenchError("could not read file: " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  return text;
}

inline std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace detail

struct BenchmarkSuite {
  std::string id;
  int repeats = 3;
  std::vector<BenchCase> cases;

  static BenchmarkSuite load(const std::string& path) {
    std::ifstream in(path);
    if (!in.good()) throw BenchError("could not read suite file: " + path);
    json j = json::parse(in, nullptr, true, true);
    BenchmarkSuite suite;
    suite.id = j.at("id").get<std::string>();
    if (suite.id == "bench2-images")
      throw BenchError("benchmark 'bench2-images' is reserved but not implemented");
    if (suite.id != "bench1-text" && suite.id != "bench3-tasks")
      throw BenchError("unknown benchmark id '" + suite.id +
                       "'; expected bench1-text or bench3-tasks");
    suite.repeats = j.value("repeats", 3);
    if (suite.repeats < 1) throw BenchError("repeats must be at least 1");
    std::filesystem::path base = std::filesystem::path(path).parent_path();
    for (const json& jc : j.at("cases")) {
      BenchCase c{jc.at("id").get<std::string>(), "", std::nullopt,
                  metrics::GoldLabel::load((base / jc.at("gold").get<std::string>()).string())};
      if (jc.contains("query"))
        c.query = jc["query"].get<std::string>();
      else
        c.query = detail::slurp(base / jc.at("query_file").get<std::string>());
      if (jc.contains("attachment"))
        c.attachment = (base / jc["attachment"].get<std::string>()).string();
      if (c.gold.query_id != c.id)
        throw BenchError("gold label '" + c.gold.query_id + "' does not match case '" + c.id +
                         "'");
      suite.cases.push_back(std::move(c));
    }
    if (suite.cases.empty()) throw BenchError("suite '" + suite.id + "' has no cases");
    return suite;
  }
};

struct ManifestEntry {
  std::string case_id;
  int repeat = 1;
  std::string rel_path;  // run.json location relative to the results directory
};

struct RunRecord {
  ManifestEntry entry;
  agents::RunLog log;
};

// Replays the whole suite into out_root, one directory per (case, repeat).
inline std::vector<RunRecord> run_suite(const BenchmarkSuite& suite, agents::Backend& backend,
                                        const std::string& out_root) {
  namespace fs = std::filesystem;
  fs::create_directories(out_root);
  std::vector<RunRecord> records;
  ordered_json manifest;
  manifest["suite"] = suite.id;
  manifest["repeats"] = suite.repeats;
  manifest["runs"] = ordered_json::array();
  for (const BenchCase& c : suite.cases) {
    for (int rep = 1; rep <= suite.repeats; ++rep) {
      std::string sub = c.id + "-r" + std::to_string(rep);
      fs::path run_dir = fs::path(out_root) / sub;
      fs::create_directories(run_dir);

      ets::RobotRegistry registry(detail::fnv1a(c.id + "#" + std::to_string(rep)));
      agents::SessionMemory memory;
      agents::RunOptions opts;
      opts.zero_runtime = true;
      opts.outdir = run_dir.string();
      agents::Query query{c.query, c.attachment, c.id};
      agents::RunLog log = agents::run_query(query, registry, backend, memory, opts);

      std::string rel = sub + "/run.json";
      std::ofstream out(run_dir / "run.json", std::ios::binary);
      out << log.to_json().dump(2) << "\n";
      manifest["runs"].push_back(
          ordered_json{{"case", c.id}, {"repeat", rep}, {"path", rel}});
      records.push_back({{c.id, rep, rel}, std::move(log)});
    }
  }
  std::ofstream mout(fs::path(out_root) / "manifest.json", std::ios::binary);
  mout << manifest.dump(2) << "\n";
  return records;
}

inline std::vector<RunRecord> load_results(const std::string& results_dir,
                                           std::string* suite_id = nullptr) {
  namespace fs = std::filesystem;
  std::ifstream in(fs::path(results_dir) / "manifest.json");
  if (!in.good())
    throw BenchError("could not read manifest.json in results directory: " + results_dir);
  json manifest = json::parse(in);
  if (suite_id) *suite_id = manifest.value("suite", "");
  std::vector<RunRecord> records;
  for (const json& jr : manifest.at("runs")) {
    RunRecord rec;
    rec.entry = {jr.at("case").get<std::string>(), jr.at("repeat").get<int>(),
                 jr.at("path").get<std::string>()};
    std::ifstream rin(fs::path(results_dir) / rec.entry.rel_path);
    if (!rin.good()) throw BenchError("could not read run file: " + rec.entry.rel_path);
    rec.log = agents::RunLog::from_json(json::parse(rin));
    records.push_back(std::move(rec));
  }
  return records;
}

struct ScoredRun {
  ManifestEntry entry;
  metrics::RunScore score;
};

struct SuiteScore {
  std::vector<ScoredRun> runs;
  metrics::MetricReport report;
};

inline SuiteScore score_results(const BenchmarkSuite& suite, const std::string& results_dir) {
  std::string recorded_id;
  std::vector<RunRecord> records = load_results(results_dir, &recorded_id);
  if (!recorded_id.empty() && recorded_id != suite.id)
    throw BenchError("results were produced for suite '" + recorded_id +
                     "', not for '" + suite.id + "'");
  SuiteScore out;
  std::vector<metrics::RunScore> scores;
  for (const RunRecord& rec : records) {
    const BenchCase* match = nullptr;
    for (const BenchCase& c : suite.cases)
      if (c.id == rec.entry.case_id) match = &c;
    if (!match)
      throw BenchError("run references unknown case '" + rec.entry.case_id + "'");
    metrics::RunScore score = metrics::score_run(rec.log, match->gold);
    scores.push_back(score);
    out.runs.push_back({rec.entry, std::move(score)});
  }
  out.report = metrics::aggregate(scores);
  return out;
}

inline ordered_json score_json(const SuiteScore& s, const std::string& suite_id) {
  ordered_json j;
  j["suite"] = suite_id;
  j["report"] = metrics::report_json(s.report);
  j["runs"] = ordered_json::array();
  for (const ScoredRun& r : s.runs) {
    ordered_json jr;
    jr["case"] = r.entry.case_id;
    jr["repeat"] = r.entry.repeat;
    jr["sup"] = r.score.sup();
    jr["ets"] = r.score.ets ? ordered_json(*r.score.ets) : ordered_json();
    jr["plan"] = r.score.plan ? ordered_json(*r.score.plan) : ordered_json();
    jr["robosolver"] = r.score.robosolver;
    jr["judge"] = r.score.judge;
    jr["self_correct"] =
        r.score.self_correct ? ordered_json(*r.score.self_correct) : ordered_json();
    jr["completion"] = r.score.completion;
    j["runs"].push_back(std::move(jr));
  }
  return j;
}

}  // namespace armkit::bench
