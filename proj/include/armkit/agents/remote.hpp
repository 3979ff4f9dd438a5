// Chat-completion backend for running the pipeline against a live model.
// Configured through the environment:
//   ARMKIT_REMOTE_URL    http://host:port  (https is not supported)
//   ARMKIT_REMOTE_MODEL  model identifier sent with each request
//   ARMKIT_REMOTE_TOKEN  optional bearer token
//   ARMKIT_REMOTE_PATH   endpoint path, default /v1/chat/completions
//
// Each role becomes one request; the model must reply with a single JSON
// object matching the role's response shape.  Transport or parse failures
// surface as BackendError, they are never silently absorbed.

#pragma once

#include <cstdlib>
#include <string>

#include <httplib.h>

#include "backend.hpp"

namespace armkit::agents {

class RemoteBackend : public Backend {
 public:
  RemoteBackend() {
    _url = env_or("ARMKIT_REMOTE_URL", "");
    _model = env_or("ARMKIT_REMOTE_MODEL", "");
    _token = env_or("ARMKIT_REMOTE_TOKEN", "");
    _path = env_or("ARMKIT_REMOTE_PATH", "/v1/chat/completions");
    if (_url.empty() || _model.empty())
      throw BackendError(
          "remote backend needs ARMKIT_REMOTE_URL and ARMKIT_REMOTE_MODEL to be set");
    if (_url.rfind("https://", 0) == 0)
      throw BackendError("remote backend supports only http:// endpoints");
  }

  std::string name() const override { return "remote:" + _model; }

  json complete(const std::string& role, const json& ctx, UsageRecord& usage) override {
    json body = {
        {"model", _model},
        {"temperature", 0},
        {"messages",
         {{{"role", "system"}, {"content", system_prompt(role)}},
          {{"role", "user"}, {"content", ctx.dump()}}}},
    };
    httplib::Client client(_url);
    client.set_read_timeout(120, 0);
    httplib::Headers headers;
    if (!_token.empty()) headers.emplace("Authorization", "Bearer " + _token);
    auto res = client.Post(_path, headers, body.dump(), "application/json");
    if (!res) throw BackendError("remote backend request failed: " + _url + _path);
    if (res->status != 200)
      throw BackendError("remote backend returned HTTP " + std::to_string(res->status));
    json reply;
    try {
      reply = json::parse(res->body);
    } catch (const json::exception& e) {
      throw BackendError(std::string("remote backend sent unparseable JSON: ") + e.what());
    }
    if (reply.contains("usage")) {
      usage.prompt_tokens += reply["usage"].value("prompt_tokens", 0LL);
      usage.completion_tokens += reply["usage"].value("completion_tokens", 0LL);
    }
    std::string content;
    try {
      content = reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
      throw BackendError("remote backend reply is missing choices[0].message.content");
    }
    return parse_payload(content);
  }

 private:
  std::string _url, _model, _token, _path;

  static std::string env_or(const char* key, const std::string& fallback) {
    const char* v = std::getenv(key);
    return v ? std::string(v) : fallback;
  }

  static std::string system_prompt(const std::string& role) {
    std::string base =
        "You are one stage of a robot-kinematics agent pipeline. Reply with exactly one "
        "JSON object and nothing else. ";
    if (role == "route")
      return base + "Given the query context, choose the next agent. Reply "
                    "{\"route\": \"retriever\"|\"extractor\"|\"researcher\"|\"planner\"}.";
    if (role == "extract")
      return base + "Convert the robot description into an elementary transform sequence "
                    "string such as \"Rz(q1) tz(L1) Ry(-q2) tx(L2)\". Reply {\"ets\": \"...\"} "
                    "or {\"error\": \"...\"} if the text does not describe a kinematic chain.";
    if (role == "plan")
      return base + "Pick the ordered tool list that answers the goal. Reply "
                    "{\"goal_summary\": \"...\", \"tools\": [\"...\"]} or {\"error\": \"...\"}.";
    if (role == "react")
      return base + "Act one step at a time with the planned tools. Reply either "
                    "{\"tool\": \"...\", \"arguments\": {...}} or "
                    "{\"final\": {\"text\": \"...\", \"quantities\": {...}}}.";
    if (role == "inspect")
      return base + "Check the attempt transcript. Reply {\"accepted\": true} or "
                    "{\"accepted\": false, \"feedback\": \"...\"}.";
    throw BackendError("unknown backend role '" + role + "'");
  }

  // Models often wrap JSON in a markdown fence; strip one if present.
  static json parse_payload(std::string content) {
    auto fence = content.find("```");
    if (fence != std::string::npos) {
      auto start = content.find('\n', fence);
      auto end = content.rfind("```");
      if (start != std::string::npos && end > start)
        content = content.substr(start + 1, end - start - 1);
    }
    try {
      return json::parse(content);
    } catch (const json::exception& e) {
      throw BackendError(std::string("remote backend reply is not valid JSON: ") + e.what());
    }
  }
};

}  // namespace armkit::agents
