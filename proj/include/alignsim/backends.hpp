#pragma once

#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <vector>

#include "alignsim/policy.hpp"

namespace alignsim {

struct OracleChoice {
  Action action;
  std::string rationale;
};

inline constexpr double kOracleAffinityFloor = 2.5;

// Mean memory rating over items sharing a genre, else the global mean.
double oracle_affinity(const AgentMemory& memory, const std::string& item_id, double global_mean);
int oracle_patience(const Persona& persona);

// Deterministic persona policy:
//   page beyond patience            -> EXIT
//   no unrated slot                 -> NEXT_PAGE
//   every unrated slot below floor  -> EXIT
//   otherwise RATE the best slot at clamp(round(affinity + pickiness shift), 1, 5)
// Choices outside `allowed` degrade to the nearest allowed rating on that
// slot, then NEXT_PAGE, EXIT, and finally the first allowed action.
OracleChoice oracle_decide(const Persona& persona, const PageState& state, const AgentMemory& memory,
                           double global_mean, std::span<const Action> allowed);
std::string oracle_lesson(const ReflectionView& view);
int oracle_satisfaction(const InterviewView& view);
// In memory, or sharing a genre with rated items at or above the affinity floor.
bool oracle_interacted(const AgentMemory& memory, const std::string& item_id);

std::string format_decision(const Action& action, std::string_view rationale);

class OracleBackend final : public PolicyBackend {
 public:
  std::string name() const override { return "oracle"; }
  std::string complete(const BackendCall& call) override;
};

// Uniform over the allowed actions; the draw depends only on (seed, step,
// prompt), so the backend holds no state.
class RandomBackend final : public PolicyBackend {
 public:
  std::string name() const override { return "random"; }
  std::string complete(const BackendCall& call) override;
};

struct ScriptedReply {
  std::string text;
  bool transport_failure = false;
};

// Replays a fixed transcript in order; running out is a transport failure.
class ScriptedBackend final : public PolicyBackend {
 public:
  explicit ScriptedBackend(std::vector<ScriptedReply> replies);
  explicit ScriptedBackend(const std::vector<std::string>& replies);
  std::string name() const override { return "scripted"; }
  std::string complete(const BackendCall& call) override;
  std::vector<BackendCall> calls() const;
  std::size_t call_count() const;

 private:
  mutable std::mutex mu_;
  std::deque<ScriptedReply> replies_;
  std::vector<BackendCall> calls_;  // views are not retained
};

class FunctionBackend final : public PolicyBackend {
 public:
  using Fn = std::function<std::string(const BackendCall&)>;
  FunctionBackend(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}
  std::string name() const override { return name_; }
  std::string complete(const BackendCall& call) override { return fn_(call); }

 private:
  std::string name_;
  Fn fn_;
};

// Stable key of a call's kind and messages, used to match replayed exchanges.
std::string exchange_key(const BackendCall& call);

// Append-only JSON-lines log of backend exchanges; appends are serialized.
class ExchangeLog {
 public:
  explicit ExchangeLog(const std::filesystem::path& path);
  void append(const BackendCall& call, const json& request, const std::string& response);

 private:
  std::mutex mu_;
  std::ofstream out_;
};

// Serves responses recorded by an ExchangeLog. Repeated keys replay in order.
class ReplayBackend final : public PolicyBackend {
 public:
  explicit ReplayBackend(const std::filesystem::path& log_path);
  std::string name() const override { return "replay"; }
  std::string complete(const BackendCall& call) override;

 private:
  std::mutex mu_;
  std::map<std::string, std::deque<std::string>> responses_;
  std::map<std::string, std::string> last_;
};

struct RemoteConfig {
  std::string endpoint;  // e.g. http://localhost:8000/v1/chat/completions
  std::string model;
  double temperature = 0.0;
  int timeout_seconds = 60;
  int max_in_flight = 4;
  int max_attempts = 2;
  std::string api_key;  // taken from ALIGNSIM_API_KEY when empty
  std::filesystem::path exchange_log;  // optional
};

// JSON-over-HTTP chat completion client.
class RemoteBackend final : public PolicyBackend {
 public:
  explicit RemoteBackend(RemoteConfig config);
  ~RemoteBackend() override;
  std::string name() const override { return "remote"; }
  std::string complete(const BackendCall& call) override;
  json request_body(const BackendCall& call) const;

 private:
  RemoteConfig config_;
  std::string base_;  // scheme://host[:port]
  std::string path_;
  std::counting_semaphore<1024> in_flight_;
  std::unique_ptr<ExchangeLog> log_;
};

}  // namespace alignsim
