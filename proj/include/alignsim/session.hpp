#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "alignsim/episode.hpp"
#include "alignsim/policy.hpp"
#include "alignsim/rollout.hpp"

namespace alignsim {

enum class SessionOutcome { exit, step_cap, error };
std::string_view to_string(SessionOutcome o);
SessionOutcome session_outcome_from_string(std::string_view s);

struct SessionConfig {
  int step_cap = 50;
  PromptMode mode = PromptMode::plain;
  bool post_interview = true;
  std::optional<Action> fallback;  // parse-failure fallback, default EXIT
};

struct StepRecord {
  int step = 0;
  int page_number = 1;
  std::string state_text;
  std::string state_type;
  std::string prompt;
  std::string action_token;
  std::string rationale;
  std::string raw_output;
  bool retried = false;
  bool fallback = false;
  std::optional<std::string> tentative_token;
  std::string next_state_text;
  std::string next_state_type;

  bool operator==(const StepRecord&) const = default;
};

struct SessionLog {
  std::string session_id;
  std::string persona_id;
  std::uint64_t seed = 0;
  std::vector<StepRecord> steps;
  std::map<std::string, int> ratings;  // issued this session
  SessionOutcome terminal = SessionOutcome::exit;
  std::string error;
  int pages_visited = 0;  // distinct page numbers observed
  int exit_page = 0;      // page number when the session ended
  int displayed_items = 0;
  int interacted_items = 0;  // displayed items clicked or rated
  std::optional<int> satisfaction;
  std::optional<std::string> interview_reason;
  json memory;

  bool operator==(const SessionLog&) const = default;
};

// One JSON object per step followed by a summary footer.
std::vector<json> session_log_lines(const SessionLog& log);
SessionLog session_log_from_lines(std::span<const json> lines);
void write_session_log(const std::filesystem::path& path, const SessionLog& log);
SessionLog read_session_log(const std::filesystem::path& path);
std::vector<SessionLog> read_session_logs(const std::filesystem::path& dir);

// Transitions of a log, for world-model records and demonstrations.
std::vector<Transition> session_transitions(const SessionLog& log, std::string_view source);

SessionLog run_session(const std::string& session_id, const Persona& persona, PolicyBackend& backend,
                       Episode episode, const SessionConfig& config, std::uint64_t seed);

struct PopulationConfig {
  std::size_t agents = 1;
  std::uint64_t master_seed = 0;
  int workers = 1;
  SessionConfig session;
  std::filesystem::path output_dir;  // empty: keep in memory only
};

std::string session_id_for(std::size_t index);

// Agents are personas drawn in a seeded order (cycling when agents exceeds the
// population). Session i uses derive_seed(master_seed, "session", i).
std::vector<std::size_t> assign_agents(std::size_t population, std::size_t agents, std::uint64_t master_seed);

std::vector<SessionLog> run_population(std::span<const Persona> personas, const World& world, PolicyBackend& backend,
                                       const PopulationConfig& config);

}  // namespace alignsim
