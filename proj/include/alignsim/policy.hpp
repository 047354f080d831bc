#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "alignsim/env.hpp"
#include "alignsim/memory.hpp"
#include "alignsim/persona.hpp"

namespace alignsim {

enum class PromptMode { plain, plus };

std::string_view to_string(PromptMode mode);
PromptMode prompt_mode_from_string(std::string_view s);

struct PolicyRequest {
  std::string state_text;
  std::string persona_text;
  std::string history_text;
  std::vector<Action> possible_actions;
  PromptMode mode = PromptMode::plain;
  std::optional<std::string> causal_context;  // appended inside [STATE]
};

struct PolicyDecision {
  Action action;
  std::string rationale;
  std::string raw_output;
  bool retried = false;
  bool fallback = false;               // both attempts failed to parse
  std::optional<Action> tentative;     // plus mode: action before the causal stage
  std::vector<std::string> causal_questions;
};

inline constexpr std::string_view kRetrySentence = "You have one more chance to provide the correct answer";

// `header` on its own line, then each body line indented by two spaces.
std::string prompt_section(std::string_view header, std::string_view body);

std::string build_policy_prompt(const PolicyRequest& request);

// Last `BEST-ACTION:` line wins; the action must be in `allowed`. Any SEARCH
// matches an allowed SEARCH entry since queries are free text.
std::optional<PolicyDecision> parse_decision(std::string_view raw, std::span<const Action> allowed);

// "What would happen if you {gloss} now?" for the tentative action followed by
// the other allowed navigation and exit actions. Empty in plain mode.
std::vector<std::string> causal_questions(const Action& tentative, std::span<const Action> allowed,
                                          PromptMode mode);
std::string action_gloss(const Action& action);

// Fixed prompts.
std::string post_interview_prompt();
std::optional<int> parse_interview_rating(std::string_view raw);  // RATING: n, n in 1..10
std::string parse_interview_reason(std::string_view raw);
std::string believability_prompt(std::string_view persona_text, std::string_view history_text,
                                 std::span<const std::string> item_titles, std::string_view item_type);
// One label per item, by list position; nullopt where the line is missing.
std::vector<std::optional<bool>> parse_believability(std::string_view raw, std::size_t item_count);
std::string evaluator_prompt(std::string_view interaction_logs);

// Backend plumbing.

enum class CallKind { decide, retry, causal, reflect, interview, classify, judge };
std::string_view to_string(CallKind kind);

struct ChatMessage {
  std::string role;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

// Structured views let non-LLM backends act without parsing prompts.
struct DecisionView {
  const Persona* persona = nullptr;
  const PageState* state = nullptr;
  const AgentMemory* memory = nullptr;
  double global_mean = 3.0;
  std::span<const Action> allowed;
  std::optional<Action> tentative;  // causal stage
};

struct ReflectionView {
  const Persona* persona = nullptr;
  const AgentMemory* memory = nullptr;
  Action human;
  Action alternative;
  std::string human_next_type;
  std::string alternative_next_type;
  double global_mean = 3.0;
};

struct InterviewView {
  const Persona* persona = nullptr;
  std::map<std::string, int> session_ratings;
  int pages_visited = 0;
};

struct ClassifyView {
  const AgentMemory* memory = nullptr;
  const ItemCatalog* catalog = nullptr;
  std::vector<std::string> items;
};

struct BackendCall {
  CallKind kind = CallKind::decide;
  std::vector<ChatMessage> messages;
  std::uint64_t seed = 0;  // per-session stream
  int step = 0;
  const DecisionView* decision = nullptr;
  const ReflectionView* reflection = nullptr;
  const InterviewView* interview = nullptr;
  const ClassifyView* classify = nullptr;
};

// Must tolerate concurrent complete() calls from independent sessions.
class PolicyBackend {
 public:
  virtual ~PolicyBackend() = default;
  virtual std::string name() const = 0;
  // Raw model text. Throws TransportError when the backend cannot answer.
  virtual std::string complete(const BackendCall& call) = 0;
};

struct DecideOptions {
  std::optional<Action> fallback;  // default EXIT, else the first allowed action
  std::uint64_t seed = 0;
  int step = 0;
};

// One call, one re-prompt on parse failure, then the fallback. In plus mode a
// second-stage causal call may revise the action.
PolicyDecision decide(PolicyBackend& backend, const PolicyRequest& request, const DecisionView& view,
                      const DecideOptions& options = {});

}  // namespace alignsim
