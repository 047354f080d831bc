#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "alignsim/episode.hpp"
#include "alignsim/policy.hpp"

namespace alignsim {

struct EpsilonSchedule {
  double start = 0.3;
  double end = 0.05;
  std::int64_t horizon = 100000;

  // start - (start - end) * min(t, horizon) / horizon
  double at(std::int64_t t) const;
  void validate() const;
};

struct Transition {
  std::string session_id;
  int step = 0;
  std::string persona_id;
  std::string state_text;
  std::string state_type;
  Action action;
  std::optional<std::string> next_state_text;  // nullopt is TERMINAL
  std::string next_state_type;
  std::string source;  // human | synthetic_demo | rollout | counterfactual

  bool terminal() const { return !next_state_text.has_value(); }
  bool operator==(const Transition&) const = default;
};

json to_json(const Transition& t);
Transition transition_from_json(const json& j);

struct EpisodeSpec {
  std::string session_id;
  Persona persona;
  Episode episode;
};
using EpisodeFactory = std::function<EpisodeSpec(std::size_t index)>;

struct RolloutOptions {
  EpsilonSchedule schedule;
  std::int64_t first_episode = 0;  // global episode counter at the start of this batch
  int step_cap = 50;
  PromptMode mode = PromptMode::plain;
  std::uint64_t seed = 0;
};

// Episode t explores with probability schedule.at(first_episode + t) per step,
// drawing uniformly from the allowed actions, and otherwise follows `behavior`.
std::vector<Transition> collect_rollouts(const EpisodeFactory& factory, PolicyBackend& behavior,
                                         std::size_t episodes, const RolloutOptions& options);

// Replays `actions` from a fresh episode; throws IllegalActionError on divergence.
void replay_actions(Episode& episode, std::span<const Action> actions);

struct Alternative {
  Action action;
  std::optional<std::string> next_state_text;
  std::string next_state_type;
  std::string reflection_prompt;
  std::string reflection;  // chain-of-thought c; empty when the backend gave none
};

struct CounterfactualSet {
  Transition anchor;
  std::string policy_prompt;  // the anchor state framed as the policy prompt
  std::vector<Alternative> alternatives;
  bool filled = false;        // the policy supplied fewer than K alternatives
  int policy_attempts = 0;
};

json to_json(const CounterfactualSet& s);
CounterfactualSet counterfactual_from_json(const json& j);

struct CounterfactualOptions {
  int k = 3;
  int max_attempts = 6;  // policy queries before uniform fill
  bool reflect = true;
  std::uint64_t seed = 0;
};

// `at_anchor` is the episode in the anchor's pre-action state.
CounterfactualSet sample_counterfactuals(const Episode& at_anchor, const Transition& anchor, const Persona& persona,
                                         PolicyBackend& backend, const CounterfactualOptions& options);

std::string build_reflection_prompt(std::string_view persona_text, const Transition& anchor,
                                    const Alternative& alternative);

enum class RecordKind { world_model, counterfactual_reflection };
std::string_view to_string(RecordKind kind);

struct TrainingRecord {
  RecordKind kind = RecordKind::world_model;
  std::string prompt;
  std::string target;
  double weight = 1.0;
  std::string session_id;
  int step = 0;
  std::optional<int> alternative_index;

  bool operator==(const TrainingRecord&) const = default;
};

json to_json(const TrainingRecord& r);

std::string world_model_prompt(const Transition& t);
std::vector<TrainingRecord> emit_world_model_records(std::span<const Transition> transitions, double lambda_wm = 1.0);

struct ReflectionEmission {
  std::vector<TrainingRecord> records;
  int skipped = 0;  // alternatives without a chain-of-thought
};
ReflectionEmission emit_reflection_records(std::span<const CounterfactualSet> sets, double lambda_cr = 0.5);

// Counterfactual branches as transitions, for augmenting the rollout store.
std::vector<Transition> counterfactual_transitions(std::span<const CounterfactualSet> sets);
std::vector<Transition> merge_rollouts(std::span<const Transition> rollouts, std::span<const Transition> human,
                                       std::span<const CounterfactualSet> sets);

}  // namespace alignsim
