#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "alignsim/episode.hpp"
#include "alignsim/metrics.hpp"
#include "alignsim/recommender.hpp"

namespace alignsim {

using PersonaIndex = std::map<std::string, Persona>;
PersonaIndex index_personas(std::span<const Persona> personas);
// The indexed persona, or a neutral one carrying only the user id.
Persona persona_or_default(const PersonaIndex& index, const std::string& user_id);

struct AlignmentEvalConfig {
  int m = 1;
  int items_per_agent = 20;
  std::uint64_t seed = 0;
  std::string item_type = "movie";
  std::size_t max_agents = 0;  // 0 evaluates every task
};

struct AlignmentEvalResult {
  ClassificationMetrics metrics;
  std::size_t agents = 0;
  std::size_t skipped = 0;
  std::size_t unparsed_labels = 0;  // counted as "Not Interacted"
};

// Preference alignment: each agent sees its item list and labels every item
// Interacted / Not Interacted. Memory holds the training history only.
AlignmentEvalResult evaluate_alignment(const World& world, const PersonaIndex& personas,
                                       const std::map<std::string, std::vector<RatingRecord>>& interactions,
                                       PolicyBackend& backend, const AlignmentEvalConfig& config);

struct RatingEvalConfig {
  std::size_t max_records = 0;  // 0 evaluates every record
  PromptMode mode = PromptMode::plain;
  std::uint64_t seed = 0;
};

struct RatingEvalResult {
  RatingErrors errors;
  std::size_t evaluated = 0;
  std::size_t fallbacks = 0;
};

// The agent rates each held-out item in a single-item rating context.
RatingEvalResult evaluate_agent_ratings(const World& world, const PersonaIndex& personas,
                                        std::span<const RatingRecord> test, PolicyBackend& backend,
                                        const RatingEvalConfig& config);

// Predictions are clamped to [1, 5].
RatingErrors model_rating_errors(const MfModel& model, std::span<const RatingRecord> test);
RatingErrors global_mean_rating_errors(double mean, std::span<const RatingRecord> test);

// Seeded random partition with the same proportions as time_split.
SplitCorpus random_split(std::vector<RatingRecord> records, std::uint64_t seed,
                         std::array<double, 3> fractions = {0.8, 0.1, 0.1});

// Teacher-forced action prediction over recorded sessions: at every step the
// policy predicts, then the recorded action is applied.
std::vector<ActionRecordPair> predict_recorded_actions(const World& world, const PersonaIndex& personas,
                                                       std::span<const SessionLog> sessions, PolicyBackend& backend,
                                                       PromptMode mode, std::uint64_t seed);

}  // namespace alignsim
