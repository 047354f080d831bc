#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "alignsim/dataset.hpp"
#include "alignsim/session.hpp"

namespace alignsim {

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;
  std::int64_t fn = 0;
};

struct ClassificationMetrics {
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  bool zero_division = false;  // some ratio had a zero denominator and was set to 0
  ConfusionCounts counts;
};

// "Interacted" (true) is the positive class.
ConfusionCounts confusion(const std::vector<bool>& predicted, const std::vector<bool>& actual);
ClassificationMetrics classification_metrics(const ConfusionCounts& counts);
ClassificationMetrics classification_metrics(const std::vector<bool>& predicted, const std::vector<bool>& actual);

struct AlignmentTask {
  std::string user_id;
  std::vector<std::string> items;
  std::vector<bool> interacted;
};

struct AlignmentTaskSet {
  std::vector<AlignmentTask> tasks;
  std::vector<std::string> skipped;  // users without enough positives or negatives
};

// Per user: items_per_agent / (1 + m) positives drawn from the user's
// interactions and the rest from never-interacted catalog items, shuffled.
AlignmentTaskSet build_alignment_task(const std::map<std::string, std::vector<RatingRecord>>& interactions,
                                      std::span<const std::string> catalog_items, int m, int items_per_agent,
                                      std::uint64_t seed);

struct RatingErrors {
  double rmse = 0;
  double mae = 0;
};
RatingErrors rating_errors(std::span<const double> predictions, std::span<const double> truth);

// Recommendation-domain actions map onto the web-shopping taxonomy:
// navigation and item clicks are `click`, RATE and SEARCH are `input`, EXIT is
// `terminate`.
struct ActionRecord {
  std::string type;     // click | input | terminate
  std::string subtype;  // click target kind, input field, or outcome
  std::string parameters;

  bool operator==(const ActionRecord&) const = default;
};
ActionRecord action_record(const Action& action);

struct ActionRecordPair {
  ActionRecord predicted;
  ActionRecord actual;
  std::string session_id;
};

struct LabelScores {
  double macro_f1 = 0;
  double weighted_f1 = 0;
  double accuracy = 0;
  std::map<std::string, double> per_label_f1;
  std::size_t support = 0;
};
// Per-label F1 over the union of labels seen in either sequence.
LabelScores label_scores(std::span<const std::string> predicted, std::span<const std::string> actual);

struct ActionAlignment {
  double exact_match_accuracy = 0;
  double action_type_macro_f1 = 0;
  std::optional<double> click_subtype_weighted_f1;     // none without actual clicks
  std::optional<double> session_outcome_weighted_f1;   // none without terminal actions
  std::optional<double> session_outcome_accuracy;
  std::size_t pairs = 0;
};
// Pairs are in step order within each session.
ActionAlignment action_alignment(std::span<const ActionRecordPair> pairs);

struct SessionStatsConfig {
  int like_threshold = 3;               // a rating above this is a like
  int satisfaction_like_threshold = 3;  // a satisfaction above this is a liked session
  std::optional<double> human_purchase_rate_pct;
  double agent_purchase_rate_pct = 0;  // recommendation domains have no purchases
};

struct SessionStats {
  std::size_t sessions = 0;
  double pages_per_session = 0;
  std::optional<double> purchase_rate_gap;
  double exit_page_mean = 0;
  double view_ratio = 0;
  double like_count_mean = 0;
  double like_ratio = 0;
  std::optional<double> satisfaction_mean;
  std::optional<double> liked_session_ratio;
  std::array<std::int64_t, 5> rating_histogram{};
};

// |human% - agent%| in percentage points.
double purchase_rate_gap(double human_pct, double agent_pct);
SessionStats session_stats(std::span<const SessionLog> logs, const SessionStatsConfig& config = {});

// Fractional ranks (1-based, ties averaged).
std::vector<double> average_ranks(std::span<const double> x);
double spearman(std::span<const double> x, std::span<const double> y);

struct Divergence {
  double total_variation = 0;
  std::array<double, 5> per_bin_gaps{};  // agent share minus human share, bins 1..5
};
Divergence distribution_divergence(std::span<const double> agent_histogram, std::span<const double> human_histogram);

std::u32string canonicalize_text(std::string_view text);  // whitespace runs collapse to one space, trimmed
std::size_t levenshtein(std::u32string_view a, std::u32string_view b);
double edit_similarity(std::string_view a, std::string_view b);

struct NextStateEval {
  double page_type_f1 = 0;
  double edit_similarity_mean = 0;
  std::size_t pairs = 0;
};
NextStateEval next_state_eval(std::span<const std::string> predicted_texts, std::span<const std::string> predicted_types,
                              std::span<const std::string> actual_texts, std::span<const std::string> actual_types);

}  // namespace alignsim
