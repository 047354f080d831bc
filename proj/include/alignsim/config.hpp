#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "alignsim/dataset.hpp"
#include "alignsim/env.hpp"
#include "alignsim/episode.hpp"
#include "alignsim/memory.hpp"
#include "alignsim/policy.hpp"
#include "alignsim/recommender.hpp"
#include "alignsim/rollout.hpp"

namespace alignsim {

struct DataConfig {
  std::string ratings;
  std::string movies;  // optional
  std::string users;   // optional
  std::string format = "movielens_dat";  // movielens_dat | csv
  std::string csv_preset = "canonical";  // canonical | amazon_book
};

struct SyntheticDataConfig {
  bool enabled = false;
  int users = 200;
  int items = 600;
  int min_ratings = 20;
  int max_ratings = 80;
  bool single_genre_users = false;
};

struct RecommenderConfig {
  std::string kind = "mf";  // random | pop | mf
  MfHyperParams mf;
};

struct CounterfactualConfig {
  int k = 3;
  int max_attempts = 6;
  std::string anchors = "item";  // item | trajectory
  int max_anchors = 200;
  int demo_agents = 20;  // trajectory anchors come from this many demonstration sessions
};

struct TrainingConfig {
  double lambda_wm = 1.0;
  double lambda_cr = 0.5;
  // Recorded for downstream trainers, never used here.
  int batch_size = 16;
  double learning_rate = 1e-5;
  int epochs = 8;
};

struct BackendConfig {
  std::string kind = "oracle";  // oracle | random | remote | replay
  std::string endpoint;
  std::string model;
  double temperature = 0.0;
  int timeout_seconds = 60;
  int max_in_flight = 4;
  int max_attempts = 2;
  std::string replay_log;
  std::string exchange_log;
};

struct SessionRunConfig {
  int agents = 100;
  int step_cap = 50;
  int workers = 1;
  bool post_interview = true;
};

struct RunConfig {
  DataConfig data;
  SyntheticDataConfig synthetic;
  std::array<double, 3> split = {0.8, 0.1, 0.1};
  RecommenderConfig recommender;
  EnvConfig env;
  MemoryConfig memory;
  std::string mode = "plain";  // plain | plus
  CounterfactualConfig counterfactual;
  TrainingConfig training;
  EpsilonSchedule epsilon;
  int rollout_episodes = 100;
  std::int64_t rollout_first_episode = 0;
  std::uint64_t seed = 0;
  BackendConfig backend;
  SessionRunConfig session;
  std::string output_dir = "alignsim_out";

  PromptMode prompt_mode() const { return prompt_mode_from_string(mode); }
  RenderOptions render_options() const { return {prompt_mode() == PromptMode::plus}; }
};

json to_json(const RunConfig& c);
// Missing keys keep their defaults; unknown keys are violations.
RunConfig run_config_from_json(const json& j);
// Deep-merges `overrides` into the serialized config and parses the result.
RunConfig apply_overrides(const RunConfig& base, const json& overrides);
RunConfig load_run_config(const std::filesystem::path& path);

// Throws ConfigError listing every violation. `stage` adds stage-specific
// checks such as input paths for ingest.
void validate(const RunConfig& c, const std::string& stage);

std::unique_ptr<PolicyBackend> make_backend(const BackendConfig& c);

}  // namespace alignsim
