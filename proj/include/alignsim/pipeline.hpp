#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "alignsim/config.hpp"
#include "alignsim/episode.hpp"
#include "alignsim/persona.hpp"

namespace alignsim {

// Stage arguments that are not part of the persisted run configuration.
struct StageOptions {
  // evaluate: alignment | rating | mf | sessions | actions | next_state | all
  std::string task = "all";
  std::vector<int> ratios = {1};
  int items_per_agent = 20;
  std::size_t max_agents = 0;   // alignment; 0 is every agent
  std::size_t max_records = 0;  // agent rating task; 0 is every test record
  std::string sessions_dir;     // defaults to <output_dir>/sessions
  std::string predictions;      // next_state: JSON-lines of predicted/actual pages
  std::optional<double> human_purchase_rate_pct;
};

json to_json(const StageOptions& o);

struct StageResult {
  std::string stage;
  json summary;
  std::filesystem::path manifest;
};

const std::vector<std::string>& stage_names();

// Runs one stage against config.output_dir and writes manifest_<stage>.json.
StageResult run_stage(std::string_view stage, const RunConfig& config, const StageOptions& options = {});

// Shared loaders over the artifacts in config.output_dir.
World load_world(const RunConfig& config);
std::vector<Persona> load_personas(const std::filesystem::path& path);

// Human-readable tables for the report stage.
std::string render_report_text(const json& report);
std::string render_report_csv(const json& report);

}  // namespace alignsim
