// Command-line driver: one subcommand per pipeline stage.
#include <CLI11.hpp>

#include <iostream>

#include "alignsim/config.hpp"
#include "alignsim/error.hpp"
#include "alignsim/pipeline.hpp"

using alignsim::json;

namespace {

// Collects only the flags the user actually passed, as a config overlay.
class Overrides {
 public:
  template <typename T>
  void bind(CLI::App* app, const std::string& flag, const json::json_pointer& target, const std::string& help) {
    auto value = std::make_shared<T>();
    auto* opt = app->add_option(flag, *value, help);
    bindings_.push_back([opt, value, target](json& out) {
      if (opt->count()) out[target] = *value;
    });
  }

  void flag(CLI::App* app, const std::string& flag, const json::json_pointer& target, bool value,
            const std::string& help) {
    auto* opt = app->add_flag(flag, help);
    bindings_.push_back([opt, value, target](json& out) {
      if (opt->count()) out[target] = value;
    });
  }

  json collect() const {
    json out = json::object();
    for (const auto& b : bindings_) b(out);
    return out;
  }

 private:
  std::vector<std::function<void(json&)>> bindings_;
};

json error_record(const std::string& type, const std::string& message, const std::vector<std::string>& violations = {}) {
  json e = {{"type", type}, {"message", message}};
  if (!violations.empty()) e["violations"] = violations;
  return {{"error", e}};
}

void print_summary(const alignsim::StageResult& r, bool as_json) {
  if (as_json) {
    std::cout << json({{"stage", r.stage}, {"manifest", r.manifest.string()}, {"summary", r.summary}}).dump()
              << "\n";
    return;
  }
  if (r.stage == "report") {
    std::cout << alignsim::render_report_text(r.summary);
  } else {
    std::cout << r.stage << " done\n";
    for (const auto& [key, value] : r.summary.items()) {
      std::cout << "  " << key << ": " << (value.is_string() ? value.get<std::string>() : value.dump()) << "\n";
    }
  }
  std::cout << "manifest: " << r.manifest.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Persona-conditioned user simulation pipeline for recommender environments"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  bool as_json = false;
  Overrides ov;
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_flag("--json", as_json, "Structured output records");
  ov.bind<std::string>(&app, "--out", "/output_dir"_json_pointer, "Artifact directory");
  ov.bind<std::uint64_t>(&app, "--seed", "/seed"_json_pointer, "Master seed");
  ov.bind<std::string>(&app, "--backend", "/backend/kind"_json_pointer, "oracle | random | remote | replay");
  ov.bind<std::string>(&app, "--endpoint", "/backend/endpoint"_json_pointer, "Chat completion URL");
  ov.bind<std::string>(&app, "--model", "/backend/model"_json_pointer, "Remote model name");
  ov.bind<double>(&app, "--temperature", "/backend/temperature"_json_pointer, "Remote sampling temperature");
  ov.bind<int>(&app, "--max-in-flight", "/backend/max_in_flight"_json_pointer, "Concurrent remote requests");
  ov.bind<std::string>(&app, "--replay-log", "/backend/replay_log"_json_pointer, "Exchange log to replay");
  ov.bind<std::string>(&app, "--exchange-log", "/backend/exchange_log"_json_pointer, "Record remote exchanges");
  ov.bind<std::string>(&app, "--mode", "/mode"_json_pointer, "plain | plus");
  ov.bind<int>(&app, "--page-size", "/env/page_size"_json_pointer, "Items per page");
  ov.flag(&app, "--search", "/env/enable_search"_json_pointer, true, "Enable the title search action");
  ov.bind<int>(&app, "--step-cap", "/session/step_cap"_json_pointer, "Maximum steps per session");

  auto* ingest = app.add_subcommand("ingest", "Parse ratings and metadata, split by time");
  ov.bind<std::string>(ingest, "--ratings", "/data/ratings"_json_pointer, "ratings.dat or csv");
  ov.bind<std::string>(ingest, "--movies", "/data/movies"_json_pointer, "movies.dat");
  ov.bind<std::string>(ingest, "--users", "/data/users"_json_pointer, "users.dat");
  ov.bind<std::string>(ingest, "--format", "/data/format"_json_pointer, "movielens_dat | csv");
  ov.bind<std::string>(ingest, "--csv-preset", "/data/csv_preset"_json_pointer, "canonical | amazon_book");
  ov.flag(ingest, "--synthetic", "/synthetic/enabled"_json_pointer, true, "Generate a synthetic corpus");
  ov.bind<int>(ingest, "--synthetic-users", "/synthetic/users"_json_pointer, "Synthetic user count");
  ov.bind<int>(ingest, "--synthetic-items", "/synthetic/items"_json_pointer, "Synthetic item count");
  ov.flag(ingest, "--single-genre", "/synthetic/single_genre_users"_json_pointer, true,
          "Each synthetic user rates one genre");

  app.add_subcommand("persona", "Derive personas from the training split");

  auto* train = app.add_subcommand("train-rec", "Train the recommender");
  ov.bind<std::string>(train, "--recommender", "/recommender/kind"_json_pointer, "random | pop | mf");
  ov.bind<int>(train, "--dim", "/recommender/dim"_json_pointer, "Latent dimension");
  ov.bind<int>(train, "--epochs", "/recommender/epochs"_json_pointer, "SGD epochs");
  ov.bind<double>(train, "--lr", "/recommender/learning_rate"_json_pointer, "SGD learning rate");
  ov.bind<double>(train, "--l2", "/recommender/l2"_json_pointer, "L2 regularisation");

  auto* rollout = app.add_subcommand("rollout", "Collect epsilon-greedy exploration transitions");
  ov.bind<int>(rollout, "--episodes", "/rollout/episodes"_json_pointer, "Episodes to collect");
  ov.bind<std::int64_t>(rollout, "--first-episode", "/rollout/first_episode"_json_pointer,
                        "Global episode index of the first episode");
  ov.bind<double>(rollout, "--eps-start", "/epsilon/start"_json_pointer, "Initial exploration rate");
  ov.bind<double>(rollout, "--eps-end", "/epsilon/end"_json_pointer, "Final exploration rate");
  ov.bind<std::int64_t>(rollout, "--eps-horizon", "/epsilon/horizon"_json_pointer, "Annealing horizon in episodes");

  auto* cf = app.add_subcommand("counterfactual", "Sample alternative actions at demonstration anchors");
  ov.bind<int>(cf, "--k", "/counterfactual/k"_json_pointer, "Alternatives per anchor");
  ov.bind<std::string>(cf, "--anchors", "/counterfactual/anchors"_json_pointer, "item | trajectory");
  ov.bind<int>(cf, "--max-anchors", "/counterfactual/max_anchors"_json_pointer, "Anchor budget");
  ov.bind<int>(cf, "--demo-agents", "/counterfactual/demo_agents"_json_pointer, "Demonstration sessions");
  ov.bind<int>(cf, "--max-attempts", "/counterfactual/max_attempts"_json_pointer, "Policy queries before fill");

  auto* emit = app.add_subcommand("emit-data", "Write world-model and reflection training records");
  ov.bind<double>(emit, "--lambda-wm", "/training/lambda_wm"_json_pointer, "World-model record weight");
  ov.bind<double>(emit, "--lambda-cr", "/training/lambda_cr"_json_pointer, "Reflection record weight");

  auto* simulate = app.add_subcommand("simulate", "Run agent sessions against the recommender");
  ov.bind<int>(simulate, "--agents", "/session/agents"_json_pointer, "Sessions to run");
  ov.bind<int>(simulate, "--workers", "/session/workers"_json_pointer, "Worker threads");
  ov.flag(simulate, "--no-interview", "/session/post_interview"_json_pointer, false, "Skip the post-session interview");

  alignsim::StageOptions stage_options;
  std::vector<int> ratios;
  double human_purchase = 0;
  auto* evaluate = app.add_subcommand("evaluate", "Score agents and models");
  evaluate->add_option("--task", stage_options.task, "alignment | rating | mf | sessions | actions | next_state | all");
  evaluate->add_option("--ratio", ratios, "Negatives per positive for the alignment task (repeatable)");
  evaluate->add_option("--items-per-agent", stage_options.items_per_agent, "Items per alignment task");
  evaluate->add_option("--max-agents", stage_options.max_agents, "Alignment agent budget, 0 for all");
  evaluate->add_option("--max-records", stage_options.max_records, "Agent rating budget, 0 for all");
  evaluate->add_option("--sessions", stage_options.sessions_dir, "Session log directory");
  evaluate->add_option("--predictions", stage_options.predictions, "Next-state predictions (JSON-lines)");
  auto* purchase_opt =
      evaluate->add_option("--human-purchase-rate", human_purchase, "Human purchase rate in percent");

  app.add_subcommand("report", "Render evaluation tables as text and CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Error& e) {
    std::cerr << error_record("usage", e.what()).dump() << "\n";
    return 2;
  }

  try {
    alignsim::RunConfig config;
    if (!config_path.empty()) config = alignsim::load_run_config(config_path);
    config = alignsim::apply_overrides(config, ov.collect());
    if (!ratios.empty()) stage_options.ratios = ratios;
    if (purchase_opt->count()) stage_options.human_purchase_rate_pct = human_purchase;
    auto* sub = app.get_subcommands().front();
    auto result = alignsim::run_stage(sub->get_name(), config, stage_options);
    print_summary(result, as_json);
    return 0;
  } catch (const alignsim::ConfigError& e) {
    std::cerr << error_record("config", "invalid configuration", e.violations()).dump() << "\n";
    return 2;
  } catch (const alignsim::TransportError& e) {
    std::cerr << error_record("transport", e.what()).dump() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << error_record("runtime", e.what()).dump() << "\n";
    return 1;
  }
}
