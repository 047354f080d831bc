#include <gtest/gtest.h>

#include "alignsim/error.hpp"
#include "alignsim/pipeline.hpp"
#include "alignsim/rollout.hpp"
#include "alignsim/session.hpp"
#include "support.hpp"

using namespace alignsim;
namespace fs = std::filesystem;

namespace {

RunConfig small_config(const fs::path& out) {
  RunConfig c;
  c.synthetic.enabled = true;
  c.synthetic.users = 24;
  c.synthetic.items = 90;
  c.synthetic.min_ratings = 15;
  c.synthetic.max_ratings = 30;
  c.recommender.mf.epochs = 3;
  c.rollout_episodes = 4;
  c.counterfactual.max_anchors = 6;
  c.counterfactual.demo_agents = 3;
  c.session.agents = 4;
  c.session.step_cap = 12;
  c.seed = 17;
  c.output_dir = out.string();
  return c;
}

StageOptions eval_options() {
  StageOptions o;
  o.ratios = {1, 3};
  o.max_agents = 6;
  o.max_records = 20;
  return o;
}

void run_all(const RunConfig& c) {
  for (const auto& stage : stage_names()) {
    if (stage == "evaluate") {
      run_stage(stage, c, eval_options());
    } else {
      run_stage(stage, c);
    }
  }
}

// Every manifest output digest matches the file on disk.
void expect_manifest_consistent(const fs::path& dir, const std::string& stage) {
  auto m = json::parse(read_file(dir / ("manifest_" + stage + ".json")));
  EXPECT_EQ(m["stage"], stage);
  EXPECT_TRUE(m.contains("config"));
  EXPECT_TRUE(m.contains("summary"));
  EXPECT_FALSE(m["outputs"].empty()) << stage;
  for (const auto& [name, digest] : m["outputs"].items()) {
    EXPECT_EQ(sha256_file(dir / name), digest.get<std::string>()) << stage << " " << name;
  }
  EXPECT_EQ(m.dump().find("timestamp"), std::string::npos);
}

}  // namespace

TEST(Pipeline, AllStagesOnSyntheticCorpus) {
  auto dir = support::scratch_dir("pipeline_all");
  auto c = small_config(dir);
  run_all(c);
  for (const auto& stage : stage_names()) expect_manifest_consistent(dir, stage);

  for (const char* f : {"interactions.jsonl", "train.jsonl", "validation.jsonl", "test.jsonl", "items.jsonl",
                        "personas.jsonl", "recommender.json", "rollouts.jsonl", "counterfactuals.jsonl",
                        "training_records.jsonl", "eval_mf.json", "eval_alignment_1to1.json",
                        "eval_alignment_1to3.json", "eval_rating.json", "eval_actions.json", "eval_sessions.json",
                        "report.json", "report.txt", "report.csv"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  EXPECT_EQ(read_session_logs(dir / "sessions").size(), 4u);
  EXPECT_EQ(load_personas(dir / "personas.jsonl").size(), 24u);

  auto records = read_jsonl(dir / "training_records.jsonl");
  auto rollouts = read_jsonl(dir / "rollouts.jsonl");
  auto sets = read_jsonl(dir / "counterfactuals.jsonl");
  std::size_t alternatives = 0, reflections = 0, world = 0;
  for (const auto& s : sets) alternatives += s["alternatives"].size();
  for (const auto& r : records) (r["kind"] == "world_model" ? world : reflections)++;
  EXPECT_EQ(world, rollouts.size() + sets.size() + alternatives);
  EXPECT_EQ(reflections, alternatives);

  auto report = json::parse(read_file(dir / "report.json"));
  auto text = read_file(dir / "report.txt");
  EXPECT_NE(text.find("Preference alignment"), std::string::npos);
  EXPECT_NE(text.find("Rating prediction"), std::string::npos);
  EXPECT_NE(text.find("mf random split"), std::string::npos);
  auto mf = json::parse(read_file(dir / "eval_mf.json"));
  EXPECT_GT(mf["mf_random_split"]["rmse"].get<double>(), 0.0);
  EXPECT_EQ(read_file(dir / "report.csv").rfind("section,row,column,value\n", 0), 0u);
}

TEST(Pipeline, RerunsAreByteIdentical) {
  auto a = support::scratch_dir("pipeline_a");
  auto b = support::scratch_dir("pipeline_b");
  auto ca = small_config(a);
  auto cb = small_config(b);
  for (const char* stage : {"ingest", "persona", "train-rec", "simulate"}) {
    run_stage(stage, ca);
    run_stage(stage, cb);
  }
  for (const char* f : {"train.jsonl", "personas.jsonl", "recommender.json"}) {
    EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
  }
  auto before = read_file(a / "sessions" / "s00002.jsonl");
  EXPECT_EQ(before, read_file(b / "sessions" / "s00002.jsonl"));
  auto manifest = json::parse(read_file(a / "manifest_simulate.json"));
  run_stage("simulate", ca);
  EXPECT_EQ(read_file(a / "sessions" / "s00002.jsonl"), before);
  EXPECT_EQ(json::parse(read_file(a / "manifest_simulate.json"))["outputs"], manifest["outputs"]);
}

TEST(Pipeline, NextStateFromPredictions) {
  auto dir = support::scratch_dir("pipeline_next_state");
  auto c = small_config(dir);
  for (const char* stage : {"ingest", "persona", "train-rec", "simulate"}) run_stage(stage, c);
  std::vector<json> preds;
  for (const auto& log : read_session_logs(dir / "sessions")) {
    for (const auto& s : log.steps) {
      preds.push_back({{"predicted_text", s.next_state_text},
                       {"predicted_type", s.next_state_type},
                       {"actual_text", s.next_state_text},
                       {"actual_type", s.next_state_type}});
    }
  }
  write_jsonl(dir / "preds.jsonl", preds);
  StageOptions o;
  o.task = "next_state";
  o.predictions = (dir / "preds.jsonl").string();
  auto r = run_stage("evaluate", c, o);
  EXPECT_EQ(r.summary["next_state"]["edit_similarity_mean"], 1.0);
  EXPECT_EQ(r.summary["next_state"]["page_type_f1"], 1.0);
  EXPECT_EQ(r.summary["next_state"]["pairs"], preds.size());
}

TEST(Pipeline, MissingInputsAndBadOptions) {
  auto dir = support::scratch_dir("pipeline_missing");
  auto c = small_config(dir);
  EXPECT_THROW(run_stage("persona", c), ValidationError);
  EXPECT_THROW(run_stage("report", c), ValidationError);
  EXPECT_THROW(run_stage("bake", c), Error);
  StageOptions o;
  o.task = "vibes";
  EXPECT_THROW(run_stage("evaluate", c, o), ConfigError);
  c.synthetic.enabled = false;
  EXPECT_THROW(run_stage("ingest", c), ConfigError);
}
