#include <gtest/gtest.h>

#include <set>

#include "alignsim/backends.hpp"
#include "alignsim/error.hpp"
#include "alignsim/rollout.hpp"
#include "golden_fixtures.hpp"
#include "support.hpp"

using namespace alignsim;

namespace {

EpisodeSpec browse_spec(const World& w, std::size_t i) {
  return {"r" + std::to_string(i), support::fixture_persona(), w.browse_episode("u1")};
}

Transition anchor_from(Episode& ep, const Action& a, int step) {
  Transition t;
  t.session_id = "s";
  t.step = step;
  t.persona_id = "u1";
  t.state_text = ep.render();
  t.state_type = ep.type();
  t.action = a;
  Episode copy = ep;
  if (copy.apply(a, step)) t.next_state_text = copy.render();
  t.next_state_type = copy.type();
  t.source = "human";
  return t;
}

}  // namespace

TEST(Epsilon, Schedule) {
  EpsilonSchedule s;
  EXPECT_DOUBLE_EQ(s.at(0), 0.3);
  EXPECT_DOUBLE_EQ(s.at(100000), 0.05);
  EXPECT_DOUBLE_EQ(s.at(250000), 0.05);
  EXPECT_EQ(s.at(50000), 0.175);
  double prev = s.at(0);
  for (std::int64_t t = 1; t <= 120000; t += 997) {
    double e = s.at(t);
    EXPECT_LE(e, prev);
    EXPECT_GE(e, 0.05);
    prev = e;
  }
  EXPECT_THROW((EpsilonSchedule{0.1, 0.2, 10}.validate()), ValidationError);
  EXPECT_THROW((EpsilonSchedule{0.3, 0.05, 0}.validate()), ValidationError);
}

TEST(Rollout, DeterministicAndWellFormed) {
  auto w = support::fixture_world();
  OracleBackend oracle;
  RolloutOptions o;
  o.seed = 5;
  auto factory = [&](std::size_t i) { return browse_spec(w, i); };
  auto a = collect_rollouts(factory, oracle, 20, o);
  auto b = collect_rollouts(factory, oracle, 20, o);
  EXPECT_EQ(a, b);
  ASSERT_FALSE(a.empty());
  std::map<std::string, int> last_step;
  for (const auto& t : a) {
    EXPECT_EQ(t.source, "rollout");
    auto it = last_step.find(t.session_id);
    EXPECT_EQ(t.step, it == last_step.end() ? 0 : it->second + 1);
    last_step[t.session_id] = t.step;
    EXPECT_EQ(t.terminal(), t.next_state_type == kTerminalPageType);
  }
  EXPECT_EQ(last_step.size(), 20u);
}

TEST(Rollout, FullExplorationIsUniform) {
  auto w = support::fixture_world();
  ScriptedBackend never(std::vector<std::string>{});  // any policy call would fail
  RolloutOptions o;
  o.schedule = {1.0, 1.0, 1};
  o.step_cap = 3;
  auto rolls = collect_rollouts([&](std::size_t i) { return browse_spec(w, i); }, never, 30, o);
  EXPECT_EQ(never.call_count(), 0u);
  std::set<ActionTag> tags;
  for (const auto& t : rolls) tags.insert(t.action.tag);
  EXPECT_GE(tags.size(), 3u);
}

TEST(Rollout, StepCapBounds) {
  auto w = support::fixture_world();
  RandomBackend r;
  RolloutOptions o;
  o.step_cap = 2;
  auto rolls = collect_rollouts([&](std::size_t i) { return browse_spec(w, i); }, r, 10, o);
  for (const auto& t : rolls) EXPECT_LT(t.step, 2);
}

TEST(Counterfactual, DistinctAlternatives) {
  auto w = support::fixture_world();
  auto persona = support::fixture_persona();
  RandomBackend backend;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto ep = w.browse_episode("u1");
    auto anchor = anchor_from(ep, Action::rate("6", 4), 0);
    CounterfactualOptions o;
    o.seed = seed;
    auto set = sample_counterfactuals(ep, anchor, persona, backend, o);
    ASSERT_EQ(set.alternatives.size(), 3u);
    std::set<std::string> tokens;
    for (const auto& alt : set.alternatives) {
      EXPECT_NE(alt.action, anchor.action);
      EXPECT_TRUE(ep.env().is_available(alt.action));
      tokens.insert(to_token(alt.action));
    }
    EXPECT_EQ(tokens.size(), 3u);
  }
}

TEST(Counterfactual, BranchesDoNotTouchAnchorEpisode) {
  auto w = support::fixture_world();
  auto ep = w.browse_episode("u1");
  auto before = ep.render();
  auto anchor = anchor_from(ep, Action::next_page(), 0);
  OracleBackend oracle;
  auto set = sample_counterfactuals(ep, anchor, support::fixture_persona(), oracle, {});
  EXPECT_EQ(ep.render(), before);
  for (const auto& alt : set.alternatives) {
    Episode replay = ep;
    auto next = replay.apply(alt.action, 0);
    EXPECT_EQ(next.has_value(), alt.next_state_text.has_value());
    if (next) EXPECT_EQ(replay.render(), *alt.next_state_text);
    EXPECT_FALSE(alt.reflection.empty());
  }
}

TEST(Counterfactual, TwoActionStateIsFilled) {
  auto w = support::fixture_world();
  auto ep = w.browse_episode("u1");
  ep.apply(Action::next_page(), 0);
  ep.apply(Action::next_page(), 1);
  ASSERT_EQ(ep.available_actions(), (std::vector<Action>{Action::previous_page(), Action::exit()}));
  auto anchor = anchor_from(ep, Action::exit(), 2);
  ScriptedBackend garbage(std::vector<std::string>(20, "?"));
  CounterfactualOptions o;
  o.reflect = false;
  o.max_attempts = 2;
  auto set = sample_counterfactuals(ep, anchor, support::fixture_persona(), garbage, o);
  ASSERT_EQ(set.alternatives.size(), 1u);
  EXPECT_EQ(set.alternatives[0].action, Action::previous_page());
  EXPECT_TRUE(set.filled);
  EXPECT_EQ(set.policy_attempts, 2);
  EXPECT_TRUE(set.alternatives[0].reflection.empty());
}

TEST(Counterfactual, Errors) {
  auto w = support::fixture_world();
  auto persona = support::fixture_persona();
  OracleBackend oracle;
  auto ep = w.browse_episode("u1");
  auto anchor = anchor_from(ep, Action::next_page(), 0);
  CounterfactualOptions bad;
  bad.k = 0;
  EXPECT_THROW(sample_counterfactuals(ep, anchor, persona, oracle, bad), ValidationError);
  anchor.action = Action::rate("999", 3);
  EXPECT_THROW(sample_counterfactuals(ep, anchor, persona, oracle, {}), CounterfactualError);

  auto single = w.item_episode("u1", "6");
  single.apply(Action::rate("6", 4), 0);
  auto end = anchor_from(single, Action::exit(), 1);
  EXPECT_THROW(sample_counterfactuals(single, end, persona, oracle, {}), CounterfactualError);
  single.apply(Action::exit(), 1);
  EXPECT_THROW(sample_counterfactuals(single, end, persona, oracle, {}), CounterfactualError);
}

TEST(Reflection, PromptGolden) {
  EXPECT_EQ(build_reflection_prompt(golden::kPersona, golden::reflection_anchor(), golden::reflection_alternative()),
            support::golden("reflection_prompt.txt"));
}

TEST(Records, WorldModelConservation) {
  auto w = support::fixture_world();
  RandomBackend r;
  auto rolls = collect_rollouts([&](std::size_t i) { return browse_spec(w, i); }, r, 15, {});
  auto recs = emit_world_model_records(rolls, 0.8);
  ASSERT_EQ(recs.size(), rolls.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(recs[i].kind, RecordKind::world_model);
    EXPECT_DOUBLE_EQ(recs[i].weight, 0.8);
    EXPECT_EQ(recs[i].target, rolls[i].next_state_text.value_or(std::string(kTerminalText)));
    EXPECT_EQ(recs[i].prompt.rfind("[STATE]\n", 0), 0u);
    EXPECT_NE(recs[i].prompt.find(to_token(rolls[i].action)), std::string::npos);
  }
}

TEST(Records, ReflectionCountsAndTargets) {
  CounterfactualSet s;
  s.anchor = golden::reflection_anchor();
  s.policy_prompt = "P";
  for (const char* c : {"lesson one", "  ", "lesson three"}) {
    Alternative a = golden::reflection_alternative();
    a.reflection = c;
    s.alternatives.push_back(a);
  }
  std::vector<CounterfactualSet> sets{s, s};
  auto out = emit_reflection_records(sets, 0.5);
  EXPECT_EQ(out.records.size(), 4u);
  EXPECT_EQ(out.skipped, 2);
  EXPECT_EQ(out.records[0].target, "lesson one\nBEST-ACTION: [RATE:1193:5]");
  EXPECT_EQ(out.records[1].alternative_index, 2);
  for (const auto& r : out.records) {
    EXPECT_EQ(r.prompt, "P");
    EXPECT_DOUBLE_EQ(r.weight, 0.5);
  }
  auto merged = merge_rollouts({}, std::vector<Transition>{s.anchor}, sets);
  EXPECT_EQ(merged.size(), 1u + 6u);
  EXPECT_EQ(merged.back().source, "counterfactual");
}

TEST(Serialization, RoundTrips) {
  auto t = golden::reflection_anchor();
  EXPECT_EQ(transition_from_json(to_json(t)), t);
  t.next_state_text.reset();
  t.next_state_type = "terminal";
  auto j = to_json(t);
  EXPECT_EQ(j["next_state_text"], kTerminalText);
  EXPECT_EQ(transition_from_json(j), t);

  CounterfactualSet s;
  s.anchor = golden::reflection_anchor();
  s.alternatives.push_back(golden::reflection_alternative());
  s.filled = true;
  s.policy_attempts = 4;
  auto back = counterfactual_from_json(to_json(s));
  EXPECT_EQ(back.anchor, s.anchor);
  EXPECT_EQ(back.alternatives[0].action, s.alternatives[0].action);
  EXPECT_TRUE(back.filled);
  EXPECT_EQ(back.policy_attempts, 4);

  TrainingRecord r;
  r.alternative_index = 1;
  auto rj = to_json(r);
  EXPECT_EQ(rj["provenance"]["alternative_index"], 1);
  EXPECT_EQ(rj["kind"], "world_model");
}
