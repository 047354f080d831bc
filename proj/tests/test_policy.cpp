#include <gtest/gtest.h>

#include "alignsim/backends.hpp"
#include "alignsim/error.hpp"
#include "alignsim/policy.hpp"
#include "golden_fixtures.hpp"
#include "support.hpp"

using namespace alignsim;

namespace {

struct DecisionFixture {
  World world = support::fixture_world();
  Persona persona = support::fixture_persona();
  AgentMemory memory{"u1", *world.catalog};
  PageState state = golden::page_plain();
  DecisionView view{&persona, &state, &memory, 3.58, {}, std::nullopt};
};

}  // namespace

TEST(PolicyPrompt, PlainGolden) {
  EXPECT_EQ(build_policy_prompt(golden::policy_plain()), support::golden("policy_prompt.txt"));
}

TEST(PolicyPrompt, PlusGolden) {
  EXPECT_EQ(build_policy_prompt(golden::policy_plus()), support::golden("policy_prompt_plus.txt"));
}

TEST(PolicyPrompt, PostInterviewGolden) { EXPECT_EQ(post_interview_prompt(), support::golden("post_interview.txt")); }

TEST(PolicyPrompt, SectionOrder) {
  auto p = build_policy_prompt(golden::policy_plain());
  auto s = p.find("[STATE]"), pe = p.find("[PERSONA]"), h = p.find("[RECENT_HISTORY]"), a = p.find("[POSSIBLE_ACTIONS]");
  EXPECT_EQ(s, 0u);
  EXPECT_LT(s, pe);
  EXPECT_LT(pe, h);
  EXPECT_LT(h, a);
  EXPECT_NE(p.find("[RATE:1193:4]"), std::string::npos);
}

TEST(PolicyPrompt, Section) { EXPECT_EQ(prompt_section("[X]", "a\nb"), "[X]\n  a\n  b\n"); }

TEST(ParseDecision, Examples) {
  std::vector<Action> allowed = {Action::next_page(), Action::rate("3", 4), Action::exit()};
  auto d = parse_decision("thinking...\nBEST-ACTION: [RATE:3:4]\nRATIONALE: fits my taste", allowed);
  ASSERT_TRUE(d);
  EXPECT_EQ(d->action, Action::rate("3", 4));
  EXPECT_EQ(d->rationale, "fits my taste");

  auto last = parse_decision("BEST-ACTION: [EXIT]\nno wait\n**BEST-ACTION:** [NEXT_PAGE]", allowed);
  ASSERT_TRUE(last);
  EXPECT_EQ(last->action, Action::next_page());

  EXPECT_FALSE(parse_decision("I would exit", allowed));
  EXPECT_FALSE(parse_decision("BEST-ACTION: [RATE:3:5]", allowed));
  EXPECT_FALSE(parse_decision("BEST-ACTION: [FLY]", allowed));
  EXPECT_FALSE(parse_decision("BEST-ACTION: exit", allowed));
}

TEST(ParseDecision, AnySearchMatches) {
  std::vector<Action> allowed = {Action::search(""), Action::exit()};
  auto d = parse_decision("BEST-ACTION: [SEARCH:space movies]", allowed);
  ASSERT_TRUE(d);
  EXPECT_EQ(d->action.query, "space movies");
}

TEST(CausalQuestions, PlusOnly) {
  std::vector<Action> allowed = {Action::next_page(), Action::previous_page(), Action::click("3"), Action::exit()};
  EXPECT_TRUE(causal_questions(Action::click("3"), allowed, PromptMode::plain).empty());
  auto q = causal_questions(Action::click("3"), allowed, PromptMode::plus);
  ASSERT_EQ(q.size(), 4u);
  EXPECT_EQ(q[0], "What would happen if you opened the details of item 3 now?");
  EXPECT_EQ(q[3], "What would happen if you exited now?");
  auto q2 = causal_questions(Action::exit(), allowed, PromptMode::plus);
  EXPECT_EQ(q2.size(), 3u);
}

TEST(Decide, FirstAnswerValid) {
  DecisionFixture f;
  auto req = golden::policy_plain();
  ScriptedBackend backend(std::vector<std::string>{"BEST-ACTION: [RATE:1193:4]\nRATIONALE: ok"});
  auto d = decide(backend, req, f.view);
  EXPECT_EQ(d.action, Action::rate("1193", 4));
  EXPECT_FALSE(d.retried);
  EXPECT_FALSE(d.fallback);
  EXPECT_EQ(backend.call_count(), 1u);
}

TEST(Decide, GarbageThenValid) {
  DecisionFixture f;
  auto req = golden::policy_plain();
  ScriptedBackend backend(std::vector<std::string>{"no idea", "BEST-ACTION: [NEXT_PAGE]\nRATIONALE: more"});
  auto d = decide(backend, req, f.view);
  EXPECT_EQ(d.action, Action::next_page());
  EXPECT_TRUE(d.retried);
  EXPECT_FALSE(d.fallback);
  auto calls = backend.calls();
  ASSERT_EQ(calls.size(), 2u);
  EXPECT_EQ(calls[1].kind, CallKind::retry);
  EXPECT_EQ(calls[1].messages.back().content, kRetrySentence);
  EXPECT_EQ(calls[1].messages[1].content, "no idea");
}

TEST(Decide, DoubleGarbageFallsBack) {
  DecisionFixture f;
  auto req = golden::policy_plain();
  ScriptedBackend backend(std::vector<std::string>{"garbage", "BEST-ACTION: [RATE:1193:9]"});
  auto d = decide(backend, req, f.view);
  EXPECT_TRUE(d.fallback);
  EXPECT_EQ(d.action, Action::exit());
  EXPECT_EQ(backend.call_count(), 2u);

  req.possible_actions = {Action::next_page(), Action::click("1193")};
  ScriptedBackend again(std::vector<std::string>{"x", "y"});
  auto d2 = decide(again, req, f.view);
  EXPECT_EQ(d2.action, Action::next_page());

  ScriptedBackend preferred(std::vector<std::string>{"x", "y"});
  auto d3 = decide(preferred, req, f.view, {Action::click("1193"), 0, 0});
  EXPECT_EQ(d3.action, Action::click("1193"));
}

TEST(Decide, RetryBoundOverRandomReplies) {
  DecisionFixture f;
  auto req = golden::policy_plain();
  const std::vector<std::string> replies = {"", "BEST-ACTION: [EXIT]", "BEST-ACTION: [RATE:1:1]", "??",
                                            "BEST-ACTION: [CLICK_ITEM:1193]"};
  for (std::size_t a = 0; a < replies.size(); ++a) {
    for (std::size_t b = 0; b < replies.size(); ++b) {
      ScriptedBackend backend(std::vector<std::string>{replies[a], replies[b]});
      auto d = decide(backend, req, f.view);
      EXPECT_LE(backend.call_count(), 2u);
      EXPECT_NE(std::find(req.possible_actions.begin(), req.possible_actions.end(), d.action),
                req.possible_actions.end());
    }
  }
}

TEST(Decide, TransportErrorPropagates) {
  DecisionFixture f;
  ScriptedBackend backend(std::vector<ScriptedReply>{{"", true}});
  EXPECT_THROW(decide(backend, golden::policy_plain(), f.view), TransportError);
}

TEST(Decide, PlusModeRevises) {
  DecisionFixture f;
  auto req = golden::policy_plus();
  req.causal_context.reset();
  ScriptedBackend backend(std::vector<std::string>{"BEST-ACTION: [CLICK_ITEM:3]", "BEST-ACTION: [EXIT]\nRATIONALE: nothing else"});
  auto d = decide(backend, req, f.view);
  ASSERT_TRUE(d.tentative);
  EXPECT_EQ(*d.tentative, Action::click("3"));
  EXPECT_EQ(d.action, Action::exit());
  EXPECT_EQ(d.causal_questions.size(), 4u);
  auto calls = backend.calls();
  ASSERT_EQ(calls.size(), 2u);
  EXPECT_EQ(calls[1].kind, CallKind::causal);
  EXPECT_NE(calls[1].messages[0].content.find("Tentative action: [CLICK_ITEM:3]"), std::string::npos);
}

TEST(Decide, PlusModeKeepsTentativeOnUnparsableSecondStage) {
  DecisionFixture f;
  auto req = golden::policy_plus();
  req.causal_context.reset();
  ScriptedBackend backend(std::vector<std::string>{"BEST-ACTION: [NEXT_PAGE]", "hmm"});
  auto d = decide(backend, req, f.view);
  EXPECT_EQ(d.action, Action::next_page());
}

TEST(Interview, Parsing) {
  EXPECT_EQ(parse_interview_rating("- RATING: 7\n- REASON: decent"), 7);
  EXPECT_EQ(parse_interview_rating("RATING: [9]"), 9);
  EXPECT_EQ(parse_interview_rating("RATING: 8/10"), 8);
  EXPECT_FALSE(parse_interview_rating("RATING: 11"));
  EXPECT_FALSE(parse_interview_rating("RATING: 0"));
  EXPECT_FALSE(parse_interview_rating("I liked it"));
  EXPECT_EQ(parse_interview_reason("RATING: 7\nREASON: good picks"), "good picks");
}

TEST(Believability, PromptAndParse) {
  std::vector<std::string> titles = {"Heat (1995)", "Nixon (1995)", "Balto (1995)"};
  auto p = believability_prompt(golden::kPersona, "I liked Heat (1995) based on my review score of 5", titles, "movie");
  EXPECT_NE(p.find("1. Heat (1995)\n2. Nixon (1995)\n3. Balto (1995)"), std::string::npos);
  EXPECT_NE(p.find("Review each movie"), std::string::npos);
  auto labels = parse_believability("1. Heat (1995): Interacted\n2) Nixon: Not Interacted\n9. x: Interacted", 3);
  ASSERT_EQ(labels.size(), 3u);
  EXPECT_EQ(labels[0], true);
  EXPECT_EQ(labels[1], false);
  EXPECT_FALSE(labels[2].has_value());
}

TEST(PromptMode, RoundTrip) {
  EXPECT_EQ(prompt_mode_from_string("plus"), PromptMode::plus);
  EXPECT_EQ(to_string(PromptMode::plain), "plain");
  EXPECT_THROW(prompt_mode_from_string("fancy"), ValidationError);
}
