#pragma once

// Inputs for the checked-in golden files under tests/golden.

#include <string>

#include "alignsim/env.hpp"
#include "alignsim/policy.hpp"
#include "alignsim/rollout.hpp"

namespace alignsim::golden {

inline PageState page_plain() {
  PageState s;
  s.page_number = 1;
  s.slots.push_back({"1193", "One Flew Over the Cuckoo's Nest (1975)", "5", "Genres: Drama", {}, false, false});
  return s;
}

inline PageState page_similar() {
  PageState s;
  s.page_number = 2;
  s.slots.push_back({"3", "Heat (1995)", "3.58", "A detective hunts a crew of professional thieves.",
                     {{"6", "GoldenEye (1995)", 5}, {"9", "Sudden Death (1995)", 3}}, false, false});
  s.slots.push_back({"8", "Nixon (1995)", "2", "Genres: Drama", {}, false, true});
  return s;
}

inline const char* kPersona =
    "Age: 25\n"
    "Occupation: programmer\n"
    "Personality (1-3): Openness 3, Conscientiousness 2, Extraversion 1, Agreeableness 2, Neuroticism 3\n"
    "Pickiness: moderately picky (average rating 4.00)\n"
    "Habits: engagement 4 (medium), conformity 1.25 (medium), variety 8 (high)";

inline PolicyRequest policy_plain() {
  PolicyRequest r;
  r.state_text = render_page(page_plain(), false);
  r.persona_text = kPersona;
  r.history_text =
      "I liked Toy Story (1995) based on my review score of 5\n"
      "I disliked Casino (1995) based on my review score of 2";
  r.possible_actions = {Action::next_page(), Action::click("1193"), Action::rate("1193", 4), Action::exit()};
  return r;
}

inline PolicyRequest policy_plus() {
  PolicyRequest r = policy_plain();
  r.mode = PromptMode::plus;
  r.state_text = render_page(page_similar(), true);
  r.possible_actions = {Action::next_page(), Action::previous_page(), Action::click("3"), Action::exit()};
  r.causal_context =
      "Tentative action: [CLICK_ITEM:3]\n"
      "Answer each question, then confirm or revise the action:\n"
      "- What would happen if you opened the details of item 3 now?\n"
      "- What would happen if you exited now?";
  return r;
}

// A single unrated item; RATE shows the new rating in place of the global mean.
inline PageState rating_page(const std::string& shown, bool rated) {
  PageState s;
  s.page_number = 1;
  s.listing = ListingKind::fixed;
  s.slots.push_back({"1193", "One Flew Over the Cuckoo's Nest (1975)", shown, "Genres: Drama", {}, false, rated});
  return s;
}

inline Transition reflection_anchor() {
  Transition t;
  t.session_id = "a00000";
  t.persona_id = "u1";
  t.state_text = render_page(rating_page("3.58", false), false);
  t.state_type = "browse";
  t.action = Action::rate("1193", 5);
  t.next_state_text = render_page(rating_page("5", true), false);
  t.next_state_type = "browse";
  t.source = "human";
  return t;
}

inline Alternative reflection_alternative() {
  Alternative a;
  a.action = Action::rate("1193", 2);
  a.next_state_text = render_page(rating_page("2", true), false);
  a.next_state_type = "browse";
  return a;
}

}  // namespace alignsim::golden
