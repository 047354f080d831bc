#include "alignsim/rollout.hpp"

#include <algorithm>
#include <random>

#include "alignsim/error.hpp"

namespace alignsim {

double EpsilonSchedule::at(std::int64_t t) const {
  if (t <= 0) return start;
  if (t >= horizon) return end;
  return start - (start - end) * static_cast<double>(t) / static_cast<double>(horizon);
}

void EpsilonSchedule::validate() const {
  std::vector<std::string> problems;
  if (!(start >= end)) problems.push_back("epsilon start must be >= end");
  if (!(end >= 0)) problems.push_back("epsilon end must be >= 0");
  if (start > 1) problems.push_back("epsilon start must be <= 1");
  if (horizon < 1) problems.push_back("epsilon horizon must be >= 1");
  if (!problems.empty()) throw ValidationError(join(problems, "; "));
}

json to_json(const Transition& t) {
  return {{"session_id", t.session_id},
          {"step", t.step},
          {"persona_id", t.persona_id},
          {"state_text", t.state_text},
          {"state_type", t.state_type},
          {"action_token", to_token(t.action)},
          {"next_state_text", t.next_state_text.value_or(std::string(kTerminalText))},
          {"next_state_type", t.next_state_type},
          {"terminal", t.terminal()},
          {"source", t.source}};
}

Transition transition_from_json(const json& j) {
  Transition t;
  t.session_id = j.at("session_id").get<std::string>();
  t.step = j.at("step").get<int>();
  t.persona_id = j.at("persona_id").get<std::string>();
  t.state_text = j.at("state_text").get<std::string>();
  t.state_type = j.value("state_type", std::string());
  t.action = parse_action(j.at("action_token").get<std::string>());
  if (!j.value("terminal", false)) t.next_state_text = j.at("next_state_text").get<std::string>();
  t.next_state_type = j.value("next_state_type", std::string());
  t.source = j.value("source", std::string());
  return t;
}

namespace {

Action concrete(Action a) {
  if (a.tag == ActionTag::search) return Action::search("");
  return a;
}

std::vector<Action> concrete_actions(std::span<const Action> actions) {
  std::vector<Action> out;
  for (const auto& a : actions) out.push_back(concrete(a));
  return out;
}

bool same_choice(const Action& a, const Action& b) {
  if (a.tag == ActionTag::search && b.tag == ActionTag::search) return true;
  return a == b;
}

}  // namespace

std::vector<Transition> collect_rollouts(const EpisodeFactory& factory, PolicyBackend& behavior,
                                         std::size_t episodes, const RolloutOptions& options) {
  options.schedule.validate();
  std::vector<Transition> out;
  for (std::size_t e = 0; e < episodes; ++e) {
    auto spec = factory(e);
    auto& ep = spec.episode;
    const std::int64_t t = options.first_episode + static_cast<std::int64_t>(e);
    const double epsilon = options.schedule.at(t);
    const std::uint64_t seed = derive_seed(options.seed, "rollout", static_cast<std::uint64_t>(t));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    for (int step = 0; step < options.step_cap && !ep.terminal(); ++step) {
      PageState page = ep.view();
      Transition tr;
      tr.session_id = spec.session_id;
      tr.step = step;
      tr.persona_id = spec.persona.user_id;
      tr.state_text = render_page(page, ep.options().show_similar);
      tr.state_type = page_type(page);
      tr.source = "rollout";
      const auto& allowed = page.available_actions;
      if (coin(rng) < epsilon) {
        std::uniform_int_distribution<std::size_t> pick(0, allowed.size() - 1);
        tr.action = concrete(allowed[pick(rng)]);
      } else {
        auto view = decision_view(ep, spec.persona, page);
        tr.action = decide(behavior, policy_request(ep, spec.persona, options.mode), view, {std::nullopt, seed, step})
                        .action;
      }
      auto next = ep.apply(tr.action, step);
      if (next) tr.next_state_text = ep.render();
      tr.next_state_type = ep.type();
      out.push_back(std::move(tr));
    }
  }
  return out;
}

void replay_actions(Episode& episode, std::span<const Action> actions) {
  int step = 0;
  for (const auto& a : actions) episode.apply(a, step++);
}

json to_json(const CounterfactualSet& s) {
  json alts = json::array();
  for (std::size_t i = 0; i < s.alternatives.size(); ++i) {
    const auto& a = s.alternatives[i];
    alts.push_back({{"index", i},
                    {"action_token", to_token(a.action)},
                    {"next_state_text", a.next_state_text.value_or(std::string(kTerminalText))},
                    {"next_state_type", a.next_state_type},
                    {"terminal", !a.next_state_text.has_value()},
                    {"reflection_prompt", a.reflection_prompt},
                    {"reflection", a.reflection}});
  }
  return {{"anchor", to_json(s.anchor)},
          {"filled", s.filled},
          {"policy_attempts", s.policy_attempts},
          {"policy_prompt", s.policy_prompt},
          {"alternatives", std::move(alts)}};
}

CounterfactualSet counterfactual_from_json(const json& j) {
  CounterfactualSet s;
  s.anchor = transition_from_json(j.at("anchor"));
  s.filled = j.value("filled", false);
  s.policy_attempts = j.value("policy_attempts", 0);
  s.policy_prompt = j.value("policy_prompt", std::string());
  for (const auto& a : j.at("alternatives")) {
    Alternative alt;
    alt.action = parse_action(a.at("action_token").get<std::string>());
    if (!a.value("terminal", false)) alt.next_state_text = a.at("next_state_text").get<std::string>();
    alt.next_state_type = a.value("next_state_type", std::string());
    alt.reflection_prompt = a.value("reflection_prompt", std::string());
    alt.reflection = a.value("reflection", std::string());
    s.alternatives.push_back(std::move(alt));
  }
  return s;
}

std::string build_reflection_prompt(std::string_view persona_text, const Transition& anchor,
                                    const Alternative& alternative) {
  std::string out;
  out += prompt_section("[PERSONA]", persona_text);
  out += prompt_section("[STATE]", anchor.state_text);
  out += prompt_section("[HUMAN_ACTION]", to_token(anchor.action));
  out += prompt_section("[HUMAN_NEXT_STATE]", anchor.next_state_text.value_or(std::string(kTerminalText)));
  out += prompt_section("[ALTERNATIVE_ACTION]", to_token(alternative.action));
  out += prompt_section("[ALTERNATIVE_NEXT_STATE]",
                        alternative.next_state_text.value_or(std::string(kTerminalText)));
  out +=
      "Compare the two outcomes and answer:\n"
      "1. Why is the human choice better in the current context?\n"
      "2. Why is the human choice more aligned with the persona and preferences?\n"
      "3. How does the human action improve future outcomes compared to the alternative?\n"
      "Then state the lesson you draw from this comparison on a final line of the form:\n"
      "LESSON: <lesson>";
  return out;
}

CounterfactualSet sample_counterfactuals(const Episode& at_anchor, const Transition& anchor, const Persona& persona,
                                         PolicyBackend& backend, const CounterfactualOptions& options) {
  if (options.k < 1) throw ValidationError("K must be >= 1");
  if (at_anchor.terminal()) throw CounterfactualError("anchor state is terminal");
  const PageState page = at_anchor.view();
  auto allowed = concrete_actions(page.available_actions);
  if (allowed.size() <= 1) {
    throw CounterfactualError("anchor at " + anchor.session_id + " step " + std::to_string(anchor.step) +
                              " has a single allowed action");
  }
  if (std::none_of(allowed.begin(), allowed.end(), [&](const Action& a) { return same_choice(a, anchor.action); })) {
    throw CounterfactualError("anchor action " + to_token(anchor.action) + " is not available in its state");
  }
  std::vector<Action> remaining;
  for (const auto& a : allowed) {
    if (!same_choice(a, anchor.action)) remaining.push_back(a);
  }

  CounterfactualSet set;
  set.anchor = anchor;
  PolicyRequest base = policy_request(at_anchor, persona, PromptMode::plain);
  set.policy_prompt = build_policy_prompt(base);

  std::vector<Action> chosen;
  const auto k = static_cast<std::size_t>(options.k);
  while (chosen.size() < k && !remaining.empty() && set.policy_attempts < options.max_attempts) {
    ++set.policy_attempts;
    PolicyRequest req = base;
    req.possible_actions = remaining;
    auto view = decision_view(at_anchor, persona, page);
    auto d = decide(backend, req, view, {std::nullopt, options.seed, anchor.step});
    if (d.fallback) continue;
    auto it = std::find_if(remaining.begin(), remaining.end(), [&](const Action& a) { return same_choice(a, d.action); });
    if (it == remaining.end()) continue;
    chosen.push_back(*it);
    remaining.erase(it);
  }
  if (chosen.size() < k) {
    set.filled = true;
    std::mt19937_64 rng(derive_seed(options.seed, "counterfactual_fill:" + anchor.session_id,
                                    static_cast<std::uint64_t>(anchor.step)));
    std::shuffle(remaining.begin(), remaining.end(), rng);
    for (std::size_t i = 0; i < remaining.size() && chosen.size() < k; ++i) chosen.push_back(remaining[i]);
  }

  const std::string ptext = persona_text(persona);
  for (const auto& action : chosen) {
    Episode branch = at_anchor;
    Alternative alt;
    alt.action = action;
    if (branch.apply(action, anchor.step)) alt.next_state_text = branch.render();
    alt.next_state_type = branch.type();
    alt.reflection_prompt = build_reflection_prompt(ptext, anchor, alt);
    if (options.reflect) {
      ReflectionView rv;
      rv.persona = &persona;
      rv.memory = &at_anchor.memory();
      rv.human = anchor.action;
      rv.alternative = action;
      rv.human_next_type = anchor.next_state_type;
      rv.alternative_next_type = alt.next_state_type;
      rv.global_mean = at_anchor.env().catalog().global_mean();
      BackendCall call;
      call.kind = CallKind::reflect;
      call.seed = options.seed;
      call.step = anchor.step;
      call.reflection = &rv;
      call.messages.push_back({"user", alt.reflection_prompt});
      alt.reflection = std::string(trim(backend.complete(call)));
    }
    set.alternatives.push_back(std::move(alt));
  }
  return set;
}

std::string_view to_string(RecordKind kind) {
  return kind == RecordKind::world_model ? "world_model" : "counterfactual_reflection";
}

json to_json(const TrainingRecord& r) {
  json provenance = {{"session_id", r.session_id}, {"step", r.step}};
  provenance["alternative_index"] = r.alternative_index ? json(*r.alternative_index) : json(nullptr);
  return {{"kind", std::string(to_string(r.kind))},
          {"prompt", r.prompt},
          {"target", r.target},
          {"weight", r.weight},
          {"provenance", std::move(provenance)}};
}

std::string world_model_prompt(const Transition& t) {
  return prompt_section("[STATE]", t.state_text) + prompt_section("[ACTION]", to_token(t.action)) +
         "Predict the next state of the environment after this action.";
}

std::vector<TrainingRecord> emit_world_model_records(std::span<const Transition> transitions, double lambda_wm) {
  std::vector<TrainingRecord> out;
  out.reserve(transitions.size());
  for (const auto& t : transitions) {
    TrainingRecord r;
    r.kind = RecordKind::world_model;
    r.prompt = world_model_prompt(t);
    r.target = t.next_state_text.value_or(std::string(kTerminalText));
    r.weight = lambda_wm;
    r.session_id = t.session_id;
    r.step = t.step;
    out.push_back(std::move(r));
  }
  return out;
}

ReflectionEmission emit_reflection_records(std::span<const CounterfactualSet> sets, double lambda_cr) {
  ReflectionEmission out;
  for (const auto& s : sets) {
    for (std::size_t j = 0; j < s.alternatives.size(); ++j) {
      auto c = trim(s.alternatives[j].reflection);
      if (c.empty()) {
        ++out.skipped;
        continue;
      }
      TrainingRecord r;
      r.kind = RecordKind::counterfactual_reflection;
      r.prompt = s.policy_prompt;
      r.target = std::string(c) + "\nBEST-ACTION: " + to_token(s.anchor.action);
      r.weight = lambda_cr;
      r.session_id = s.anchor.session_id;
      r.step = s.anchor.step;
      r.alternative_index = static_cast<int>(j);
      out.records.push_back(std::move(r));
    }
  }
  return out;
}

std::vector<Transition> counterfactual_transitions(std::span<const CounterfactualSet> sets) {
  std::vector<Transition> out;
  for (const auto& s : sets) {
    for (const auto& a : s.alternatives) {
      Transition t = s.anchor;
      t.action = a.action;
      t.next_state_text = a.next_state_text;
      t.next_state_type = a.next_state_type;
      t.source = "counterfactual";
      out.push_back(std::move(t));
    }
  }
  return out;
}

std::vector<Transition> merge_rollouts(std::span<const Transition> rollouts, std::span<const Transition> human,
                                       std::span<const CounterfactualSet> sets) {
  std::vector<Transition> out(rollouts.begin(), rollouts.end());
  out.insert(out.end(), human.begin(), human.end());
  auto cf = counterfactual_transitions(sets);
  out.insert(out.end(), cf.begin(), cf.end());
  return out;
}

}  // namespace alignsim
