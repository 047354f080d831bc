#include "alignsim/harness.hpp"

#include <algorithm>
#include <random>

#include "alignsim/error.hpp"

namespace alignsim {

PersonaIndex index_personas(std::span<const Persona> personas) {
  PersonaIndex out;
  for (const auto& p : personas) out[p.user_id] = p;
  return out;
}

Persona persona_or_default(const PersonaIndex& index, const std::string& user_id) {
  if (auto it = index.find(user_id); it != index.end()) return it->second;
  Persona p;
  p.user_id = user_id;
  return p;
}

AlignmentEvalResult evaluate_alignment(const World& world, const PersonaIndex& personas,
                                       const std::map<std::string, std::vector<RatingRecord>>& interactions,
                                       PolicyBackend& backend, const AlignmentEvalConfig& config) {
  if (!world.catalog) throw ValidationError("alignment evaluation needs a catalog");
  auto tasks = build_alignment_task(interactions, world.catalog->item_ids(), config.m, config.items_per_agent,
                                    config.seed);
  AlignmentEvalResult result;
  result.skipped = tasks.skipped.size();
  std::vector<bool> predicted;
  std::vector<bool> actual;
  std::size_t limit = config.max_agents ? std::min(config.max_agents, tasks.tasks.size()) : tasks.tasks.size();
  for (std::size_t t = 0; t < limit; ++t) {
    const auto& task = tasks.tasks[t];
    Persona persona = persona_or_default(personas, task.user_id);
    AgentMemory memory(task.user_id, *world.catalog, world.memory);
    memory.seed_history(world.history_of(task.user_id));
    std::vector<std::string> titles;
    for (const auto& id : task.items) titles.push_back(world.catalog->title_of(id));

    ClassifyView view{&memory, world.catalog.get(), task.items};
    BackendCall call;
    call.kind = CallKind::classify;
    call.seed = derive_seed(config.seed, "alignment_call", t);
    call.classify = &view;
    call.messages.push_back(
        {"user", believability_prompt(persona_text(persona), memory.recent_history(), titles, config.item_type)});
    auto labels = parse_believability(backend.complete(call), task.items.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (!labels[i]) ++result.unparsed_labels;
      predicted.push_back(labels[i].value_or(false));
      actual.push_back(task.interacted[i]);
    }
    ++result.agents;
  }
  if (predicted.empty()) throw ValidationError("no alignment tasks could be built");
  result.metrics = classification_metrics(predicted, actual);
  return result;
}

RatingEvalResult evaluate_agent_ratings(const World& world, const PersonaIndex& personas,
                                        std::span<const RatingRecord> test, PolicyBackend& backend,
                                        const RatingEvalConfig& config) {
  RatingEvalResult result;
  std::vector<double> predictions;
  std::vector<double> truth;
  std::size_t limit = config.max_records ? std::min(config.max_records, test.size()) : test.size();
  for (std::size_t k = 0; k < limit; ++k) {
    const auto& r = test[k];
    Persona persona = persona_or_default(personas, r.user_id);
    Episode ep = world.item_episode(r.user_id, r.item_id);
    PageState page = ep.view();
    auto request = policy_request(ep, persona, config.mode);
    auto view = decision_view(ep, persona, page);
    auto d = decide(backend, request, view, {std::nullopt, derive_seed(config.seed, "rating_eval", k), 0});
    if (d.fallback) ++result.fallbacks;
    if (d.action.tag != ActionTag::rate) throw Error("rating context produced a non-RATE action");
    predictions.push_back(d.action.value);
    truth.push_back(r.rating);
  }
  if (predictions.empty()) throw ValidationError("no test ratings to evaluate");
  result.errors = rating_errors(predictions, truth);
  result.evaluated = predictions.size();
  return result;
}

RatingErrors model_rating_errors(const MfModel& model, std::span<const RatingRecord> test) {
  std::vector<double> p, t;
  for (const auto& r : test) {
    p.push_back(std::clamp(model.predict(r.user_id, r.item_id), 1.0, 5.0));
    t.push_back(r.rating);
  }
  return rating_errors(p, t);
}

RatingErrors global_mean_rating_errors(double mean, std::span<const RatingRecord> test) {
  std::vector<double> p(test.size(), mean), t;
  for (const auto& r : test) t.push_back(r.rating);
  return rating_errors(p, t);
}

SplitCorpus random_split(std::vector<RatingRecord> records, std::uint64_t seed, std::array<double, 3> fractions) {
  if (records.size() < 10) throw DegenerateSplitError("random split needs at least 10 records");
  std::sort(records.begin(), records.end(), [](const RatingRecord& a, const RatingRecord& b) {
    return std::tie(a.user_id, a.item_id, a.timestamp) < std::tie(b.user_id, b.item_id, b.timestamp);
  });
  std::mt19937_64 rng(derive_seed(seed, "random_split"));
  std::shuffle(records.begin(), records.end(), rng);
  const double total = fractions[0] + fractions[1] + fractions[2];
  const auto n = static_cast<double>(records.size());
  auto a = static_cast<std::size_t>(std::llround(n * fractions[0] / total));
  auto b = static_cast<std::size_t>(std::llround(n * (fractions[0] + fractions[1]) / total));
  SplitCorpus s;
  s.train.assign(records.begin(), records.begin() + static_cast<std::ptrdiff_t>(a));
  s.validation.assign(records.begin() + static_cast<std::ptrdiff_t>(a), records.begin() + static_cast<std::ptrdiff_t>(b));
  s.test.assign(records.begin() + static_cast<std::ptrdiff_t>(b), records.end());
  return s;
}

std::vector<ActionRecordPair> predict_recorded_actions(const World& world, const PersonaIndex& personas,
                                                       std::span<const SessionLog> sessions, PolicyBackend& backend,
                                                       PromptMode mode, std::uint64_t seed) {
  std::vector<ActionRecordPair> out;
  for (const auto& log : sessions) {
    Persona persona = persona_or_default(personas, log.persona_id);
    Episode ep = world.browse_episode(log.persona_id);
    for (const auto& step : log.steps) {
      if (ep.terminal()) break;
      PageState page = ep.view();
      auto request = policy_request(ep, persona, mode);
      auto view = decision_view(ep, persona, page);
      auto d = decide(backend, request, view,
                      {std::nullopt, derive_seed(seed, "action_alignment:" + log.session_id), step.step});
      Action actual = parse_action(step.action_token);
      out.push_back({action_record(d.action), action_record(actual), log.session_id});
      ep.apply(actual, step.step);
    }
  }
  return out;
}

}  // namespace alignsim
