#include "alignsim/episode.hpp"

#include "alignsim/error.hpp"

namespace alignsim {

Episode::Episode(Environment env, AgentMemory memory, RenderOptions options)
    : env_(std::move(env)), memory_(std::move(memory)), options_(options) {}

PageState Episode::view() const {
  PageState s = env_.state();
  if (options_.show_similar) {
    for (auto& slot : s.slots) slot.similar_items = memory_.similar_items(slot.item_id);
  }
  return s;
}

std::string Episode::render() const {
  if (env_.terminal()) return std::string(kTerminalText);
  return render_page(view(), options_.show_similar);
}

std::string Episode::type() const {
  if (env_.terminal()) return std::string(kTerminalPageType);
  return page_type(env_.state());
}

std::optional<PageState> Episode::apply(const Action& action, int step) {
  auto next = env_.step(action);
  if (action.tag == ActionTag::rate) memory_.record_interaction(action.item_id, action.value, step);
  return next;
}

PolicyRequest policy_request(const Episode& episode, const Persona& persona, PromptMode mode) {
  PolicyRequest r;
  r.state_text = episode.render();
  r.persona_text = persona_text(persona);
  r.history_text = episode.memory().recent_history();
  r.possible_actions = episode.available_actions();
  r.mode = mode;
  return r;
}

DecisionView decision_view(const Episode& episode, const Persona& persona, const PageState& page) {
  DecisionView v;
  v.persona = &persona;
  v.state = &page;
  v.memory = &episode.memory();
  v.global_mean = episode.env().catalog().global_mean();
  return v;
}

std::span<const RatingRecord> World::history_of(const std::string& user_id) const {
  auto it = histories.find(user_id);
  if (it == histories.end()) return {};
  return it->second;
}

namespace {

std::map<std::string, int> rating_map(std::span<const RatingRecord> history, const std::set<std::string>& hidden) {
  std::map<std::string, int> out;
  for (const auto& r : history) {
    if (!hidden.count(r.item_id)) out[r.item_id] = r.rating;
  }
  return out;
}

}  // namespace

Episode World::browse_episode(const std::string& user_id) const {
  if (!catalog || !recommender) throw ValidationError("world needs a catalog and a recommender");
  auto history = history_of(user_id);
  Environment env(recommender, catalog, user_id, rating_map(history, {}), this->env);
  if (search) env.set_search_index(search);
  AgentMemory mem(user_id, *catalog, memory);
  mem.seed_history(history);
  return Episode(std::move(env), std::move(mem), render);
}

Episode World::item_episode(const std::string& user_id, const std::string& item_id,
                            const std::set<std::string>& hidden) const {
  if (!catalog) throw ValidationError("world needs a catalog");
  std::set<std::string> removed = hidden;
  removed.insert(item_id);
  auto history = history_of(user_id);
  EnvConfig cfg = this->env;
  cfg.rating_only = true;
  auto env = Environment::fixed_listing(catalog, user_id, rating_map(history, removed), {item_id}, cfg);
  std::vector<RatingRecord> visible;
  for (const auto& r : history) {
    if (!removed.count(r.item_id)) visible.push_back(r);
  }
  AgentMemory mem(user_id, *catalog, memory);
  mem.seed_history(visible);
  return Episode(std::move(env), std::move(mem), render);
}

}  // namespace alignsim
