#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "alignsim/env.hpp"
#include "alignsim/memory.hpp"
#include "alignsim/persona.hpp"
#include "alignsim/policy.hpp"

namespace alignsim {

struct RenderOptions {
  bool show_similar = false;  // knowledge-graph retrieval shown on each slot
};

// An environment paired with the agent memory that observes it. Copying an
// Episode forks both, which is how counterfactual branches are explored.
class Episode {
 public:
  Episode(Environment env, AgentMemory memory, RenderOptions options = {});

  // Current page with similar items attached when enabled.
  PageState view() const;
  std::string render() const;
  std::string type() const;
  bool terminal() const { return env_.terminal(); }
  const std::vector<Action>& available_actions() const { return env_.state().available_actions; }

  // Steps the environment; RATE is mirrored into memory.
  std::optional<PageState> apply(const Action& action, int step);

  Environment& env() { return env_; }
  const Environment& env() const { return env_; }
  AgentMemory& memory() { return memory_; }
  const AgentMemory& memory() const { return memory_; }
  const RenderOptions& options() const { return options_; }

 private:
  Environment env_;
  AgentMemory memory_;
  RenderOptions options_;
};

PolicyRequest policy_request(const Episode& episode, const Persona& persona, PromptMode mode);

// Decision view over `page`, which must outlive the view.
DecisionView decision_view(const Episode& episode, const Persona& persona, const PageState& page);

// Shared, immutable inputs from which per-session episodes are built.
struct World {
  std::shared_ptr<const ItemCatalog> catalog;
  std::shared_ptr<const Recommender> recommender;
  std::shared_ptr<const SearchIndex> search;  // optional
  std::map<std::string, std::vector<RatingRecord>> histories;  // training split per user
  EnvConfig env;
  MemoryConfig memory;
  RenderOptions render;

  std::span<const RatingRecord> history_of(const std::string& user_id) const;
  // Browsing session over the recommender's ranking.
  Episode browse_episode(const std::string& user_id) const;
  // Rating-only context for one item; `hidden` ratings are removed from the
  // visible history and the memory.
  Episode item_episode(const std::string& user_id, const std::string& item_id,
                       const std::set<std::string>& hidden = {}) const;
};

}  // namespace alignsim
