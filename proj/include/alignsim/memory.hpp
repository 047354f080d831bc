#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "alignsim/dataset.hpp"
#include "alignsim/env.hpp"

namespace alignsim {

struct EpisodicEntry {
  std::string text;
  std::string item_id;
  int score = 0;
  std::optional<int> step;  // nullopt marks an entry seeded from history

  bool operator==(const EpisodicEntry&) const = default;
};

// score >= 4 liked, <= 2 disliked, otherwise neutral.
std::string interaction_text(const std::string& item_name, int score);

struct RatedEdge {
  std::string item_id;
  int weight = 0;

  bool operator==(const RatedEdge&) const = default;
  auto operator<=>(const RatedEdge&) const = default;
};

// Per-user graph: the user node, rated(user -> item) edges and
// has_genre(item -> genre) edges for every rated item.
class KnowledgeGraph {
 public:
  explicit KnowledgeGraph(std::string user_id = {}) : user_id_(std::move(user_id)) {}

  void add_rating(const ItemRecord& item, int rating);
  // Latest rating per item; re-rates append a new edge.
  std::optional<int> rating_of(const std::string& item_id) const;
  const std::vector<RatedEdge>& rated_edges() const { return rated_; }
  const std::map<std::string, std::set<std::string>>& genre_edges() const { return genres_; }
  const std::string& user_id() const { return user_id_; }

 private:
  std::string user_id_;
  std::vector<RatedEdge> rated_;
  std::map<std::string, int> latest_;
  std::map<std::string, std::set<std::string>> genres_;  // item -> genres
  std::map<std::string, std::set<std::string>> items_by_genre_;

  friend class AgentMemory;
};

struct MemoryConfig {
  int history_window = 10;  // h
  int similar_k = 5;        // k2
};

class AgentMemory {
 public:
  AgentMemory(std::string user_id, const ItemCatalog& catalog, MemoryConfig config = {});

  // History entries in (timestamp, item_id) order.
  void seed_history(std::span<const RatingRecord> history);
  const EpisodicEntry& record_interaction(const std::string& item_id, int score, std::optional<int> step);

  // The last h entries, newest last, one per line.
  std::string recent_history(int h) const;
  std::string recent_history() const { return recent_history(config_.history_window); }

  // 2-hop item -> genre -> item candidates among rated items, ranked by
  // (shared genres desc, rating desc, item_id asc). The target is excluded.
  std::vector<SimilarItem> similar_items(const std::string& target_item, int k2) const;
  std::vector<SimilarItem> similar_items(const std::string& target_item) const {
    return similar_items(target_item, config_.similar_k);
  }

  // Mean rating over rated items sharing a genre with `item_id`.
  std::optional<double> genre_affinity(const std::string& item_id) const;

  const std::vector<EpisodicEntry>& entries() const { return entries_; }
  const KnowledgeGraph& graph() const { return graph_; }
  const MemoryConfig& config() const { return config_; }
  std::map<std::string, int> ratings() const { return graph_.latest_; }

  json snapshot() const;

 private:
  const ItemCatalog* catalog_;
  MemoryConfig config_;
  std::vector<EpisodicEntry> entries_;
  KnowledgeGraph graph_;
};

}  // namespace alignsim
