#include "alignsim/memory.hpp"

#include <algorithm>

#include "alignsim/error.hpp"

namespace alignsim {

std::string interaction_text(const std::string& item_name, int score) {
  if (score < 1 || score > 5) throw ValidationError("score " + std::to_string(score) + " outside 1..5");
  std::string verb = score >= 4 ? "I liked " : score <= 2 ? "I disliked " : "I felt neutral about ";
  return verb + item_name + " based on my review score of " + std::to_string(score);
}

void KnowledgeGraph::add_rating(const ItemRecord& item, int rating) {
  if (rating < 1 || rating > 5) throw ValidationError("rated edge weight outside 1..5");
  rated_.push_back({item.item_id, rating});
  latest_[item.item_id] = rating;
  auto& g = genres_[item.item_id];
  for (const auto& genre : item.genres) {
    g.insert(genre);
    items_by_genre_[genre].insert(item.item_id);
  }
}

std::optional<int> KnowledgeGraph::rating_of(const std::string& item_id) const {
  auto it = latest_.find(item_id);
  if (it == latest_.end()) return std::nullopt;
  return it->second;
}

AgentMemory::AgentMemory(std::string user_id, const ItemCatalog& catalog, MemoryConfig config)
    : catalog_(&catalog), config_(config), graph_(std::move(user_id)) {
  if (config_.history_window < 0 || config_.similar_k < 0) throw ValidationError("memory windows must be >= 0");
}

void AgentMemory::seed_history(std::span<const RatingRecord> history) {
  std::vector<RatingRecord> sorted(history.begin(), history.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const RatingRecord& a, const RatingRecord& b) {
    return std::tie(a.timestamp, a.item_id) < std::tie(b.timestamp, b.item_id);
  });
  for (const auto& r : sorted) record_interaction(r.item_id, r.rating, std::nullopt);
}

const EpisodicEntry& AgentMemory::record_interaction(const std::string& item_id, int score, std::optional<int> step) {
  ItemRecord placeholder;
  const ItemRecord* item = catalog_->find(item_id);
  if (!item) {
    placeholder.item_id = item_id;
    placeholder.title = catalog_->title_of(item_id);
    item = &placeholder;
  }
  entries_.push_back({interaction_text(item->title, score), item_id, score, step});
  graph_.add_rating(*item, score);
  return entries_.back();
}

std::string AgentMemory::recent_history(int h) const {
  if (h < 0) throw ValidationError("history window must be >= 0");
  std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(h), entries_.size());
  std::string out;
  for (std::size_t i = entries_.size() - n; i < entries_.size(); ++i) {
    if (!out.empty()) out += "\n";
    out += entries_[i].text;
  }
  return out;
}

std::vector<SimilarItem> AgentMemory::similar_items(const std::string& target_item, int k2) const {
  if (k2 <= 0) return {};
  std::set<std::string> target_genres;
  if (const ItemRecord* item = catalog_->find(target_item)) {
    target_genres.insert(item->genres.begin(), item->genres.end());
  } else if (auto it = graph_.genres_.find(target_item); it != graph_.genres_.end()) {
    target_genres = it->second;
  }
  std::map<std::string, int> shared;
  for (const auto& genre : target_genres) {
    auto it = graph_.items_by_genre_.find(genre);
    if (it == graph_.items_by_genre_.end()) continue;
    for (const auto& other : it->second) {
      if (other != target_item) ++shared[other];
    }
  }
  struct Candidate {
    std::string id;
    int shared;
    int rating;
  };
  std::vector<Candidate> cands;
  for (const auto& [id, count] : shared) cands.push_back({id, count, graph_.latest_.at(id)});
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.shared != b.shared) return a.shared > b.shared;
    if (a.rating != b.rating) return a.rating > b.rating;
    return a.id < b.id;
  });
  if (cands.size() > static_cast<std::size_t>(k2)) cands.resize(static_cast<std::size_t>(k2));
  std::vector<SimilarItem> out;
  for (const auto& c : cands) out.push_back({c.id, catalog_->title_of(c.id), c.rating});
  return out;
}

std::optional<double> AgentMemory::genre_affinity(const std::string& item_id) const {
  const ItemRecord* item = catalog_->find(item_id);
  if (!item || item->genres.empty()) return std::nullopt;
  std::set<std::string> related;
  for (const auto& genre : item->genres) {
    auto it = graph_.items_by_genre_.find(genre);
    if (it != graph_.items_by_genre_.end()) related.insert(it->second.begin(), it->second.end());
  }
  related.erase(item_id);
  if (related.empty()) return std::nullopt;
  double sum = 0;
  for (const auto& id : related) sum += graph_.latest_.at(id);
  return sum / static_cast<double>(related.size());
}

json AgentMemory::snapshot() const {
  json episodic = json::array();
  for (const auto& e : entries_) {
    json j = {{"text", e.text}, {"item_id", e.item_id}, {"score", e.score}};
    j["step"] = e.step ? json(*e.step) : json("HISTORY");
    episodic.push_back(std::move(j));
  }
  json edges = json::array();
  for (const auto& e : graph_.rated_) {
    edges.push_back({{"type", "rated"}, {"from", graph_.user_id()}, {"to", e.item_id}, {"weight", e.weight}});
  }
  for (const auto& [item, genres] : graph_.genres_) {
    for (const auto& g : genres) edges.push_back({{"type", "has_genre"}, {"from", item}, {"to", g}});
  }
  return {{"episodic", std::move(episodic)}, {"edges", std::move(edges)}};
}

}  // namespace alignsim
