#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "alignsim/dataset.hpp"
#include "alignsim/recommender.hpp"

namespace alignsim {

enum class ActionTag { next_page, previous_page, click_item, rate, exit, search };

std::string_view to_string(ActionTag tag);  // NEXT_PAGE, ...

struct Action {
  ActionTag tag = ActionTag::exit;
  std::string item_id;  // CLICK_ITEM, RATE
  int value = 0;        // RATE, 1..5
  std::string query;    // SEARCH

  static Action next_page() { return {ActionTag::next_page, {}, 0, {}}; }
  static Action previous_page() { return {ActionTag::previous_page, {}, 0, {}}; }
  static Action exit() { return {ActionTag::exit, {}, 0, {}}; }
  static Action click(std::string item_id);
  static Action rate(std::string item_id, int value);
  static Action search(std::string query);

  bool operator==(const Action&) const = default;
  auto operator<=>(const Action&) const = default;
};

// `[TAG]`, `[TAG:arg]` or `[TAG:arg:arg]`.
std::string to_token(const Action& action);
// Strict inverse of to_token; surrounding whitespace is tolerated.
Action parse_action(std::string_view text);

struct SimilarItem {
  std::string item_id;
  std::string title;
  int rating = 0;

  bool operator==(const SimilarItem&) const = default;
};

struct ItemSlot {
  std::string item_id;
  std::string title;
  std::string history_rating;  // display value
  std::string summary;
  std::vector<SimilarItem> similar_items;
  bool clicked = false;
  bool rated = false;

  bool operator==(const ItemSlot&) const = default;
};

enum class ListingKind { recommended, search, fixed };

struct PageState {
  int page_number = 1;
  ListingKind listing = ListingKind::recommended;
  std::string query;   // search listings
  std::string notice;  // rendered after the PAGE line when non-empty
  std::vector<ItemSlot> slots;
  std::vector<Action> available_actions;
  std::optional<std::string> focus_item;  // item whose details were just revealed

  bool operator==(const PageState&) const = default;
};

// Canonical page text:
//   PAGE {n}
//   <- {title} -> <- History ratings: {r} -> <- Summary: {s} ->[ <- Similar items: {...} ->]
std::string render_page(const PageState& state, bool show_similar);

// Coarse page category used by next-state evaluation.
std::string page_type(const PageState& state);
inline constexpr std::string_view kTerminalPageType = "terminal";
inline constexpr std::string_view kTerminalText = "SESSION TERMINATED";

std::vector<std::string> action_tokens(std::span<const Action> actions);

struct EnvConfig {
  int page_size = 4;
  bool enable_search = false;
  bool exclude_history = true;
  // Item-context mode: only RATE actions, EXIT once every slot is rated.
  bool rating_only = false;
};

// Title-substring search over the catalog, results by ascending item_id.
class SearchIndex {
 public:
  explicit SearchIndex(const ItemCatalog& catalog);
  std::vector<std::string> query(std::string_view text) const;

 private:
  std::vector<std::pair<std::string, std::string>> titles_;  // (id, lowercase title)
};

// One session's view of the recommender MDP. Copies are independent
// snapshots that share only the immutable recommender and catalog.
class Environment {
 public:
  Environment(std::shared_ptr<const Recommender> recommender, std::shared_ptr<const ItemCatalog> catalog,
              std::string user_id, std::map<std::string, int> history, EnvConfig config = {});

  // A single-page environment listing exactly `items`, used for item-level
  // (rating) contexts. Navigation is never offered.
  static Environment fixed_listing(std::shared_ptr<const ItemCatalog> catalog, std::string user_id,
                                   std::map<std::string, int> history, std::vector<std::string> items,
                                   EnvConfig config = {});

  const PageState& state() const;
  bool terminal() const { return terminal_; }
  bool is_available(const Action& action) const;

  // nullopt is TERMINAL.
  std::optional<PageState> step(const Action& action);

  void set_search_index(std::shared_ptr<const SearchIndex> index) { search_index_ = std::move(index); }

  const std::string& user_id() const { return user_id_; }
  const std::map<std::string, int>& session_ratings() const { return session_ratings_; }
  const std::map<std::string, int>& history() const { return history_; }
  std::optional<int> known_rating(const std::string& item_id) const;
  const ItemCatalog& catalog() const { return *catalog_; }
  const EnvConfig& config() const { return config_; }
  const std::set<std::string>& clicked() const { return clicked_; }

 private:
  Environment(std::shared_ptr<const ItemCatalog> catalog, std::string user_id, std::map<std::string, int> history,
              EnvConfig config);
  void rebuild();
  std::vector<std::string> listing_page() const;

  std::shared_ptr<const Recommender> recommender_;
  std::shared_ptr<const ItemCatalog> catalog_;
  std::shared_ptr<const SearchIndex> search_index_;
  std::string user_id_;
  std::map<std::string, int> history_;
  EnvConfig config_;

  std::shared_ptr<const std::vector<std::string>> recommended_;  // ranked, exclusions applied
  std::shared_ptr<const std::vector<std::string>> listing_;      // current listing
  ListingKind listing_kind_ = ListingKind::recommended;
  std::string query_;
  int page_ = 1;
  std::set<std::string> clicked_;
  std::map<std::string, int> session_ratings_;
  std::optional<std::string> focus_;
  bool terminal_ = false;
  PageState state_;
};

}  // namespace alignsim
