#include "alignsim/env.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "alignsim/error.hpp"

namespace alignsim {

std::string_view to_string(ActionTag tag) {
  switch (tag) {
    case ActionTag::next_page: return "NEXT_PAGE";
    case ActionTag::previous_page: return "PREVIOUS_PAGE";
    case ActionTag::click_item: return "CLICK_ITEM";
    case ActionTag::rate: return "RATE";
    case ActionTag::exit: return "EXIT";
    case ActionTag::search: return "SEARCH";
  }
  return "EXIT";
}

namespace {

bool valid_item_id(std::string_view id) {
  if (id.empty()) return false;
  return std::none_of(id.begin(), id.end(), [](char c) {
    return c == ':' || c == '[' || c == ']' || std::isspace(static_cast<unsigned char>(c));
  });
}

bool valid_query(std::string_view q) {
  return std::none_of(q.begin(), q.end(), [](char c) { return c == ']' || c == '\n' || c == '\r'; });
}

}  // namespace

Action Action::click(std::string item_id) {
  if (!valid_item_id(item_id)) throw ValidationError("invalid item id '" + item_id + "'");
  return {ActionTag::click_item, std::move(item_id), 0, {}};
}

Action Action::rate(std::string item_id, int value) {
  if (!valid_item_id(item_id)) throw ValidationError("invalid item id '" + item_id + "'");
  if (value < 1 || value > 5) throw ValidationError("rating value " + std::to_string(value) + " outside 1..5");
  return {ActionTag::rate, std::move(item_id), value, {}};
}

Action Action::search(std::string query) {
  if (!valid_query(query)) throw ValidationError("search query contains ']' or a newline");
  return {ActionTag::search, {}, 0, std::move(query)};
}

std::string to_token(const Action& a) {
  std::string out = "[";
  out += to_string(a.tag);
  switch (a.tag) {
    case ActionTag::click_item: out += ":" + a.item_id; break;
    case ActionTag::rate: out += ":" + a.item_id + ":" + std::to_string(a.value); break;
    case ActionTag::search: out += ":" + a.query; break;
    default: break;
  }
  out += "]";
  return out;
}

Action parse_action(std::string_view text) {
  std::string original(text);
  auto t = trim(text);
  if (t.size() < 3 || t.front() != '[' || t.back() != ']') throw ActionParseError(original, "expected [TAG...]");
  auto body = t.substr(1, t.size() - 2);
  auto colon = body.find(':');
  auto tag = body.substr(0, colon);
  std::string_view rest = colon == std::string_view::npos ? std::string_view{} : body.substr(colon + 1);
  bool has_args = colon != std::string_view::npos;

  auto no_args = [&](Action a) {
    if (has_args) throw ActionParseError(original, std::string(tag) + " takes no arguments");
    return a;
  };
  if (tag == "NEXT_PAGE") return no_args(Action::next_page());
  if (tag == "PREVIOUS_PAGE") return no_args(Action::previous_page());
  if (tag == "EXIT") return no_args(Action::exit());
  if (tag == "SEARCH") {
    if (!valid_query(rest)) throw ActionParseError(original, "malformed search query");
    return Action::search(std::string(rest));
  }
  if (tag == "CLICK_ITEM") {
    if (!has_args || !valid_item_id(rest)) throw ActionParseError(original, "CLICK_ITEM needs one item id");
    return Action::click(std::string(rest));
  }
  if (tag == "RATE") {
    auto sep = rest.find(':');
    if (!has_args || sep == std::string_view::npos) throw ActionParseError(original, "RATE needs item id and value");
    auto item = rest.substr(0, sep);
    auto value = rest.substr(sep + 1);
    if (!valid_item_id(item)) throw ActionParseError(original, "bad item id");
    if (value.size() != 1 || value[0] < '1' || value[0] > '5') {
      throw ActionParseError(original, "rating value must be one of 1..5");
    }
    return Action::rate(std::string(item), value[0] - '0');
  }
  throw ActionParseError(original, "unknown tag '" + std::string(tag) + "'");
}

std::vector<std::string> action_tokens(std::span<const Action> actions) {
  std::vector<std::string> out;
  out.reserve(actions.size());
  for (const auto& a : actions) out.push_back(to_token(a));
  return out;
}

std::string render_page(const PageState& state, bool show_similar) {
  std::string out = "PAGE " + std::to_string(state.page_number);
  if (!state.notice.empty()) out += "\n" + state.notice;
  for (const auto& slot : state.slots) {
    out += "\n<- " + slot.title + " -> <- History ratings: " + slot.history_rating + " -> <- Summary: " +
           slot.summary + " ->";
    if (show_similar) {
      std::string similar;
      for (std::size_t k = 0; k < slot.similar_items.size(); ++k) {
        if (k) similar += ", ";
        similar += "**" + slot.similar_items[k].title + " (" + std::to_string(slot.similar_items[k].rating) + "/5)**";
      }
      out += " <- Similar items: " + (similar.empty() ? std::string("none") : similar) + " ->";
    }
  }
  return out;
}

std::string page_type(const PageState& state) {
  if (state.listing == ListingKind::search) return state.slots.empty() ? "no_results" : "search";
  if (state.focus_item) return "detail";
  return "browse";
}

SearchIndex::SearchIndex(const ItemCatalog& catalog) {
  for (const auto& id : catalog.item_ids()) titles_.emplace_back(id, to_lower(catalog.at(id).title));
}

std::vector<std::string> SearchIndex::query(std::string_view text) const {
  std::string needle = to_lower(trim(text));
  std::vector<std::string> out;
  if (needle.empty()) return out;
  for (const auto& [id, title] : titles_) {
    if (title.find(needle) != std::string::npos) out.push_back(id);
  }
  return out;
}

Environment::Environment(std::shared_ptr<const ItemCatalog> catalog, std::string user_id,
                         std::map<std::string, int> history, EnvConfig config)
    : catalog_(std::move(catalog)), user_id_(std::move(user_id)), history_(std::move(history)), config_(config) {
  if (!catalog_) throw ValidationError("environment needs a catalog");
  if (config_.page_size < 1) throw ValidationError("page size must be >= 1");
}

Environment::Environment(std::shared_ptr<const Recommender> recommender, std::shared_ptr<const ItemCatalog> catalog,
                         std::string user_id, std::map<std::string, int> history, EnvConfig config)
    : Environment(std::move(catalog), std::move(user_id), std::move(history), config) {
  if (!recommender) throw ValidationError("environment needs a recommender");
  recommender_ = std::move(recommender);
  auto ranked = recommender_->rank(user_id_);
  if (config_.exclude_history) {
    std::erase_if(ranked, [&](const std::string& id) { return history_.count(id) > 0; });
  }
  recommended_ = std::make_shared<const std::vector<std::string>>(std::move(ranked));
  listing_ = recommended_;
  rebuild();
}

Environment Environment::fixed_listing(std::shared_ptr<const ItemCatalog> catalog, std::string user_id,
                                       std::map<std::string, int> history, std::vector<std::string> items,
                                       EnvConfig config) {
  Environment env(std::move(catalog), std::move(user_id), std::move(history), config);
  env.config_.page_size = std::max<int>(config.page_size, static_cast<int>(items.size()));
  env.listing_kind_ = ListingKind::fixed;
  env.recommended_ = std::make_shared<const std::vector<std::string>>(std::move(items));
  env.listing_ = env.recommended_;
  env.rebuild();
  return env;
}

const PageState& Environment::state() const {
  if (terminal_) throw TerminalStateError();
  return state_;
}

std::optional<int> Environment::known_rating(const std::string& item_id) const {
  if (auto it = session_ratings_.find(item_id); it != session_ratings_.end()) return it->second;
  if (auto it = history_.find(item_id); it != history_.end()) return it->second;
  return std::nullopt;
}

std::vector<std::string> Environment::listing_page() const {
  return page_slice(*listing_, page_, config_.page_size);
}

void Environment::rebuild() {
  PageState s;
  s.page_number = page_;
  s.listing = listing_kind_;
  s.query = query_;
  s.focus_item = focus_;
  const std::string mean_text = format_fixed(catalog_->global_mean(), 2);
  for (const auto& id : listing_page()) {
    ItemSlot slot;
    slot.item_id = id;
    const ItemRecord* item = catalog_->find(id);
    slot.title = item ? item->title : "Item " + id;
    auto known = known_rating(id);
    slot.history_rating = known ? std::to_string(*known) : mean_text;
    slot.clicked = clicked_.count(id) > 0;
    slot.rated = session_ratings_.count(id) > 0;
    if (item) {
      slot.summary = slot.clicked ? item_detail(*item) : item_summary(*item);
    } else {
      slot.summary = "No description available.";
    }
    s.slots.push_back(std::move(slot));
  }
  if (listing_kind_ == ListingKind::search && s.slots.empty() && page_ == 1) {
    s.notice = "No results for \"" + query_ + "\"";
  }

  auto& acts = s.available_actions;
  if (config_.rating_only) {
    for (const auto& slot : s.slots) {
      if (slot.rated) continue;
      for (int v = 1; v <= 5; ++v) acts.push_back(Action::rate(slot.item_id, v));
    }
    if (acts.empty()) acts.push_back(Action::exit());
    state_ = std::move(s);
    return;
  }
  if (!s.slots.empty() && listing_kind_ != ListingKind::fixed) acts.push_back(Action::next_page());
  if (page_ > 1) acts.push_back(Action::previous_page());
  for (const auto& slot : s.slots) {
    if (!slot.clicked) acts.push_back(Action::click(slot.item_id));
  }
  for (const auto& slot : s.slots) {
    if (slot.rated) continue;
    for (int v = 1; v <= 5; ++v) acts.push_back(Action::rate(slot.item_id, v));
  }
  if (config_.enable_search) acts.push_back(Action::search("<query>"));
  acts.push_back(Action::exit());
  state_ = std::move(s);
}

bool Environment::is_available(const Action& action) const {
  if (terminal_) return false;
  if (action.tag == ActionTag::search) return config_.enable_search && !config_.rating_only;
  const auto& acts = state_.available_actions;
  return std::find(acts.begin(), acts.end(), action) != acts.end();
}

std::optional<PageState> Environment::step(const Action& action) {
  if (terminal_) throw TerminalStateError();
  if (!is_available(action)) {
    throw IllegalActionError("action " + to_token(action) + " is not available on page " + std::to_string(page_));
  }
  focus_.reset();
  switch (action.tag) {
    case ActionTag::next_page: ++page_; break;
    case ActionTag::previous_page: --page_; break;
    case ActionTag::click_item:
      clicked_.insert(action.item_id);
      focus_ = action.item_id;
      break;
    case ActionTag::rate: session_ratings_[action.item_id] = action.value; break;
    case ActionTag::exit: terminal_ = true; return std::nullopt;
    case ActionTag::search: {
      std::vector<std::string> hits;
      if (search_index_) hits = search_index_->query(action.query);
      listing_ = std::make_shared<const std::vector<std::string>>(std::move(hits));
      listing_kind_ = ListingKind::search;
      query_ = action.query;
      page_ = 1;
      break;
    }
  }
  rebuild();
  return state_;
}

}  // namespace alignsim
