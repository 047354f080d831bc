#include "alignsim/persona.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "alignsim/error.hpp"

namespace alignsim {

std::string_view to_string(Pickiness p) {
  switch (p) {
    case Pickiness::not_picky: return "not_picky";
    case Pickiness::moderately_picky: return "moderately_picky";
    case Pickiness::extremely_picky: return "extremely_picky";
  }
  return "moderately_picky";
}

Pickiness pickiness_from_string(std::string_view s) {
  if (s == "not_picky") return Pickiness::not_picky;
  if (s == "moderately_picky") return Pickiness::moderately_picky;
  if (s == "extremely_picky") return Pickiness::extremely_picky;
  throw ValidationError("unknown pickiness '" + std::string(s) + "'");
}

Pickiness pickiness(double mean_rating) {
  if (!(mean_rating >= 1.0 && mean_rating <= 5.0)) {
    throw ValidationError("mean rating " + std::to_string(mean_rating) + " outside [1, 5]");
  }
  if (mean_rating >= 4.5) return Pickiness::not_picky;
  if (mean_rating >= 3.5) return Pickiness::moderately_picky;
  return Pickiness::extremely_picky;
}

ItemQualityTable::ItemQualityTable(std::span<const RatingRecord> train,
                                   std::span<const std::string> catalog_items) {
  std::map<std::string, std::pair<double, int>> acc;
  double total = 0;
  for (const auto& r : train) {
    auto& a = acc[r.item_id];
    a.first += r.rating;
    a.second += 1;
    total += r.rating;
  }
  global_mean_ = train.empty() ? 0.0 : total / static_cast<double>(train.size());
  for (const auto& [id, a] : acc) {
    table_.emplace(id, ItemQuality{id, a.first / a.second, a.second});
  }
  for (const auto& id : catalog_items) {
    if (!table_.count(id)) table_.emplace(id, ItemQuality{id, global_mean_, 0});
  }
  fallback_ = ItemQuality{"", global_mean_, 0};
}

const ItemQuality& ItemQualityTable::get(const std::string& item_id) const {
  auto it = table_.find(item_id);
  return it == table_.end() ? fallback_ : it->second;
}

int engagement(std::span<const RatingRecord> history) {
  std::set<std::string> items;
  for (const auto& r : history) items.insert(r.item_id);
  return static_cast<int>(items.size());
}

ConformityResult conformity(std::span<const RatingRecord> history, const ItemQualityTable& qualities) {
  if (history.empty()) return {0.0, true};
  double sum = 0;
  for (const auto& r : history) {
    double d = r.rating - qualities.mean_of(r.item_id);
    sum += d * d;
  }
  return {sum / static_cast<double>(history.size()), false};
}

int variety(std::span<const RatingRecord> history, const ItemCatalog& catalog) {
  std::set<std::string> genres;
  for (const auto& r : history) {
    if (const ItemRecord* item = catalog.find(r.item_id)) genres.insert(item->genres.begin(), item->genres.end());
  }
  return static_cast<int>(genres.size());
}

Persona build_persona(const std::string& user_id, std::span<const RatingRecord> history,
                      const ItemQualityTable& qualities, const ItemCatalog& catalog,
                      const UserRecord* demographics, std::uint64_t seed) {
  Persona p;
  p.user_id = user_id;
  if (demographics) {
    p.age = demographics->age;
    p.occupation = demographics->occupation;
  }
  std::mt19937_64 rng(derive_seed(seed, "big_five:" + user_id));
  std::uniform_int_distribution<int> trait(1, 3);
  for (auto& v : p.big_five) v = trait(rng);

  double sum = 0;
  for (const auto& r : history) sum += r.rating;
  p.mean_rating = history.empty() ? qualities.global_mean() : sum / static_cast<double>(history.size());
  p.pickiness = pickiness(std::clamp(p.mean_rating, 1.0, 5.0));
  p.engagement = engagement(history);
  auto conf = conformity(history, qualities);
  p.conformity = conf.value;
  p.conformity_degenerate = conf.degenerate;
  p.variety = variety(history, catalog);
  return p;
}

namespace {

template <typename Get>
void assign_levels(std::span<Persona> personas, Get get, int Persona::*level) {
  std::vector<double> values;
  values.reserve(personas.size());
  for (const auto& p : personas) values.push_back(get(p));
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  for (auto& p : personas) {
    // rank = count of strictly smaller values, so ties share a level
    auto below = std::lower_bound(values.begin(), values.end(), get(p)) - values.begin();
    p.*level = 1 + std::min(2, static_cast<int>(3.0 * static_cast<double>(below) / n));
  }
}

std::string level_name(int level) {
  switch (level) {
    case 1: return "low";
    case 2: return "medium";
    case 3: return "high";
    default: return "unranked";
  }
}

}  // namespace

void assign_habit_terciles(std::span<Persona> personas) {
  if (personas.empty()) return;
  assign_levels(personas, [](const Persona& p) { return static_cast<double>(p.engagement); },
                &Persona::engagement_level);
  assign_levels(personas, [](const Persona& p) { return p.conformity; }, &Persona::conformity_level);
  assign_levels(personas, [](const Persona& p) { return static_cast<double>(p.variety); },
                &Persona::variety_level);
}

std::string persona_text(const Persona& p) {
  std::ostringstream ss;
  ss << "Age: " << (p.age ? std::to_string(*p.age) : std::string("unknown")) << '\n';
  ss << "Occupation: " << p.occupation.value_or("unknown") << '\n';
  ss << "Personality (1-3):";
  for (std::size_t i = 0; i < p.big_five.size(); ++i) {
    ss << (i ? ", " : " ") << kBigFiveTraits[i] << ' ' << p.big_five[i];
  }
  ss << '\n';
  std::string pick(to_string(p.pickiness));
  std::replace(pick.begin(), pick.end(), '_', ' ');
  ss << "Pickiness: " << pick << " (average rating " << format_fixed(p.mean_rating, 2) << ")\n";
  ss << "Habits: engagement " << p.engagement << " (" << level_name(p.engagement_level) << "), conformity "
     << format_fixed(p.conformity, 2) << " (" << level_name(p.conformity_level) << "), variety "
     << p.variety << " (" << level_name(p.variety_level) << ")";
  return ss.str();
}

json to_json(const Persona& p) {
  json j;
  j["user_id"] = p.user_id;
  j["age"] = p.age ? json(*p.age) : json(nullptr);
  j["occupation"] = p.occupation ? json(*p.occupation) : json(nullptr);
  j["big_five"] = p.big_five;
  j["mean_rating"] = p.mean_rating;
  j["pickiness"] = to_string(p.pickiness);
  j["engagement"] = p.engagement;
  j["conformity"] = p.conformity;
  j["conformity_degenerate"] = p.conformity_degenerate;
  j["variety"] = p.variety;
  j["engagement_level"] = p.engagement_level;
  j["conformity_level"] = p.conformity_level;
  j["variety_level"] = p.variety_level;
  return j;
}

Persona persona_from_json(const json& j) {
  Persona p;
  p.user_id = j.at("user_id").get<std::string>();
  if (!j.at("age").is_null()) p.age = j["age"].get<int>();
  if (!j.at("occupation").is_null()) p.occupation = j["occupation"].get<std::string>();
  p.big_five = j.at("big_five").get<std::array<int, 5>>();
  for (int v : p.big_five) {
    if (v < 1 || v > 3) throw ValidationError("Big-Five value outside 1..3 for user " + p.user_id);
  }
  p.mean_rating = j.at("mean_rating").get<double>();
  p.pickiness = pickiness_from_string(j.at("pickiness").get<std::string>());
  p.engagement = j.at("engagement").get<int>();
  p.conformity = j.at("conformity").get<double>();
  p.conformity_degenerate = j.value("conformity_degenerate", false);
  p.variety = j.at("variety").get<int>();
  p.engagement_level = j.value("engagement_level", 0);
  p.conformity_level = j.value("conformity_level", 0);
  p.variety_level = j.value("variety_level", 0);
  return p;
}

}  // namespace alignsim
