#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "alignsim/dataset.hpp"

namespace alignsim {

enum class Pickiness { not_picky, moderately_picky, extremely_picky };

std::string_view to_string(Pickiness p);
Pickiness pickiness_from_string(std::string_view s);

// Thresholds: >= 4.5 not picky, [3.5, 4.5) moderately, < 3.5 extremely.
Pickiness pickiness(double mean_rating);

struct ItemQuality {
  std::string item_id;
  double mean_rating = 0;  // R_i
  int rating_count = 0;
};

// R_i over the training split. Unrated items carry the global training mean.
class ItemQualityTable {
 public:
  ItemQualityTable(std::span<const RatingRecord> train, std::span<const std::string> catalog_items = {});

  const ItemQuality& get(const std::string& item_id) const;
  double mean_of(const std::string& item_id) const { return get(item_id).mean_rating; }
  double global_mean() const { return global_mean_; }
  const std::map<std::string, ItemQuality>& all() const { return table_; }

 private:
  std::map<std::string, ItemQuality> table_;
  double global_mean_ = 0;
  mutable ItemQuality fallback_;
};

// T_act: number of distinct rated items.
int engagement(std::span<const RatingRecord> history);

struct ConformityResult {
  double value = 0;         // T_conf
  bool degenerate = false;  // set for empty histories, whose value is 0
};

ConformityResult conformity(std::span<const RatingRecord> history, const ItemQualityTable& qualities);

// T_div: size of the union of genre sets over rated items.
int variety(std::span<const RatingRecord> history, const ItemCatalog& catalog);

inline constexpr std::array<const char*, 5> kBigFiveTraits = {
    "Openness", "Conscientiousness", "Extraversion", "Agreeableness", "Neuroticism"};

struct Persona {
  std::string user_id;
  std::optional<int> age;
  std::optional<std::string> occupation;
  std::array<int, 5> big_five{2, 2, 2, 2, 2};  // each in 1..3
  double mean_rating = 0;
  Pickiness pickiness = Pickiness::moderately_picky;
  int engagement = 0;
  double conformity = 0;
  bool conformity_degenerate = false;
  int variety = 0;
  // Population terciles 1..3 (0 until assign_habit_terciles runs).
  int engagement_level = 0;
  int conformity_level = 0;
  int variety_level = 0;

  bool operator==(const Persona&) const = default;
};

// Big-Five values are drawn from a stream keyed by (seed, user_id) so a
// user's traits never depend on which other users are processed.
Persona build_persona(const std::string& user_id, std::span<const RatingRecord> history,
                      const ItemQualityTable& qualities, const ItemCatalog& catalog,
                      const UserRecord* demographics, std::uint64_t seed);

void assign_habit_terciles(std::span<Persona> personas);

// Text block for the [PERSONA] prompt section.
std::string persona_text(const Persona& p);

json to_json(const Persona& p);
Persona persona_from_json(const json& j);

}  // namespace alignsim
