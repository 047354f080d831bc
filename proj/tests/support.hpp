#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "alignsim/dataset.hpp"
#include "alignsim/episode.hpp"
#include "alignsim/persona.hpp"
#include "alignsim/recommender.hpp"
#include "alignsim/util.hpp"

namespace alignsim::support {

inline std::vector<ItemRecord> fixture_items() {
  return {
      {"1", "Toy Story (1995)", {"Animation", "Children's", "Comedy"}, ""},
      {"2", "Jumanji (1995)", {"Adventure", "Children's", "Fantasy"}, ""},
      {"3", "Heat (1995)", {"Action", "Crime", "Thriller"}, "A detective hunts a crew of professional thieves."},
      {"4", "Casino (1995)", {"Drama", "Thriller"}, ""},
      {"5", "Sabrina (1995)", {"Comedy", "Romance"}, ""},
      {"6", "GoldenEye (1995)", {"Action", "Adventure", "Thriller"}, ""},
      {"7", "Balto (1995)", {"Animation", "Children's"}, ""},
      {"8", "Nixon (1995)", {"Drama"}, ""},
      {"9", "Sudden Death (1995)", {"Action"}, ""},
      {"10", "Clueless (1995)", {"Comedy", "Romance"}, ""},
  };
}

inline std::vector<RatingRecord> fixture_train() {
  return {
      {"u1", "1", 5, 100}, {"u1", "3", 4, 101}, {"u1", "4", 2, 102}, {"u1", "7", 5, 103},
      {"u2", "1", 3, 104}, {"u2", "2", 4, 105}, {"u2", "5", 1, 106}, {"u2", "6", 5, 107},
      {"u3", "3", 5, 108}, {"u3", "6", 4, 109}, {"u3", "9", 3, 110}, {"u3", "8", 2, 111},
  };
}

inline World fixture_world(RenderOptions render = {}, EnvConfig env = {}) {
  auto train = fixture_train();
  World w;
  w.catalog = std::make_shared<const ItemCatalog>(fixture_items(), train);
  w.recommender = std::make_shared<const PopRecommender>(train, w.catalog->item_ids());
  w.histories = group_by_user(train);
  w.env = env;
  w.render = render;
  return w;
}

inline Persona fixture_persona(const std::string& user_id = "u1") {
  Persona p;
  p.user_id = user_id;
  p.age = 25;
  p.occupation = "programmer";
  p.big_five = {3, 2, 1, 2, 3};
  p.mean_rating = 4.0;
  p.pickiness = Pickiness::moderately_picky;
  p.engagement = 4;
  p.conformity = 1.25;
  p.variety = 8;
  p.engagement_level = 2;
  p.conformity_level = 2;
  p.variety_level = 3;
  return p;
}

inline std::string golden(const std::string& name) {
  return read_file(std::filesystem::path(ALIGNSIM_GOLDEN_DIR) / name);
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("alignsim_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace alignsim::support
