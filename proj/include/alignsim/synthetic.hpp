#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "alignsim/dataset.hpp"

namespace alignsim {

inline constexpr std::array<const char*, 18> kMovieLensGenres = {
    "Action",  "Adventure", "Animation", "Children's", "Comedy",  "Crime",    "Documentary", "Drama",    "Fantasy",
    "Film-Noir", "Horror",  "Musical",   "Mystery",    "Romance", "Sci-Fi",   "Thriller",    "War",      "Western"};

struct SyntheticOptions {
  int users = 200;
  int items = 600;
  int min_ratings = 20;
  int max_ratings = 80;
  // Every item has one genre and every user rates items of one genre only.
  bool single_genre_users = false;
  std::uint64_t seed = 0;
  std::int64_t start_time = 956703932;  // first ML-1M timestamp
  std::int64_t span_seconds = 3 * 365 * 24 * 3600;
};

// A MovieLens-shaped corpus: ratings from user bias, item quality, genre
// taste and noise; timestamps spread over `span_seconds`.
struct SyntheticCorpus {
  std::vector<RatingRecord> ratings;
  std::vector<ItemRecord> items;
  std::vector<UserRecord> users;
};

SyntheticCorpus make_synthetic_corpus(const SyntheticOptions& options);

// ratings.dat, movies.dat and users.dat in the MovieLens `::` layout.
void write_movielens_dat(const SyntheticCorpus& corpus, const std::filesystem::path& dir);

}  // namespace alignsim
