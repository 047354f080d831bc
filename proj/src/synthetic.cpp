#include "alignsim/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "alignsim/error.hpp"

namespace alignsim {

namespace {

constexpr std::array<int, 7> kAges = {1, 18, 25, 35, 45, 50, 56};
constexpr std::array<const char*, 8> kOccupations = {"academic/educator", "artist", "college/grad student",
                                                     "executive/managerial", "programmer", "retired",
                                                     "technician/engineer", "writer"};

int clamp_rating(double x) { return static_cast<int>(std::clamp<long>(std::lround(x), 1L, 5L)); }

}  // namespace

SyntheticCorpus make_synthetic_corpus(const SyntheticOptions& o) {
  if (o.users < 1 || o.items < 1) throw ValidationError("synthetic corpus needs users and items");
  if (o.min_ratings < 1 || o.max_ratings < o.min_ratings) throw ValidationError("bad synthetic rating range");
  std::mt19937_64 rng(derive_seed(o.seed, "synthetic"));
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n_genres = static_cast<int>(kMovieLensGenres.size());

  SyntheticCorpus c;
  std::vector<double> quality(static_cast<std::size_t>(o.items));
  std::vector<std::vector<int>> item_genres(static_cast<std::size_t>(o.items));
  std::vector<std::vector<int>> items_of_genre(static_cast<std::size_t>(n_genres));
  std::uniform_int_distribution<int> genre_pick(0, n_genres - 1);
  std::uniform_int_distribution<int> genre_count(1, 3);
  std::uniform_int_distribution<int> year(1930, 2000);
  for (int i = 0; i < o.items; ++i) {
    auto& g = item_genres[static_cast<std::size_t>(i)];
    if (o.single_genre_users) {
      g.push_back(i % n_genres);
    } else {
      int k = genre_count(rng);
      while (static_cast<int>(g.size()) < k) {
        int x = genre_pick(rng);
        if (std::find(g.begin(), g.end(), x) == g.end()) g.push_back(x);
      }
      std::sort(g.begin(), g.end());
    }
    quality[static_cast<std::size_t>(i)] = 0.6 * normal(rng);
    ItemRecord item;
    item.item_id = std::to_string(i + 1);
    item.title = "Synthetic Film " + std::to_string(i + 1) + " (" + std::to_string(year(rng)) + ")";
    for (int x : g) {
      item.genres.emplace_back(kMovieLensGenres[static_cast<std::size_t>(x)]);
      items_of_genre[static_cast<std::size_t>(x)].push_back(i);
    }
    c.items.push_back(std::move(item));
  }

  std::uniform_int_distribution<int> count(o.min_ratings, o.max_ratings);
  std::uniform_int_distribution<std::int64_t> when(0, o.span_seconds);
  std::uniform_int_distribution<std::size_t> age_pick(0, kAges.size() - 1);
  std::uniform_int_distribution<std::size_t> occ_pick(0, kOccupations.size() - 1);
  for (int u = 0; u < o.users; ++u) {
    UserRecord user;
    user.user_id = std::to_string(u + 1);
    user.age = kAges[age_pick(rng)];
    user.occupation = kOccupations[occ_pick(rng)];
    c.users.push_back(user);

    const double bias = 0.5 * normal(rng);
    std::vector<double> taste(static_cast<std::size_t>(n_genres));
    for (auto& t : taste) t = 0.8 * normal(rng);

    std::vector<int> pool;
    if (o.single_genre_users) {
      pool = items_of_genre[static_cast<std::size_t>(genre_pick(rng))];
    } else {
      pool.resize(static_cast<std::size_t>(o.items));
      std::iota(pool.begin(), pool.end(), 0);
    }
    std::shuffle(pool.begin(), pool.end(), rng);
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(count(rng)), pool.size());
    for (std::size_t k = 0; k < n; ++k) {
      const int i = pool[k];
      const auto& g = item_genres[static_cast<std::size_t>(i)];
      double t = 0;
      for (int x : g) t += taste[static_cast<std::size_t>(x)];
      t /= static_cast<double>(g.size());
      double score = o.single_genre_users ? 4.0 + 0.5 * bias + 0.5 * quality[static_cast<std::size_t>(i)] +
                                                0.5 * normal(rng)
                                          : 3.6 + bias + quality[static_cast<std::size_t>(i)] + t + 0.6 * normal(rng);
      c.ratings.push_back({user.user_id, c.items[static_cast<std::size_t>(i)].item_id, clamp_rating(score),
                           o.start_time + when(rng)});
    }
  }
  return c;
}

void write_movielens_dat(const SyntheticCorpus& c, const std::filesystem::path& dir) {
  std::string ratings, movies, users;
  for (const auto& r : c.ratings) {
    ratings += r.user_id + "::" + r.item_id + "::" + std::to_string(r.rating) + "::" + std::to_string(r.timestamp) + "\n";
  }
  for (const auto& i : c.items) movies += i.item_id + "::" + i.title + "::" + join(i.genres, "|") + "\n";
  for (const auto& u : c.users) {
    users += u.user_id + "::F::" + (u.age ? std::to_string(*u.age) : std::string()) + "::" +
             u.occupation.value_or("") + "::00000\n";
  }
  write_file(dir / "ratings.dat", ratings);
  write_file(dir / "movies.dat", movies);
  write_file(dir / "users.dat", users);
}

}  // namespace alignsim
