#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "alignsim/util.hpp"

namespace alignsim {

struct RatingRecord {
  std::string user_id;
  std::string item_id;
  int rating = 0;  // 1..5
  std::int64_t timestamp = 0;

  bool operator==(const RatingRecord&) const = default;
};

struct ItemRecord {
  std::string item_id;
  std::string title;
  std::vector<std::string> genres;
  std::string description;  // may be empty
};

// Demographics kept at ingest; name and gender are dropped.
struct UserRecord {
  std::string user_id;
  std::optional<int> age;
  std::optional<std::string> occupation;
};

enum class RatingFormat { movielens_dat, csv };

// Column names for the csv format. The default is the canonical layout.
struct CsvColumns {
  std::string user = "user_id";
  std::string item = "item_id";
  std::string rating = "rating";
  std::string timestamp = "timestamp";

  static CsvColumns amazon_book();
};

// One record per well-formed line, input order preserved. Duplicate
// (user, item) pairs collapse onto the first occurrence's position carrying the
// latest-timestamp rating.
std::vector<RatingRecord> parse_ratings(std::istream& in, RatingFormat format,
                                        const CsvColumns& columns = {});

// `MovieID::Title::Genre|Genre`
std::vector<ItemRecord> parse_movies(std::istream& in);
// `UserID::Gender::Age::Occupation::Zip-code`
std::vector<UserRecord> parse_users(std::istream& in);

std::vector<RatingRecord> deduplicate_latest(std::vector<RatingRecord> records);

// Canonical csv: header plus one `user_id,item_id,rating,timestamp` line per record.
void write_ratings_csv(std::ostream& out, std::span<const RatingRecord> records);

struct SplitCorpus {
  std::vector<RatingRecord> train;
  std::vector<RatingRecord> validation;
  std::vector<RatingRecord> test;
  std::int64_t validation_start = 0;  // first validation timestamp
  std::int64_t test_start = 0;        // first test timestamp
};

// Global-time split: sort by (timestamp, user_id, item_id), cut by count.
SplitCorpus time_split(std::vector<RatingRecord> records,
                       std::array<double, 3> fractions = {0.8, 0.1, 0.1});

using InteractionMatrix = std::map<std::string, std::map<std::string, int>>;

InteractionMatrix interaction_matrix(std::span<const RatingRecord> records);

// Records grouped per user, each history sorted by (timestamp, item_id).
std::map<std::string, std::vector<RatingRecord>> group_by_user(std::span<const RatingRecord> records);

json to_json(const RatingRecord& r);
RatingRecord rating_from_json(const json& j);
json to_json(const ItemRecord& item);
ItemRecord item_from_json(const json& j);
json to_json(const UserRecord& user);
UserRecord user_from_json(const json& j);

void write_ratings_jsonl(const std::filesystem::path& path, std::span<const RatingRecord> records);
std::vector<RatingRecord> read_ratings_jsonl(const std::filesystem::path& path);

std::string genre_list(const ItemRecord& item);  // "Action, Comedy"
std::string item_summary(const ItemRecord& item);
std::string item_detail(const ItemRecord& item);

// Item metadata plus the training-split global mean rating. Items referenced by
// ratings but missing from metadata get a placeholder title.
class ItemCatalog {
 public:
  ItemCatalog(std::vector<ItemRecord> items, std::span<const RatingRecord> train);

  const ItemRecord* find(const std::string& item_id) const;
  const ItemRecord& at(const std::string& item_id) const;
  std::string title_of(const std::string& item_id) const;
  double global_mean() const { return global_mean_; }
  // All item ids in ascending order.
  const std::vector<std::string>& item_ids() const { return ids_; }
  std::size_t size() const { return items_.size(); }

 private:
  std::map<std::string, ItemRecord> items_;
  std::vector<std::string> ids_;
  double global_mean_ = 3.0;
};

}  // namespace alignsim
