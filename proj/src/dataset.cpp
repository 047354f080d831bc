#include "alignsim/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <unordered_map>

#include "alignsim/error.hpp"

namespace alignsim {

namespace {

const std::array<const char*, 21> kMovielensOccupations = {
    "other or not specified", "academic/educator", "artist", "clerical/admin",
    "college/grad student", "customer service", "doctor/health care",
    "executive/managerial", "farmer", "homemaker", "K-12 student", "lawyer",
    "programmer", "retired", "sales/marketing", "scientist", "self-employed",
    "technician/engineer", "tradesman/craftsman", "unemployed", "writer"};

bool parse_int64(std::string_view s, std::int64_t* out) {
  s = trim(s);
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), *out);
  return ec == std::errc() && p == s.data() + s.size();
}

// Accepts "4" and "4.0"; anything non-integral is rejected.
bool parse_rating_value(std::string_view s, std::int64_t* out) {
  if (parse_int64(s, out)) return true;
  s = trim(s);
  double d = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), d);
  if (ec != std::errc() || p != s.data() + s.size()) return false;
  if (d != std::floor(d)) return false;
  *out = static_cast<std::int64_t>(d);
  return true;
}

// Minimal RFC 4180 field splitter.
std::vector<std::string> split_csv_line(std::string_view line, std::size_t lineno) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) throw ParseError(lineno, "unterminated quoted field");
  fields.push_back(std::move(cur));
  return fields;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

RatingRecord make_record(std::string user, std::string item, std::string_view rating,
                         std::string_view timestamp, std::size_t lineno) {
  std::int64_t r = 0;
  std::int64_t ts = 0;
  if (trim(user).empty() || trim(item).empty()) throw ParseError(lineno, "empty identifier");
  if (!parse_rating_value(rating, &r)) throw ParseError(lineno, "bad rating '" + std::string(rating) + "'");
  if (!parse_int64(timestamp, &ts)) throw ParseError(lineno, "bad timestamp '" + std::string(timestamp) + "'");
  if (r < 1 || r > 5) {
    throw ValidationError("line " + std::to_string(lineno) + ": rating " + std::to_string(r) +
                          " outside 1..5");
  }
  if (ts < 0) throw ValidationError("line " + std::to_string(lineno) + ": negative timestamp");
  return RatingRecord{std::string(trim(user)), std::string(trim(item)), static_cast<int>(r), ts};
}

}  // namespace

CsvColumns CsvColumns::amazon_book() {
  return CsvColumns{"reviewerID", "asin", "overall", "unixReviewTime"};
}

std::vector<RatingRecord> deduplicate_latest(std::vector<RatingRecord> records) {
  std::unordered_map<std::string, std::size_t> first;
  std::vector<RatingRecord> out;
  out.reserve(records.size());
  for (auto& r : records) {
    std::string key = r.user_id + '\x1f' + r.item_id;
    auto it = first.find(key);
    if (it == first.end()) {
      first.emplace(std::move(key), out.size());
      out.push_back(std::move(r));
    } else if (r.timestamp >= out[it->second].timestamp) {
      out[it->second] = std::move(r);
    }
  }
  return out;
}

std::vector<RatingRecord> parse_ratings(std::istream& in, RatingFormat format,
                                        const CsvColumns& columns) {
  std::vector<RatingRecord> records;
  std::string line;
  std::size_t lineno = 0;
  if (format == RatingFormat::movielens_dat) {
    while (std::getline(in, line)) {
      ++lineno;
      line = strip_cr(std::move(line));
      if (trim(line).empty()) continue;
      auto f = split(line, "::");
      if (f.size() != 4) throw ParseError(lineno, "expected UserID::MovieID::Rating::Timestamp");
      records.push_back(make_record(f[0], f[1], f[2], f[3], lineno));
    }
    return deduplicate_latest(std::move(records));
  }

  // csv
  std::array<std::size_t, 4> idx{};
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(std::move(line));
    if (trim(line).empty()) continue;
    auto f = split_csv_line(line, lineno);
    if (!have_header) {
      const std::array<const std::string*, 4> want = {&columns.user, &columns.item, &columns.rating,
                                                      &columns.timestamp};
      for (std::size_t k = 0; k < 4; ++k) {
        auto it = std::find_if(f.begin(), f.end(),
                               [&](const std::string& h) { return trim(h) == *want[k]; });
        if (it == f.end()) throw ParseError(lineno, "csv header lacks column '" + *want[k] + "'");
        idx[k] = static_cast<std::size_t>(it - f.begin());
      }
      have_header = true;
      continue;
    }
    std::size_t need = *std::max_element(idx.begin(), idx.end());
    if (f.size() <= need) throw ParseError(lineno, "too few csv fields");
    records.push_back(make_record(f[idx[0]], f[idx[1]], f[idx[2]], f[idx[3]], lineno));
  }
  return deduplicate_latest(std::move(records));
}

std::vector<ItemRecord> parse_movies(std::istream& in) {
  std::vector<ItemRecord> items;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(std::move(line));
    if (trim(line).empty()) continue;
    auto f = split(ensure_utf8(line), "::");
    if (f.size() != 3) throw ParseError(lineno, "expected MovieID::Title::Genres");
    ItemRecord item;
    item.item_id = std::string(trim(f[0]));
    item.title = std::string(trim(f[1]));
    if (item.item_id.empty()) throw ParseError(lineno, "empty MovieID");
    if (item.title.empty()) throw ValidationError("line " + std::to_string(lineno) + ": empty title");
    if (!trim(f[2]).empty()) {
      for (auto& g : split(f[2], "|")) {
        auto t = trim(g);
        if (!t.empty()) item.genres.emplace_back(t);
      }
    }
    items.push_back(std::move(item));
  }
  return items;
}

std::vector<UserRecord> parse_users(std::istream& in) {
  std::vector<UserRecord> users;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(std::move(line));
    if (trim(line).empty()) continue;
    auto f = split(line, "::");
    if (f.size() != 5) throw ParseError(lineno, "expected UserID::Gender::Age::Occupation::Zip-code");
    UserRecord u;
    u.user_id = std::string(trim(f[0]));
    std::int64_t v = 0;
    if (parse_int64(f[2], &v)) u.age = static_cast<int>(v);
    if (parse_int64(f[3], &v) && v >= 0 && v < static_cast<std::int64_t>(kMovielensOccupations.size())) {
      u.occupation = kMovielensOccupations[static_cast<std::size_t>(v)];
    } else if (!trim(f[3]).empty()) {
      u.occupation = ensure_utf8(trim(f[3]));
    }
    users.push_back(std::move(u));
  }
  return users;
}

void write_ratings_csv(std::ostream& out, std::span<const RatingRecord> records) {
  out << "user_id,item_id,rating,timestamp\n";
  for (const auto& r : records) {
    out << r.user_id << ',' << r.item_id << ',' << r.rating << ',' << r.timestamp << '\n';
  }
}

SplitCorpus time_split(std::vector<RatingRecord> records, std::array<double, 3> fractions) {
  if (records.size() < 10) {
    throw DegenerateSplitError("time split needs at least 10 records, got " +
                               std::to_string(records.size()));
  }
  double total = fractions[0] + fractions[1] + fractions[2];
  if (fractions[0] <= 0 || fractions[1] < 0 || fractions[2] < 0 || std::abs(total - 1.0) > 1e-9) {
    throw ValidationError("split fractions must be non-negative and sum to 1");
  }
  std::sort(records.begin(), records.end(), [](const RatingRecord& a, const RatingRecord& b) {
    if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
    if (a.user_id != b.user_id) return a.user_id < b.user_id;
    return a.item_id < b.item_id;
  });
  const double n = static_cast<double>(records.size());
  auto train_end = static_cast<std::size_t>(std::llround(n * fractions[0]));
  auto val_end = static_cast<std::size_t>(std::llround(n * (fractions[0] + fractions[1])));
  val_end = std::min(val_end, records.size());

  SplitCorpus s;
  auto begin = records.begin();
  s.train.assign(std::make_move_iterator(begin), std::make_move_iterator(begin + static_cast<std::ptrdiff_t>(train_end)));
  s.validation.assign(std::make_move_iterator(begin + static_cast<std::ptrdiff_t>(train_end)),
                      std::make_move_iterator(begin + static_cast<std::ptrdiff_t>(val_end)));
  s.test.assign(std::make_move_iterator(begin + static_cast<std::ptrdiff_t>(val_end)),
                std::make_move_iterator(records.end()));
  s.validation_start = s.validation.empty() ? s.train.back().timestamp : s.validation.front().timestamp;
  s.test_start = s.test.empty() ? s.validation_start : s.test.front().timestamp;
  return s;
}

InteractionMatrix interaction_matrix(std::span<const RatingRecord> records) {
  InteractionMatrix m;
  std::map<std::pair<std::string, std::string>, std::int64_t> seen_at;
  for (const auto& r : records) {
    auto key = std::make_pair(r.user_id, r.item_id);
    auto it = seen_at.find(key);
    if (it != seen_at.end() && it->second > r.timestamp) continue;
    seen_at[key] = r.timestamp;
    m[r.user_id][r.item_id] = r.rating;
  }
  return m;
}

std::map<std::string, std::vector<RatingRecord>> group_by_user(std::span<const RatingRecord> records) {
  std::map<std::string, std::vector<RatingRecord>> out;
  for (const auto& r : records) out[r.user_id].push_back(r);
  for (auto& [_, h] : out) {
    std::sort(h.begin(), h.end(), [](const RatingRecord& a, const RatingRecord& b) {
      if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
      return a.item_id < b.item_id;
    });
  }
  return out;
}

json to_json(const RatingRecord& r) {
  return json{{"user_id", r.user_id}, {"item_id", r.item_id}, {"rating", r.rating}, {"timestamp", r.timestamp}};
}

RatingRecord rating_from_json(const json& j) {
  RatingRecord r{j.at("user_id").get<std::string>(), j.at("item_id").get<std::string>(),
                 j.at("rating").get<int>(), j.at("timestamp").get<std::int64_t>()};
  if (r.rating < 1 || r.rating > 5) throw ValidationError("rating outside 1..5 in store");
  return r;
}

json to_json(const ItemRecord& item) {
  return json{{"item_id", item.item_id}, {"title", item.title}, {"genres", item.genres},
              {"description", item.description}};
}

ItemRecord item_from_json(const json& j) {
  ItemRecord item;
  item.item_id = j.at("item_id").get<std::string>();
  item.title = j.at("title").get<std::string>();
  item.genres = j.value("genres", std::vector<std::string>{});
  item.description = j.value("description", std::string{});
  return item;
}

json to_json(const UserRecord& user) {
  json j{{"user_id", user.user_id}};
  j["age"] = user.age ? json(*user.age) : json(nullptr);
  j["occupation"] = user.occupation ? json(*user.occupation) : json(nullptr);
  return j;
}

UserRecord user_from_json(const json& j) {
  UserRecord u;
  u.user_id = j.at("user_id").get<std::string>();
  if (j.contains("age") && !j["age"].is_null()) u.age = j["age"].get<int>();
  if (j.contains("occupation") && !j["occupation"].is_null()) u.occupation = j["occupation"].get<std::string>();
  return u;
}

void write_ratings_jsonl(const std::filesystem::path& path, std::span<const RatingRecord> records) {
  std::vector<json> lines;
  lines.reserve(records.size());
  for (const auto& r : records) lines.push_back(to_json(r));
  write_jsonl(path, lines);
}

std::vector<RatingRecord> read_ratings_jsonl(const std::filesystem::path& path) {
  std::vector<RatingRecord> out;
  for (const auto& j : read_jsonl(path)) out.push_back(rating_from_json(j));
  return out;
}

std::string genre_list(const ItemRecord& item) {
  return join(item.genres, ", ");
}

std::string item_summary(const ItemRecord& item) {
  if (item.description.empty()) {
    return item.genres.empty() ? std::string("No description available.") : "Genres: " + genre_list(item);
  }
  // first sentence
  auto pos = item.description.find(". ");
  if (pos != std::string::npos && pos + 1 < item.description.size()) return item.description.substr(0, pos + 1);
  return item.description;
}

std::string item_detail(const ItemRecord& item) {
  std::string genres = item.genres.empty() ? std::string("unknown") : genre_list(item);
  if (item.description.empty()) return item.title + ". Genres: " + genres + ".";
  return item.description + " Genres: " + genres + ".";
}

ItemCatalog::ItemCatalog(std::vector<ItemRecord> items, std::span<const RatingRecord> train) {
  for (auto& item : items) {
    std::string id = item.item_id;
    items_.insert_or_assign(std::move(id), std::move(item));
  }
  double sum = 0;
  for (const auto& r : train) {
    sum += r.rating;
    if (!items_.count(r.item_id)) items_.emplace(r.item_id, ItemRecord{r.item_id, "Item " + r.item_id, {}, {}});
  }
  if (!train.empty()) global_mean_ = sum / static_cast<double>(train.size());
  ids_.reserve(items_.size());
  for (const auto& [id, _] : items_) ids_.push_back(id);
}

const ItemRecord* ItemCatalog::find(const std::string& item_id) const {
  auto it = items_.find(item_id);
  return it == items_.end() ? nullptr : &it->second;
}

const ItemRecord& ItemCatalog::at(const std::string& item_id) const {
  const ItemRecord* item = find(item_id);
  if (!item) throw ValidationError("unknown item '" + item_id + "'");
  return *item;
}

std::string ItemCatalog::title_of(const std::string& item_id) const {
  const ItemRecord* item = find(item_id);
  return item ? item->title : "Item " + item_id;
}

}  // namespace alignsim
