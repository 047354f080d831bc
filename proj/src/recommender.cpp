#include "alignsim/recommender.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "alignsim/error.hpp"

namespace alignsim {

std::string_view to_string(RecommenderKind kind) {
  switch (kind) {
    case RecommenderKind::random: return "random";
    case RecommenderKind::pop: return "pop";
    case RecommenderKind::mf: return "mf";
  }
  return "mf";
}

RecommenderKind recommender_kind_from_string(std::string_view s) {
  if (s == "random") return RecommenderKind::random;
  if (s == "pop") return RecommenderKind::pop;
  if (s == "mf") return RecommenderKind::mf;
  throw ValidationError("unknown recommender kind '" + std::string(s) + "'");
}

std::vector<std::string> page_slice(std::span<const std::string> ranked, int page, int page_size) {
  if (page < 1) throw ValidationError("page number must be >= 1");
  if (page_size < 1) throw ValidationError("page size must be >= 1");
  std::size_t begin = static_cast<std::size_t>(page - 1) * static_cast<std::size_t>(page_size);
  if (begin >= ranked.size()) return {};
  std::size_t end = std::min(ranked.size(), begin + static_cast<std::size_t>(page_size));
  return {ranked.begin() + static_cast<std::ptrdiff_t>(begin), ranked.begin() + static_cast<std::ptrdiff_t>(end)};
}

std::vector<std::string> recommend(const Recommender& model, const std::string& user_id, int page,
                                   int page_size, const std::set<std::string>& exclude) {
  std::vector<std::string> ranked = model.rank(user_id);
  if (!exclude.empty()) {
    std::erase_if(ranked, [&](const std::string& id) { return exclude.count(id) > 0; });
  }
  return page_slice(ranked, page, page_size);
}

namespace {

// Descending score, ascending id on ties.
std::vector<std::string> rank_by_score(const std::vector<std::string>& ids, const std::vector<double>& scores) {
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return ids[a] < ids[b];
  });
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (auto k : order) out.push_back(ids[k]);
  return out;
}

std::vector<std::string> sorted_unique(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

// --- random -----------------------------------------------------------------

RandomRecommender::RandomRecommender(std::vector<std::string> items, std::uint64_t seed)
    : items_(sorted_unique(std::move(items))), seed_(seed) {}

std::vector<std::string> RandomRecommender::rank(const std::string& user_id) const {
  std::vector<std::string> out = items_;
  std::mt19937_64 rng(derive_seed(seed_, "random_rank:" + user_id));
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

json RandomRecommender::to_json() const {
  return json{{"format", "alignsim-recommender"}, {"version", 1}, {"kind", "random"},
              {"seed", seed_}, {"items", items_}};
}

// --- pop --------------------------------------------------------------------

namespace {

std::map<std::string, int> count_ratings(std::span<const RatingRecord> train,
                                         const std::vector<std::string>& catalog_items) {
  std::map<std::string, int> counts;
  for (const auto& id : catalog_items) counts.emplace(id, 0);
  for (const auto& r : train) ++counts[r.item_id];
  return counts;
}

}  // namespace

PopRecommender::PopRecommender(std::span<const RatingRecord> train, std::vector<std::string> catalog_items)
    : PopRecommender(count_ratings(train, catalog_items)) {}

PopRecommender::PopRecommender(std::map<std::string, int> counts) : counts_(std::move(counts)) {
  std::vector<std::string> ids;
  std::vector<double> scores;
  for (const auto& [id, c] : counts_) {
    ids.push_back(id);
    scores.push_back(c);
  }
  ranking_ = rank_by_score(ids, scores);
}

std::vector<std::string> PopRecommender::rank(const std::string&) const { return ranking_; }

json PopRecommender::to_json() const {
  json counts = json::object();
  for (const auto& [id, c] : counts_) counts[id] = c;
  return json{{"format", "alignsim-recommender"}, {"version", 1}, {"kind", "pop"}, {"counts", counts}};
}

// --- mf ---------------------------------------------------------------------

MfModel::MfModel(std::vector<std::string> users, std::vector<std::string> items, int dim, double global_mean)
    : users_(std::move(users)), items_(std::move(items)), dim_(dim), global_mean_(global_mean) {
  if (dim < 1) throw ValidationError("MF dimension must be >= 1");
  for (std::size_t u = 0; u < users_.size(); ++u) user_idx_.emplace(users_[u], u);
  for (std::size_t i = 0; i < items_.size(); ++i) item_idx_.emplace(items_[i], i);
  params_.assign(users_.size() + items_.size() + (users_.size() + items_.size()) * static_cast<std::size_t>(dim), 0.0);
  hyper_.dim = dim;
}

std::optional<std::size_t> MfModel::user_index(const std::string& id) const {
  auto it = user_idx_.find(id);
  if (it == user_idx_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> MfModel::item_index(const std::string& id) const {
  auto it = item_idx_.find(id);
  if (it == item_idx_.end()) return std::nullopt;
  return it->second;
}

double MfModel::predict_index(std::size_t u, std::size_t i) const {
  const double* p = params_.data() + user_factor_offset(u);
  const double* q = params_.data() + item_factor_offset(i);
  double dot = 0;
  for (int k = 0; k < dim_; ++k) dot += p[k] * q[k];
  return global_mean_ + params_[user_bias_offset(u)] + params_[item_bias_offset(i)] + dot;
}

double MfModel::predict(const std::string& user_id, const std::string& item_id) const {
  auto u = user_index(user_id);
  auto i = item_index(item_id);
  if (u && i) return predict_index(*u, *i);
  double pred = global_mean_;
  if (u) pred += params_[user_bias_offset(*u)];
  if (i) pred += params_[item_bias_offset(*i)];
  return pred;
}

std::vector<std::string> MfModel::rank(const std::string& user_id) const {
  std::vector<double> scores(items_.size());
  auto u = user_index(user_id);
  for (std::size_t i = 0; i < items_.size(); ++i) {
    scores[i] = u ? predict_index(*u, i) : global_mean_ + params_[item_bias_offset(i)];
  }
  return rank_by_score(items_, scores);
}

double MfModel::loss(std::span<const RatingRecord> records, double l2) const {
  double total = 0;
  for (const auto& r : records) {
    auto u = user_index(r.user_id);
    auto i = item_index(r.item_id);
    if (!u || !i) throw ValidationError("loss over record outside the model");
    double e = r.rating - predict_index(*u, *i);
    double reg = params_[user_bias_offset(*u)] * params_[user_bias_offset(*u)] +
                 params_[item_bias_offset(*i)] * params_[item_bias_offset(*i)];
    const double* p = params_.data() + user_factor_offset(*u);
    const double* q = params_.data() + item_factor_offset(*i);
    for (int k = 0; k < dim_; ++k) reg += p[k] * p[k] + q[k] * q[k];
    total += 0.5 * e * e + 0.5 * l2 * reg;
  }
  return total;
}

std::vector<double> MfModel::gradient(std::span<const RatingRecord> records, double l2) const {
  std::vector<double> g(params_.size(), 0.0);
  for (const auto& r : records) {
    auto u = user_index(r.user_id);
    auto i = item_index(r.item_id);
    if (!u || !i) throw ValidationError("gradient over record outside the model");
    double e = r.rating - predict_index(*u, *i);
    g[user_bias_offset(*u)] += -e + l2 * params_[user_bias_offset(*u)];
    g[item_bias_offset(*i)] += -e + l2 * params_[item_bias_offset(*i)];
    const double* p = params_.data() + user_factor_offset(*u);
    const double* q = params_.data() + item_factor_offset(*i);
    double* gp = g.data() + user_factor_offset(*u);
    double* gq = g.data() + item_factor_offset(*i);
    for (int k = 0; k < dim_; ++k) {
      gp[k] += -e * q[k] + l2 * p[k];
      gq[k] += -e * p[k] + l2 * q[k];
    }
  }
  return g;
}

json MfModel::to_json() const {
  json users = json::array();
  for (std::size_t u = 0; u < users_.size(); ++u) {
    const double* p = params_.data() + user_factor_offset(u);
    users.push_back(json{{"id", users_[u]}, {"bias", params_[user_bias_offset(u)]},
                         {"factors", std::vector<double>(p, p + dim_)}});
  }
  json items = json::array();
  for (std::size_t i = 0; i < items_.size(); ++i) {
    const double* q = params_.data() + item_factor_offset(i);
    items.push_back(json{{"id", items_[i]}, {"bias", params_[item_bias_offset(i)]},
                         {"factors", std::vector<double>(q, q + dim_)}});
  }
  return json{{"format", "alignsim-recommender"},
              {"version", 1},
              {"kind", "mf"},
              {"dim", dim_},
              {"hyperparams",
               {{"dim", hyper_.dim},
                {"learning_rate", hyper_.learning_rate},
                {"l2", hyper_.l2},
                {"epochs", hyper_.epochs},
                {"init_std", hyper_.init_std},
                {"seed", hyper_.seed}}},
              {"global_mean", global_mean_},
              {"train_rmse", train_rmse_},
              {"users", users},
              {"items", items}};
}

MfModel MfModel::from_json(const json& j) {
  if (j.at("kind") != "mf") throw ValidationError("checkpoint is not an MF model");
  if (j.at("version").get<int>() != 1) throw ValidationError("unsupported MF checkpoint version");
  int dim = j.at("dim").get<int>();
  std::vector<std::string> users;
  std::vector<std::string> items;
  for (const auto& u : j.at("users")) users.push_back(u.at("id").get<std::string>());
  for (const auto& i : j.at("items")) items.push_back(i.at("id").get<std::string>());
  MfModel m(users, items, dim, j.at("global_mean").get<double>());
  auto load = [&](const json& row, std::size_t bias_off, std::size_t fac_off) {
    m.params_[bias_off] = row.at("bias").get<double>();
    auto f = row.at("factors").get<std::vector<double>>();
    if (static_cast<int>(f.size()) != dim) throw ValidationError("factor vector has wrong dimension");
    std::copy(f.begin(), f.end(), m.params_.begin() + static_cast<std::ptrdiff_t>(fac_off));
  };
  for (std::size_t u = 0; u < users.size(); ++u) load(j["users"][u], m.user_bias_offset(u), m.user_factor_offset(u));
  for (std::size_t i = 0; i < items.size(); ++i) load(j["items"][i], m.item_bias_offset(i), m.item_factor_offset(i));
  const auto& h = j.at("hyperparams");
  m.hyper_ = MfHyperParams{h.at("dim").get<int>(), h.at("learning_rate").get<double>(), h.at("l2").get<double>(),
                           h.at("epochs").get<int>(), h.at("init_std").get<double>(),
                           h.at("seed").get<std::uint64_t>()};
  m.train_rmse_ = j.value("train_rmse", 0.0);
  return m;
}

MfModel train_mf(std::span<const RatingRecord> train, const MfHyperParams& hp,
                 std::span<const std::string> catalog_items) {
  if (train.empty()) throw ValidationError("cannot train MF on an empty split");
  if (hp.epochs < 0) throw ValidationError("epochs must be >= 0");

  std::vector<std::string> users;
  std::vector<std::string> items(catalog_items.begin(), catalog_items.end());
  double sum = 0;
  for (const auto& r : train) {
    users.push_back(r.user_id);
    items.push_back(r.item_id);
    sum += r.rating;
  }
  MfModel m(sorted_unique(std::move(users)), sorted_unique(std::move(items)), hp.dim,
            sum / static_cast<double>(train.size()));
  m.hyper_ = hp;

  std::mt19937_64 rng(derive_seed(hp.seed, "mf_init"));
  std::normal_distribution<double> init(0.0, hp.init_std);
  const std::size_t factors_begin = m.user_factor_offset(0);
  for (std::size_t k = factors_begin; k < m.params_.size(); ++k) m.params_[k] = init(rng);

  struct Obs {
    std::size_t u, i;
    double r;
  };
  std::vector<Obs> obs;
  obs.reserve(train.size());
  for (const auto& r : train) obs.push_back({*m.user_index(r.user_id), *m.item_index(r.item_id), double(r.rating)});

  const int d = hp.dim;
  std::vector<double> p_old(static_cast<std::size_t>(d));
  std::mt19937_64 order_rng(derive_seed(hp.seed, "mf_order"));
  for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
    std::shuffle(obs.begin(), obs.end(), order_rng);
    double sse = 0;
    for (const auto& o : obs) {
      double e = o.r - m.predict_index(o.u, o.i);
      sse += e * e;
      double& bu = m.params_[m.user_bias_offset(o.u)];
      double& bi = m.params_[m.item_bias_offset(o.i)];
      bu += hp.learning_rate * (e - hp.l2 * bu);
      bi += hp.learning_rate * (e - hp.l2 * bi);
      double* p = m.params_.data() + m.user_factor_offset(o.u);
      double* q = m.params_.data() + m.item_factor_offset(o.i);
      std::copy(p, p + d, p_old.begin());
      for (int k = 0; k < d; ++k) {
        p[k] += hp.learning_rate * (e * q[k] - hp.l2 * p[k]);
        q[k] += hp.learning_rate * (e * p_old[static_cast<std::size_t>(k)] - hp.l2 * q[k]);
      }
    }
    if (!std::isfinite(sse)) throw TrainingError(epoch, "non-finite training loss (diverged)");
  }

  double sse = 0;
  for (const auto& o : obs) {
    double e = o.r - m.predict_index(o.u, o.i);
    sse += e * e;
  }
  m.train_rmse_ = std::sqrt(sse / static_cast<double>(obs.size()));
  if (!std::isfinite(m.train_rmse_)) throw TrainingError(hp.epochs, "non-finite final training loss");
  return m;
}

std::unique_ptr<Recommender> recommender_from_json(const json& j) {
  if (j.value("format", "") != "alignsim-recommender") throw ValidationError("not a recommender checkpoint");
  auto kind = recommender_kind_from_string(j.at("kind").get<std::string>());
  switch (kind) {
    case RecommenderKind::random:
      return std::make_unique<RandomRecommender>(j.at("items").get<std::vector<std::string>>(),
                                                 j.at("seed").get<std::uint64_t>());
    case RecommenderKind::pop: {
      std::map<std::string, int> counts;
      for (const auto& [id, c] : j.at("counts").items()) counts.emplace(id, c.get<int>());
      return std::make_unique<PopRecommender>(std::move(counts));
    }
    case RecommenderKind::mf: return std::make_unique<MfModel>(MfModel::from_json(j));
  }
  throw ValidationError("unknown recommender kind");
}

}  // namespace alignsim
