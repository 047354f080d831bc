#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "alignsim/dataset.hpp"

namespace alignsim {

enum class RecommenderKind { random, pop, mf };

std::string_view to_string(RecommenderKind kind);
RecommenderKind recommender_kind_from_string(std::string_view s);

// A ranking strategy over a fixed catalog. Implementations are immutable after
// construction and safe to share across sessions.
class Recommender {
 public:
  virtual ~Recommender() = default;
  virtual RecommenderKind kind() const = 0;
  // Whole catalog, best first; equal scores break by ascending item_id.
  virtual std::vector<std::string> rank(const std::string& user_id) const = 0;
  virtual json to_json() const = 0;
};

// Page `page` (1-based) of size `page_size` from the ranking with `exclude` removed first.
std::vector<std::string> recommend(const Recommender& model, const std::string& user_id, int page,
                                   int page_size, const std::set<std::string>& exclude = {});

// Slice helper shared with the environment's cached listings.
std::vector<std::string> page_slice(std::span<const std::string> ranked, int page, int page_size);

class RandomRecommender final : public Recommender {
 public:
  RandomRecommender(std::vector<std::string> items, std::uint64_t seed);
  RecommenderKind kind() const override { return RecommenderKind::random; }
  std::vector<std::string> rank(const std::string& user_id) const override;
  json to_json() const override;

 private:
  std::vector<std::string> items_;  // ascending
  std::uint64_t seed_;
};

class PopRecommender final : public Recommender {
 public:
  PopRecommender(std::span<const RatingRecord> train, std::vector<std::string> catalog_items);
  explicit PopRecommender(std::map<std::string, int> counts);
  RecommenderKind kind() const override { return RecommenderKind::pop; }
  std::vector<std::string> rank(const std::string& user_id) const override;
  json to_json() const override;
  const std::map<std::string, int>& counts() const { return counts_; }

 private:
  std::map<std::string, int> counts_;
  std::vector<std::string> ranking_;
};

struct MfHyperParams {
  int dim = 32;
  double learning_rate = 0.005;
  double l2 = 0.02;
  int epochs = 20;
  double init_std = 0.01;
  std::uint64_t seed = 0;
};

// Biased matrix factorisation: r_hat = mu + b_u + b_i + q_i . p_u.
//
// Parameters live in one flat vector laid out as
//   [b_u for every user][b_i for every item][p_u rows][q_i rows]
// so gradients and finite-difference checks can address them uniformly.
class MfModel final : public Recommender {
 public:
  MfModel(std::vector<std::string> users, std::vector<std::string> items, int dim, double global_mean);

  RecommenderKind kind() const override { return RecommenderKind::mf; }
  std::vector<std::string> rank(const std::string& user_id) const override;
  json to_json() const override;
  static MfModel from_json(const json& j);

  double predict(const std::string& user_id, const std::string& item_id) const;
  double predict_index(std::size_t u, std::size_t i) const;

  // Regularised objective  sum_(u,i) [ 1/2 (r - r_hat)^2 + l2/2 (b_u^2 + b_i^2 + |p_u|^2 + |q_i|^2) ]
  double loss(std::span<const RatingRecord> records, double l2) const;
  // Analytic gradient of loss() in the flat parameter layout.
  std::vector<double> gradient(std::span<const RatingRecord> records, double l2) const;

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  int dim() const { return dim_; }
  double global_mean() const { return global_mean_; }
  std::size_t user_count() const { return users_.size(); }
  std::size_t item_count() const { return items_.size(); }
  std::optional<std::size_t> user_index(const std::string& id) const;
  std::optional<std::size_t> item_index(const std::string& id) const;

  std::size_t user_bias_offset(std::size_t u) const { return u; }
  std::size_t item_bias_offset(std::size_t i) const { return users_.size() + i; }
  std::size_t user_factor_offset(std::size_t u) const {
    return users_.size() + items_.size() + u * static_cast<std::size_t>(dim_);
  }
  std::size_t item_factor_offset(std::size_t i) const {
    return users_.size() + items_.size() + (users_.size() + i) * static_cast<std::size_t>(dim_);
  }

  const MfHyperParams& hyperparams() const { return hyper_; }
  double train_rmse() const { return train_rmse_; }

 private:
  friend MfModel train_mf(std::span<const RatingRecord>, const MfHyperParams&, std::span<const std::string>);

  std::vector<std::string> users_;
  std::vector<std::string> items_;
  std::unordered_map<std::string, std::size_t> user_idx_;
  std::unordered_map<std::string, std::size_t> item_idx_;
  int dim_;
  double global_mean_;
  std::vector<double> params_;
  MfHyperParams hyper_;
  double train_rmse_ = 0;
};

// SGD over a seeded shuffle of the training records each epoch. Items in
// `catalog_items` without training ratings still get (untrained) parameters so
// they can be ranked.
MfModel train_mf(std::span<const RatingRecord> train, const MfHyperParams& params,
                 std::span<const std::string> catalog_items = {});

std::unique_ptr<Recommender> recommender_from_json(const json& j);

}  // namespace alignsim
