#pragma once

// Straight-from-definition recomputations used as test oracles. Written
// independently of the library: no shared helpers beyond the record types.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "alignsim/dataset.hpp"

namespace alignsim::oracle {

struct PersonaTraits {
  std::string pickiness;
  int engagement = 0;
  double conformity = 0;
  int variety = 0;
};

inline std::map<std::string, PersonaTraits> persona_traits(const std::vector<RatingRecord>& train,
                                                           const std::vector<ItemRecord>& items) {
  std::map<std::string, std::pair<double, int>> item_sum;
  double total = 0;
  for (const auto& r : train) {
    item_sum[r.item_id].first += r.rating;
    item_sum[r.item_id].second += 1;
    total += r.rating;
  }
  const double global = total / static_cast<double>(train.size());
  auto quality = [&](const std::string& id) {
    auto it = item_sum.find(id);
    return it == item_sum.end() ? global : it->second.first / it->second.second;
  };
  std::map<std::string, std::vector<std::string>> genres;
  for (const auto& i : items) genres[i.item_id] = i.genres;

  std::map<std::string, std::vector<const RatingRecord*>> by_user;
  for (const auto& r : train) by_user[r.user_id].push_back(&r);

  std::map<std::string, PersonaTraits> out;
  for (const auto& [user, rs] : by_user) {
    PersonaTraits t;
    double sum = 0, sq = 0;
    std::set<std::string> rated, gs;
    for (const auto* r : rs) {
      sum += r->rating;
      double d = r->rating - quality(r->item_id);
      sq += d * d;
      rated.insert(r->item_id);
      for (const auto& g : genres[r->item_id]) gs.insert(g);
    }
    double mean = sum / rs.size();
    t.pickiness = mean >= 4.5 ? "not_picky" : (mean >= 3.5 ? "moderately_picky" : "extremely_picky");
    t.engagement = static_cast<int>(rated.size());
    t.conformity = sq / rs.size();
    t.variety = static_cast<int>(gs.size());
    out[user] = t;
  }
  return out;
}

struct Confusion {
  long tp = 0, fp = 0, tn = 0, fn = 0;
};

inline Confusion confusion(const std::vector<bool>& pred, const std::vector<bool>& actual) {
  Confusion c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] && actual[i]) c.tp++;
    if (pred[i] && !actual[i]) c.fp++;
    if (!pred[i] && !actual[i]) c.tn++;
    if (!pred[i] && actual[i]) c.fn++;
  }
  return c;
}

inline double safe_div(double a, double b) { return b == 0 ? 0 : a / b; }

inline double rmse(const std::vector<double>& p, const std::vector<double>& t) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - t[i]) * (p[i] - t[i]);
  return std::sqrt(s / p.size());
}

inline double mae(const std::vector<double>& p, const std::vector<double>& t) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::fabs(p[i] - t[i]);
  return s / p.size();
}

// Rank of x[i]: 1 + #smaller + (#equal - 1) / 2, computed by pairwise comparison.
inline std::vector<double> ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double smaller = 0, equal = 0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (x[j] < x[i]) smaller += 1;
      if (x[j] == x[i]) equal += 1;
    }
    r[i] = 1 + smaller + (equal - 1) / 2;
  }
  return r;
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += rx[i] / n;
    my += ry[i] / n;
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

inline double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  double sp = 0, sq = 0;
  for (double v : p) sp += v;
  for (double v : q) sq += v;
  double tv = 0;
  for (std::size_t b = 0; b < p.size(); ++b) tv += std::fabs(p[b] / sp - q[b] / sq);
  return tv / 2;
}

// Memoised recursive edit distance over code points.
inline std::size_t levenshtein(const std::u32string& a, const std::u32string& b) {
  std::vector<std::vector<long>> memo(a.size() + 1, std::vector<long>(b.size() + 1, -1));
  auto rec = [&](auto&& self, std::size_t i, std::size_t j) -> long {
    if (i == 0) return static_cast<long>(j);
    if (j == 0) return static_cast<long>(i);
    long& m = memo[i][j];
    if (m >= 0) return m;
    long sub = self(self, i - 1, j - 1) + (a[i - 1] == b[j - 1] ? 0 : 1);
    m = std::min({self(self, i - 1, j) + 1, self(self, i, j - 1) + 1, sub});
    return m;
  };
  return static_cast<std::size_t>(rec(rec, a.size(), b.size()));
}

}  // namespace alignsim::oracle

#include "alignsim/recommender.hpp"

namespace alignsim::oracle {

// 5x5 toy corpus with a few missing cells.
inline std::vector<RatingRecord> toy_corpus() {
  std::vector<RatingRecord> out;
  const int grid[5][5] = {{5, 3, 0, 1, 4}, {4, 0, 0, 1, 2}, {1, 1, 0, 5, 4}, {1, 0, 0, 4, 3}, {0, 1, 5, 4, 0}};
  for (int u = 0; u < 5; ++u) {
    for (int i = 0; i < 5; ++i) {
      if (grid[u][i]) out.push_back({"u" + std::to_string(u), "i" + std::to_string(i), grid[u][i], u * 5 + i});
    }
  }
  return out;
}

// Largest |analytic - numeric| / max(|analytic|, |numeric|) over parameters
// whose gradient magnitude exceeds `floor`; numeric is a central difference.
inline double max_gradient_relative_error(MfModel model, const std::vector<RatingRecord>& records, double l2,
                                          double h = 1e-5, double floor = 1e-6) {
  auto analytic = model.gradient(records, l2);
  auto params = model.parameters();
  double worst = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double saved = params[k];
    params[k] = saved + h;
    const double up = model.loss(records, l2);
    params[k] = saved - h;
    const double down = model.loss(records, l2);
    params[k] = saved;
    const double numeric = (up - down) / (2 * h);
    const double scale = std::max(std::fabs(analytic[k]), std::fabs(numeric));
    if (scale < floor) continue;
    worst = std::max(worst, std::fabs(analytic[k] - numeric) / scale);
  }
  return worst;
}

}  // namespace alignsim::oracle
