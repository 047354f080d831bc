#include "alignsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "alignsim/error.hpp"

namespace alignsim {

namespace {

double ratio(double num, double den, bool& zero_division) {
  if (den == 0) {
    zero_division = true;
    return 0;
  }
  return num / den;
}

double mean_of(std::span<const double> v) {
  if (v.empty()) return 0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

ConfusionCounts confusion(const std::vector<bool>& predicted, const std::vector<bool>& actual) {
  if (predicted.size() != actual.size()) throw ValidationError("predicted and actual label counts differ");
  ConfusionCounts c;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] && actual[i]) ++c.tp;
    else if (predicted[i]) ++c.fp;
    else if (actual[i]) ++c.fn;
    else ++c.tn;
  }
  return c;
}

ClassificationMetrics classification_metrics(const ConfusionCounts& c) {
  ClassificationMetrics m;
  m.counts = c;
  bool z = false;
  const auto total = static_cast<double>(c.tp + c.fp + c.tn + c.fn);
  m.accuracy = ratio(static_cast<double>(c.tp + c.tn), total, z);
  m.precision = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp), z);
  m.recall = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn), z);
  m.f1 = ratio(2 * m.precision * m.recall, m.precision + m.recall, z);
  m.zero_division = z;
  return m;
}

ClassificationMetrics classification_metrics(const std::vector<bool>& predicted, const std::vector<bool>& actual) {
  if (predicted.empty()) throw ValidationError("classification metrics need at least one pair");
  return classification_metrics(confusion(predicted, actual));
}

AlignmentTaskSet build_alignment_task(const std::map<std::string, std::vector<RatingRecord>>& interactions,
                                      std::span<const std::string> catalog_items, int m, int items_per_agent,
                                      std::uint64_t seed) {
  if (m < 1) throw ValidationError("ratio m must be >= 1");
  const int positives = items_per_agent / (1 + m);
  const int negatives = items_per_agent - positives;
  if (positives < 1) throw ValidationError("items per agent too small for ratio 1:" + std::to_string(m));
  std::vector<std::string> catalog(catalog_items.begin(), catalog_items.end());
  std::sort(catalog.begin(), catalog.end());
  catalog.erase(std::unique(catalog.begin(), catalog.end()), catalog.end());

  // Partial Fisher-Yates: the first k entries become a uniform sample.
  auto sample = [](std::vector<std::string>& pool, std::size_t k, std::mt19937_64& rng) {
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(k);
  };

  AlignmentTaskSet out;
  for (const auto& [user, records] : interactions) {
    std::set<std::string> seen;
    for (const auto& r : records) seen.insert(r.item_id);
    std::vector<std::string> pos(seen.begin(), seen.end());
    std::vector<std::string> neg;
    for (const auto& id : catalog) {
      if (!seen.count(id)) neg.push_back(id);
    }
    if (pos.size() < static_cast<std::size_t>(positives) || neg.size() < static_cast<std::size_t>(negatives)) {
      out.skipped.push_back(user);
      continue;
    }
    std::mt19937_64 rng(derive_seed(seed, "alignment:" + user));
    sample(pos, static_cast<std::size_t>(positives), rng);
    sample(neg, static_cast<std::size_t>(negatives), rng);
    std::vector<std::pair<std::string, bool>> items;
    for (auto& id : pos) items.emplace_back(std::move(id), true);
    for (auto& id : neg) items.emplace_back(std::move(id), false);
    std::shuffle(items.begin(), items.end(), rng);
    AlignmentTask task;
    task.user_id = user;
    for (auto& [id, label] : items) {
      task.items.push_back(std::move(id));
      task.interacted.push_back(label);
    }
    out.tasks.push_back(std::move(task));
  }
  return out;
}

RatingErrors rating_errors(std::span<const double> predictions, std::span<const double> truth) {
  if (predictions.size() != truth.size()) {
    throw ValidationError("prediction count " + std::to_string(predictions.size()) + " != truth count " +
                          std::to_string(truth.size()));
  }
  if (predictions.empty()) throw ValidationError("rating errors need at least one pair");
  double sq = 0;
  double abs = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    double e = predictions[i] - truth[i];
    sq += e * e;
    abs += std::fabs(e);
  }
  const auto n = static_cast<double>(predictions.size());
  return {std::sqrt(sq / n), abs / n};
}

ActionRecord action_record(const Action& a) {
  switch (a.tag) {
    case ActionTag::next_page: return {"click", "next_page", ""};
    case ActionTag::previous_page: return {"click", "previous_page", ""};
    case ActionTag::click_item: return {"click", "item", a.item_id};
    case ActionTag::rate: return {"input", "rating", a.item_id + ":" + std::to_string(a.value)};
    case ActionTag::search: return {"input", "search", a.query};
    case ActionTag::exit: return {"terminate", "exit", ""};
  }
  return {"terminate", "exit", ""};
}

LabelScores label_scores(std::span<const std::string> predicted, std::span<const std::string> actual) {
  if (predicted.size() != actual.size()) throw ValidationError("label sequences differ in length");
  LabelScores s;
  s.support = actual.size();
  if (actual.empty()) return s;
  std::set<std::string> labels(actual.begin(), actual.end());
  labels.insert(predicted.begin(), predicted.end());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) correct += predicted[i] == actual[i];
  s.accuracy = static_cast<double>(correct) / static_cast<double>(actual.size());
  double macro = 0;
  double weighted = 0;
  for (const auto& label : labels) {
    double tp = 0, fp = 0, fn = 0, support = 0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
      bool p = predicted[i] == label;
      bool t = actual[i] == label;
      tp += p && t;
      fp += p && !t;
      fn += !p && t;
      support += t;
    }
    bool z = false;
    double precision = ratio(tp, tp + fp, z);
    double recall = ratio(tp, tp + fn, z);
    double f1 = ratio(2 * precision * recall, precision + recall, z);
    s.per_label_f1[label] = f1;
    macro += f1;
    weighted += f1 * support;
  }
  s.macro_f1 = macro / static_cast<double>(labels.size());
  s.weighted_f1 = weighted / static_cast<double>(actual.size());
  return s;
}

ActionAlignment action_alignment(std::span<const ActionRecordPair> pairs) {
  ActionAlignment out;
  out.pairs = pairs.size();
  if (pairs.empty()) return out;
  std::size_t exact = 0;
  std::vector<std::string> pt, at, pc, ac, po, ao;
  for (const auto& p : pairs) {
    exact += p.predicted == p.actual;
    pt.push_back(p.predicted.type);
    at.push_back(p.actual.type);
    if (p.actual.type == "click") {
      ac.push_back(p.actual.subtype);
      pc.push_back(p.predicted.type == "click" ? p.predicted.subtype : "not_click");
    }
    if (p.actual.type == "terminate") {
      ao.push_back(p.actual.subtype);
      po.push_back(p.predicted.type == "terminate" ? p.predicted.subtype : "continue");
    }
  }
  out.exact_match_accuracy = static_cast<double>(exact) / static_cast<double>(pairs.size());
  out.action_type_macro_f1 = label_scores(pt, at).macro_f1;
  if (!ac.empty()) out.click_subtype_weighted_f1 = label_scores(pc, ac).weighted_f1;
  if (!ao.empty()) {
    auto s = label_scores(po, ao);
    out.session_outcome_weighted_f1 = s.weighted_f1;
    out.session_outcome_accuracy = s.accuracy;
  }
  return out;
}

double purchase_rate_gap(double human_pct, double agent_pct) { return std::fabs(human_pct - agent_pct); }

SessionStats session_stats(std::span<const SessionLog> logs, const SessionStatsConfig& config) {
  if (logs.empty()) throw ValidationError("session statistics need at least one log");
  SessionStats s;
  s.sessions = logs.size();
  std::vector<double> pages, exits, views, likes, like_ratios, sats;
  std::size_t liked_sessions = 0;
  for (const auto& log : logs) {
    pages.push_back(log.pages_visited);
    exits.push_back(log.exit_page);
    if (log.displayed_items > 0) {
      views.push_back(static_cast<double>(log.interacted_items) / static_cast<double>(log.displayed_items));
    }
    int n_like = 0;
    for (const auto& [item, r] : log.ratings) {
      if (r >= 1 && r <= 5) ++s.rating_histogram[static_cast<std::size_t>(r - 1)];
      if (r > config.like_threshold) ++n_like;
    }
    likes.push_back(n_like);
    if (!log.ratings.empty()) like_ratios.push_back(static_cast<double>(n_like) / static_cast<double>(log.ratings.size()));
    if (log.satisfaction) {
      sats.push_back(*log.satisfaction);
      if (*log.satisfaction > config.satisfaction_like_threshold) ++liked_sessions;
    }
  }
  s.pages_per_session = mean_of(pages);
  s.exit_page_mean = mean_of(exits);
  s.view_ratio = mean_of(views);
  s.like_count_mean = mean_of(likes);
  s.like_ratio = mean_of(like_ratios);
  if (!sats.empty()) {
    s.satisfaction_mean = mean_of(sats);
    s.liked_session_ratio = static_cast<double>(liked_sessions) / static_cast<double>(sats.size());
  }
  if (config.human_purchase_rate_pct) {
    s.purchase_rate_gap = purchase_rate_gap(*config.human_purchase_rate_pct, config.agent_purchase_rate_pct);
  }
  return s;
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("spearman inputs differ in length");
  if (x.size() < 2) throw ValidationError("spearman needs at least two observations");
  auto rx = average_ranks(x);
  auto ry = average_ranks(y);
  double mx = mean_of(rx), my = mean_of(ry);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    double dx = rx[i] - mx, dy = ry[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) throw UndefinedCorrelationError("spearman correlation undefined: constant ranks");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

Divergence distribution_divergence(std::span<const double> agent, std::span<const double> human) {
  if (agent.size() != 5 || human.size() != 5) throw ValidationError("histograms must have bins 1..5");
  auto total = [](std::span<const double> h) {
    double t = 0;
    for (double v : h) {
      if (!(v >= 0)) throw ValidationError("histogram counts must be non-negative");
      t += v;
    }
    if (t <= 0) throw ValidationError("histogram is empty");
    return t;
  };
  const double ta = total(agent), th = total(human);
  Divergence d;
  double sum = 0;
  for (std::size_t b = 0; b < 5; ++b) {
    double gap = agent[b] / ta - human[b] / th;
    d.per_bin_gaps[b] = gap;
    sum += std::fabs(gap);
  }
  d.total_variation = 0.5 * sum;
  return d;
}

std::u32string canonicalize_text(std::string_view text) {
  auto cps = decode_utf8(text);
  std::u32string out;
  bool pending_space = false;
  for (char32_t c : cps) {
    bool ws = c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' || c == U'\v';
    if (ws) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(U' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t sub = prev[j - 1] + (a[i - 1] != b[j - 1]);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double edit_similarity(std::string_view a, std::string_view b) {
  auto ca = canonicalize_text(a);
  auto cb = canonicalize_text(b);
  std::size_t longest = std::max(ca.size(), cb.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(levenshtein(ca, cb)) / static_cast<double>(longest);
}

NextStateEval next_state_eval(std::span<const std::string> predicted_texts, std::span<const std::string> predicted_types,
                              std::span<const std::string> actual_texts, std::span<const std::string> actual_types) {
  const auto n = actual_texts.size();
  if (predicted_texts.size() != n || predicted_types.size() != n || actual_types.size() != n) {
    throw ValidationError("next-state inputs are not aligned");
  }
  NextStateEval out;
  out.pairs = n;
  if (n == 0) return out;
  out.page_type_f1 = label_scores(predicted_types, actual_types).macro_f1;
  double sum = 0;
  for (std::size_t i = 0; i < n; ++i) sum += edit_similarity(predicted_texts[i], actual_texts[i]);
  out.edit_similarity_mean = sum / static_cast<double>(n);
  return out;
}

}  // namespace alignsim
