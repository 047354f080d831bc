#include "alignsim/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "alignsim/backends.hpp"
#include "alignsim/error.hpp"
#include "alignsim/harness.hpp"
#include "alignsim/metrics.hpp"
#include "alignsim/references.hpp"
#include "alignsim/rollout.hpp"
#include "alignsim/session.hpp"
#include "alignsim/synthetic.hpp"

namespace alignsim {

namespace fs = std::filesystem;

namespace {

constexpr const char* kInteractions = "interactions.jsonl";
constexpr const char* kTrain = "train.jsonl";
constexpr const char* kValidation = "validation.jsonl";
constexpr const char* kTest = "test.jsonl";
constexpr const char* kItems = "items.jsonl";
constexpr const char* kUsers = "users.jsonl";
constexpr const char* kPersonas = "personas.jsonl";
constexpr const char* kRecommender = "recommender.json";
constexpr const char* kRollouts = "rollouts.jsonl";
constexpr const char* kDemonstrations = "demonstrations.jsonl";
constexpr const char* kCounterfactuals = "counterfactuals.jsonl";
constexpr const char* kTrainingRecords = "training_records.jsonl";
constexpr const char* kSessions = "sessions";

// Collects input/output digests and writes the stage manifest.
class StageRun {
 public:
  StageRun(std::string stage, const RunConfig& config, const StageOptions& options)
      : stage_(std::move(stage)), config_(config), options_(options), out_(config.output_dir) {}

  fs::path path(const char* name) const { return out_ / name; }

  fs::path require(const char* name) {
    auto p = out_ / name;
    if (!fs::exists(p)) {
      throw ValidationError("missing artifact " + p.string() + "; run the stage that produces it first");
    }
    input(name, p);
    return p;
  }

  void input(const std::string& name, const fs::path& p) {
    if (fs::is_regular_file(p)) inputs_[name] = sha256_file(p);
  }
  void output(const std::string& name, const fs::path& p) { outputs_[name] = sha256_file(p); }

  void output_dir(const std::string& name, const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) outputs_[name + "/" + f.filename().string()] = sha256_file(f);
  }

  StageResult finish(json summary) {
    json manifest = {{"stage", stage_},
                     {"config", to_json(config_)},
                     {"options", to_json(options_)},
                     {"inputs", inputs_},
                     {"outputs", outputs_},
                     {"summary", summary}};
    auto p = out_ / ("manifest_" + stage_ + ".json");
    write_file(p, manifest.dump(2) + "\n");
    return {stage_, std::move(summary), p};
  }

 private:
  std::string stage_;
  const RunConfig& config_;
  const StageOptions& options_;
  fs::path out_;
  json inputs_ = json::object();
  json outputs_ = json::object();
};

template <typename T, typename F>
std::vector<json> to_lines(const std::vector<T>& values, F&& f) {
  std::vector<json> out;
  out.reserve(values.size());
  for (const auto& v : values) out.push_back(f(v));
  return out;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  return in;
}

std::vector<ItemRecord> read_items(const fs::path& p) {
  std::vector<ItemRecord> out;
  for (const auto& j : read_jsonl(p)) out.push_back(item_from_json(j));
  return out;
}

std::vector<UserRecord> read_users(const fs::path& p) {
  std::vector<UserRecord> out;
  for (const auto& j : read_jsonl(p)) out.push_back(user_from_json(j));
  return out;
}

std::vector<Transition> read_transitions(const fs::path& p) {
  std::vector<Transition> out;
  for (const auto& j : read_jsonl(p)) out.push_back(transition_from_json(j));
  return out;
}

std::vector<CounterfactualSet> read_counterfactuals(const fs::path& p) {
  std::vector<CounterfactualSet> out;
  for (const auto& j : read_jsonl(p)) out.push_back(counterfactual_from_json(j));
  return out;
}

std::vector<Persona> personas_or_throw(const fs::path& p) {
  auto personas = load_personas(p);
  if (personas.empty()) throw ValidationError("no personas in " + p.string());
  return personas;
}

// Seeded subset of [0, n) of size at most `limit`, in ascending order.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t limit, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (n <= limit) return idx;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < limit; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::unique_ptr<PolicyBackend> backend_for(const RunConfig& config) { return make_backend(config.backend); }

SessionConfig session_config(const RunConfig& config) {
  SessionConfig s;
  s.step_cap = config.session.step_cap;
  s.mode = config.prompt_mode();
  s.post_interview = config.session.post_interview;
  return s;
}

json errors_json(const RatingErrors& e) { return {{"rmse", e.rmse}, {"mae", e.mae}}; }

json metrics_json(const ClassificationMetrics& m) {
  return {{"accuracy", m.accuracy},
          {"precision", m.precision},
          {"recall", m.recall},
          {"f1", m.f1},
          {"zero_division", m.zero_division},
          {"counts", {{"tp", m.counts.tp}, {"fp", m.counts.fp}, {"tn", m.counts.tn}, {"fn", m.counts.fn}}}};
}

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

// ---------------------------------------------------------------- stages

StageResult stage_ingest(const RunConfig& config, const StageOptions& options) {
  StageRun run("ingest", config, options);
  std::vector<RatingRecord> ratings;
  std::vector<ItemRecord> items;
  std::vector<UserRecord> users;
  if (config.synthetic.enabled) {
    SyntheticOptions so;
    so.users = config.synthetic.users;
    so.items = config.synthetic.items;
    so.min_ratings = config.synthetic.min_ratings;
    so.max_ratings = config.synthetic.max_ratings;
    so.single_genre_users = config.synthetic.single_genre_users;
    so.seed = derive_seed(config.seed, "synthetic");
    auto corpus = make_synthetic_corpus(so);
    ratings = std::move(corpus.ratings);
    items = std::move(corpus.items);
    users = std::move(corpus.users);
  } else {
    auto format = config.data.format == "csv" ? RatingFormat::csv : RatingFormat::movielens_dat;
    auto columns = config.data.csv_preset == "amazon_book" ? CsvColumns::amazon_book() : CsvColumns{};
    auto in = open_input(config.data.ratings);
    ratings = parse_ratings(in, format, columns);
    run.input("ratings", config.data.ratings);
    if (!config.data.movies.empty()) {
      auto m = open_input(config.data.movies);
      items = parse_movies(m);
      run.input("movies", config.data.movies);
    }
    if (!config.data.users.empty()) {
      auto u = open_input(config.data.users);
      users = parse_users(u);
      run.input("users", config.data.users);
    }
  }
  if (ratings.empty()) throw ValidationError("no ratings parsed from the input");
  auto split = time_split(ratings, config.split);

  write_ratings_jsonl(run.path(kInteractions), ratings);
  write_ratings_jsonl(run.path(kTrain), split.train);
  write_ratings_jsonl(run.path(kValidation), split.validation);
  write_ratings_jsonl(run.path(kTest), split.test);
  write_jsonl(run.path(kItems), to_lines(items, [](const ItemRecord& i) { return to_json(i); }));
  write_jsonl(run.path(kUsers), to_lines(users, [](const UserRecord& u) { return to_json(u); }));
  for (const char* name : {kInteractions, kTrain, kValidation, kTest, kItems, kUsers}) {
    run.output(name, run.path(name));
  }
  std::set<std::string> distinct_users, distinct_items;
  for (const auto& r : ratings) {
    distinct_users.insert(r.user_id);
    distinct_items.insert(r.item_id);
  }
  return run.finish({{"ratings", ratings.size()},
                     {"users", distinct_users.size()},
                     {"items", distinct_items.size()},
                     {"train", split.train.size()},
                     {"validation", split.validation.size()},
                     {"test", split.test.size()},
                     {"validation_start", split.validation_start},
                     {"test_start", split.test_start},
                     {"source", config.synthetic.enabled ? "synthetic" : config.data.format}});
}

StageResult stage_persona(const RunConfig& config, const StageOptions& options) {
  StageRun run("persona", config, options);
  auto train = read_ratings_jsonl(run.require(kTrain));
  auto items = read_items(run.require(kItems));
  auto users = read_users(run.require(kUsers));
  auto interactions = read_ratings_jsonl(run.require(kInteractions));

  ItemCatalog catalog(items, train);
  ItemQualityTable qualities(train, catalog.item_ids());
  auto by_user = group_by_user(train);
  std::map<std::string, const UserRecord*> demographics;
  for (const auto& u : users) demographics[u.user_id] = &u;
  std::set<std::string> ids;
  for (const auto& r : interactions) ids.insert(r.user_id);
  for (const auto& u : users) ids.insert(u.user_id);

  const auto seed = derive_seed(config.seed, "persona");
  std::vector<Persona> personas;
  std::size_t degenerate = 0;
  for (const auto& id : ids) {
    auto it = by_user.find(id);
    std::span<const RatingRecord> history;
    if (it != by_user.end()) history = it->second;
    auto d = demographics.find(id);
    personas.push_back(
        build_persona(id, history, qualities, catalog, d == demographics.end() ? nullptr : d->second, seed));
    if (personas.back().conformity_degenerate) ++degenerate;
  }
  assign_habit_terciles(personas);
  write_jsonl(run.path(kPersonas), to_lines(personas, [](const Persona& p) { return to_json(p); }));
  run.output(kPersonas, run.path(kPersonas));

  std::map<std::string, int> pickiness_counts;
  for (const auto& p : personas) ++pickiness_counts[std::string(to_string(p.pickiness))];
  return run.finish({{"personas", personas.size()}, {"empty_histories", degenerate}, {"pickiness", pickiness_counts}});
}

StageResult stage_train_rec(const RunConfig& config, const StageOptions& options) {
  StageRun run("train-rec", config, options);
  auto train = read_ratings_jsonl(run.require(kTrain));
  auto validation = read_ratings_jsonl(run.require(kValidation));
  auto test = read_ratings_jsonl(run.require(kTest));
  auto items = read_items(run.require(kItems));
  ItemCatalog catalog(items, train);
  std::vector<std::string> ids = catalog.item_ids();

  json summary = {{"kind", config.recommender.kind}, {"train", train.size()}};
  json model;
  auto kind = recommender_kind_from_string(config.recommender.kind);
  if (kind == RecommenderKind::random) {
    model = RandomRecommender(ids, derive_seed(config.seed, "recommender")).to_json();
  } else if (kind == RecommenderKind::pop) {
    model = PopRecommender(train, ids).to_json();
  } else {
    auto hp = config.recommender.mf;
    hp.seed = derive_seed(config.seed, "mf");
    auto mf = train_mf(train, hp, ids);
    model = mf.to_json();
    summary["train_rmse"] = mf.train_rmse();
    if (!validation.empty()) summary["validation"] = errors_json(model_rating_errors(mf, validation));
    if (!test.empty()) {
      summary["test"] = errors_json(model_rating_errors(mf, test));
      summary["test_global_mean"] = errors_json(global_mean_rating_errors(catalog.global_mean(), test));
    }
  }
  write_file(run.path(kRecommender), model.dump() + "\n");
  run.output(kRecommender, run.path(kRecommender));
  return run.finish(summary);
}

World world_from(StageRun& run, const RunConfig& config) {
  run.require(kTrain);
  run.require(kItems);
  run.require(kRecommender);
  return load_world(config);
}

StageResult stage_rollout(const RunConfig& config, const StageOptions& options) {
  StageRun run("rollout", config, options);
  World world = world_from(run, config);
  auto personas = personas_or_throw(run.require(kPersonas));
  auto backend = backend_for(config);

  const auto episodes = static_cast<std::size_t>(config.rollout_episodes);
  auto order = assign_agents(personas.size(), episodes, derive_seed(config.seed, "rollout_agents"));
  EpisodeFactory factory = [&](std::size_t t) {
    const Persona& p = personas[order[t]];
    return EpisodeSpec{"r" + session_id_for(static_cast<std::size_t>(config.rollout_first_episode) + t).substr(1), p,
                       world.browse_episode(p.user_id)};
  };
  RolloutOptions ro;
  ro.schedule = config.epsilon;
  ro.first_episode = config.rollout_first_episode;
  ro.step_cap = config.session.step_cap;
  ro.mode = config.prompt_mode();
  ro.seed = derive_seed(config.seed, "rollout");
  auto transitions = collect_rollouts(factory, *backend, episodes, ro);
  write_jsonl(run.path(kRollouts), to_lines(transitions, [](const Transition& t) { return to_json(t); }));
  run.output(kRollouts, run.path(kRollouts));
  return run.finish({{"episodes", episodes},
                     {"transitions", transitions.size()},
                     {"epsilon_first", config.epsilon.at(config.rollout_first_episode)},
                     {"epsilon_last", config.epsilon.at(config.rollout_first_episode +
                                                        static_cast<std::int64_t>(episodes) - 1)},
                     {"backend", backend->name()}});
}

struct Anchor {
  Transition transition;
  Episode episode;  // pre-action state
};

std::vector<Anchor> item_anchors(const World& world, std::span<const RatingRecord> train, const RunConfig& config) {
  auto picked = sample_indices(train.size(), static_cast<std::size_t>(config.counterfactual.max_anchors),
                               derive_seed(config.seed, "anchors"));
  std::vector<Anchor> out;
  for (std::size_t n = 0; n < picked.size(); ++n) {
    const auto& r = train[picked[n]];
    Episode ep = world.item_episode(r.user_id, r.item_id);
    Transition t;
    t.session_id = "a" + session_id_for(n).substr(1);
    t.step = 0;
    t.persona_id = r.user_id;
    t.state_text = ep.render();
    t.state_type = ep.type();
    t.action = Action::rate(r.item_id, r.rating);
    Episode after = ep;
    after.apply(t.action, 0);
    if (after.terminal()) {
      t.next_state_type = kTerminalPageType;
    } else {
      t.next_state_text = after.render();
      t.next_state_type = after.type();
    }
    t.source = "human";
    out.push_back({std::move(t), std::move(ep)});
  }
  return out;
}

std::vector<Anchor> trajectory_anchors(const World& world, std::span<const Persona> personas,
                                       const RunConfig& config, std::vector<Transition>& demonstrations) {
  // Demonstrations come from the oracle so that anchors never depend on the
  // backend whose counterfactuals are being sampled.
  OracleBackend demonstrator;
  PopulationConfig pc;
  pc.agents = static_cast<std::size_t>(config.counterfactual.demo_agents);
  pc.master_seed = derive_seed(config.seed, "demonstrations");
  pc.session = session_config(config);
  pc.session.post_interview = false;
  auto logs = run_population(personas, world, demonstrator, pc);
  auto index = index_personas(personas);
  for (const auto& log : logs) {
    auto ts = session_transitions(log, "synthetic_demo");
    demonstrations.insert(demonstrations.end(), ts.begin(), ts.end());
  }
  auto picked = sample_indices(demonstrations.size(), static_cast<std::size_t>(config.counterfactual.max_anchors),
                               derive_seed(config.seed, "anchors"));
  std::vector<Anchor> out;
  for (auto k : picked) {
    const auto& anchor = demonstrations[k];
    std::vector<Action> prefix;
    for (std::size_t j = k; j-- > 0;) {
      if (demonstrations[j].session_id != anchor.session_id) break;
      prefix.push_back(demonstrations[j].action);
    }
    std::reverse(prefix.begin(), prefix.end());
    Episode ep = world.browse_episode(persona_or_default(index, anchor.persona_id).user_id);
    replay_actions(ep, prefix);
    out.push_back({anchor, std::move(ep)});
  }
  return out;
}

StageResult stage_counterfactual(const RunConfig& config, const StageOptions& options) {
  StageRun run("counterfactual", config, options);
  World world = world_from(run, config);
  auto personas = personas_or_throw(run.require(kPersonas));
  auto index = index_personas(personas);
  auto backend = backend_for(config);

  std::vector<Transition> demonstrations;
  std::vector<Anchor> anchors;
  if (config.counterfactual.anchors == "item") {
    auto train = read_ratings_jsonl(run.path(kTrain));
    anchors = item_anchors(world, train, config);
    for (const auto& a : anchors) demonstrations.push_back(a.transition);
  } else {
    anchors = trajectory_anchors(world, personas, config, demonstrations);
  }

  std::vector<CounterfactualSet> sets;
  std::size_t skipped = 0, filled = 0, alternatives = 0;
  for (std::size_t n = 0; n < anchors.size(); ++n) {
    CounterfactualOptions co;
    co.k = config.counterfactual.k;
    co.max_attempts = config.counterfactual.max_attempts;
    co.seed = derive_seed(config.seed, "counterfactual", n);
    try {
      auto set = sample_counterfactuals(anchors[n].episode, anchors[n].transition,
                                        persona_or_default(index, anchors[n].transition.persona_id), *backend, co);
      if (set.filled) ++filled;
      alternatives += set.alternatives.size();
      sets.push_back(std::move(set));
    } catch (const CounterfactualError&) {
      ++skipped;
    }
  }
  write_jsonl(run.path(kDemonstrations), to_lines(demonstrations, [](const Transition& t) { return to_json(t); }));
  write_jsonl(run.path(kCounterfactuals), to_lines(sets, [](const CounterfactualSet& s) { return to_json(s); }));
  run.output(kDemonstrations, run.path(kDemonstrations));
  run.output(kCounterfactuals, run.path(kCounterfactuals));
  return run.finish({{"anchors", anchors.size()},
                     {"sets", sets.size()},
                     {"skipped_anchors", skipped},
                     {"filled_sets", filled},
                     {"alternatives", alternatives},
                     {"demonstrations", demonstrations.size()},
                     {"k", config.counterfactual.k},
                     {"backend", backend->name()}});
}

StageResult stage_emit_data(const RunConfig& config, const StageOptions& options) {
  StageRun run("emit-data", config, options);
  std::vector<Transition> rollouts, human;
  std::vector<CounterfactualSet> sets;
  bool any = false;
  if (fs::exists(run.path(kRollouts))) {
    rollouts = read_transitions(run.require(kRollouts));
    any = true;
  }
  if (fs::exists(run.path(kDemonstrations))) {
    human = read_transitions(run.require(kDemonstrations));
    any = true;
  }
  if (fs::exists(run.path(kCounterfactuals))) {
    sets = read_counterfactuals(run.require(kCounterfactuals));
    any = true;
  }
  if (!any) throw ValidationError("emit-data needs rollouts, demonstrations or counterfactuals in " + config.output_dir);

  auto transitions = merge_rollouts(rollouts, human, sets);
  auto records = emit_world_model_records(transitions, config.training.lambda_wm);
  auto reflections = emit_reflection_records(sets, config.training.lambda_cr);
  const auto world_model_count = records.size();
  records.insert(records.end(), reflections.records.begin(), reflections.records.end());
  write_jsonl(run.path(kTrainingRecords), to_lines(records, [](const TrainingRecord& r) { return to_json(r); }));
  run.output(kTrainingRecords, run.path(kTrainingRecords));

  return run.finish({{"transitions", transitions.size()},
                     {"rollout_transitions", rollouts.size()},
                     {"human_transitions", human.size()},
                     {"counterfactual_transitions", transitions.size() - rollouts.size() - human.size()},
                     {"anchors", sets.size()},
                     {"world_model_records", world_model_count},
                     {"reflection_records", reflections.records.size()},
                     {"reflections_skipped", reflections.skipped},
                     {"lambda_wm", config.training.lambda_wm},
                     {"lambda_cr", config.training.lambda_cr},
                     {"k", config.counterfactual.k},
                     {"seeds",
                      {{"master", config.seed},
                       {"rollout", derive_seed(config.seed, "rollout")},
                       {"anchors", derive_seed(config.seed, "anchors")},
                       {"counterfactual", derive_seed(config.seed, "counterfactual")}}},
                     {"fine_tuning",
                      {{"batch_size", config.training.batch_size},
                       {"learning_rate", config.training.learning_rate},
                       {"epochs", config.training.epochs}}}});
}

StageResult stage_simulate(const RunConfig& config, const StageOptions& options) {
  StageRun run("simulate", config, options);
  World world = world_from(run, config);
  auto personas = personas_or_throw(run.require(kPersonas));
  auto backend = backend_for(config);
  auto dir = run.path(kSessions);
  fs::remove_all(dir);

  PopulationConfig pc;
  pc.agents = static_cast<std::size_t>(config.session.agents);
  pc.master_seed = derive_seed(config.seed, "simulate");
  pc.workers = config.session.workers;
  pc.session = session_config(config);
  pc.output_dir = dir;
  auto logs = run_population(personas, world, *backend, pc);
  run.output_dir(kSessions, dir);

  std::size_t errors = 0, capped = 0, steps = 0;
  for (const auto& l : logs) {
    if (l.terminal == SessionOutcome::error) ++errors;
    if (l.terminal == SessionOutcome::step_cap) ++capped;
    steps += l.steps.size();
  }
  auto stats = session_stats(logs);
  return run.finish({{"sessions", logs.size()},
                     {"steps", steps},
                     {"errors", errors},
                     {"step_cap", capped},
                     {"pages_per_session", stats.pages_per_session},
                     {"backend", backend->name()}});
}

json evaluate_sessions(const std::vector<SessionLog>& logs, std::span<const RatingRecord> human,
                       const StageOptions& options) {
  SessionStatsConfig sc;
  sc.human_purchase_rate_pct = options.human_purchase_rate_pct;
  auto s = session_stats(logs, sc);
  json out = {{"sessions", s.sessions},
              {"pages_per_session", s.pages_per_session},
              {"purchase_rate_gap", optional_json(s.purchase_rate_gap)},
              {"exit_page_mean", s.exit_page_mean},
              {"view_ratio", s.view_ratio},
              {"like_count_mean", s.like_count_mean},
              {"like_ratio", s.like_ratio},
              {"satisfaction_mean", optional_json(s.satisfaction_mean)},
              {"liked_session_ratio", optional_json(s.liked_session_ratio)},
              {"rating_histogram", s.rating_histogram}};
  std::array<double, 5> agent{}, people{};
  for (int b = 0; b < 5; ++b) agent[b] = static_cast<double>(s.rating_histogram[b]);
  for (const auto& r : human) {
    if (r.rating >= 1 && r.rating <= 5) people[r.rating - 1] += 1;
  }
  double agent_total = std::accumulate(agent.begin(), agent.end(), 0.0);
  double human_total = std::accumulate(people.begin(), people.end(), 0.0);
  if (agent_total > 0 && human_total > 0) {
    auto d = distribution_divergence(agent, people);
    out["rating_divergence"] = {{"total_variation", d.total_variation}, {"per_bin_gaps", d.per_bin_gaps}};
  } else {
    out["rating_divergence"] = nullptr;
  }
  return out;
}

json evaluate_actions(std::span<const ActionRecordPair> pairs) {
  auto a = action_alignment(pairs);
  return {{"pairs", a.pairs},
          {"exact_match_accuracy", a.exact_match_accuracy},
          {"action_type_macro_f1", a.action_type_macro_f1},
          {"click_subtype_weighted_f1", optional_json(a.click_subtype_weighted_f1)},
          {"session_outcome_weighted_f1", optional_json(a.session_outcome_weighted_f1)},
          {"session_outcome_accuracy", optional_json(a.session_outcome_accuracy)}};
}

json evaluate_next_state(const fs::path& predictions) {
  std::vector<std::string> pt, ptype, at, atype;
  for (const auto& j : read_jsonl(predictions)) {
    pt.push_back(j.at("predicted_text").get<std::string>());
    ptype.push_back(j.at("predicted_type").get<std::string>());
    at.push_back(j.at("actual_text").get<std::string>());
    atype.push_back(j.at("actual_type").get<std::string>());
  }
  auto e = next_state_eval(pt, ptype, at, atype);
  return {{"pairs", e.pairs}, {"page_type_f1", e.page_type_f1}, {"edit_similarity_mean", e.edit_similarity_mean}};
}

StageResult stage_evaluate(const RunConfig& config, const StageOptions& options) {
  static const std::set<std::string> tasks = {"alignment", "rating", "mf", "sessions", "actions", "next_state", "all"};
  if (!tasks.count(options.task)) throw ConfigError({"unknown evaluate task '" + options.task + "'"});
  for (int r : options.ratios) {
    if (r < 1) throw ConfigError({"alignment ratios must be >= 1"});
  }
  StageRun run("evaluate", config, options);
  const bool all = options.task == "all";
  auto wants = [&](const char* t) { return all || options.task == t; };
  const fs::path sessions_dir = options.sessions_dir.empty() ? run.path(kSessions) : fs::path(options.sessions_dir);
  json summary = json::object();

  auto write_eval = [&](const std::string& name, const json& body) {
    auto p = run.path(("eval_" + name + ".json").c_str());
    write_file(p, body.dump(2) + "\n");
    run.output(p.filename().string(), p);
    summary[name] = body;
  };

  auto test = read_ratings_jsonl(run.require(kTest));
  if (wants("mf")) {
    auto train = read_ratings_jsonl(run.require(kTrain));
    auto items = read_items(run.require(kItems));
    ItemCatalog catalog(items, train);
    json body = {{"test_records", test.size()},
                 {"global_mean", errors_json(global_mean_rating_errors(catalog.global_mean(), test))}};
    auto model = json::parse(read_file(run.require(kRecommender)));
    if (recommender_from_json(model)->kind() == RecommenderKind::mf) {
      body["mf"] = errors_json(model_rating_errors(MfModel::from_json(model), test));
      // Same hyperparameters on a seeded random partition of the whole corpus.
      std::vector<RatingRecord> all = train;
      for (const auto& r : read_ratings_jsonl(run.require(kValidation))) all.push_back(r);
      all.insert(all.end(), test.begin(), test.end());
      auto shuffled = random_split(std::move(all), derive_seed(config.seed, "mf_random_split"));
      auto hp = config.recommender.mf;
      hp.seed = derive_seed(config.seed, "mf");
      ItemCatalog shuffled_catalog(items, shuffled.train);
      body["mf_random_split"] =
          errors_json(model_rating_errors(train_mf(shuffled.train, hp, shuffled_catalog.item_ids()), shuffled.test));
    }
    body["reference_mf"] = {{"rmse", references::kMfMovieLensRmse}, {"mae", references::kMfMovieLensMae}};
    write_eval("mf", body);
  }

  const bool needs_agent = wants("alignment") || wants("rating") ||
                           (wants("actions") && fs::is_directory(sessions_dir));
  if (needs_agent) {
    World world = world_from(run, config);
    auto personas = personas_or_throw(run.require(kPersonas));
    auto index = index_personas(personas);
    auto backend = backend_for(config);
    if (wants("alignment")) {
      auto interactions = group_by_user(read_ratings_jsonl(run.require(kInteractions)));
      for (int m : options.ratios) {
        AlignmentEvalConfig ac;
        ac.m = m;
        ac.items_per_agent = options.items_per_agent;
        ac.max_agents = options.max_agents;
        ac.seed = derive_seed(config.seed, "alignment", static_cast<std::uint64_t>(m));
        auto r = evaluate_alignment(world, index, interactions, *backend, ac);
        write_eval("alignment_1to" + std::to_string(m), {{"ratio", m},
                                                          {"agents", r.agents},
                                                          {"skipped", r.skipped},
                                                          {"unparsed_labels", r.unparsed_labels},
                                                          {"metrics", metrics_json(r.metrics)},
                                                          {"backend", backend->name()}});
      }
    }
    if (wants("rating")) {
      RatingEvalConfig rc;
      rc.max_records = options.max_records;
      rc.mode = config.prompt_mode();
      rc.seed = derive_seed(config.seed, "rating_eval");
      auto r = evaluate_agent_ratings(world, index, test, *backend, rc);
      write_eval("rating", {{"evaluated", r.evaluated},
                            {"fallbacks", r.fallbacks},
                            {"agent", errors_json(r.errors)},
                            {"backend", backend->name()}});
    }
    if (wants("actions") && fs::is_directory(sessions_dir)) {
      auto logs = read_session_logs(sessions_dir);
      auto pairs = predict_recorded_actions(world, index, logs, *backend, config.prompt_mode(),
                                            derive_seed(config.seed, "action_eval"));
      auto body = evaluate_actions(pairs);
      body["backend"] = backend->name();
      write_eval("actions", body);
    }
  }
  if (options.task == "actions" && !fs::is_directory(sessions_dir)) {
    throw ValidationError("no session logs at " + sessions_dir.string());
  }

  if (wants("sessions")) {
    if (fs::is_directory(sessions_dir)) {
      write_eval("sessions", evaluate_sessions(read_session_logs(sessions_dir), test, options));
    } else if (!all) {
      throw ValidationError("no session logs at " + sessions_dir.string());
    }
  }
  if (wants("next_state")) {
    if (!options.predictions.empty()) {
      run.input("predictions", options.predictions);
      write_eval("next_state", evaluate_next_state(options.predictions));
    } else if (!all) {
      throw ValidationError("evaluate --task next_state needs --predictions");
    }
  }
  return run.finish(summary);
}

std::string cell(const json& v, int decimals = 4) {
  if (v.is_null()) return "-";
  if (v.is_number_float()) return format_fixed(v.get<double>(), decimals);
  if (v.is_number()) return v.dump();
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

json section(std::string title, std::vector<std::string> columns) {
  return {{"title", std::move(title)}, {"columns", std::move(columns)}, {"rows", json::array()}};
}

StageResult stage_report(const RunConfig& config, const StageOptions& options) {
  StageRun run("report", config, options);
  std::vector<fs::path> evals;
  if (fs::is_directory(config.output_dir)) {
    for (const auto& e : fs::directory_iterator(config.output_dir)) {
      auto name = e.path().filename().string();
      if (name.rfind("eval_", 0) == 0 && e.path().extension() == ".json") evals.push_back(e.path());
    }
  }
  if (evals.empty()) throw ValidationError("no eval_*.json files in " + config.output_dir + "; run evaluate first");
  std::sort(evals.begin(), evals.end());

  std::map<std::string, json> results;
  for (const auto& p : evals) {
    run.input(p.filename().string(), p);
    results[p.stem().string().substr(5)] = json::parse(read_file(p));
  }

  json sections = json::array();
  json alignment = section("Preference alignment", {"setting", "accuracy", "precision", "recall", "f1", "agents"});
  for (const auto& [name, r] : results) {
    if (name.rfind("alignment_", 0) != 0) continue;
    const auto& m = r.at("metrics");
    alignment["rows"].push_back(json::array({"1:" + std::to_string(r.at("ratio").get<int>()) + " " +
                                                 r.at("backend").get<std::string>(),
                                             m.at("accuracy"), m.at("precision"), m.at("recall"), m.at("f1"),
                                             r.at("agents")}));
  }
  if (!alignment["rows"].empty()) {
    alignment["rows"].push_back(json::array(
        {"1:1 published reference", references::kAgentMovieLensAccuracy1to1, nullptr, nullptr, nullptr, nullptr}));
    sections.push_back(alignment);
  }

  json rating = section("Rating prediction", {"model", "rmse", "mae"});
  if (results.count("mf")) {
    const auto& r = results["mf"];
    if (r.contains("mf")) rating["rows"].push_back(json::array({"mf", r["mf"]["rmse"], r["mf"]["mae"]}));
    if (r.contains("mf_random_split")) {
      rating["rows"].push_back(
          json::array({"mf random split", r["mf_random_split"]["rmse"], r["mf_random_split"]["mae"]}));
    }
    rating["rows"].push_back(json::array({"global mean", r["global_mean"]["rmse"], r["global_mean"]["mae"]}));
  }
  if (results.count("rating")) {
    const auto& r = results["rating"];
    rating["rows"].push_back(
        json::array({"agent " + r["backend"].get<std::string>(), r["agent"]["rmse"], r["agent"]["mae"]}));
  }
  if (!rating["rows"].empty()) {
    rating["rows"].push_back(json::array(
        {"mf published reference", references::kMfMovieLensRmse, references::kMfMovieLensMae}));
    sections.push_back(rating);
  }

  if (results.count("sessions")) {
    const auto& r = results["sessions"];
    json s = section("Session behaviour", {"metric", "value"});
    for (const char* key : {"sessions", "pages_per_session", "purchase_rate_gap", "exit_page_mean", "view_ratio",
                            "like_count_mean", "like_ratio", "satisfaction_mean", "liked_session_ratio"}) {
      s["rows"].push_back(json::array({key, r.at(key)}));
    }
    if (!r["rating_divergence"].is_null()) {
      s["rows"].push_back(json::array({"rating_total_variation", r["rating_divergence"]["total_variation"]}));
    }
    s["rows"].push_back(json::array({"human pages_per_session reference", references::kHumanPagesPerSession}));
    s["rows"].push_back(json::array({"purchase_rate_gap published reference", references::kAgentPurchaseRateGap}));
    sections.push_back(s);
  }

  if (results.count("actions")) {
    const auto& r = results["actions"];
    json s = section("Next-action prediction",
                     {"backend", "exact_match", "type_macro_f1", "click_subtype_f1", "outcome_f1", "pairs"});
    s["rows"].push_back(json::array({r["backend"], r["exact_match_accuracy"], r["action_type_macro_f1"],
                                     r["click_subtype_weighted_f1"], r["session_outcome_weighted_f1"], r["pairs"]}));
    s["rows"].push_back(json::array({"published reference (%)", references::kAgentPlusExactMatchAccuracy, nullptr,
                                     nullptr, nullptr, nullptr}));
    sections.push_back(s);
  }

  if (results.count("next_state")) {
    const auto& r = results["next_state"];
    json s = section("Next-state prediction", {"page_type_f1", "edit_similarity", "pairs"});
    s["rows"].push_back(json::array({r["page_type_f1"], r["edit_similarity_mean"], r["pairs"]}));
    sections.push_back(s);
  }

  json report = {{"sections", sections}};
  write_file(run.path("report.json"), report.dump(2) + "\n");
  write_file(run.path("report.txt"), render_report_text(report));
  write_file(run.path("report.csv"), render_report_csv(report));
  for (const char* name : {"report.json", "report.txt", "report.csv"}) run.output(name, run.path(name));
  return run.finish(report);
}

}  // namespace

json to_json(const StageOptions& o) {
  return {{"task", o.task},
          {"ratios", o.ratios},
          {"items_per_agent", o.items_per_agent},
          {"max_agents", o.max_agents},
          {"max_records", o.max_records},
          {"sessions_dir", o.sessions_dir},
          {"predictions", o.predictions},
          {"human_purchase_rate_pct", optional_json(o.human_purchase_rate_pct)}};
}

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = {"ingest",    "persona",  "train-rec", "rollout", "counterfactual",
                                                 "emit-data", "simulate", "evaluate",  "report"};
  return names;
}

StageResult run_stage(std::string_view stage, const RunConfig& config, const StageOptions& options) {
  validate(config, std::string(stage));
  if (stage == "ingest") return stage_ingest(config, options);
  if (stage == "persona") return stage_persona(config, options);
  if (stage == "train-rec") return stage_train_rec(config, options);
  if (stage == "rollout") return stage_rollout(config, options);
  if (stage == "counterfactual") return stage_counterfactual(config, options);
  if (stage == "emit-data") return stage_emit_data(config, options);
  if (stage == "simulate") return stage_simulate(config, options);
  if (stage == "evaluate") return stage_evaluate(config, options);
  if (stage == "report") return stage_report(config, options);
  throw ConfigError({"unknown stage '" + std::string(stage) + "'"});
}

World load_world(const RunConfig& config) {
  const fs::path out = config.output_dir;
  auto train = read_ratings_jsonl(out / kTrain);
  auto items = read_items(out / kItems);
  World world;
  auto catalog = std::make_shared<const ItemCatalog>(items, train);
  world.catalog = catalog;
  world.recommender = recommender_from_json(json::parse(read_file(out / kRecommender)));
  if (config.env.enable_search) world.search = std::make_shared<const SearchIndex>(*catalog);
  world.histories = group_by_user(train);
  world.env = config.env;
  world.memory = config.memory;
  world.render = config.render_options();
  return world;
}

std::vector<Persona> load_personas(const fs::path& path) {
  std::vector<Persona> out;
  for (const auto& j : read_jsonl(path)) out.push_back(persona_from_json(j));
  return out;
}

std::string render_report_text(const json& report) {
  std::ostringstream os;
  bool first = true;
  for (const auto& s : report.at("sections")) {
    if (!first) os << "\n";
    first = false;
    os << s.at("title").get<std::string>() << "\n";
    std::vector<std::vector<std::string>> grid;
    std::vector<std::string> header;
    for (const auto& c : s.at("columns")) header.push_back(c.get<std::string>());
    grid.push_back(header);
    for (const auto& row : s.at("rows")) {
      std::vector<std::string> cells;
      for (const auto& v : row) cells.push_back(cell(v));
      grid.push_back(cells);
    }
    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& row : grid) {
      for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    }
    for (std::size_t r = 0; r < grid.size(); ++r) {
      std::string line;
      for (std::size_t c = 0; c < grid[r].size(); ++c) {
        if (c) line += "  ";
        line += grid[r][c];
        if (c + 1 < grid[r].size()) line += std::string(width[c] - grid[r][c].size(), ' ');
      }
      os << line << "\n";
      if (r == 0) {
        std::size_t total = 0;
        for (auto w : width) total += w;
        os << std::string(total + 2 * (width.size() - 1), '-') << "\n";
      }
    }
  }
  return os.str();
}

std::string render_report_csv(const json& report) {
  auto quote = [](const std::string& v) {
    if (v.find_first_of(",\"\n") == std::string::npos) return v;
    std::string out = "\"";
    for (char c : v) {
      if (c == '"') out += '"';
      out += c;
    }
    return out + "\"";
  };
  std::ostringstream os;
  os << "section,row,column,value\n";
  for (const auto& s : report.at("sections")) {
    const auto title = s.at("title").get<std::string>();
    const auto& columns = s.at("columns");
    for (const auto& row : s.at("rows")) {
      const std::string label = cell(row.at(0));
      for (std::size_t c = 1; c < row.size(); ++c) {
        os << quote(title) << "," << quote(label) << "," << quote(columns.at(c).get<std::string>()) << ","
           << (row.at(c).is_null() ? "" : quote(cell(row.at(c), 6))) << "\n";
      }
    }
  }
  return os.str();
}

}  // namespace alignsim
