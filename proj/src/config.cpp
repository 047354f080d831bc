#include "alignsim/config.hpp"

#include <set>

#include "alignsim/backends.hpp"
#include "alignsim/error.hpp"

namespace alignsim {

json to_json(const RunConfig& c) {
  return {
      {"data",
       {{"ratings", c.data.ratings},
        {"movies", c.data.movies},
        {"users", c.data.users},
        {"format", c.data.format},
        {"csv_preset", c.data.csv_preset}}},
      {"synthetic",
       {{"enabled", c.synthetic.enabled},
        {"users", c.synthetic.users},
        {"items", c.synthetic.items},
        {"min_ratings", c.synthetic.min_ratings},
        {"max_ratings", c.synthetic.max_ratings},
        {"single_genre_users", c.synthetic.single_genre_users}}},
      {"split", c.split},
      {"recommender",
       {{"kind", c.recommender.kind},
        {"dim", c.recommender.mf.dim},
        {"learning_rate", c.recommender.mf.learning_rate},
        {"l2", c.recommender.mf.l2},
        {"epochs", c.recommender.mf.epochs},
        {"init_std", c.recommender.mf.init_std}}},
      {"env",
       {{"page_size", c.env.page_size},
        {"enable_search", c.env.enable_search},
        {"exclude_history", c.env.exclude_history}}},
      {"memory", {{"history_window", c.memory.history_window}, {"similar_k", c.memory.similar_k}}},
      {"mode", c.mode},
      {"counterfactual",
       {{"k", c.counterfactual.k},
        {"max_attempts", c.counterfactual.max_attempts},
        {"anchors", c.counterfactual.anchors},
        {"max_anchors", c.counterfactual.max_anchors},
        {"demo_agents", c.counterfactual.demo_agents}}},
      {"training",
       {{"lambda_wm", c.training.lambda_wm},
        {"lambda_cr", c.training.lambda_cr},
        {"batch_size", c.training.batch_size},
        {"learning_rate", c.training.learning_rate},
        {"epochs", c.training.epochs}}},
      {"epsilon", {{"start", c.epsilon.start}, {"end", c.epsilon.end}, {"horizon", c.epsilon.horizon}}},
      {"rollout", {{"episodes", c.rollout_episodes}, {"first_episode", c.rollout_first_episode}}},
      {"seed", c.seed},
      {"backend",
       {{"kind", c.backend.kind},
        {"endpoint", c.backend.endpoint},
        {"model", c.backend.model},
        {"temperature", c.backend.temperature},
        {"timeout_seconds", c.backend.timeout_seconds},
        {"max_in_flight", c.backend.max_in_flight},
        {"max_attempts", c.backend.max_attempts},
        {"replay_log", c.backend.replay_log},
        {"exchange_log", c.backend.exchange_log}}},
      {"session",
       {{"agents", c.session.agents},
        {"step_cap", c.session.step_cap},
        {"workers", c.session.workers},
        {"post_interview", c.session.post_interview}}},
      {"output_dir", c.output_dir},
  };
}

namespace {

// Overlays `src` onto the defaults in `dst`, recording unknown keys and type
// mismatches instead of stopping at the first one.
void overlay(json& dst, const json& src, const std::string& path, std::vector<std::string>& violations) {
  if (!src.is_object()) {
    violations.push_back(path.empty() ? "configuration must be a JSON object" : path + " must be an object");
    return;
  }
  for (const auto& [key, value] : src.items()) {
    const std::string here = path.empty() ? key : path + "." + key;
    if (!dst.contains(key)) {
      violations.push_back("unknown key " + here);
      continue;
    }
    auto& slot = dst[key];
    if (slot.is_object()) {
      overlay(slot, value, here, violations);
      continue;
    }
    bool ok = (slot.is_number() && value.is_number()) || (slot.is_string() && value.is_string()) ||
              (slot.is_boolean() && value.is_boolean()) || (slot.is_array() && value.is_array());
    if (slot.is_number_integer() && value.is_number_float()) ok = false;
    if (!ok) {
      violations.push_back(here + " has the wrong type (expected " + std::string(slot.type_name()) + ")");
      continue;
    }
    slot = value;
  }
}

RunConfig parse_resolved(const json& j) {
  RunConfig c;
  const auto& d = j.at("data");
  c.data.ratings = d.at("ratings").get<std::string>();
  c.data.movies = d.at("movies").get<std::string>();
  c.data.users = d.at("users").get<std::string>();
  c.data.format = d.at("format").get<std::string>();
  c.data.csv_preset = d.at("csv_preset").get<std::string>();
  const auto& s = j.at("synthetic");
  c.synthetic.enabled = s.at("enabled").get<bool>();
  c.synthetic.users = s.at("users").get<int>();
  c.synthetic.items = s.at("items").get<int>();
  c.synthetic.min_ratings = s.at("min_ratings").get<int>();
  c.synthetic.max_ratings = s.at("max_ratings").get<int>();
  c.synthetic.single_genre_users = s.at("single_genre_users").get<bool>();
  const auto& split = j.at("split");
  if (split.size() != 3) throw ConfigError({"split must have exactly three fractions"});
  for (std::size_t i = 0; i < 3; ++i) c.split[i] = split.at(i).get<double>();
  const auto& r = j.at("recommender");
  c.recommender.kind = r.at("kind").get<std::string>();
  c.recommender.mf.dim = r.at("dim").get<int>();
  c.recommender.mf.learning_rate = r.at("learning_rate").get<double>();
  c.recommender.mf.l2 = r.at("l2").get<double>();
  c.recommender.mf.epochs = r.at("epochs").get<int>();
  c.recommender.mf.init_std = r.at("init_std").get<double>();
  const auto& e = j.at("env");
  c.env.page_size = e.at("page_size").get<int>();
  c.env.enable_search = e.at("enable_search").get<bool>();
  c.env.exclude_history = e.at("exclude_history").get<bool>();
  c.memory.history_window = j.at("memory").at("history_window").get<int>();
  c.memory.similar_k = j.at("memory").at("similar_k").get<int>();
  c.mode = j.at("mode").get<std::string>();
  const auto& cf = j.at("counterfactual");
  c.counterfactual.k = cf.at("k").get<int>();
  c.counterfactual.max_attempts = cf.at("max_attempts").get<int>();
  c.counterfactual.anchors = cf.at("anchors").get<std::string>();
  c.counterfactual.max_anchors = cf.at("max_anchors").get<int>();
  c.counterfactual.demo_agents = cf.at("demo_agents").get<int>();
  const auto& t = j.at("training");
  c.training.lambda_wm = t.at("lambda_wm").get<double>();
  c.training.lambda_cr = t.at("lambda_cr").get<double>();
  c.training.batch_size = t.at("batch_size").get<int>();
  c.training.learning_rate = t.at("learning_rate").get<double>();
  c.training.epochs = t.at("epochs").get<int>();
  const auto& eps = j.at("epsilon");
  c.epsilon.start = eps.at("start").get<double>();
  c.epsilon.end = eps.at("end").get<double>();
  c.epsilon.horizon = eps.at("horizon").get<std::int64_t>();
  c.rollout_episodes = j.at("rollout").at("episodes").get<int>();
  c.rollout_first_episode = j.at("rollout").at("first_episode").get<std::int64_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  const auto& b = j.at("backend");
  c.backend.kind = b.at("kind").get<std::string>();
  c.backend.endpoint = b.at("endpoint").get<std::string>();
  c.backend.model = b.at("model").get<std::string>();
  c.backend.temperature = b.at("temperature").get<double>();
  c.backend.timeout_seconds = b.at("timeout_seconds").get<int>();
  c.backend.max_in_flight = b.at("max_in_flight").get<int>();
  c.backend.max_attempts = b.at("max_attempts").get<int>();
  c.backend.replay_log = b.at("replay_log").get<std::string>();
  c.backend.exchange_log = b.at("exchange_log").get<std::string>();
  const auto& ss = j.at("session");
  c.session.agents = ss.at("agents").get<int>();
  c.session.step_cap = ss.at("step_cap").get<int>();
  c.session.workers = ss.at("workers").get<int>();
  c.session.post_interview = ss.at("post_interview").get<bool>();
  c.output_dir = j.at("output_dir").get<std::string>();
  return c;
}

}  // namespace

RunConfig apply_overrides(const RunConfig& base, const json& overrides) {
  json merged = to_json(base);
  std::vector<std::string> violations;
  overlay(merged, overrides, "", violations);
  if (!violations.empty()) throw ConfigError(violations);
  try {
    return parse_resolved(merged);
  } catch (const json::exception& e) {
    throw ConfigError({std::string("malformed configuration: ") + e.what()});
  }
}

RunConfig run_config_from_json(const json& j) { return apply_overrides(RunConfig{}, j); }

RunConfig load_run_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError({"cannot parse " + path.string() + ": " + e.what()});
  }
  return run_config_from_json(j);
}

void validate(const RunConfig& c, const std::string& stage) {
  std::vector<std::string> v;
  auto one_of = [&](const std::string& value, std::set<std::string> allowed, const std::string& name) {
    if (!allowed.count(value)) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      v.push_back(name + " must be one of {" + list + "}, got '" + value + "'");
    }
  };
  one_of(c.data.format, {"movielens_dat", "csv"}, "data.format");
  one_of(c.data.csv_preset, {"canonical", "amazon_book"}, "data.csv_preset");
  one_of(c.recommender.kind, {"random", "pop", "mf"}, "recommender.kind");
  one_of(c.mode, {"plain", "plus"}, "mode");
  one_of(c.counterfactual.anchors, {"item", "trajectory"}, "counterfactual.anchors");
  one_of(c.backend.kind, {"oracle", "random", "remote", "replay"}, "backend.kind");

  double total = 0;
  for (double f : c.split) {
    if (!(f > 0)) v.push_back("split fractions must be positive");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) v.push_back("split fractions must sum to 1");
  if (c.recommender.mf.dim < 1) v.push_back("recommender.dim must be >= 1");
  if (!(c.recommender.mf.learning_rate > 0)) v.push_back("recommender.learning_rate must be > 0");
  if (c.recommender.mf.l2 < 0) v.push_back("recommender.l2 must be >= 0");
  if (c.recommender.mf.epochs < 0) v.push_back("recommender.epochs must be >= 0");
  if (c.env.page_size < 1) v.push_back("env.page_size must be >= 1");
  if (c.memory.history_window < 0) v.push_back("memory.history_window must be >= 0");
  if (c.memory.similar_k < 0) v.push_back("memory.similar_k must be >= 0");
  if (c.counterfactual.k < 1) v.push_back("counterfactual.k must be >= 1");
  if (c.counterfactual.max_attempts < 0) v.push_back("counterfactual.max_attempts must be >= 0");
  if (c.counterfactual.max_anchors < 1) v.push_back("counterfactual.max_anchors must be >= 1");
  if (c.counterfactual.demo_agents < 1) v.push_back("counterfactual.demo_agents must be >= 1");
  if (c.training.lambda_wm < 0) v.push_back("training.lambda_wm must be >= 0");
  if (c.training.lambda_cr < 0) v.push_back("training.lambda_cr must be >= 0");
  if (!(c.epsilon.start >= c.epsilon.end)) v.push_back("epsilon.start must be >= epsilon.end");
  if (c.epsilon.end < 0) v.push_back("epsilon.end must be >= 0");
  if (c.epsilon.start > 1) v.push_back("epsilon.start must be <= 1");
  if (c.epsilon.horizon < 1) v.push_back("epsilon.horizon must be >= 1");
  if (c.rollout_episodes < 1) v.push_back("rollout.episodes must be >= 1");
  if (c.rollout_first_episode < 0) v.push_back("rollout.first_episode must be >= 0");
  if (c.session.agents < 1) v.push_back("session.agents must be >= 1");
  if (c.session.step_cap < 1) v.push_back("session.step_cap must be >= 1");
  if (c.session.workers < 1) v.push_back("session.workers must be >= 1");
  if (c.output_dir.empty()) v.push_back("output_dir must be set");
  if (c.backend.kind == "remote") {
    if (c.backend.endpoint.empty()) v.push_back("backend.endpoint is required for the remote backend");
    if (c.backend.max_in_flight < 1) v.push_back("backend.max_in_flight must be >= 1");
    if (c.backend.timeout_seconds < 1) v.push_back("backend.timeout_seconds must be >= 1");
    if (c.backend.max_attempts < 1) v.push_back("backend.max_attempts must be >= 1");
  }
  if (c.backend.kind == "replay") {
    if (c.backend.replay_log.empty()) {
      v.push_back("backend.replay_log is required for the replay backend");
    } else if (!std::filesystem::exists(c.backend.replay_log)) {
      v.push_back("backend.replay_log does not exist: " + c.backend.replay_log);
    }
  }
  if (stage == "ingest" && !c.synthetic.enabled) {
    if (c.data.ratings.empty()) {
      v.push_back("data.ratings is required");
    } else if (!std::filesystem::exists(c.data.ratings)) {
      v.push_back("data.ratings does not exist: " + c.data.ratings);
    }
    if (!c.data.movies.empty() && !std::filesystem::exists(c.data.movies)) {
      v.push_back("data.movies does not exist: " + c.data.movies);
    }
    if (!c.data.users.empty() && !std::filesystem::exists(c.data.users)) {
      v.push_back("data.users does not exist: " + c.data.users);
    }
  }
  if (stage == "ingest" && c.synthetic.enabled) {
    if (c.synthetic.users < 1 || c.synthetic.items < 1) v.push_back("synthetic users and items must be >= 1");
    if (c.synthetic.min_ratings < 1 || c.synthetic.max_ratings < c.synthetic.min_ratings) {
      v.push_back("synthetic rating range must satisfy 1 <= min_ratings <= max_ratings");
    }
  }
  if (!v.empty()) throw ConfigError(v);
}

std::unique_ptr<PolicyBackend> make_backend(const BackendConfig& c) {
  if (c.kind == "oracle") return std::make_unique<OracleBackend>();
  if (c.kind == "random") return std::make_unique<RandomBackend>();
  if (c.kind == "replay") return std::make_unique<ReplayBackend>(c.replay_log);
  if (c.kind == "remote") {
    RemoteConfig r;
    r.endpoint = c.endpoint;
    r.model = c.model;
    r.temperature = c.temperature;
    r.timeout_seconds = c.timeout_seconds;
    r.max_in_flight = c.max_in_flight;
    r.max_attempts = c.max_attempts;
    r.exchange_log = c.exchange_log;
    return std::make_unique<RemoteBackend>(r);
  }
  throw ConfigError({"unknown backend kind '" + c.kind + "'"});
}

}  // namespace alignsim
