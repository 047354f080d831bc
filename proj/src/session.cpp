#include "alignsim/session.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <numeric>
#include <random>
#include <set>
#include <thread>

#include "alignsim/error.hpp"

namespace alignsim {

std::string_view to_string(SessionOutcome o) {
  switch (o) {
    case SessionOutcome::exit: return "EXIT";
    case SessionOutcome::step_cap: return "step-cap";
    case SessionOutcome::error: return "error";
  }
  return "error";
}

SessionOutcome session_outcome_from_string(std::string_view s) {
  if (s == "EXIT") return SessionOutcome::exit;
  if (s == "step-cap") return SessionOutcome::step_cap;
  if (s == "error") return SessionOutcome::error;
  throw ValidationError("unknown session outcome '" + std::string(s) + "'");
}

namespace {

json optional_json(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::vector<json> session_log_lines(const SessionLog& log) {
  std::vector<json> lines;
  for (const auto& s : log.steps) {
    lines.push_back({{"record", "step"},
                     {"session_id", log.session_id},
                     {"step", s.step},
                     {"page_number", s.page_number},
                     {"state_text", s.state_text},
                     {"state_type", s.state_type},
                     {"prompt", s.prompt},
                     {"action_token", s.action_token},
                     {"rationale", s.rationale},
                     {"raw_output", s.raw_output},
                     {"retried", s.retried},
                     {"fallback", s.fallback},
                     {"tentative_token", optional_json(s.tentative_token)},
                     {"next_state_text", s.next_state_text},
                     {"next_state_type", s.next_state_type}});
  }
  json ratings = json::object();
  for (const auto& [item, r] : log.ratings) ratings[item] = r;
  json interview = nullptr;
  if (log.satisfaction || log.interview_reason) {
    interview = {{"rating", log.satisfaction ? json(*log.satisfaction) : json(nullptr)},
                 {"reason", optional_json(log.interview_reason)}};
  }
  lines.push_back({{"record", "summary"},
                   {"session_id", log.session_id},
                   {"persona_id", log.persona_id},
                   {"seed", log.seed},
                   {"terminal", std::string(to_string(log.terminal))},
                   {"error", log.error},
                   {"steps", log.steps.size()},
                   {"pages_visited", log.pages_visited},
                   {"exit_page", log.exit_page},
                   {"displayed_items", log.displayed_items},
                   {"interacted_items", log.interacted_items},
                   {"ratings", std::move(ratings)},
                   {"satisfaction", log.satisfaction ? json(*log.satisfaction) : json(nullptr)},
                   {"post_interview", std::move(interview)},
                   {"memory", log.memory}});
  return lines;
}

SessionLog session_log_from_lines(std::span<const json> lines) {
  SessionLog log;
  bool footer = false;
  for (const auto& j : lines) {
    auto kind = j.at("record").get<std::string>();
    if (kind == "step") {
      StepRecord s;
      s.step = j.at("step").get<int>();
      s.page_number = j.at("page_number").get<int>();
      s.state_text = j.at("state_text").get<std::string>();
      s.state_type = j.at("state_type").get<std::string>();
      s.prompt = j.at("prompt").get<std::string>();
      s.action_token = j.at("action_token").get<std::string>();
      s.rationale = j.at("rationale").get<std::string>();
      s.raw_output = j.at("raw_output").get<std::string>();
      s.retried = j.at("retried").get<bool>();
      s.fallback = j.at("fallback").get<bool>();
      if (!j.at("tentative_token").is_null()) s.tentative_token = j.at("tentative_token").get<std::string>();
      s.next_state_text = j.at("next_state_text").get<std::string>();
      s.next_state_type = j.at("next_state_type").get<std::string>();
      log.steps.push_back(std::move(s));
    } else if (kind == "summary") {
      footer = true;
      log.session_id = j.at("session_id").get<std::string>();
      log.persona_id = j.at("persona_id").get<std::string>();
      log.seed = j.at("seed").get<std::uint64_t>();
      log.terminal = session_outcome_from_string(j.at("terminal").get<std::string>());
      log.error = j.at("error").get<std::string>();
      log.pages_visited = j.at("pages_visited").get<int>();
      log.exit_page = j.at("exit_page").get<int>();
      log.displayed_items = j.at("displayed_items").get<int>();
      log.interacted_items = j.at("interacted_items").get<int>();
      for (const auto& [item, r] : j.at("ratings").items()) log.ratings[item] = r.get<int>();
      if (!j.at("satisfaction").is_null()) log.satisfaction = j.at("satisfaction").get<int>();
      const auto& pi = j.at("post_interview");
      if (!pi.is_null() && !pi.at("reason").is_null()) log.interview_reason = pi.at("reason").get<std::string>();
      log.memory = j.at("memory");
    } else {
      throw ValidationError("unknown session log record '" + kind + "'");
    }
  }
  if (!footer) throw ValidationError("session log has no summary record");
  return log;
}

void write_session_log(const std::filesystem::path& path, const SessionLog& log) {
  write_jsonl(path, session_log_lines(log));
}

SessionLog read_session_log(const std::filesystem::path& path) {
  auto lines = read_jsonl(path);
  return session_log_from_lines(lines);
}

std::vector<SessionLog> read_session_logs(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<SessionLog> out;
  for (const auto& f : files) out.push_back(read_session_log(f));
  return out;
}

std::vector<Transition> session_transitions(const SessionLog& log, std::string_view source) {
  std::vector<Transition> out;
  for (const auto& s : log.steps) {
    Transition t;
    t.session_id = log.session_id;
    t.step = s.step;
    t.persona_id = log.persona_id;
    t.state_text = s.state_text;
    t.state_type = s.state_type;
    t.action = parse_action(s.action_token);
    if (s.next_state_type != kTerminalPageType) t.next_state_text = s.next_state_text;
    t.next_state_type = s.next_state_type;
    t.source = std::string(source);
    out.push_back(std::move(t));
  }
  return out;
}

SessionLog run_session(const std::string& session_id, const Persona& persona, PolicyBackend& backend,
                       Episode episode, const SessionConfig& config, std::uint64_t seed) {
  SessionLog log;
  log.session_id = session_id;
  log.persona_id = persona.user_id;
  log.seed = seed;
  std::set<int> pages;
  std::set<std::string> displayed;
  std::set<std::string> interacted;
  auto observe = [&](const PageState& p) {
    pages.insert(p.page_number);
    for (const auto& slot : p.slots) displayed.insert(slot.item_id);
  };
  const bool show_similar = episode.options().show_similar;
  bool exited = false;
  int current_page = 1;
  try {
    PageState page = episode.view();
    observe(page);
    for (int step = 0; step < config.step_cap; ++step) {
      current_page = page.page_number;
      StepRecord rec;
      rec.step = step;
      rec.page_number = page.page_number;
      rec.state_text = render_page(page, show_similar);
      rec.state_type = page_type(page);
      auto request = policy_request(episode, persona, config.mode);
      rec.prompt = build_policy_prompt(request);
      auto view = decision_view(episode, persona, page);
      auto d = decide(backend, request, view, {config.fallback, seed, step});
      rec.action_token = to_token(d.action);
      rec.rationale = d.rationale;
      rec.raw_output = d.raw_output;
      rec.retried = d.retried;
      rec.fallback = d.fallback;
      if (d.tentative) rec.tentative_token = to_token(*d.tentative);

      auto next = episode.apply(d.action, step);
      if (d.action.tag == ActionTag::click_item || d.action.tag == ActionTag::rate) interacted.insert(d.action.item_id);
      if (d.action.tag == ActionTag::rate) log.ratings[d.action.item_id] = d.action.value;
      if (!next) {
        rec.next_state_text = std::string(kTerminalText);
        rec.next_state_type = std::string(kTerminalPageType);
        log.steps.push_back(std::move(rec));
        exited = true;
        break;
      }
      page = episode.view();
      observe(page);
      rec.next_state_text = render_page(page, show_similar);
      rec.next_state_type = page_type(page);
      log.steps.push_back(std::move(rec));
    }
    log.terminal = exited ? SessionOutcome::exit : SessionOutcome::step_cap;
    if (!exited) current_page = page.page_number;
  } catch (const TransportError& e) {
    log.terminal = SessionOutcome::error;
    log.error = e.what();
  }
  log.pages_visited = static_cast<int>(pages.size());
  log.exit_page = current_page;
  log.displayed_items = static_cast<int>(displayed.size());
  log.interacted_items = static_cast<int>(interacted.size());

  if (config.post_interview && log.terminal != SessionOutcome::error) {
    InterviewView iv{&persona, log.ratings, log.pages_visited};
    BackendCall call;
    call.kind = CallKind::interview;
    call.seed = seed;
    call.step = static_cast<int>(log.steps.size());
    call.interview = &iv;
    call.messages.push_back({"user", prompt_section("[PERSONA]", persona_text(persona)) +
                                         prompt_section("[RECENT_HISTORY]", episode.memory().recent_history()) +
                                         post_interview_prompt()});
    try {
      auto raw = backend.complete(call);
      log.satisfaction = parse_interview_rating(raw);
      log.interview_reason = parse_interview_reason(raw);
    } catch (const TransportError& e) {
      log.error = std::string("post-interview: ") + e.what();
    }
  }
  log.memory = episode.memory().snapshot();
  return log;
}

std::string session_id_for(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%05zu", index);
  return buf;
}

std::vector<std::size_t> assign_agents(std::size_t population, std::size_t agents, std::uint64_t master_seed) {
  if (population == 0) throw ValidationError("no personas to simulate");
  std::vector<std::size_t> order(population);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive_seed(master_seed, "agents"));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> out(agents);
  for (std::size_t i = 0; i < agents; ++i) out[i] = order[i % population];
  return out;
}

std::vector<SessionLog> run_population(std::span<const Persona> personas, const World& world, PolicyBackend& backend,
                                       const PopulationConfig& config) {
  if (config.agents < 1) throw ValidationError("agents must be >= 1");
  auto assignment = assign_agents(personas.size(), config.agents, config.master_seed);
  std::vector<SessionLog> logs(config.agents);
  std::mutex write_mu;
  if (!config.output_dir.empty()) std::filesystem::create_directories(config.output_dir);

  auto run_one = [&](std::size_t i) {
    const Persona& persona = personas[assignment[i]];
    const auto id = session_id_for(i);
    const auto seed = derive_seed(config.master_seed, "session", i);
    SessionLog log;
    try {
      log = run_session(id, persona, backend, world.browse_episode(persona.user_id), config.session, seed);
    } catch (const std::exception& e) {
      log = SessionLog{};
      log.session_id = id;
      log.persona_id = persona.user_id;
      log.seed = seed;
      log.terminal = SessionOutcome::error;
      log.error = e.what();
      log.memory = json::object();
    }
    if (!config.output_dir.empty()) {
      std::lock_guard lock(write_mu);
      write_session_log(config.output_dir / (id + ".jsonl"), log);
    }
    logs[i] = std::move(log);
  };

  const int width = std::max(1, std::min<int>(config.workers, static_cast<int>(config.agents)));
  if (width == 1) {
    for (std::size_t i = 0; i < config.agents; ++i) run_one(i);
    return logs;
  }
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    for (int w = 0; w < width; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < config.agents; i = next++) run_one(i);
      });
    }
  }
  return logs;
}

}  // namespace alignsim
