#include "alignsim/policy.hpp"

#include <algorithm>
#include <cctype>

#include "alignsim/error.hpp"

namespace alignsim {

std::string_view to_string(PromptMode mode) { return mode == PromptMode::plus ? "plus" : "plain"; }

PromptMode prompt_mode_from_string(std::string_view s) {
  if (s == "plain") return PromptMode::plain;
  if (s == "plus") return PromptMode::plus;
  throw ValidationError("unknown prompt mode '" + std::string(s) + "'");
}

std::string_view to_string(CallKind kind) {
  switch (kind) {
    case CallKind::decide: return "decide";
    case CallKind::retry: return "retry";
    case CallKind::causal: return "causal";
    case CallKind::reflect: return "reflect";
    case CallKind::interview: return "interview";
    case CallKind::classify: return "classify";
    case CallKind::judge: return "judge";
  }
  return "decide";
}

namespace {

void append_section(std::string& out, std::string_view header, std::string_view body) {
  out += header;
  out += '\n';
  if (body.empty()) return;
  for (const auto& line : split(body, "\n")) {
    out += "  ";
    out += line;
    out += '\n';
  }
}

// Drops leading whitespace and markdown decoration (bullets, emphasis, quotes).
std::string_view strip_decoration(std::string_view s) {
  constexpr std::string_view marks = " \t\r*_#>`-";
  auto b = s.find_first_not_of(marks);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r*_`");
  return s.substr(b, e - b + 1);
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::toupper(static_cast<unsigned char>(s[i])) != std::toupper(static_cast<unsigned char>(prefix[i]))) {
      return false;
    }
  }
  return true;
}

std::optional<std::string_view> field_value(std::string_view line, std::string_view key) {
  auto s = strip_decoration(line);
  if (!starts_with_ci(s, key)) return std::nullopt;
  auto rest = s.substr(key.size());
  if (rest.empty() || rest.front() != ':') return std::nullopt;
  return strip_decoration(rest.substr(1));
}

bool allowed_contains(std::span<const Action> allowed, const Action& a) {
  if (a.tag == ActionTag::search) {
    return std::any_of(allowed.begin(), allowed.end(), [](const Action& x) { return x.tag == ActionTag::search; });
  }
  return std::find(allowed.begin(), allowed.end(), a) != allowed.end();
}

Action fallback_action(std::span<const Action> allowed, const std::optional<Action>& preferred) {
  if (preferred && allowed_contains(allowed, *preferred)) return *preferred;
  if (allowed_contains(allowed, Action::exit())) return Action::exit();
  return allowed.front();
}

std::string complete_counted(PolicyBackend& backend, const BackendCall& call, int prior_attempts) {
  try {
    return backend.complete(call);
  } catch (const TransportError& e) {
    throw TransportError(e.what(), prior_attempts + e.attempts());
  }
}

}  // namespace

std::string prompt_section(std::string_view header, std::string_view body) {
  std::string out;
  append_section(out, header, body);
  return out;
}

std::string build_policy_prompt(const PolicyRequest& r) {
  std::string state = r.state_text;
  if (r.causal_context) state += "\n" + *r.causal_context;
  std::string out;
  append_section(out, "[STATE]", state);
  append_section(out, "[PERSONA]", r.persona_text);
  append_section(out, "[RECENT_HISTORY]", r.history_text);
  auto tokens = action_tokens(r.possible_actions);
  append_section(out, "[POSSIBLE_ACTIONS]", join(tokens, ", "));
  out +=
      "Instruction: Think step by step about what a careful user with this persona would do next, considering "
      "their goals, preferences, and the future consequences of each action.\n"
      "End with a single line of the form:\n"
      "BEST-ACTION: <action_token>\n"
      "RATIONALE: <rationale>";
  return out;
}

std::optional<PolicyDecision> parse_decision(std::string_view raw, std::span<const Action> allowed) {
  auto lines = split(raw, "\n");
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (field_value(lines[i], "BEST-ACTION")) best = i;
  }
  if (!best) return std::nullopt;
  auto value = *field_value(lines[*best], "BEST-ACTION");
  auto open = value.find('[');
  auto close = value.rfind(']');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) return std::nullopt;
  Action action;
  try {
    action = parse_action(value.substr(open, close - open + 1));
  } catch (const Error&) {
    return std::nullopt;
  }
  if (!allowed_contains(allowed, action)) return std::nullopt;

  PolicyDecision d;
  d.action = std::move(action);
  d.raw_output = std::string(raw);
  std::optional<std::string_view> rationale;
  for (std::size_t i = *best + 1; i < lines.size() && !rationale; ++i) rationale = field_value(lines[i], "RATIONALE");
  for (std::size_t i = *best; i-- > 0 && !rationale;) rationale = field_value(lines[i], "RATIONALE");
  if (rationale) d.rationale = std::string(*rationale);
  return d;
}

std::string action_gloss(const Action& a) {
  switch (a.tag) {
    case ActionTag::exit: return "exited";
    case ActionTag::next_page: return "moved to the next page";
    case ActionTag::previous_page: return "went back to the previous page";
    case ActionTag::click_item: return "opened the details of item " + a.item_id;
    case ActionTag::rate: return "rated item " + a.item_id + " " + std::to_string(a.value) + "/5";
    case ActionTag::search: return "searched for \"" + a.query + "\"";
  }
  return "exited";
}

std::vector<std::string> causal_questions(const Action& tentative, std::span<const Action> allowed,
                                          PromptMode mode) {
  if (mode == PromptMode::plain) return {};
  auto question = [](const Action& a) { return "What would happen if you " + action_gloss(a) + " now?"; };
  std::vector<std::string> out{question(tentative)};
  for (const auto& a : allowed) {
    bool navigation = a.tag == ActionTag::exit || a.tag == ActionTag::next_page || a.tag == ActionTag::previous_page;
    if (navigation && a != tentative) out.push_back(question(a));
  }
  return out;
}

std::string post_interview_prompt() {
  return "How satisfied are you with the recommender system you recently interacted with?\n"
         "\n"
         "### Instructions:\n"
         "1. Rating: Provide a rating from 1 to 10.\n"
         "2. Explanation: Explain the reason for your rating.\n"
         "\n"
         "### Response Format:\n"
         "- RATING: [integer between 1 and 10]\n"
         "- REASON: [detailed explanation]";
}

std::optional<int> parse_interview_rating(std::string_view raw) {
  std::optional<int> out;
  for (const auto& line : split(raw, "\n")) {
    auto v = field_value(line, "RATING");
    if (!v) continue;
    auto s = trim(*v);
    if (!s.empty() && s.front() == '[' && s.back() == ']') s = trim(s.substr(1, s.size() - 2));
    std::size_t digits = 0;
    while (digits < s.size() && std::isdigit(static_cast<unsigned char>(s[digits]))) ++digits;
    if (digits == 0 || digits > 2) continue;
    int n = std::stoi(std::string(s.substr(0, digits)));
    auto tail = trim(s.substr(digits));
    if (!tail.empty() && tail != "/10" && tail != "/ 10") continue;
    if (n >= 1 && n <= 10) out = n;
  }
  return out;
}

std::string parse_interview_reason(std::string_view raw) {
  std::string out;
  for (const auto& line : split(raw, "\n")) {
    if (auto v = field_value(line, "REASON")) out = std::string(*v);
  }
  return out;
}

std::string believability_prompt(std::string_view persona_text, std::string_view history_text,
                                 std::span<const std::string> item_titles, std::string_view item_type) {
  std::string out;
  append_section(out, "[PERSONA]", persona_text);
  append_section(out, "[RECENT_HISTORY]", history_text);
  out += "## Recommended List ##\n";
  for (std::size_t i = 0; i < item_titles.size(); ++i) {
    out += std::to_string(i + 1) + ". " + item_titles[i] + "\n";
  }
  std::string type(item_type);
  out += "\n### Instructions\n";
  out += "1. Review each " + type + " in the ## Recommended List ##.\n";
  out += "2. For each " + type +
         ", classify if you have already interacted with it (\"Interacted\") or if you have not (\"Not "
         "Interacted\").\n";
  out += "\n### Response Format:\n";
  out += "One line per " + type + ": <number>. <title>: Interacted or Not Interacted";
  return out;
}

std::vector<std::optional<bool>> parse_believability(std::string_view raw, std::size_t item_count) {
  std::vector<std::optional<bool>> out(item_count);
  for (const auto& line : split(raw, "\n")) {
    auto s = strip_decoration(line);
    std::size_t digits = 0;
    while (digits < s.size() && std::isdigit(static_cast<unsigned char>(s[digits]))) ++digits;
    if (digits == 0 || digits > 6 || digits >= s.size() || (s[digits] != '.' && s[digits] != ')')) continue;
    std::size_t index = std::stoul(std::string(s.substr(0, digits)));
    if (index < 1 || index > item_count) continue;
    auto lower = to_lower(s.substr(digits + 1));
    auto colon = lower.rfind(':');
    std::string_view label = colon == std::string::npos ? std::string_view(lower) : std::string_view(lower).substr(colon + 1);
    if (label.find("not interacted") != std::string_view::npos) {
      out[index - 1] = false;
    } else if (label.find("interacted") != std::string_view::npos) {
      out[index - 1] = true;
    }
  }
  return out;
}

std::string evaluator_prompt(std::string_view interaction_logs) {
  std::string out =
      "Please evaluate the following interactions of an agent with a recommender system, and determine whether it "
      "is generated by a Large Language Model (LLM) AI or a real human:\n";
  out += interaction_logs;
  out +=
      "\n\nPlease rate on a scale of 1 to 5, with 1 being most like an AI and 5 being most like a human.";
  return out;
}

PolicyDecision decide(PolicyBackend& backend, const PolicyRequest& request, const DecisionView& view,
                      const DecideOptions& options) {
  const auto& allowed = request.possible_actions;
  if (allowed.empty()) throw ValidationError("policy request has no possible actions");
  DecisionView v = view;
  v.allowed = allowed;

  BackendCall call;
  call.kind = CallKind::decide;
  call.seed = options.seed;
  call.step = options.step;
  call.decision = &v;
  call.messages.push_back({"user", build_policy_prompt(request)});
  std::string raw = complete_counted(backend, call, 0);
  auto parsed = parse_decision(raw, allowed);
  bool retried = false;
  if (!parsed) {
    retried = true;
    call.kind = CallKind::retry;
    call.messages.push_back({"assistant", raw});
    call.messages.push_back({"user", std::string(kRetrySentence)});
    raw = complete_counted(backend, call, 1);
    parsed = parse_decision(raw, allowed);
  }
  PolicyDecision decision;
  if (parsed) {
    decision = std::move(*parsed);
  } else {
    decision.action = fallback_action(allowed, options.fallback);
    decision.raw_output = raw;
    decision.fallback = true;
  }
  decision.retried = retried;
  if (request.mode != PromptMode::plus || decision.fallback) return decision;

  auto questions = causal_questions(decision.action, allowed, request.mode);
  decision.tentative = decision.action;
  decision.causal_questions = questions;
  PolicyRequest causal = request;
  std::string context = "Tentative action: " + to_token(decision.action) +
                        "\nAnswer each question, then confirm or revise the action:";
  for (const auto& q : questions) context += "\n- " + q;
  causal.causal_context = request.causal_context ? *request.causal_context + "\n" + context : context;

  DecisionView cv = v;
  cv.tentative = decision.action;
  BackendCall second;
  second.kind = CallKind::causal;
  second.seed = options.seed;
  second.step = options.step;
  second.decision = &cv;
  second.messages.push_back({"user", build_policy_prompt(causal)});
  std::string revised_raw = complete_counted(backend, second, retried ? 2 : 1);
  if (auto revised = parse_decision(revised_raw, allowed)) {
    decision.action = revised->action;
    if (!revised->rationale.empty()) decision.rationale = revised->rationale;
    decision.raw_output += "\n\n" + revised_raw;
  }
  return decision;
}

}  // namespace alignsim
