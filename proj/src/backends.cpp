#include "alignsim/backends.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "alignsim/error.hpp"

namespace alignsim {

namespace {

double pickiness_shift(Pickiness p) {
  switch (p) {
    case Pickiness::not_picky: return 0.5;
    case Pickiness::extremely_picky: return -0.5;
    default: return 0.0;
  }
}

int target_rating(double affinity, Pickiness p) {
  return static_cast<int>(std::clamp<long>(std::lround(affinity + pickiness_shift(p)), 1L, 5L));
}

bool contains(std::span<const Action> allowed, const Action& a) {
  return std::find(allowed.begin(), allowed.end(), a) != allowed.end();
}

}  // namespace

double oracle_affinity(const AgentMemory& memory, const std::string& item_id, double global_mean) {
  return memory.genre_affinity(item_id).value_or(global_mean);
}

int oracle_patience(const Persona& persona) { return std::max(1, persona.engagement_level) + 3; }

OracleChoice oracle_decide(const Persona& persona, const PageState& state, const AgentMemory& memory,
                           double global_mean, std::span<const Action> allowed) {
  if (allowed.empty()) throw ValidationError("oracle needs at least one allowed action");
  struct Scored {
    const ItemSlot* slot;
    double affinity;
    int target;
  };
  std::vector<Scored> remaining;
  for (const auto& slot : state.slots) {
    if (slot.rated) continue;
    double aff = oracle_affinity(memory, slot.item_id, global_mean);
    remaining.push_back({&slot, aff, target_rating(aff, persona.pickiness)});
  }
  std::stable_sort(remaining.begin(), remaining.end(),
                   [](const Scored& a, const Scored& b) { return a.affinity > b.affinity; });

  OracleChoice preferred;
  const int patience = oracle_patience(persona);
  if (state.page_number > patience) {
    preferred = {Action::exit(), "Patience budget of " + std::to_string(patience) + " pages is used up."};
  } else if (remaining.empty()) {
    preferred = {Action::next_page(), "Every item on this page is already rated."};
  } else if (remaining.front().affinity < kOracleAffinityFloor) {
    preferred = {Action::exit(), "Nothing left here matches my taste (best affinity " +
                                     format_fixed(remaining.front().affinity, 2) + ")."};
  } else {
    const auto& best = remaining.front();
    preferred = {Action::rate(best.slot->item_id, best.target),
                 best.slot->title + " sits in genres I rate " + format_fixed(best.affinity, 2) + " on average; as a " +
                     std::string(to_string(persona.pickiness)) + " viewer I give it " + std::to_string(best.target) +
                     "."};
  }
  if (contains(allowed, preferred.action)) return preferred;

  for (const auto& s : remaining) {
    std::vector<int> values{1, 2, 3, 4, 5};
    std::stable_sort(values.begin(), values.end(),
                     [&](int a, int b) { return std::abs(a - s.target) < std::abs(b - s.target); });
    for (int v : values) {
      Action a = Action::rate(s.slot->item_id, v);
      if (contains(allowed, a)) {
        return {a, "Closest remaining rating for " + s.slot->title + " given affinity " +
                       format_fixed(s.affinity, 2) + "."};
      }
    }
  }
  if (contains(allowed, Action::next_page())) return {Action::next_page(), "Moving on to the next page."};
  if (contains(allowed, Action::exit())) return {Action::exit(), "Nothing else worth doing here."};
  Action first = allowed.front();
  if (first.tag == ActionTag::search) first = Action::search("");
  return {first, "Only remaining option."};
}

std::string format_decision(const Action& action, std::string_view rationale) {
  return "BEST-ACTION: " + to_token(action) + "\nRATIONALE: " + std::string(rationale);
}

std::string oracle_lesson(const ReflectionView& v) {
  std::string picky = v.persona ? std::string(to_string(v.persona->pickiness)) : "moderately_picky";
  const auto& h = v.human;
  const auto& a = v.alternative;
  if (h.tag == ActionTag::rate && a.tag == ActionTag::rate && h.item_id == a.item_id) {
    double aff = v.memory ? oracle_affinity(*v.memory, h.item_id, v.global_mean) : v.global_mean;
    return "Rating item " + h.item_id + " " + std::to_string(h.value) + "/5 instead of " + std::to_string(a.value) +
           "/5 matches how I rate similar items (average " + format_fixed(aff, 2) + "). As a " + picky +
           " user, " + std::to_string(a.value) + "/5 would misstate my taste and skew what I am shown next.";
  }
  return "Choosing to have " + action_gloss(h) + " rather than " + action_gloss(a) + " led to a " +
         v.human_next_type + " state instead of a " + v.alternative_next_type + " state. It keeps my " + picky +
         " habits consistent and keeps the following pages relevant to me.";
}

int oracle_satisfaction(const InterviewView& v) {
  if (v.session_ratings.empty()) return 3;
  double sum = 0;
  for (const auto& [id, r] : v.session_ratings) sum += r;
  double mean = sum / static_cast<double>(v.session_ratings.size());
  return static_cast<int>(std::clamp<long>(std::lround(2.0 * mean), 1L, 10L));
}

bool oracle_interacted(const AgentMemory& memory, const std::string& item_id) {
  if (memory.graph().rating_of(item_id)) return true;
  auto aff = memory.genre_affinity(item_id);
  return aff && *aff >= kOracleAffinityFloor;
}

std::string OracleBackend::complete(const BackendCall& call) {
  switch (call.kind) {
    case CallKind::decide:
    case CallKind::retry:
    case CallKind::causal: {
      const auto* v = call.decision;
      if (!v || !v->persona || !v->state || !v->memory) {
        throw ValidationError("oracle backend needs a structured decision view");
      }
      auto choice = oracle_decide(*v->persona, *v->state, *v->memory, v->global_mean, v->allowed);
      return format_decision(choice.action, choice.rationale);
    }
    case CallKind::reflect:
      if (!call.reflection) throw ValidationError("oracle backend needs a reflection view");
      return oracle_lesson(*call.reflection);
    case CallKind::interview: {
      if (!call.interview) throw ValidationError("oracle backend needs an interview view");
      int s = oracle_satisfaction(*call.interview);
      return "RATING: " + std::to_string(s) + "\nREASON: I rated " +
             std::to_string(call.interview->session_ratings.size()) + " items over " +
             std::to_string(call.interview->pages_visited) + " pages.";
    }
    case CallKind::classify: {
      const auto* v = call.classify;
      if (!v || !v->memory || !v->catalog) throw ValidationError("oracle backend needs a classify view");
      std::string out;
      for (std::size_t i = 0; i < v->items.size(); ++i) {
        bool yes = oracle_interacted(*v->memory, v->items[i]);
        out += std::to_string(i + 1) + ". " + v->catalog->title_of(v->items[i]) + ": " +
               (yes ? "Interacted" : "Not Interacted") + "\n";
      }
      return out;
    }
    case CallKind::judge: break;
  }
  throw TransportError("oracle backend does not answer " + std::string(to_string(call.kind)) + " calls");
}

std::string RandomBackend::complete(const BackendCall& call) {
  std::uint64_t h = call.seed ^ fnv1a64(to_string(call.kind));
  h = splitmix64(h ^ static_cast<std::uint64_t>(call.step) * 0x9E3779B97F4A7C15ULL);
  if (!call.messages.empty()) h = splitmix64(h ^ fnv1a64(call.messages.front().content));
  switch (call.kind) {
    case CallKind::decide:
    case CallKind::retry:
    case CallKind::causal: {
      if (!call.decision || call.decision->allowed.empty()) throw ValidationError("random backend needs actions");
      const auto& allowed = call.decision->allowed;
      Action a = allowed[h % allowed.size()];
      if (a.tag == ActionTag::search) a = Action::search("");
      return format_decision(a, "random choice");
    }
    case CallKind::interview:
      return "RATING: " + std::to_string(1 + h % 10) + "\nREASON: random";
    case CallKind::classify: {
      std::string out;
      std::size_t n = call.classify ? call.classify->items.size() : 0;
      for (std::size_t i = 0; i < n; ++i) {
        h = splitmix64(h);
        out += std::to_string(i + 1) + ". item: " + ((h & 1) ? "Interacted" : "Not Interacted") + "\n";
      }
      return out;
    }
    case CallKind::judge: return "RATING: " + std::to_string(1 + h % 5);
    case CallKind::reflect: return "";
  }
  return "";
}

ScriptedBackend::ScriptedBackend(std::vector<ScriptedReply> replies) : replies_(replies.begin(), replies.end()) {}

ScriptedBackend::ScriptedBackend(const std::vector<std::string>& replies) {
  for (const auto& r : replies) replies_.push_back({r, false});
}

std::string ScriptedBackend::complete(const BackendCall& call) {
  std::lock_guard lock(mu_);
  BackendCall copy;
  copy.kind = call.kind;
  copy.messages = call.messages;
  copy.seed = call.seed;
  copy.step = call.step;
  calls_.push_back(std::move(copy));
  if (replies_.empty()) throw TransportError("scripted transcript exhausted");
  auto reply = std::move(replies_.front());
  replies_.pop_front();
  if (reply.transport_failure) throw TransportError("scripted transport failure");
  return reply.text;
}

std::vector<BackendCall> ScriptedBackend::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::size_t ScriptedBackend::call_count() const {
  std::lock_guard lock(mu_);
  return calls_.size();
}

std::string exchange_key(const BackendCall& call) {
  std::string material(to_string(call.kind));
  for (const auto& m : call.messages) {
    material += '\x1e';
    material += m.role;
    material += '\x1f';
    material += m.content;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(material)));
  return buf;
}

ExchangeLog::ExchangeLog(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::app | std::ios::binary);
  if (!out_) throw Error("cannot open exchange log " + path.string());
}

void ExchangeLog::append(const BackendCall& call, const json& request, const std::string& response) {
  json record = {{"key", exchange_key(call)},
                 {"kind", std::string(to_string(call.kind))},
                 {"request", request},
                 {"response", response}};
  std::lock_guard lock(mu_);
  out_ << record.dump() << '\n';
  out_.flush();
}

ReplayBackend::ReplayBackend(const std::filesystem::path& log_path) {
  for (const auto& r : read_jsonl(log_path)) {
    responses_[r.at("key").get<std::string>()].push_back(r.at("response").get<std::string>());
  }
}

std::string ReplayBackend::complete(const BackendCall& call) {
  auto key = exchange_key(call);
  std::lock_guard lock(mu_);
  auto it = responses_.find(key);
  if (it != responses_.end() && !it->second.empty()) {
    last_[key] = it->second.front();
    it->second.pop_front();
    return last_[key];
  }
  if (auto l = last_.find(key); l != last_.end()) return l->second;
  throw TransportError("no recorded exchange for " + std::string(to_string(call.kind)) + " call " + key);
}

}  // namespace alignsim
