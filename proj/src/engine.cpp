#include "patience/engine.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <random>

#include "patience/error.hpp"
#include "patience/prompts.hpp"
#include "patience/text.hpp"

namespace patience::engine {

namespace {

template <class E, std::size_t N>
E from_table(std::string_view s, const std::array<std::pair<E, std::string_view>, N>& table,
             const char* what) {
  for (const auto& [e, name] : table) {
    if (name == s) return e;
  }
  throw ConfigError(std::string("unknown ") + what + " '" + std::string(s) + "'");
}

template <class E, std::size_t N>
std::string_view to_table(E e, const std::array<std::pair<E, std::string_view>, N>& table) {
  for (const auto& [v, name] : table) {
    if (v == e) return name;
  }
  return "?";
}

constexpr std::array<std::pair<Status, std::string_view>, 3> kStatus{{
    {Status::active, "active"}, {Status::diagnosed, "diagnosed"}, {Status::exhausted, "exhausted"}}};
constexpr std::array<std::pair<Policy, std::string_view>, 4> kPolicy{{
    {Policy::app, "app"}, {Policy::random, "random"}, {Policy::first, "first"}, {Policy::oneshot, "oneshot"}}};
constexpr std::array<std::pair<StopReason, std::string_view>, 6> kStop{{
    {StopReason::max_turns, "max_turns"},
    {StopReason::entropy, "entropy"},
    {StopReason::top1, "top1"},
    {StopReason::uninformative, "uninformative"},
    {StopReason::pool_exhausted, "pool_exhausted"},
    {StopReason::oneshot, "oneshot"}}};

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void log(DialogueState& st, std::string op, std::string subject, const auto& elicited) {
  st.elicitations.push_back({st.iteration, std::move(op), std::move(subject), elicited.raw_text,
                             elicited.repaired, elicited.attempt_count});
}

}  // namespace

std::string_view to_string(Status s) { return to_table(s, kStatus); }
std::string_view to_string(Policy p) { return to_table(p, kPolicy); }
std::string_view to_string(StopReason r) { return to_table(r, kStop); }
Status status_from_string(std::string_view s) { return from_table(s, kStatus, "status"); }
Policy policy_from_string(std::string_view s) { return from_table(s, kPolicy, "policy"); }
StopReason stop_reason_from_string(std::string_view s) { return from_table(s, kStop, "stop reason"); }

void SessionConfig::validate() const {
  if (k < 1) throw ConfigError("k must be at least 1");
  if (l_max < prob::kMinResponses || l_max > prob::kDefaultMaxResponses) {
    throw ConfigError("l_max must be between 2 and 5");
  }
  if (max_turns < 1) throw ConfigError("max_turns must be at least 1");
  if (!(stop_entropy >= 0)) throw ConfigError("stop_entropy must be >= 0");
  if (!(stop_top1 >= 0 && stop_top1 <= 1)) throw ConfigError("stop_top1 must be in [0,1]");
  if (!(likelihood_floor >= 0 && likelihood_floor < 1)) {
    throw ConfigError("likelihood_floor must be in [0,1)");
  }
  if (top_n < 1) throw ConfigError("top_n must be at least 1");
  if (parallelism < 1) throw ConfigError("parallelism must be at least 1");
}

prob::UpdateOptions SessionConfig::update_options() const {
  return {l_max, likelihood_floor, row_normalize};
}

backend::Dialogue DialogueState::dialogue() const {
  backend::Dialogue d;
  d.push_back({opening_question, opening_statement});
  d.insert(d.end(), turns.begin(), turns.end());
  return d;
}

const prob::DiseaseDistribution& DialogueState::current() const {
  if (distribution_history.empty()) throw EngineError("no distribution predicted yet");
  return distribution_history.back();
}

void DialogueState::check_invariants() const {
  const auto n = static_cast<std::size_t>(iteration) + 1;
  if (distribution_history.size() != n) {
    throw EngineError("distribution_history has " + std::to_string(distribution_history.size()) +
                      " entries at iteration " + std::to_string(iteration));
  }
  if (entropy_trace.size() != n) {
    throw EngineError("entropy_trace has " + std::to_string(entropy_trace.size()) +
                      " entries at iteration " + std::to_string(iteration));
  }
  for (std::size_t t = 0; t < n; ++t) {
    if (entropy_trace[t] != prob::entropy(distribution_history[t])) {
      throw EngineError("entropy_trace[" + std::to_string(t) + "] does not match its distribution");
    }
    if (distribution_history[t].iteration() != static_cast<int>(t)) {
      throw EngineError("distribution_history[" + std::to_string(t) + "] has wrong iteration");
    }
  }
  if (turns.size() != static_cast<std::size_t>(iteration)) {
    throw EngineError("turn count differs from iteration");
  }
  if (status == Status::active && pending_question.empty()) {
    throw EngineError("active session without a pending question");
  }
  if (status != Status::active && !diagnosis) throw EngineError("finished session without diagnosis");
  if (diagnosis && !distribution_history.empty()) {
    const auto& entries = distribution_history.back().entries();
    if (entries.empty() || diagnosis->disease_id != entries.front().id) {
      throw EngineError("diagnosis is not the argmax of the final distribution");
    }
  }
}

Engine::Engine(const kb::KnowledgeBase& kb, const backend::Backend& backend, SessionConfig config)
    : kb_(kb), backend_(backend), config_(std::move(config)) {
  config_.validate();
}

kb::GatheredContext Engine::current_context(const DialogueState& state) const {
  std::vector<const kb::SymptomEntry*> symptoms;
  const bool fallback = state.mappings.empty() || state.mappings.back().fallback;
  if (fallback) {
    for (const auto& [id, s] : kb_.symptoms()) symptoms.push_back(&s);
  } else {
    for (const auto& id : state.mapped_symptoms) symptoms.push_back(kb_.find_symptom(id));
  }
  if (symptoms.empty()) return {};
  auto ctx = kb::gather_context(kb_, symptoms);
  if (fallback) {
    ctx.candidate_disease_ids.clear();
    for (const auto& [id, d] : kb_.diseases()) ctx.candidate_disease_ids.push_back(id);
  }
  return ctx;
}

void Engine::predict(DialogueState& st) const {
  const auto dialogue = st.dialogue();
  if (st.mappings.empty() || config_.remap_every_turn) {
    auto summary = backend_.extract_symptom_text(dialogue);
    log(st, "extract_symptom_text", "", summary);
    MappingRecord rec;
    rec.iteration = st.iteration;
    rec.summary = summary.value;
    for (const auto& hit : kb::map_to_symptoms(kb_, summary.value, config_.top_n)) {
      if (hit.score > 0) rec.symptoms.emplace_back(hit.symptom->id, hit.score);
    }
    rec.fallback = rec.symptoms.empty();
    st.mapped_symptoms.clear();
    for (const auto& [id, score] : rec.symptoms) st.mapped_symptoms.push_back(id);
    if (rec.fallback) {
      st.notes.push_back("iteration " + std::to_string(st.iteration) +
                         ": no knowledge-base symptom matched \"" + rec.summary +
                         "\"; using every disease as a candidate");
    }
    st.mappings.push_back(std::move(rec));
    st.mappings.back().candidate_disease_ids = current_context(st).candidate_disease_ids;
  }

  const auto ctx = current_context(st);
  std::vector<const kb::DiseaseEntry*> candidates;
  for (const auto& id : ctx.candidate_disease_ids) candidates.push_back(&kb_.disease(id));

  auto elicited = backend_.elicit_distribution(ctx.gamma_text, dialogue, candidates);
  log(st, "elicit_distribution", "", elicited);

  std::vector<prob::DiseaseProb> raw;
  for (const auto& w : elicited.value.weights) {
    if (kb_.find_disease(w.id)) raw.push_back(w);
  }
  // Diseases that dropped out of the candidate set stay in with zero weight.
  if (!st.distribution_history.empty()) {
    for (const auto& e : st.distribution_history.back().entries()) {
      bool present = std::any_of(raw.begin(), raw.end(), [&](const auto& w) { return w.id == e.id; });
      if (!present) raw.push_back({e.id, 0.0});
    }
  }
  auto normalized = prob::normalize(raw, elicited.value.other, st.iteration);
  for (auto& r : normalized.repairs) {
    st.notes.push_back("iteration " + std::to_string(st.iteration) + ": " + r);
  }
  st.entropy_trace.push_back(prob::entropy(normalized.dist));
  st.distribution_history.push_back(std::move(normalized.dist));
}

void Engine::select(DialogueState& st) const {
  const auto dialogue = st.dialogue();
  const auto& dist = st.current();
  const auto ctx = current_context(st);
  const auto opts = config_.update_options();

  auto pool = backend_.generate_questions(ctx.upsilon_text, dialogue, dist, config_.k);
  log(st, "generate_questions", "", pool);

  struct Lookahead {
    prob::LookaheadTable table;
    std::vector<ElicitationLog> logs;
  };
  auto lookahead = [&](const prob::CandidateQuestion& q) {
    Lookahead out;
    out.table.question = q;
    auto responses = backend_.simulate_responses(q, dialogue, config_.l_max);
    out.logs.push_back({st.iteration, "simulate_responses", "q" + std::to_string(q.id),
                        responses.raw_text, responses.repaired, responses.attempt_count});
    out.table.responses = responses.value;
    // Memoised within this turn only.
    std::map<std::string, backend::Elicited<std::vector<double>>> memo;
    for (const auto& e : dist.entries()) {
      auto it = memo.find(e.id);
      if (it == memo.end()) {
        it = memo.emplace(e.id, backend_.elicit_likelihoods(q, out.table.responses, kb_.disease(e.id),
                                                            dialogue)).first;
      }
      const auto& lik = it->second;
      out.logs.push_back({st.iteration, "elicit_likelihoods", "q" + std::to_string(q.id) + "/" + e.id,
                          lik.raw_text, lik.repaired, lik.attempt_count});
      out.table.likelihoods[e.id] = lik.value;
    }
    return out;
  };

  std::vector<Lookahead> results(pool.value.size());
  if (config_.parallelism <= 1) {
    for (std::size_t i = 0; i < pool.value.size(); ++i) results[i] = lookahead(pool.value[i]);
  } else {
    const std::size_t width = static_cast<std::size_t>(config_.parallelism);
    for (std::size_t start = 0; start < pool.value.size(); start += width) {
      std::vector<std::future<Lookahead>> inflight;
      for (std::size_t i = start; i < std::min(start + width, pool.value.size()); ++i) {
        inflight.push_back(std::async(std::launch::async, lookahead, std::cref(pool.value[i])));
      }
      for (std::size_t i = 0; i < inflight.size(); ++i) results[start + i] = inflight[i].get();
    }
  }

  std::vector<prob::LookaheadTable> tables;
  for (auto& r : results) {
    for (auto& l : r.logs) st.elicitations.push_back(std::move(l));
    tables.push_back(std::move(r.table));
  }
  auto choice = prob::select_question(dist, tables, config_.selection_mode, opts);

  SelectionReport rep;
  rep.iteration = st.iteration;
  rep.policy = config_.policy;
  rep.mode = config_.selection_mode;
  rep.prior_entropy = choice.prior_entropy;
  rep.uninformative = choice.uninformative;
  rep.notes = choice.notes;
  rep.argmin_id = choice.selected.id;
  for (std::size_t i = 0; i < tables.size(); ++i) {
    rep.candidates.push_back({tables[i], choice.scores[i].expected_entropy});
  }

  std::size_t pick = 0;
  switch (config_.policy) {
    case Policy::app:
    case Policy::oneshot:
      for (std::size_t i = 0; i < tables.size(); ++i) {
        if (tables[i].question.id == choice.selected.id) pick = i;
      }
      break;
    case Policy::first:
      pick = 0;
      break;
    case Policy::random: {
      std::mt19937_64 rng(config_.seed ^ fnv1a(st.opening_statement) ^
                          (0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(st.iteration + 1)));
      pick = static_cast<std::size_t>(rng() % tables.size());
      break;
    }
  }
  const auto& chosen = tables[pick].question;
  rep.selected_id = chosen.id;
  rep.selected_text = chosen.text;
  if (rep.uninformative) {
    rep.notes.push_back("uninformative turn: every candidate leaves the entropy unchanged");
  }

  auto phrased = backend_.humanize_question(chosen, dialogue);
  log(st, "humanize_question", "q" + std::to_string(chosen.id), phrased);
  rep.asked_text = phrased.value.empty() ? chosen.text : phrased.value;

  st.pending_question = rep.asked_text;
  st.selection_reports.push_back(std::move(rep));
}

std::optional<StopReason> Engine::stop_reason(const DialogueState& st) const {
  const auto& dist = st.current();
  if (st.iteration >= config_.max_turns) return StopReason::max_turns;
  if (st.entropy_trace.back() <= config_.stop_entropy) return StopReason::entropy;
  if (!dist.empty() && dist.entries().front().p >= config_.stop_top1) return StopReason::top1;
  const auto& reps = st.selection_reports;
  if (reps.size() >= 2 && reps[reps.size() - 1].uninformative && reps[reps.size() - 2].uninformative) {
    return StopReason::uninformative;
  }
  return std::nullopt;
}

Diagnosis Engine::make_diagnosis(const DialogueState& st, StopReason reason) const {
  const auto& dist = st.current();
  if (dist.empty()) throw EngineError("cannot diagnose from an empty distribution");
  Diagnosis d;
  d.disease_id = dist.entries().front().id;
  d.name = kb_.disease(d.disease_id).name;
  d.probability = dist.entries().front().p;
  d.distribution = dist;
  d.turns_used = st.iteration;
  d.stop_reason = reason;
  return d;
}

DialogueState Engine::start_session(std::string_view opening_statement) const {
  if (text::trim(opening_statement).empty()) throw EngineError("empty opening statement");
  DialogueState st;
  st.opening_question = prompts::opening_question();
  st.opening_statement = text::trim(opening_statement);
  predict(st);
  try {
    select(st);
  } catch (const EmptyPool&) {
    st.diagnosis = make_diagnosis(st, StopReason::pool_exhausted);
    st.status = Status::exhausted;
  }
  st.check_invariants();
  return st;
}

StepOutcome Engine::step(const DialogueState& state, std::string_view patient_response) const {
  if (state.status != Status::active) {
    throw EngineError("session is not active (status " + std::string(to_string(state.status)) + ")");
  }
  if (text::trim(patient_response).empty()) throw EngineError("empty patient response");

  StepOutcome out{state, std::nullopt, std::nullopt};
  auto& st = out.state;
  st.turns.push_back({st.pending_question, text::trim(patient_response)});
  st.pending_question.clear();
  st.iteration += 1;
  predict(st);

  if (auto reason = stop_reason(st)) {
    st.diagnosis = make_diagnosis(st, *reason);
    st.status = Status::diagnosed;
  } else {
    try {
      select(st);
    } catch (const EmptyPool&) {
      st.diagnosis = make_diagnosis(st, StopReason::pool_exhausted);
      st.status = Status::exhausted;
    }
  }
  st.check_invariants();
  if (st.status == Status::active) {
    out.next_question = st.pending_question;
  } else {
    out.diagnosis = st.diagnosis;
  }
  return out;
}

DialogueState Engine::conclude(const DialogueState& state, StopReason reason) const {
  if (state.status != Status::active) throw EngineError("session is not active");
  auto st = state;
  st.pending_question.clear();
  st.diagnosis = make_diagnosis(st, reason);
  st.status = Status::diagnosed;
  st.check_invariants();
  return st;
}

}  // namespace patience::engine
