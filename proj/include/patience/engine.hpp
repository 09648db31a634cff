#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "patience/backend.hpp"
#include "patience/kb.hpp"
#include "patience/prob.hpp"

namespace patience::engine {

enum class Status { active, diagnosed, exhausted };
enum class Policy { app, random, first, oneshot };
enum class StopReason { max_turns, entropy, top1, uninformative, pool_exhausted, oneshot };

std::string_view to_string(Status s);
std::string_view to_string(Policy p);
std::string_view to_string(StopReason r);
Status status_from_string(std::string_view s);
Policy policy_from_string(std::string_view s);
StopReason stop_reason_from_string(std::string_view s);

struct SessionConfig {
  std::size_t k = prob::kDefaultPoolSize;
  std::size_t l_max = prob::kDefaultMaxResponses;
  int max_turns = 6;
  double stop_entropy = 0.5;  // nats
  double stop_top1 = 0.6;
  prob::SelectionMode selection_mode = prob::SelectionMode::literal;
  bool row_normalize = false;
  double likelihood_floor = prob::kLikelihoodFloor;
  bool remap_every_turn = true;
  std::size_t top_n = kb::kDefaultTopN;
  Policy policy = Policy::app;
  std::uint64_t seed = 0;  // random policy
  int parallelism = 1;     // concurrent lookahead evaluations
  std::filesystem::path kb_path;
  backend::BackendConfig backend;

  void validate() const;
  prob::UpdateOptions update_options() const;
};

// One candidate's lookahead: R_k, P(r | Γ(d)) and H_{q_k}.
struct CandidateRecord {
  prob::LookaheadTable table;
  double expected_entropy = 0;

  bool operator==(const CandidateRecord&) const = default;
};

struct SelectionReport {
  int iteration = 0;
  Policy policy = Policy::app;
  prob::SelectionMode mode = prob::SelectionMode::literal;
  double prior_entropy = 0;
  std::vector<CandidateRecord> candidates;
  int argmin_id = 0;    // entropy-minimising choice, whatever the policy
  int selected_id = 0;  // what was actually asked
  std::string selected_text;  // before the plain-language rewrite
  std::string asked_text;     // after it
  bool uninformative = false;
  std::vector<std::string> notes;

  bool operator==(const SelectionReport&) const = default;
};

struct MappingRecord {
  int iteration = 0;
  std::string summary;
  std::vector<std::pair<std::string, double>> symptoms;  // id, score (score > 0 only)
  std::vector<std::string> candidate_disease_ids;
  bool fallback = false;

  bool operator==(const MappingRecord&) const = default;
};

struct ElicitationLog {
  int iteration = 0;
  std::string operation;
  std::string subject;
  std::string raw_text;
  bool repaired = false;
  int attempt_count = 1;

  bool operator==(const ElicitationLog&) const = default;
};

struct Diagnosis {
  std::string disease_id;
  std::string name;
  double probability = 0;
  prob::DiseaseDistribution distribution;
  int turns_used = 0;
  StopReason stop_reason = StopReason::max_turns;

  bool operator==(const Diagnosis&) const = default;
};

// S_t and everything derived from it. `turns` holds follow-up exchanges
// only; the opening exchange is kept separately.
struct DialogueState {
  std::string opening_question;
  std::string opening_statement;
  std::vector<backend::Turn> turns;
  int iteration = 0;
  std::vector<std::string> mapped_symptoms;
  std::vector<prob::DiseaseDistribution> distribution_history;
  std::vector<double> entropy_trace;
  std::vector<SelectionReport> selection_reports;
  std::vector<MappingRecord> mappings;
  std::vector<ElicitationLog> elicitations;
  std::vector<std::string> notes;
  Status status = Status::active;
  std::string pending_question;  // asked, not yet answered
  std::optional<Diagnosis> diagnosis;

  backend::Dialogue dialogue() const;
  const prob::DiseaseDistribution& current() const;
  // Throws EngineError naming the first violated invariant.
  void check_invariants() const;

  bool operator==(const DialogueState&) const = default;
};

struct StepOutcome {
  DialogueState state;
  std::optional<std::string> next_question;
  std::optional<Diagnosis> diagnosis;
};

// Map -> predict -> generate -> lookahead -> select -> ask -> incorporate.
// Holds references; the knowledge base and backend must outlive it.
class Engine {
 public:
  Engine(const kb::KnowledgeBase& kb, const backend::Backend& backend, SessionConfig config);

  // Returns the initial state; its pending_question is the first follow-up.
  DialogueState start_session(std::string_view opening_statement) const;

  // Pure with respect to `state`: on failure the caller's state is intact.
  StepOutcome step(const DialogueState& state, std::string_view patient_response) const;

  // Ends an active session now with the argmax of the current distribution.
  DialogueState conclude(const DialogueState& state, StopReason reason) const;

  const SessionConfig& config() const { return config_; }
  const kb::KnowledgeBase& knowledge_base() const { return kb_; }

 private:
  void predict(DialogueState& state) const;
  // Throws EmptyPool when no question is left to ask.
  void select(DialogueState& state) const;
  std::optional<StopReason> stop_reason(const DialogueState& state) const;
  Diagnosis make_diagnosis(const DialogueState& state, StopReason reason) const;
  kb::GatheredContext current_context(const DialogueState& state) const;

  const kb::KnowledgeBase& kb_;
  const backend::Backend& backend_;
  SessionConfig config_;
};

}  // namespace patience::engine
