#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "patience/kb.hpp"
#include "patience/prob.hpp"
#include "patience/profile.hpp"

namespace patience::backend {

// Every generator output keeps its verbatim text for the transparency trace.
template <class T>
struct Elicited {
  T value{};
  std::string raw_text;
  bool repaired = false;  // strict parsing failed at least once and repair was applied
  int attempt_count = 1;
};

struct Turn {
  std::string question;
  std::string response;

  bool operator==(const Turn&) const = default;
};

// Opening exchange first, then follow-ups in order.
using Dialogue = std::vector<Turn>;

std::string render_dialogue(const Dialogue& d);

struct WeightVector {
  std::vector<prob::DiseaseProb> weights;  // one per candidate id, in candidate order
  double other = 0;
};

enum class BackendKind { scripted, remote };

struct BackendConfig {
  BackendKind kind = BackendKind::scripted;
  std::string endpoint;  // e.g. http://127.0.0.1:8080/v1/chat/completions
  std::string model_name = "default";
  double temperature = 0.0;
  double persona_temperature = 0.7;
  std::chrono::milliseconds timeout{30000};
  int max_retries = 2;
  std::uint64_t seed = 0;
  std::filesystem::path script_bundle;
  bool strict = false;  // scripted: unknown fingerprints raise instead of defaulting
  std::string api_key_env = "PATIENCE_API_KEY";
  int max_concurrency = 4;

  void validate() const;
};

// The generator boundary. Implementations must be safe to call concurrently.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string name() const = 0;

  virtual Elicited<std::string> extract_symptom_text(const Dialogue& dialogue) const = 0;

  virtual Elicited<WeightVector> elicit_distribution(
      std::string_view gamma_text, const Dialogue& dialogue,
      const std::vector<const kb::DiseaseEntry*>& candidates) const = 0;

  virtual Elicited<std::vector<prob::CandidateQuestion>> generate_questions(
      std::string_view upsilon_text, const Dialogue& dialogue,
      const prob::DiseaseDistribution& dist, std::size_t k) const = 0;

  virtual Elicited<std::vector<std::string>> simulate_responses(
      const prob::CandidateQuestion& question, const Dialogue& dialogue,
      std::size_t l_max) const = 0;

  // One batched call per (question, disease): P(r_l | Γ(d)) for every response.
  virtual Elicited<std::vector<double>> elicit_likelihoods(
      const prob::CandidateQuestion& question, std::span<const std::string> responses,
      const kb::DiseaseEntry& disease, const Dialogue& dialogue) const = 0;

  // Plain-language rewrite of the selected question.
  virtual Elicited<std::string> humanize_question(const prob::CandidateQuestion& question,
                                                  const Dialogue& dialogue) const = 0;

  virtual Elicited<std::string> respond_as_patient(const PatientProfile& profile,
                                                   std::string_view question,
                                                   const Dialogue& dialogue) const = 0;

  // Single-response convenience over elicit_likelihoods with no question
  // context.
  Elicited<double> elicit_likelihood(std::string_view response_text,
                                     const kb::DiseaseEntry& disease) const;
};

std::unique_ptr<Backend> make_backend(const BackendConfig& config);

// ---- output contracts shared by implementations --------------------------

// Drops empty and duplicate texts (case-insensitive), keeps order, caps at k,
// renumbers ids 0..n-1. Throws BackendError if nothing survives.
std::vector<prob::CandidateQuestion> finalize_questions(std::vector<prob::CandidateQuestion> qs,
                                                        std::size_t k);

// Dedups, truncates to l_max, and requires at least two distinct answers.
std::vector<std::string> finalize_responses(std::vector<std::string> rs, std::size_t l_max);

// Clamps into [0,1]; returns true if anything changed.
bool clamp_probabilities(std::vector<double>& values);

// ---- structured-output parsing --------------------------------------------

// Contents of the first ``` fenced block, if any.
std::optional<std::string> fenced_block(std::string_view text);

// Strict: a fenced block whose non-empty lines are exactly "id: number" for
// every expected id and nothing else.
std::optional<std::map<std::string, double>> parse_id_values_strict(
    std::string_view text, const std::vector<std::string>& ids);

// Tolerant repair: for each expected id, the first number that follows it
// anywhere in the text. Percentages are divided by 100. Ids without a number
// are absent from the result.
std::map<std::string, double> parse_id_values_lenient(std::string_view text,
                                                      const std::vector<std::string>& ids);

// "1. text", "2) text", "- text" lines.
std::vector<std::string> parse_list_lines(std::string_view text);

}  // namespace patience::backend
