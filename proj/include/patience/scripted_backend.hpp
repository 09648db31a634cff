#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "patience/backend.hpp"

namespace patience::backend {

struct ScriptQuestion {
  std::string text;
  std::string rationale;
  std::string humanized;  // empty: asked verbatim
  std::vector<std::string> responses;
  std::map<std::string, std::vector<double>> likelihoods;  // disease id -> per response
};

// One consultation script. A dialogue belongs to the script whose `opening`
// equals (after text::normalize) the patient's reply to the opening question.
struct Script {
  std::string name;
  std::filesystem::path source;
  std::string opening;
  std::string extract;
  std::vector<prob::DiseaseProb> prior;  // raw weights, bundle order
  double other = 0;
  std::vector<ScriptQuestion> questions;
  // normalized patient answer -> disease id -> multiplicative weight
  std::map<std::string, std::map<std::string, double>> evidence;
};

class ScriptBundle {
 public:
  static ScriptBundle load(const std::filesystem::path& dir);
  static Script parse_script(std::string_view json_text, const std::filesystem::path& source);
  static Script parse_script_object(const nlohmann::json& j, const std::filesystem::path& source);

  explicit ScriptBundle(std::vector<Script> scripts);

  const std::vector<Script>& scripts() const { return scripts_; }
  const Script* find_by_opening(std::string_view opening) const;
  const Script* find_by_name(std::string_view name) const;

 private:
  std::vector<Script> scripts_;
  std::map<std::string, std::size_t> by_opening_;
};

// Deterministic replay of a script bundle. Stateless after construction.
//
// Fingerprints are the operation plus normalized key inputs: the opening
// statement for dialogue-level operations, the question text for responses,
// (question, response, disease) for likelihoods. In lenient mode a miss
// returns the documented defaults (docs/scripted-backend.md); in strict mode
// it throws ScriptedMiss.
class ScriptedBackend : public Backend {
 public:
  ScriptedBackend(ScriptBundle bundle, BackendConfig config);

  std::string name() const override { return "scripted"; }

  Elicited<std::string> extract_symptom_text(const Dialogue& dialogue) const override;
  Elicited<WeightVector> elicit_distribution(
      std::string_view gamma_text, const Dialogue& dialogue,
      const std::vector<const kb::DiseaseEntry*>& candidates) const override;
  Elicited<std::vector<prob::CandidateQuestion>> generate_questions(
      std::string_view upsilon_text, const Dialogue& dialogue,
      const prob::DiseaseDistribution& dist, std::size_t k) const override;
  Elicited<std::vector<std::string>> simulate_responses(const prob::CandidateQuestion& question,
                                                        const Dialogue& dialogue,
                                                        std::size_t l_max) const override;
  Elicited<std::vector<double>> elicit_likelihoods(const prob::CandidateQuestion& question,
                                                   std::span<const std::string> responses,
                                                   const kb::DiseaseEntry& disease,
                                                   const Dialogue& dialogue) const override;
  Elicited<std::string> humanize_question(const prob::CandidateQuestion& question,
                                          const Dialogue& dialogue) const override;
  Elicited<std::string> respond_as_patient(const PatientProfile& profile,
                                           std::string_view question,
                                           const Dialogue& dialogue) const override;

  const ScriptBundle& bundle() const { return bundle_; }

  static constexpr double kDefaultLikelihood = 0.5;
  static constexpr std::string_view kUnsureAnswer = "I'm not sure";

 private:
  const Script* script_for(const Dialogue& dialogue) const;
  const ScriptQuestion* find_question(const Script* script, std::string_view text) const;
  [[noreturn]] void miss(const std::string& fingerprint) const;

  ScriptBundle bundle_;
  BackendConfig config_;
};

// The opening statement a scripted patient gives: the profile's `opening`,
// or its symptom phrases joined into sentences.
std::string opening_statement(const PatientProfile& profile);

}  // namespace patience::backend
