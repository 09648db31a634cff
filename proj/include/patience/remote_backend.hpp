#pragma once

#include <semaphore>
#include <string>
#include <vector>

#include "patience/backend.hpp"

namespace patience::backend {

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ParsedEndpoint {
  std::string scheme_host_port;  // "http://host:port"
  std::string path;              // "/v1/chat/completions"
};

ParsedEndpoint parse_endpoint(const std::string& url);

// Client for an OpenAI-style chat-completion endpoint.
//
// Each transport attempt is bounded by config.timeout and the whole call by
// timeout * (max_retries + 1). Connection failures, 429 and 5xx are retried;
// other 4xx fail immediately. Concurrent outstanding requests are capped at
// config.max_concurrency.
class RemoteBackend : public Backend {
 public:
  explicit RemoteBackend(BackendConfig config);

  std::string name() const override { return "remote"; }

  // Returns the assistant message content. Throws BackendUnavailable.
  std::string complete(const std::vector<ChatMessage>& messages, double temperature) const;

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

  const BackendConfig& config() const { return config_; }

 private:
  // Strict parse, one stricter reprompt, then lenient repair.
  Elicited<std::map<std::string, double>> elicit_id_values(const std::string& prompt,
                                                           const std::vector<std::string>& ids) const;
  Elicited<std::string> complete_nonempty(const std::vector<ChatMessage>& messages,
                                          double temperature) const;

  BackendConfig config_;
  ParsedEndpoint endpoint_;
  std::string api_key_;
  mutable std::counting_semaphore<1024> slots_;
};

}  // namespace patience::backend
