#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "patience/backend.hpp"
#include "patience/engine.hpp"
#include "patience/kb.hpp"
#include "patience/profile.hpp"

namespace patience::backend {
class RemoteBackend;
}

namespace patience::sim {

PatientProfile parse_case(std::string_view json_text, const std::filesystem::path& source);

// A directory of *.json case files (sorted by file name) or a single file.
// Validates ground truths against `kb`.
std::vector<PatientProfile> load_cases(const std::filesystem::path& path, const kb::KnowledgeBase& kb);

struct CaseOutcome {
  std::string case_id;
  std::string policy;
  std::string ground_truth;
  bool failed = false;
  std::string error;
  std::string diagnosis_id;
  std::string stop_reason;
  bool hit = false;
  int turns = 0;
  std::vector<double> entropy_trace;
  std::vector<prob::DiseaseDistribution> distributions;

  bool operator==(const CaseOutcome&) const = default;
};

struct PolicyAggregate {
  std::string policy;
  std::size_t cases = 0;     // completed
  std::size_t failures = 0;
  std::vector<double> mean_entropy;  // per iteration 0..T, final value carried forward
  double final_mean_entropy = 0;
  double hit_rate = 0;
  double mean_turns = 0;

  bool operator==(const PolicyAggregate&) const = default;
};

struct BenchmarkRun {
  std::uint64_t seed = 0;
  std::vector<std::string> policies;
  std::vector<std::string> cases;
  std::vector<CaseOutcome> outcomes;  // policy order, then case id
  std::vector<PolicyAggregate> aggregates;
  int horizon = 0;  // T: longest trace length minus one

  bool operator==(const BenchmarkRun&) const = default;
};

// Runs one consultation to its end and returns the final state. The
// patient answers through `backend`'s respond_as_patient.
engine::DialogueState simulate_case(const PatientProfile& profile, const kb::KnowledgeBase& kb,
                                    const backend::Backend& backend, const engine::SessionConfig& config);

// Drives one consultation: the patient answers through `backend`'s
// respond_as_patient until the engine returns a diagnosis. Engine and
// backend errors become a failed outcome.
CaseOutcome run_case(const PatientProfile& profile, const kb::KnowledgeBase& kb,
                     const backend::Backend& backend, const engine::SessionConfig& config);

// Policies: app, random, first, oneshot. Cases run in parallel on up to
// `workers` threads; results do not depend on scheduling.
BenchmarkRun run_benchmark(const std::vector<PatientProfile>& cases, const kb::KnowledgeBase& kb,
                           const backend::Backend& backend, const engine::SessionConfig& config,
                           const std::vector<std::string>& policies, int workers = 1);

// Pads a trace to length horizon+1 by repeating its last value.
std::vector<double> carry_forward(const std::vector<double>& trace, int horizon);

std::vector<PolicyAggregate> compute_aggregates(const std::vector<CaseOutcome>& outcomes,
                                                const std::vector<std::string>& policies,
                                                int horizon);

nlohmann::json to_json(const BenchmarkRun& run);
BenchmarkRun run_from_json(const nlohmann::json& j);
std::string write_run(const BenchmarkRun& run);
BenchmarkRun load_run(const std::filesystem::path& path);

// policy,case_id,ground_truth,diagnosis,hit,turns,stop_reason,final_entropy,error
std::string cases_csv(const BenchmarkRun& run);

// Builds a persona from a raw consultation transcript with a remote
// generator. Not used by the benchmark.
PatientProfile profile_from_transcript(const backend::RemoteBackend& backend,
                                       std::string_view transcript, std::string case_id,
                                       std::string ground_truth);

}  // namespace patience::sim
