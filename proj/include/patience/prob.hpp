#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace patience::prob {

inline constexpr double kSumTolerance = 1e-9;
inline constexpr double kLikelihoodFloor = 1e-6;
inline constexpr std::size_t kDefaultPoolSize = 5;  // K
inline constexpr std::size_t kMinResponses = 2;
inline constexpr std::size_t kDefaultMaxResponses = 5;  // L_max

struct DiseaseProb {
  std::string id;
  double p = 0;

  bool operator==(const DiseaseProb&) const = default;
};

// P_t(D) plus the residual "and others" bucket. Entries are kept sorted by
// descending probability, ties by id; construction validates the invariants.
class DiseaseDistribution {
 public:
  DiseaseDistribution() = default;
  DiseaseDistribution(std::vector<DiseaseProb> entries, double other_mass, int iteration);

  const std::vector<DiseaseProb>& entries() const { return entries_; }
  double other_mass() const { return other_mass_; }
  int iteration() const { return iteration_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  // 0 for ids not present.
  double probability(std::string_view id) const;
  bool contains(std::string_view id) const;

  DiseaseDistribution with_iteration(int t) const;

  bool operator==(const DiseaseDistribution&) const = default;

 private:
  std::vector<DiseaseProb> entries_;
  double other_mass_ = 0;
  int iteration_ = 0;
};

struct CandidateQuestion {
  int id = 0;
  std::string text;
  std::string rationale;

  bool operator==(const CandidateQuestion&) const = default;
};

// Responses R_k and P(r_k^l | Γ(d_i)) rows keyed by disease id.
struct LookaheadTable {
  CandidateQuestion question;
  std::vector<std::string> responses;
  std::map<std::string, std::vector<double>> likelihoods;

  bool operator==(const LookaheadTable&) const = default;
};

enum class SelectionMode { literal, eig };

std::string_view to_string(SelectionMode m);
SelectionMode selection_mode_from_string(std::string_view s);

struct UpdateOptions {
  std::size_t l_max = kDefaultMaxResponses;
  double floor = kLikelihoodFloor;
  bool row_normalize = false;
};

// Shannon entropy in nats over entries and the residual bucket, 0 ln 0 = 0.
double entropy(const DiseaseDistribution& dist);

// Likelihood rows after validation, flooring and optional row normalisation,
// in prior entry order, plus the residual bucket's row (prior-weighted mean of
// the disease rows, so it never moves relative to an equal-row-sum table).
struct PreparedTable {
  std::vector<std::vector<double>> rows;
  std::vector<double> other_row;
  std::vector<std::string> notes;  // floored cells etc.
};

PreparedTable prepare_table(const DiseaseDistribution& prior, const LookaheadTable& table,
                            const UpdateOptions& opts = {});

// Response-marginalised posterior P(d_i | q_k).
DiseaseDistribution posterior_given_question(const DiseaseDistribution& prior,
                                             const LookaheadTable& table,
                                             const UpdateOptions& opts = {});

// literal: entropy of the response-marginalised posterior.
// eig: sum_l P(r_l) * H(P(. | r_l)).
double expected_entropy(const DiseaseDistribution& prior, const LookaheadTable& table,
                        SelectionMode mode = SelectionMode::literal,
                        const UpdateOptions& opts = {});

struct QuestionScore {
  int question_id = 0;
  double expected_entropy = 0;

  bool operator==(const QuestionScore&) const = default;
};

struct SelectionResult {
  CandidateQuestion selected;
  std::vector<QuestionScore> scores;  // in table order
  double prior_entropy = 0;
  bool uninformative = false;  // every H_q within 1e-9 of prior entropy
  std::vector<std::string> notes;

  bool operator==(const SelectionResult&) const = default;
};

// argmin over H_q, ties by smallest question id.
SelectionResult select_question(const DiseaseDistribution& prior,
                                std::span<const LookaheadTable> tables,
                                SelectionMode mode = SelectionMode::literal,
                                const UpdateOptions& opts = {});

struct NormalizeResult {
  DiseaseDistribution dist;
  std::vector<std::string> repairs;
};

NormalizeResult normalize(const std::vector<DiseaseProb>& raw, double other_weight,
                          int iteration);

}  // namespace patience::prob
