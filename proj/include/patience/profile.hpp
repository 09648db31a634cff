#pragma once

#include <string>
#include <vector>

namespace patience {

struct PatientFact {
  std::string topic;
  std::string answer;
  std::vector<std::string> keywords;  // empty: the topic's own words

  bool operator==(const PatientFact&) const = default;
};

// Simulated patient persona. `opening` is what the patient says to the
// opening question; when a case file omits it, it is built from `symptoms`.
struct PatientProfile {
  std::string case_id;
  std::vector<std::string> symptoms;
  int age = 0;
  std::string intention;
  std::string personality;
  std::vector<PatientFact> facts;
  std::string ground_truth;
  std::string specialty;
  std::string opening;

  bool operator==(const PatientProfile&) const = default;
};

}  // namespace patience
