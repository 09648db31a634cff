#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "patience/engine.hpp"

namespace patience::transcript {

inline constexpr std::string_view kFormat = "patience-transcript";
inline constexpr int kVersion = 1;

nlohmann::json to_json(const prob::DiseaseDistribution& d);
prob::DiseaseDistribution distribution_from_json(const nlohmann::json& j);

nlohmann::json to_json(const engine::SessionConfig& c);
engine::SessionConfig config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const engine::Diagnosis& d);
engine::Diagnosis diagnosis_from_json(const nlohmann::json& j);

nlohmann::json to_json(const engine::SelectionReport& r);
engine::SelectionReport selection_report_from_json(const nlohmann::json& j);

// Full transparency report of a session: mapped symptoms, distributions,
// entropies, candidate pools, per-question H, selections and repairs.
nlohmann::json trace(const engine::DialogueState& state);
engine::DialogueState state_from_json(const nlohmann::json& j);

struct Transcript {
  engine::SessionConfig config;
  engine::DialogueState state;
};

// One session per document; 2-space indented JSON with sorted keys, so
// identical sessions serialise to identical bytes.
std::string write(const engine::DialogueState& state, const engine::SessionConfig& config);
Transcript read(std::string_view text);

void save(const std::filesystem::path& path, const engine::DialogueState& state,
          const engine::SessionConfig& config);
Transcript load(const std::filesystem::path& path);

}  // namespace patience::transcript
