#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace patience::prompts {

struct PromptAsset {
  std::string id;
  std::string template_text;
  std::string notes;

  // Names of {{placeholder}}s in order of first appearance.
  std::vector<std::string> placeholders() const;
};

// Assets compiled in from assets/prompts/*.txt. Leading "# notes:" lines
// become `notes` and are stripped from the template.
const std::vector<PromptAsset>& all();
const PromptAsset& get(std::string_view id);  // throws patience::Error

// Fills every placeholder. Missing values and unused values are errors so a
// template and its caller cannot drift apart silently.
std::string render(const PromptAsset& asset, const std::map<std::string, std::string>& values);
std::string render(std::string_view id, const std::map<std::string, std::string>& values);

PromptAsset parse_asset(std::string id, std::string_view file_text);

std::string opening_question();

}  // namespace patience::prompts
