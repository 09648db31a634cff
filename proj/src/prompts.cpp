#include "patience/prompts.hpp"

#include <algorithm>
#include <set>

#include "patience/error.hpp"
#include "patience/text.hpp"
#include "prompts_embedded.hpp"

namespace patience::prompts {

std::vector<std::string> PromptAsset::placeholders() const {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while ((pos = template_text.find("{{", pos)) != std::string::npos) {
    auto end = template_text.find("}}", pos + 2);
    if (end == std::string::npos) break;
    auto name = template_text.substr(pos + 2, end - pos - 2);
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
    pos = end + 2;
  }
  return out;
}

PromptAsset parse_asset(std::string id, std::string_view file_text) {
  PromptAsset a;
  a.id = std::move(id);
  std::string_view rest = file_text;
  constexpr std::string_view kNotes = "# notes:";
  while (rest.starts_with(kNotes)) {
    auto nl = rest.find('\n');
    auto line = rest.substr(kNotes.size(), nl == std::string_view::npos ? rest.npos : nl - kNotes.size());
    if (!a.notes.empty()) a.notes += ' ';
    a.notes += text::trim(line);
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
  }
  a.template_text = std::string(rest);
  while (!a.template_text.empty() && a.template_text.back() == '\n') a.template_text.pop_back();
  return a;
}

const std::vector<PromptAsset>& all() {
  static const std::vector<PromptAsset> assets = [] {
    std::vector<PromptAsset> v;
    for (const auto& e : embedded::kAssets) v.push_back(parse_asset(std::string(e.id), e.text));
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    return v;
  }();
  return assets;
}

const PromptAsset& get(std::string_view id) {
  for (const auto& a : all()) {
    if (a.id == id) return a;
  }
  throw Error("unknown prompt asset '" + std::string(id) + "'");
}

std::string render(const PromptAsset& asset, const std::map<std::string, std::string>& values) {
  std::string out;
  std::set<std::string> used;
  const auto& t = asset.template_text;
  std::size_t pos = 0;
  while (true) {
    auto open = t.find("{{", pos);
    if (open == std::string::npos) {
      out.append(t, pos);
      break;
    }
    auto close = t.find("}}", open + 2);
    if (close == std::string::npos) throw Error("unterminated placeholder in asset '" + asset.id + "'");
    out.append(t, pos, open - pos);
    auto name = t.substr(open + 2, close - open - 2);
    auto it = values.find(name);
    if (it == values.end()) {
      throw Error("asset '" + asset.id + "' needs a value for {{" + name + "}}");
    }
    out += it->second;
    used.insert(name);
    pos = close + 2;
  }
  for (const auto& [k, v] : values) {
    if (!used.contains(k)) throw Error("asset '" + asset.id + "' has no placeholder {{" + k + "}}");
  }
  return out;
}

std::string render(std::string_view id, const std::map<std::string, std::string>& values) {
  return render(get(id), values);
}

std::string opening_question() { return get("opening_question").template_text; }

}  // namespace patience::prompts
