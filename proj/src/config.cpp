#include "patience/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "patience/error.hpp"
#include "patience/text.hpp"

namespace patience::config {

namespace {

std::string unquote(std::string_view v, const std::string& where) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') {
    std::string out;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
      if (v[i] == '\\' && i + 2 < v.size()) {
        ++i;
        out += v[i] == 'n' ? '\n' : v[i];
      } else {
        out += v[i];
      }
    }
    return out;
  }
  if (!v.empty() && v.front() == '"') throw ConfigError(where + ": unterminated string");
  return std::string(v);
}

// Drops a trailing comment that is not inside quotes.
std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

template <class T>
T number(std::string_view key, std::string_view v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("invalid value '" + std::string(v) + "' for " + std::string(key));
  }
  return out;
}

double real(std::string_view key, std::string_view v) {
  std::string s(v);
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) {
    throw ConfigError("invalid value '" + s + "' for " + std::string(key));
  }
  return out;
}

bool boolean(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("invalid value '" + std::string(v) + "' for " + std::string(key) + " (expected true or false)");
}

std::vector<std::string> list(std::string_view v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in{std::string(v)};
  while (std::getline(in, item, ',')) {
    item = text::trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

using Setter = std::function<void(AppConfig&, std::string_view key, std::string_view v)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"k", [](AppConfig& c, auto k, auto v) { c.session.k = number<std::size_t>(k, v); }},
      {"l_max", [](AppConfig& c, auto k, auto v) { c.session.l_max = number<std::size_t>(k, v); }},
      {"max_turns", [](AppConfig& c, auto k, auto v) { c.session.max_turns = number<int>(k, v); }},
      {"stop_entropy", [](AppConfig& c, auto k, auto v) { c.session.stop_entropy = real(k, v); }},
      {"stop_top1", [](AppConfig& c, auto k, auto v) { c.session.stop_top1 = real(k, v); }},
      {"selection_mode",
       [](AppConfig& c, auto, auto v) { c.session.selection_mode = prob::selection_mode_from_string(v); }},
      {"row_normalize", [](AppConfig& c, auto k, auto v) { c.session.row_normalize = boolean(k, v); }},
      {"likelihood_floor", [](AppConfig& c, auto k, auto v) { c.session.likelihood_floor = real(k, v); }},
      {"remap_every_turn", [](AppConfig& c, auto k, auto v) { c.session.remap_every_turn = boolean(k, v); }},
      {"top_n", [](AppConfig& c, auto k, auto v) { c.session.top_n = number<std::size_t>(k, v); }},
      {"policy", [](AppConfig& c, auto, auto v) { c.session.policy = engine::policy_from_string(v); }},
      {"seed",
       [](AppConfig& c, auto k, auto v) {
         c.session.seed = number<std::uint64_t>(k, v);
         c.session.backend.seed = c.session.seed;
       }},
      {"parallelism", [](AppConfig& c, auto k, auto v) { c.session.parallelism = number<int>(k, v); }},
      {"kb", [](AppConfig& c, auto, auto v) { c.session.kb_path = std::string(v); }},
      {"backend",
       [](AppConfig& c, auto k, auto v) {
         if (v == "scripted") {
           c.session.backend.kind = backend::BackendKind::scripted;
         } else if (v == "remote") {
           c.session.backend.kind = backend::BackendKind::remote;
         } else {
           throw ConfigError("invalid value '" + std::string(v) + "' for " + std::string(k) +
                             " (expected scripted or remote)");
         }
       }},
      {"script_bundle", [](AppConfig& c, auto, auto v) { c.session.backend.script_bundle = std::string(v); }},
      {"strict", [](AppConfig& c, auto k, auto v) { c.session.backend.strict = boolean(k, v); }},
      {"endpoint", [](AppConfig& c, auto, auto v) { c.session.backend.endpoint = std::string(v); }},
      {"model", [](AppConfig& c, auto, auto v) { c.session.backend.model_name = std::string(v); }},
      {"temperature", [](AppConfig& c, auto k, auto v) { c.session.backend.temperature = real(k, v); }},
      {"persona_temperature",
       [](AppConfig& c, auto k, auto v) { c.session.backend.persona_temperature = real(k, v); }},
      {"timeout_ms",
       [](AppConfig& c, auto k, auto v) {
         c.session.backend.timeout = std::chrono::milliseconds(number<long>(k, v));
       }},
      {"max_retries", [](AppConfig& c, auto k, auto v) { c.session.backend.max_retries = number<int>(k, v); }},
      {"api_key_env", [](AppConfig& c, auto, auto v) { c.session.backend.api_key_env = std::string(v); }},
      {"max_concurrency",
       [](AppConfig& c, auto k, auto v) { c.session.backend.max_concurrency = number<int>(k, v); }},
      {"policies",
       [](AppConfig& c, auto k, auto v) {
         auto items = list(v);
         if (items.empty()) throw ConfigError(std::string(k) + " must name at least one policy");
         for (const auto& p : items) engine::policy_from_string(p);
         c.policies = std::move(items);
       }},
      {"workers", [](AppConfig& c, auto k, auto v) { c.workers = number<int>(k, v); }},
      {"cases", [](AppConfig& c, auto, auto v) { c.cases = std::string(v); }},
      {"out", [](AppConfig& c, auto, auto v) { c.out = std::string(v); }},
      {"addr", [](AppConfig& c, auto, auto v) { c.addr = std::string(v); }},
      {"transcript_dir", [](AppConfig& c, auto, auto v) { c.transcript_dir = std::string(v); }},
      {"session_ttl_s",
       [](AppConfig& c, auto k, auto v) { c.session_ttl = std::chrono::seconds(number<long>(k, v)); }},
      {"ui_dir", [](AppConfig& c, auto, auto v) { c.ui_dir = std::string(v); }},
      {"cors_origin", [](AppConfig& c, auto, auto v) { c.cors_origin = std::string(v); }},
  };
  return table;
}

}  // namespace

std::map<std::string, std::string> parse(std::string_view text, std::string_view source) {
  std::map<std::string, std::string> out;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string where = std::string(source) + ":" + std::to_string(line_no);
    std::string line = text::trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') throw ConfigError(where + ": sections are not supported; use flat keys");
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    std::string key = text::trim(std::string_view(line).substr(0, eq));
    std::string value = text::trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": missing key");
    if (value.empty()) throw ConfigError(where + ": missing value for '" + key + "'");
    if (value.front() == '[') {
      if (value.back() != ']') throw ConfigError(where + ": unterminated array for '" + key + "'");
      std::vector<std::string> items;
      for (const auto& item : list(std::string_view(value).substr(1, value.size() - 2))) {
        items.push_back(unquote(item, where));
      }
      value = text::join(items, ",");
    } else {
      value = unquote(value, where);
    }
    if (!out.emplace(key, value).second) throw ConfigError(where + ": duplicate key '" + key + "'");
  }
  return out;
}

void apply_setting(AppConfig& cfg, std::string_view key, std::string_view value) {
  const auto& table = setters();
  auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  try {
    it->second(cfg, key, value);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError("invalid value '" + std::string(value) + "' for " + std::string(key) + ": " + e.what());
  }
}

void apply(AppConfig& cfg, const std::map<std::string, std::string>& values, std::string_view source) {
  for (const auto& [k, v] : values) {
    try {
      apply_setting(cfg, k, v);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(source) + ": " + e.what());
    }
  }
}

AppConfig load(const std::filesystem::path& path, AppConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  apply(base, parse(ss.str(), path.string()), path.string());
  return base;
}

std::vector<std::string> known_keys() {
  std::vector<std::string> out;
  for (const auto& [k, _] : setters()) out.push_back(k);
  return out;
}

}  // namespace patience::config
