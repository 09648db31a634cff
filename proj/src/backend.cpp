#include "patience/backend.hpp"

#include <algorithm>
#include <cmath>
#include <regex>
#include <set>
#include <sstream>

#include "patience/error.hpp"
#include "patience/remote_backend.hpp"
#include "patience/scripted_backend.hpp"
#include "patience/text.hpp"

namespace patience::backend {

std::string render_dialogue(const Dialogue& d) {
  std::ostringstream out;
  for (const auto& t : d) {
    out << "Doctor: " << t.question << "\n";
    out << "Patient: " << t.response << "\n";
  }
  return out.str();
}

void BackendConfig::validate() const {
  if (kind == BackendKind::remote && endpoint.empty()) {
    throw ConfigError("remote backend requires an endpoint");
  }
  if (kind == BackendKind::scripted && script_bundle.empty()) {
    throw ConfigError("scripted backend requires a script bundle path");
  }
  if (temperature < 0 || persona_temperature < 0) throw ConfigError("temperature must be >= 0");
  if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
  if (timeout.count() <= 0) throw ConfigError("timeout must be positive");
  if (max_concurrency < 1) throw ConfigError("max_concurrency must be >= 1");
}

Elicited<double> Backend::elicit_likelihood(std::string_view response_text,
                                            const kb::DiseaseEntry& disease) const {
  if (disease.context.empty()) throw BackendError("disease '" + disease.id + "' has no context");
  const std::string r(response_text);
  prob::CandidateQuestion none{-1, "", ""};
  auto batch = elicit_likelihoods(none, std::span<const std::string>(&r, 1), disease, {});
  return {batch.value.at(0), std::move(batch.raw_text), batch.repaired, batch.attempt_count};
}

std::unique_ptr<Backend> make_backend(const BackendConfig& config) {
  config.validate();
  if (config.kind == BackendKind::remote) return std::make_unique<RemoteBackend>(config);
  return std::make_unique<ScriptedBackend>(ScriptBundle::load(config.script_bundle), config);
}

std::vector<prob::CandidateQuestion> finalize_questions(std::vector<prob::CandidateQuestion> qs,
                                                        std::size_t k) {
  std::vector<prob::CandidateQuestion> out;
  std::set<std::string> seen;
  for (auto& q : qs) {
    q.text = text::trim(q.text);
    if (q.text.empty()) continue;
    if (!seen.insert(text::normalize(q.text)).second) continue;
    out.push_back(std::move(q));
    if (out.size() == k) break;
  }
  if (out.empty()) throw EmptyPool("empty question pool");
  for (std::size_t i = 0; i < out.size(); ++i) out[i].id = static_cast<int>(i);
  return out;
}

std::vector<std::string> finalize_responses(std::vector<std::string> rs, std::size_t l_max) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (auto& r : rs) {
    auto t = text::trim(r);
    if (t.empty() || !seen.insert(text::normalize(t)).second) continue;
    out.push_back(std::move(t));
    if (out.size() == l_max) break;
  }
  if (out.size() < prob::kMinResponses) {
    throw BackendError("fewer than 2 distinct simulated responses");
  }
  return out;
}

bool clamp_probabilities(std::vector<double>& values) {
  bool changed = false;
  for (double& v : values) {
    double c = std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 1.0);
    if (c != v || std::isnan(v)) {
      v = c;
      changed = true;
    }
  }
  return changed;
}

std::optional<std::string> fenced_block(std::string_view t) {
  auto open = t.find("```");
  if (open == std::string_view::npos) return std::nullopt;
  auto body = t.find('\n', open);
  if (body == std::string_view::npos) return std::nullopt;
  auto close = t.find("```", body + 1);
  if (close == std::string_view::npos) return std::nullopt;
  return std::string(t.substr(body + 1, close - body - 1));
}

namespace {

const std::regex& strict_line() {
  static const std::regex re(R"(^\s*([A-Za-z0-9_.\-]+)\s*:\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*$)");
  return re;
}

}  // namespace

std::optional<std::map<std::string, double>> parse_id_values_strict(
    std::string_view t, const std::vector<std::string>& ids) {
  auto block = fenced_block(t);
  if (!block) return std::nullopt;
  std::map<std::string, double> out;
  std::istringstream in(*block);
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    std::smatch m;
    if (!std::regex_match(line, m, strict_line())) return std::nullopt;
    if (std::find(ids.begin(), ids.end(), m[1].str()) == ids.end()) return std::nullopt;
    if (!out.emplace(m[1].str(), std::stod(m[2].str())).second) return std::nullopt;
  }
  if (out.size() != ids.size()) return std::nullopt;
  return out;
}

std::map<std::string, double> parse_id_values_lenient(std::string_view t,
                                                      const std::vector<std::string>& ids) {
  static const std::regex number(R"((-?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*(%?))");
  const std::string lower = text::to_lower(t);
  std::map<std::string, double> out;
  for (const auto& id : ids) {
    const auto key = text::to_lower(id);
    std::size_t pos = 0;
    while ((pos = lower.find(key, pos)) != std::string::npos) {
      // Whole-identifier match only: "other" must not match inside "others_x".
      auto is_ident = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
      bool left_ok = pos == 0 || !is_ident(lower[pos - 1]);
      std::size_t end = pos + key.size();
      bool right_ok = end >= lower.size() || !is_ident(lower[end]);
      if (left_ok && right_ok) {
        auto line_end = lower.find('\n', end);
        std::string tail = lower.substr(end, line_end == std::string::npos ? std::string::npos : line_end - end);
        std::smatch m;
        if (std::regex_search(tail, m, number)) {
          double v = std::stod(m[1].str());
          if (m[2].length() > 0) v /= 100.0;
          out.emplace(id, v);
          break;
        }
      }
      pos = end;
    }
  }
  return out;
}

std::vector<std::string> parse_list_lines(std::string_view t) {
  static const std::regex item(R"(^\s*(?:\d+\s*[.):]|[-*•])\s*(.+?)\s*$)");
  std::vector<std::string> out;
  std::istringstream in{std::string(t)};
  std::string line;
  while (std::getline(in, line)) {
    std::smatch m;
    if (std::regex_match(line, m, item)) {
      auto s = m[1].str();
      if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
      out.push_back(s);
    }
  }
  return out;
}

}  // namespace patience::backend
