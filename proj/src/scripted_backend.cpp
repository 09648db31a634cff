#include "patience/scripted_backend.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "patience/error.hpp"
#include "patience/prompts.hpp"
#include "patience/text.hpp"

namespace patience::backend {

using nlohmann::json;

namespace {

// Lenient-mode defaults when no script owns the dialogue.
const std::vector<std::pair<std::string, std::string>> kDefaultQuestions = {
    {"When did these symptoms start, and have they been getting better or worse?", "onset and course"},
    {"Is there anything that makes the symptoms better or worse?", "aggravating and relieving factors"},
    {"Have you noticed any other changes in how you feel?", "associated symptoms"},
};

std::string get_string(const json& j, const char* key, const std::string& where, bool required = true) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    if (required) throw BackendError(where + ": missing field '" + key + "'");
    return {};
  }
  if (!it->is_string()) throw BackendError(where + ": field '" + key + "' must be a string");
  return it->get<std::string>();
}

std::string fenced(const std::vector<std::pair<std::string, double>>& rows) {
  std::string out = "```\n";
  for (const auto& [id, v] : rows) out += id + ": " + text::shortest(v) + "\n";
  return out + "```";
}

}  // namespace

Script ScriptBundle::parse_script(std::string_view json_text, const std::filesystem::path& source) {
  const std::string where = source.string();
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw BackendError(where + ": malformed script: " + e.what());
  }
  if (!j.is_object()) throw BackendError(where + ": script must be a JSON object");

  try {
    return parse_script_object(j, source);
  } catch (const json::exception& e) {
    throw BackendError(where + ": " + e.what());
  }
}

Script ScriptBundle::parse_script_object(const nlohmann::json& j, const std::filesystem::path& source) {
  const std::string where = source.string();
  Script s;
  s.source = source;
  s.name = get_string(j, "script", where);
  s.opening = get_string(j, "opening", where);
  s.extract = get_string(j, "extract", where);
  if (auto it = j.find("prior"); it != j.end()) {
    if (!it->is_object()) throw BackendError(where + ": 'prior' must be an object");
    // Bundle order, not key order: nlohmann::json objects are sorted, so an
    // explicit "prior_order" array wins when present.
    std::vector<std::string> order;
    if (auto o = j.find("prior_order"); o != j.end()) {
      order = o->get<std::vector<std::string>>();
    } else {
      for (const auto& [k, v] : it->items()) order.push_back(k);
    }
    for (const auto& id : order) {
      if (!it->contains(id)) throw BackendError(where + ": prior_order names unknown id '" + id + "'");
      double w = it->at(id).get<double>();
      if (w < 0) throw BackendError(where + ": negative prior weight for '" + id + "'");
      s.prior.push_back({id, w});
    }
  }
  s.other = j.value("other", 0.0);
  if (s.other < 0) throw BackendError(where + ": negative 'other' weight");

  for (const auto& q : j.value("questions", json::array())) {
    ScriptQuestion sq;
    sq.text = get_string(q, "text", where);
    sq.rationale = get_string(q, "rationale", where, false);
    sq.humanized = get_string(q, "humanized", where, false);
    sq.responses = q.value("responses", std::vector<std::string>{});
    const json likelihoods = q.value("likelihoods", json::object());
    for (const auto& [id, row] : likelihoods.items()) {
      auto values = row.get<std::vector<double>>();
      if (values.size() != sq.responses.size()) {
        throw BackendError(where + ": likelihood row for '" + id + "' in question \"" + sq.text +
                           "\" has " + std::to_string(values.size()) + " values for " +
                           std::to_string(sq.responses.size()) + " responses");
      }
      sq.likelihoods.emplace(id, std::move(values));
    }
    s.questions.push_back(std::move(sq));
  }
  const json evidence = j.value("evidence", json::object());
  for (const auto& [answer, weights] : evidence.items()) {
    auto& slot = s.evidence[text::normalize(answer)];
    for (const auto& [id, w] : weights.items()) {
      double v = w.get<double>();
      if (v < 0) throw BackendError(where + ": negative evidence weight for '" + id + "'");
      slot[id] = v;
    }
  }
  return s;
}

ScriptBundle::ScriptBundle(std::vector<Script> scripts) : scripts_(std::move(scripts)) {
  std::map<std::string, std::size_t> names;
  for (std::size_t i = 0; i < scripts_.size(); ++i) {
    const auto& s = scripts_[i];
    auto key = text::normalize(s.opening);
    if (auto [it, ok] = by_opening_.emplace(key, i); !ok) {
      throw BackendError("scripts " + scripts_[it->second].source.string() + " and " +
                         s.source.string() + " share the same opening statement");
    }
    if (auto [it, ok] = names.emplace(s.name, i); !ok) {
      throw BackendError("duplicate script name '" + s.name + "' in " +
                         scripts_[it->second].source.string() + " and " + s.source.string());
    }
  }
}

ScriptBundle ScriptBundle::load(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    throw BackendError("script bundle '" + dir.string() + "' is not a directory");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Script> scripts;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    scripts.push_back(parse_script(ss.str(), f));
  }
  return ScriptBundle(std::move(scripts));
}

const Script* ScriptBundle::find_by_opening(std::string_view opening) const {
  auto it = by_opening_.find(text::normalize(opening));
  return it == by_opening_.end() ? nullptr : &scripts_[it->second];
}

const Script* ScriptBundle::find_by_name(std::string_view name) const {
  for (const auto& s : scripts_) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

// ---- backend ---------------------------------------------------------------

ScriptedBackend::ScriptedBackend(ScriptBundle bundle, BackendConfig config)
    : bundle_(std::move(bundle)), config_(std::move(config)) {}

void ScriptedBackend::miss(const std::string& fingerprint) const {
  throw ScriptedMiss("scripted backend has no entry for " + fingerprint);
}

const Script* ScriptedBackend::script_for(const Dialogue& dialogue) const {
  if (dialogue.empty()) return nullptr;
  return bundle_.find_by_opening(dialogue.front().response);
}

const ScriptQuestion* ScriptedBackend::find_question(const Script* script,
                                                     std::string_view text_in) const {
  const auto key = text::normalize(text_in);
  auto match = [&](const Script& s) -> const ScriptQuestion* {
    for (const auto& q : s.questions) {
      if (text::normalize(q.text) == key || (!q.humanized.empty() && text::normalize(q.humanized) == key)) {
        return &q;
      }
    }
    return nullptr;
  };
  if (script) {
    if (const auto* q = match(*script)) return q;
  }
  for (const auto& s : bundle_.scripts()) {
    if (const auto* q = match(s)) return q;
  }
  return nullptr;
}

Elicited<std::string> ScriptedBackend::extract_symptom_text(const Dialogue& dialogue) const {
  if (dialogue.empty()) throw BackendError("extract_symptom_text: empty dialogue");
  if (const auto* s = script_for(dialogue)) return {s->extract, s->extract};
  if (config_.strict) miss("extract(opening=\"" + dialogue.front().response + "\")");
  // Identity rule: the patient's own words are the summary.
  std::vector<std::string> said;
  for (const auto& t : dialogue) {
    if (!text::trim(t.response).empty()) said.push_back(text::trim(t.response));
  }
  auto out = text::join(said, "; ");
  if (out.empty()) throw BackendError("extract_symptom_text: empty generation");
  return {out, out};
}

Elicited<WeightVector> ScriptedBackend::elicit_distribution(
    std::string_view, const Dialogue& dialogue,
    const std::vector<const kb::DiseaseEntry*>& candidates) const {
  if (candidates.empty()) throw BackendError("elicit_distribution: no candidate diseases");
  WeightVector wv;
  const auto* s = script_for(dialogue);
  if (!s && config_.strict) miss("elicit_distribution(opening)");
  for (const auto* d : candidates) {
    double w = 1.0;
    if (s) {
      w = 0.0;
      for (const auto& p : s->prior) {
        if (p.id == d->id) w = p.p;
      }
      for (std::size_t i = 1; i < dialogue.size(); ++i) {
        auto ev = s->evidence.find(text::normalize(dialogue[i].response));
        if (ev == s->evidence.end()) continue;
        auto f = ev->second.find(d->id);
        if (f != ev->second.end()) w *= f->second;
      }
    }
    wv.weights.push_back({d->id, w});
  }
  wv.other = s ? s->other : 0.0;

  std::vector<std::pair<std::string, double>> rows;
  double total = wv.other;
  for (const auto& w : wv.weights) {
    rows.emplace_back(w.id, w.p);
    total += w.p;
  }
  rows.emplace_back("other", wv.other);
  if (!(total > 0)) throw BackendError("elicit_distribution: all-zero weight vector");
  return {std::move(wv), fenced(rows)};
}

Elicited<std::vector<prob::CandidateQuestion>> ScriptedBackend::generate_questions(
    std::string_view, const Dialogue& dialogue, const prob::DiseaseDistribution&,
    std::size_t k) const {
  if (k == 0) throw BackendError("generate_questions: k must be at least 1");
  std::set<std::string> asked;
  for (std::size_t i = 1; i < dialogue.size(); ++i) asked.insert(text::normalize(dialogue[i].question));

  std::vector<prob::CandidateQuestion> pool;
  const auto* s = script_for(dialogue);
  if (s) {
    for (const auto& q : s->questions) {
      if (asked.contains(text::normalize(q.text)) ||
          (!q.humanized.empty() && asked.contains(text::normalize(q.humanized)))) {
        continue;
      }
      pool.push_back({0, q.text, q.rationale});
    }
  } else {
    if (config_.strict) miss("generate_questions(opening)");
    for (const auto& [t, r] : kDefaultQuestions) {
      if (!asked.contains(text::normalize(t))) pool.push_back({0, t, r});
    }
  }
  std::string raw;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    raw += std::to_string(i + 1) + ". " + pool[i].text + " || " + pool[i].rationale + "\n";
  }
  return {finalize_questions(std::move(pool), k), raw};
}

Elicited<std::vector<std::string>> ScriptedBackend::simulate_responses(
    const prob::CandidateQuestion& question, const Dialogue& dialogue, std::size_t l_max) const {
  const auto* q = find_question(script_for(dialogue), question.text);
  std::vector<std::string> rs;
  if (q) {
    rs = q->responses;
  } else {
    if (config_.strict) miss("simulate_responses(question=\"" + question.text + "\")");
    rs = {"Yes", "No"};
  }
  std::string raw;
  for (std::size_t i = 0; i < rs.size(); ++i) raw += std::to_string(i + 1) + ". " + rs[i] + "\n";
  return {finalize_responses(std::move(rs), l_max), raw};
}

Elicited<std::vector<double>> ScriptedBackend::elicit_likelihoods(
    const prob::CandidateQuestion& question, std::span<const std::string> responses,
    const kb::DiseaseEntry& disease, const Dialogue& dialogue) const {
  const Script* owner = script_for(dialogue);
  const ScriptQuestion* q = question.text.empty() ? nullptr : find_question(owner, question.text);

  auto lookup = [&](const ScriptQuestion& sq, const std::string& response) -> std::optional<double> {
    auto row = sq.likelihoods.find(disease.id);
    if (row == sq.likelihoods.end()) return std::nullopt;
    const auto key = text::normalize(response);
    for (std::size_t l = 0; l < sq.responses.size(); ++l) {
      if (text::normalize(sq.responses[l]) == key) return row->second[l];
    }
    return std::nullopt;
  };

  Elicited<std::vector<double>> out;
  std::vector<std::pair<std::string, double>> rows;
  for (std::size_t l = 0; l < responses.size(); ++l) {
    std::optional<double> v;
    if (q) {
      v = lookup(*q, responses[l]);
    } else if (question.text.empty()) {
      // No question context: first bundle entry for this (response, disease).
      for (const auto& s : bundle_.scripts()) {
        for (const auto& sq : s.questions) {
          if ((v = lookup(sq, responses[l]))) break;
        }
        if (v) break;
      }
    }
    if (!v) {
      if (config_.strict) {
        miss("elicit_likelihood(question=\"" + question.text + "\", response=\"" + responses[l] +
             "\", disease=" + disease.id + ")");
      }
      v = kDefaultLikelihood;
    }
    out.value.push_back(*v);
    rows.emplace_back("r" + std::to_string(l + 1), *v);
  }
  out.raw_text = fenced(rows);
  out.repaired = clamp_probabilities(out.value);
  return out;
}

Elicited<std::string> ScriptedBackend::humanize_question(const prob::CandidateQuestion& question,
                                                         const Dialogue& dialogue) const {
  const auto* q = find_question(script_for(dialogue), question.text);
  if (!q && config_.strict) miss("humanize(question=\"" + question.text + "\")");
  std::string out = (q && !q->humanized.empty()) ? q->humanized : question.text;
  return {out, out};
}

std::string opening_statement(const PatientProfile& profile) {
  if (!profile.opening.empty()) return profile.opening;
  std::vector<std::string> parts;
  for (auto s : profile.symptoms) {
    s = text::trim(s);
    if (s.empty()) continue;
    if (s.back() != '.' && s.back() != '!' && s.back() != '?') s += '.';
    parts.push_back(s);
  }
  return text::join(parts, " ");
}

Elicited<std::string> ScriptedBackend::respond_as_patient(const PatientProfile& profile,
                                                          std::string_view question,
                                                          const Dialogue&) const {
  if (text::normalize(question) == text::normalize(prompts::opening_question())) {
    auto s = opening_statement(profile);
    return {s, s};
  }
  const auto words = text::words(question);
  const std::set<std::string> qwords(words.begin(), words.end());
  const PatientFact* best = nullptr;
  std::size_t best_hits = 0;
  for (const auto& f : profile.facts) {
    std::vector<std::string> keys = f.keywords;
    if (keys.empty()) keys = text::words(f.topic);
    std::size_t hits = 0;
    for (const auto& k : keys) {
      auto kw = text::words(k);
      if (!kw.empty() && std::all_of(kw.begin(), kw.end(), [&](const auto& w) { return qwords.contains(w); })) {
        ++hits;
      }
    }
    if (hits > best_hits) {
      best = &f;
      best_hits = hits;
    }
  }
  std::string out = best ? best->answer : std::string(kUnsureAnswer);
  return {out, out};
}

}  // namespace patience::backend
