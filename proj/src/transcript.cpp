#include "patience/transcript.hpp"

#include <fstream>
#include <sstream>

#include "patience/error.hpp"

namespace patience::transcript {

using nlohmann::json;
using namespace engine;

json to_json(const prob::DiseaseDistribution& d) {
  json entries = json::array();
  for (const auto& e : d.entries()) entries.push_back({{"id", e.id}, {"p", e.p}});
  return {{"iteration", d.iteration()}, {"entries", entries}, {"other", d.other_mass()}};
}

prob::DiseaseDistribution distribution_from_json(const json& j) {
  std::vector<prob::DiseaseProb> entries;
  for (const auto& e : j.at("entries")) entries.push_back({e.at("id").get<std::string>(), e.at("p").get<double>()});
  return {std::move(entries), j.at("other").get<double>(), j.at("iteration").get<int>()};
}

json to_json(const SessionConfig& c) {
  const auto& b = c.backend;
  return {
      {"k", c.k},
      {"l_max", c.l_max},
      {"max_turns", c.max_turns},
      {"stop_entropy", c.stop_entropy},
      {"stop_top1", c.stop_top1},
      {"selection_mode", prob::to_string(c.selection_mode)},
      {"row_normalize", c.row_normalize},
      {"likelihood_floor", c.likelihood_floor},
      {"remap_every_turn", c.remap_every_turn},
      {"top_n", c.top_n},
      {"policy", to_string(c.policy)},
      {"seed", c.seed},
      {"parallelism", c.parallelism},
      {"kb_path", c.kb_path.generic_string()},
      {"backend",
       {{"kind", b.kind == backend::BackendKind::remote ? "remote" : "scripted"},
        {"endpoint", b.endpoint},
        {"model_name", b.model_name},
        {"temperature", b.temperature},
        {"persona_temperature", b.persona_temperature},
        {"timeout_ms", b.timeout.count()},
        {"max_retries", b.max_retries},
        {"seed", b.seed},
        {"script_bundle", b.script_bundle.generic_string()},
        {"strict", b.strict},
        {"api_key_env", b.api_key_env},
        {"max_concurrency", b.max_concurrency}}},
  };
}

SessionConfig config_from_json(const json& j) {
  SessionConfig c;
  c.k = j.at("k").get<std::size_t>();
  c.l_max = j.at("l_max").get<std::size_t>();
  c.max_turns = j.at("max_turns").get<int>();
  c.stop_entropy = j.at("stop_entropy").get<double>();
  c.stop_top1 = j.at("stop_top1").get<double>();
  c.selection_mode = prob::selection_mode_from_string(j.at("selection_mode").get<std::string>());
  c.row_normalize = j.at("row_normalize").get<bool>();
  c.likelihood_floor = j.at("likelihood_floor").get<double>();
  c.remap_every_turn = j.at("remap_every_turn").get<bool>();
  c.top_n = j.at("top_n").get<std::size_t>();
  c.policy = policy_from_string(j.at("policy").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  c.parallelism = j.at("parallelism").get<int>();
  c.kb_path = j.at("kb_path").get<std::string>();
  const auto& b = j.at("backend");
  c.backend.kind = b.at("kind").get<std::string>() == "remote" ? backend::BackendKind::remote
                                                              : backend::BackendKind::scripted;
  c.backend.endpoint = b.at("endpoint").get<std::string>();
  c.backend.model_name = b.at("model_name").get<std::string>();
  c.backend.temperature = b.at("temperature").get<double>();
  c.backend.persona_temperature = b.at("persona_temperature").get<double>();
  c.backend.timeout = std::chrono::milliseconds(b.at("timeout_ms").get<std::int64_t>());
  c.backend.max_retries = b.at("max_retries").get<int>();
  c.backend.seed = b.at("seed").get<std::uint64_t>();
  c.backend.script_bundle = b.at("script_bundle").get<std::string>();
  c.backend.strict = b.at("strict").get<bool>();
  c.backend.api_key_env = b.at("api_key_env").get<std::string>();
  c.backend.max_concurrency = b.at("max_concurrency").get<int>();
  return c;
}

json to_json(const Diagnosis& d) {
  return {{"disease_id", d.disease_id},
          {"name", d.name},
          {"probability", d.probability},
          {"distribution", to_json(d.distribution)},
          {"turns_used", d.turns_used},
          {"stop_reason", to_string(d.stop_reason)}};
}

Diagnosis diagnosis_from_json(const json& j) {
  Diagnosis d;
  d.disease_id = j.at("disease_id").get<std::string>();
  d.name = j.at("name").get<std::string>();
  d.probability = j.at("probability").get<double>();
  d.distribution = distribution_from_json(j.at("distribution"));
  d.turns_used = j.at("turns_used").get<int>();
  d.stop_reason = stop_reason_from_string(j.at("stop_reason").get<std::string>());
  return d;
}

json to_json(const SelectionReport& r) {
  json candidates = json::array();
  for (const auto& c : r.candidates) {
    json lik = json::object();
    for (const auto& [id, row] : c.table.likelihoods) lik[id] = row;
    candidates.push_back({{"id", c.table.question.id},
                          {"text", c.table.question.text},
                          {"rationale", c.table.question.rationale},
                          {"responses", c.table.responses},
                          {"likelihoods", lik},
                          {"expected_entropy", c.expected_entropy}});
  }
  return {{"iteration", r.iteration},
          {"policy", to_string(r.policy)},
          {"mode", prob::to_string(r.mode)},
          {"prior_entropy", r.prior_entropy},
          {"candidates", candidates},
          {"argmin_id", r.argmin_id},
          {"selected_id", r.selected_id},
          {"selected_text", r.selected_text},
          {"asked_text", r.asked_text},
          {"uninformative", r.uninformative},
          {"notes", r.notes}};
}

SelectionReport selection_report_from_json(const json& j) {
  SelectionReport r;
  r.iteration = j.at("iteration").get<int>();
  r.policy = policy_from_string(j.at("policy").get<std::string>());
  r.mode = prob::selection_mode_from_string(j.at("mode").get<std::string>());
  r.prior_entropy = j.at("prior_entropy").get<double>();
  for (const auto& c : j.at("candidates")) {
    CandidateRecord rec;
    rec.table.question = {c.at("id").get<int>(), c.at("text").get<std::string>(),
                          c.at("rationale").get<std::string>()};
    rec.table.responses = c.at("responses").get<std::vector<std::string>>();
    for (const auto& [id, row] : c.at("likelihoods").items()) {
      rec.table.likelihoods[id] = row.get<std::vector<double>>();
    }
    rec.expected_entropy = c.at("expected_entropy").get<double>();
    r.candidates.push_back(std::move(rec));
  }
  r.argmin_id = j.at("argmin_id").get<int>();
  r.selected_id = j.at("selected_id").get<int>();
  r.selected_text = j.at("selected_text").get<std::string>();
  r.asked_text = j.at("asked_text").get<std::string>();
  r.uninformative = j.at("uninformative").get<bool>();
  r.notes = j.at("notes").get<std::vector<std::string>>();
  return r;
}

json trace(const DialogueState& s) {
  json turns = json::array();
  for (const auto& t : s.turns) turns.push_back({{"question", t.question}, {"response", t.response}});
  json dists = json::array();
  for (const auto& d : s.distribution_history) dists.push_back(to_json(d));
  json reports = json::array();
  for (const auto& r : s.selection_reports) reports.push_back(to_json(r));
  json mappings = json::array();
  for (const auto& m : s.mappings) {
    json sym = json::array();
    for (const auto& [id, score] : m.symptoms) sym.push_back({{"id", id}, {"score", score}});
    mappings.push_back({{"iteration", m.iteration},
                        {"summary", m.summary},
                        {"symptoms", sym},
                        {"candidate_disease_ids", m.candidate_disease_ids},
                        {"fallback", m.fallback}});
  }
  json elicitations = json::array();
  for (const auto& e : s.elicitations) {
    elicitations.push_back({{"iteration", e.iteration},
                            {"operation", e.operation},
                            {"subject", e.subject},
                            {"raw_text", e.raw_text},
                            {"repaired", e.repaired},
                            {"attempt_count", e.attempt_count}});
  }
  return {{"opening", {{"question", s.opening_question}, {"statement", s.opening_statement}}},
          {"turns", turns},
          {"iteration", s.iteration},
          {"mapped_symptoms", s.mapped_symptoms},
          {"distributions", dists},
          {"entropy_trace", s.entropy_trace},
          {"selection_reports", reports},
          {"mappings", mappings},
          {"elicitations", elicitations},
          {"notes", s.notes},
          {"status", to_string(s.status)},
          {"pending_question", s.pending_question},
          {"diagnosis", s.diagnosis ? to_json(*s.diagnosis) : json(nullptr)}};
}

DialogueState state_from_json(const json& j) {
  DialogueState s;
  s.opening_question = j.at("opening").at("question").get<std::string>();
  s.opening_statement = j.at("opening").at("statement").get<std::string>();
  for (const auto& t : j.at("turns")) {
    s.turns.push_back({t.at("question").get<std::string>(), t.at("response").get<std::string>()});
  }
  s.iteration = j.at("iteration").get<int>();
  s.mapped_symptoms = j.at("mapped_symptoms").get<std::vector<std::string>>();
  for (const auto& d : j.at("distributions")) s.distribution_history.push_back(distribution_from_json(d));
  s.entropy_trace = j.at("entropy_trace").get<std::vector<double>>();
  for (const auto& r : j.at("selection_reports")) s.selection_reports.push_back(selection_report_from_json(r));
  for (const auto& m : j.at("mappings")) {
    MappingRecord rec;
    rec.iteration = m.at("iteration").get<int>();
    rec.summary = m.at("summary").get<std::string>();
    for (const auto& sym : m.at("symptoms")) {
      rec.symptoms.emplace_back(sym.at("id").get<std::string>(), sym.at("score").get<double>());
    }
    rec.candidate_disease_ids = m.at("candidate_disease_ids").get<std::vector<std::string>>();
    rec.fallback = m.at("fallback").get<bool>();
    s.mappings.push_back(std::move(rec));
  }
  for (const auto& e : j.at("elicitations")) {
    s.elicitations.push_back({e.at("iteration").get<int>(), e.at("operation").get<std::string>(),
                              e.at("subject").get<std::string>(), e.at("raw_text").get<std::string>(),
                              e.at("repaired").get<bool>(), e.at("attempt_count").get<int>()});
  }
  s.notes = j.at("notes").get<std::vector<std::string>>();
  s.status = status_from_string(j.at("status").get<std::string>());
  s.pending_question = j.at("pending_question").get<std::string>();
  if (!j.at("diagnosis").is_null()) s.diagnosis = diagnosis_from_json(j.at("diagnosis"));
  return s;
}

std::string write(const DialogueState& state, const SessionConfig& config) {
  json doc = {{"format", kFormat},
              {"version", kVersion},
              {"config", to_json(config)},
              {"session", trace(state)}};
  return doc.dump(2) + "\n";
}

Transcript read(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("malformed transcript: ") + e.what());
  }
  if (!doc.is_object() || doc.value("format", "") != kFormat) throw Error("not a transcript document");
  if (doc.value("version", 0) != kVersion) {
    throw Error("unsupported transcript version " + std::to_string(doc.value("version", 0)));
  }
  try {
    Transcript t{config_from_json(doc.at("config")), state_from_json(doc.at("session"))};
    t.state.check_invariants();
    return t;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed transcript: ") + e.what());
  }
}

void save(const std::filesystem::path& path, const DialogueState& state, const SessionConfig& config) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write transcript '" + path.string() + "'");
    out << write(state, config);
    if (!out) throw Error("failed writing transcript '" + path.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

Transcript load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open transcript '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return read(ss.str());
}

}  // namespace patience::transcript
