#include "patience/sim.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "patience/error.hpp"
#include "patience/prompts.hpp"
#include "patience/remote_backend.hpp"
#include "patience/scripted_backend.hpp"
#include "patience/text.hpp"
#include "patience/transcript.hpp"

namespace patience::sim {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

std::string case_string(const ojson& j, const char* key, const std::string& where, bool required) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    if (required) throw CaseError(where + ": missing field '" + key + "'");
    return {};
  }
  if (!it->is_string()) throw CaseError(where + ": field '" + key + "' must be a string");
  return it->get<std::string>();
}

}  // namespace

PatientProfile parse_case(std::string_view json_text, const std::filesystem::path& source) {
  const std::string where = source.string();
  ojson j;
  try {
    j = ojson::parse(json_text);
  } catch (const ojson::parse_error& e) {
    throw CaseError(where + ": malformed case: " + e.what());
  }
  if (!j.is_object()) throw CaseError(where + ": case must be a JSON object");

  PatientProfile p;
  p.case_id = case_string(j, "case_id", where, true);
  p.ground_truth = case_string(j, "ground_truth", where, true);
  p.specialty = case_string(j, "specialty", where, false);
  p.intention = case_string(j, "intention", where, false);
  p.personality = case_string(j, "personality", where, false);
  p.opening = case_string(j, "opening", where, false);
  if (p.case_id.empty()) throw CaseError(where + ": empty case_id");
  if (p.ground_truth.empty()) throw CaseError(where + ": empty ground_truth");
  try {
    p.symptoms = j.value("symptoms", std::vector<std::string>{});
    p.age = j.value("age", 0);
  } catch (const ojson::exception& e) {
    throw CaseError(where + ": " + e.what());
  }
  if (p.symptoms.empty() && p.opening.empty()) {
    throw CaseError(where + ": case needs 'symptoms' or an 'opening' statement");
  }
  if (p.age < 0) throw CaseError(where + ": negative age");

  if (auto f = j.find("facts"); f != j.end()) {
    if (!f->is_object()) throw CaseError(where + ": 'facts' must be an object");
    for (const auto& [topic, v] : f->items()) {
      PatientFact fact;
      fact.topic = topic;
      if (v.is_string()) {
        fact.answer = v.get<std::string>();
      } else if (v.is_object()) {
        fact.answer = case_string(v, "answer", where + " fact '" + topic + "'", true);
        fact.keywords = v.value("keywords", std::vector<std::string>{});
      } else {
        throw CaseError(where + ": fact '" + topic + "' must be a string or an object");
      }
      p.facts.push_back(std::move(fact));
    }
  }
  return p;
}

std::vector<PatientProfile> load_cases(const std::filesystem::path& path, const kb::KnowledgeBase& kb) {
  std::vector<std::filesystem::path> files;
  std::error_code ec;
  if (std::filesystem::is_directory(path, ec)) {
    for (const auto& e : std::filesystem::directory_iterator(path)) {
      if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
  } else if (std::filesystem::is_regular_file(path, ec)) {
    files.push_back(path);
  } else {
    throw CaseError("case path '" + path.string() + "' does not exist");
  }

  std::vector<PatientProfile> out;
  std::map<std::string, std::filesystem::path> seen;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    auto p = parse_case(ss.str(), f);
    if (!kb.find_disease(p.ground_truth)) {
      throw CaseError(f.string() + ": ground_truth '" + p.ground_truth +
                      "' is not a disease in the knowledge base");
    }
    if (auto [it, ok] = seen.emplace(p.case_id, f); !ok) {
      throw CaseError("duplicate case_id '" + p.case_id + "' in " + it->second.string() + " and " +
                      f.string());
    }
    out.push_back(std::move(p));
  }
  if (out.empty()) throw CaseError("no case files in '" + path.string() + "'");
  return out;
}

engine::DialogueState simulate_case(const PatientProfile& profile, const kb::KnowledgeBase& kb,
                                    const backend::Backend& backend, const engine::SessionConfig& config) {
  engine::Engine eng(kb, backend, config);
  auto opening = backend.respond_as_patient(profile, prompts::opening_question(), {});
  auto state = eng.start_session(opening.value);
  if (config.policy == engine::Policy::oneshot && state.status == engine::Status::active) {
    state = eng.conclude(state, engine::StopReason::oneshot);
  }
  while (state.status == engine::Status::active) {
    auto answer = backend.respond_as_patient(profile, state.pending_question, state.dialogue());
    state = eng.step(state, answer.value).state;
  }
  return state;
}

CaseOutcome run_case(const PatientProfile& profile, const kb::KnowledgeBase& kb,
                     const backend::Backend& backend, const engine::SessionConfig& config) {
  CaseOutcome out;
  out.case_id = profile.case_id;
  out.policy = std::string(engine::to_string(config.policy));
  out.ground_truth = profile.ground_truth;
  try {
    auto state = simulate_case(profile, kb, backend, config);
    out.entropy_trace = state.entropy_trace;
    out.distributions = state.distribution_history;
    out.turns = state.iteration;
    if (state.diagnosis) {
      out.diagnosis_id = state.diagnosis->disease_id;
      out.stop_reason = std::string(engine::to_string(state.diagnosis->stop_reason));
      out.hit = out.diagnosis_id == profile.ground_truth;
    }
  } catch (const Error& e) {
    out.failed = true;
    out.error = e.what();
  }
  return out;
}

std::vector<double> carry_forward(const std::vector<double>& trace, int horizon) {
  std::vector<double> out = trace;
  if (out.empty()) return out;
  out.resize(static_cast<std::size_t>(horizon) + 1, trace.back());
  return out;
}

std::vector<PolicyAggregate> compute_aggregates(const std::vector<CaseOutcome>& outcomes,
                                                const std::vector<std::string>& policies,
                                                int horizon) {
  std::vector<PolicyAggregate> out;
  for (const auto& policy : policies) {
    PolicyAggregate a;
    a.policy = policy;
    a.mean_entropy.assign(static_cast<std::size_t>(horizon) + 1, 0.0);
    std::size_t hits = 0;
    double turns = 0;
    for (const auto& o : outcomes) {
      if (o.policy != policy) continue;
      if (o.failed || o.entropy_trace.empty()) {
        ++a.failures;
        continue;
      }
      ++a.cases;
      hits += o.hit ? 1 : 0;
      turns += o.turns;
      auto padded = carry_forward(o.entropy_trace, horizon);
      for (std::size_t t = 0; t < padded.size(); ++t) a.mean_entropy[t] += padded[t];
    }
    if (a.cases > 0) {
      for (double& v : a.mean_entropy) v /= static_cast<double>(a.cases);
      a.hit_rate = static_cast<double>(hits) / static_cast<double>(a.cases);
      a.mean_turns = turns / static_cast<double>(a.cases);
      a.final_mean_entropy = a.mean_entropy.back();
    }
    out.push_back(std::move(a));
  }
  return out;
}

BenchmarkRun run_benchmark(const std::vector<PatientProfile>& cases, const kb::KnowledgeBase& kb,
                           const backend::Backend& backend, const engine::SessionConfig& config,
                           const std::vector<std::string>& policies, int workers) {
  if (cases.empty()) throw CaseError("benchmark needs at least one case");
  if (policies.empty()) throw ConfigError("benchmark needs at least one policy");
  std::vector<engine::Policy> parsed;
  for (const auto& p : policies) parsed.push_back(engine::policy_from_string(p));

  BenchmarkRun run;
  run.seed = config.seed;
  run.policies = policies;
  std::vector<const PatientProfile*> ordered;
  for (const auto& c : cases) ordered.push_back(&c);
  std::sort(ordered.begin(), ordered.end(),
            [](const auto* a, const auto* b) { return a->case_id < b->case_id; });
  for (const auto* c : ordered) run.cases.push_back(c->case_id);

  struct Job {
    const PatientProfile* profile;
    engine::SessionConfig config;
  };
  std::vector<Job> jobs;
  for (auto policy : parsed) {
    for (const auto* c : ordered) {
      auto cfg = config;
      cfg.policy = policy;
      jobs.push_back({c, std::move(cfg)});
    }
  }
  run.outcomes.resize(jobs.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      run.outcomes[i] = run_case(*jobs[i].profile, kb, backend, jobs[i].config);
    }
  };
  const int n = std::max(1, std::min<int>(workers, static_cast<int>(jobs.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  }

  for (const auto& o : run.outcomes) {
    if (!o.entropy_trace.empty()) {
      run.horizon = std::max(run.horizon, static_cast<int>(o.entropy_trace.size()) - 1);
    }
  }
  run.aggregates = compute_aggregates(run.outcomes, run.policies, run.horizon);
  return run;
}

json to_json(const BenchmarkRun& run) {
  json outcomes = json::array();
  for (const auto& o : run.outcomes) {
    json dists = json::array();
    for (const auto& d : o.distributions) dists.push_back(transcript::to_json(d));
    outcomes.push_back({{"case_id", o.case_id},
                        {"policy", o.policy},
                        {"ground_truth", o.ground_truth},
                        {"failed", o.failed},
                        {"error", o.error},
                        {"diagnosis", o.diagnosis_id},
                        {"stop_reason", o.stop_reason},
                        {"hit", o.hit},
                        {"turns", o.turns},
                        {"entropy_trace", o.entropy_trace},
                        {"distributions", dists}});
  }
  json aggregates = json::array();
  for (const auto& a : run.aggregates) {
    aggregates.push_back({{"policy", a.policy},
                          {"cases", a.cases},
                          {"failures", a.failures},
                          {"mean_entropy", a.mean_entropy},
                          {"final_mean_entropy", a.final_mean_entropy},
                          {"hit_rate", a.hit_rate},
                          {"mean_turns", a.mean_turns}});
  }
  return {{"format", "patience-benchmark-run"},
          {"version", 1},
          {"seed", run.seed},
          {"policies", run.policies},
          {"cases", run.cases},
          {"horizon", run.horizon},
          {"outcomes", outcomes},
          {"aggregates", aggregates}};
}

BenchmarkRun run_from_json(const json& j) {
  if (j.value("format", "") != "patience-benchmark-run") throw Error("not a benchmark run file");
  BenchmarkRun run;
  try {
    run.seed = j.at("seed").get<std::uint64_t>();
    run.policies = j.at("policies").get<std::vector<std::string>>();
    run.cases = j.at("cases").get<std::vector<std::string>>();
    run.horizon = j.at("horizon").get<int>();
    for (const auto& o : j.at("outcomes")) {
      CaseOutcome c;
      c.case_id = o.at("case_id").get<std::string>();
      c.policy = o.at("policy").get<std::string>();
      c.ground_truth = o.at("ground_truth").get<std::string>();
      c.failed = o.at("failed").get<bool>();
      c.error = o.at("error").get<std::string>();
      c.diagnosis_id = o.at("diagnosis").get<std::string>();
      c.stop_reason = o.at("stop_reason").get<std::string>();
      c.hit = o.at("hit").get<bool>();
      c.turns = o.at("turns").get<int>();
      c.entropy_trace = o.at("entropy_trace").get<std::vector<double>>();
      for (const auto& d : o.at("distributions")) c.distributions.push_back(transcript::distribution_from_json(d));
      run.outcomes.push_back(std::move(c));
    }
    for (const auto& a : j.at("aggregates")) {
      PolicyAggregate p;
      p.policy = a.at("policy").get<std::string>();
      p.cases = a.at("cases").get<std::size_t>();
      p.failures = a.at("failures").get<std::size_t>();
      p.mean_entropy = a.at("mean_entropy").get<std::vector<double>>();
      p.final_mean_entropy = a.at("final_mean_entropy").get<double>();
      p.hit_rate = a.at("hit_rate").get<double>();
      p.mean_turns = a.at("mean_turns").get<double>();
      run.aggregates.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    throw Error(std::string("malformed benchmark run: ") + e.what());
  }
  return run;
}

std::string write_run(const BenchmarkRun& run) { return to_json(run).dump(2) + "\n"; }

BenchmarkRun load_run(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open run file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return run_from_json(json::parse(ss.str()));
  } catch (const json::parse_error& e) {
    throw Error("malformed run file '" + path.string() + "': " + e.what());
  }
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string cases_csv(const BenchmarkRun& run) {
  std::string out = "policy,case_id,ground_truth,diagnosis,hit,turns,stop_reason,final_entropy,error\n";
  for (const auto& o : run.outcomes) {
    out += csv_field(o.policy) + "," + csv_field(o.case_id) + "," + csv_field(o.ground_truth) + "," +
           csv_field(o.diagnosis_id) + "," + (o.hit ? "1" : "0") + "," + std::to_string(o.turns) + "," +
           csv_field(o.stop_reason) + "," +
           (o.entropy_trace.empty() ? std::string() : text::fixed(o.entropy_trace.back())) + "," +
           csv_field(o.error) + "\n";
  }
  return out;
}

PatientProfile profile_from_transcript(const backend::RemoteBackend& backend,
                                       std::string_view transcript_text, std::string case_id,
                                       std::string ground_truth) {
  auto raw = backend.complete(
      {{"user", prompts::render("profile_from_transcript", {{"transcript", std::string(transcript_text)}})}},
      backend.config().temperature);
  auto body = backend::fenced_block(raw).value_or(raw);
  ojson j;
  try {
    j = ojson::parse(body.substr(body.find('{')));
  } catch (const std::exception& e) {
    throw CaseError(std::string("generator returned an unreadable profile: ") + e.what());
  }
  j["case_id"] = std::move(case_id);
  j["ground_truth"] = std::move(ground_truth);
  return parse_case(j.dump(), "<generated>");
}

}  // namespace patience::sim
