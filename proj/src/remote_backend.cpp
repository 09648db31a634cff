#include "patience/remote_backend.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <set>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "patience/error.hpp"
#include "patience/prompts.hpp"
#include "patience/text.hpp"

namespace patience::backend {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

ParsedEndpoint parse_endpoint(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint '" + url + "' has no scheme");
  auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw ConfigError("endpoint scheme must be http or https: '" + url + "'");
  }
  auto path_start = url.find('/', scheme_end + 3);
  ParsedEndpoint p;
  p.scheme_host_port = url.substr(0, path_start);
  p.path = path_start == std::string::npos ? "/" : url.substr(path_start);
  if (p.scheme_host_port.size() <= scheme_end + 3) throw ConfigError("endpoint '" + url + "' has no host");
  return p;
}

namespace {

class SlotGuard {
 public:
  explicit SlotGuard(std::counting_semaphore<1024>& s) : s_(s) { s_.acquire(); }
  ~SlotGuard() { s_.release(); }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;

 private:
  std::counting_semaphore<1024>& s_;
};

template <class Rep, class Period>
void set_timeouts(httplib::Client& cli, std::chrono::duration<Rep, Period> d) {
  cli.set_connection_timeout(d);
  cli.set_read_timeout(d);
  cli.set_write_timeout(d);
}

std::vector<ChatMessage> with_system(std::string user) {
  return {{"system", prompts::get("system").template_text}, {"user", std::move(user)}};
}

std::string example_block(const std::vector<std::string>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += "\n";
    out += ids[i] + ": 0.0";
  }
  return out;
}

}  // namespace

RemoteBackend::RemoteBackend(BackendConfig config)
    : config_(std::move(config)),
      endpoint_(parse_endpoint(config_.endpoint)),
      slots_(std::clamp<std::ptrdiff_t>(config_.max_concurrency, 1, 1024)) {
  if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
}

std::string RemoteBackend::complete(const std::vector<ChatMessage>& messages,
                                    double temperature) const {
  json body;
  body["model"] = config_.model_name;
  body["temperature"] = temperature;
  body["messages"] = json::array();
  for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  const auto payload = body.dump();

  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  SlotGuard slot(slots_);
  const auto deadline = Clock::now() + config_.timeout * (config_.max_retries + 1);
  std::string last_error = "no attempt made";
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    if (remaining.count() <= 0) break;
    auto budget = std::min(remaining, config_.timeout);

    httplib::Client cli(endpoint_.scheme_host_port);
    set_timeouts(cli, budget);
    auto res = cli.Post(endpoint_.path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
    } else if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
    } else if (res->status != 200) {
      throw BackendError("endpoint rejected request with HTTP " + std::to_string(res->status) +
                         ": " + res->body.substr(0, 200));
    } else {
      try {
        auto j = json::parse(res->body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const json::exception& e) {
        last_error = std::string("malformed response body: ") + e.what();
      }
    }
    if (attempt < config_.max_retries) {
      auto backoff = std::chrono::milliseconds(50 << std::min(attempt, 5));
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
      std::this_thread::sleep_for(std::max(std::chrono::milliseconds(0), std::min(backoff, left)));
    }
  }
  throw BackendUnavailable("backend unavailable after " + std::to_string(config_.max_retries + 1) +
                           " attempts: " + last_error);
}

Elicited<std::string> RemoteBackend::complete_nonempty(const std::vector<ChatMessage>& messages,
                                                       double temperature) const {
  Elicited<std::string> out;
  out.attempt_count = 0;
  for (int i = 0; i <= config_.max_retries; ++i) {
    ++out.attempt_count;
    auto raw = complete(messages, temperature);
    out.raw_text += (out.raw_text.empty() ? "" : "\n---\n") + raw;
    auto t = text::trim(raw);
    if (!t.empty()) {
      out.value = t;
      return out;
    }
  }
  throw BackendError("empty generation after " + std::to_string(out.attempt_count) + " attempts");
}

Elicited<std::map<std::string, double>> RemoteBackend::elicit_id_values(
    const std::string& prompt, const std::vector<std::string>& ids) const {
  Elicited<std::map<std::string, double>> out;
  auto messages = with_system(prompt);
  auto first = complete(messages, config_.temperature);
  out.raw_text = first;
  if (auto parsed = parse_id_values_strict(first, ids)) {
    out.value = std::move(*parsed);
    return out;
  }

  out.attempt_count = 2;
  messages.push_back({"assistant", first});
  messages.push_back({"user", prompts::render("strict_format", {{"ids", text::join(ids, ", ")}})});
  auto second = complete(messages, config_.temperature);
  out.raw_text += "\n---\n" + second;
  if (auto parsed = parse_id_values_strict(second, ids)) {
    out.value = std::move(*parsed);
    return out;
  }

  auto repaired = parse_id_values_lenient(second, ids);
  if (repaired.empty()) repaired = parse_id_values_lenient(first, ids);
  if (repaired.empty()) {
    throw BackendError("could not parse numeric values for ids [" + text::join(ids, ", ") +
                       "] after repair");
  }
  for (const auto& id : ids) repaired.emplace(id, 0.0);
  out.value = std::move(repaired);
  out.repaired = true;
  return out;
}

Elicited<std::string> RemoteBackend::extract_symptom_text(const Dialogue& dialogue) const {
  if (dialogue.empty()) throw BackendError("extract_symptom_text: empty dialogue");
  return complete_nonempty(
      with_system(prompts::render("extract_symptoms", {{"dialogue", render_dialogue(dialogue)}})),
      config_.temperature);
}

Elicited<WeightVector> RemoteBackend::elicit_distribution(
    std::string_view gamma_text, const Dialogue& dialogue,
    const std::vector<const kb::DiseaseEntry*>& candidates) const {
  if (candidates.empty()) throw BackendError("elicit_distribution: no candidate diseases");
  std::vector<std::string> ids;
  std::string listing;
  for (const auto* d : candidates) {
    ids.push_back(d->id);
    listing += d->id + ": " + d->name + "\n";
  }
  ids.push_back("other");
  auto prompt = prompts::render("elicit_distribution", {{"gamma", std::string(gamma_text)},
                                                        {"dialogue", render_dialogue(dialogue)},
                                                        {"candidates", listing},
                                                        {"example", example_block(ids)}});
  auto r = elicit_id_values(prompt, ids);
  Elicited<WeightVector> out{{}, r.raw_text, r.repaired, r.attempt_count};
  double total = 0;
  for (const auto* d : candidates) {
    double v = r.value.at(d->id);
    if (v < 0) {
      v = 0;
      out.repaired = true;
    }
    out.value.weights.push_back({d->id, v});
    total += v;
  }
  out.value.other = std::max(0.0, r.value.at("other"));
  if (r.value.at("other") < 0) out.repaired = true;
  if (!(total + out.value.other > 0)) throw BackendError("elicit_distribution: all-zero weight vector");
  return out;
}

Elicited<std::vector<prob::CandidateQuestion>> RemoteBackend::generate_questions(
    std::string_view upsilon_text, const Dialogue& dialogue, const prob::DiseaseDistribution& dist,
    std::size_t k) const {
  if (k == 0) throw BackendError("generate_questions: k must be at least 1");
  std::string listing;
  for (const auto& e : dist.entries()) listing += e.id + ": " + text::fixed(e.p, 3) + "\n";
  listing += "other: " + text::fixed(dist.other_mass(), 3) + "\n";
  auto messages = with_system(prompts::render("generate_questions",
                                              {{"upsilon", std::string(upsilon_text)},
                                               {"dialogue", render_dialogue(dialogue)},
                                               {"distribution", listing},
                                               {"k", std::to_string(k)}}));
  std::set<std::string> asked;
  for (std::size_t i = 1; i < dialogue.size(); ++i) asked.insert(text::normalize(dialogue[i].question));

  Elicited<std::vector<prob::CandidateQuestion>> out;
  out.attempt_count = 0;
  for (int i = 0; i <= config_.max_retries; ++i) {
    ++out.attempt_count;
    auto raw = complete(messages, config_.temperature);
    out.raw_text += (out.raw_text.empty() ? "" : "\n---\n") + raw;
    std::vector<prob::CandidateQuestion> pool;
    for (const auto& line : parse_list_lines(raw)) {
      auto sep = line.find("||");
      prob::CandidateQuestion q;
      q.text = text::trim(line.substr(0, sep));
      q.rationale = sep == std::string::npos ? "" : text::trim(line.substr(sep + 2));
      if (!asked.contains(text::normalize(q.text))) pool.push_back(std::move(q));
    }
    try {
      out.value = finalize_questions(std::move(pool), k);
      return out;
    } catch (const EmptyPool&) {
      // retry
    }
  }
  throw EmptyPool("empty question pool after " + std::to_string(out.attempt_count) + " attempts");
}

Elicited<std::vector<std::string>> RemoteBackend::simulate_responses(
    const prob::CandidateQuestion& question, const Dialogue& dialogue, std::size_t l_max) const {
  auto messages = with_system(prompts::render("simulate_responses",
                                              {{"dialogue", render_dialogue(dialogue)},
                                               {"question", question.text},
                                               {"l_max", std::to_string(l_max)}}));
  Elicited<std::vector<std::string>> out;
  out.attempt_count = 0;
  for (int i = 0; i <= config_.max_retries; ++i) {
    ++out.attempt_count;
    auto raw = complete(messages, config_.temperature);
    out.raw_text += (out.raw_text.empty() ? "" : "\n---\n") + raw;
    try {
      out.value = finalize_responses(parse_list_lines(raw), l_max);
      return out;
    } catch (const BackendError&) {
      // retry
    }
  }
  throw BackendError("fewer than 2 distinct simulated responses after " +
                     std::to_string(out.attempt_count) + " attempts");
}

Elicited<std::vector<double>> RemoteBackend::elicit_likelihoods(
    const prob::CandidateQuestion& question, std::span<const std::string> responses,
    const kb::DiseaseEntry& disease, const Dialogue&) const {
  if (disease.context.empty()) throw BackendError("disease '" + disease.id + "' has no context");
  std::vector<std::string> ids;
  std::string listing;
  for (std::size_t l = 0; l < responses.size(); ++l) {
    ids.push_back("r" + std::to_string(l + 1));
    listing += ids.back() + ": \"" + responses[l] + "\"\n";
  }
  auto prompt = prompts::render("elicit_likelihoods",
                                {{"disease_name", disease.name},
                                 {"disease_id", disease.id},
                                 {"disease_context", disease.context},
                                 {"question", question.text.empty() ? "(not specified)" : question.text},
                                 {"responses", listing},
                                 {"example", example_block(ids)}});
  auto r = elicit_id_values(prompt, ids);
  Elicited<std::vector<double>> out{{}, r.raw_text, r.repaired, r.attempt_count};
  for (const auto& id : ids) out.value.push_back(r.value.at(id));
  if (clamp_probabilities(out.value)) out.repaired = true;
  return out;
}

Elicited<std::string> RemoteBackend::humanize_question(const prob::CandidateQuestion& question,
                                                       const Dialogue&) const {
  auto messages = with_system(prompts::render(
      "humanize_question", {{"question", question.text},
                            {"rationale", question.rationale.empty() ? "as asked" : question.rationale}}));
  try {
    return complete_nonempty(messages, config_.temperature);
  } catch (const BackendUnavailable&) {
    throw;
  } catch (const BackendError&) {
    return {question.text, "", true, config_.max_retries + 1};
  }
}

Elicited<std::string> RemoteBackend::respond_as_patient(const PatientProfile& profile,
                                                        std::string_view question,
                                                        const Dialogue& dialogue) const {
  std::string facts;
  for (const auto& f : profile.facts) facts += "- " + f.topic + ": " + f.answer + "\n";
  auto user = prompts::render("patient_persona", {{"age", std::to_string(profile.age)},
                                                  {"symptoms", text::join(profile.symptoms, "; ")},
                                                  {"intention", profile.intention},
                                                  {"personality", profile.personality},
                                                  {"facts", facts.empty() ? "(none)\n" : facts},
                                                  {"dialogue", render_dialogue(dialogue)},
                                                  {"question", std::string(question)}});
  return complete_nonempty({{"user", user}}, config_.persona_temperature);
}

}  // namespace patience::backend
