#include "patience/service.hpp"

#include <fstream>
#include <random>
#include <sstream>

#include <httplib.h>

#include "patience/config.hpp"
#include "patience/error.hpp"
#include "patience/text.hpp"
#include "patience/transcript.hpp"

namespace patience::service {

using nlohmann::json;

namespace {

Reply error_reply(int status, const std::string& message) { return {status, {{"error", message}}}; }

std::string random_id() {
  thread_local std::mt19937_64 rng{std::random_device{}()};
  std::ostringstream out;
  out << std::hex;
  for (int i = 0; i < 2; ++i) {
    auto v = rng();
    for (int b = 0; b < 16; ++b) out << ((v >> (60 - 4 * b)) & 0xf);
  }
  return out.str();
}

bool valid_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  for (char c : id) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') return false;
  }
  return true;
}

const std::set<std::string, std::less<>> kOverridable = {
    "k", "l_max", "max_turns", "stop_entropy", "stop_top1", "selection_mode", "row_normalize", "seed", "policy",
};

}  // namespace

SessionService::SessionService(const kb::KnowledgeBase& kb, const backend::Backend& backend,
                               engine::SessionConfig config, ServiceOptions options)
    : kb_(kb), backend_(backend), config_(std::move(config)), options_(std::move(options)) {
  config_.validate();
  if (!options_.new_id) options_.new_id = random_id;
  if (!options_.now) options_.now = [] { return Clock::now(); };
  if (!options_.transcript_dir.empty()) std::filesystem::create_directories(options_.transcript_dir);
}

json SessionService::snapshot(const Session& s) const {
  const auto& st = s.state;
  json out = {{"session_id", s.id},
              {"status", std::string(engine::to_string(st.status))},
              {"turn", st.iteration},
              {"distribution", transcript::to_json(st.current())},
              {"entropy", st.entropy_trace.back()},
              {"entropy_trace", st.entropy_trace}};
  if (st.status == engine::Status::active) {
    out["question"] = st.pending_question;
  } else {
    out["question"] = nullptr;
  }
  out["diagnosis"] = st.diagnosis ? transcript::to_json(*st.diagnosis) : json(nullptr);
  out["selection_report"] =
      st.selection_reports.empty() ? json(nullptr) : transcript::to_json(st.selection_reports.back());
  return out;
}

Reply SessionService::create_session(const json& body) {
  if (!body.is_object()) return error_reply(400, "request body must be a JSON object");
  auto it = body.find("statement");
  if (it == body.end() || !it->is_string()) return error_reply(400, "missing string field 'statement'");
  std::string statement = it->get<std::string>();
  if (text::trim(statement).empty()) return error_reply(400, "statement is empty");

  config::AppConfig app;
  app.session = config_;
  if (auto c = body.find("config"); c != body.end() && !c->is_null()) {
    if (!c->is_object()) return error_reply(400, "'config' must be an object");
    try {
      for (const auto& [k, v] : c->items()) {
        if (!kOverridable.contains(k)) return error_reply(400, "config key '" + k + "' cannot be overridden");
        config::apply_setting(app, k, v.is_string() ? v.get<std::string>() : v.dump());
      }
      app.session.validate();
    } catch (const Error& e) {
      return error_reply(400, e.what());
    }
  }

  auto session = std::make_shared<Session>();
  session->config = app.session;
  try {
    engine::Engine eng(kb_, backend_, session->config);
    session->state = eng.start_session(statement);
  } catch (const BackendError& e) {
    return error_reply(502, e.what());
  } catch (const Error& e) {
    return error_reply(400, e.what());
  }
  session->created_at = session->updated_at = options_.now();
  {
    std::lock_guard lock(store_mutex_);
    do {
      session->id = options_.new_id();
    } while (sessions_.contains(session->id) || expired_.contains(session->id));
    sessions_.emplace(session->id, session);
  }
  if (session->state.status != engine::Status::active) persist(*session);
  return {201, snapshot(*session)};
}

std::shared_ptr<SessionService::Session> SessionService::find(const std::string& id, Reply& error) {
  std::lock_guard lock(store_mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) {
    error = expired_.contains(id) ? error_reply(410, "session '" + id + "' has expired")
                                  : error_reply(404, "unknown session '" + id + "'");
    return nullptr;
  }
  // Only sessions untouched for the whole TTL expire; a request in flight
  // keeps its session alive through updated_at.
  if (options_.now() - it->second->updated_at > options_.ttl) {
    std::unique_lock session_lock(it->second->mutex, std::try_to_lock);
    if (session_lock.owns_lock()) {
      expired_.insert(id);
      sessions_.erase(it);
      error = error_reply(410, "session '" + id + "' has expired");
      return nullptr;
    }
  }
  return it->second;
}

Reply SessionService::answer(const std::string& id, const json& body) {
  Reply err;
  auto session = find(id, err);
  if (!session) return err;
  if (!body.is_object()) return error_reply(400, "request body must be a JSON object");
  auto r = body.find("response");
  if (r == body.end() || !r->is_string()) return error_reply(400, "missing string field 'response'");
  std::optional<int> turn;
  if (auto t = body.find("turn"); t != body.end() && !t->is_null()) {
    if (!t->is_number_integer()) return error_reply(400, "'turn' must be an integer");
    turn = t->get<int>();
  }

  std::unique_lock lock(session->mutex, std::defer_lock);
  if (turn) {
    lock.lock();
  } else if (!lock.try_lock()) {
    return error_reply(409, "another answer for this session is in progress");
  }
  if (session->state.status != engine::Status::active) {
    return error_reply(409, "session '" + id + "' is already " +
                                std::string(engine::to_string(session->state.status)));
  }
  if (turn && *turn != session->state.iteration) {
    return error_reply(409, "turn " + std::to_string(*turn) + " was already answered; current turn is " +
                                std::to_string(session->state.iteration));
  }

  try {
    engine::Engine eng(kb_, backend_, session->config);
    session->state = eng.step(session->state, r->get<std::string>()).state;
  } catch (const BackendError& e) {
    return error_reply(502, e.what());
  } catch (const Error& e) {
    return error_reply(400, e.what());
  }
  session->updated_at = options_.now();
  if (session->state.status != engine::Status::active) persist(*session);
  return {200, snapshot(*session)};
}

Reply SessionService::trace(const std::string& id) {
  std::shared_ptr<Session> session;
  {
    std::lock_guard lock(store_mutex_);
    if (auto it = sessions_.find(id); it != sessions_.end()) session = it->second;
  }
  if (session) {
    std::lock_guard lock(session->mutex);
    return {200, transcript::trace(session->state)};
  }
  if (auto stored = persisted_trace(id)) return {200, *stored};
  {
    std::lock_guard lock(store_mutex_);
    if (expired_.contains(id)) return error_reply(410, "session '" + id + "' has expired");
  }
  return error_reply(404, "unknown session '" + id + "'");
}

void SessionService::persist(const Session& s) const {
  if (options_.transcript_dir.empty()) return;
  transcript::save(options_.transcript_dir / (s.id + ".json"), s.state, s.config);
}

std::optional<json> SessionService::persisted_trace(const std::string& id) const {
  if (options_.transcript_dir.empty() || !valid_id(id)) return std::nullopt;
  auto path = options_.transcript_dir / (id + ".json");
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) return std::nullopt;
  return transcript::trace(transcript::load(path).state);
}

std::size_t SessionService::purge_expired() {
  std::lock_guard lock(store_mutex_);
  std::size_t n = 0;
  const auto now = options_.now();
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    std::unique_lock session_lock(it->second->mutex, std::try_to_lock);
    if (session_lock.owns_lock() && now - it->second->updated_at > options_.ttl) {
      expired_.insert(it->first);
      session_lock.unlock();
      it = sessions_.erase(it);
      ++n;
    } else {
      ++it;
    }
  }
  return n;
}

std::size_t SessionService::active_sessions() const {
  std::lock_guard lock(store_mutex_);
  return sessions_.size();
}

void SessionService::install(httplib::Server& server) {
  auto send = [](httplib::Response& res, const Reply& reply) {
    res.status = reply.status;
    res.set_content(reply.body.dump(), "application/json");
  };
  auto parse_body = [](const httplib::Request& req, json& out) {
    try {
      out = req.body.empty() ? json::object() : json::parse(req.body);
      return true;
    } catch (const json::parse_error&) {
      return false;
    }
  };

  const std::string origin = options_.cors_origin;
  server.set_default_headers({{"Access-Control-Allow-Origin", origin},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
  server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("ok", "text/plain");
  });
  server.Post("/sessions", [this, send, parse_body](const httplib::Request& req, httplib::Response& res) {
    json body;
    if (!parse_body(req, body)) return send(res, error_reply(400, "malformed JSON body"));
    send(res, create_session(body));
  });
  server.Post(R"(/sessions/([^/]+)/answer)",
              [this, send, parse_body](const httplib::Request& req, httplib::Response& res) {
                json body;
                if (!parse_body(req, body)) return send(res, error_reply(400, "malformed JSON body"));
                send(res, answer(req.matches[1], body));
              });
  server.Get(R"(/sessions/([^/]+)/trace)", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, trace(req.matches[1]));
  });
  server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    res.status = 500;
    res.set_content(json{{"error", what}}.dump(), "application/json");
  });

  std::error_code ec;
  if (!options_.ui_dir.empty() && std::filesystem::is_directory(options_.ui_dir, ec)) {
    server.set_mount_point("/ui", options_.ui_dir.string());
  }
}

std::pair<std::string, int> parse_addr(const std::string& addr) {
  auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw ConfigError("address '" + addr + "' must be host:port");
  std::string host = addr.substr(0, colon);
  int port = 0;
  try {
    std::size_t used = 0;
    port = std::stoi(addr.substr(colon + 1), &used);
    if (used != addr.size() - colon - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw ConfigError("invalid port in address '" + addr + "'");
  }
  if (port < 0 || port > 65535) throw ConfigError("port out of range in '" + addr + "'");
  if (host.empty()) host = "0.0.0.0";
  return {host, port};
}

void serve(SessionService& service, const std::string& addr) {
  auto [host, port] = parse_addr(addr);
  httplib::Server server;
  service.install(server);
  if (!server.listen(host, port)) throw Error("cannot listen on " + addr);
}

}  // namespace patience::service
