#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "patience/backend.hpp"
#include "patience/engine.hpp"
#include "patience/kb.hpp"

namespace httplib {
class Server;
}

namespace patience::service {

using Clock = std::chrono::steady_clock;

struct ServiceOptions {
  std::filesystem::path transcript_dir;  // empty: no persistence
  std::chrono::seconds ttl{3600};
  std::string cors_origin = "*";
  std::filesystem::path ui_dir;          // served under /ui/ when it exists
  std::function<Clock::time_point()> now = [] { return Clock::now(); };
  std::function<std::string()> new_id;   // default: random 128-bit hex
};

struct Reply {
  int status = 200;
  nlohmann::json body;
};

// Session store and request handling, independent of the HTTP transport.
// Safe to call from many threads; one session is served by one request at
// a time.
class SessionService {
 public:
  SessionService(const kb::KnowledgeBase& kb, const backend::Backend& backend,
                 engine::SessionConfig config, ServiceOptions options = {});

  // body: {"statement": "...", "config": {key: value, ...}}
  Reply create_session(const nlohmann::json& body);
  // body: {"response": "...", "turn": n}; with "turn", a request whose n is
  // not the session's current turn gets 409.
  Reply answer(const std::string& id, const nlohmann::json& body);
  Reply trace(const std::string& id);

  // Drops idle sessions; they answer 410 afterwards.
  std::size_t purge_expired();
  std::size_t active_sessions() const;

  // Registers all routes, CORS handling and the /ui/ mount.
  void install(httplib::Server& server);

 private:
  struct Session {
    std::mutex mutex;
    std::string id;
    engine::SessionConfig config;
    engine::DialogueState state;
    Clock::time_point created_at;
    Clock::time_point updated_at;
  };

  std::shared_ptr<Session> find(const std::string& id, Reply& error);
  void persist(const Session& s) const;
  std::optional<nlohmann::json> persisted_trace(const std::string& id) const;
  nlohmann::json snapshot(const Session& s) const;

  const kb::KnowledgeBase& kb_;
  const backend::Backend& backend_;
  engine::SessionConfig config_;
  ServiceOptions options_;

  mutable std::mutex store_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::set<std::string> expired_;
};

// Blocks serving on host:port until the process is stopped.
void serve(SessionService& service, const std::string& addr);

std::pair<std::string, int> parse_addr(const std::string& addr);

}  // namespace patience::service
