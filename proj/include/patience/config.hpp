#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "patience/engine.hpp"

namespace patience::config {

// Everything an invocation can configure. Defaults live in the member
// initialisers; a config file and then command-line flags override them.
struct AppConfig {
  engine::SessionConfig session;
  std::vector<std::string> policies{"app", "random"};
  int workers = 1;
  std::filesystem::path cases;
  std::filesystem::path out;
  std::string addr = "127.0.0.1:8080";
  std::filesystem::path transcript_dir;
  std::chrono::seconds session_ttl{3600};
  std::filesystem::path ui_dir;
  std::string cors_origin = "*";
};

// Flat `key = value` lines. Values are bare words, numbers, booleans,
// "double-quoted strings" or ["arrays", "of", "strings"]; '#' starts a
// comment. Returns raw values with quotes removed; arrays are joined by ','.
std::map<std::string, std::string> parse(std::string_view text, std::string_view source);

// Sets one key; throws ConfigError naming the key for unknown keys or bad values.
void apply_setting(AppConfig& cfg, std::string_view key, std::string_view value);
void apply(AppConfig& cfg, const std::map<std::string, std::string>& values, std::string_view source);

AppConfig load(const std::filesystem::path& path, AppConfig base = {});

std::vector<std::string> known_keys();

}  // namespace patience::config
