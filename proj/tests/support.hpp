#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "patience/backend.hpp"
#include "patience/kb.hpp"
#include "patience/scripted_backend.hpp"

namespace patience::test {

inline std::filesystem::path source_dir() { return PATIENCE_SOURCE_DIR; }
inline std::filesystem::path data_dir() { return source_dir() / "data"; }
inline std::filesystem::path fixture_dir() { return source_dir() / "tests" / "fixtures"; }

inline const kb::KnowledgeBase& sample_kb() {
  static const kb::KnowledgeBase kb = kb::ingest(data_dir() / "sample_kb.jsonl");
  return kb;
}

inline backend::BackendConfig scripted_config(bool strict = false) {
  backend::BackendConfig c;
  c.kind = backend::BackendKind::scripted;
  c.script_bundle = data_dir() / "scripts";
  c.strict = strict;
  return c;
}

inline const backend::ScriptedBackend& sample_backend() {
  static const backend::ScriptedBackend b(backend::ScriptBundle::load(data_dir() / "scripts"),
                                          scripted_config());
  return b;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("patience-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace patience::test
