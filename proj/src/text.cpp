#include "patience/text.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>

namespace patience::text {

namespace {

constexpr std::array<std::string_view, 52> kStopwords = {
    "a",     "an",   "and",  "are",  "as",    "at",    "be",   "but",  "by",
    "do",    "does", "for",  "from", "had",   "has",   "have", "i",    "if",
    "in",    "into", "is",   "it",   "its",   "lot",   "me",   "my",   "of",
    "on",    "or",   "so",   "such", "that",  "the",   "their", "then", "there",
    "these", "they", "this", "to",   "very",  "was",   "we",   "were", "what",
    "when",  "with", "you",  "your", "been",  "am",    "s"};

bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
         c >= 0x80;
}

char lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

}  // namespace

bool is_stopword(std::string_view token) {
  return std::find(kStopwords.begin(), kStopwords.end(), token) != kStopwords.end();
}

std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (is_word_byte(static_cast<unsigned char>(c))) {
      cur.push_back(lower(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<std::string> tokenize(std::string_view s) {
  auto all = words(s);
  std::erase_if(all, [](const std::string& w) { return is_stopword(w); });
  return all;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), lower);
  return out;
}

std::string trim(std::string_view s) {
  const auto* ws = " \t\r\n\f\v";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

std::string normalize(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(lower(c));
  }
  while (!out.empty() && (out.back() == '.' || out.back() == '?' || out.back() == '!')) {
    out.pop_back();
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.append(sep);
    out.append(parts[i]);
  }
  return out;
}

std::string fixed(double v, int decimals) {
  // %f is locale-sensitive only for LC_NUMERIC, which the library never sets.
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s(buf);
  if (s.find_first_not_of("-0.") == std::string::npos) {
    s.erase(0, s.front() == '-' ? 1 : 0);  // no "-0.000000"
  }
  return s;
}

std::string shortest(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace patience::text
