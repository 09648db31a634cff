#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace patience::text {

// Lowercase ASCII, split on anything that is not a letter or digit, drop
// common English function words. Non-ASCII bytes are kept inside tokens.
std::vector<std::string> tokenize(std::string_view s);

// Same split without stopword removal.
std::vector<std::string> words(std::string_view s);

// Lowercase, collapse whitespace, trim, strip trailing punctuation. Used as
// the lookup key for scripted fingerprints.
std::string normalize(std::string_view s);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

bool is_stopword(std::string_view token);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Fixed-point with `decimals` places and '.' separator regardless of locale.
std::string fixed(double v, int decimals = 6);

// Shortest representation that parses back to the same double.
std::string shortest(double v);

}  // namespace patience::text
