#include <gtest/gtest.h>

#include <set>

#include "patience/error.hpp"
#include "patience/prompts.hpp"
#include "support.hpp"

namespace patience::prompts {
namespace {

TEST(Prompts, EveryAssetFileIsEmbedded) {
  std::set<std::string> on_disk;
  for (const auto& e : std::filesystem::directory_iterator(test::source_dir() / "assets" / "prompts")) {
    if (e.path().extension() == ".txt") on_disk.insert(e.path().stem().string());
  }
  std::set<std::string> embedded;
  for (const auto& a : all()) embedded.insert(a.id);
  EXPECT_EQ(on_disk, embedded);
}

TEST(Prompts, EmbeddedTextMatchesFile) {
  for (const auto& a : all()) {
    auto file = test::read_file(test::source_dir() / "assets" / "prompts" / (a.id + ".txt"));
    auto parsed = parse_asset(a.id, file);
    EXPECT_EQ(parsed.template_text, a.template_text) << a.id;
    EXPECT_FALSE(a.notes.empty()) << a.id;
  }
}

TEST(Prompts, OpeningQuestion) {
  EXPECT_EQ(opening_question(), "What brings you in today? Please describe what you're feeling.");
}

TEST(Prompts, ParseAssetStripsNotes) {
  auto a = parse_asset("x", "# notes: first\n# notes: second\nHello {{name}}, {{name}} and {{other}}\n\n");
  EXPECT_EQ(a.notes, "first second");
  EXPECT_EQ(a.template_text, "Hello {{name}}, {{name}} and {{other}}");
  EXPECT_EQ(a.placeholders(), (std::vector<std::string>{"name", "other"}));
}

TEST(Prompts, RenderFillsEveryPlaceholder) {
  auto a = parse_asset("x", "Hi {{a}} / {{b}} / {{a}}");
  EXPECT_EQ(render(a, {{"a", "1"}, {"b", "{{a}}"}}), "Hi 1 / {{a}} / 1");
}

TEST(Prompts, RenderRejectsMissingAndUnusedValues) {
  auto a = parse_asset("x", "Hi {{a}}");
  EXPECT_THROW(render(a, {}), Error);
  EXPECT_THROW(render(a, {{"a", "1"}, {"b", "2"}}), Error);
  EXPECT_THROW(render(parse_asset("y", "Hi {{a"), {}), Error);
  EXPECT_THROW(get("no_such_asset"), Error);
}

TEST(Prompts, DistributionPromptNeedsItsInputs) {
  const auto& a = get("elicit_distribution");
  auto ph = a.placeholders();
  for (const char* name : {"gamma", "dialogue", "candidates"}) {
    EXPECT_NE(std::find(ph.begin(), ph.end(), name), ph.end()) << name;
  }
}

}  // namespace
}  // namespace patience::prompts
