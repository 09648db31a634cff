#include <gtest/gtest.h>

#include <sstream>

#include "patience/cli.hpp"
#include "support.hpp"

namespace patience::cli {
namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args, const std::string& input = "") {
  args.insert(args.begin(), "patience");
  std::istringstream in(input);
  std::ostringstream out, err;
  int code = run(args, in, out, err);
  return {code, out.str(), err.str()};
}

std::string kb_path() { return (test::data_dir() / "sample_kb.jsonl").string(); }
std::string scripts() { return (test::data_dir() / "scripts").string(); }
std::string cases() { return (test::data_dir() / "cases").string(); }

TEST(Cli, IngestPrintsCounts) {
  auto r = invoke({"ingest", "--kb", kb_path()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "kb " + kb_path() + ": 6 symptoms, 10 diseases, 3 specialties\n");
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(invoke({"--help"}).code, 0);
  EXPECT_EQ(invoke({}).code, 2);
  EXPECT_EQ(invoke({"frobnicate"}).code, 2);
  EXPECT_EQ(invoke({"ingest", "--bogus"}).code, 2);
  EXPECT_EQ(invoke({"report", "--out", "x"}).code, 2);  // --run is required
  EXPECT_EQ(invoke({"ingest", "--kb", kb_path(), "--l-max", "9"}).code, 2);
  EXPECT_EQ(invoke({"ingest", "--kb", kb_path(), "--selection-mode", "greedy"}).code, 2);

  auto missing = invoke({"ingest", "--kb", "/nonexistent/kb.jsonl"});
  EXPECT_EQ(missing.code, 1);
  EXPECT_NE(missing.err.find("cannot open knowledge base"), std::string::npos);
  auto no_case = invoke({"simulate", "--kb", kb_path(), "--script-bundle", scripts(), "--cases", cases(),
                         "--case", "nope"});
  EXPECT_EQ(no_case.code, 1);
}

TEST(Cli, ConfigFileAndFlagPrecedence) {
  test::TempDir dir;
  test::write_file(dir / "c.toml", "max_turns = 1\nkb = \"" + kb_path() + "\"\nscript_bundle = \"" + scripts() + "\"\n");
  auto one = invoke({"simulate", "--config", (dir / "c.toml").string(), "--cases", cases(), "--case", "rhin-01"});
  ASSERT_EQ(one.code, 0) << one.err;
  EXPECT_NE(one.out.find("(max_turns)"), std::string::npos) << one.out;
  EXPECT_EQ(std::count(one.out.begin(), one.out.end(), '\n'), 7) << one.out;

  auto three = invoke({"simulate", "--config", (dir / "c.toml").string(), "--max-turns", "3", "--cases", cases(),
                       "--case", "rhin-01"});
  ASSERT_EQ(three.code, 0) << three.err;
  EXPECT_NE(three.out.find("H: "), std::string::npos);
  // Opening exchange plus three follow-ups.
  auto doctor_lines = 0;
  for (std::size_t p = 0; (p = three.out.find("Doctor:", p)) != std::string::npos; ++p) ++doctor_lines;
  EXPECT_EQ(doctor_lines, 4);

  test::write_file(dir / "bad.toml", "colour = blue\n");
  EXPECT_EQ(invoke({"ingest", "--config", (dir / "bad.toml").string()}).code, 2);
}

TEST(Cli, ConsultReadsAnswersFromInput) {
  test::TempDir dir;
  auto r = invoke({"consult", "--kb", kb_path(), "--script-bundle", scripts(), "--max-turns", "2", "--transcript",
                   (dir / "t.json").string()},
                  "I keep feeling dizzy.\nYes, when I get up from the sofa\nNo\n");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("Doctor: What brings you in today?"), std::string::npos);
  EXPECT_NE(r.out.find("H = "), std::string::npos);
  EXPECT_NE(r.out.find("Diagnosis: "), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir / "t.json"));
  EXPECT_EQ(invoke({"consult", "--kb", kb_path(), "--script-bundle", scripts()}, "").code, 1);
}

TEST(Cli, BenchTwiceGivesIdenticalFilesAndReportRecomputes) {
  test::TempDir dir;
  std::vector<std::string> args{"bench", "--kb", kb_path(), "--script-bundle", scripts(), "--cases", cases(),
                                "--policies", "app,random", "--seed", "5"};
  auto a = args, b = args;
  a.insert(a.end(), {"--out", (dir / "a").string(), "--workers", "1"});
  b.insert(b.end(), {"--out", (dir / "b").string(), "--workers", "4"});
  auto ra = invoke(a);
  auto rb = invoke(b);
  ASSERT_EQ(ra.code, 0) << ra.err;
  ASSERT_EQ(rb.code, 0) << rb.err;
  EXPECT_EQ(ra.out, rb.out);
  for (const char* f : {"run.json", "cases.csv", "entropy_curves.csv", "confidence.csv", "summary.txt"}) {
    EXPECT_EQ(test::read_file(dir / "a" / f), test::read_file(dir / "b" / f)) << f;
  }
  EXPECT_EQ(test::read_file(dir / "a" / "summary.txt"), ra.out);

  auto rr = invoke({"report", "--run", (dir / "a" / "run.json").string(), "--out", (dir / "r").string()});
  ASSERT_EQ(rr.code, 0) << rr.err;
  for (const char* f : {"entropy_curves.csv", "confidence.csv", "summary.txt"}) {
    EXPECT_EQ(test::read_file(dir / "a" / f), test::read_file(dir / "r" / f)) << f;
  }
  EXPECT_EQ(invoke({"report", "--run", (dir / "missing.json").string(), "--out", (dir / "r").string()}).code, 1);
}

TEST(Cli, SimulateWritesTranscripts) {
  test::TempDir dir;
  auto r = invoke({"simulate", "--kb", kb_path(), "--script-bundle", scripts(), "--cases", cases(), "--policy",
                   "first", "--out", (dir / "t").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("== dizz-01 (first)"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir / "t" / "gast-04.json"));
}

}  // namespace
}  // namespace patience::cli
